"""
Deterministic replay: a reduced Sim1 inference run twice from the same seed must produce
byte-identical summary files.

    python -m src.replay_mode [--seed 7]
"""
import logging
import sys
import tempfile

import click

from src.config import ChainConfig, Hyperparameters, RunConfig
from src.ingestion import write_counts
from src.main import run_pipeline
from src.observability import SamplerStage, SamplerTelemetry, configure_logging
from src.outputs import summary_digest
from src.rng import stream
from src.simulate import generate_sim1

logger = logging.getLogger(__name__)

REPLAY_CHAIN = dict(n_iter=300, burn_in=150, inner_advance=2, warm_burn_in=30, log_every=0)
REPLAY_HYPER = dict(c_max=4)


def run_replay(seed: int = 7) -> bool:
    SamplerTelemetry.emit(SamplerStage.IDLE, -1, {"status": "replay started", "seed": seed})
    data, _ = generate_sim1(stream(seed))
    digests = []
    with tempfile.TemporaryDirectory() as workdir:
        path_N, path_n = write_counts(data, workdir)
        for attempt in range(2):
            config = RunConfig(
                subcommand="infer", out_dir=f"{workdir}/run_{attempt}", path_N=path_N, path_n=path_n,
                hyper=Hyperparameters(**REPLAY_HYPER), chain=ChainConfig(seed=seed, **REPLAY_CHAIN),
            )
            if run_pipeline(config) != 0:
                logger.error("replay run %d failed", attempt)
                return False
            digests.append(summary_digest(config.out_dir))

    differing = sorted(name for name in digests[0] if digests[0][name] != digests[1].get(name))
    if differing or not digests[0]:
        logger.error("replay diverged in %s", ", ".join(differing) or "empty output")
        return False
    logger.info("replay identical across %d summary files", len(digests[0]))
    return True


@click.command()
@click.option("--seed", type=int, default=7, show_default=True)
def main(seed):
    configure_logging()
    sys.exit(0 if run_replay(seed) else 1)


if __name__ == "__main__":
    main()

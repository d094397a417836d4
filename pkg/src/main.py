"""
Command-line entry point: python -m src.main {simulate,infer,summarize,score}.
Every command writes into --out, leaves a manifest behind on success and a FAILED marker
on error.
"""
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Dict, List, Optional

import click
from pydantic import ValidationError

from src.config import ChainConfig, Hyperparameters, RunConfig, settings
from src.errors import CloneMixError
from src.heatmaps import render_heatmaps
from src.ingestion import load_counts, write_counts
from src.manifest import RunManifest
from src.mcmc import ChainTrace, run_fixed_C
from src.model import ReadCountData
from src.observability import SamplerStage, SamplerTelemetry, configure_logging
from src.outputs import emit_outputs, load_summary, load_truth, write_truth
from src.rng import stream
from src.simulate import SCENARIOS, generate_scenario, score_recovery
from src.summary import summarize
from src.transdim import run_transdimensional

logger = logging.getLogger(__name__)

TRACE_NAME = "trace.npz"
REPORT_NAME = "recovery.json"
SCORE_DIR = "score"


# --- Stages ---

def run_chains(data: ReadCountData, config: RunConfig) -> ChainTrace:
    """Independent chains in threads, pooled in chain order."""
    hyper = config.hyper.resolve_for(data)

    def one(chain_id: int) -> ChainTrace:
        if config.fixed_C is not None:
            return run_fixed_C(data, hyper, config.fixed_C, config.chain, chain_id=chain_id)
        return run_transdimensional(data, hyper, config.chain, chain_id=chain_id)

    if config.chains == 1:
        return one(0)
    workers = max(1, min(config.chains, settings.max_workers))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        traces = list(pool.map(one, range(config.chains)))
    return ChainTrace.concatenate(traces)


def _summarize_into(trace: ChainTrace, data: ReadCountData, config: RunConfig) -> List[str]:
    truth = load_truth(config.truth_dir) if config.truth_dir else None
    SamplerTelemetry.emit(SamplerStage.SUMMARIZE, -1, {"retained": len(trace)})
    summary = summarize(trace, data, config.hyper.Q, truth=truth)
    SamplerTelemetry.emit(SamplerStage.EMIT, -1, {"C_star": summary.C_star, "out": config.out_dir})
    outputs = emit_outputs(trace, summary, config.out_dir)
    if config.heatmaps:
        outputs += render_heatmaps(summary, config.out_dir)
    return outputs


def stage_simulate(config: RunConfig) -> List[str]:
    data, truth = generate_scenario(config.scenario, stream(config.chain.seed))
    outputs = write_counts(data, config.out_dir)
    outputs += write_truth(truth, data.locus_ids, data.sample_ids, config.out_dir)
    logger.info("simulated %s: %d loci x %d samples, C=%d (split Be%s)",
                truth.name, data.S, data.T, truth.C, truth.split_beta)
    return outputs


def stage_infer(config: RunConfig) -> List[str]:
    data = load_counts(config.path_N, config.path_n)
    trace = run_chains(data, config)
    os.makedirs(config.out_dir, exist_ok=True)
    trace_path = os.path.join(config.out_dir, TRACE_NAME)
    trace.save(trace_path)
    return [trace_path] + _summarize_into(trace, data, config)


def stage_summarize(config: RunConfig) -> List[str]:
    data = load_counts(config.path_N, config.path_n)
    return _summarize_into(ChainTrace.load(config.trace_path), data, config)


def stage_score(config: RunConfig) -> List[str]:
    report = score_recovery(load_summary(config.summary_dir), load_truth(config.truth_dir))
    os.makedirs(config.out_dir, exist_ok=True)
    path = os.path.join(config.out_dir, REPORT_NAME)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(report.model_dump(), f, indent=2, sort_keys=True)
        f.write("\n")
    click.echo(report.model_dump_json(indent=2))
    return [path]


STAGES: Dict[str, Callable[[RunConfig], List[str]]] = {
    "simulate": stage_simulate,
    "infer": stage_infer,
    "summarize": stage_summarize,
    "score": stage_score,
}


def run_pipeline(config: RunConfig) -> int:
    """Runs one stage; 0 on success, 1 on failure (partial outputs stay, FAILED marks them)."""
    manifest = RunManifest(config.out_dir)
    manifest.clear_failed()
    try:
        outputs = STAGES[config.subcommand](config)
        manifest.write(config, outputs)
        return 0
    except CloneMixError as e:
        logger.error("%s failed: %s", config.subcommand, e)
        manifest.mark_failed(e)
        return 1
    except Exception as e:
        logger.exception("%s failed unexpectedly", config.subcommand)
        manifest.mark_failed(e)
        return 1


# --- Click surface ---

def _float_pair(ctx, param, value):
    if value is None:
        return None
    try:
        first, second = (float(v) for v in value.split(","))
    except ValueError:
        raise click.BadParameter("expected two comma-separated numbers, e.g. 25,975")
    return first, second


def _float_list(ctx, param, value):
    if value is None:
        return None
    try:
        values = [float(v) for v in value.split(",")]
    except ValueError:
        raise click.BadParameter("expected a number or comma-separated numbers")
    return values[0] if len(values) == 1 else values


def _build(subcommand: str, out_dir: str, hyper: Optional[dict] = None, chain: Optional[dict] = None,
           **fields) -> RunConfig:
    try:
        return RunConfig(
            subcommand=subcommand, out_dir=out_dir,
            hyper=Hyperparameters(**{k: v for k, v in (hyper or {}).items() if v is not None}),
            chain=ChainConfig(**{k: v for k, v in (chain or {}).items() if v is not None}),
            **fields,
        )
    except ValidationError as e:
        raise click.UsageError(str(e))


def _run(config: RunConfig):
    sys.exit(run_pipeline(config))


@click.group()
@click.option("--log-level", default=None, help="Overrides CLONEMIX_LOG_LEVEL.")
@click.option("--log-file", default=None, type=click.Path(dir_okay=False), help="Overrides CLONEMIX_LOG_FILE.")
def cli(log_level, log_file):
    """Subclone inference from paired total/variant read counts."""
    configure_logging(log_level or settings.log_level, log_file or settings.log_file)


@cli.command()
@click.option("--scenario", type=click.Choice(sorted(SCENARIOS)), default="sim1", show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
def simulate(scenario, seed, out_dir):
    """Generate a synthetic data set and its truth."""
    _run(_build("simulate", out_dir, chain={"seed": seed}, scenario=scenario))


@cli.command()
@click.option("--N", "path_N", type=click.Path(exists=True, dir_okay=False), help="Total read counts CSV.")
@click.option("--n", "path_n", type=click.Path(exists=True, dir_okay=False), help="Variant read counts CSV.")
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--seed", type=int, default=None)
@click.option("--iters", "n_iter", type=int, default=None, help="[16000]")
@click.option("--burnin", "burn_in", type=int, default=None, help="[6000]")
@click.option("--thin", type=int, default=None, help="[1]")
@click.option("--Q", "Q", type=int, default=None, help="Maximum copy number [3].")
@click.option("--r", type=float, default=None, help="Geometric prior rate on C [0.2].")
@click.option("--alpha", type=float, default=None, help="[2]")
@click.option("--beta", type=float, default=None, help="[1]")
@click.option("--gamma", type=str, default=None, callback=_float_list, help="Scalar or Q values [0.5].")
@click.option("--d0", type=float, default=None, help="[0.5]")
@click.option("--d", type=float, default=None, help="[1]")
@click.option("--a00", type=float, default=None, help="[0.3]")
@click.option("--b00", type=float, default=None, help="[5]")
@click.option("--a", "a_phi", type=str, default=None, callback=_float_list,
              help="Depth prior shape, scalar or one per sample [b * median(N)].")
@click.option("--b", "b_phi", type=str, default=None, callback=_float_list,
              help="Depth prior rate, scalar or one per sample [3].")
@click.option("--split-beta", type=str, default=None, callback=_float_pair, help="[25,975]")
@click.option("--cmax", "c_max", type=int, default=None, help="[8]")
@click.option("--fixed-C", "fixed_C", type=int, default=None, help="Skip the C-move and run at this C.")
@click.option("--chains", type=int, default=None, help="[1]")
@click.option("--rj-every", type=int, default=None, help="[1]")
@click.option("--inner-advance", type=int, default=None, help="[10]")
@click.option("--warm-burn-in", type=int, default=None, help="[500]")
@click.option("--initial-C", "initial_C", type=int, default=None, help="[1]")
@click.option("--adapt/--no-adapt", "adapt_burn_in", default=None, help="Tune step sizes during burn-in.")
@click.option("--debug", is_flag=True, default=None)
@click.option("--progress/--no-progress", default=None)
@click.option("--heatmaps", is_flag=True, default=None)
@click.option("--truth-dir", type=click.Path(exists=True, file_okay=False), default=None)
@click.option("--from-manifest", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Repeat the inference recorded in a manifest.")
def infer(path_N, path_n, out_dir, from_manifest, chains, fixed_C, heatmaps, truth_dir, **options):
    """Posterior inference (trans-dimensional unless --fixed-C)."""
    hyper_keys = set(Hyperparameters.model_fields)
    hyper = {k: v for k, v in options.items() if k in hyper_keys}
    chain = {k: v for k, v in options.items() if k not in hyper_keys}
    if chain.get("progress") is None:
        chain["progress"] = settings.progress or None

    if from_manifest:
        base = RunManifest.load_config(from_manifest)
        if base.subcommand != "infer":
            raise click.UsageError(f"{from_manifest} records a '{base.subcommand}' run, not an inference")
        config = base.model_copy(update={"out_dir": out_dir})
        _run(config)
        return
    if not path_N or not path_n:
        raise click.UsageError("--N and --n are required unless --from-manifest is given")
    _run(_build("infer", out_dir, hyper=hyper, chain=chain, path_N=path_N, path_n=path_n,
                chains=chains or 1, fixed_C=fixed_C, heatmaps=bool(heatmaps), truth_dir=truth_dir))


@cli.command("summarize")
@click.option("--trace", "trace_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--N", "path_N", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--n", "path_n", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--Q", "Q", type=int, default=None)
@click.option("--truth-dir", type=click.Path(exists=True, file_okay=False), default=None)
@click.option("--heatmaps", is_flag=True, default=False)
def summarize_cmd(trace_path, path_N, path_n, out_dir, Q, truth_dir, heatmaps):
    """Summarize a saved trace."""
    _run(_build("summarize", out_dir, hyper={"Q": Q}, trace_path=trace_path, path_N=path_N, path_n=path_n,
                truth_dir=truth_dir, heatmaps=heatmaps))


@cli.command()
@click.option("--summary-dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--truth-dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--out", "out_dir", default=None, type=click.Path(file_okay=False), help="[SUMMARY_DIR/score]")
def score(summary_dir, truth_dir, out_dir):
    """Compare a summary with a known truth."""
    out_dir = out_dir or os.path.join(summary_dir, SCORE_DIR)
    if os.path.abspath(out_dir) == os.path.abspath(summary_dir):
        raise click.UsageError("--out must differ from --summary-dir; its manifest belongs to the inference run")
    _run(_build("score", out_dir, summary_dir=summary_dir, truth_dir=truth_dir))


if __name__ == "__main__":
    cli()

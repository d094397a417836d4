"""
Result files. Every matrix is a CSV with ids in the first column and a header row;
reals are written with 12 significant digits so reruns compare byte for byte.
"""
import logging
import os
from typing import Dict, List

import numpy as np
import pandas as pd

from src.ingestion import FLOAT_FORMAT, read_numeric, write_matrix
from src.mcmc import ChainTrace
from src.simulate import ScenarioTruth
from src.summary import QUANTILES, PosteriorSummary

logger = logging.getLogger(__name__)

SUMMARY_FILES = [
    "C_posterior.csv", "L_star.csv", "Z_star.csv", "w_star.csv", "pi_star.csv", "phi_p0.csv",
    "residuals_M.csv", "residuals_p.csv", "residuals_N.csv", "trace_scalars.csv",
]
TRUTH_FILES = ["L_true.csv", "Z_true.csv", "w_true.csv", "phi_p0_true.csv"]


def subclone_labels(C: int) -> List[str]:
    return [f"subclone_{c + 1}" for c in range(C)]


def weight_labels(C: int) -> List[str]:
    return ["background"] + subclone_labels(C)


def _quantile_labels() -> List[str]:
    return [f"q{q * 100:g}" for q in QUANTILES]


def emit_outputs(trace: ChainTrace, summary: PosteriorSummary, out_dir: str) -> List[str]:
    os.makedirs(out_dir, exist_ok=True)
    path = lambda name: os.path.join(out_dir, name)
    C = summary.C_star
    Q = summary.pi_star.shape[1] - 1

    posterior = pd.DataFrame({"C": list(summary.C_posterior), "frequency": list(summary.C_posterior.values())})
    posterior.to_csv(path("C_posterior.csv"), index=False, float_format=FLOAT_FORMAT, lineterminator="\n")

    write_matrix(path("L_star.csv"), summary.L_star, summary.locus_ids, subclone_labels(C))
    write_matrix(path("Z_star.csv"), summary.Z_star, summary.locus_ids, subclone_labels(C))
    write_matrix(path("w_star.csv"), summary.w_star, summary.sample_ids, weight_labels(C), index_label="sample")
    write_matrix(path("pi_star.csv"), summary.pi_star, subclone_labels(C),
                 [f"copies_{q}" for q in range(Q + 1)], index_label="subclone")

    rows = [f"phi_{sample}" for sample in summary.sample_ids] + ["p0"]
    means = np.concatenate([summary.phi_star, [summary.p0_star]])
    quantiles = np.vstack([summary.phi_quantiles.T, summary.p0_quantiles[None, :]])
    write_matrix(path("phi_p0.csv"), np.column_stack([means, quantiles]), rows,
                 ["mean"] + _quantile_labels(), index_label="parameter")

    for name, values in (("residuals_M.csv", summary.residual_M), ("residuals_p.csv", summary.residual_p),
                         ("residuals_N.csv", summary.residual_N)):
        write_matrix(path(name), values, summary.locus_ids, summary.sample_ids)

    scalars = pd.DataFrame({
        "iteration": np.arange(len(trace.C_path)),
        "C": trace.C_path,
        "log_joint": trace.log_joint,
        "p0": trace.p0_path,
    })
    scalars.to_csv(path("trace_scalars.csv"), index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    logger.info("wrote %d summary files to %s", len(SUMMARY_FILES), out_dir)
    return [path(name) for name in SUMMARY_FILES]


def load_summary(summary_dir: str) -> PosteriorSummary:
    """Reads the point estimates back; residuals are not needed for scoring."""
    path = lambda name: os.path.join(summary_dir, name)
    L = read_numeric(path("L_star.csv"))
    w = read_numeric(path("w_star.csv"))
    scalars = read_numeric(path("phi_p0.csv"))
    posterior = pd.read_csv(path("C_posterior.csv"))
    phi = scalars.loc[[r for r in scalars.index if r.startswith("phi_")], "mean"].to_numpy()
    return PosteriorSummary(
        C_star=L.shape[1],
        L_star=L.to_numpy().astype(int),
        Z_star=read_numeric(path("Z_star.csv")).to_numpy().astype(int),
        w_star=w.to_numpy(),
        pi_star=read_numeric(path("pi_star.csv")).to_numpy(),
        phi_star=phi,
        p0_star=float(scalars.loc["p0", "mean"]),
        C_posterior={int(c): float(f) for c, f in zip(posterior["C"], posterior["frequency"])},
        locus_ids=[str(i) for i in L.index],
        sample_ids=[str(i) for i in w.index],
    )


def write_truth(truth: ScenarioTruth, locus_ids: List[str], sample_ids: List[str], out_dir: str) -> List[str]:
    os.makedirs(out_dir, exist_ok=True)
    path = lambda name: os.path.join(out_dir, name)
    write_matrix(path("L_true.csv"), truth.L, locus_ids, subclone_labels(truth.C))
    write_matrix(path("Z_true.csv"), truth.Z, locus_ids, subclone_labels(truth.C))
    write_matrix(path("w_true.csv"), truth.w, sample_ids, weight_labels(truth.C), index_label="sample")
    values = np.concatenate([truth.phi, [truth.p0]])
    write_matrix(path("phi_p0_true.csv"), values[:, None], [f"phi_{s}" for s in sample_ids] + ["p0"],
                 ["value"], index_label="parameter")
    return [path(name) for name in TRUTH_FILES]


def load_truth(truth_dir: str, name: str = "custom") -> ScenarioTruth:
    path = lambda file: os.path.join(truth_dir, file)
    scalars = read_numeric(path("phi_p0_true.csv"))
    phi = scalars.loc[[r for r in scalars.index if r.startswith("phi_")], "value"].to_numpy()
    return ScenarioTruth(
        L=read_numeric(path("L_true.csv")).to_numpy().astype(int),
        Z=read_numeric(path("Z_true.csv")).to_numpy().astype(int),
        w=read_numeric(path("w_true.csv")).to_numpy(),
        phi=phi,
        p0=float(scalars.loc["p0", "value"]),
        name=name,
    )


def summary_digest(out_dir: str) -> Dict[str, bytes]:
    """Raw bytes of every summary file present, for replay comparisons."""
    digest = {}
    for name in SUMMARY_FILES:
        file = os.path.join(out_dir, name)
        if os.path.exists(file):
            with open(file, "rb") as f:
                digest[name] = f.read()
    return digest

"""
Static SVG renderings of the summary matrices and residual histograms.
Copy numbers use a fixed loss/neutral/gain ramp; files are reproducible across reruns.
"""
import logging
import os
from typing import List

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.colors import BoundaryNorm, ListedColormap, LinearSegmentedColormap  # noqa: E402

from src.summary import PosteriorSummary  # noqa: E402

logger = logging.getLogger(__name__)

LOSS, NEUTRAL, GAIN = "#2166ac", "#f7f7f7", "#b2182b"
RAMP = LinearSegmentedColormap.from_list("loss_neutral_gain", [LOSS, NEUTRAL, GAIN])

matplotlib.rcParams["svg.hashsalt"] = "clonemix"
matplotlib.rcParams["svg.fonttype"] = "none"


def copy_number_colormap(Q: int):
    """0 and 1 copies are losses, 2 neutral, anything above a gain."""
    colors = [LOSS if q < 2 else NEUTRAL if q == 2 else GAIN for q in range(Q + 1)]
    return ListedColormap(colors), BoundaryNorm(np.arange(-0.5, Q + 1.5), Q + 1)


def _save(fig, path: str) -> str:
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def _matrix(values: np.ndarray, title: str, path: str, cmap, norm=None, vmin=None, vmax=None) -> str:
    fig, ax = plt.subplots(figsize=(2 + 0.6 * values.shape[1], 6))
    image = ax.imshow(values, aspect="auto", interpolation="nearest", cmap=cmap, norm=norm, vmin=vmin, vmax=vmax)
    ax.set_title(title)
    ax.set_xlabel("subclone")
    ax.set_ylabel("locus")
    ax.set_xticks(range(values.shape[1]))
    ax.set_xticklabels([str(c + 1) for c in range(values.shape[1])])
    fig.colorbar(image, ax=ax)
    return _save(fig, path)


def render_heatmaps(summary: PosteriorSummary, out_dir: str) -> List[str]:
    os.makedirs(out_dir, exist_ok=True)
    Q = summary.pi_star.shape[1] - 1
    cmap, norm = copy_number_colormap(Q)
    paths = [
        _matrix(summary.L_star, "L*", os.path.join(out_dir, "L_star.svg"), cmap, norm=norm),
        _matrix(summary.Z_star, "Z*", os.path.join(out_dir, "Z_star.svg"), RAMP, vmin=0, vmax=Q),
        _matrix(summary.w_star.T, "w*", os.path.join(out_dir, "w_star.svg"), RAMP, vmin=0, vmax=1),
    ]

    fig, axes = plt.subplots(1, 2, figsize=(10, 4))
    for ax, values, label in ((axes[0], summary.residual_M, "M-hat - M"), (axes[1], summary.residual_p, "p-hat - p")):
        finite = np.asarray(values, dtype=float).ravel()
        finite = finite[np.isfinite(finite)]
        ax.hist(finite, bins=30, color=LOSS)
        ax.axvline(0.0, color=GAIN, linewidth=1)
        ax.set_xlabel(label)
    paths.append(_save(fig, os.path.join(out_dir, "residuals.svg")))
    logger.info("rendered %d heatmaps", len(paths))
    return paths

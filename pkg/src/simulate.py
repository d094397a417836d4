"""
Synthetic data with known truth.

The simulation designs fix L and Z as five contiguous locus segments (S // 5 loci each, the
last one taking any remainder); each segment assigns one (copy number, variant count) pair
per subclone. Weights, depths and counts are drawn from the model.
"""
import logging
from dataclasses import dataclass
from typing import Callable, Dict, List, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field
from scipy.optimize import linear_sum_assignment

from src.errors import StructuralError
from src.model import ReadCountData, compute_M, compute_p, variant_numerator
from src.summary import PosteriorSummary

logger = logging.getLogger(__name__)

P0_TRUE = 0.05
PHI_SHAPE, PHI_RATE = 600.0, 3.0

# (copy number, variant count) per subclone, one row per segment
SIM1_LAYOUT = [
    [(3, 2), (2, 1)],
    [(2, 1), (3, 3)],
    [(2, 2), (0, 0)],
    [(0, 0), (2, 1)],
    [(2, 0), (2, 2)],
]
SIM2_LAYOUT = [
    [(3, 1), (2, 0), (2, 1), (2, 0)],
    [(2, 2), (3, 2), (1, 0), (1, 1)],
    [(0, 0), (2, 1), (2, 0), (3, 3)],
    [(2, 0), (0, 0), (3, 2), (2, 1)],
    [(2, 1), (2, 2), (1, 1), (1, 0)],
]
SIM1_WEIGHTS = (0.4, 30.0, 10.0)
SIM2_BACKGROUND = 0.3
SIM2_SUBCLONE_WEIGHTS = (13.0, 4.0, 2.0, 1.0)
LUNG_COVERAGE = 65.0


@dataclass
class ScenarioTruth:
    L: np.ndarray
    Z: np.ndarray
    w: np.ndarray
    phi: np.ndarray
    p0: float
    name: str = "custom"
    split_beta: Tuple[float, float] = (25.0, 975.0)

    def __post_init__(self):
        self.L = np.asarray(self.L, dtype=int)
        self.Z = np.asarray(self.Z, dtype=int)
        self.w = np.asarray(self.w, dtype=float)
        self.phi = np.asarray(self.phi, dtype=float)
        S, C = self.L.shape
        if self.Z.shape != (S, C) or self.w.shape != (len(self.phi), C + 1):
            raise StructuralError("truth matrices have inconsistent shapes")
        if np.any(self.Z < 0) or np.any(self.Z > self.L):
            raise StructuralError("truth violates 0 <= z <= l")
        if not np.allclose(self.w.sum(axis=1), 1.0) or np.any(self.w < 0):
            raise StructuralError("truth weights must lie on the simplex")
        if np.any(self.phi <= 0) or not 0 <= self.p0 <= 1:
            raise StructuralError("truth depths must be positive and p0 a probability")

    @property
    def C(self) -> int:
        return self.L.shape[1]

    @property
    def M(self) -> np.ndarray:
        return compute_M(self.L, self.w)

    @property
    def p(self) -> np.ndarray:
        return compute_p(self.L, self.Z, self.w, self.p0)


def layout_matrices(layout: Sequence[Sequence[Tuple[int, int]]], S: int) -> Tuple[np.ndarray, np.ndarray]:
    segments = len(layout)
    if S < segments:
        raise StructuralError(f"need at least {segments} loci for the block layout")
    size = S // segments
    bounds = [i * size for i in range(segments)] + [S]
    C = len(layout[0])
    L = np.empty((S, C), dtype=int)
    Z = np.empty((S, C), dtype=int)
    for i, row in enumerate(layout):
        block = slice(bounds[i], bounds[i + 1])
        L[block] = [pair[0] for pair in row]
        Z[block] = [pair[1] for pair in row]
    return L, Z


def generate_custom(truth: ScenarioTruth, rng: np.random.Generator) -> ReadCountData:
    """N ~ Poi(phi M / 2), n ~ Bin(N, p); n is 0 wherever M vanishes."""
    M = truth.M
    N = rng.poisson(truth.phi[None, :] * M / 2.0)
    numerator = variant_numerator(truth.Z, truth.w, truth.p0)
    p = np.clip(np.divide(numerator, M, out=np.zeros_like(M), where=M > 0), 0.0, 1.0)
    n = rng.binomial(N, p)
    return ReadCountData(N=N, n=n)


def _depths(T: int, rng: np.random.Generator, shape: float = PHI_SHAPE, rate: float = PHI_RATE) -> np.ndarray:
    return rng.gamma(shape, 1.0 / rate, size=T)


def generate_sim1(rng: np.random.Generator, S: int = 100, T: int = 4) -> Tuple[ReadCountData, ScenarioTruth]:
    """Two subclones, four samples; subclone 1 dominates every sample."""
    L, Z = layout_matrices(SIM1_LAYOUT, S)
    w = rng.dirichlet(SIM1_WEIGHTS, size=T)
    truth = ScenarioTruth(L=L, Z=Z, w=w, phi=_depths(T, rng), p0=P0_TRUE, name="sim1")
    return generate_custom(truth, rng), truth


def generate_sim2(rng: np.random.Generator, S: int = 100, T: int = 25) -> Tuple[ReadCountData, ScenarioTruth]:
    """Four subclones; each sample draws its weights with an independently permuted concentration."""
    L, Z = layout_matrices(SIM2_LAYOUT, S)
    w = np.empty((T, 5))
    for t in range(T):
        concentration = np.concatenate([[SIM2_BACKGROUND], rng.permutation(SIM2_SUBCLONE_WEIGHTS)])
        w[t] = rng.dirichlet(concentration)
    truth = ScenarioTruth(L=L, Z=Z, w=w, phi=_depths(T, rng), p0=P0_TRUE, name="sim2")
    return generate_custom(truth, rng), truth


def generate_sim2_reduced(rng: np.random.Generator) -> Tuple[ReadCountData, ScenarioTruth]:
    data, truth = generate_sim2(rng, S=50, T=25)
    truth.name = "sim2-reduced"
    return data, truth


def generate_lung_format(rng: np.random.Generator) -> Tuple[ReadCountData, ScenarioTruth]:
    """101 loci in 4 samples at roughly 65x coverage, split with Be(30, 970)."""
    L, Z = layout_matrices(SIM1_LAYOUT, 101)
    w = rng.dirichlet(SIM1_WEIGHTS, size=4)
    phi = _depths(4, rng, shape=PHI_SHAPE, rate=PHI_SHAPE / LUNG_COVERAGE)
    truth = ScenarioTruth(L=L, Z=Z, w=w, phi=phi, p0=P0_TRUE, name="lung-format", split_beta=(30.0, 970.0))
    return generate_custom(truth, rng), truth


SCENARIOS: Dict[str, Callable[[np.random.Generator], Tuple[ReadCountData, ScenarioTruth]]] = {
    "sim1": generate_sim1,
    "sim2": generate_sim2,
    "sim2-reduced": generate_sim2_reduced,
    "lung-format": generate_lung_format,
}


def generate_scenario(name: str, rng: np.random.Generator) -> Tuple[ReadCountData, ScenarioTruth]:
    if name not in SCENARIOS:
        raise StructuralError(f"unknown scenario {name!r}; choose from {', '.join(SCENARIOS)}")
    return SCENARIOS[name](rng)


# --- Scoring ---

class SubcloneRecovery(BaseModel):
    truth_column: int
    summary_column: int
    L_mismatch_rate: float
    Z_mismatch_rate: float
    w_mean_abs_error: float


class RecoveryReport(BaseModel):
    C_true: int
    C_star: int
    C_correct: bool
    subclones: List[SubcloneRecovery] = Field(default_factory=list)
    unmatched_truth_columns: List[int] = Field(default_factory=list)
    p0_relative_error: float
    phi_relative_error: float


def _match_columns(summary: PosteriorSummary, truth: ScenarioTruth) -> List[Tuple[int, int]]:
    """Truth-to-summary column pairs minimizing L, then Z, then w differences."""
    S = truth.L.shape[0]
    Q = int(max(truth.L.max(initial=0), np.max(summary.L_star, initial=0)))
    T = len(truth.phi)
    size = max(truth.C, summary.C_star)
    K2 = size * T * 10 ** 6 + 1
    K1 = K2 * (size * S * max(Q, 1) + 1)

    def cost(a: np.ndarray, b: np.ndarray) -> np.ndarray:
        return np.abs(a[:, :, None] - b[:, None, :]).sum(axis=0)

    grid_true = np.rint(truth.w[:, 1:] * 10 ** 6).astype(np.int64)
    grid_star = np.rint(np.asarray(summary.w_star)[:, 1:] * 10 ** 6).astype(np.int64)
    total = (K1 * cost(truth.L, np.asarray(summary.L_star)) + K2 * cost(truth.Z, np.asarray(summary.Z_star))
             + cost(grid_true, grid_star))
    rows, cols = linear_sum_assignment(total)
    return sorted(zip(rows.tolist(), cols.tolist()))


def score_recovery(summary: PosteriorSummary, truth: ScenarioTruth) -> RecoveryReport:
    """Compares a summary with the truth after matching subclones; works for C* != C_true."""
    if np.shape(summary.L_star)[0] != truth.L.shape[0] or len(summary.phi_star) != len(truth.phi):
        raise StructuralError("summary and truth cover different loci or samples")
    pairs = _match_columns(summary, truth)
    subclones = []
    for c_true, c_star in pairs:
        subclones.append(SubcloneRecovery(
            truth_column=c_true,
            summary_column=c_star,
            L_mismatch_rate=float(np.mean(truth.L[:, c_true] != summary.L_star[:, c_star])),
            Z_mismatch_rate=float(np.mean(truth.Z[:, c_true] != summary.Z_star[:, c_star])),
            w_mean_abs_error=float(np.mean(np.abs(truth.w[:, c_true + 1] - summary.w_star[:, c_star + 1]))),
        ))
    matched = {c for c, _ in pairs}
    report = RecoveryReport(
        C_true=truth.C,
        C_star=summary.C_star,
        C_correct=summary.C_star == truth.C,
        subclones=subclones,
        unmatched_truth_columns=[c for c in range(truth.C) if c not in matched],
        p0_relative_error=abs(summary.p0_star - truth.p0) / truth.p0 if truth.p0 else abs(summary.p0_star),
        phi_relative_error=float(np.mean(np.abs(summary.phi_star - truth.phi) / truth.phi)),
    )
    logger.info("recovery: C*=%d (truth %d), %d subclones matched", report.C_star, report.C_true, len(subclones))
    return report

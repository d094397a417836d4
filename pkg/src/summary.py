"""
Posterior summaries.

C* is the posterior mode of C. L* is the medoid of the sampled copy-number matrices at C*
under the column-permutation-matched L1 distance. Every C* sample is then aligned to L*
and Z*, w*, pi* are read off the aligned samples. All tie-breaks go to the smaller value,
so the output does not depend on how subclones happen to be labelled in each sample.
"""
import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import linear_sum_assignment

from src.errors import StructuralError
from src.model import ModelState, ReadCountData, compute_M, compute_p

logger = logging.getLogger(__name__)

CANDIDATE_CAP = 500
QUANTILES = (0.025, 0.5, 0.975)
W_GRID = 10 ** 6
_EXACT_LIMIT = 2 ** 52
_BLOCK = 256


@dataclass
class LEstimate:
    """L* plus the sample it was taken from, in canonical column order."""
    L_star: np.ndarray
    reference: ModelState
    total_distance: int
    n_samples: int


@dataclass
class ScalarEstimates:
    phi_star: np.ndarray
    p0_star: float
    phi_quantiles: np.ndarray  # len(QUANTILES) x T
    p0_quantiles: np.ndarray


@dataclass
class FitResiduals:
    residual_M: np.ndarray
    residual_p: np.ndarray
    residual_N: np.ndarray


@dataclass
class PosteriorSummary:
    C_star: int
    L_star: np.ndarray
    Z_star: np.ndarray
    w_star: np.ndarray
    pi_star: np.ndarray
    phi_star: np.ndarray
    p0_star: float
    residual_M: Optional[np.ndarray] = None
    residual_p: Optional[np.ndarray] = None
    residual_N: Optional[np.ndarray] = None
    phi_quantiles: Optional[np.ndarray] = None
    p0_quantiles: Optional[np.ndarray] = None
    C_posterior: Dict[int, float] = field(default_factory=dict)
    n_samples_at_C: int = 0
    locus_ids: List[str] = field(default_factory=list)
    sample_ids: List[str] = field(default_factory=list)

    def __post_init__(self):
        S, C = np.shape(self.L_star)
        if np.shape(self.Z_star) != (S, C) or np.shape(self.w_star)[1] != C + 1 or np.shape(self.pi_star)[0] != C:
            raise StructuralError("summary matrices are inconsistent with C*")
        if np.any(self.Z_star > self.L_star):
            raise StructuralError("Z* exceeds L*")


def _states(trace) -> List[ModelState]:
    return list(trace.states) if hasattr(trace, "states") else list(trace)


def map_C(trace) -> int:
    """Posterior mode of C over retained states; ties go to the smaller C."""
    values = [s.C for s in _states(trace)]
    if not values:
        raise StructuralError("cannot summarize an empty trace")
    counts = Counter(values)
    return min(counts, key=lambda C: (-counts[C], C))


def C_posterior(trace) -> Dict[int, float]:
    values = [s.C for s in _states(trace)]
    if not values:
        raise StructuralError("cannot summarize an empty trace")
    counts = Counter(values)
    return {C: counts[C] / len(values) for C in sorted(counts)}


# --- Assignment ---

def column_cost(La: np.ndarray, Lb: np.ndarray) -> np.ndarray:
    """D[c, c'] = sum_s |La[s, c] - Lb[s, c']|."""
    La = np.asarray(La)
    Lb = np.asarray(Lb)
    if La.shape != Lb.shape or La.ndim != 2:
        raise StructuralError(f"cannot match matrices of shapes {La.shape} and {Lb.shape}")
    return np.abs(La[:, :, None] - Lb[:, None, :]).sum(axis=0)


def _assignment_value(cost: np.ndarray) -> int:
    rows, cols = linear_sum_assignment(cost)
    return int(cost[rows, cols].sum())


def lexicographic_assignment(cost: np.ndarray) -> Tuple[int, np.ndarray]:
    """
    Minimum-cost permutation of an integer cost matrix; among optimal permutations the
    lexicographically smallest. perm[c] is the column assigned to row c.
    """
    cost = np.asarray(cost, dtype=np.int64)
    C = cost.shape[0]
    best = _assignment_value(cost)
    perm = np.empty(C, dtype=int)
    free = list(range(C))
    fixed = 0
    for row in range(C):
        for col in free:
            rest_cols = [c for c in free if c != col]
            rest = 0
            if rest_cols:
                rest = _assignment_value(cost[np.ix_(np.arange(row + 1, C), rest_cols)])
            if fixed + cost[row, col] + rest == best:
                perm[row] = col
                fixed += int(cost[row, col])
                free.remove(col)
                break
        else:
            raise StructuralError("assignment tie-break lost the optimum")
    return best, perm


def matrix_distance(La: np.ndarray, Lb: np.ndarray) -> Tuple[int, np.ndarray]:
    """
    Permutation-matched L1 distance. Returns (d, perm) with Lb[:, perm] the column order
    of Lb closest to La.
    """
    return lexicographic_assignment(column_cost(La, Lb))


# --- Point estimate of L ---

def canonical_columns(L: np.ndarray) -> np.ndarray:
    """Column order sorting the columns of L lexicographically."""
    return np.lexsort(np.asarray(L)[::-1]) if L.shape[0] else np.arange(L.shape[1])


def canonical_state(state: ModelState) -> ModelState:
    """Columns sorted by (L, Z, w, pi) column vectors."""
    keys = np.vstack([state.L, state.Z, state.w[:, 1:], state.pi.T])
    return state.permuted(np.lexsort(keys[::-1]))


def _distinct_matrices(states: Sequence[ModelState]):
    """Distinct canonical L matrices with multiplicity and first occurrence."""
    seen: Dict[bytes, List] = {}
    for index, state in enumerate(states):
        L = np.ascontiguousarray(state.L[:, canonical_columns(state.L)], dtype=np.int64)
        key = L.tobytes()
        if key in seen:
            seen[key][1] += 1
        else:
            seen[key] = [L, 1, index]
    return sorted(seen.items(), key=lambda item: (-item[1][1], item[0]))


def _total_distances(candidate: np.ndarray, others: np.ndarray, weights: np.ndarray) -> int:
    total = 0
    for start in range(0, len(others), _BLOCK):
        block = others[start:start + _BLOCK]
        costs = np.abs(candidate[None, :, :, None] - block[:, :, None, :]).sum(axis=1)
        for cost, weight in zip(costs, weights[start:start + _BLOCK]):
            total += int(weight) * _assignment_value(cost)
    return total


def point_estimate_L(trace, C_star: int, candidate_cap: int = CANDIDATE_CAP) -> LEstimate:
    """
    Posterior medoid: the sampled L at C* minimizing the summed matched distance to every
    retained C* sample. Candidates are the most frequent distinct matrices.
    """
    states = [s for s in _states(trace) if s.C == C_star]
    if not states:
        raise StructuralError(f"no retained samples with C={C_star}")
    distinct = _distinct_matrices(states)
    matrices = np.stack([entry[1][0] for entry in distinct])
    weights = np.array([entry[1][1] for entry in distinct], dtype=np.int64)

    best_total, best_index = None, 0
    for index in range(min(candidate_cap, len(distinct))):
        total = _total_distances(matrices[index], matrices, weights)
        if best_total is None or total < best_total:
            best_total, best_index = total, index
    if len(distinct) > candidate_cap:
        logger.info("medoid search limited to %d of %d distinct matrices", candidate_cap, len(distinct))

    reference = canonical_state(states[distinct[best_index][1][2]])
    return LEstimate(L_star=reference.L.copy(), reference=reference,
                     total_distance=int(best_total), n_samples=len(states))


# --- Alignment ---

def _w_grid(S: int, T: int, C: int, Q: int) -> int:
    """Largest grid (up to 1e6) that keeps the composite cost exact in float64."""
    span = (C * S * Q + 1) ** 2
    grid = (_EXACT_LIMIT // span - 1) // max(C * T, 1)
    return int(max(0, min(W_GRID, grid)))


def alignment_cost(reference: ModelState, state: ModelState, Q: int) -> np.ndarray:
    """
    Integer composite cost: L distance first, then Z distance, then w distance on a grid.
    Each level outweighs the largest possible total of the levels below it.
    """
    S, C = reference.L.shape
    T = reference.T
    grid = _w_grid(S, T, C, Q)
    D_L = column_cost(reference.L, state.L).astype(np.int64)
    D_Z = column_cost(reference.Z, state.Z).astype(np.int64)
    D_w = column_cost(np.rint(reference.w[:, 1:] * grid).astype(np.int64),
                      np.rint(state.w[:, 1:] * grid).astype(np.int64))
    K2 = C * T * grid + 1
    K1 = K2 * (C * S * Q + 1)
    return K1 * D_L + K2 * D_Z + D_w


def align(reference: ModelState, state: ModelState, Q: int) -> ModelState:
    _, perm = lexicographic_assignment(alignment_cost(reference, state, Q))
    return state.permuted(perm)


def _elementwise_mode(stack: np.ndarray, Q: int) -> np.ndarray:
    counts = (stack[..., None] == np.arange(Q + 1)).sum(axis=0)
    return counts.argmax(axis=-1)


def conditional_estimates(trace, C_star: int, L_star: LEstimate,
                          Q: Optional[int] = None) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Z* (elementwise mode, clamped to L*), w* and pi* (aligned means) at C*."""
    reference = L_star.reference
    Q = Q if Q is not None else reference.pi.shape[1] - 1
    aligned = [align(reference, s, Q) for s in _states(trace) if s.C == C_star]
    if not aligned:
        raise StructuralError(f"no retained samples with C={C_star}")
    Z_star = np.minimum(_elementwise_mode(np.stack([s.Z for s in aligned]), Q), L_star.L_star)
    w_star = np.mean([s.w for s in aligned], axis=0)
    w_star = w_star / w_star.sum(axis=1, keepdims=True)
    pi_star = np.mean([s.pi for s in aligned], axis=0)
    return Z_star, w_star, pi_star


def effective_sample_size(x) -> float:
    """
    n / tau for a scalar trace, where tau = 1 + 2 * sum of autocorrelations up to the first
    negative lag (FFT estimate). A constant trace counts as n independent draws.
    """
    x = np.asarray(x, dtype=float)
    n = len(x)
    if n < 2 or np.ptp(x) == 0.0:
        return float(n)
    spectrum = np.fft.rfft(x - x.mean(), 2 * n)
    acf = np.fft.irfft(np.abs(spectrum) ** 2)[:n]
    if acf[0] <= 0.0:
        return float(n)
    rho = acf / acf[0]
    negative = np.flatnonzero(rho < 0.0)
    cut = negative[0] if negative.size else n
    tau = max(1.0, 2.0 * rho[:cut].sum() - 1.0)
    return n / tau


def scalar_estimates(trace, C_star: int) -> ScalarEstimates:
    states = [s for s in _states(trace) if s.C == C_star]
    if not states:
        raise StructuralError(f"no retained samples with C={C_star}")
    phi = np.stack([s.phi for s in states])
    p0 = np.array([s.p0 for s in states])
    logger.debug("p0 effective sample size %.0f of %d draws", effective_sample_size(p0), len(p0))
    return ScalarEstimates(
        phi_star=phi.mean(axis=0),
        p0_star=float(p0.mean()),
        phi_quantiles=np.quantile(phi, QUANTILES, axis=0),
        p0_quantiles=np.quantile(p0, QUANTILES),
    )


def fit_residuals(summary: PosteriorSummary, data: ReadCountData, truth=None) -> FitResiduals:
    """
    M-hat and p-hat from the point estimates against the truth when one is given,
    otherwise against the data (2N/phi* and n/N; NaN where N = 0).
    N-hat = phi* M-hat / 2 is always compared with the observed N.
    """
    M_hat = compute_M(summary.L_star, summary.w_star)
    p_hat = compute_p(summary.L_star, summary.Z_star, summary.w_star, summary.p0_star)
    if truth is not None:
        residual_M = M_hat - truth.M
        residual_p = p_hat - truth.p
    else:
        residual_M = M_hat - 2.0 * data.N / summary.phi_star[None, :]
        with np.errstate(divide="ignore", invalid="ignore"):
            observed = np.where(data.N > 0, data.n / data.N, np.nan)
        residual_p = p_hat - observed
    residual_N = summary.phi_star[None, :] * M_hat / 2.0 - data.N
    return FitResiduals(residual_M=residual_M, residual_p=residual_p, residual_N=residual_N)


def summarize(trace, data: ReadCountData, Q: int, truth=None,
              candidate_cap: int = CANDIDATE_CAP) -> PosteriorSummary:
    C_star = map_C(trace)
    estimate = point_estimate_L(trace, C_star, candidate_cap)
    Z_star, w_star, pi_star = conditional_estimates(trace, C_star, estimate, Q)
    scalars = scalar_estimates(trace, C_star)
    summary = PosteriorSummary(
        C_star=C_star, L_star=estimate.L_star, Z_star=Z_star, w_star=w_star, pi_star=pi_star,
        phi_star=scalars.phi_star, p0_star=scalars.p0_star,
        phi_quantiles=scalars.phi_quantiles, p0_quantiles=scalars.p0_quantiles,
        C_posterior=C_posterior(trace), n_samples_at_C=estimate.n_samples,
        locus_ids=list(data.locus_ids), sample_ids=list(data.sample_ids),
    )
    residuals = fit_residuals(summary, data, truth)
    summary.residual_M = residuals.residual_M
    summary.residual_p = residuals.residual_p
    summary.residual_N = residuals.residual_N
    logger.info("C*=%d from %d samples (medoid distance %d)", C_star, estimate.n_samples, estimate.total_distance)
    return summary

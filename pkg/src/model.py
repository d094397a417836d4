"""
Sampling model for paired read counts.

N_st ~ Poi(exposure_st * phi_t * M_st / 2) and n_st ~ Bin(N_st, p_st), where the sample
copy number M and the expected variant fraction p mix C subclones plus a fixed diploid
background (column 0 of the weights, never stored in L or Z).
"""
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from scipy.special import gammaln, xlog1py, xlogy

from src.config import M_EPSILON, Hyperparameters
from src.errors import DegenerateStateError, StructuralError

BACKGROUND_COPIES = 2
BACKGROUND_VARIANTS = 2
# Tolerance for n <= N on fractional (split) counts
COUNT_TOLERANCE = 1e-9


@dataclass
class ReadCountData:
    """
    S x T matrices of total (N) and variant (n) reads. Counts are stored as floats so
    fractional training/test portions evaluate without rounding. exposure scales the
    Poisson mean; it is 1 for observed data and b / 1-b for the two split portions.
    """
    N: np.ndarray
    n: np.ndarray
    locus_ids: List[str] = field(default_factory=list)
    sample_ids: List[str] = field(default_factory=list)
    exposure: Optional[np.ndarray] = None

    def __post_init__(self):
        self.N = np.asarray(self.N, dtype=float)
        self.n = np.asarray(self.n, dtype=float)
        if self.N.ndim != 2 or self.N.shape != self.n.shape:
            raise StructuralError(f"N {self.N.shape} and n {self.n.shape} must be matrices of equal shape")
        S, T = self.N.shape
        if T < 1:
            raise StructuralError("need at least one sample")
        if self.exposure is None:
            self.exposure = np.ones((S, T))
        self.exposure = np.asarray(self.exposure, dtype=float)
        if self.exposure.shape != (S, T):
            raise StructuralError(f"exposure {self.exposure.shape} does not match counts {(S, T)}")
        if np.any(self.N < 0) or np.any(self.n < 0) or np.any(self.exposure < 0):
            raise StructuralError("counts and exposures must be nonnegative")
        if np.any(self.n > self.N + COUNT_TOLERANCE):
            s, t = np.argwhere(self.n > self.N + COUNT_TOLERANCE)[0]
            raise StructuralError(f"n exceeds N at locus {s + 1}, sample {t + 1}")
        if not self.locus_ids:
            self.locus_ids = [f"locus_{s + 1}" for s in range(S)]
        if not self.sample_ids:
            self.sample_ids = [f"sample_{t + 1}" for t in range(T)]
        if len(self.locus_ids) != S or len(self.sample_ids) != T:
            raise StructuralError("id labels do not match the count matrix dimensions")

    @property
    def S(self) -> int:
        return self.N.shape[0]

    @property
    def T(self) -> int:
        return self.N.shape[1]

    @classmethod
    def uninformative(cls, S: int, T: int) -> "ReadCountData":
        """Zero reads at zero exposure: every likelihood term is identically 0."""
        return cls(N=np.zeros((S, T)), n=np.zeros((S, T)), exposure=np.zeros((S, T)))


@dataclass
class ModelState:
    """
    One point in parameter space for a fixed number of subclones C.
    L, Z: S x C integers; pi: C x (Q+1); theta: T x (C+1) with column 0 the background.
    """
    L: np.ndarray
    Z: np.ndarray
    pi: np.ndarray
    theta: np.ndarray
    phi: np.ndarray
    p0: float

    @property
    def C(self) -> int:
        return self.L.shape[1]

    @property
    def S(self) -> int:
        return self.L.shape[0]

    @property
    def T(self) -> int:
        return self.theta.shape[0]

    @property
    def w(self) -> np.ndarray:
        return self.theta / self.theta.sum(axis=1, keepdims=True)

    def copy(self) -> "ModelState":
        return ModelState(
            L=self.L.copy(), Z=self.Z.copy(), pi=self.pi.copy(),
            theta=self.theta.copy(), phi=self.phi.copy(), p0=float(self.p0),
        )

    def permuted(self, order) -> "ModelState":
        """Relabel subclones: new column c is old column order[c]."""
        order = np.asarray(order, dtype=int)
        theta_order = np.concatenate([[0], order + 1])
        return ModelState(
            L=self.L[:, order].copy(), Z=self.Z[:, order].copy(), pi=self.pi[order].copy(),
            theta=self.theta[:, theta_order].copy(), phi=self.phi.copy(), p0=float(self.p0),
        )

    def validate(self, Q: int) -> None:
        S, C = self.L.shape
        if C < 1:
            raise StructuralError("a state needs at least one subclone")
        if self.Z.shape != (S, C) or self.pi.shape != (C, Q + 1) or self.theta.shape[1] != C + 1:
            raise StructuralError("state dimensions are inconsistent with C")
        if self.phi.shape != (self.T,):
            raise StructuralError("phi must hold one depth per sample")
        if np.any(self.L < 0) or np.any(self.L > Q):
            raise StructuralError(f"copy numbers must lie in 0..{Q}")
        if np.any(self.Z < 0) or np.any(self.Z > self.L):
            raise StructuralError("variant counts must satisfy 0 <= z <= l")
        if np.any(self.theta <= 0) or np.any(self.phi <= 0):
            raise StructuralError("theta and phi must be strictly positive")
        if not np.allclose(self.pi.sum(axis=1), 1.0, atol=1e-12) or np.any(self.pi < 0):
            raise StructuralError("pi rows must lie on the simplex")
        if not 0 < self.p0 < 1:
            raise StructuralError("p0 must lie in (0, 1)")


def _check_weights(L: np.ndarray, w: np.ndarray) -> None:
    if L.ndim != 2 or w.ndim != 2 or w.shape[1] != L.shape[1] + 1:
        raise StructuralError(f"L {L.shape} needs weights with {L.shape[1] + 1} columns, got {w.shape}")


def compute_M(L: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Sample copy numbers M_st = 2 w_t0 + sum_c w_tc l_sc (S x T)."""
    L = np.asarray(L)
    w = np.asarray(w, dtype=float)
    _check_weights(L, w)
    return BACKGROUND_COPIES * w[:, 0][None, :] + L @ w[:, 1:].T


def variant_numerator(Z: np.ndarray, w: np.ndarray, p0: float) -> np.ndarray:
    """Expected variant allele count per cell: 2 p0 w_t0 + sum_c w_tc z_sc."""
    Z = np.asarray(Z)
    w = np.asarray(w, dtype=float)
    _check_weights(Z, w)
    return BACKGROUND_VARIANTS * p0 * w[:, 0][None, :] + Z @ w[:, 1:].T


def compute_p(L: np.ndarray, Z: np.ndarray, w: np.ndarray, p0: float) -> np.ndarray:
    """Expected variant allele fractions p_st (S x T)."""
    M = compute_M(L, w)
    if np.any(M <= M_EPSILON):
        s, t = np.argwhere(M <= M_EPSILON)[0]
        raise DegenerateStateError(f"sample copy number vanishes at locus {s + 1}, sample {t + 1}")
    return np.clip(variant_numerator(Z, w, p0) / M, 0.0, 1.0)


def loglik_N(N: np.ndarray, M: np.ndarray, phi: np.ndarray, exposure: Optional[np.ndarray] = None) -> float:
    """Poisson log-likelihood of total reads; log-Gamma continuation for real-valued counts."""
    N = np.asarray(N, dtype=float)
    M = np.asarray(M, dtype=float)
    if N.shape != M.shape:
        raise StructuralError(f"N {N.shape} and M {M.shape} differ in shape")
    if np.any(N < 0):
        raise StructuralError("total read counts cannot be negative")
    mean = np.asarray(phi, dtype=float)[None, :] * M / 2.0
    if exposure is not None:
        mean = mean * exposure
    terms = xlogy(N, mean) - mean - gammaln(N + 1.0)
    return float(np.sum(terms))


def loglik_n(n: np.ndarray, N: np.ndarray, p: np.ndarray) -> float:
    """Binomial log-likelihood of variant reads given totals, with 0 log 0 = 0."""
    n = np.asarray(n, dtype=float)
    N = np.asarray(N, dtype=float)
    p = np.asarray(p, dtype=float)
    if n.shape != N.shape or p.shape != N.shape:
        raise StructuralError("n, N and p must share one shape")
    if np.any(n > N + COUNT_TOLERANCE) or np.any(n < 0):
        raise StructuralError("variant reads must satisfy 0 <= n <= N")
    rest = np.maximum(N - n, 0.0)
    terms = (gammaln(N + 1.0) - gammaln(n + 1.0) - gammaln(rest + 1.0)
             + xlogy(n, p) + xlog1py(rest, -p))
    return float(np.sum(terms))


def cell_loglik(data: ReadCountData, M: np.ndarray, numerator: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """
    Per-cell log-likelihood kernel (S x T) without the count-only log-Gamma constants.
    Cells whose M is at or below the floor get -inf. Used by every MCMC kernel.
    """
    degenerate = M <= M_EPSILON
    M_safe = np.where(degenerate, 1.0, M)
    p = np.clip(numerator / M_safe, 0.0, 1.0)
    mean = data.exposure * phi[None, :] * M_safe / 2.0
    rest = np.maximum(data.N - data.n, 0.0)
    out = xlogy(data.N, mean) - mean + xlogy(data.n, p) + xlog1py(rest, -p)
    out[degenerate] = -np.inf
    return out


def log_likelihood(state: ModelState, data: ReadCountData) -> float:
    """Full normalized log-likelihood of both count matrices; -inf for degenerate states."""
    w = state.w
    try:
        p = compute_p(state.L, state.Z, w, state.p0)
    except DegenerateStateError:
        return -np.inf
    M = compute_M(state.L, w)
    return loglik_N(data.N, M, state.phi, data.exposure) + loglik_n(data.n, data.N, p)


def log_prior(state: ModelState, hyper: Hyperparameters, include_C: bool = True) -> float:
    from src import priors

    params = priors.BetaDirichletParams.from_hyper(hyper, state.C)
    total = sum(priors.logdens_pi(row, params) for row in state.pi)
    total += priors.logpmf_L_given_pi(state.L, state.pi)
    total += priors.logpmf_Z_given_L(state.Z, state.L)
    total += priors.logdens_theta(state.theta, hyper)
    total += priors.logdens_phi(state.phi, hyper)
    total += priors.logdens_p0(state.p0, hyper)
    if include_C:
        total += priors.logpmf_C(state.C, hyper)
    return float(total)


def log_joint(state: ModelState, data: ReadCountData, hyper: Hyperparameters) -> float:
    """log p(N, n | x) + log p(x | C) + log p(C)."""
    prior = log_prior(state, hyper)
    if not np.isfinite(prior):
        return -np.inf
    return prior + log_likelihood(state, data)

"""
Prior densities and samplers.

pi_c ~ Be-Dir(alpha/C, beta, gamma) on copy-number probabilities, l_sc | pi_c categorical,
z_sc | l_sc ~ DU(0..l_sc), theta ~ Gamma (background d0, subclones d), phi_t ~ Gamma(a_t, b_t),
p0 ~ Be(a00, b00), C ~ Geom(r) on {1, 2, ...}. All densities are on the log scale.
"""
from dataclasses import dataclass

import numpy as np
from scipy import stats
from scipy.special import gammaln

from src.config import Hyperparameters
from src.errors import StructuralError

NEUTRAL = 2
_TINY = np.finfo(float).tiny
_EPS = np.finfo(float).eps
SIMPLEX_TOLERANCE = 1e-9


def off_neutral(Q: int) -> np.ndarray:
    """Copy numbers other than the neutral 2, in increasing order."""
    return np.array([q for q in range(Q + 1) if q != NEUTRAL])


@dataclass
class BetaDirichletParams:
    aC: float
    beta: float
    gamma: np.ndarray

    def __post_init__(self):
        self.gamma = np.asarray(self.gamma, dtype=float)
        if self.aC <= 0 or self.beta <= 0 or np.any(self.gamma <= 0):
            raise StructuralError("beta-Dirichlet parameters must be strictly positive")

    @property
    def Q(self) -> int:
        return len(self.gamma)

    @classmethod
    def from_hyper(cls, hyper: Hyperparameters, C: int) -> "BetaDirichletParams":
        return cls(aC=hyper.alpha / C, beta=hyper.beta, gamma=hyper.gamma_vector())


def assemble_pi(u: np.ndarray, tilde: np.ndarray) -> np.ndarray:
    """Rows (1-u, u*tilde) with the neutral entry placed at index 2."""
    u = np.atleast_1d(u)
    tilde = np.atleast_2d(tilde)
    Q = tilde.shape[1]
    rows = np.empty((len(u), Q + 1))
    rows[:, NEUTRAL] = 1.0 - u
    rows[:, off_neutral(Q)] = u[:, None] * tilde
    return rows


def _dirichlet_rows(concentration: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    draws = np.maximum(rng.gamma(concentration), _TINY)
    return draws / draws.sum(axis=1, keepdims=True)


def sample_pi_rows(a: np.ndarray, b: np.ndarray, gamma: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Vectorized beta-Dirichlet draws; a, b per row, gamma is rows x Q."""
    u = np.clip(rng.beta(a, b), _TINY, 1.0 - _EPS)
    return assemble_pi(u, _dirichlet_rows(np.atleast_2d(gamma), rng))


def sample_pi(params: BetaDirichletParams, rng: np.random.Generator) -> np.ndarray:
    return sample_pi_rows(np.array([params.aC]), np.array([params.beta]), params.gamma[None, :], rng)[0]


def logdens_pi(row: np.ndarray, params: BetaDirichletParams) -> float:
    """
    Beta density of u = 1 - pi_2, Dirichlet density of the renormalized off-neutral block,
    and the Jacobian -(Q-1) log u of the scaling map.
    """
    row = np.asarray(row, dtype=float)
    Q = params.Q
    if row.shape != (Q + 1,) or np.any(row < 0) or abs(row.sum() - 1.0) > SIMPLEX_TOLERANCE:
        raise StructuralError("pi row is not on the simplex")
    u = 1.0 - row[NEUTRAL]
    if u <= 0.0:
        return -np.inf
    tilde = row[off_neutral(Q)] / u
    g = params.gamma
    with np.errstate(divide="ignore", invalid="ignore"):
        log_dir = gammaln(g.sum()) - gammaln(g).sum() + np.sum((g - 1.0) * np.log(tilde))
    log_beta = stats.beta.logpdf(u, params.aC, params.beta)
    return float(log_beta + log_dir - (Q - 1) * np.log(u))


def logpmf_L_given_pi(L: np.ndarray, pi: np.ndarray) -> float:
    L = np.asarray(L, dtype=int)
    if L.size == 0:
        return 0.0
    cells = pi[np.arange(L.shape[1])[None, :], L]
    with np.errstate(divide="ignore"):
        return float(np.sum(np.log(cells)))


def logpmf_Z_given_L(Z: np.ndarray, L: np.ndarray) -> float:
    """Discrete uniform on 0..l; l = 0 forces z = 0 and contributes log 1."""
    Z = np.asarray(Z)
    L = np.asarray(L)
    if np.any(Z < 0) or np.any(Z > L):
        return -np.inf
    return float(-np.sum(np.log(L + 1.0)))


def logdens_theta(theta: np.ndarray, hyper: Hyperparameters) -> float:
    theta = np.asarray(theta, dtype=float)
    return float(stats.gamma.logpdf(theta[:, 0], hyper.d0).sum()
                 + stats.gamma.logpdf(theta[:, 1:], hyper.d).sum())


def logdens_phi(phi: np.ndarray, hyper: Hyperparameters) -> float:
    phi = np.asarray(phi, dtype=float)
    T = len(phi)
    return float(stats.gamma.logpdf(phi, hyper.phi_shape(T), scale=1.0 / hyper.phi_rate(T)).sum())


def logdens_p0(p0: float, hyper: Hyperparameters) -> float:
    return float(stats.beta.logpdf(p0, hyper.a00, hyper.b00))


def logpmf_C(C: int, hyper: Hyperparameters) -> float:
    """Geometric on {1, 2, ...} with E(C) = 1/r."""
    return float(stats.geom.logpmf(C, hyper.r))


# --- Samplers ---

def draw_categorical(prob: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """One inverse-cdf draw per row of an unnormalized probability matrix."""
    cdf = np.cumsum(prob, axis=1)
    cdf = cdf / cdf[:, -1:]
    u = rng.random(prob.shape[0])
    return (cdf <= u[:, None]).sum(axis=1)


def sample_L_given_pi(pi: np.ndarray, S: int, rng: np.random.Generator) -> np.ndarray:
    C = pi.shape[0]
    L = np.empty((S, C), dtype=int)
    for c in range(C):
        L[:, c] = draw_categorical(np.tile(pi[c], (S, 1)), rng)
    return L


def sample_Z_given_L(L: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    return np.floor(rng.random(L.shape) * (L + 1)).astype(int)


def sample_theta(T: int, C: int, hyper: Hyperparameters, rng: np.random.Generator) -> np.ndarray:
    shape = np.concatenate([[hyper.d0], np.full(C, hyper.d)])
    return np.maximum(rng.gamma(np.tile(shape, (T, 1))), _TINY)


def sample_phi(T: int, hyper: Hyperparameters, rng: np.random.Generator) -> np.ndarray:
    return rng.gamma(hyper.phi_shape(T), 1.0 / hyper.phi_rate(T))


def sample_p0(hyper: Hyperparameters, rng: np.random.Generator) -> float:
    return float(np.clip(rng.beta(hyper.a00, hyper.b00), _TINY, 1.0 - _EPS))


def sample_prior_state(C: int, S: int, T: int, hyper: Hyperparameters, rng: np.random.Generator):
    """A full draw of x from p(x | C)."""
    from src.model import ModelState

    params = BetaDirichletParams.from_hyper(hyper, C)
    pi = sample_pi_rows(np.full(C, params.aC), np.full(C, params.beta), np.tile(params.gamma, (C, 1)), rng)
    L = sample_L_given_pi(pi, S, rng)
    Z = sample_Z_given_L(L, rng)
    return ModelState(
        L=L, Z=Z, pi=pi,
        theta=sample_theta(T, C, hyper, rng),
        phi=sample_phi(T, hyper, rng),
        p0=sample_p0(hyper, rng),
    )

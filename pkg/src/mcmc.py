"""
Fixed-C posterior simulation.

Gibbs updates for L, Z, pi and phi, random-walk Metropolis-Hastings for theta (log scale)
and p0 (logit scale, alternated with independence draws from the p0 prior), and a joint
Metropolis-Hastings move on whole rows of (L, Z).
Loci are conditionally independent given the weights, so L and Z are drawn one subclone
column at a time with every locus drawn at once; theta likewise one column at a time over
all samples.
"""
import logging
from dataclasses import dataclass, field
from typing import Iterable, List, Optional

import numpy as np
from scipy.special import expit, logit, logsumexp
from tqdm import tqdm

from src import priors
from src.config import ChainConfig, Hyperparameters
from src.errors import SamplerInternalError, StructuralError
from src.metrics import AcceptanceTracker
from src.model import (ModelState, ReadCountData, compute_M, log_joint, variant_numerator)
from src.model import cell_loglik as _cell_loglik
from src.observability import SamplerStage, SamplerTelemetry
from src.rng import ChainStreams

logger = logging.getLogger(__name__)

_TINY = np.finfo(float).tiny
_EPS = np.finfo(float).eps
ADAPT_WINDOW = 50
ADAPT_TARGET = 0.3


def cell_loglik(data: ReadCountData, M, numerator, phi, rows=None) -> np.ndarray:
    if rows is None:
        return _cell_loglik(data, M, numerator, phi)
    sub = _RowView(data, rows)
    return _cell_loglik(sub, M, numerator, phi)


class _RowView:
    """Read-only slice of a data set's matrices (no revalidation)."""

    def __init__(self, data: ReadCountData, rows):
        self.N = data.N[rows]
        self.n = data.n[rows]
        self.exposure = data.exposure[rows]


@dataclass
class ChainTrace:
    """
    Retained states (after burn-in, thinned) plus per-iteration scalars.
    C_path / log_joint / p0_path have one entry per iteration, burn-in included.
    """
    chain_id: int = 0
    states: List[ModelState] = field(default_factory=list)
    iterations: List[int] = field(default_factory=list)
    log_joint: List[float] = field(default_factory=list)
    C_path: List[int] = field(default_factory=list)
    p0_path: List[float] = field(default_factory=list)
    metrics: AcceptanceTracker = field(default_factory=AcceptanceTracker)

    def record(self, iteration: int, state: ModelState, log_joint_value: float, retain: bool):
        self.log_joint.append(float(log_joint_value))
        self.C_path.append(state.C)
        self.p0_path.append(float(state.p0))
        if retain:
            self.states.append(state.copy())
            self.iterations.append(iteration)

    @property
    def C_values(self) -> np.ndarray:
        return np.array([s.C for s in self.states], dtype=int)

    def at_C(self, C: int) -> List[ModelState]:
        return [s for s in self.states if s.C == C]

    def __len__(self) -> int:
        return len(self.states)

    @classmethod
    def concatenate(cls, traces: Iterable["ChainTrace"]) -> "ChainTrace":
        """Pools chains in the given order."""
        merged = cls(chain_id=-1)
        for trace in traces:
            merged.states.extend(trace.states)
            merged.iterations.extend(trace.iterations)
            merged.log_joint.extend(trace.log_joint)
            merged.C_path.extend(trace.C_path)
            merged.p0_path.extend(trace.p0_path)
            merged.metrics = merged.metrics.merge(trace.metrics)
        return merged

    def save(self, path: str) -> None:
        """States are grouped by C so every array stays rectangular."""
        arrays = {
            "iterations": np.asarray(self.iterations, dtype=int),
            "log_joint": np.asarray(self.log_joint, dtype=float),
            "C_path": np.asarray(self.C_path, dtype=int),
            "p0_path": np.asarray(self.p0_path, dtype=float),
            "C": self.C_values,
            "phi": np.array([s.phi for s in self.states]) if self.states else np.zeros((0, 0)),
            "p0": np.array([s.p0 for s in self.states], dtype=float),
        }
        for C in sorted(set(self.C_values.tolist())):
            group = self.at_C(C)
            arrays[f"L_C{C}"] = np.stack([s.L for s in group])
            arrays[f"Z_C{C}"] = np.stack([s.Z for s in group])
            arrays[f"pi_C{C}"] = np.stack([s.pi for s in group])
            arrays[f"theta_C{C}"] = np.stack([s.theta for s in group])
        np.savez_compressed(path, **arrays)

    @classmethod
    def load(cls, path: str) -> "ChainTrace":
        with np.load(path) as archive:
            trace = cls(
                iterations=archive["iterations"].tolist(),
                log_joint=archive["log_joint"].tolist(),
                C_path=archive["C_path"].tolist(),
                p0_path=archive["p0_path"].tolist(),
            )
            C_values = archive["C"]
            cursor = {C: 0 for C in set(C_values.tolist())}
            for i, C in enumerate(C_values.tolist()):
                j = cursor[C]
                cursor[C] += 1
                trace.states.append(ModelState(
                    L=archive[f"L_C{C}"][j], Z=archive[f"Z_C{C}"][j], pi=archive[f"pi_C{C}"][j],
                    theta=archive[f"theta_C{C}"][j], phi=archive["phi"][i], p0=float(archive["p0"][i]),
                ))
        return trace


# --- Full conditionals ---

def _normalize(logw: np.ndarray, what: str) -> np.ndarray:
    if logw.shape[0] and np.any(np.all(np.isneginf(logw), axis=1)):
        raise SamplerInternalError(f"every candidate of the {what} conditional has zero probability")
    return logw - logsumexp(logw, axis=1, keepdims=True)


def _L_column_logweights(state, data, hyper, c, M, num, w, log_pi):
    Q = hyper.Q
    wc = w[:, c + 1]
    M_base = M - np.outer(state.L[:, c], wc)
    q = np.arange(Q + 1)
    logw = np.empty((state.S, Q + 1))
    for value in q:
        logw[:, value] = cell_loglik(data, M_base + value * wc[None, :], num, state.phi).sum(axis=1)
    # pi_cq and the DU(0..q) prior on z, whose normalizer depends on q
    logw += log_pi[c][None, :] - np.log(q + 1.0)[None, :]
    logw[q[None, :] < state.Z[:, c][:, None]] = -np.inf
    return logw, M_base


def _Z_column_logweights(state, data, hyper, c, M, num, w):
    Q = hyper.Q
    wc = w[:, c + 1]
    num_base = num - np.outer(state.Z[:, c], wc)
    z = np.arange(Q + 1)
    logw = np.empty((state.S, Q + 1))
    for value in z:
        logw[:, value] = cell_loglik(data, M, num_base + value * wc[None, :], state.phi).sum(axis=1)
    logw[z[None, :] > state.L[:, c][:, None]] = -np.inf
    return logw, num_base


def _log_pi(pi: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(pi)


def conditional_L(state: ModelState, data: ReadCountData, hyper: Hyperparameters, c: int) -> np.ndarray:
    """Normalized log pmf (S x Q+1) of l_.c given everything else."""
    w = state.w
    M = compute_M(state.L, w)
    num = variant_numerator(state.Z, w, state.p0)
    logw, _ = _L_column_logweights(state, data, hyper, c, M, num, w, _log_pi(state.pi))
    return _normalize(logw, "copy-number")


def conditional_Z(state: ModelState, data: ReadCountData, hyper: Hyperparameters, c: int) -> np.ndarray:
    """Normalized log pmf (S x Q+1) of z_.c given everything else."""
    w = state.w
    M = compute_M(state.L, w)
    num = variant_numerator(state.Z, w, state.p0)
    logw, _ = _Z_column_logweights(state, data, hyper, c, M, num, w)
    return _normalize(logw, "variant-count")


def gibbs_update_L(state: ModelState, data: ReadCountData, hyper: Hyperparameters,
                   rng: np.random.Generator, metrics: Optional[AcceptanceTracker] = None) -> ModelState:
    new = state.copy()
    w = new.w
    M = compute_M(new.L, w)
    num = variant_numerator(new.Z, w, new.p0)
    log_pi = _log_pi(new.pi)
    for c in range(new.C):
        logw, M_base = _L_column_logweights(new, data, hyper, c, M, num, w, log_pi)
        pmf = np.exp(_normalize(logw, "copy-number"))
        new.L[:, c] = priors.draw_categorical(pmf, rng)
        M = M_base + np.outer(new.L[:, c], w[:, c + 1])
    if metrics is not None:
        metrics.track_proposal("L", new.S * new.C, new.S * new.C)
    return new


def gibbs_update_Z(state: ModelState, data: ReadCountData, hyper: Hyperparameters,
                   rng: np.random.Generator, metrics: Optional[AcceptanceTracker] = None) -> ModelState:
    new = state.copy()
    w = new.w
    M = compute_M(new.L, w)
    num = variant_numerator(new.Z, w, new.p0)
    for c in range(new.C):
        logw, num_base = _Z_column_logweights(new, data, hyper, c, M, num, w)
        pmf = np.exp(_normalize(logw, "variant-count"))
        new.Z[:, c] = priors.draw_categorical(pmf, rng)
        num = num_base + np.outer(new.Z[:, c], w[:, c + 1])
    if metrics is not None:
        metrics.track_proposal("Z", new.S * new.C, new.S * new.C)
    return new


def gibbs_update_pi(state: ModelState, hyper: Hyperparameters, rng: np.random.Generator) -> ModelState:
    """Conjugate beta-Dirichlet update from the copy-number counts m_cq."""
    new = state.copy()
    Q = hyper.Q
    counts = (new.L[:, :, None] == np.arange(Q + 1)[None, None, :]).sum(axis=0)
    params = priors.BetaDirichletParams.from_hyper(hyper, new.C)
    m_neutral = counts[:, priors.NEUTRAL]
    a = params.aC + new.S - m_neutral
    b = params.beta + m_neutral
    gamma = params.gamma[None, :] + counts[:, priors.off_neutral(Q)]
    new.pi = priors.sample_pi_rows(a, b, gamma, rng)
    return new


def gibbs_update_phi(state: ModelState, data: ReadCountData, hyper: Hyperparameters,
                     rng: np.random.Generator) -> ModelState:
    """phi_t ~ Gamma(a_t + sum_s N_st, b_t + sum_s exposure_st M_st / 2)."""
    new = state.copy()
    M = compute_M(new.L, new.w)
    shape = hyper.phi_shape(new.T) + data.N.sum(axis=0)
    rate = hyper.phi_rate(new.T) + (data.exposure * M / 2.0).sum(axis=0)
    new.phi = np.maximum(rng.gamma(shape, 1.0 / rate), _TINY)
    return new


def mh_update_theta(state: ModelState, data: ReadCountData, hyper: Hyperparameters,
                    rng: np.random.Generator, step: float = 0.2,
                    metrics: Optional[AcceptanceTracker] = None) -> ModelState:
    """Log-scale random walk on each column of theta; all samples move independently."""
    new = state.copy()
    theta = new.theta
    shapes = np.concatenate([[hyper.d0], np.full(new.C, hyper.d)])
    w = new.w
    ll = cell_loglik(data, compute_M(new.L, w), variant_numerator(new.Z, w, new.p0), new.phi).sum(axis=0)
    accepted = 0
    for c in range(new.C + 1):
        proposal = theta.copy()
        proposal[:, c] = np.maximum(theta[:, c] * np.exp(step * rng.standard_normal(new.T)), _TINY)
        w_prop = proposal / proposal.sum(axis=1, keepdims=True)
        ll_prop = cell_loglik(data, compute_M(new.L, w_prop),
                              variant_numerator(new.Z, w_prop, new.p0), new.phi).sum(axis=0)
        log_step = np.log(proposal[:, c]) - np.log(theta[:, c])
        # Gamma(k, 1) prior ratio plus the log-scale Jacobian theta'/theta
        log_ratio = ll_prop - ll + shapes[c] * log_step - (proposal[:, c] - theta[:, c])
        accept = np.log(rng.random(new.T)) < log_ratio
        theta[accept, c] = proposal[accept, c]
        ll[accept] = ll_prop[accept]
        accepted += int(accept.sum())
    if metrics is not None:
        metrics.track_proposal("theta", accepted, new.T * (new.C + 1))
    return new


def mh_update_p0(state: ModelState, data: ReadCountData, hyper: Hyperparameters,
                 rng: np.random.Generator, step: float = 0.2,
                 metrics: Optional[AcceptanceTracker] = None) -> ModelState:
    """Logit-scale random walk on p0."""
    new = state.copy()
    current = new.p0
    proposal = float(np.clip(expit(logit(current) + step * rng.standard_normal()), _TINY, 1.0 - _EPS))
    w = new.w
    M = compute_M(new.L, w)
    ll = cell_loglik(data, M, variant_numerator(new.Z, w, current), new.phi).sum()
    ll_prop = cell_loglik(data, M, variant_numerator(new.Z, w, proposal), new.phi).sum()
    log_ratio = (ll_prop - ll
                 + priors.logdens_p0(proposal, hyper) - priors.logdens_p0(current, hyper)
                 + np.log(proposal * (1.0 - proposal)) - np.log(current * (1.0 - current)))
    accept = bool(np.log(rng.random()) < log_ratio)
    if accept:
        new.p0 = proposal
    if metrics is not None:
        metrics.track_proposal("p0", int(accept))
    return new


def mh_independence_p0(state: ModelState, data: ReadCountData, hyper: Hyperparameters,
                       rng: np.random.Generator, metrics: Optional[AcceptanceTracker] = None) -> ModelState:
    """
    Independence proposal p0' ~ Be(a00, b00). Prior and proposal cancel, leaving the likelihood
    ratio.
    """
    new = state.copy()
    proposal = priors.sample_p0(hyper, rng)
    w = new.w
    M = compute_M(new.L, w)
    ll = cell_loglik(data, M, variant_numerator(new.Z, w, new.p0), new.phi).sum()
    ll_prop = cell_loglik(data, M, variant_numerator(new.Z, w, proposal), new.phi).sum()
    accept = bool(np.log(rng.random()) < ll_prop - ll)
    if accept:
        new.p0 = proposal
    if metrics is not None:
        metrics.track_proposal("p0_prior", int(accept))
    return new


def row_proposal_logpmf(ell: np.ndarray, z: np.ndarray, Q: int) -> np.ndarray:
    """log q(l, z) of the row move: l ~ DU(0..Q), z | l ~ DU(0..l), summed over columns."""
    ell = np.atleast_2d(ell)
    z = np.atleast_2d(z)
    out = -(np.log(Q + 1.0) + np.log(ell + 1.0)).sum(axis=1)
    out[np.any((z < 0) | (z > ell), axis=1)] = -np.inf
    return out


def _row_move(new: ModelState, data: ReadCountData, hyper: Hyperparameters,
              rng: np.random.Generator, rows: np.ndarray) -> int:
    """Joint proposal for the given rows, each accepted on its own. Mutates new."""
    rows = np.asarray(rows, dtype=int)
    if rows.size == 0:
        return 0
    Q, C = hyper.Q, new.C
    L_prop = rng.integers(0, Q + 1, size=(rows.size, C))
    Z_prop = np.floor(rng.random((rows.size, C)) * (L_prop + 1)).astype(int)
    L_cur, Z_cur = new.L[rows], new.Z[rows]
    w = new.w
    ll = cell_loglik(data, compute_M(L_cur, w), variant_numerator(Z_cur, w, new.p0), new.phi, rows).sum(axis=1)
    ll_prop = cell_loglik(data, compute_M(L_prop, w), variant_numerator(Z_prop, w, new.p0), new.phi, rows).sum(axis=1)
    log_pi = _log_pi(new.pi)
    cols = np.arange(C)[None, :]
    prior = log_pi[cols, L_cur].sum(axis=1) - np.log(L_cur + 1.0).sum(axis=1)
    prior_prop = log_pi[cols, L_prop].sum(axis=1) - np.log(L_prop + 1.0).sum(axis=1)
    log_ratio = (ll_prop + prior_prop - ll - prior
                 + row_proposal_logpmf(L_cur, Z_cur, Q) - row_proposal_logpmf(L_prop, Z_prop, Q))
    accept = np.log(rng.random(rows.size)) < log_ratio
    new.L[rows[accept]] = L_prop[accept]
    new.Z[rows[accept]] = Z_prop[accept]
    return int(accept.sum())


def mh_update_row(state: ModelState, data: ReadCountData, hyper: Hyperparameters,
                  rng: np.random.Generator, s: int,
                  metrics: Optional[AcceptanceTracker] = None) -> ModelState:
    if not 0 <= s < state.S:
        raise StructuralError(f"row {s} is outside 0..{state.S - 1}")
    new = state.copy()
    accepted = _row_move(new, data, hyper, rng, np.array([s]))
    if metrics is not None:
        metrics.track_proposal("row", accepted)
    return new


def mh_update_rows(state: ModelState, data: ReadCountData, hyper: Hyperparameters,
                   rng: np.random.Generator, prob: float,
                   metrics: Optional[AcceptanceTracker] = None) -> ModelState:
    """Row move on each row independently with probability prob."""
    new = state.copy()
    rows = np.flatnonzero(rng.random(new.S) < prob)
    accepted = _row_move(new, data, hyper, rng, rows)
    if metrics is not None and rows.size:
        metrics.track_proposal("row", accepted, rows.size)
    return new


def mh_swap_rows(state: ModelState, data: ReadCountData, hyper: Hyperparameters,
                 rng: np.random.Generator, prob: float,
                 metrics: Optional[AcceptanceTracker] = None) -> ModelState:
    """
    For each row picked with probability prob, propose exchanging the (l, z) entries of two
    random subclones. The proposal is symmetric and the DU(0..l) terms are unchanged, so only
    the likelihood and the two pi lookups enter the ratio.
    """
    new = state.copy()
    if new.C < 2:
        return new
    rows = np.flatnonzero(rng.random(new.S) < prob)
    if rows.size == 0:
        return new
    first = rng.integers(0, new.C, size=rows.size)
    second = (first + rng.integers(1, new.C, size=rows.size)) % new.C
    L_cur, Z_cur = new.L[rows], new.Z[rows]
    L_prop, Z_prop = L_cur.copy(), Z_cur.copy()
    idx = np.arange(rows.size)
    L_prop[idx, first], L_prop[idx, second] = L_cur[idx, second], L_cur[idx, first]
    Z_prop[idx, first], Z_prop[idx, second] = Z_cur[idx, second], Z_cur[idx, first]
    w = new.w
    ll = cell_loglik(data, compute_M(L_cur, w), variant_numerator(Z_cur, w, new.p0), new.phi, rows).sum(axis=1)
    ll_prop = cell_loglik(data, compute_M(L_prop, w), variant_numerator(Z_prop, w, new.p0), new.phi, rows).sum(axis=1)
    log_pi = _log_pi(new.pi)
    prior = log_pi[first, L_cur[idx, first]] + log_pi[second, L_cur[idx, second]]
    prior_prop = log_pi[first, L_prop[idx, first]] + log_pi[second, L_prop[idx, second]]
    with np.errstate(invalid="ignore"):
        log_ratio = ll_prop + prior_prop - ll - prior
    accept = np.log(rng.random(rows.size)) < log_ratio
    new.L[rows[accept]] = L_prop[accept]
    new.Z[rows[accept]] = Z_prop[accept]
    if metrics is not None:
        metrics.track_proposal("swap", int(accept.sum()), rows.size)
    return new


# --- Chain driver ---

def initialize_state(data: ReadCountData, hyper: Hyperparameters, C: int,
                     rng: np.random.Generator) -> ModelState:
    """
    Z from observed variant fractions, L from Z; pi, theta and p0 from the prior;
    phi at its prior mean.
    """
    Q = hyper.Q
    fractions = np.divide(data.n, data.N, out=np.zeros_like(data.N), where=data.N > 0)
    if data.S:
        z0 = np.clip(np.rint(2.0 * np.median(fractions, axis=1)), 0, Q).astype(int)
    else:
        z0 = np.zeros(0, dtype=int)
    Z = np.tile(z0[:, None], (1, C))
    L = np.maximum(2, Z)
    draw = priors.sample_prior_state(C, 0, data.T, hyper, rng)
    return ModelState(
        L=L, Z=Z, pi=draw.pi, theta=draw.theta,
        phi=hyper.phi_shape(data.T) / hyper.phi_rate(data.T), p0=draw.p0,
    )


class FixedCSampler:
    """
    One sweep = [L, Z, pi, phi, theta, p0 (logit walk, then a prior draw), rows, column swaps],
    in that order.
    Holds the chain's step sizes and acceptance counters.
    """

    def __init__(self, data: ReadCountData, hyper: Hyperparameters, config: ChainConfig,
                 rng: np.random.Generator, metrics: Optional[AcceptanceTracker] = None):
        self.data = data
        self.hyper = hyper
        self.config = config
        self.rng = rng
        self.metrics = metrics if metrics is not None else AcceptanceTracker()
        self.step_theta = config.mh_step_theta
        self.step_p0 = config.mh_step_p0
        self._window = {"theta": (0, 0), "p0": (0, 0)}

    def sweep(self, state: ModelState) -> ModelState:
        self.metrics.start_sweep()
        rng, data, hyper = self.rng, self.data, self.hyper
        state = gibbs_update_L(state, data, hyper, rng, self.metrics)
        state = gibbs_update_Z(state, data, hyper, rng, self.metrics)
        state = gibbs_update_pi(state, hyper, rng)
        state = gibbs_update_phi(state, data, hyper, rng)
        state = mh_update_theta(state, data, hyper, rng, self.step_theta, self.metrics)
        state = mh_update_p0(state, data, hyper, rng, self.step_p0, self.metrics)
        state = mh_independence_p0(state, data, hyper, rng, self.metrics)
        state = mh_update_rows(state, data, hyper, rng, self.config.row_update_prob, self.metrics)
        state = mh_swap_rows(state, data, hyper, rng, self.config.row_update_prob, self.metrics)
        self.metrics.end_sweep()
        return state

    def adapt_steps(self, iteration: int) -> None:
        """Burn-in only: nudge step sizes toward the target acceptance rate."""
        if (iteration + 1) % ADAPT_WINDOW:
            return
        for move in ("theta", "p0"):
            stats = self.metrics.moves.get(move)
            if stats is None:
                continue
            acc0, prop0 = self._window[move]
            proposed = stats.proposed - prop0
            if proposed:
                rate = (stats.accepted - acc0) / proposed
                factor = float(np.exp(rate - ADAPT_TARGET))
                if move == "theta":
                    self.step_theta *= factor
                else:
                    self.step_p0 *= factor
            self._window[move] = (stats.accepted, stats.proposed)


def check_state(state: ModelState, value: float, hyper: Hyperparameters) -> None:
    state.validate(hyper.Q)
    if not np.isfinite(value):
        raise SamplerInternalError("accepted state has zero posterior density")


def run_fixed_C(data: ReadCountData, hyper: Hyperparameters, C: int, config: ChainConfig,
                rng: Optional[np.random.Generator] = None, chain_id: int = 0) -> ChainTrace:
    """Runs the fixed-C kernel; deterministic given the seed (or the injected generator)."""
    if C < 1:
        raise StructuralError("C must be at least 1")
    hyper = hyper.resolve_for(data)
    if rng is None:
        streams = ChainStreams(config.seed, chain_id)
        rng, init_rng = streams.main(), streams.init()
    else:
        init_rng = rng
    state = initialize_state(data, hyper, C, init_rng)
    trace = ChainTrace(chain_id=chain_id)
    sampler = FixedCSampler(data, hyper, config, rng, trace.metrics)
    SamplerTelemetry.emit(SamplerStage.INIT, chain_id, {"C": C, "S": data.S, "T": data.T})

    iterations = range(config.n_iter)
    if config.progress:
        iterations = tqdm(iterations, desc=f"chain {chain_id} C={C}")
    for it in iterations:
        state = sampler.sweep(state)
        if config.adapt_burn_in and it < config.burn_in:
            sampler.adapt_steps(it)
        value = log_joint(state, data, hyper)
        if config.debug:
            check_state(state, value, hyper)
        retain = it >= config.burn_in and (it - config.burn_in) % config.thin == 0
        trace.record(it, state, value, retain)
        if config.log_every and (it + 1) % config.log_every == 0:
            stage = SamplerStage.BURN_IN if it < config.burn_in else SamplerStage.SAMPLING
            SamplerTelemetry.emit(stage, chain_id, {"iteration": it + 1, "log_joint": round(value, 3)},
                                  trace.metrics.get_metrics_snapshot())
    return trace

"""
Trans-dimensional inference over the number of subclones C.

The data are split into a small fractional training portion and the remaining test portion.
The training posterior p1(x | C) serves as the prior inside the C-move and as its proposal,
so its normalizing constant cancels; the test likelihood decides acceptance. Training and test
Poisson exposures add up to the observed one, so p1(x | C) * p(test | x) is the full-data
posterior and the within-C sweeps simply run on the full data.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, Iterable, Optional, Tuple

import numpy as np
from tqdm import tqdm

from src import priors
from src.config import ChainConfig, Hyperparameters, settings
from src.errors import StructuralError
from src.mcmc import ChainTrace, FixedCSampler, check_state, initialize_state
from src.metrics import AcceptanceTracker
from src.model import ModelState, ReadCountData, log_joint, log_likelihood, log_prior
from src.observability import SamplerStage, SamplerTelemetry
from src.rng import ChainStreams

logger = logging.getLogger(__name__)

_TINY = np.finfo(float).tiny
_EPS = np.finfo(float).eps


@dataclass
class TrainTestSplit:
    b: np.ndarray
    train: ReadCountData
    test: ReadCountData


def make_split(data: ReadCountData, A: float, B: float, rng: np.random.Generator) -> TrainTestSplit:
    """b_st ~ Be(A, B); the training portion holds b * counts, the test portion the rest."""
    if A <= 0 or B <= 0:
        raise StructuralError("split Beta parameters must be strictly positive")
    b = np.clip(rng.beta(A, B, size=(data.S, data.T)), _TINY, 1.0 - _EPS)
    N_train, n_train = b * data.N, b * data.n
    ids = dict(locus_ids=list(data.locus_ids), sample_ids=list(data.sample_ids))
    train = ReadCountData(N=N_train, n=n_train, exposure=b * data.exposure, **ids)
    test = ReadCountData(
        N=data.N - N_train,
        n=np.minimum(data.n - n_train, data.N - N_train),
        exposure=(1.0 - b) * data.exposure,
        **ids,
    )
    return TrainTestSplit(b=b, train=train, test=test)


class _WarmChain:
    def __init__(self, train: ReadCountData, hyper: Hyperparameters, config: ChainConfig,
                 C: int, rng: np.random.Generator):
        self.C = C
        self.sampler = FixedCSampler(train, hyper, config, rng, AcceptanceTracker())
        self.state = initialize_state(train, hyper, C, rng)
        self.burned_in = False

    def advance(self, sweeps: int) -> None:
        for _ in range(sweeps):
            self.state = self.sampler.sweep(self.state)


class TrainingPosterior:
    """
    One persistent fixed-C chain on the training data per candidate C.
    A chain burns in on first use and then moves inner_advance sweeps between draws.
    """

    def __init__(self, train: ReadCountData, hyper: Hyperparameters, config: ChainConfig,
                 streams: ChainStreams):
        self.train = train
        self.hyper = hyper
        self.config = config
        self.streams = streams
        self._chains: Dict[int, _WarmChain] = {}

    def _chain(self, C: int) -> _WarmChain:
        if not 1 <= C <= self.hyper.c_max:
            raise StructuralError(f"C={C} is outside 1..{self.hyper.c_max}")
        if C not in self._chains:
            self._chains[C] = _WarmChain(self.train, self.hyper, self.config, C, self.streams.warm(C))
        return self._chains[C]

    def _burn_in(self, chain: _WarmChain) -> None:
        if not chain.burned_in:
            chain.advance(self.config.warm_burn_in)
            chain.burned_in = True

    def warm_up(self, candidates: Iterable[int], max_workers: Optional[int] = None) -> None:
        """Burns in several chains concurrently; each owns its generator."""
        chains = [self._chain(C) for C in sorted(set(candidates))]
        pending = [chain for chain in chains if not chain.burned_in]
        if not pending:
            return
        with ThreadPoolExecutor(max_workers=max_workers or settings.max_workers) as pool:
            list(pool.map(self._burn_in, pending))

    def draw(self, C: int) -> ModelState:
        chain = self._chain(C)
        self._burn_in(chain)
        chain.advance(self.config.inner_advance)
        return chain.state.copy()

    def log_density(self, state: ModelState) -> float:
        """Unnormalized log p1(x | C): prior without the C term plus training log-likelihood."""
        prior = log_prior(state, self.hyper, include_C=False)
        if not np.isfinite(prior):
            return -np.inf
        return prior + log_likelihood(state, self.train)


def train_posterior_sampler(train: ReadCountData, hyper: Hyperparameters, config: ChainConfig,
                            streams: ChainStreams) -> TrainingPosterior:
    return TrainingPosterior(train, hyper, config, streams)


def propose_C(C: int, c_max: int, rng: np.random.Generator) -> int:
    """+-1 random walk on 1..c_max, reflecting at both ends."""
    if c_max < 2:
        raise StructuralError("the C-move needs c_max >= 2")
    if C <= 1:
        return 2
    if C >= c_max:
        return c_max - 1
    return C - 1 if rng.random() < 0.5 else C + 1


def log_q_C(to: int, frm: int, c_max: int) -> float:
    if abs(to - frm) != 1 or not 1 <= to <= c_max:
        return -np.inf
    if frm == 1 or frm == c_max:
        return 0.0
    return float(np.log(0.5))


def rj_update_C(C: int, state: ModelState, split: TrainTestSplit, posterior: TrainingPosterior,
                hyper: Hyperparameters, rng: np.random.Generator,
                metrics: Optional[AcceptanceTracker] = None) -> Tuple[int, ModelState, bool]:
    """
    Target p(C) p1(x | C) p(test | x), proposal q(C' | C) p1(x' | C'). The p1 terms of the
    target and of the proposal are evaluated separately and cancel exactly.
    """
    C_new = propose_C(C, hyper.c_max, rng)
    proposal = posterior.draw(C_new)

    lp1_new = posterior.log_density(proposal)
    lp1_old = posterior.log_density(state)
    target_new = priors.logpmf_C(C_new, hyper) + lp1_new + log_likelihood(proposal, split.test)
    target_old = priors.logpmf_C(C, hyper) + lp1_old + log_likelihood(state, split.test)
    forward = log_q_C(C_new, C, hyper.c_max) + lp1_new
    backward = log_q_C(C, C_new, hyper.c_max) + lp1_old
    log_ratio = (target_new - target_old) + (backward - forward)
    accepted = bool(np.log(rng.random()) < log_ratio)
    if metrics is not None:
        metrics.track_proposal("rj", int(accepted))
    if accepted:
        return C_new, proposal, True
    return C, state, False


def run_transdimensional(data: ReadCountData, hyper: Hyperparameters, config: ChainConfig,
                         streams: Optional[ChainStreams] = None, chain_id: int = 0) -> ChainTrace:
    """Full-data fixed-C sweeps interleaved with a C-move every rj_every sweeps."""
    hyper = hyper.resolve_for(data)
    if hyper.c_max < 2:
        raise StructuralError("trans-dimensional inference needs c_max >= 2")
    streams = streams or ChainStreams(config.seed, chain_id)
    split = make_split(data, *hyper.split_beta, streams.split())
    posterior = train_posterior_sampler(split.train, hyper, config, streams)
    rj_rng = streams.rj()

    C = min(config.initial_C, hyper.c_max)
    state = initialize_state(data, hyper, C, streams.init())
    trace = ChainTrace(chain_id=chain_id)
    sampler = FixedCSampler(data, hyper, config, streams.main(), trace.metrics)
    posterior.warm_up([c for c in (C - 1, C + 1) if 1 <= c <= hyper.c_max])
    SamplerTelemetry.emit(SamplerStage.INIT, chain_id,
                          {"initial_C": C, "c_max": hyper.c_max, "S": data.S, "T": data.T})

    iterations = range(config.n_iter)
    if config.progress:
        iterations = tqdm(iterations, desc=f"chain {chain_id}")
    for it in iterations:
        state = sampler.sweep(state)
        if config.adapt_burn_in and it < config.burn_in:
            sampler.adapt_steps(it)
        if (it + 1) % config.rj_every == 0:
            C_before = C
            C, state, accepted = rj_update_C(C, state, split, posterior, hyper, rj_rng, trace.metrics)
            if accepted:
                SamplerTelemetry.emit(SamplerStage.RJ_MOVE, chain_id,
                                      {"iteration": it + 1, "from": C_before, "to": C}, level=logging.DEBUG)
        value = log_joint(state, data, hyper)
        if config.debug:
            check_state(state, value, hyper)
        retain = it >= config.burn_in and (it - config.burn_in) % config.thin == 0
        trace.record(it, state, value, retain)
        if config.log_every and (it + 1) % config.log_every == 0:
            stage = SamplerStage.BURN_IN if it < config.burn_in else SamplerStage.SAMPLING
            SamplerTelemetry.emit(stage, chain_id, {"iteration": it + 1, "C": C, "log_joint": round(value, 3)},
                                  trace.metrics.get_metrics_snapshot())
    return trace

"""
Configuration models for CloneMix.
Hyperparameters and chain settings are pydantic models; runtime defaults come from the environment (.env supported).
"""
import os
from typing import List, Optional, Tuple, Union

import numpy as np
from dotenv import load_dotenv
from pydantic import BaseModel, Field, field_validator, model_validator

from src.errors import StructuralError

load_dotenv()

# Floor for sample copy numbers; below it a state has zero probability.
M_EPSILON = 1e-10


class Hyperparameters(BaseModel):
    """
    Prior settings. Defaults follow the simulation-study values.
    a_phi=None means "set from data": a = b_phi * median(N).
    """
    r: float = 0.2
    alpha: float = 2.0
    beta: float = 1.0
    gamma: Union[float, List[float]] = 0.5
    d0: float = 0.5
    d: float = 1.0
    a00: float = 0.3
    b00: float = 5.0
    a_phi: Optional[Union[float, List[float]]] = None
    b_phi: Union[float, List[float]] = 3.0
    Q: int = 3
    c_max: int = 8
    split_beta: Tuple[float, float] = (25.0, 975.0)

    @field_validator("alpha", "beta", "d0", "d", "a00", "b00")
    @classmethod
    def _positive(cls, v: float) -> float:
        if not v > 0:
            raise ValueError("must be strictly positive")
        return v

    @field_validator("r")
    @classmethod
    def _rate(cls, v: float) -> float:
        if not 0 < v <= 1:
            raise ValueError("geometric rate must lie in (0, 1]")
        return v

    @field_validator("gamma", "a_phi", "b_phi")
    @classmethod
    def _positive_vector(cls, v):
        if v is None:
            return v
        values = v if isinstance(v, list) else [v]
        if not values or any(not x > 0 for x in values):
            raise ValueError("entries must be strictly positive")
        return v

    @field_validator("split_beta")
    @classmethod
    def _split(cls, v):
        if v[0] <= 0 or v[1] <= 0:
            raise ValueError("split Beta parameters must be strictly positive")
        return v

    @model_validator(mode="after")
    def _shapes(self):
        if self.Q < 2:
            raise ValueError("Q must be at least 2 (the neutral state is 2 copies)")
        if self.c_max < 1:
            raise ValueError("c_max must be at least 1")
        if isinstance(self.gamma, list) and len(self.gamma) != self.Q:
            raise ValueError(f"gamma needs {self.Q} entries (one per non-neutral copy number)")
        return self

    def gamma_vector(self) -> np.ndarray:
        """Dirichlet parameters over copy numbers q != 2, in increasing q."""
        if isinstance(self.gamma, list):
            return np.asarray(self.gamma, dtype=float)
        return np.full(self.Q, float(self.gamma))

    def _per_sample(self, value, T: int, name: str) -> np.ndarray:
        if value is None:
            raise ValueError(f"{name} is unresolved; call resolve_for(data) first")
        if isinstance(value, list):
            if len(value) != T:
                raise ValueError(f"{name} has {len(value)} entries for {T} samples")
            return np.asarray(value, dtype=float)
        return np.full(T, float(value))

    def phi_shape(self, T: int) -> np.ndarray:
        return self._per_sample(self.a_phi, T, "a_phi")

    def phi_rate(self, T: int) -> np.ndarray:
        return self._per_sample(self.b_phi, T, "b_phi")

    def resolve_for(self, data) -> "Hyperparameters":
        """Fill a_phi so that the prior mean of phi equals the median observed N."""
        resolved = self
        if self.a_phi is None:
            if data.N.size == 0:
                raise StructuralError("cannot derive a_phi from empty data; set it explicitly")
            rate = float(np.median(self.phi_rate(data.T)))
            median = float(np.median(data.N))
            # an all-zero matrix still needs a proper Gamma prior
            if median == 0.0:
                median = 1.0
            resolved = self.model_copy(update={"a_phi": rate * median})
        try:
            resolved.phi_shape(data.T)
            resolved.phi_rate(data.T)
        except ValueError as e:
            raise StructuralError(str(e)) from e
        return resolved


class ChainConfig(BaseModel):
    n_iter: int = 16000
    burn_in: int = 6000
    thin: int = 1
    seed: int = 0
    mh_step_theta: float = 0.2
    mh_step_p0: float = 0.2
    row_update_prob: float = 0.2
    rj_every: int = 1
    inner_advance: int = 10
    warm_burn_in: int = 500
    initial_C: int = 1
    adapt_burn_in: bool = False
    debug: bool = False
    progress: bool = False
    log_every: int = 1000

    @field_validator("mh_step_theta", "mh_step_p0")
    @classmethod
    def _step(cls, v: float) -> float:
        if v < 0:
            raise ValueError("step sizes cannot be negative")
        return v

    @field_validator("row_update_prob")
    @classmethod
    def _prob(cls, v: float) -> float:
        if not 0 <= v <= 1:
            raise ValueError("must lie in [0, 1]")
        return v

    @field_validator("seed")
    @classmethod
    def _seed(cls, v: int) -> int:
        if not 0 <= v < 2 ** 64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        return v

    @model_validator(mode="after")
    def _schedule(self):
        if self.n_iter < 1:
            raise ValueError("n_iter must be positive")
        if not 0 <= self.burn_in < self.n_iter:
            raise ValueError("burn_in must satisfy 0 <= burn_in < n_iter")
        if self.thin < 1 or self.rj_every < 1 or self.initial_C < 1:
            raise ValueError("thin, rj_every and initial_C must be >= 1")
        if self.inner_advance < 0 or self.warm_burn_in < 0:
            raise ValueError("inner_advance and warm_burn_in cannot be negative")
        return self


class RunConfig(BaseModel):
    """Everything the CLI needs to execute one stage; serialized into the manifest."""
    subcommand: str
    out_dir: str
    path_N: Optional[str] = None
    path_n: Optional[str] = None
    trace_path: Optional[str] = None
    truth_dir: Optional[str] = None
    summary_dir: Optional[str] = None
    scenario: str = "sim1"
    fixed_C: Optional[int] = None
    chains: int = 1
    heatmaps: bool = False
    hyper: Hyperparameters = Field(default_factory=Hyperparameters)
    chain: ChainConfig = Field(default_factory=ChainConfig)

    @field_validator("subcommand")
    @classmethod
    def _known(cls, v: str) -> str:
        if v not in {"simulate", "infer", "summarize", "score"}:
            raise ValueError(f"unknown subcommand {v!r}")
        return v

    @field_validator("chains")
    @classmethod
    def _chains(cls, v: int) -> int:
        if v < 1:
            raise ValueError("need at least one chain")
        return v


class RuntimeSettings(BaseModel):
    log_level: str = Field(default_factory=lambda: os.getenv("CLONEMIX_LOG_LEVEL", "INFO"))
    log_file: Optional[str] = Field(default_factory=lambda: os.getenv("CLONEMIX_LOG_FILE") or None)
    progress: bool = Field(default_factory=lambda: os.getenv("CLONEMIX_PROGRESS", "0") == "1")
    max_workers: int = Field(default_factory=lambda: int(os.getenv("CLONEMIX_MAX_WORKERS", str(os.cpu_count() or 1))))


settings = RuntimeSettings()

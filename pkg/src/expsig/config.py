"""Experiment configuration schema.

One declarative config drives every experiment kind.  All fields carry
defaults except the seed: reproducibility is mandatory, so the seed must be
stated explicitly (or injected via the CLI flag).
"""

from __future__ import annotations

import hashlib
import json
from typing import List, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

EXPERIMENT_KINDS = (
    "infill",
    "consistency",
    "clt",
    "density",
    "variance-reduction",
    "price",
    "hedge",
    "colreg",
)


class ProcessSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    type: Literal["bm", "fbm", "ou", "car2", "heston", "linear"] = "bm"
    d: int = 1
    # fbm
    hurst: float = 0.75
    # ou
    A: Optional[List[List[float]]] = None
    Sigma: Optional[List[List[float]]] = None
    # car2
    A1: Optional[List[List[float]]] = None
    A2: Optional[List[List[float]]] = None
    # heston
    s0: float = 1.0
    v0: float = 0.1
    kappa: float = 0.6
    theta: float = 0.1
    xi: float = 0.2
    rho: float = -0.15
    substeps: int = 16
    # linear (deterministic test path)
    slope: float = 1.0

    @model_validator(mode="after")
    def _check(self) -> "ProcessSpec":
        if self.type == "ou" and (self.A is None or self.Sigma is None):
            raise ValueError("ou process needs drift matrix A and stationary covariance Sigma")
        if self.type == "car2" and (self.A1 is None or self.A2 is None):
            raise ValueError("car2 process needs A1 and A2")
        if self.type == "fbm" and not 0 < self.hurst < 1:
            raise ValueError("Hurst exponent must lie in (0, 1)")
        return self

    def dimension(self) -> int:
        if self.type in ("bm", "fbm", "linear"):
            return self.d
        if self.type == "ou":
            return len(self.A) if self.A is not None else 1
        return 2  # car2 projects to 2, heston is (S, V)


class PartitionSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    scheme: Literal["dyadic", "mesh_rule"] = "dyadic"
    level: int = 6
    T: float = 1.0

    def resolve_level(self, n_paths: int) -> int:
        """Dyadic level; the mesh rule ties |pi| = 2^(-floor(N/10)+1) to N."""
        if self.scheme == "dyadic":
            return self.level
        return max(n_paths // 10 - 1, 0)


class EstimatorSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    mode: Literal["naive", "c1", "c2", "fixed"] = "c1"
    c: float = 0.0
    centered: bool = False


class InfillSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    levels: List[int] = Field(default_factory=lambda: [3, 4, 5, 6, 7, 8])
    reference_level: int = 11
    statistic: Literal["signature", "control"] = "signature"
    expected_slope: Optional[float] = None

    @model_validator(mode="after")
    def _check(self) -> "InfillSpec":
        if not self.levels:
            raise ValueError("infill needs at least one dyadic level")
        if list(self.levels) != sorted(set(self.levels)):
            raise ValueError("infill levels must be strictly increasing")
        if max(self.levels) >= self.reference_level:
            raise ValueError("reference level must be finer than every tested level")
        return self


class CltSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    reference: Literal["run", "exact"] = "run"
    reference_factor: int = 256


class DensitySpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    reference_factor: int = 50
    bins: int = 40


class ConsistencySpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    n_ladder: List[int] = Field(default_factory=lambda: [64, 256, 1024, 4096])
    reps: int = 32
    reference_factor: int = 10
    reference_extra_levels: int = 2
    segment_level: Optional[int] = None  # chop: steps per segment (dyadic level)


class PayoffSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    coeffs: dict = Field(default_factory=lambda: {"2": 1.0})
    z_t: float = 1.0
    p0: float = 0.0


class PriceHedgeSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    payoff: PayoffSpec = Field(default_factory=PayoffSpec)
    correction: bool = True
    replications: int = 1
    backtest_paths: int = 2000


class ColregCell(BaseModel):
    model_config = ConfigDict(extra="forbid")

    sigma: float = 10.0
    rho: float = 0.5
    dependence: Literal["linear", "sq", "cube", "exp"] = "linear"


class ColregSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    cells: List[ColregCell] = Field(
        default_factory=lambda: [
            ColregCell(sigma=10.0, rho=0.25),
            ColregCell(sigma=10.0, rho=0.5),
            ColregCell(sigma=10.0, rho=0.75),
        ]
    )
    n: int = 1000
    reps: int = 10000


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal[EXPERIMENT_KINDS]  # type: ignore[valid-type]
    seed: int
    threads: int = 1
    words: List[str] = Field(default_factory=lambda: ["1.1"])
    K: int = 4
    sampling: Literal["ind", "chop"] = "ind"
    n_paths: int = 1000
    replications: int = 200
    upsilon: float = 0.5
    hac_kernel: Literal["truncation", "bartlett"] = "truncation"
    process: ProcessSpec = Field(default_factory=ProcessSpec)
    partition: PartitionSpec = Field(default_factory=PartitionSpec)
    estimator: EstimatorSpec = Field(default_factory=EstimatorSpec)
    infill: InfillSpec = Field(default_factory=InfillSpec)
    clt: CltSpec = Field(default_factory=CltSpec)
    density: DensitySpec = Field(default_factory=DensitySpec)
    consistency: ConsistencySpec = Field(default_factory=ConsistencySpec)
    price_hedge: PriceHedgeSpec = Field(default_factory=PriceHedgeSpec)
    colreg: ColregSpec = Field(default_factory=ColregSpec)

    @model_validator(mode="after")
    def _check(self) -> "ExperimentConfig":
        if self.seed < 0:
            raise ValueError("seed must be a non-negative integer")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")
        if not 0 < self.upsilon < 1:
            raise ValueError("upsilon must lie in (0, 1)")
        d = self.process.dimension()
        from .words import parse_word

        for w in self.words:
            word = parse_word(w, d)
            if len(word) > self.K:
                raise ValueError(f"word {w} exceeds truncation K={self.K}")
        if self.kind == "clt" and self.replications < 200:
            raise ValueError("clt experiments need at least 200 replications")
        return self

    def canonical_json(self) -> str:
        """Canonical serialization; `threads` is an execution hint and is
        excluded so outputs hash identically regardless of worker count."""
        data = self.model_dump(mode="json")
        data.pop("threads", None)
        return json.dumps(data, sort_keys=True, separators=(",", ":"))

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()[:16]


def load_config(text: str) -> ExperimentConfig:
    """Parse a YAML (or JSON) config document."""
    import yaml

    data = yaml.safe_load(text)
    if not isinstance(data, dict):
        raise ValueError("config file must hold a mapping at the top level")
    return ExperimentConfig.model_validate(data)


def mesh_rule_level(n_paths: int) -> int:
    return max(n_paths // 10 - 1, 0)


def words_of(config: ExperimentConfig):
    from .words import parse_word

    d = config.process.dimension()
    return [parse_word(w, d) for w in config.words]


def partition_of(config: ExperimentConfig):
    from .paths import dyadic_partition

    level = config.partition.resolve_level(config.n_paths)
    return dyadic_partition(config.partition.T, level)


def float_list(values: np.ndarray) -> List[float]:
    return [float(v) for v in np.asarray(values).ravel()]

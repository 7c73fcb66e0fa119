"""
Model configuration: particle number, coupling, momentum convention,
tolerances and sampling ranges. Loaded from a flat JSON file.
"""

import dataclasses
import json
import logging
import os
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Optional

from src.errors import ConfigError


class Convention(str, Enum):
    """Exponent used for the momentum factor of u_j."""

    HALF = "half"
    LITERAL = "literal"

    @property
    def momentum_scale(self) -> float:
        # u_j = exp(s * p_j) * ...
        return 0.5 if self is Convention.HALF else 1.0

    @property
    def bracket_scale(self) -> float:
        """Expected constant kappa in {I_k^1, I_j} = kappa * j * I_{j+k}."""
        return 2.0 * self.momentum_scale


@dataclass(frozen=True)
class Tolerances:
    abs_tol: float = 1e-10
    rel_tol: float = 1e-8
    drift_tol: float = 1e-6
    lin_tol: float = 1e-6
    spec_tol: float = 1e-5
    rank_tol: float = 1e-8


@dataclass(frozen=True)
class SampleRanges:
    """Gap bounds are in units of |chi|; momenta are drawn from [-p_max, p_max]."""

    gap_min: float = 1.0
    gap_max: float = 5.0
    p_max: float = 1.5


@dataclass(frozen=True)
class ModelConfig:
    n: int = 3
    chi: float = 1.0
    convention: Convention = Convention.HALF
    gap_floor: Optional[float] = None
    tol: Tolerances = field(default_factory=Tolerances)
    ranges: SampleRanges = field(default_factory=SampleRanges)
    seed: int = 42
    samples: int = 100
    index_min: int = -2
    index_max: int = 3
    condition_limit: float = 1e12
    include_timing: bool = False

    def __post_init__(self):
        if isinstance(self.convention, str) and not isinstance(self.convention, Convention):
            try:
                object.__setattr__(self, "convention", Convention(self.convention))
            except ValueError:
                raise ConfigError(f"convention must be 'half' or 'literal', got {self.convention!r}")
        if not isinstance(self.n, int) or isinstance(self.n, bool) or self.n < 1:
            raise ConfigError(f"invariant violated: n >= 1 (got n={self.n!r})")
        if self.chi == 0:
            raise ConfigError("invariant violated: chi != 0 (chi is an arbitrary nonzero real coupling)")
        if self.gap_floor is None:
            object.__setattr__(self, "gap_floor", 1e-6 * abs(self.chi))
        if self.gap_floor <= 0:
            raise ConfigError(f"invariant violated: gap_floor > 0 (got {self.gap_floor})")
        for name, value in dataclasses.asdict(self.tol).items():
            if value <= 0:
                raise ConfigError(f"invariant violated: {name} > 0 (got {value})")
        r = self.ranges
        if not (0 < r.gap_min <= r.gap_max) or r.p_max < 0:
            raise ConfigError(f"invariant violated: 0 < gap_min <= gap_max and p_max >= 0 (got {r})")
        if r.gap_min * abs(self.chi) < self.gap_floor:
            raise ConfigError("invariant violated: sampled gaps must stay above gap_floor")
        if self.samples < 1:
            raise ConfigError(f"invariant violated: samples >= 1 (got {self.samples})")
        if self.index_min > self.index_max:
            raise ConfigError("invariant violated: index_min <= index_max")

    @property
    def scale(self) -> float:
        return self.convention.momentum_scale

    @property
    def kappa(self) -> float:
        return self.convention.bracket_scale

    def replace(self, **changes) -> "ModelConfig":
        return dataclasses.replace(self, **changes)


_TOLERANCE_KEYS = {f.name for f in dataclasses.fields(Tolerances)}
_RANGE_KEYS = {f.name for f in dataclasses.fields(SampleRanges)}
_TOP_KEYS = {f.name for f in dataclasses.fields(ModelConfig)} - {"tol", "ranges"}


def config_from_dict(data: Dict[str, Any]) -> ModelConfig:
    """Builds a ModelConfig from a flat mapping, rejecting unknown keys."""
    unknown = set(data) - _TOLERANCE_KEYS - _RANGE_KEYS - _TOP_KEYS
    if unknown:
        raise ConfigError(f"Unknown configuration keys: {sorted(unknown)}")
    try:
        tol = Tolerances(**{k: float(v) for k, v in data.items() if k in _TOLERANCE_KEYS})
        ranges = SampleRanges(**{k: float(v) for k, v in data.items() if k in _RANGE_KEYS})
        top = {k: v for k, v in data.items() if k in _TOP_KEYS}
        for key in ("n", "seed", "samples", "index_min", "index_max"):
            if key in top:
                if isinstance(top[key], bool) or float(top[key]) != int(top[key]):
                    raise ConfigError(f"{key} must be an integer, got {top[key]!r}")
                top[key] = int(top[key])
        for key in ("chi", "condition_limit"):
            if key in top:
                top[key] = float(top[key])
        if top.get("gap_floor") is not None:
            top["gap_floor"] = float(top["gap_floor"])
    except (TypeError, ValueError) as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(f"Malformed configuration value: {e}") from e
    return ModelConfig(tol=tol, ranges=ranges, **top)


def load_config(path: Optional[str] = None, **overrides) -> ModelConfig:
    """
    Loads a flat JSON configuration file and applies overrides on top of it.

    Args:
        path (str, optional): Path to the JSON file. Missing path means all defaults.
        **overrides: Flat keys that replace values from the file (None values are ignored).

    Returns:
        ModelConfig: The validated configuration.
    """
    data: Dict[str, Any] = {}
    if path:
        if not os.path.isfile(path):
            raise ConfigError(f"Configuration file not found: {path}")
        try:
            with open(path, "r", encoding="utf-8") as f:
                data = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError(f"Configuration file {path} is not valid JSON: {e}") from e
        if not isinstance(data, dict):
            raise ConfigError("Configuration must be a flat JSON object.")
        logging.info(f"Loaded configuration from {path}")
    data.update({k: v for k, v in overrides.items() if v is not None})
    return config_from_dict(data)


def config_to_dict(cfg: ModelConfig) -> Dict[str, Any]:
    """Flat echo of every configuration value, defaults included."""
    out: Dict[str, Any] = {}
    for f in dataclasses.fields(cfg):
        value = getattr(cfg, f.name)
        if f.name in ("tol", "ranges"):
            out.update(dataclasses.asdict(value))
        elif isinstance(value, Convention):
            out[f.name] = value.value
        else:
            out[f.name] = value
    return out

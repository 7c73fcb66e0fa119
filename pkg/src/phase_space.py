"""
Phase space points in the Weyl chamber q_1 > q_2 > ... > q_n, and seeded sampling.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from src.config import ModelConfig
from src.errors import SingularConfigurationError


@dataclass(frozen=True)
class PhasePoint:
    """Ordered configuration q plus momenta p."""

    q: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        q = np.array(self.q, dtype=float).reshape(-1)
        p = np.array(self.p, dtype=float).reshape(-1)
        if q.shape != p.shape:
            raise ValueError(f"q and p must have the same length, got {q.size} and {p.size}")
        q.setflags(write=False)
        p.setflags(write=False)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "p", p)

    @property
    def n(self) -> int:
        return self.q.size

    @property
    def min_gap(self) -> float:
        if self.n < 2:
            return float("inf")
        return float(np.min(self.q[:-1] - self.q[1:]))

    def as_vector(self) -> np.ndarray:
        """Concatenated (q, p) state used by integrators."""
        return np.concatenate([self.q, self.p])

    @classmethod
    def from_vector(cls, z: Sequence[float]) -> "PhasePoint":
        z = np.asarray(z, dtype=float)
        n = z.size // 2
        return cls(z[:n], z[n:])

    def validate(self, cfg: ModelConfig) -> "PhasePoint":
        """Checks the Weyl-chamber ordering and the gap floor; returns self."""
        if self.n != cfg.n:
            raise SingularConfigurationError(f"point has {self.n} particles but the configuration expects n={cfg.n}")
        if not (np.all(np.isfinite(self.q)) and np.all(np.isfinite(self.p))):
            raise SingularConfigurationError("point has non-finite coordinates")
        gap = self.min_gap
        if gap <= 0:
            raise SingularConfigurationError(f"q is not strictly decreasing (min gap {gap:.3e})")
        if gap < cfg.gap_floor:
            raise SingularConfigurationError(f"min gap {gap:.3e} is below gap_floor {cfg.gap_floor:.3e}")
        return self


def make_generator(seed: int) -> np.random.Generator:
    """Named, portable generator: PCG64 seeded with the configured seed."""
    return np.random.Generator(np.random.PCG64(seed))


def sample_point(cfg: ModelConfig, rng: np.random.Generator) -> PhasePoint:
    """
    Draws one point: gaps uniform in [gap_min, gap_max]*|chi|, momenta uniform in
    [-p_max, p_max]. The configuration is centred at the origin.
    """
    r = cfg.ranges
    gaps = rng.uniform(r.gap_min, r.gap_max, size=cfg.n - 1) * abs(cfg.chi)
    q = -np.concatenate([[0.0], np.cumsum(gaps)])
    q -= q.mean()
    p = rng.uniform(-r.p_max, r.p_max, size=cfg.n)
    return PhasePoint(q, p)


def sample_points(cfg: ModelConfig, count: int, rng: Optional[np.random.Generator] = None) -> List[PhasePoint]:
    """Draws `count` validated points, resampling (and logging) any that are rejected."""
    rng = make_generator(cfg.seed) if rng is None else rng
    points: List[PhasePoint] = []
    while len(points) < count:
        point = sample_point(cfg, rng)
        try:
            points.append(point.validate(cfg))
        except SingularConfigurationError as e:
            logging.warning(f"Rejected singular sample ({e}); resampling.")
    return points

"""
Observable registry: maps textual ids (as used on the command line and in
reports) to observables.
"""

import re
from typing import Callable, Dict

from src.config import ModelConfig
from src.errors import IndexRangeError
from src.observables import (
    CanonicalMomentum,
    CharacteristicCoefficient,
    Observable,
    PowerTrace,
    PrincipalHamiltonian,
    TotalMomentum,
    WeightedTrace,
)
from src.superint import c_family, k_family, l_family

_PLAIN: Dict[str, Callable[[], Observable]] = {
    "H": PrincipalHamiltonian,
    "P": TotalMomentum,
    "Ptot": CanonicalMomentum,
}

_INDEXED = re.compile(r"^(I1|I|E|K|L)\((-?\d+)\)$")
_PAIR = re.compile(r"^C\((-?\d+),\s*(-?\d+)\)$")

_FACTORIES = {
    "I": PowerTrace,
    "I1": WeightedTrace,
    "E": CharacteristicCoefficient,
    "K": k_family,
    "L": l_family,
}


def parse_observable(obs_id: str, cfg: ModelConfig = None) -> Observable:
    """
    Parses an observable id such as "H", "I(2)", "I1(-1)", "C(2,1)" or "K(3)".

    Args:
        obs_id (str): The textual id.
        cfg (ModelConfig, optional): When given, the index range is validated against it.

    Returns:
        Observable: The registry observable.
    """
    text = obs_id.strip()
    if text in _PLAIN:
        obs = _PLAIN[text]()
    elif _INDEXED.match(text):
        name, index = _INDEXED.match(text).groups()
        obs = _FACTORIES[name](int(index))
    elif _PAIR.match(text):
        k, j = _PAIR.match(text).groups()
        obs = c_family(int(k), int(j))
    else:
        raise IndexRangeError(f"Unknown observable id {obs_id!r}; expected H, P, Ptot, I(k), I1(k), E(m), C(k,j), K(j) or L(j)")
    if cfg is not None:
        obs.validate(cfg)
    return obs


def known_ids(cfg: ModelConfig):
    """Every parameterized id valid for this configuration, listed when an id is rejected."""
    n = cfg.n
    ids = ["H", "P", "Ptot"]
    ids += [f"I({k})" for k in range(-n, n + 1)] + [f"I1({k})" for k in range(-n, n + 1)]
    ids += [f"E({m})" for m in range(0, n + 1)]
    ids += [f"C({k},{j})" for j in range(1, n + 1) for k in range(1, n + 1) if k != j]
    ids += [f"K({j})" for j in range(2, n + 1)] + [f"L({j})" for j in range(2, n + 1)]
    return ids

"""
Verification records and deterministic JSON output.
"""

import json
import logging
import math
import os
import tempfile
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np


@dataclass
class SuiteRecord:
    """Outcome of one verification suite. Findings are observations, not failures."""

    suite_id: str
    anchor: str
    samples: int
    max_residual: float
    tolerance: float
    passed: bool
    findings: List[str] = field(default_factory=list)
    details: Dict[str, Any] = field(default_factory=dict)
    skipped: bool = False
    seconds: Optional[float] = None

    def to_dict(self, include_timing: bool = False) -> Dict[str, Any]:
        out = {
            "suite": self.suite_id,
            "anchor": self.anchor,
            "samples": self.samples,
            "max_residual": self.max_residual,
            "tolerance": self.tolerance,
            "passed": self.passed,
            "skipped": self.skipped,
            "findings": list(self.findings),
            "details": self.details,
        }
        if include_timing and self.seconds is not None:
            out["seconds"] = self.seconds
        return out


def skipped_record(suite_id: str, anchor: str, reason: str) -> SuiteRecord:
    return SuiteRecord(suite_id, anchor, 0, 0.0, 0.0, True, findings=[f"not applicable: {reason}"], skipped=True)


@dataclass
class VerificationReport:
    config: Dict[str, Any]
    suites: List[SuiteRecord]
    kappa: Dict[str, Any]
    include_timing: bool = False
    total_seconds: Optional[float] = None

    @property
    def passed(self) -> bool:
        return all(s.passed for s in self.suites)

    @property
    def findings(self) -> List[str]:
        return [f"{s.suite_id}: {f}" for s in self.suites for f in s.findings]

    def to_dict(self) -> Dict[str, Any]:
        ids = [s.suite_id for s in self.suites]
        if len(ids) != len(set(ids)):
            raise ValueError(f"Duplicate suite ids in report: {ids}")
        out = {
            "config": self.config,
            "passed": self.passed,
            "kappa": self.kappa,
            "suites": [s.to_dict(self.include_timing) for s in sorted(self.suites, key=lambda s: s.suite_id)],
        }
        if self.include_timing and self.total_seconds is not None:
            out["total_seconds"] = self.total_seconds
        return out


def _render(obj: Any, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return format(x, ".17g") if math.isfinite(x) else "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        return _render(obj.tolist(), indent, level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{_render(str(k), indent, level + 1)}: {_render(obj[k], indent, level + 1)}" for k in sorted(obj, key=str)]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [f"{pad}{_render(v, indent, level + 1)}" for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"Cannot serialize {type(obj).__name__}")


def dumps(obj: Any, indent: int = 2) -> str:
    """JSON with sorted keys and every float written with 17 significant digits."""
    return _render(obj, indent, 0) + "\n"


def write_atomic(path: str, text: str) -> None:
    """Writes to a temporary sibling and moves it into place."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise
    logging.info(f"Wrote {path}")


def write_json(path: str, obj: Any) -> None:
    write_atomic(path, dumps(obj))

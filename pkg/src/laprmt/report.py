"""Verification reports: named checks with values, bounds and verdicts."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np


@dataclass
class Check:
    name: str
    value: float
    bound: float
    passed: bool
    relation: str = "<="
    acceptance: bool = True

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "value": _clean(self.value),
            "bound": _clean(self.bound),
            "relation": self.relation,
            "passed": bool(self.passed),
            "acceptance": bool(self.acceptance),
        }


@dataclass
class VerificationReport:
    name: str
    checks: list[Check] = field(default_factory=list)
    stats: dict[str, Any] = field(default_factory=dict)
    trials: int = 0
    seed: int | None = None

    def check(self, name: str, value: float, bound: float, relation: str = "<=",
              acceptance: bool = True) -> Check:
        v, b = float(value), float(bound)
        ops = {"<=": v <= b, "<": v < b, ">=": v >= b, ">": v > b}
        if relation not in ops:
            raise ValueError(f"unknown relation {relation!r}")
        c = Check(name, v, b, bool(ops[relation]) and not math.isnan(v), relation, acceptance)
        self.checks.append(c)
        return c

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks if c.acceptance)

    def failures(self) -> list[Check]:
        return [c for c in self.checks if c.acceptance and not c.passed]

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "trials": self.trials,
            "seed": self.seed,
            "checks": [c.to_dict() for c in self.checks],
            "stats": _clean(self.stats),
        }

    def table(self) -> str:
        lines = [f"{self.name}: {'PASS' if self.passed else 'FAIL'}"]
        for c in self.checks:
            flag = "ok " if c.passed else ("BAD" if c.acceptance else "-- ")
            lines.append(f"  [{flag}] {c.name:<44s} {c.value:>12.5g} {c.relation} {c.bound:<12.5g}")
        return "\n".join(lines)


def smallest_passing(values, scale, constants=(1, 2, 5, 10), fraction: float = 1.0):
    """Smallest C such that at least ``fraction`` of values satisfy v <= C*scale."""
    v = np.asarray(values, dtype=float)
    s = np.broadcast_to(np.asarray(scale, dtype=float), v.shape)
    out = {}
    best = None
    for c in constants:
        frac = float(np.mean(v <= c * s)) if v.size else 1.0
        out[str(c)] = frac
        if best is None and frac >= fraction:
            best = c
    return best, out


def _clean(x):
    """Convert numpy scalars and arrays into JSON-friendly values."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return [_clean(v) for v in x.tolist()]
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        f = float(x)
        if math.isnan(f) or math.isinf(f):
            return str(f)
        return f
    if isinstance(x, complex):
        return [x.real, x.imag]
    return x

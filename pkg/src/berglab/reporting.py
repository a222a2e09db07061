"""Shared shapes for verification reports."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

__all__ = ["PropertyCheck", "CheckReport"]


def _scrub(v):
    """Replace non-finite floats with strings so reports stay valid JSON."""
    if isinstance(v, float):
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        if math.isnan(v):
            return "nan"
        return v
    if isinstance(v, dict):
        return {k: _scrub(u) for k, u in v.items()}
    if isinstance(v, (list, tuple)):
        return [_scrub(u) for u in v]
    return v


@dataclass(frozen=True)
class PropertyCheck:
    """One named inequality with its worst signed margin (nonnegative passes)."""

    name: str
    passed: bool
    margin: float
    location: str

    def to_json_dict(self) -> dict:
        return {
            "location": self.location,
            "margin": _scrub(float(self.margin)),
            "name": self.name,
            "pass": bool(self.passed),
        }


@dataclass(frozen=True)
class CheckReport:
    """A group of checks about one subject (a block, a lattice level, ...).

    below_regime marks subjects too shallow for the asymptotic inequalities;
    their failures are informative rather than disqualifying.
    """

    lemma: str
    subject: dict
    checks: tuple[PropertyCheck, ...]
    data: dict = field(default_factory=dict)
    below_regime: bool = False

    @property
    def all_pass(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name: str) -> PropertyCheck:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_json_dict(self) -> dict:
        return {
            "below_regime": bool(self.below_regime),
            "block": _scrub(dict(self.subject)),
            "checks": [c.to_json_dict() for c in self.checks],
            "data": _scrub(dict(self.data)),
            "lemma": self.lemma,
        }

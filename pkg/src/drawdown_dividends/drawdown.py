"""Generalized draw-down functions d(s) and their trailing stops s - d(s).

A ``DrawdownFn`` is piecewise linear: segment i starts at ``breakpoints[i]``
with slope ``slopes[i]``; the last segment extends to +infinity.  The stopping
rule is strict: a path is stopped once X_t < s - d(s) with s the running max.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError, DomainError


@dataclass(frozen=True)
class Violation:
    clause: str
    detail: str

    def to_dict(self) -> dict:
        return {"violation": self.clause, "detail": self.detail}


@dataclass(frozen=True)
class DrawdownFn:
    a: float
    d_a: float
    breakpoints: tuple
    slopes: tuple
    u_max: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "a", float(self.a))
        object.__setattr__(self, "d_a", float(self.d_a))
        object.__setattr__(self, "breakpoints", tuple(float(s) for s in self.breakpoints))
        object.__setattr__(self, "slopes", tuple(float(u) for u in self.slopes))
        object.__setattr__(self, "u_max", float(self.u_max))

    @classmethod
    def constant_slope(cls, a: float, d_a: float, slope: float, u_max: float = 1.0) -> "DrawdownFn":
        return cls(a, d_a, (a,), (slope,), u_max)

    @classmethod
    def from_nodes(cls, s, d, u_max: float = 1.0) -> "DrawdownFn":
        """Interpolate nodes (s_i, d_i); slope after the last node is that of the last segment."""
        s = np.asarray(s, dtype=float)
        d = np.asarray(d, dtype=float)
        slopes = np.diff(d) / np.diff(s)
        return cls(s[0], d[0], tuple(s[:-1]), tuple(slopes), u_max)

    # evaluation

    @property
    def _node_values(self) -> np.ndarray:
        bp = np.asarray(self.breakpoints)
        u = np.asarray(self.slopes)
        inc = np.concatenate([[0.0], np.cumsum(u[:-1] * np.diff(bp))])
        return self.d_a + inc

    def _check(self, s):
        s = np.asarray(s, dtype=float)
        if np.any(s < self.a):
            raise DomainError(f"draw-down function is defined for s >= a = {self.a}")
        return s

    def eval_d(self, s):
        s = self._check(s)
        bp = np.asarray(self.breakpoints)
        i = np.clip(np.searchsorted(bp, s, side="right") - 1, 0, len(bp) - 1)
        out = self._node_values[i] + np.asarray(self.slopes)[i] * (s - bp[i])
        return float(out) if out.ndim == 0 else out

    def eval_dhat(self, s):
        d = self.eval_d(s)
        if np.ndim(s) == 0:
            return float(s) - d
        return np.asarray(s, dtype=float) - d

    def slope_at(self, s):
        s = self._check(s)
        bp = np.asarray(self.breakpoints)
        i = np.clip(np.searchsorted(bp, s, side="right") - 1, 0, len(bp) - 1)
        out = np.asarray(self.slopes)[i]
        return float(out) if np.ndim(out) == 0 else out

    def knots_between(self, lo: float, hi: float) -> np.ndarray:
        """lo, every breakpoint strictly inside (lo, hi), hi."""
        bp = np.asarray(self.breakpoints)
        inner = bp[(bp > lo) & (bp < hi)]
        return np.concatenate([[lo], inner, [hi]])

    def area(self, b: float, lo: Optional[float] = None) -> float:
        """Exact integral of d over [lo, b] (lo defaults to a)."""
        lo = self.a if lo is None else float(lo)
        if b < lo or lo < self.a:
            raise DomainError("area needs a <= lo <= b")
        k = self.knots_between(lo, b)
        dv = self.eval_d(k)
        return float(np.sum(0.5 * (dv[1:] + dv[:-1]) * np.diff(k)))

    def is_stopped(self, running_max: float, x: float) -> bool:
        if x > running_max:
            raise DomainError("current value above running max")
        return bool(x < self.eval_dhat(running_max))

    def validate(self) -> Optional[Violation]:
        return validate(self)

    def to_dict(self) -> dict:
        return {
            "a": self.a,
            "d_a": self.d_a,
            "breakpoints": list(self.breakpoints),
            "slopes": list(self.slopes),
            "u_max": self.u_max,
        }


def validate(dd: DrawdownFn) -> Optional[Violation]:
    """None if ``dd`` is admissible, else the first violated clause."""
    if not 0 < dd.u_max <= 1:
        return Violation("u_max not in (0, 1]", f"u_max = {dd.u_max}")
    if not dd.d_a >= 0:
        return Violation("d(a) negative", f"d_a = {dd.d_a}")
    if len(dd.breakpoints) == 0 or len(dd.breakpoints) != len(dd.slopes):
        return Violation(
            "breakpoints/slopes length mismatch",
            f"{len(dd.breakpoints)} breakpoints, {len(dd.slopes)} slopes",
        )
    if dd.breakpoints[0] != dd.a:
        return Violation("first breakpoint differs from a", f"{dd.breakpoints[0]} != {dd.a}")
    if np.any(np.diff(dd.breakpoints) <= 0):
        return Violation("breakpoints not strictly increasing", str(list(dd.breakpoints)))
    for i, u in enumerate(dd.slopes):
        if u < 0:
            return Violation("d not nondecreasing", f"slope {u} on segment {i}")
        if u > 1:
            return Violation("ĥd not nondecreasing", f"slope {u} on segment {i}")
        if u > dd.u_max:
            return Violation("slope above u_max", f"slope {u} > u_max {dd.u_max} on segment {i}")
    return None


def require_valid(dd: DrawdownFn) -> DrawdownFn:
    v = validate(dd)
    if v is not None:
        raise ConfigError(f"{v.clause}: {v.detail}")
    return dd


@dataclass(frozen=True)
class AffineDrawdown:
    """d(x) = (1 - xi) x + d0, so the trailing stop is xi x - d0.

    xi = 1 is the classic constant draw-down, xi = 0 is ruin at level -d0.
    """

    xi: float
    d0: float

    def __post_init__(self):
        if not 0 <= self.xi <= 1:
            raise ConfigError(f"xi must lie in [0, 1], got {self.xi}")
        if not self.d0 >= 0:
            raise ConfigError(f"d0 must be >= 0, got {self.d0}")

    def d(self, x):
        return (1.0 - self.xi) * np.asarray(x, dtype=float) + self.d0

    def dhat(self, x):
        return self.xi * np.asarray(x, dtype=float) - self.d0

    def to_drawdown(self, a: float = 0.0, u_max: float = 1.0) -> DrawdownFn:
        return DrawdownFn(a, (1.0 - self.xi) * a + self.d0, (a,), (1.0 - self.xi,), u_max)

    def to_dict(self) -> dict:
        return {"kind": "affine", "xi": self.xi, "d0": self.d0}


def drawdown_from_dict(d: dict, a: Optional[float] = None) -> DrawdownFn:
    """Parse either JSON form.  The affine form is anchored at ``a`` (or its own "a", default 0)."""
    d = dict(d)
    if d.get("kind") == "affine":
        extra = set(d) - {"kind", "xi", "d0", "a", "u_max"}
        if extra:
            raise ConfigError(f"unknown drawdown keys {sorted(extra)}")
        start = d.get("a", 0.0 if a is None else a)
        return AffineDrawdown(d["xi"], d["d0"]).to_drawdown(start, d.get("u_max", 1.0))
    extra = set(d) - {"kind", "a", "d_a", "breakpoints", "slopes", "u_max"}
    if extra:
        raise ConfigError(f"unknown drawdown keys {sorted(extra)}")
    try:
        start = float(d["a"])
        bp: Sequence[float] = d.get("breakpoints") or [start]
        return DrawdownFn(start, d["d_a"], tuple(bp), tuple(d["slopes"]), d.get("u_max", 1.0))
    except KeyError as exc:
        raise ConfigError(f"drawdown is missing field {exc}") from None


# functional aliases


def eval_d(dd: DrawdownFn, s):
    return dd.eval_d(s)


def eval_dhat(dd: DrawdownFn, s):
    return dd.eval_dhat(s)


def area(dd: DrawdownFn, b: float) -> float:
    return dd.area(b)


def is_stopped(dd: DrawdownFn, running_max: float, x: float) -> bool:
    return dd.is_stopped(running_max, x)

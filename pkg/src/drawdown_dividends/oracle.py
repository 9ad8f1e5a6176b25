"""Brute-force check of the Pontryagin candidate.

[a, b] is cut into n equal segments and the draw-down slope on each is 0 or
u_max, so a control is an n-bit word (segment 0 first).  Every word is scored
with the Bolza objective J for every b in a grid; area-infeasible words are
dropped.  Since d at the start of segment k only depends on the number of
u_max-bits before k, all 2^n objectives are assembled from O(n^2) segment
integrals per b.
"""
from __future__ import annotations

import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .drawdown import DrawdownFn
from .errors import ConfigError, DomainError
from .models import TransformModel
from .pontryagin import PMPConfig, PMPSolution
from .valuation import lagrangian, lagrangian_segment_integrals, objective_J

MAX_SEGMENTS = 20
GRID_POINTS = 41
GRID_WIDTH = 0.2
QUAD_TOL = 1e-11


class EmptyFeasibleSet(ArithmeticError):
    """Every candidate violates the area budget."""


def centered_grid(b_star: float, a: float = 0.0, width: float = GRID_WIDTH, points: int = GRID_POINTS) -> list:
    """``points`` horizons spanning b* -/+ width of the distance b* - a."""
    span = width * (b_star - a) if b_star > a else width
    lo = max(a, b_star - span)
    return list(np.linspace(lo, b_star + span, points))


@dataclass(frozen=True)
class OracleConfig:
    model: TransformModel
    b_grid: tuple
    a: float = 0.0
    d_a: float = 1.0
    u_max: float = 1.0
    K: Optional[float] = None
    n_segments: int = 12
    tol: float = QUAD_TOL

    def __post_init__(self):
        object.__setattr__(self, "b_grid", tuple(float(b) for b in np.atleast_1d(self.b_grid)))
        if not 1 <= int(self.n_segments) <= MAX_SEGMENTS:
            raise ConfigError(
                f"n_segments = {self.n_segments} outside [1, {MAX_SEGMENTS}]; use coordinate_descent beyond that"
            )
        if len(self.b_grid) == 0:
            raise ConfigError("b_grid is empty")
        if min(self.b_grid) < self.a:
            raise ConfigError("b_grid reaches below a")
        if not 0 < self.u_max <= 1:
            raise ConfigError(f"u_max must lie in (0, 1], got {self.u_max}")
        if not self.d_a > 0:
            raise ConfigError("the objective is infinite when d(a) = 0; the oracle needs d_a > 0")
        if self.K is not None and not self.K > 0:
            raise ConfigError("K must be > 0")

    @classmethod
    def around(cls, pmp_cfg: PMPConfig, b_star: float, n_segments: int = 12, **kw) -> "OracleConfig":
        """Grid centered on b* (+/- 20 %, 41 points) for the problem of ``pmp_cfg``."""
        if pmp_cfg.free_initial:
            raise ConfigError("the oracle needs a fixed d_a")
        grid = centered_grid(b_star, pmp_cfg.a)
        return cls(pmp_cfg.model, tuple(grid), pmp_cfg.a, float(pmp_cfg.d_a), pmp_cfg.u_max, pmp_cfg.K,
                   n_segments, **kw)

    def to_dict(self) -> dict:
        return {
            "a": self.a,
            "d_a": self.d_a,
            "u_max": self.u_max,
            "K": self.K,
            "n_segments": int(self.n_segments),
            "b_grid": list(self.b_grid),
        }


@dataclass
class OracleResult:
    best_control: list
    best_b: float
    best_J: float
    best_value: float
    feasible_count: int
    config: OracleConfig = field(repr=False)
    best_word: int = 0
    winners: int = 1
    heuristic: bool = False
    J_table: Optional[np.ndarray] = field(default=None, repr=False)

    def drawdown(self) -> DrawdownFn:
        return word_drawdown(self.config, self.best_word, self.best_b)

    def to_dict(self) -> dict:
        return {
            "best_control": list(self.best_control),
            "best_b": self.best_b,
            "best_J": self.best_J,
            "best_value": self.best_value,
            "feasible_count": int(self.feasible_count),
            "tied_winners": int(self.winners),
            "heuristic": self.heuristic,
        }

    def to_csv(self) -> str:
        """One row per (control word, b) with its objective; infeasible rows have J = inf."""
        if self.J_table is None:
            raise ConfigError("run enumerate_controls(..., keep_table=True) to dump all candidates")
        n = int(self.config.n_segments)
        buf = io.StringIO()
        buf.write("word,b,J\n")
        # the module-level alias shadows the builtin enumerate
        for ib, b in zip(range(len(self.config.b_grid)), self.config.b_grid):
            for w in range(self.J_table.shape[1]):
                buf.write(f"{_bits(w, n)},{b:.17g},{self.J_table[ib, w]:.17g}\n")
        return buf.getvalue()


def _bits(word: int, n: int) -> str:
    return format(word, f"0{n}b")


def word_slopes(word: int, n: int, u_max: float) -> list:
    """Segment slopes of ``word``; the most significant bit is segment 0."""
    return [u_max if (word >> (n - 1 - k)) & 1 else 0.0 for k in range(n)]


def word_drawdown(cfg: OracleConfig, word: int, b: float) -> DrawdownFn:
    n = int(cfg.n_segments)
    slopes = word_slopes(word, n, cfg.u_max)
    if b <= cfg.a:
        return DrawdownFn(cfg.a, cfg.d_a, (cfg.a,), (slopes[0],), cfg.u_max)
    bp = cfg.a + (b - cfg.a) * np.arange(n) / n
    return DrawdownFn(cfg.a, cfg.d_a, tuple(bp), tuple(slopes), cfg.u_max)


def _score_horizon(cfg: OracleConfig, b: float, words: np.ndarray, bits: np.ndarray):
    """J and area of every word for one horizon b."""
    tm, a, d_a, u, n = cfg.model, cfg.a, cfg.d_a, cfg.u_max, int(cfg.n_segments)
    init = float(np.log(tm.nu2(a, a - d_a)))
    if b <= a:
        return np.full(len(words), init), np.zeros(len(words))
    h = (b - a) / n
    # segment k, m earlier u-bits, bit c: one integral each
    ks, ms, cs = [], [], []
    for k in range(n):
        for m in range(k + 1):
            for c in (0, 1):
                ks.append(k)
                ms.append(m)
                cs.append(c)
    ks, ms, cs = np.array(ks), np.array(ms), np.array(cs)
    t0 = a + ks * h
    seg = lagrangian_segment_integrals(tm, t0, t0 + h, d_a + u * h * ms, u * cs, cfg.tol / n)
    table = np.full((n, n + 1, 2), np.nan)
    table[ks, ms, cs] = seg
    J = np.full(len(words), init)
    area = np.zeros(len(words))
    m = np.zeros(len(words), dtype=np.int64)
    for k in range(n):
        c = bits[:, k]
        J += table[k, m, c]
        area += h * (d_a + u * h * m) + 0.5 * u * h * h * c
        m += c
    return J, area


def enumerate_controls(cfg: OracleConfig, keep_table: bool = False, threads: Optional[int] = None) -> OracleResult:
    """Exhaustive minimum of J over {0, u_max}^n x b_grid.

    Ties in J are broken by the lexicographically smallest word, then by the
    smaller horizon.
    """
    n = int(cfg.n_segments)
    words = np.arange(2**n, dtype=np.int64)
    bits = ((words[:, None] >> (n - 1 - np.arange(n))[None, :]) & 1).astype(np.int64)

    def one(b):
        return _score_horizon(cfg, b, words, bits)

    if threads is not None and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            scored = list(ex.map(one, cfg.b_grid))
    else:
        scored = [one(b) for b in cfg.b_grid]
    J = np.stack([s[0] for s in scored])
    if cfg.K is not None:
        area = np.stack([s[1] for s in scored])
        # a relative slack of 1e-12 keeps exactly saturated words feasible
        J = np.where(area <= cfg.K * (1 + 1e-12), J, np.inf)
    feasible = int(np.isfinite(J).sum())
    if feasible == 0:
        raise EmptyFeasibleSet(f"all {J.size} candidates violate the area budget K = {cfg.K}")
    best = J.min()
    # word-major scan: smallest word first, then smallest b
    hits = np.argwhere((J == best).T)
    w, ib = int(hits[0, 0]), int(hits[0, 1])
    return OracleResult(
        best_control=word_slopes(w, n, cfg.u_max),
        best_b=cfg.b_grid[ib],
        best_J=float(best),
        best_value=float(np.exp(-best)),
        feasible_count=feasible,
        config=cfg,
        best_word=w,
        winners=len(hits),
        J_table=J if keep_table else None,
    )


# the short public name shadows a builtin, so keep both
enumerate = enumerate_controls  # noqa: A001


def coordinate_descent(cfg: OracleConfig, n_segments: int, start: Optional[Sequence[int]] = None,
                       max_sweeps: int = 50) -> OracleResult:
    """Heuristic for n_segments beyond the enumeration cap: single-bit flips until no flip improves J."""
    n = int(n_segments)
    bits = np.ones(n, dtype=np.int64) if start is None else np.asarray(start, dtype=np.int64).copy()

    def word_of(bb):
        return int("".join(map(str, bb)), 2)

    def score(bb):
        best = (np.inf, None)
        for b in cfg.b_grid:
            dd = DrawdownFn(cfg.a, cfg.d_a, tuple(cfg.a + (b - cfg.a) * np.arange(n) / n) if b > cfg.a else (cfg.a,),
                            tuple(cfg.u_max * bb) if b > cfg.a else (cfg.u_max * bb[0],), cfg.u_max)
            if cfg.K is not None and dd.area(b) > cfg.K * (1 + 1e-12):
                continue
            try:
                j = objective_J(cfg.model, dd, cfg.a, b, cfg.tol)
            except (ArithmeticError, DomainError):
                continue
            if j < best[0]:
                best = (j, b)
        return best

    cur = score(bits)
    for _ in range(max_sweeps):
        improved = False
        for k in range(n):
            trial = bits.copy()
            trial[k] ^= 1
            s = score(trial)
            if s[0] < cur[0]:
                bits, cur, improved = trial, s, True
        if not improved:
            break
    if not np.isfinite(cur[0]):
        raise EmptyFeasibleSet("no feasible candidate reached by coordinate descent")
    return OracleResult(
        best_control=[cfg.u_max * float(v) for v in bits],
        best_b=float(cur[1]),
        best_J=float(cur[0]),
        best_value=float(np.exp(-cur[0])),
        feasible_count=0,
        config=OracleConfig(cfg.model, cfg.b_grid, cfg.a, cfg.d_a, cfg.u_max, cfg.K, min(n, MAX_SEGMENTS), cfg.tol),
        best_word=word_of(bits),
        heuristic=True,
    )


@dataclass
class Comparison:
    J_pmp: float
    J_oracle: float
    gap: float
    slack: float
    passed: bool
    oracle_beats_pmp: bool
    lipschitz: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def discretization_slack(cfg: OracleConfig, b: float, n_grid: int = 64) -> tuple[float, float]:
    """(slack, Lipschitz constant): Lip * u_max * h * (b - a) with Lip = max |dL/dd| over the reachable set."""
    if b <= cfg.a:
        return 0.0, 0.0
    tm, a, u = cfg.model, cfg.a, cfg.u_max
    t = np.linspace(a, b, n_grid)
    frac = np.linspace(0.0, 1.0, 17)
    T = np.repeat(t, len(frac))
    D = cfg.d_a + np.outer(u * (t - a), frac).ravel()
    eps = 1e-6 * np.maximum(D, 1e-3)
    lips = 0.0
    for c in (0.0, u):
        Lp = lagrangian(tm, T, D + eps, c)
        Lm = lagrangian(tm, T, np.maximum(D - eps, 0.5 * D), c)
        lips = max(lips, float(np.max(np.abs(Lp - Lm) / (D + eps - np.maximum(D - eps, 0.5 * D)))))
    h = (b - a) / int(cfg.n_segments)
    return lips * u * h * (b - a), lips


def compare_with_pmp(oracle: OracleResult, pmp: PMPSolution, pmp_cfg: Optional[PMPConfig] = None) -> Comparison:
    """gap = J_pmp - J_oracle; passes iff J_pmp <= J_oracle + slack."""
    cfg = oracle.config
    dd = pmp.dd
    if dd.a != cfg.a or abs(dd.d_a - cfg.d_a) > 1e-12 or dd.u_max != cfg.u_max:
        raise ConfigError("oracle and Pontryagin solution describe different problems")
    if pmp_cfg is not None and (pmp_cfg.model != cfg.model or pmp_cfg.K != cfg.K):
        raise ConfigError("oracle and Pontryagin configs differ in model or area budget")
    slack, lip = discretization_slack(cfg, max(oracle.best_b, pmp.b_star))
    slack += 10 * cfg.tol
    gap = pmp.J - oracle.best_J
    return Comparison(pmp.J, oracle.best_J, gap, slack, bool(gap <= slack), bool(gap > slack), lip)


__all__ = [
    "OracleConfig",
    "OracleResult",
    "Comparison",
    "EmptyFeasibleSet",
    "centered_grid",
    "enumerate_controls",
    "coordinate_descent",
    "compare_with_pmp",
    "discretization_slack",
    "word_drawdown",
    "word_slopes",
]

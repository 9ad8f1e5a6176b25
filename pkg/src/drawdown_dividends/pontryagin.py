"""Pontryagin conditions for the optimal draw-down function and dividend barrier.

State d(t) (allowed regret when the running max is t), control u = d' in
[0, u_max], optional area budget int_a^b d <= K handled by a constant
multiplier r >= 0.  With L the running cost of ``valuation.lagrangian``:

    H+(t, d, u, p, r) = L(t, d, u) + p u + r d
    p' = -dH+/dd,     p(b*) = 0,     H+(b*) = 0.

The control coefficient p - d2nu/nu is the switching function: positive on
slope-0 arcs, non-positive on slope-u_max arcs, zero on structure arcs where
d2nu(t, t - d) = r.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .drawdown import DrawdownFn
from .errors import ConfigError, DomainError, NoBracketError
from .models import LogAffine, TransformModel
from .valuation import lagrangian, objective_J

SLOPE0, STRUCTURE, SLOPEU = "slope0", "structure", "slopeU"
XTOL = 1e-14
PENALTY = 1e6


@dataclass(frozen=True)
class PMPConfig:
    model: TransformModel
    a: float = 0.0
    d_a: Optional[float] = None
    d_a_max: Optional[float] = None
    K: Optional[float] = None
    u_max: float = 1.0

    def __post_init__(self):
        if not 0 < self.u_max <= 1:
            raise ConfigError(f"u_max must lie in (0, 1], got {self.u_max}")
        if self.K is not None and not self.K > 0:
            raise ConfigError(f"area budget K must be > 0, got {self.K}")
        if self.d_a is None and self.d_a_max is None:
            raise ConfigError("give either a fixed d_a or a bound d_a_max")
        if self.d_a is not None:
            if self.d_a < 0:
                raise ConfigError(f"d_a must be >= 0, got {self.d_a}")
            if self.d_a_max is not None and self.d_a > self.d_a_max:
                raise ConfigError("d_a exceeds d_a_max")
        if self.d_a_max is not None and self.d_a_max < 0:
            raise ConfigError("d_a_max must be >= 0")

    @property
    def free_initial(self) -> bool:
        return self.d_a is None


@dataclass
class Costate:
    t: np.ndarray
    d: np.ndarray
    u: np.ndarray
    p: np.ndarray
    switching: np.ndarray

    def to_csv(self) -> str:
        rows = ["t,d,u,p,switching_value"]
        for row in zip(self.t, self.d, self.u, self.p, self.switching):
            rows.append(",".join(f"{v:.17g}" for v in row))
        return "\n".join(rows) + "\n"


@dataclass
class PMPSolution:
    dd: DrawdownFn
    b_star: float
    r: float
    costate: Optional[Costate]
    regimes: list
    hamiltonian_residual: float
    J: float
    value: float
    distribute_immediately: bool = False
    area_binding: bool = False
    b_unconstrained: Optional[float] = None
    b_plus: Optional[float] = None
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "drawdown": self.dd.to_dict(),
            "b_star": self.b_star,
            "r": self.r,
            "regimes": list(self.regimes),
            "J": self.J,
            "value": self.value,
            "distribute_immediately": self.distribute_immediately,
            "area_binding": self.area_binding,
            "b_unconstrained": self.b_unconstrained,
            "b_plus": self.b_plus,
            "residuals": {"hamiltonian_at_b": self.hamiltonian_residual},
            "notes": list(self.notes),
        }


# pointwise objects


def _at(tm, t, d):
    t = np.asarray(t, dtype=float)
    return tm.partials(t, t - np.asarray(d, dtype=float))


def switching_function(tm: TransformModel, t, d, p):
    pt = _at(tm, t, d)
    return np.asarray(p, dtype=float) - pt.d2 / pt.nu


def hamiltonian(tm: TransformModel, t, d, u, p, r=0.0):
    """H+ = L(t, d, u) + p u + r d."""
    return lagrangian(tm, t, d, u) + np.asarray(p) * np.asarray(u) + r * np.asarray(d)


def costate_rhs(tm: TransformModel, t, d, u, p=None, r=0.0):
    """p' = d2 G + ((d2 nu)^2 - d22 nu * nu) / nu^2 * u - r with G = nu + (d1 nu + d2 nu) / nu.

    The right-hand side does not depend on p; ``p`` is accepted for a uniform
    ODE signature.
    """
    n, d1, d2, d12, d22 = _at(tm, t, d)
    dG = d2 + ((d12 + d22) * n - (d1 + d2) * d2) / n**2
    return dG + (d2**2 - d22 * n) / n**2 * np.asarray(u) - r


# structure equation


def _delta_to_d(tm: TransformModel, t: float, delta):
    tr = tm.transform
    return t - tr.Finv(tr.F(t) - np.asarray(delta, dtype=float))


def _log_d2nu_of_delta(tm: TransformModel, t: float, delta):
    """log d2nu(t, y) with F(t) - F(y) = delta; finite for every delta > 0."""
    tr, pair = tm.transform, tm.base._pair
    delta = np.asarray(delta, dtype=float)
    y = tr.Finv(tr.F(t) - delta)
    e, dd = pair._ed(delta)
    with np.errstate(divide="ignore"):
        log_m1 = 2 * np.log(pair.s) - pair.s * delta - 2 * np.log(dd)
        return np.log(tr.dF(t)) + np.log(tr.dF(y)) + log_m1


def _scan_brackets(h, grid):
    vals = h(grid)
    out = []
    for i in range(len(grid) - 1):
        if np.isfinite(vals[i]) and np.isfinite(vals[i + 1]) and vals[i] * vals[i + 1] < 0:
            out.append((grid[i], grid[i + 1]))
        elif vals[i] == 0:
            out.append((grid[i], grid[i]))
    return out


def structure_roots(tm: TransformModel, t: float, r: float, n_scan: int = 400) -> list:
    """All Delta = F(t) - F(y) > 0 on a log mesh solving d2nu(t, y) = r."""
    if r < 0:
        raise DomainError("multiplier r must be >= 0")
    if r == 0:
        return []
    if not tm.transform.in_domain(t):
        raise DomainError(f"t = {t} outside the transform domain")
    s = tm.base._pair.s
    grid = np.geomspace(1e-10 / s, 200.0 / s, n_scan)
    lr = np.log(r)

    def h(x):
        return _log_d2nu_of_delta(tm, t, x) - lr

    roots = []
    for lo, hi in _scan_brackets(h, grid):
        roots.append(lo if lo == hi else brentq(lambda x: float(h(x)), lo, hi, xtol=1e-15, rtol=1e-15))
    return roots


def structure_solve(tm: TransformModel, t: float, r: float) -> Optional[float]:
    """Regret d > 0 with d2nu(t, t - d) = r, or None when no sign change exists.

    For drifted Brownian motion this is nu'(d) = -r.  Multiple roots on the scan
    mesh trigger a warning and the smallest is returned.
    """
    roots = structure_roots(tm, t, r)
    if not roots:
        return None
    if len(roots) > 1:
        warnings.warn(f"structure equation has {len(roots)} roots at t = {t}", RuntimeWarning)
    return float(_delta_to_d(tm, t, roots[0]))


@dataclass(frozen=True)
class GBMStructureSolution:
    delta: float
    d_opt: float
    residual: float
    roots: tuple
    multiple: bool
    certificate: str


def strucexp_sides(tm: TransformModel, x: float, r: float, delta: float) -> tuple[float, float]:
    """Both sides of the exponential form of the GBM structure equation."""
    tr = tm.transform
    al, be, ep = tr.alpha, tr.beta, tr.eps
    rp, rm = tm.roots
    c = 1.0 - 2.0 / (ep**2 * al)
    lhs = rp * np.exp(rp * delta) - rm * np.exp(rm * delta)
    root = np.sqrt(c**2 + 8.0 * tm.q / (ep**2 * al**2) + 4.0 * r * (x + be / al) ** 2 * np.exp(-delta))
    rhs = 0.5 * (c + root) * (np.exp(rp * delta) - np.exp(rm * delta))
    return float(lhs), float(rhs)


def monotonicity_certificate(tm: TransformModel) -> str:
    if tm.transform.convex:
        return "applicable: F convex, the structure equation has exactly one root per position"
    return "inapplicable: F is concave, uniqueness is not guaranteed"


def gbm_structure_solve(tm: TransformModel, x: float, r: float) -> Optional[GBMStructureSolution]:
    if not isinstance(tm.transform, LogAffine):
        raise ConfigError("gbm_structure_solve needs a log-affine model")
    if not r > 0:
        return None
    roots = structure_roots(tm, x, r)
    if not roots:
        return None
    tr = tm.transform
    delta = roots[0]
    lhs, rhs = strucexp_sides(tm, x, r, delta)
    return GBMStructureSolution(
        delta=float(delta),
        d_opt=float((x + tr.beta / tr.alpha) * -np.expm1(-delta)),
        residual=abs(lhs - rhs),
        roots=tuple(float(v) for v in roots),
        multiple=len(roots) > 1,
        certificate=monotonicity_certificate(tm),
    )


# Levy case


def levy_optimality(tm: TransformModel, z, u_max: float):
    """dJ/db in terms of z = d(b): nu + u nu'/nu = (1 - u) nu + u W''/W'."""
    m = tm.base
    z = np.asarray(z, dtype=float)
    out = u_max * m.w2_over_w1(z)
    if u_max < 1:
        out = out + (1.0 - u_max) * m.nu(z)
    return out


def _levy_J(tm, d_a, u, b_len):
    """-log V(a) for slope-u regret from d_a over a horizon of length b_len."""
    m = tm.base
    if d_a <= 0:
        return np.inf
    db = d_a + u * b_len
    integ = (m.log_scale_w(db) - m.log_scale_w(d_a)) / u
    return float(integ + np.log(m.nu(db)))


def _levy_best_horizon(tm, d_a, u, n_scan=2000):
    """Horizon length minimizing J for the slope-u profile, and whether it is 0.

    Local minima of J sit where the optimality function crosses from - to +.
    With d_a = 0 the value is 0 for every horizon and the first smooth-fit root
    is returned.
    """
    span = 50.0 / tm.base.phi_q
    z_grid = d_a + u * np.geomspace(1e-9, span, n_scan)

    def g(z):
        return levy_optimality(tm, z, u)

    g_end = float(g(z_grid[-1]))
    if g_end < 0:
        raise NoBracketError(
            "optimality function negative on the whole bracket",
            {"g_at_bracket_end": g_end, "z_end": float(z_grid[-1])},
        )
    minima = []
    for lo, hi in _scan_brackets(g, z_grid):
        if lo == hi:
            minima.append((lo - d_a) / u)
        elif g(lo) < 0:
            minima.append((brentq(lambda z: float(g(z)), lo, hi, xtol=XTOL, rtol=1e-15) - d_a) / u)
    if d_a <= 0:
        return (minima[0], False) if minima else (0.0, True)
    L = min([0.0] + minima, key=lambda v: _levy_J(tm, d_a, u, v))
    return L, L == 0.0


def levy_optimal(cfg: PMPConfig, n_mesh: int = 4096) -> PMPSolution:
    """Slope-u_max draw-down from d(a); barrier from the smooth-fit condition, capped by the area budget."""
    tm = cfg.model
    if not tm.is_levy:
        raise ConfigError("levy_optimal needs the identity transform")
    u = cfg.u_max
    if cfg.free_initial:
        cands = [0.0, float(cfg.d_a_max)]
        if cfg.K is not None and cfg.d_a_max > 0:
            res = minimize_scalar(
                lambda v: _levy_constrained(tm, cfg, v)[2], bounds=(0.0, cfg.d_a_max), method="bounded",
                options={"xatol": 1e-10},
            )
            cands.append(float(res.x))
        best = min(cands, key=lambda v: _levy_constrained(tm, cfg, v)[2])
        d_a = best
    else:
        d_a = float(cfg.d_a)
    L, b_free, J, b_plus = _levy_constrained(tm, cfg, d_a)
    a = cfg.a
    b = a + L
    d_b = d_a + u * L
    binding = b_plus is not None and L < b_free - 1e-15 and b_plus <= b_free
    r = 0.0
    if binding and d_b > 0:
        r = max(0.0, -float(levy_optimality(tm, d_b, u)) / d_b)
    dd = DrawdownFn.constant_slope(a, d_a, u, u)
    costate = None
    h_res = 0.0
    if L > 0:
        t = np.linspace(a, b, n_mesh + 1)
        d = d_a + u * (t - a)
        with np.errstate(divide="ignore", invalid="ignore"):
            pos = d > 0
            g = np.full_like(t, np.inf)
            g[pos] = levy_optimality(tm, d[pos], u)
            p = -(g + r * d) / u
            sw = np.where(d > 0, -(tm.base.nu(np.maximum(d, 1e-300)) + r * d) / u, -np.inf)
        costate = Costate(t, d, np.full_like(t, u), p, sw)
        h_res = abs(float(levy_optimality(tm, d_b, u)) + r * d_b)
    value = float(np.exp(-J)) if np.isfinite(J) else 0.0
    notes = []
    if cfg.K is not None and not binding:
        notes.append("area budget not binding")
    return PMPSolution(
        dd=dd,
        b_star=b,
        r=r,
        costate=costate,
        regimes=[SLOPEU],
        hamiltonian_residual=h_res,
        J=J,
        value=value,
        distribute_immediately=L == 0.0,
        area_binding=binding,
        b_unconstrained=a + b_free,
        b_plus=None if b_plus is None else a + b_plus,
        notes=notes,
    )


def area_horizon(d_a: float, K: float, u: float) -> float:
    """Length L >= 0 with d_a L + u L^2 / 2 = K."""
    return 2.0 * K / (d_a + np.sqrt(d_a * d_a + 2.0 * u * K))


def _levy_constrained(tm, cfg, d_a):
    u = cfg.u_max
    L_free, _ = _levy_best_horizon(tm, d_a, u)
    if cfg.K is None:
        return L_free, L_free, _levy_J(tm, d_a, u, L_free), None
    L_plus = area_horizon(d_a, cfg.K, u)
    if L_free <= L_plus:
        return L_free, L_free, _levy_J(tm, d_a, u, L_free), L_plus
    # J on [0, L_plus]: compare the endpoint with interior local minima
    cands = [0.0, L_plus]
    if d_a > 0:
        grid = d_a + u * np.linspace(0, L_plus, 400)
        for lo, hi in _scan_brackets(lambda z: levy_optimality(tm, z, u), grid):
            if levy_optimality(tm, lo, u) < 0:
                z = brentq(lambda z: float(levy_optimality(tm, z, u)), lo, hi, xtol=XTOL)
                cands.append((z - d_a) / u)
        L = min(cands, key=lambda v: _levy_J(tm, d_a, u, v))
    else:
        L = L_plus
    return L, L_free, _levy_J(tm, d_a, u, L), L_plus


def xiopt_check(tm: TransformModel, b_star: float, u_max: float, a: float = 0.0, d_a: float = 0.0) -> float:
    """W'' W / W'^2 at d(b*) minus -xi / (1 - xi) with xi = 1 - u_max."""
    z = d_a + u_max * (b_star - a)
    xi = 1.0 - u_max
    return float(tm.base.w2w_over_w1sq(z) + xi / (1.0 - xi))


# verification


@dataclass
class PMPReport:
    passed: bool
    tol: float
    hamiltonian_at_b: float
    costate_at_b: float
    hamiltonian_deviation: Optional[float]
    switching_ok: list
    switching_margin: list
    initial_transversality: Optional[float]
    hamiltonian_at_b_negated_r: float
    costate: Costate
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "tol": self.tol,
            "hamiltonian_at_b": self.hamiltonian_at_b,
            "costate_at_b": self.costate_at_b,
            "hamiltonian_deviation": self.hamiltonian_deviation,
            "switching_ok": self.switching_ok,
            "switching_margin": self.switching_margin,
            "initial_transversality": self.initial_transversality,
            "hamiltonian_at_b_negated_r": self.hamiltonian_at_b_negated_r,
            "notes": self.notes,
        }


def _regime_of(u: float, u_max: float, tol: float = 1e-12) -> str:
    if u <= tol:
        return SLOPE0
    if u >= u_max - tol:
        return SLOPEU
    return STRUCTURE


def _mesh(dd: DrawdownFn, lo: float, hi: float, n_steps: int, origin: Optional[float] = None):
    """Uniform-ish mesh on [lo, hi] that contains every breakpoint.

    With ``origin`` < lo the first piece is geometric in the distance to
    ``origin``, which resolves a singularity sitting there.
    """
    k = dd.knots_between(lo, hi)
    pieces = []
    for i, (s0, s1) in enumerate(zip(k[:-1], k[1:])):
        n = max(2, int(np.ceil(n_steps * (s1 - s0) / (hi - lo))))
        if i == 0 and origin is not None and origin < s0:
            pieces.append((origin + np.geomspace(s0 - origin, s1 - origin, n + 1))[:-1])
        else:
            pieces.append(np.linspace(s0, s1, n + 1)[:-1])
    pieces.append([hi])
    return np.concatenate(pieces)


def integrate_costate(tm: TransformModel, dd: DrawdownFn, lo: float, hi: float, r: float,
                      p_end: float = 0.0, n_steps: int = 4096, origin: Optional[float] = None):
    """Classic RK4 backward from p(hi) = p_end; returns mesh, p and per-step slopes."""
    t = _mesh(dd, lo, hi, n_steps, origin)
    mid = 0.5 * (t[:-1] + t[1:])
    u_step = np.asarray(dd.slope_at(mid), dtype=float)
    # p does not enter the right-hand side, so k3 == k2 and every stage can be
    # evaluated up front; stages use the step's own slope, also at its ends
    k_right = costate_rhs(tm, t[1:], dd.eval_d(t[1:]), u_step, None, r)
    k_mid = costate_rhs(tm, mid, dd.eval_d(mid), u_step, None, r)
    k_left = costate_rhs(tm, t[:-1], dd.eval_d(t[:-1]), u_step, None, r)
    incr = np.diff(t) / 6 * (k_right + 4 * k_mid + k_left)
    p = np.empty_like(t)
    p[-1] = p_end
    p[:-1] = p_end - np.cumsum(incr[::-1])[::-1]
    return t, p, u_step


def verify_pmp(tm: TransformModel, sol: PMPSolution, cfg: Optional[PMPConfig] = None,
               tol: float = 1e-6, n_steps: int = 4096) -> PMPReport:
    dd, b, r = sol.dd, sol.b_star, sol.r
    a = dd.a
    notes = []
    u_max = dd.u_max if cfg is None else cfg.u_max
    lo = a
    if dd.eval_d(a) <= 0:
        # d(a) = 0 is singular; start where the regret is positive
        lo = a + 1e-6 * max(b - a, 1e-12)
        notes.append(f"d(a) = 0: trajectory checked from {lo}")
    if b - lo <= 0:
        d_b = dd.eval_d(b)
        ok = True
        if d_b > 0:
            ok = bool(lagrangian(tm, b, d_b, dd.slope_at(b)) >= -tol)
        notes.append("distribute immediately: checked that J increases at b = a")
        empty = Costate(*(np.array([b]) for _ in range(5)))
        return PMPReport(ok, tol, 0.0, 0.0, None, [ok], [0.0], None, 0.0, empty, notes)

    t, p, u_step = integrate_costate(tm, dd, lo, b, r, 0.0, n_steps, origin=a if lo > a else None)
    d = dd.eval_d(t)
    u_node = np.concatenate([u_step, u_step[-1:]])
    H = hamiltonian(tm, t, d, u_node, p, r)
    # left limit at the right end of each step for nodes sitting on a kink
    H_left = hamiltonian(tm, t[1:], d[1:], u_step, p[1:], r)
    sw = switching_function(tm, t, d, p)
    H_b = float(H_left[-1])
    H_b_neg = float(hamiltonian(tm, b, d[-1], u_step[-1], p[-1], -r))
    deviation = None
    if tm.is_levy:
        # relative to the size of p u, which grows like 1/d near a singular start
        scale = 1.0 + np.abs(p) * u_max
        deviation = float(max(np.max(np.abs(H - H_b) / scale), np.max(np.abs(H_left - H_b) / scale[1:])))

    sw_ok, margins = [], []
    k = dd.knots_between(lo, b)
    for s0, s1 in zip(k[:-1], k[1:]):
        inside = (t >= s0) & (t <= s1)
        regime = _regime_of(float(dd.slope_at(0.5 * (s0 + s1))), u_max)
        v = sw[inside]
        if regime == SLOPE0:
            margin = float(np.min(v))
            ok = margin > -tol
        elif regime == SLOPEU:
            margin = float(-np.max(v))
            ok = margin >= -tol
        else:
            margin = float(-np.max(np.abs(v)))
            ok = -margin <= max(tol, 1e-6 * float(np.max(np.abs(p))))
        sw_ok.append(bool(ok))
        margins.append(margin)

    init_res = None
    if cfg is not None and cfg.free_initial and 0 < dd.d_a < (cfg.d_a_max or 0):
        init_res = abs(float(p[0] - (-switching_function(tm, a, dd.d_a, 0.0))))
    passed = abs(H_b) < tol and abs(p[-1]) < tol and all(sw_ok)
    if deviation is not None:
        passed = passed and deviation < tol
    if init_res is not None:
        passed = passed and init_res < tol
    cs = Costate(t, d, u_node, p, sw)
    return PMPReport(bool(passed), tol, abs(H_b), abs(float(p[-1])), deviation, sw_ok, margins, init_res,
                     abs(H_b_neg), cs, notes)


# general models


def _affine_J(tm, a, d_a, u, b):
    return objective_J(tm, DrawdownFn.constant_slope(a, d_a, u, u), a, b)


def _general_best_horizon(tm, a, d_a, u, b_hi, n_scan=400):
    """Argmin over b in [a, b_hi] of J for the slope-u profile; roots of L(b) = 0 are candidates."""
    def lag(b):
        return lagrangian(tm, b, d_a + u * (b - a), u)

    grid = a + np.concatenate([[0.0], np.geomspace(1e-9, b_hi - a, n_scan)])
    cands = [a, b_hi]
    for lo, hi in _scan_brackets(lag, grid):
        if lo == hi or lag(lo) < 0:
            cands.append(lo if lo == hi else brentq(lambda s: float(lag(s)), lo, hi, xtol=XTOL))
    Js = [_affine_J(tm, a, d_a, u, c) for c in cands]
    i = int(np.argmin(Js))
    return cands[i], Js[i]


def synthesize(cfg: PMPConfig, b_span: Optional[float] = None, n_mesh: int = 2048) -> PMPSolution:
    """Candidate optimum for a general transform model, assembled from the three regimes.

    Without an area budget the structure equation has r = 0 and no root, so the
    candidate is the slope-u_max profile with the barrier at the best root of
    L(b) = 0.  With a binding budget two families are compared: the bang profile
    cut at the area horizon, and bang -> structure arc -> bang profiles with the
    multiplier r found by bisection on the area.  The result is a candidate to
    be checked with ``verify_pmp`` and the oracle; it carries no global
    optimality claim.
    """
    tm = cfg.model
    if tm.is_levy:
        return levy_optimal(cfg)
    if cfg.free_initial:
        raise ConfigError("free initial datum is only supported for the Levy model")
    a, d_a, u = cfg.a, float(cfg.d_a), cfg.u_max
    if d_a <= 0:
        raise DomainError("general synthesis needs d(a) > 0")
    if not tm.transform.in_domain(a - d_a):
        raise DomainError(f"trailing stop a - d(a) = {a - d_a} outside the transform domain")
    if b_span is None:
        b_span = 50.0 / tm.base.phi_q
    b_free, J_free = _general_best_horizon(tm, a, d_a, u, a + b_span)
    dd = DrawdownFn.constant_slope(a, d_a, u, u)
    notes = []
    if b_free >= a + b_span * (1 - 1e-12):
        notes.append("no interior optimum: J still decreases at the search cap a + b_span")
    if cfg.K is None or dd.area(b_free) <= cfg.K:
        if cfg.K is not None:
            notes.append("area budget not binding")
        return _finish(tm, dd, b_free, 0.0, J_free, [SLOPEU], notes, b_free=b_free, n_mesh=n_mesh)

    L_plus = area_horizon(d_a, cfg.K, u)
    b_plus = a + L_plus
    b_bang, J_bang = _general_best_horizon(tm, a, d_a, u, b_plus)
    best = (J_bang, dd, b_bang, [SLOPEU])
    r_bang = 0.0
    if abs(b_bang - b_plus) < 1e-12:
        r_bang = max(0.0, -float(lagrangian(tm, b_plus, d_a + u * L_plus, u)) / (d_a + u * L_plus))

    structured = _structured_candidate(tm, cfg, b_plus + b_span)
    r = r_bang
    if structured is not None and structured[0] < best[0]:
        best = structured[:4]
        r = structured[4]
        notes.append("structure-arc candidate beats the bang profile")
    J, dd_best, b_best, regimes = best
    return _finish(tm, dd_best, b_best, r, J, regimes, notes, b_free=b_free, b_plus=b_plus,
                   binding=True, n_mesh=n_mesh)


def _finish(tm, dd, b, r, J, regimes, notes, b_free=None, b_plus=None, binding=False, n_mesh=2048):
    if b > dd.a:
        t, p, u_step = integrate_costate(tm, dd, dd.a, b, r, 0.0, n_mesh)
        d = dd.eval_d(t)
        u_node = np.concatenate([u_step, u_step[-1:]])
        cs = Costate(t, d, u_node, p, switching_function(tm, t, d, p))
        h = abs(float(hamiltonian(tm, b, d[-1], u_step[-1], 0.0, r)))
    else:
        cs, h = None, 0.0
    return PMPSolution(dd=dd, b_star=b, r=r, costate=cs, regimes=regimes, hamiltonian_residual=h, J=J,
                       value=float(np.exp(-J)), distribute_immediately=b <= dd.a, area_binding=binding,
                       b_unconstrained=b_free, b_plus=b_plus, notes=notes)


def _structure_curve(tm, r, ts):
    out = np.empty(len(ts))
    for i, t in enumerate(ts):
        v = structure_solve(tm, t, r)
        if v is None:
            return None
        out[i] = v
    return out


def _structure_profile(cfg, ts, ds, t_exit, b_cap):
    """Bang to the structure curve (ts, ds), follow it up to ``t_exit``, then slope u_max until the area is spent.

    Returns (DrawdownFn, b, regimes) or None when the budget is exhausted early.
    """
    a, d_a, u, K = cfg.a, float(cfg.d_a), cfg.u_max, cfg.K
    grid = np.concatenate([ts[ts < t_exit], [t_exit]])
    curve = np.interp(grid, ts, ds)
    nodes_t, nodes_d, regimes = [a], [d_a], []
    cur_t, cur_d = a, d_a
    joined = False
    for t, target in zip(grid[1:], curve[1:]):
        if t <= cur_t:
            continue
        if not joined:
            slope = u if cur_d < target else 0.0
            nd = cur_d + slope * (t - cur_t)
            if (slope > 0 and nd >= target) or (slope == 0 and nd <= target):
                nd, joined = target, True
            reg = SLOPEU if slope > 0 else SLOPE0
        else:
            slope = float(np.clip((target - cur_d) / (t - cur_t), 0.0, u))
            nd = cur_d + slope * (t - cur_t)
            reg = STRUCTURE
        nodes_t.append(t)
        nodes_d.append(nd)
        if not regimes or regimes[-1] != reg:
            regimes.append(reg)
        cur_t, cur_d = t, nd
    used = DrawdownFn.from_nodes(nodes_t, nodes_d, u).area(cur_t) if len(nodes_t) > 1 else 0.0
    rest = K - used
    if rest <= 0:
        return None
    L = area_horizon(cur_d, rest, u)
    b = min(cur_t + L, b_cap)
    nodes_t.append(cur_t + L)
    nodes_d.append(cur_d + u * L)
    regimes.append(SLOPEU)
    return DrawdownFn.from_nodes(nodes_t, nodes_d, u), b, regimes


def _structured_candidate(tm, cfg, b_cap, n_curve=120, max_iter=30):
    """Best bang/structure/bang profile.

    For a multiplier r the exit time from the structure arc is chosen by a
    bounded search on J; r itself is bisected (geometrically) on the sign of
    H+(b) = L(b) + r d(b), the free-horizon condition with p(b) = 0.
    """
    a = cfg.a
    t_hi = a + cfg.K / max(float(cfg.d_a), 1e-12)
    ts = np.linspace(a, t_hi, n_curve + 1)

    def inner(r):
        ds = _structure_curve(tm, r, ts)
        if ds is None:
            return None

        def J_of(t_exit):
            # finite penalty: inf would poison the parabolic steps of the bounded search
            prof = _structure_profile(cfg, ts, ds, t_exit, b_cap)
            if prof is None:
                return PENALTY
            try:
                return objective_J(tm, prof[0], a, prof[1], tol=1e-8)
            except (ArithmeticError, DomainError):
                return PENALTY

        res = minimize_scalar(J_of, bounds=(a + 1e-6, t_hi), method="bounded", options={"xatol": 1e-4})
        if not res.fun < PENALTY:
            return None
        dd, b, regimes = _structure_profile(cfg, ts, ds, float(res.x), b_cap)
        d_b = dd.eval_d(b)
        h = float(lagrangian(tm, b, d_b, cfg.u_max)) + r * d_b
        return dd, b, regimes, h

    lo, hi = 1e-4, 1e2
    out_lo, out_hi = inner(lo), inner(hi)
    if out_lo is None or out_hi is None or out_lo[3] * out_hi[3] > 0:
        return None
    out, mid = out_lo, lo
    for _ in range(max_iter):
        mid = np.sqrt(lo * hi)
        out = inner(mid)
        if out is None:
            return None
        if out[3] < 0:
            lo = mid
        else:
            hi = mid
        if hi / lo < 1 + 1e-6:
            break
    dd, b, regimes, _ = out
    J = objective_J(tm, dd, a, b)
    return J, dd, b, regimes, float(mid)


def optimize(cfg: PMPConfig) -> PMPSolution:
    return levy_optimal(cfg) if cfg.model.is_levy else synthesize(cfg)


__all__ = [
    "PMPConfig",
    "PMPSolution",
    "PMPReport",
    "Costate",
    "hamiltonian",
    "costate_rhs",
    "switching_function",
    "structure_solve",
    "structure_roots",
    "gbm_structure_solve",
    "strucexp_sides",
    "levy_optimal",
    "levy_optimality",
    "area_horizon",
    "xiopt_check",
    "verify_pmp",
    "integrate_costate",
    "synthesize",
    "optimize",
]

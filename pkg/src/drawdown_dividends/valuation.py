"""Discounted-dividend values of barrier strategies stopped at a generalized draw-down time.

For a barrier b and draw-down function d with trailing stop dhat(s) = s - d(s):

    V(x) = exp(-int_x^b nu(z, dhat(z)) dz) / nu(b, dhat(b)),     x <= b,
    V(x) = (x - b) + V(b),                                         x > b.

The Bolza objective J is -log V(a) rewritten as a running cost plus an initial
term, see ``objective_J``.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .drawdown import AffineDrawdown, DrawdownFn
from .errors import DomainError, SingularityError
from .models import DriftedBMModel, TransformModel
from .quadrature import DEFAULT_TOL, adaptive_simpson


@dataclass(frozen=True)
class ValueBreakdown:
    survival_factor: float
    barrier_payout: float
    value: float
    integral_of_nu: float
    excess: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)


def _check_state(tm: TransformModel, dd: DrawdownFn, x: float, b: float):
    if x < dd.a:
        raise DomainError(f"x = {x} below the draw-down start a = {dd.a}")
    if b < x:
        raise DomainError(f"barrier b = {b} below x = {x}")
    if not dd.eval_d(x) > 0:
        raise SingularityError(f"d({x}) = {dd.eval_d(x)}: excursion rate is infinite where d = 0")
    lo = tm.transform.lower
    if not dd.eval_dhat(x) > lo:
        raise DomainError(f"trailing stop {dd.eval_dhat(x)} outside the transform domain (> {lo})")


def nu_along(tm: TransformModel, dd: DrawdownFn, z):
    """nu(z, dhat(z))."""
    return tm.nu2(z, dd.eval_dhat(z))


def integral_of_nu(tm: TransformModel, dd: DrawdownFn, x: float, b: float, tol: float = DEFAULT_TOL) -> float:
    _check_state(tm, dd, x, b)
    if b == x:
        return 0.0
    k = dd.knots_between(x, b)
    vals = adaptive_simpson(
        lambda z, _: tm.nu2(z, dd.eval_dhat(z)), k[:-1], k[1:], tol, owner=np.zeros(len(k) - 1, dtype=int)
    )
    return float(vals.sum())


def survival_factor(tm: TransformModel, dd: DrawdownFn, x: float, b: float, tol: float = DEFAULT_TOL) -> float:
    """E_x[exp(-q tau_b); tau_b < tau_d] by quadrature of the excursion rate."""
    return float(np.exp(-integral_of_nu(tm, dd, x, b, tol)))


def barrier_payout(tm: TransformModel, dd: DrawdownFn, b: float) -> float:
    """Expected discounted dividends starting at the barrier, 1 / nu(b, dhat(b))."""
    if b < dd.a:
        raise DomainError(f"b = {b} below a = {dd.a}")
    if not dd.eval_d(b) > 0:
        raise SingularityError(f"d(b) = {dd.eval_d(b)}: the payout degenerates to 0")
    return 1.0 / tm.nu2(b, dd.eval_dhat(b))


def value(tm: TransformModel, dd: DrawdownFn, x: float, b: float, tol: float = DEFAULT_TOL) -> ValueBreakdown:
    if x > b:
        pay = barrier_payout(tm, dd, b)
        return ValueBreakdown(1.0, pay, (x - b) + pay, 0.0, excess=x - b)
    integ = integral_of_nu(tm, dd, x, b, tol)
    surv = float(np.exp(-integ))
    pay = barrier_payout(tm, dd, b)
    return ValueBreakdown(surv, pay, surv * pay, integ)


def lagrangian(tm: TransformModel, t, d, u):
    """Running cost nu + (d1 nu + d2 nu (1 - u)) / nu at (t, t - d)."""
    t = np.asarray(t, dtype=float)
    p = tm.partials(t, t - np.asarray(d, dtype=float))
    return p.nu + (p.d1 + p.d2 * (1.0 - np.asarray(u, dtype=float))) / p.nu


def lagrangian_segment_integrals(tm: TransformModel, t0, t1, d0, u, tol: float = DEFAULT_TOL, owner=None):
    """Integrate the running cost over linear pieces d(t) = d0 + u (t - t0) on [t0, t1].

    All arrays broadcast to one shape; returns one integral per piece.
    """
    t0, t1, d0, u = (np.asarray(v, dtype=float) for v in np.broadcast_arrays(t0, t1, d0, u))
    if np.any(d0 <= 0):
        raise SingularityError("running cost is singular where d = 0")

    def f(t, k):
        return lagrangian(tm, t, d0[k] + u[k] * (t - t0[k]), u[k])

    return adaptive_simpson(f, t0.ravel(), t1.ravel(), tol, owner=owner).reshape(t0.shape)


def objective_J(tm: TransformModel, dd: DrawdownFn, a: float | None = None, b: float | None = None,
                tol: float = DEFAULT_TOL) -> float:
    """Bolza objective int_a^b L dt + log nu(a, a - d(a)); equals -log V(a)."""
    a = dd.a if a is None else float(a)
    if b is None:
        raise DomainError("objective_J needs a horizon b")
    _check_state(tm, dd, a, b)
    init = float(np.log(tm.nu2(a, dd.eval_dhat(a))))
    if b == a:
        return init
    k = dd.knots_between(a, b)
    segs = lagrangian_segment_integrals(
        tm, k[:-1], k[1:], dd.eval_d(k[:-1]), dd.slope_at(k[:-1]), tol, owner=np.zeros(len(k) - 1, dtype=int)
    )
    return float(segs.sum()) + init


def levy_affine_value(m: DriftedBMModel, aff: AffineDrawdown, x: float, b: float) -> ValueBreakdown:
    """Closed form for drifted BM and affine draw-down.

    With slope u = 1 - xi the excursion integral is log(W(d(b)) / W(d(x))) / u,
    so the survival factor is (W(d(x)) / W(d(b)))^(1/u); for xi = 1 it is
    exp(-nu(d0) (b - x)).
    """
    if b < x:
        raise DomainError("closed form needs x <= b")
    dx, db = float(aff.d(x)), float(aff.d(b))
    if dx <= 0:
        raise SingularityError("d(x) = 0")
    u = 1.0 - aff.xi
    if u == 0:
        integ = m.nu(dx) * (b - x)
    else:
        integ = (m.log_scale_w(db) - m.log_scale_w(dx)) / u
    pay = 1.0 / m.nu(db)
    surv = float(np.exp(-integ))
    return ValueBreakdown(surv, pay, surv * pay, float(integ))

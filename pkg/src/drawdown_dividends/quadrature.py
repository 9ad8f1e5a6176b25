"""Vectorized adaptive Simpson quadrature over many panels at once."""
from __future__ import annotations

import numpy as np

from .errors import DomainError

DEFAULT_TOL = 1e-10
MAX_PANELS = 10**6


def adaptive_simpson(f, lo, hi, tol: float = DEFAULT_TOL, owner=None, max_panels: int = MAX_PANELS):
    """Integrate ``f`` over each interval [lo[k], hi[k]].

    ``f(x, k)`` receives a flat array of abscissae and the index of the interval
    each one belongs to, and must return values of the same shape.  The
    absolute tolerance ``tol`` is shared among the intervals of one owner in
    proportion to their lengths; ``owner`` groups intervals (default: each
    interval is its own owner).  Returns one integral per interval.
    """
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    n = lo.size
    if np.any(hi < lo):
        raise DomainError("quadrature interval with hi < lo")
    width = hi - lo
    if owner is None:
        budget = np.full(n, tol)
    else:
        owner = np.asarray(owner)
        total = np.bincount(owner, weights=width)[owner]
        budget = np.where(total > 0, tol * width / np.where(total > 0, total, 1.0), tol)

    result = np.zeros(n)
    idx = np.arange(n)
    a, b = lo.copy(), hi.copy()
    m = 0.5 * (a + b)
    fa, fm, fb = _eval3(f, a, m, b, idx)
    whole = (b - a) / 6.0 * (fa + 4 * fm + fb)
    eps = budget.copy()
    used = n
    while idx.size:
        lm = 0.5 * (a + m)
        rm = 0.5 * (m + b)
        flm, frm = _eval2(f, lm, rm, idx)
        left = (m - a) / 6.0 * (fa + 4 * flm + fm)
        right = (b - m) / 6.0 * (fm + 4 * frm + fb)
        err = left + right - whole
        done = (np.abs(err) <= 15.0 * eps) | (b - a <= 1e-13 * np.maximum(1.0, np.abs(a)))
        np.add.at(result, idx[done], (left + right + err / 15.0)[done])
        keep = ~done
        if not keep.any():
            break
        used += 2 * int(keep.sum())
        if used > max_panels:
            raise ArithmeticError("adaptive Simpson exceeded the panel cap")
        k = keep
        idx = np.concatenate([idx[k], idx[k]])
        a, m, b, fa, fm, fb, whole, eps = (
            np.concatenate([a[k], m[k]]),
            np.concatenate([lm[k], rm[k]]),
            np.concatenate([m[k], b[k]]),
            np.concatenate([fa[k], fm[k]]),
            np.concatenate([flm[k], frm[k]]),
            np.concatenate([fm[k], fb[k]]),
            np.concatenate([left[k], right[k]]),
            np.concatenate([eps[k] / 2, eps[k] / 2]),
        )
    return result


def _eval3(f, a, m, b, idx):
    n = a.size
    v = np.asarray(f(np.concatenate([a, m, b]), np.concatenate([idx, idx, idx])), dtype=float)
    return v[:n], v[n : 2 * n], v[2 * n :]


def _eval2(f, x, y, idx):
    n = x.size
    v = np.asarray(f(np.concatenate([x, y]), np.concatenate([idx, idx])), dtype=float)
    return v[:n], v[n:]


def integrate(f, lo: float, hi: float, tol: float = DEFAULT_TOL, breaks=None) -> float:
    """Scalar convenience: integrate ``f(x)`` over [lo, hi], split at ``breaks`` first."""
    knots = np.asarray([lo, hi] if breaks is None else breaks, dtype=float)
    vals = adaptive_simpson(lambda x, k: f(x), knots[:-1], knots[1:], tol, owner=np.zeros(len(knots) - 1, dtype=int))
    return float(vals.sum())

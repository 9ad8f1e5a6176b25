"""Spectrally negative diffusion models and their scale/excursion characteristics.

Two concrete families are supported:

* ``DriftedBMModel``: X_t = mu t + sigma B_t killed at rate q, with the explicit
  q-scale function W(x) = (exp(phi x) - exp(-rho x)) / delta.
* ``TransformModel``: X_t = F^{-1}(F(x0) + Z_t) for a strictly increasing F and a
  drifted Brownian motion Z.  The identity transform recovers the first family;
  the log-affine transform gives the geometric (logarithmic) Brownian motion
  dX = (alpha X + beta)(dt + eps dB).

Everything is written in terms of the two rates of the underlying exponential
pair, so the excursion rate nu = W'/W and its derivatives are evaluated through
E = exp(-(phi + rho) z) without ever forming exp(phi z) / exp(phi z).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Union

import numpy as np

from .errors import ConfigError, DomainError

LOG_SPACE_THRESHOLD = 300.0


def _out(v):
    return float(v) if np.ndim(v) == 0 else v


class _ExpPair:
    """omega(z) = exp(a z) - exp(-c z) with a > 0, c > 0, up to a constant factor.

    Only ratios omega^(k)/omega enter the excursion rates, so the constant never
    matters here.
    """

    def __init__(self, a: float, c: float):
        self.a = a
        self.c = c
        self.s = a + c

    def _ed(self, z):
        z = np.asarray(z, dtype=float)
        e = np.exp(-self.s * z)
        d = -np.expm1(-self.s * z)
        return e, d

    def log_omega(self, z):
        z = np.asarray(z, dtype=float)
        _, d = self._ed(z)
        return self.a * z + np.log(d)

    def nu(self, z):
        e, d = self._ed(z)
        return (self.a + self.c * e) / d

    def nu_prime(self, z):
        e, d = self._ed(z)
        return -self.s**2 * e / d**2

    def nu_second(self, z):
        e, d = self._ed(z)
        return self.s**3 * e * (1.0 + e) / d**3

    def ratio2(self, z):
        """omega'' / omega."""
        e, d = self._ed(z)
        return (self.a**2 - self.c**2 * e) / d

    def ratio21(self, z):
        """omega'' / omega', finite at z = 0."""
        e, _ = self._ed(z)
        return (self.a**2 - self.c**2 * e) / (self.a + self.c * e)


@dataclass(frozen=True)
class DriftedBMModel:
    """Drifted Brownian motion mu t + sigma B_t with discount rate q."""

    mu: float
    sigma: float
    q: float
    _pair: _ExpPair = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        for name in ("mu", "sigma", "q"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if not self.sigma > 0:
            raise ConfigError(f"sigma must be > 0, got {self.sigma}")
        if not self.q > 0:
            raise ConfigError(f"q must be > 0, got {self.q}")
        object.__setattr__(self, "_pair", _ExpPair(self.phi_q, self.rho_q))

    @property
    def delta(self) -> float:
        return float(np.sqrt(self.mu**2 + 2.0 * self.q * self.sigma**2))

    @property
    def phi_q(self) -> float:
        # (delta - mu) / sigma^2 without cancellation for mu >> 0
        mu, dl, s2 = self.mu, self.delta, self.sigma**2
        return (dl - mu) / s2 if mu <= 0 else 2.0 * self.q / (mu + dl)

    @property
    def rho_q(self) -> float:
        mu, dl, s2 = self.mu, self.delta, self.sigma**2
        return (mu + dl) / s2 if mu >= 0 else 2.0 * self.q / (dl - mu)

    def laplace_exponent(self, s):
        s = np.asarray(s, dtype=float)
        return _out(self.mu * s + 0.5 * self.sigma**2 * s**2)

    def log_scale_w(self, x):
        x = _nonneg(x)
        with np.errstate(divide="ignore"):
            return _out(self._pair.log_omega(x) - np.log(self.delta))

    def scale_w(self, x, order: int = 0):
        """W_q and its first two derivatives.

        The common factor exp(phi x) is applied last (in log space once
        x * max(phi, rho) exceeds ``LOG_SPACE_THRESHOLD``), so the bracket never
        overflows on its own.
        """
        x = _nonneg(x)
        a, c = self.phi_q, self.rho_q
        e = np.exp(-(a + c) * x)
        if order == 0:
            bracket = -np.expm1(-(a + c) * x)
        elif order == 1:
            bracket = a + c * e
        elif order == 2:
            bracket = a**2 - c**2 * e
        elif order == 3:
            bracket = a**3 + c**3 * e
        else:
            raise DomainError(f"order must be 0..3, got {order}")
        big = x * max(a, c) > LOG_SPACE_THRESHOLD
        with np.errstate(over="ignore", divide="ignore"):
            direct = np.exp(a * x) * bracket / self.delta
            logged = np.sign(bracket) * np.exp(a * x + np.log(np.abs(bracket)) - np.log(self.delta))
        return _out(np.where(big, logged, direct))

    def nu(self, x):
        return _out(self._pair.nu(_positive(x)))

    def nu_prime(self, x):
        return _out(self._pair.nu_prime(_positive(x)))

    def nu_second(self, x):
        return _out(self._pair.nu_second(_positive(x)))

    def w2_over_w1(self, x):
        """W''/W', the stable form of nu + nu'/nu."""
        return _out(self._pair.ratio21(_nonneg(x)))

    def w2w_over_w1sq(self, x):
        """W'' W / (W')^2."""
        x = _positive(x)
        return _out(self._pair.ratio2(x) / self._pair.nu(x) ** 2)

    def to_dict(self) -> dict:
        return {"kind": "bm", "mu": self.mu, "sigma": self.sigma, "q": self.q}


def _nonneg(x):
    x = np.asarray(x, dtype=float)
    if np.any(x < 0) or np.any(np.isnan(x)):
        raise DomainError("scale function needs x >= 0")
    return x


def _positive(x):
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0) or np.any(np.isnan(x)):
        raise DomainError("excursion rate is singular at x <= 0")
    return x


def gbm_roots(alpha: float, beta: float, eps: float, q: float) -> tuple[float, float]:
    """Roots r_+ > 0 > r_- of (eps^2 alpha^2 / 2) r^2 + (alpha - eps^2 alpha^2 / 2) r - q.

    ``beta`` does not enter; it is accepted so callers can pass a full
    parameter set.
    """
    if not (alpha > 0 and eps > 0 and q >= 0):
        raise DomainError("gbm_roots needs alpha, eps > 0 and q >= 0")
    A = 0.5 * eps**2 * alpha**2
    B = alpha - A
    disc = np.sqrt(B * B + 4.0 * A * q)
    if B >= 0:
        r_minus = (-B - disc) / (2.0 * A)
        r_plus = -q / (A * r_minus)
    else:
        r_plus = (-B + disc) / (2.0 * A)
        r_minus = -q / (A * r_plus) if r_plus != 0 else 0.0
    return float(r_plus), float(r_minus)


@dataclass(frozen=True)
class Identity:
    def F(self, x):
        return np.asarray(x, dtype=float)

    def dF(self, x):
        return np.ones_like(np.asarray(x, dtype=float))

    def d2F(self, x):
        return np.zeros_like(np.asarray(x, dtype=float))

    def Finv(self, z):
        return np.asarray(z, dtype=float)

    def in_domain(self, x):
        return np.isfinite(np.asarray(x, dtype=float))

    @property
    def lower(self) -> float:
        return -np.inf

    convex = True


@dataclass(frozen=True)
class LogAffine:
    """F(x) = ln((alpha x + beta) / (alpha x0 + beta))."""

    alpha: float
    beta: float
    eps: float
    x0: float = 0.0

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0 and self.eps > 0):
            raise ConfigError("LogAffine needs alpha, beta, eps > 0")
        if not self.alpha * self.x0 + self.beta > 0:
            raise ConfigError("reference point x0 outside the transform domain")

    def F(self, x):
        x = np.asarray(x, dtype=float)
        return np.log((self.alpha * x + self.beta) / (self.alpha * self.x0 + self.beta))

    def dF(self, x):
        return self.alpha / (self.alpha * np.asarray(x, dtype=float) + self.beta)

    def d2F(self, x):
        return -self.alpha**2 / (self.alpha * np.asarray(x, dtype=float) + self.beta) ** 2

    def Finv(self, z):
        z = np.asarray(z, dtype=float)
        return ((self.alpha * self.x0 + self.beta) * np.exp(z) - self.beta) / self.alpha

    def in_domain(self, x):
        return self.alpha * np.asarray(x, dtype=float) + self.beta > 0

    @property
    def lower(self) -> float:
        return -self.beta / self.alpha

    convex = False


Transform = Union[Identity, LogAffine]


class NuPartials(NamedTuple):
    nu: np.ndarray
    d1: np.ndarray
    d2: np.ndarray
    d12: np.ndarray
    d22: np.ndarray


@dataclass(frozen=True)
class TransformModel:
    """X = F^{-1}(F(x0) + Z) for a drifted Brownian motion Z (``base``).

    nu(x, y) = F'(x) mu_q(F(x) - F(y)) where mu_q is the excursion rate of Z.
    """

    base: DriftedBMModel
    transform: Transform = field(default_factory=Identity)

    @classmethod
    def bm(cls, mu: float, sigma: float, q: float) -> "TransformModel":
        return cls(DriftedBMModel(mu, sigma, q), Identity())

    @classmethod
    def gbm(cls, alpha: float, beta: float, eps: float, q: float, x0: float = 0.0) -> "TransformModel":
        t = LogAffine(alpha, beta, eps, x0)
        base = DriftedBMModel(alpha - 0.5 * eps**2 * alpha**2, eps * alpha, q)
        return cls(base, t)

    @property
    def q(self) -> float:
        return self.base.q

    @property
    def is_levy(self) -> bool:
        return isinstance(self.transform, Identity)

    @property
    def roots(self) -> tuple[float, float]:
        """(r_+, r_-) of the driving Brownian motion."""
        return self.base.phi_q, -self.base.rho_q

    def _delta(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        t = self.transform
        if not (np.all(t.in_domain(x)) and np.all(t.in_domain(y))):
            raise DomainError("argument outside the transform domain")
        if np.any(y >= x):
            raise DomainError("two-variable excursion rate needs y < x")
        return t.F(x) - t.F(y)

    def nu2(self, x, y):
        dlt = self._delta(x, y)
        return _out(self.transform.dF(x) * self.base._pair.nu(dlt))

    def d2_nu2(self, x, y):
        dlt = self._delta(x, y)
        t = self.transform
        return _out(-t.dF(x) * t.dF(y) * self.base._pair.nu_prime(dlt))

    def partials(self, x, y) -> NuPartials:
        """nu and its partial derivatives up to the mixed/second order in y."""
        dlt = self._delta(x, y)
        t, p = self.transform, self.base._pair
        fx, fy = t.dF(x), t.dF(y)
        fxx, fyy = t.d2F(x), t.d2F(y)
        m, m1, m2 = p.nu(dlt), p.nu_prime(dlt), p.nu_second(dlt)
        return NuPartials(
            nu=fx * m,
            d1=fxx * m + fx**2 * m1,
            d2=-fx * fy * m1,
            d12=-fxx * fy * m1 - fx**2 * fy * m2,
            d22=-fx * fyy * m1 + fx * fy**2 * m2,
        )

    def to_dict(self) -> dict:
        if self.is_levy:
            return self.base.to_dict()
        t = self.transform
        return {"kind": "gbm", "alpha": t.alpha, "beta": t.beta, "eps": t.eps, "q": self.q, "x0": t.x0}


def model_from_dict(d: dict) -> TransformModel:
    d = dict(d)
    kind = d.pop("kind", None)
    try:
        if kind == "bm":
            _only(d, {"mu", "sigma", "q"})
            return TransformModel.bm(d["mu"], d["sigma"], d["q"])
        if kind == "gbm":
            _only(d, {"alpha", "beta", "eps", "q", "x0"})
            return TransformModel.gbm(d["alpha"], d["beta"], d["eps"], d["q"], d.get("x0", 0.0))
    except KeyError as exc:
        raise ConfigError(f"model is missing field {exc}") from None
    raise ConfigError(f"unknown model kind {kind!r}")


def _only(d: dict, allowed: set):
    extra = set(d) - allowed
    if extra:
        raise ConfigError(f"unknown model keys {sorted(extra)}")


# functional aliases


def laplace_exponent(m: DriftedBMModel, s):
    return m.laplace_exponent(s)


def scale_w(m: DriftedBMModel, x, order: int = 0):
    return m.scale_w(x, order)


def nu(m: DriftedBMModel, x):
    return m.nu(x)


def nu_prime(m: DriftedBMModel, x):
    return m.nu_prime(x)


def nu2(tm: TransformModel, x, y):
    return tm.nu2(x, y)


def d2_nu2(tm: TransformModel, x, y):
    return tm.d2_nu2(x, y)

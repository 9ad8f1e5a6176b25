import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from drawdown_dividends.drawdown import AffineDrawdown, DrawdownFn
from drawdown_dividends.errors import DomainError, SingularityError
from drawdown_dividends.models import DriftedBMModel, TransformModel
from drawdown_dividends.valuation import (
    barrier_payout,
    lagrangian,
    levy_affine_value,
    objective_J,
    survival_factor,
    value,
)

from conftest import GBM1, SINH, mus, qs, sigmas
from test_drawdown import drawdowns

RUIN1 = AffineDrawdown(0.0, 1.0).to_drawdown(0.0)
DD1 = AffineDrawdown(1.0, 1.0).to_drawdown(0.0)
RUIN0 = AffineDrawdown(0.0, 0.0).to_drawdown(0.0)


def test_survival_examples():
    assert survival_factor(SINH, RUIN1, 1.5, 1.5) == 1.0
    # W(2)/W(3) = 0.362039 (not 0.36213)
    assert survival_factor(SINH, RUIN1, 1.0, 2.0) == pytest.approx(np.sinh(2) / np.sinh(3), abs=1e-10)
    assert survival_factor(SINH, RUIN1, 1.0, 2.0) == pytest.approx(0.3620389, abs=1e-7)


def test_payout_examples():
    for b in (0.0, 0.5, 3.0):
        assert barrier_payout(SINH, DD1, b) == pytest.approx(np.tanh(1.0), rel=1e-14)
    wide = AffineDrawdown(1.0, 50.0).to_drawdown(0.0)
    assert barrier_payout(SINH, wide, 1.0) == pytest.approx(1.0, abs=1e-8)
    dd = DrawdownFn(0.0, 0.4, (0.0, 1.0), (1.0, 0.2))
    b = 1.7
    assert barrier_payout(GBM1, dd, b) == 1.0 / GBM1.nu2(b, dd.eval_dhat(b))
    with pytest.raises(SingularityError):
        barrier_payout(SINH, RUIN0, 0.0)


def test_value_examples():
    v = value(SINH, RUIN1, 2.0, 2.0)
    assert v.value == v.barrier_payout
    assert value(SINH, RUIN0, 1.0, 2.0).value == pytest.approx(np.sinh(1) / np.cosh(2), abs=1e-10)
    # sinh(1)/cosh(2) = 0.312371 (not 0.31235)
    assert value(SINH, RUIN0, 1.0, 2.0).value == pytest.approx(0.3123711, abs=1e-7)
    hi = value(SINH, RUIN1, 3.0, 2.0)
    assert hi.value == pytest.approx(1.0 + value(SINH, RUIN1, 2.0, 2.0).value, rel=1e-15)
    assert hi.excess == 1.0


def test_value_errors():
    with pytest.raises(DomainError):
        value(SINH, RUIN1, -0.5, 1.0)
    with pytest.raises(SingularityError):
        survival_factor(SINH, RUIN0, 0.0, 1.0)
    with pytest.raises(SingularityError):
        objective_J(SINH, RUIN0, 0.0, 1.0)


def test_lagrangian_special_slopes():
    t, d = 1.3, 0.6
    p = GBM1.partials(t, t - d)
    assert lagrangian(GBM1, t, d, 0.0) == pytest.approx(p.nu + (p.d1 + p.d2) / p.nu, rel=1e-15)
    assert lagrangian(GBM1, t, d, 1.0) == pytest.approx(p.nu + p.d1 / p.nu, rel=1e-15)


@given(drawdowns(max_segments=4), st.floats(0.0, 3.0), st.floats(0.0, 3.0))
def test_decomposition_identity(dd, x, b):
    x, b = dd.a + min(x, b), dd.a + max(x, b)
    if dd.eval_d(x) < 0.05:
        return
    for tm in (SINH, TransformModel.gbm(0.5, 1.0, 2.0, 1.0, x0=0.0)):
        if not tm.transform.in_domain(dd.eval_dhat(x)):
            continue
        v = value(tm, dd, x, b)
        assert abs(v.value - v.survival_factor * v.barrier_payout) <= 1e-12 * v.value


@given(drawdowns(max_segments=3), st.floats(0.0, 2.0), st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_survival_nondecreasing_in_x(dd, b, s1, s2):
    b = dd.a + b
    x1, x2 = dd.a + (b - dd.a) * min(s1, s2), dd.a + (b - dd.a) * max(s1, s2)
    if dd.eval_d(x1) < 0.05:
        return
    assert survival_factor(SINH, dd, x2, b) >= survival_factor(SINH, dd, x1, b) - 1e-12


@given(mus, sigmas, qs, st.floats(0.0, 1.0), st.floats(0.05, 2.0), st.floats(0.0, 3.0), st.floats(0.0, 3.0))
def test_levy_affine_closed_form(mu, sigma, q, xi, d0, x, b):
    x, b = min(x, b), max(x, b)
    m = DriftedBMModel(mu, sigma, q)
    tm = TransformModel(m)
    aff = AffineDrawdown(xi, d0)
    dd = aff.to_drawdown(0.0)
    quadv = value(tm, dd, x, b)
    closed = levy_affine_value(m, aff, x, b)
    assert quadv.survival_factor == pytest.approx(closed.survival_factor, abs=1e-8)
    assert quadv.value == pytest.approx(closed.value, rel=1e-8)


@given(drawdowns(max_segments=4), st.floats(0.0, 3.0))
def test_objective_duality(dd, b):
    if dd.d_a < 0.05:
        return
    b = dd.a + b
    for tm in (SINH, TransformModel.gbm(0.5, 1.0, 2.0, 1.0, x0=0.0)):
        if not tm.transform.in_domain(dd.eval_dhat(dd.a)):
            continue
        J = objective_J(tm, dd, dd.a, b)
        assert J == pytest.approx(-np.log(value(tm, dd, dd.a, b).value), abs=1e-8)

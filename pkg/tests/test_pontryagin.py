import dataclasses
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from drawdown_dividends.drawdown import DrawdownFn
from drawdown_dividends.errors import ConfigError, DomainError
from drawdown_dividends.models import DriftedBMModel, TransformModel
from drawdown_dividends.pontryagin import (
    PMPConfig,
    area_horizon,
    costate_rhs,
    gbm_structure_solve,
    hamiltonian,
    levy_optimal,
    optimize,
    strucexp_sides,
    structure_solve,
    switching_function,
    synthesize,
    verify_pmp,
    xiopt_check,
)
from drawdown_dividends.valuation import objective_J

from conftest import GBM1, LEVY, SINH, mus, qs, sigmas

M = LEVY.base
B_STAR = 2 * np.log(M.rho_q / M.phi_q) / (M.phi_q + M.rho_q)


def test_closed_form_constants():
    assert M.delta == pytest.approx(np.sqrt(1.2), rel=1e-15)
    assert M.phi_q == pytest.approx(0.09544511501033215, rel=1e-13)
    assert M.rho_q == pytest.approx(2.0954451150103321, rel=1e-13)
    assert B_STAR == pytest.approx(2.8198308272299597, rel=1e-13)


def test_levy_optimal_closed_form():
    sol = levy_optimal(PMPConfig(LEVY, a=0.0, d_a=0.0))
    assert abs(sol.b_star - B_STAR) < 1e-8
    assert sol.regimes == ["slopeU"] and sol.r == 0.0
    assert sol.dd.slopes == (1.0,)
    assert abs(M.scale_w(sol.b_star, 2)) < 1e-12


def test_levy_optimal_distribute_immediately():
    sol = levy_optimal(PMPConfig(SINH, a=0.0, d_a=0.0))
    assert sol.b_star == 0.0 and sol.distribute_immediately
    z = np.linspace(0.01, 3, 50)
    assert np.allclose(SINH.base.nu(z) + SINH.base.nu_prime(z) / SINH.base.nu(z), np.tanh(z), atol=1e-13)


def test_area_horizon_example():
    assert area_horizon(1.0, 6.0, 1.0) == pytest.approx(-1 + np.sqrt(13), abs=1e-12)
    sol = levy_optimal(PMPConfig(LEVY, a=0.0, d_a=1.0, K=6.0))
    assert abs(sol.b_plus - (-1 + np.sqrt(13))) < 1e-10
    assert sol.b_star == pytest.approx(min(sol.b_unconstrained, sol.b_plus), abs=1e-12)
    assert not sol.area_binding and sol.r == 0.0
    tight = levy_optimal(PMPConfig(LEVY, a=0.0, d_a=1.0, K=2.0))
    assert tight.area_binding and tight.b_star == pytest.approx(-1 + np.sqrt(5), abs=1e-12)
    assert tight.r > 0


def test_free_initial_datum_is_extremal():
    sol = levy_optimal(PMPConfig(LEVY, a=0.0, d_a_max=2.0))
    J = {v: levy_optimal(PMPConfig(LEVY, a=0.0, d_a=v)).J for v in (0.0, 0.5, 1.0, 2.0)}
    assert sol.dd.d_a in (0.0, 2.0)
    assert sol.J <= min(J.values()) + 1e-12


def test_levy_rejects_transform():
    with pytest.raises(ConfigError):
        levy_optimal(PMPConfig(GBM1, a=0.0, d_a=1.0))


def test_hamiltonian_examples():
    t, d, r = 1.0, 0.7, 0.3
    pt = SINH.partials(t, t - d)
    p_sw = pt.d2 / pt.nu
    H = [hamiltonian(GBM1, t, d, u, GBM1.partials(t, t - d).d2 / GBM1.partials(t, t - d).nu, r) for u in (0, .5, 1)]
    assert np.ptp(H) < 1e-14
    m = SINH.base
    for u in (0.0, 0.4, 1.0):
        expected = m.nu(d) + (m.nu_prime(d) / m.nu(d) + 0.2) * u + r * d
        assert hamiltonian(SINH, t, d, u, 0.2, r) == pytest.approx(expected, rel=1e-14)
    assert switching_function(SINH, t, d, p_sw) == pytest.approx(0.0, abs=1e-15)


def test_hamiltonian_zero_along_levy_optimum():
    sol = levy_optimal(PMPConfig(LEVY, a=0.0, d_a=0.1))
    c = sol.costate
    H = hamiltonian(LEVY, c.t, c.d, c.u, c.p, sol.r)
    assert np.max(np.abs(H)) < 1e-10


def test_costate_rhs_levy_reduction():
    m = SINH.base
    d, r, h = 0.8, 0.25, 1e-5
    for u in (0.0, 0.6, 1.0):
        lg = (m.nu_prime(d + h) / m.nu(d + h) - m.nu_prime(d - h) / m.nu(d - h)) / (2 * h)
        expected = -m.nu_prime(d) - lg * u - r
        assert costate_rhs(SINH, 2.0, d, u, r=r) == pytest.approx(expected, abs=1e-8)


@given(st.floats(-0.5, 3.0), st.floats(0.1, 2.0), st.floats(0.0, 1.0), st.floats(-2.0, 2.0), st.floats(0.0, 1.0))
def test_costate_rhs_is_minus_dH_dd(t, d, u, p, r):
    for tm in (SINH, GBM1):
        if not tm.transform.in_domain(t - d - 1e-4):
            continue
        h = 1e-5
        fd = (hamiltonian(tm, t, d + h, u, p, r) - hamiltonian(tm, t, d - h, u, p, r)) / (2 * h)
        assert abs(costate_rhs(tm, t, d, u, p, r) + fd) < 1e-6 * max(1.0, abs(fd))


def test_structure_examples():
    assert structure_solve(SINH, 1.0, 1.0) == pytest.approx(np.arcsinh(1.0), abs=1e-12)
    assert np.arcsinh(1.0) == pytest.approx(np.log(1 + np.sqrt(2)), rel=1e-15)
    assert structure_solve(SINH, 1.0, 0.0) is None
    assert structure_solve(GBM1, 1.0, 0.0) is None
    assert gbm_structure_solve(GBM1, 1.0, 0.0) is None


@pytest.mark.parametrize("r", [0.1, 1.0, 10.0])
def test_gbm_structure_residual(r):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        for x in np.linspace(-0.5, 3.0, 10):
            s = gbm_structure_solve(GBM1, float(x), r)
            if s is None:
                continue
            assert s.residual < 1e-10
            lhs, rhs = strucexp_sides(GBM1, float(x), r, s.delta)
            assert abs(lhs - rhs) < 1e-10
            assert 0 < s.d_opt < x + 1.0
            assert s.certificate.startswith("inapplicable")


def test_verify_examples():
    cfg = PMPConfig(LEVY, a=0.0, d_a=0.1)
    sol = levy_optimal(cfg)
    rep = verify_pmp(LEVY, sol, cfg)
    assert rep.passed
    assert rep.hamiltonian_at_b < 1e-6 and rep.costate_at_b < 1e-6 and rep.hamiltonian_deviation < 1e-6
    # perturbed barrier
    bad = dataclasses.replace(sol, b_star=sol.b_star + 0.1)
    rep = verify_pmp(LEVY, bad, cfg)
    assert not rep.passed and rep.hamiltonian_at_b > 1e-6
    # slope-0 stretch inserted into the optimal profile
    dd = DrawdownFn(0.0, 0.1, (0.0, 0.8, 1.3), (1.0, 0.0, 1.0))
    bad = dataclasses.replace(sol, dd=dd)
    rep = verify_pmp(LEVY, bad, cfg)
    assert not rep.passed and not all(rep.switching_ok)


@pytest.mark.parametrize("d_a,u_max,K", [(0.0, 1.0, None), (0.1, 0.5, None), (0.0, 0.5, None), (1.0, 1.0, 2.0)])
def test_verify_variants(d_a, u_max, K):
    cfg = PMPConfig(LEVY, a=0.0, d_a=d_a, u_max=u_max, K=K)
    assert verify_pmp(LEVY, levy_optimal(cfg), cfg).passed


def test_xiopt():
    sol = levy_optimal(PMPConfig(LEVY, a=0.0, d_a=0.0))
    assert abs(xiopt_check(LEVY, sol.b_star, 1.0)) < 1e-8
    half = levy_optimal(PMPConfig(LEVY, a=0.0, d_a=0.0, u_max=0.5))
    assert abs(xiopt_check(LEVY, half.b_star, 0.5)) < 1e-8
    assert abs(xiopt_check(LEVY, half.b_star + 0.3, 0.5)) > 1e-3


@given(mus, sigmas, qs, st.sampled_from([0.25, 0.5, 1.0]))
def test_payout_slope_at_optimum(mu, sigma, q, u):
    tm = TransformModel(DriftedBMModel(mu, sigma, q))
    sol = levy_optimal(PMPConfig(tm, a=0.0, d_a=0.0, u_max=u))
    if sol.distribute_immediately:
        return
    m = tm.base
    z = u * sol.b_star
    # d/dz (1/nu) = -nu'/nu^2 equals 1/u at the optimum, so d/db (1/nu(d(b))) = 1
    dz = -m.nu_prime(z) / m.nu(z) ** 2
    assert dz == pytest.approx(1.0 / u, rel=1e-8)


@given(mus, sigmas, qs)
def test_smooth_fit_roots_coincide(mu, sigma, q):
    m = DriftedBMModel(mu, sigma, q)
    sol = levy_optimal(PMPConfig(TransformModel(m), a=0.0, d_a=0.0))
    if m.rho_q <= m.phi_q:
        assert sol.distribute_immediately
        return
    b_w2 = 2 * np.log(m.rho_q / m.phi_q) / (m.phi_q + m.rho_q)
    assert abs(sol.b_star - b_w2) < 1e-8


def test_synthesize_gbm_unconstrained_and_binding():
    tm = TransformModel.gbm(0.5, 1.0, 2.0, 1.0)
    cfg = PMPConfig(tm, a=0.0, d_a=1.0)
    sol = synthesize(cfg)
    assert sol.r == 0.0 and sol.regimes == ["slopeU"]
    assert sol.J == pytest.approx(objective_J(tm, sol.dd, 0.0, sol.b_star), abs=1e-10)
    with pytest.raises(DomainError):
        synthesize(PMPConfig(GBM1, a=0.0, d_a=1.0))
    cfg = PMPConfig(GBM1, a=0.0, d_a=0.5, K=0.5)
    sol = optimize(cfg)
    assert sol.area_binding and sol.dd.area(sol.b_star) <= 2.0 * (1 + 1e-8)
    assert verify_pmp(GBM1, sol, cfg).passed


def test_gbm_cap_note():
    sol = synthesize(PMPConfig(GBM1, a=0.0, d_a=0.5))
    assert any("no interior optimum" in n for n in sol.notes)

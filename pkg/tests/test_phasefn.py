import math

import mpmath
import numpy as np
import pytest

from turnphase.chebseries import PiecewiseExpansion
from turnphase.exceptions import ConfigurationError, DomainError
from turnphase.phasefn import (
    CoefficientSpec,
    PhaseBasis,
    PhaseConfig,
    PhaseFunction,
    TurningPointSpec,
    appell_initial_values,
    appell_residual,
    basis_eval,
    build_phase,
    build_phase_multi,
    connection_coeffs,
    fit_solution,
    kummer_alpha_ppp,
    kummer_residual,
    normal_form,
    phase_from_window,
    solve_appell,
    window_values,
)
from turnphase.specfun import bumps_q, cosine_q


def linear_phase(lam, a, b, c, slope2=0.0):
    """alpha = lam (t - c) + slope2 (t - c)^2 / 2 on [a, b]."""
    bp = np.linspace(a, b, 5)
    return PhaseFunction(
        PiecewiseExpansion.from_function(lambda t: lam * (t - c) + 0.5 * slope2 * (t - c) ** 2, bp),
        PiecewiseExpansion.from_function(lambda t: lam + slope2 * (t - c), bp),
        PiecewiseExpansion.from_function(lambda t: slope2 + 0 * t, bp),
        c,
    )


def const_spec(lam2):
    return CoefficientSpec(lambda t: lam2 + 0 * np.asarray(t, float), lambda t: 0 * np.asarray(t, float))


def linear_spec():
    return CoefficientSpec(lambda t: np.asarray(t, float), lambda t: np.ones_like(np.asarray(t, float)))


def test_kummer_alpha_ppp_examples():
    assert kummer_alpha_ppp(1, 1, 0) == 0
    assert kummer_alpha_ppp(0, 1, 0) == -2
    assert kummer_alpha_ppp(4, 2, 0) == 0
    with pytest.raises(ValueError):
        kummer_alpha_ppp(1, 0, 0)


def test_appell_initial_values_examples():
    assert appell_initial_values(1, 0, 0) == (1, 0, 0)
    assert appell_initial_values(2, 0, 0) == (0.5, 0, 0)
    assert appell_initial_values(1, 1, 2) == (1, -1, 0)
    with pytest.raises(ValueError):
        appell_initial_values(-1, 0, 0)


def test_window_constant_coefficient():
    wv = window_values(const_spec(9.0), 0.0, 4.0)
    assert wv.alpha_p_at == pytest.approx(3.0, rel=1e-12)
    assert abs(wv.alpha_pp_at) <= 1e-12 * 3.0


@pytest.mark.xfail(
    strict=True,
    reason="a window spanning about 30 radians carries a windowing error near 4e-6",
)
def test_window_matches_global_phase():
    spec = linear_spec()
    wv = window_values(spec, 10.0, 20.0)
    basis = build_phase(spec, -10.0, 40.0, TurningPointSpec(0.0, 1, 1), PhaseConfig(eps=1e-13))
    assert wv.alpha_p_at == pytest.approx(basis.phase.alpha_p(10.0), rel=1e-9)


def test_window_error_decays_with_window_frequency():
    spec = linear_spec()
    ref = build_phase(spec, -10.0, 80.0, TurningPointSpec(0.0, 1, 1), PhaseConfig(eps=1e-13))
    errs = []
    for a0, b0 in ((0.0, 10.0), (10.0, 20.0), (20.0, 40.0)):
        wv = window_values(spec, a0, b0, PhaseConfig(eps=1e-13))
        errs.append(abs(wv.alpha_p_at / ref.phase.alpha_p(a0) - 1))
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] <= 1e-9


def test_window_same_window_consistent():
    spec = linear_spec()
    cfg = PhaseConfig(eps=1e-13)
    wv = window_values(spec, 10.0, 20.0, cfg)
    pf = phase_from_window(spec, -10.0, 40.0, (10.0, 20.0), cfg)
    assert pf.alpha_p(10.0) == pytest.approx(wv.alpha_p_at, rel=1e-11)


def test_window_mirrored():
    spec = linear_spec()
    wv = window_values(spec, 5.0, 20.0)
    assert wv.alpha_p_at > 0
    basis = build_phase(spec, -10.0, 20.0, TurningPointSpec(0.0, 1, 1))
    assert kummer_residual(spec, basis.phase, 5.0) <= 1e-10
    # the mirrored window produces values at its right end
    m = window_values(CoefficientSpec(lambda s: -np.asarray(s, float), lambda s: -np.ones_like(s)), -20.0, -5.0, mirrored=True)
    assert m.alpha_p_at == pytest.approx(wv.alpha_p_at, rel=1e-12)
    assert m.alpha_pp_at == pytest.approx(-wv.alpha_pp_at, rel=1e-9)


def test_window_rejects_nonpositive_midpoint():
    with pytest.raises(ConfigurationError):
        window_values(linear_spec(), -4.0, 2.0)


def test_appell_constant_modulus():
    sol = solve_appell(const_spec(1.0), 0.0, 10.0, 3.0, (1.0, 0.0, 0.0))
    t = np.linspace(0, 10, 101)
    assert np.max(np.abs(sol(t)[:, 0] - 1)) <= 1e-14


def test_appell_cosine():
    c = 3.0
    sol = solve_appell(const_spec(1.0), 0.0, 10.0, c, (1.0, 0.0, -4.0))
    t = np.linspace(0, 10, 101)
    assert np.max(np.abs(sol(t)[:, 0] - np.cos(2 * t - 2 * c))) <= 1e-12
    assert np.max(appell_residual(const_spec(1.0), sol, t)) <= 1e-10


def test_airy_build(airy_basis):
    spec, basis = airy_basis
    a, b = basis.domain
    assert basis.kind == "odd" and basis.phase.truncated_right
    assert 60 <= b <= 70
    ap = basis.phase.alpha_p(b)
    assert 1e-302 <= ap <= 1e-299
    assert a == -10000.0


@pytest.mark.xfail(strict=True, reason="truncation lands one partition interval later, alpha' is 14x smaller")
def test_airy_truncation_value_within_factor_ten(airy_basis):
    _, basis = airy_basis
    ap = basis.phase.alpha_p(basis.domain[1])
    assert 2.5585823472966988e-300 <= ap <= 2.5585823472966988e-298


def test_linear_q_residual_and_wider_window():
    spec = linear_spec()
    basis = build_phase(spec, -10.0, 10.0, TurningPointSpec(0.0, 1, 1))
    t = np.linspace(0.5, 10, 500)
    assert np.max(kummer_residual(spec, basis.phase, t)) <= 1e-10
    wide = build_phase(spec, -10.0, 40.0, TurningPointSpec(0.0, 1, 1))
    lg = math.sqrt(10) + 5 / (32 * 10**2.5)
    assert wide.phase.alpha_p(10.0) == pytest.approx(lg, rel=1e-5)


@pytest.mark.xfail(strict=True, reason="the default window on (0, 10) spans about 15 radians")
def test_linear_q_liouville_green():
    spec = linear_spec()
    basis = build_phase(spec, -10.0, 10.0, TurningPointSpec(0.0, 1, 1))
    assert basis.phase.alpha_p(10.0) == pytest.approx(math.sqrt(10), rel=1e-3)
    t = np.linspace(0.5, 10, 500)
    assert np.max(kummer_residual(spec, basis.phase, t)) <= 1e-10


def test_even_basis_coefficients(monomial_bases):
    _, basis = monomial_bases(2)
    c11, c12, c21, c22 = basis.coeffs
    assert basis.kind == "even"
    assert c21 == 0 and c11 == c22


def test_even_with_negative_leading_sign_rejected():
    spec = CoefficientSpec(lambda t: -np.asarray(t, float) ** 2, lambda t: -2 * np.asarray(t, float))
    with pytest.raises(ConfigurationError):
        build_phase(spec, -1.0, 1.0, TurningPointSpec(0.0, 2, -1), verify=False)


def test_turning_point_validation():
    with pytest.raises(ConfigurationError):
        build_phase(linear_spec(), -1.0, 1.0, TurningPointSpec(2.0, 1, 1))
    with pytest.raises(ConfigurationError):
        build_phase(linear_spec(), -1.0, 1.0, TurningPointSpec(0.0, 1, -1))
    with pytest.raises(ConfigurationError):
        TurningPointSpec(0.0, 0, 1)


def test_connection_trivial():
    left, right = linear_phase(2.0, -1, 0, 0), linear_phase(2.0, 0, 1, 0)
    assert connection_coeffs(left, right) == pytest.approx((1.0, 0.0, 0.0, 1.0), rel=1e-15, abs=1e-15)


def test_connection_ratio_four():
    # the C^1 glue with alpha'_L(c) = 1, alpha'_R(c) = 4 scales u by 2 and v by 1/2
    left, right = linear_phase(1.0, -1, 0, 0), linear_phase(4.0, 0, 1, 0)
    assert connection_coeffs(left, right) == pytest.approx((2.0, 0.0, 0.0, 0.5), rel=1e-15, abs=1e-15)


def test_connection_generic_is_c1():
    left = linear_phase(1.3, -1, 0, 0, slope2=-0.4)
    right = linear_phase(2.1, 0, 1, 0, slope2=0.7)
    basis = PhaseBasis("even", 0.0, left=left, right=right, coeffs=connection_coeffs(left, right))
    uL, vL, upL, vpL = basis_eval(basis, 0.0)

    def one_sided(h):
        f = np.array(basis_eval(basis, h))[:2]
        return (f - np.array([uL, vL])) / h

    h = 1e-5
    right_d = 2 * one_sided(h / 2) - one_sided(h)
    left_d = 2 * one_sided(-h / 2) - one_sided(-h)
    assert right_d == pytest.approx(left_d, rel=1e-9)
    assert right_d == pytest.approx([upL, vpL], rel=1e-8)
    # one-sided limits at c agree to rounding
    uR0, vR0, upR0, vpR0 = basis_eval(PhaseBasis("odd", 0.0, phase=right), 0.0)
    c11, c12, c21, c22 = basis.coeffs
    assert c11 * uR0 + c12 * vR0 == pytest.approx(uL, rel=1e-14)
    assert c11 * upR0 + c12 * vpR0 == pytest.approx(upL, rel=1e-14)
    assert c21 * upR0 + c22 * vpR0 == pytest.approx(vpL, rel=1e-14)


def test_connection_requires_shared_point():
    with pytest.raises(ConfigurationError):
        connection_coeffs(linear_phase(1.0, -1, -0.5, 0), linear_phase(1.0, 0, 1, 0))


def test_manual_constant_phase():
    lam, c = 100.0, 0.0
    basis = PhaseBasis("odd", c, phase=linear_phase(lam, 0, 1, c))
    t = np.linspace(0, 1, 1001)
    u, v, up, vp = basis_eval(basis, t)
    assert np.max(np.abs(u - np.cos(lam * t) / 10)) <= 1e-12
    assert np.max(np.abs(v - np.sin(lam * t) / 10)) <= 1e-12
    assert np.max(np.abs(up + 10 * np.sin(lam * t))) <= 1e-10


def test_wronskian_identity(airy_basis, monomial_bases):
    for basis in (airy_basis[1], monomial_bases(2)[1], monomial_bases(3)[1]):
        a, b = basis.domain
        t = np.linspace(max(a, -30), min(b, 30), 997)
        u, v, up, vp = basis_eval(basis, t)
        scale = np.maximum(1.0, np.abs(u * vp) + np.abs(up * v))
        assert np.max(np.abs(u * vp - up * v - 1) / scale) <= 1e-12


def test_basis_domain_error(airy_basis):
    with pytest.raises(DomainError):
        basis_eval(airy_basis[1], 100.0)


def test_airy_fit_at_minus_ten(airy_basis):
    _, basis = airy_basis
    ai0, aip0 = float(mpmath.airyai(0)), float(mpmath.airyai(0, 1))
    fit = fit_solution(basis, (0.0, 1, 0, ai0), (0.0, 0, 1, aip0))
    assert abs(fit(-10.0) - float(mpmath.airyai(-10))) <= 1e-11
    assert not fit.ill_conditioned


def test_fit_closed_form():
    lam = 4.0
    basis = PhaseBasis("odd", 0.0, phase=linear_phase(lam, -1, 1, 0))
    fit = fit_solution(basis, (0.0, 1, 0, 1.0), (0.0, 0, 1, 0.0))
    assert fit.d1 == pytest.approx(math.sqrt(lam), rel=1e-15) and abs(fit.d2) <= 1e-15


def test_fit_reproduces_cosine():
    basis = PhaseBasis("odd", 0.0, phase=linear_phase(1.0, 0, 20, 0))
    fit = fit_solution(basis, (0.0, 1, 0, 1.0), (0.0, 0, 1, 0.0))
    t = np.linspace(0, 20, 401)
    assert np.max(np.abs(fit(t) - np.cos(t))) <= 1e-12


def test_fit_flags_singular_system():
    basis = PhaseBasis("odd", 0.0, phase=linear_phase(1.0, 0, 20, 0))
    fit = fit_solution(basis, (0.0, 1, 0, 1.0), (0.0, 2, 0, 2.0))
    assert fit.ill_conditioned


def test_bumps_bvp_residuals():
    nc = bumps_q(100.0)
    spec = CoefficientSpec.from_named(nc)
    basis = build_phase(spec, *nc.domain, nc.turning_points[0])
    fit = fit_solution(basis, (0.0, 1, 0, 0.0), (10.0, 0, 1, 1.0))
    assert abs(fit(0.0)) <= 1e-10
    assert abs(fit.derivative(10.0) - 1) <= 1e-10


def test_multi_single_turning_point_reduces(monomial_bases):
    spec, basis = monomial_bases(1)
    multi = build_phase_multi(spec, -6.0, 6.0, [TurningPointSpec(0.0, 1, 1)])
    assert len(multi.bases) == 1
    t = np.linspace(-6, 6, 301)
    single = fit_solution(basis, (1.0, 1, 0, 1.0), (1.0, 0, 1, 0.0))
    glued = multi.fit((1.0, 1, 0, 1.0), (1.0, 0, 1, 0.0))
    assert np.max(np.abs(single(t) - glued(t)) / (1 + np.abs(single(t)))) <= 1e-10


def test_multi_junctions_are_c1():
    nc = cosine_q(10.0)
    spec = CoefficientSpec.from_named(nc)
    multi = build_phase_multi(spec, -3.0, 3.0, [tp for tp in nc.turning_points if -3 < tp.c < 3])
    sol = multi.fit((0.0, 1, 0, 1.0), (0.0, 0, 1, 1.0))
    for a, b in multi.pieces[:-1]:
        x = b
        h = 1e-7
        left, right = sol(x - h), sol(x + h)
        dl, dr = sol.derivative(x - h), sol.derivative(x + h)
        scale = 1 + abs(sol(x))
        assert abs(left - right) <= 1e-8 * scale + 2 * h * abs(dl)
        assert abs(dl - dr) <= 1e-8 * (1 + abs(dl)) + 2 * h * 100 * abs(sol(x))


def test_multi_configuration_error_names_subinterval():
    spec = CoefficientSpec(lambda t: -1.0 - 0 * np.asarray(t, float), lambda t: 0 * np.asarray(t, float))
    with pytest.raises(ConfigurationError):
        build_phase_multi(spec, -1.0, 1.0, [])


def test_kummer_residual_exact_phase():
    lam = 5.0
    pf = linear_phase(lam, 0, 2, 0)
    assert np.max(kummer_residual(const_spec(lam * lam), pf, np.linspace(0, 2, 50))) <= 20 * np.finfo(float).eps


def test_kummer_residual_airy_and_sensitivity(airy_basis):
    spec, basis = airy_basis
    t = np.linspace(-10000, -0.5, 1000)
    assert np.max(kummer_residual(spec, basis.phase, t)) <= 1e-10
    pf = basis.phase
    shifted = pf.alpha_pp.coeffs.copy()
    shifted[:, 0] += 1e-3
    bad = PhaseFunction(
        pf.alpha, pf.alpha_p, PiecewiseExpansion(pf.alpha_pp.breakpoints, shifted), pf.anchor
    )
    assert np.max(kummer_residual(spec, bad, np.linspace(-2, -0.5, 100))) > 1e-4


def test_normal_form_constant_damping():
    # y'' + 2 y' + 5 y = 0 has normal form z'' + 4 z = 0
    qt = normal_form(lambda t: 2.0 + 0 * t, lambda t: 0 * t, lambda t: 5.0 + 0 * t)
    assert np.all(qt(np.linspace(0, 1, 5)) == 4.0)

import math
from fractions import Fraction

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from mdimex.analysis import (
    DEFAULT_ALPHA,
    DEFAULT_EPSILON_BASE,
    amplification,
    ap_residual_sweep,
    asymptotic_decompose,
    convergence_study,
    default_gammas,
    fitted_order,
    loglog_slope,
    observed_order,
    omega_weights,
    parse_scheme,
    psi,
    reference_solution,
    stability_scan,
    theta,
)
from mdimex.core import SolverConfig
from mdimex.problems import (
    KapsSpec,
    LinearPrototypeSpec,
    family,
    kaps,
    linear_exact,
    linear_prototype,
)


def exact_omega(alpha: Fraction):
    # Gauss-Jordan in rationals on sum_i w_i x_i^j = [j == 1], x = (1, a, a^2)
    x = [Fraction(1), alpha, alpha * alpha]
    rows = [[xi ** j for xi in x] + [Fraction(int(j == 1))] for j in range(3)]
    for c in range(3):
        piv = next(r for r in range(c, 3) if rows[r][c] != 0)
        rows[c], rows[piv] = rows[piv], rows[c]
        rows[c] = [v / rows[c][c] for v in rows[c]]
        for r in range(3):
            if r != c:
                rows[r] = [a - rows[r][c] * b for a, b in zip(rows[r], rows[c])]
    return [rows[i][3] for i in range(3)]


# ---- omega ------------------------------------------------------------------

def test_omega_pinned_against_rationals():
    expect = exact_omega(Fraction(5, 6))
    assert expect == [Fraction(-30), Fraction(366, 5), Fraction(-216, 5)]
    got = omega_weights(5 / 6)
    np.testing.assert_allclose(got, [float(v) for v in expect], rtol=1e-12)


@settings(max_examples=30)
@given(st.floats(0.05, 0.95))
def test_omega_back_substitution(alpha):
    w = omega_weights(alpha)
    nodes = np.array([1.0, alpha, alpha ** 2])
    res = [w.sum(), w @ nodes - 1.0, w @ nodes ** 2]
    assert max(abs(r) for r in res) <= 1e-12 * np.abs(w).max()


@pytest.mark.parametrize("alpha", [0.0, 1.0, 1.5, -0.2])
def test_omega_rejects_degenerate_alpha(alpha):
    with pytest.raises(ValueError):
        omega_weights(alpha)


def test_default_parameters():
    assert DEFAULT_ALPHA == 5 / 6
    assert DEFAULT_EPSILON_BASE == pytest.approx((5 / 6) ** 2 * 1e-5)


# ---- reference and convergence --------------------------------------------

def test_reference_uses_closed_form_and_initial_state():
    np.testing.assert_array_equal(reference_solution(kaps(KapsSpec(1e-3)), 1.0),
                                  [math.exp(-2), math.exp(-1)])
    p = family("vdp")(1e-3)
    np.testing.assert_array_equal(reference_solution(p, 0.0), p.initial_state())


def test_reference_linear_prototype_against_exponential():
    spec = LinearPrototypeSpec(-1.0, 1.0)
    ref = reference_solution(linear_prototype(spec), 1.0)
    np.testing.assert_allclose(ref, linear_exact(spec, 1.0), atol=1e-10)


def test_observed_and_fitted_order():
    assert observed_order(16.0, 1.0, 0.2, 0.1) == pytest.approx(4.0)
    assert loglog_slope([1.0, 2.0, 4.0], [3.0, 12.0, 48.0]) == pytest.approx(2.0)
    assert math.isnan(loglog_slope([1.0], [1.0]))


def test_convergence_study_kaps():
    dts = [4e-2, 2e-2, 1e-2]
    recs = convergence_study(family("kaps"), SolverConfig(4e-2, 1.0), dts, [1e-1], k_max=2)
    assert [r.dt for r in recs] == dts
    assert recs[0].slope_vs_prev is None
    assert all(r.valid and r.error >= 0 for r in recs)
    assert abs(fitted_order(recs) - 4.0) <= 0.3


def test_convergence_study_marks_failed_cells():
    # a single Newton iteration cannot resolve the stiff stage; the sweep carries on
    cfg = SolverConfig(0.5, 1.0, newton_max_iter=1)
    recs = convergence_study(family("kaps"), cfg, [0.5, 0.25], [1e-6, 1e-1], k_max=2)
    assert len(recs) == 4
    assert any(not r.valid for r in recs)
    assert all(math.isnan(r.error) for r in recs if not r.valid)


def test_convergence_study_rejects_bad_dts():
    with pytest.raises(ValueError):
        convergence_study(family("kaps"), SolverConfig(0.1, 1.0), [0.1, 0.2], [1.0])


def test_delta1_vanishes_for_eps_independent_error():
    fixed = lambda eps: kaps(KapsSpec(0.1))
    out = asymptotic_decompose(fixed, SolverConfig(0.1, 1.0, k_max=2), [0.1, 0.05],
                               epsilon_base=1e-2)
    for d in out:
        assert abs(d.delta1) * d.epsilon_base <= 1e-3 * d.delta0
        assert d.delta0 == pytest.approx(d.delta0_alt, rel=1e-12)


def test_ap_sweep_requires_two_derivative_problem():
    with pytest.raises(TypeError):
        ap_residual_sweep(family("kaps"), SolverConfig(0.1, 0.1), [1e-3])


def test_ap_residual_large_eps_is_not_small():
    sweep = ap_residual_sweep(family("vdp"), SolverConfig(1e-2, 0.5), [1.0])
    assert sweep.residuals[0] > 1e-2
    assert math.isnan(sweep.slope)


# ---- stability ---------------------------------------------------------------

def test_predictor_never_unconditionally_stable_on_imaginary_axis():
    for m in (0.1, 1.0, 3.0):
        assert abs(psi(0.0, m)) ** 2 == pytest.approx(1 + m ** 4 / 4, rel=1e-14)


def test_closed_form_trivial_values():
    assert psi(0.0, 0.0) == 1.0 and theta(0.0, 0.0) == 1.0
    assert psi(-1.0, 0.0) == pytest.approx(0.4, abs=1e-15)
    for scheme in ("predictor", "limit", "fullk2"):
        assert amplification(scheme, 0.0, 0.0) == pytest.approx(1.0, abs=1e-15)


def test_solver_amplification_matches_closed_forms():
    grid = np.linspace(-5, 0, 20), np.linspace(0, 5, 20)
    for lt in grid[0]:
        for mt in grid[1]:
            assert abs(amplification("predictor", lt, mt) - abs(psi(lt, mt))) <= 1e-11
            assert abs(amplification("limit", lt, mt) - abs(theta(lt, mt))) <= 1e-11


def test_limit_scheme_stable_on_rays():
    for g in -np.logspace(-3, 1, 30):
        for m in np.linspace(1e-3, 100, 200):
            assert abs(theta(g * m, m)) <= 1 + 1e-12


def test_quartic_condition_is_the_predictor_condition():
    g, m = sp.symbols("gamma mu", real=True)
    lt = g * m
    num = 1 + sp.I * m + sp.I * m * lt / 2 - m ** 2 / 2
    den = 1 - lt + lt ** 2 / 2 + sp.I * lt * m / 2
    quartic = (1 - g ** 4) / 4 * m ** 4 + (g ** 3 + g) * m ** 3 - 2 * g ** 2 * m ** 2 + 2 * g * m
    diff = sp.expand(num * sp.conjugate(num) - den * sp.conjugate(den))
    assert sp.simplify(diff - quartic) == 0
    # and pointwise, as an inequality
    q = sp.lambdify((g, m), quartic)
    for gv in -np.logspace(-3, 1, 15):
        for mv in np.linspace(0.01, 50, 40):
            mag = abs(psi(gv * mv, mv))
            if abs(mag - 1) > 1e-10:
                assert (q(gv, mv) <= 0) == (mag <= 1)


def test_fullk2_amplification_polynomial_on_imaginary_axis():
    for m in np.linspace(0.1, 3.0, 30):
        expect = 1 + m ** 6 * (m ** 6 + 76 * m ** 4 + 1392 * m ** 2 - 7488) / 82944
        assert abs(amplification("fullk2", 0.0, m) ** 2 - expect) <= 1e-10


def test_scan_fullk2_plateau():
    (pt,) = stability_scan("fullk2", [0.0], mu_max_search=10.0, n_grid=1000)
    assert abs(pt.mu_tilde_max - 2.075) <= 0.01


def test_scan_predictor_damped_rays_and_shrinking_limit():
    pts = stability_scan("predictor", [-1.0, -3.0], mu_max_search=100.0, n_grid=1000)
    assert all(not p.bounded and p.mu_tilde_max == math.inf for p in pts)
    small, larger = stability_scan("predictor", [-1e-3, -1e-1], mu_max_search=100.0, n_grid=1000)
    assert small.bounded and larger.bounded
    assert 0 < small.mu_tilde_max < larger.mu_tilde_max


def test_scan_rejects_positive_gamma_and_unknown_scheme():
    with pytest.raises(ValueError):
        stability_scan("limit", [0.5])
    with pytest.raises(ValueError):
        parse_scheme("rk4")
    with pytest.raises(ValueError):
        amplification("fullk2", -1.0, 1.0, method="closed")


def test_parse_scheme():
    assert parse_scheme("FullK3") == ("fullk", 3)
    assert parse_scheme("limit") == ("limit", 0)


def test_default_gammas():
    g = default_gammas()
    assert len(g) == 40 and g.max() == pytest.approx(-1e-3) and g.min() == pytest.approx(-10.0)

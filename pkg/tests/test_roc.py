"""ROC curve, value functional, envelope, and polyline geometry."""

import numpy as np
import pytest

from swrl import (
    DivergentIntegral,
    FunctionCurve,
    MalformedSequence,
    MarginTooSmall,
    NotConcavePosition,
    NotExterior,
    PhiCurve,
    RocPolyline,
    concave_position_check,
    discretize_envelope,
    feasibility_bound_check,
    ldr_norm_limit,
    perturb_points,
    phi_deriv,
    phi_eval,
    pushout_check,
    shift_boundary_point,
    upper_concave_envelope,
    val_closed_form,
    val_numeric,
    val_piecewise,
)

LAM_GRID = (0.1, 0.3, 0.5, 0.7, 0.9, 0.95)


class TestPhi:
    def test_endpoint_conventions(self):
        for lam in LAM_GRID:
            assert phi_eval(lam, 0.0) == 0.0
            assert phi_eval(lam, 1.0) == 1.0

    def test_reference_value(self):
        assert phi_eval(0.6, 0.5) == pytest.approx(0.6817, abs=1e-4)
        assert phi_eval(0.6, 0.3) == pytest.approx(0.4793, abs=1e-4)

    def test_degenerates_to_diagonal(self):
        grid = np.linspace(0.0, 1.0, 21)
        np.testing.assert_allclose(phi_eval(1e-8, grid), grid, atol=1e-6)
        np.testing.assert_allclose(phi_eval(0.0, grid), grid, atol=0)

    def test_dominates_diagonal(self):
        grid = np.linspace(0.01, 0.99, 50)
        for lam in LAM_GRID:
            assert np.all(phi_eval(lam, grid) > grid)


class TestPhiDeriv:
    def test_unit_slope_point(self):
        # tau = 0 <=> alpha = 1 - Phi(sqrt(mu/8)); slope 1 there
        assert phi_deriv(0.6, 0.4066) == pytest.approx(1.0, abs=1e-3)

    def test_matches_finite_difference(self):
        h = 1e-5
        fd = (phi_eval(0.6, 0.5 + h) - phi_eval(0.6, 0.5 - h)) / (2.0 * h)
        assert phi_deriv(0.6, 0.5) == pytest.approx(fd, rel=1e-6)

    def test_positive_strictly_decreasing(self):
        grid = np.logspace(-6, np.log10(0.999999), 80)
        for lam in (0.3, 0.6, 0.9):
            d = phi_deriv(lam, grid)
            assert np.all(d > 0)
            assert np.all(np.diff(d) < 0)

    def test_endpoint_divergence(self):
        assert phi_deriv(0.6, 1e-12) > phi_deriv(0.6, 1e-6) > 100.0 * phi_deriv(0.6, 0.5)
        assert phi_deriv(0.6, 1.0 - 1e-9) < 1e-2


class TestVal:
    def test_closed_form_values(self):
        assert val_closed_form(0.6) == pytest.approx(1.1180, abs=1e-4)
        assert val_closed_form(0.9) == pytest.approx(1.5146, abs=1e-4)
        assert val_closed_form(0.0) == 1.0

    def test_matches_limit_norm_everywhere(self):
        for lam in LAM_GRID:
            assert val_closed_form(lam) == ldr_norm_limit(lam)

    def test_numeric_parametric_matches_closed_form(self):
        for lam in LAM_GRID:
            assert val_numeric(PhiCurve(lam)) == pytest.approx(val_closed_form(lam), abs=1e-3)

    def test_numeric_generic_matches_closed_form(self):
        for lam in LAM_GRID:
            curve = FunctionCurve(
                lambda a, lam=lam: phi_eval(lam, a), lambda a, lam=lam: phi_deriv(lam, a)
            )
            got = val_numeric(curve, method="generic")
            assert got == pytest.approx(val_closed_form(lam), abs=1e-3)

    def test_identity_curve(self):
        curve = FunctionCurve(lambda a: a, lambda a: np.ones_like(np.asarray(a, float)))
        assert val_numeric(curve) == pytest.approx(1.0, abs=1e-4)

    def test_divergent_integrand_detected(self):
        # phi = sqrt(alpha): squared slope ~ 1/(4 alpha), log-divergent
        curve = FunctionCurve(np.sqrt, lambda a: 0.5 / np.sqrt(a))
        with pytest.raises(DivergentIntegral):
            val_numeric(curve, method="generic")


class TestPolylines:
    def test_val_piecewise_reference(self):
        got = val_piecewise([[0, 0], [0.5, 0.9], [1, 1]])
        assert got == pytest.approx(np.sqrt(1.64), abs=1e-12)

    def test_val_piecewise_diagonal(self):
        assert val_piecewise([[0, 0], [1, 1]]) == 1.0

    def test_collinear_refinement_invariant(self):
        coarse = val_piecewise([[0, 0], [0.5, 0.9], [1, 1]])
        fine = val_piecewise([[0, 0], [0.25, 0.45], [0.5, 0.9], [1, 1]])
        assert fine == pytest.approx(coarse, abs=1e-12)

    def test_val_piecewise_requires_concave_position(self):
        with pytest.raises(NotConcavePosition):
            val_piecewise([[0, 0], [0.5, 0.4], [1, 1]])

    def test_concave_position_check(self):
        assert concave_position_check([[0, 0], [0.5, 0.9], [1, 1]])
        assert not concave_position_check([[0, 0], [0.5, 0.4], [1, 1]])
        assert concave_position_check([[0, 0], [1, 1]])

    def test_malformed_sequences(self):
        with pytest.raises(MalformedSequence):
            concave_position_check([[0, 0], [0.5, 0.6], [0.5, 0.7], [1, 1]])
        with pytest.raises(MalformedSequence):
            concave_position_check([[0.1, 0], [1, 1]])
        with pytest.raises(MalformedSequence):
            concave_position_check([[0, 0], [1, 0.9]])

    def test_interpolant_is_concave(self):
        poly = RocPolyline(np.array([[0, 0], [0.2, 0.5], [0.6, 0.85], [1, 1]]))
        rng = np.random.default_rng(3)
        for _ in range(200):
            x, y = np.sort(rng.random(2))
            mid = poly.interpolate((x + y) / 2.0)
            assert mid >= (poly.interpolate(x) + poly.interpolate(y)) / 2.0 - 1e-12


@pytest.fixture(scope="module")
def envelope_06():
    return upper_concave_envelope(0.6, (0.3, 0.9))


class TestEnvelope:
    def test_tangencies_bracket_exterior(self, envelope_06):
        assert 0.0 < envelope_06.touch_lo < 0.3 < envelope_06.touch_hi < 1.0

    def test_tangency_residuals(self, envelope_06):
        env = envelope_06
        assert abs(env.slope_lo - phi_deriv(0.6, env.touch_lo)) < 1e-8
        assert abs(env.slope_hi - phi_deriv(0.6, env.touch_hi)) < 1e-8
        assert env.slope_lo > env.slope_hi > 0

    def test_passes_through_exterior_point_exactly(self, envelope_06):
        assert envelope_06.psi(0.3) == 0.9

    def test_dominates_base_curve_on_grid(self, envelope_06):
        grid = np.linspace(0.0, 1.0, 1001)
        assert np.all(envelope_06.psi(grid) >= phi_eval(0.6, grid) - 1e-12)

    def test_interior_point_rejected(self):
        below = phi_eval(0.6, 0.3) - 0.01
        with pytest.raises(NotExterior):
            upper_concave_envelope(0.6, (0.3, below))

    def test_boundary_points_rejected(self):
        with pytest.raises(ValueError):
            upper_concave_envelope(0.6, (0.0, 0.5))
        with pytest.raises(ValueError):
            upper_concave_envelope(0.6, (0.3, 1.0))

    def test_pushout_strictly_larger(self, envelope_06):
        val_psi, val_phi, strict = pushout_check(envelope_06)
        assert strict
        assert val_psi > val_phi
        assert val_phi == pytest.approx(val_closed_form(0.6), abs=1e-3)

    def test_pushout_margin_guard(self):
        near = upper_concave_envelope(0.6, (0.3, phi_eval(0.6, 0.3) + 1e-6))
        with pytest.raises(MarginTooSmall):
            pushout_check(near)

    def test_shift_boundary_point(self):
        a, b = shift_boundary_point((0.0, 0.5), 0.01)
        assert (a, b) == (0.01, pytest.approx(0.505))
        assert b > phi_eval(0.6, a)


class TestDiscretization:
    def test_end_to_end_value_chain(self, envelope_06):
        val_psi, val_phi, _ = pushout_check(envelope_06)
        eps = val_psi**2 - val_phi**2
        u = discretize_envelope(envelope_06, eps, 0.05)
        assert concave_position_check(u.points)
        assert val_piecewise(u) > val_phi
        assert val_piecewise(u) ** 2 >= val_psi**2 - 2.0 * eps / 3.0 - 1e-6

    def test_includes_anchor_points(self, envelope_06):
        u = discretize_envelope(envelope_06, 0.02, 0.05)
        for anchor in (envelope_06.touch_lo, 0.3, envelope_06.touch_hi):
            assert np.any(np.isclose(u.alphas, anchor, atol=1e-12))

    def test_tail_budgets_respected(self, envelope_06):
        eps = 0.02
        u = discretize_envelope(envelope_06, eps, 0.05)
        curve = envelope_06.curve
        a1, a_last = u.alphas[1], u.alphas[-2]
        assert curve.sq_slope_integral(0.0, a1) <= eps / 6.0 + 1e-6
        assert curve.sq_slope_integral(a_last, 1.0) <= eps / 6.0 + 1e-6

    def test_consecutive_slope_ratio_on_curved_parts(self, envelope_06):
        gamma = 0.05
        u = discretize_envelope(envelope_06, 0.02, gamma)
        alphas = u.alphas
        on_left_curve = (alphas > 0) & (alphas <= envelope_06.touch_lo)
        idx = np.where(on_left_curve)[0]
        for j, k in zip(idx, idx[1:]):
            if k != j + 1:
                continue
            d_lo = phi_deriv(0.6, alphas[j])
            d_hi = phi_deriv(0.6, alphas[k])
            assert d_lo <= (1.0 + gamma) * d_hi * (1.0 + 1e-9)

    def test_finer_gamma_refines_value(self, envelope_06):
        eps = 0.05
        coarse = val_piecewise(discretize_envelope(envelope_06, eps, 0.05))
        fine = val_piecewise(discretize_envelope(envelope_06, eps, 0.025))
        assert fine >= coarse - 2e-4

    def test_point_budget_guard(self, envelope_06):
        from swrl import BudgetInfeasible

        with pytest.raises(BudgetInfeasible):
            discretize_envelope(envelope_06, 0.02, 1e-7, max_points=100)


class TestPerturbation:
    @pytest.fixture(scope="class")
    def u_and_v(self, envelope_06):
        u = discretize_envelope(envelope_06, 0.02, 0.05)
        return u, perturb_points(u, 0.02)

    def test_interior_strictly_below(self, u_and_v):
        u, v = u_and_v
        assert np.all(v.points[1:-1, 1] < u.points[1:-1, 1])
        assert np.array_equal(v.points[[0, -1]], u.points[[0, -1]])
        assert np.array_equal(v.alphas, u.alphas)

    def test_concave_position_preserved(self, u_and_v):
        _, v = u_and_v
        assert concave_position_check(v.points)

    def test_value_loss_bounded_by_gamma(self, u_and_v):
        u, v = u_and_v
        assert val_piecewise(v) >= (1.0 - 0.02) * val_piecewise(u)
        assert val_piecewise(v) > val_closed_form(0.6)

    def test_displacement_vanishes_with_gamma(self, u_and_v):
        u, _ = u_and_v
        v_tiny = perturb_points(u, 1e-5)
        assert np.max(np.abs(v_tiny.points[:, 1] - u.points[:, 1])) < 1e-4


class TestFeasibilityBound:
    def test_reference_points(self):
        assert feasibility_bound_check((0.5, 0.6817), 1.25)
        assert not feasibility_bound_check((0.1, 0.9), 1.25)

    def test_diagonal_always_feasible(self):
        for a in (0.1, 0.5, 0.9):
            assert feasibility_bound_check((a, a), 1.0)

    def test_band_below_curve_feasible(self):
        """Everything between the diagonal and the curve satisfies the
        second-moment constraint at the matching norm."""
        for lam in (0.3, 0.6, 0.9):
            bound = val_closed_form(lam) ** 2
            for alpha in np.linspace(0.05, 0.95, 19):
                top = phi_eval(lam, alpha)
                for beta in (alpha, max(alpha, top - 0.05), top - 1e-9, (alpha + top) / 2.0):
                    if not 0.0 < beta < 1.0:
                        continue
                    assert feasibility_bound_check((alpha, beta), bound)

    def test_interior_only(self):
        with pytest.raises(ValueError):
            feasibility_bound_check((0.0, 0.5), 1.25)

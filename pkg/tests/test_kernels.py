import math
from decimal import Decimal, getcontext

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nlh.grid import Grid, from_callable
from nlh.kernels import (INF, HighOrderParams, KernelParams, ParameterError,
                         SamplingPlan, backward, check_conditions,
                         fractional_symbol_constant, kernel_from_dict,
                         make_expression_kernel, make_fractional_heat,
                         make_translation_invariant, mollify, rescale,
                         sphere_quadrature, unit_ball_volume, zeta0)
from nlh.presets import cosine_kernel, fractional_heat, xdep_kernel

PLAN = SamplingPlan(box_radius=6.0, n_times=4, n_space=8, n_radii=16, radius_min=0.01)


class TestParams:
    def test_valid_low_order(self):
        p = KernelParams(N=1, alpha=0.5, omega=0.1, Lambda=2.0)
        assert p.gamma == pytest.approx(0.2)  # midpoint of (0, 0.4)

    def test_valid_high_order(self):
        p = KernelParams(N=1, alpha=1.5, Lambda=2.0,
                         high_order=HighOrderParams(nu=0.6, s0=1.0, tau=0.5))
        lo, hi = p.gamma_bounds()
        assert (lo, hi) == (0.5, pytest.approx(0.9))
        assert p.gamma == pytest.approx(0.7)

    @pytest.mark.parametrize("kwargs,needle", [
        (dict(N=1, alpha=2.5), "alpha"),
        (dict(N=1, alpha=0.5, omega=0.6), "omega"),
        (dict(N=1, alpha=0.5, Lambda=0.5), "Lambda"),
        (dict(N=1, alpha=0.5, zeta=0.0), "zeta"),
        (dict(N=1, alpha=1.5), "high_order"),
        (dict(N=1, alpha=0.5, high_order=HighOrderParams(nu=0.5)), "high_order"),
        (dict(N=1, alpha=1.5, high_order=HighOrderParams(nu=0.4)), "nu"),
        (dict(N=1, alpha=1.5, high_order=HighOrderParams(nu=0.6, s0=-1)), "s0"),
        (dict(N=1, alpha=1.5, high_order=HighOrderParams(nu=0.6, tau=-1)), "tau"),
        (dict(N=1, alpha=1.9, omega=0.5, high_order=HighOrderParams(nu=0.95)), "nu \\+ omega"),
        (dict(N=1, alpha=0.5, gamma=3.0), "gamma"),
        (dict(N=3, alpha=0.5), "N"),
    ])
    def test_rejects_naming_field(self, kwargs, needle):
        with pytest.raises(ParameterError, match=needle):
            KernelParams(**kwargs)


class TestZeta0:
    def test_1d(self):
        # independent high-precision evaluation: 2 * 11^(1/0.4) = 2 * sqrt(11^5)
        getcontext().prec = 40
        expected = 2 * Decimal(11**5).sqrt()
        assert zeta0(1, 0.4) == pytest.approx(float(expected), rel=1e-12)
        assert zeta0(1, 0.4) == pytest.approx(802.63, abs=0.01)

    def test_2d(self):
        getcontext().prec = 40
        expected = 2 * (Decimal(11) ** (Decimal(10) / Decimal(3)))
        assert zeta0(2, 0.3) == pytest.approx(float(expected), rel=1e-12)
        assert zeta0(2, 0.3) > (8 / math.pi) ** 0.5

    def test_ball_branch(self):
        # a hypothetical large gamma would give the volume branch; the value
        # itself is max{4, 2*11^(1/3)} but gamma = 3 is outside every
        # admissible range and the parameter set rejects it
        assert zeta0(1, 3.0) == pytest.approx(max(4.0, 2 * 11 ** (1 / 3)))
        with pytest.raises(ParameterError, match="gamma"):
            KernelParams(N=1, alpha=0.5, gamma=3.0)

    def test_rejects(self):
        with pytest.raises(ParameterError):
            zeta0(0, 0.4)
        with pytest.raises(ParameterError):
            zeta0(1, -0.1)


def test_unit_ball_volume():
    assert unit_ball_volume(1) == pytest.approx(2.0)
    assert unit_ball_volume(2) == pytest.approx(math.pi)


def test_symbol_constant_alpha_one():
    # closed form reduces to 1/pi at (N, alpha) = (1, 1)
    assert fractional_symbol_constant(1, 1.0) == pytest.approx(1.0 / math.pi, rel=1e-14)


def test_symbol_constant_matches_quadrature():
    # independent oracle: c_alpha * 2*int_0^inf (1-cos u)/u^(1+alpha) du = 1
    alpha = 0.5
    c = fractional_symbol_constant(1, alpha)
    u = np.linspace(1e-9, 4000.0, 4_000_000)
    integrand = (1 - np.cos(u)) / u ** (1 + alpha)
    integral = np.trapezoid(integrand, u)
    # tail: 1/u^{1+alpha} integrates to u^-alpha/alpha; oscillation averages to 1
    integral += 4000.0**-alpha / alpha
    assert 2 * c * integral == pytest.approx(1.0, rel=1e-3)


class TestFractionalHeat:
    def test_constant_everywhere(self, heat05):
        c = fractional_symbol_constant(1, 0.5)
        vals = heat05(0.3, np.array([0.0, 1.0]), np.array([0.5, -2.0]))
        np.testing.assert_allclose(vals, c)
        assert heat05.translation_invariant and heat05.time_independent

    def test_passes_conditions_with_zero_defects(self, heat15):
        rep = check_conditions(heat15, PLAN)
        assert rep.passed
        assert rep.symmetry_max_defect == 0.0
        assert rep.holder_defect == pytest.approx(0.0, abs=1e-15)
        assert np.all(rep.cancellation_profile[:, 1] == 0.0)

    def test_lambda_lifted_to_cover_constant(self):
        k = fractional_heat(0.5)
        c = fractional_symbol_constant(1, 0.5)
        assert k.params.Lambda >= 1.0 / c


class TestTranslationInvariant:
    def test_cancellation_identically_zero(self):
        ker = cosine_kernel(1.5)
        rep = check_conditions(ker, PLAN)
        assert rep.passed
        assert np.all(rep.cancellation_profile[:, 1] <= 1e-15)

    def test_constant_profile_matches_fractional_heat(self, heat05):
        c = fractional_symbol_constant(1, 0.5)
        ker = make_translation_invariant(
            lambda z: np.full_like(np.asarray(z, dtype=float), c),
            KernelParams(N=1, alpha=0.5, Lambda=heat05.params.Lambda))
        x = np.linspace(-2, 2, 9)
        z = np.linspace(0.1, 3, 7)
        np.testing.assert_array_equal(ker(0.0, x[:, None], z[None, :]),
                                      heat05(0.0, x[:, None], z[None, :]))

    def test_odd_profile_rejected_with_witness(self):
        with pytest.raises(ParameterError, match="not even"):
            make_translation_invariant(lambda z: 1.0 + 0.9 * np.sin(np.asarray(z)),
                                       KernelParams(N=1, alpha=0.5, Lambda=2.0))


def test_upper_bound_failure_has_witness():
    # with omega > 0 the bound near z = 0 is Lambda(1 + |z|^omega) < 2 Lambda,
    # so a constant profile at 2 Lambda must fail with a small-|z| witness
    p = KernelParams(N=1, alpha=0.5, omega=0.1, Lambda=2.0)
    ker = make_translation_invariant(
        lambda z: np.full_like(np.asarray(z, dtype=float), 2 * p.Lambda), p)
    rep = check_conditions(ker, PLAN)
    assert not rep.verdicts["upper_bound"].passed
    assert rep.upper_bound_margin < 0
    wit = rep.verdicts["upper_bound"].witness
    assert wit is not None and abs(wit["z"][0]) < 1.0


def test_remark13_and_15_on_holder_kernel():
    # cosine kernel passes (1.4) with tau = 0.5, s0 = 1; Remark 1.3's implied
    # cancellation bound and Remark 1.5's all-s extension must both hold
    rep = check_conditions(cosine_kernel(1.5), PLAN)
    assert rep.verdicts["holder"].passed
    assert rep.remark13_bound_holds
    assert rep.remark13_measured_ratio <= 1.0
    assert rep.remark15_margin >= 0.0


def test_xdep_kernel_symmetric():
    rep = check_conditions(xdep_kernel(0.5), PLAN)
    assert rep.passed
    assert rep.symmetry_max_defect <= 1e-13


class TestBackward:
    def test_time_independent_returned_unchanged(self, heat05):
        assert backward(heat05, 1.0) is heat05

    def test_definition_unfolding(self):
        ker = make_expression_kernel("1 + t/(1+t)", KernelParams(N=1, alpha=0.5, Lambda=2.0))
        back = backward(ker, 1.0)
        x, z = np.zeros(3), np.ones(3)
        np.testing.assert_allclose(back(0.25, x, z), ker(0.75, x, z))

    def test_involution(self):
        ker = make_expression_kernel("1 + t/(1+t)", KernelParams(N=1, alpha=0.5, Lambda=2.0))
        twice = backward(backward(ker, 1.0), 1.0)
        x, z = np.linspace(-1, 1, 5), np.linspace(0.2, 2, 5)
        for t in (0.0, 0.3, 1.0):
            np.testing.assert_allclose(twice(t, x, z), ker(t, x, z), rtol=1e-15)

    def test_rejects_infinite_tbar(self, heat05):
        ker = make_expression_kernel("1 + t", KernelParams(N=1, alpha=0.5, Lambda=2.0))
        with pytest.raises(ParameterError):
            backward(ker, math.inf)


class TestRescale:
    def test_identity_at_unit_scale(self, heat05, grid256):
        w0 = from_callable(grid256, lambda x: np.exp(-(x**2)))
        ker, w = rescale(heat05, w0, 1.0)
        assert ker is heat05 and w is w0

    def test_constant_profile_invariant(self, heat05, grid256):
        w0 = from_callable(grid256, lambda x: np.exp(-(x**2)))
        ker, _ = rescale(heat05, w0, 0.5)
        x, z = np.zeros(3), np.linspace(0.5, 2, 3)
        np.testing.assert_allclose(ker(0.0, x, z), heat05(0.0, x, z))

    def test_zeta_lifts_to_zeta0(self, grid256):
        z0 = zeta0(1, 0.2)
        p = KernelParams(N=1, alpha=0.5, zeta=0.5 * z0, Lambda=2.0, gamma=0.2)
        ker = make_translation_invariant(
            lambda z: np.where(np.abs(z) <= 0.5 * z0, 1.0, 0.7), p, smooth=False)
        w0 = from_callable(grid256, lambda x: np.exp(-(x**2)))
        scaled, w = rescale(ker, w0, 0.5)
        assert scaled.params.zeta == pytest.approx(z0)
        # resampled field is w0(eps x)
        np.testing.assert_allclose(w.values, np.exp(-((0.5 * grid256.axis) ** 2)), atol=1e-3)

    def test_rejects_out_of_range(self, heat05, grid256):
        w0 = from_callable(grid256, lambda x: np.exp(-(x**2)))
        with pytest.raises(ParameterError):
            rescale(heat05, w0, 1.5)


class TestMollify:
    def test_constant_stays_constant(self):
        p = KernelParams(N=1, alpha=0.5, Lambda=2.0)
        c = 1.3
        ker = make_translation_invariant(lambda z: np.full_like(np.asarray(z, float), c), p)
        mol = mollify(ker, 0.01)
        z = np.linspace(0.1, 50.0, 20)  # well inside 1/eps - eps
        np.testing.assert_allclose(mol(0.5, np.zeros(20), z), c, rtol=1e-12)
        assert mol.params.zeta == INF
        assert mol.params.Lambda == 2 * p.Lambda

    def test_adjusted_params_pass_conditions(self):
        p = KernelParams(N=1, alpha=0.5, zeta=4.0, Lambda=2.0)
        ker = make_translation_invariant(lambda z: 1.0 + 0.4 * np.cos(np.abs(z)), p)
        mol = mollify(ker, 0.2)
        assert mol.params.zeta == 2.0 and mol.params.Lambda == 4.0
        rep = check_conditions(mol, SamplingPlan(box_radius=3.0, n_times=2, n_space=4,
                                                 n_radii=10, radius_min=0.05, radius_max=3.0))
        assert rep.passed

    def test_smoothing_error_of_eps(self):
        p = KernelParams(N=1, alpha=0.5, Lambda=2.0)
        ker = make_translation_invariant(lambda z: 1.0 + 0.4 * np.cos(np.abs(z)), p)
        z = np.linspace(0.2, 3.0, 24)
        x = np.zeros_like(z)
        base = ker(0.0, x, z)
        d1 = np.abs(mollify(ker, 0.2)(0.0, x, z) - base).max()
        d2 = np.abs(mollify(ker, 0.1)(0.0, x, z) - base).max()
        # modulus of continuity of the profile is <= 0.4 |dz|: C ~ 0.4 here
        assert d1 <= 0.4 * 0.2 * 2
        assert d2 <= 0.6 * d1

    def test_eps_too_large(self):
        p = KernelParams(N=1, alpha=0.5, zeta=1.0, Lambda=2.0)
        ker = make_translation_invariant(lambda z: np.ones_like(np.asarray(z, float)), p)
        with pytest.raises(ParameterError):
            mollify(ker, 0.5)


class TestJsonLoading:
    def test_fractional_heat_doc(self):
        ker = kernel_from_dict({"type": "fractional_heat",
                                "params": {"N": 1, "alpha": 1.5, "nu": 0.6, "s0": "inf"}})
        assert ker.params.s0 == INF

    def test_translation_invariant_doc(self):
        ker = kernel_from_dict({"type": "translation_invariant",
                                "params": {"N": 1, "alpha": 0.5, "Lambda": 2.0},
                                "profile": "1 + 0.5*cos(r)"})
        np.testing.assert_allclose(ker(0, 0.0, np.array([1.0])), 1 + 0.5 * np.cos(1.0))

    def test_custom_expression_doc(self):
        ker = kernel_from_dict({"type": "custom_expression",
                                "params": {"N": 1, "alpha": 0.5, "Lambda": 1.7},
                                "profile": "1 + 0.4*cos(x + z/2)*cos(r)"})
        assert not ker.translation_invariant

    def test_unknown_type(self):
        with pytest.raises(ParameterError):
            kernel_from_dict({"type": "nope", "params": {"alpha": 0.5}})


@settings(max_examples=20, deadline=None)
@given(t=st.floats(0, 1), x=st.floats(-3, 3), s=st.floats(0.01, 5))
def test_symmetry_identity_sampled(t, x, s):
    ker = xdep_kernel(0.5)
    a = float(ker(t, np.array(x), np.array(s)))
    b = float(ker(t, np.array(x + s), np.array(-s)))
    assert abs(a - b) <= 1e-12 * (1 + abs(a))


def test_sphere_quadrature_weights():
    dirs, w = sphere_quadrature(1)
    assert w.sum() == pytest.approx(2.0)
    dirs, w = sphere_quadrature(2, 64)
    assert w.sum() == pytest.approx(2 * math.pi)
    np.testing.assert_allclose(np.linalg.norm(dirs, axis=1), 1.0)


class TestDerivedKernelsPreserveConditions:
    def test_backward_preserves_pass(self):
        ker = make_expression_kernel("1 + t/(1+t)", KernelParams(N=1, alpha=0.5, Lambda=2.0))
        assert check_conditions(ker, PLAN).passed
        assert check_conditions(backward(ker, 1.0), PLAN).passed

    def test_rescale_preserves_pass_with_new_params(self):
        z0 = zeta0(1, 0.2)
        p = KernelParams(N=1, alpha=0.5, zeta=0.5 * z0, Lambda=2.0, gamma=0.2)
        ker = make_translation_invariant(
            lambda z: np.where(np.abs(z) <= 0.5 * z0, 1.0, 0.7), p, smooth=False)
        grid = Grid(1, 4.0, 64)
        w0 = from_callable(grid, lambda x: np.exp(-(x**2)))
        plan = SamplingPlan(box_radius=4.0, n_times=2, n_space=8, n_radii=20,
                            radius_min=0.05, radius_max=2 * z0)
        assert check_conditions(ker, plan).passed
        scaled, _ = rescale(ker, w0, 0.5)
        assert check_conditions(scaled, plan).passed

    def test_rescale_preserves_fail(self):
        p = KernelParams(N=1, alpha=0.5, omega=0.1, Lambda=2.0)
        bad = make_translation_invariant(
            lambda z: np.full_like(np.asarray(z, float), 2 * p.Lambda), p)
        grid = Grid(1, 4.0, 64)
        w0 = from_callable(grid, lambda x: np.exp(-(x**2)))
        scaled, _ = rescale(bad, w0, 0.5)
        assert not check_conditions(scaled, PLAN).passed


def test_eval_failure_carries_sample_point():
    from nlh.kernels import Kernel, KernelEvalError

    def bad(t, x, z):
        raise FloatingPointError("boom")

    ker = Kernel(bad, KernelParams(N=1, alpha=0.5, Lambda=2.0))
    with pytest.raises(KernelEvalError) as exc:
        check_conditions(ker, PLAN)
    assert exc.value.point is not None

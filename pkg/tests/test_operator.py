import numpy as np
import pytest

from nlh.grid import Grid, GridFunction, from_callable, power_field
from nlh.kernels import KernelParams, make_translation_invariant
from nlh.operator import (OperatorFactory, apply, gamma_bound_profile,
                          verify_duality, verify_mean_zero)
from nlh.presets import cosine_kernel, fractional_heat, xdep_kernel


def radial_symbol(kernel, xi, alpha):
    """Independent oracle: 2 int_0^inf (1-cos(xi z)) k(z) z^(-1-alpha) dz."""
    z = np.geomspace(1e-8, 1e5, 400_000)
    prof = kernel(0.0, np.zeros_like(z), z)
    integrand = (1 - np.cos(xi * z)) * prof * z ** (-1 - alpha)
    return 2 * np.trapezoid(integrand, z)


class TestApply:
    def test_constants_in_null_space(self, heat05):
        grid = Grid(1, 8.0, 128)
        f = GridFunction(grid, np.full(128, 5.0), exterior="constant")
        out = apply(heat05, f)
        assert np.abs(out.values).max() <= 1e-12 * 6.0

    @pytest.mark.parametrize("alpha,xi", [(0.5, 1.0), (1.5, 1.0), (0.5, 2.0)])
    def test_symbol_matches_radial_quadrature(self, alpha, xi):
        ker = fractional_heat(alpha)
        grid = Grid(1, 16 * np.pi, 1024)
        f = from_callable(grid, lambda x: np.cos(xi * x))
        out = apply(ker, f)
        interior = np.abs(grid.axis) <= grid.box_radius / 2
        # measured multiplier on cos(xi x)
        proj = out.values[interior] @ np.cos(xi * grid.axis)[interior]
        norm = (np.cos(xi * grid.axis)[interior] ** 2).sum()
        measured = proj / norm
        oracle = radial_symbol(ker, xi, alpha)
        assert measured == pytest.approx(oracle, rel=0.01)
        assert oracle == pytest.approx(xi**alpha, rel=0.01)

    def test_cosine_kernel_symbol_oracle(self):
        # non-constant even profile: the operator still acts as a Fourier
        # multiplier; compare against the independent radial quadrature
        ker = cosine_kernel(1.5)
        grid = Grid(1, 16 * np.pi, 1024)
        f = from_callable(grid, np.cos)
        out = apply(ker, f)
        interior = np.abs(grid.axis) <= grid.box_radius / 2
        cosx = np.cos(grid.axis)[interior]
        measured = (out.values[interior] @ cosx) / (cosx @ cosx)
        assert measured == pytest.approx(radial_symbol(ker, 1.0, 1.5), rel=0.01)

    def test_linearity(self, heat05):
        grid = Grid(1, 8.0, 192)
        f = from_callable(grid, lambda x: np.exp(-(x**2)))
        g = from_callable(grid, lambda x: np.exp(-((x - 1) ** 2) / 2))
        fac = OperatorFactory(heat05, grid)
        a, b = 2.0, -3.0
        combo = f.with_values(a * f.values + b * g.values)
        lhs = apply(heat05, combo, factory=fac).values
        rhs = a * apply(heat05, f, factory=fac).values + b * apply(heat05, g, factory=fac).values
        scale = np.abs(rhs).max()
        assert np.abs(lhs - rhs).max() <= 1e-10 * (1 + scale)

    def test_power_law_bound_low_alpha(self, heat05):
        # |T(|.|^gamma)(x)| <= C |x|^(gamma-alpha)(1+|x|^omega) on [4h, R/2]
        gamma = heat05.params.gamma
        grid = Grid(1, 8.0, 512)
        f = power_field(grid, gamma)
        out = apply(heat05, f, exterior_fn=lambda y: np.abs(y) ** gamma)
        sel = (np.abs(grid.axis) >= 4 * grid.h) & (np.abs(grid.axis) <= 4.0)
        ratio = np.abs(out.values[sel]) / np.abs(grid.axis[sel]) ** (gamma - 0.5)
        assert np.isfinite(ratio).all()
        assert ratio.max() < 10.0

    @pytest.mark.parametrize("n", [128, 256])
    def test_refinement_convergence(self, heat15, n):
        # halving h changes the output by less than the reported estimate at
        # >= 95% of interior points
        g1, g2 = Grid(1, 12.0, n), Grid(1, 12.0, 2 * n)
        fn = lambda x: np.exp(-(x**2)) * np.cos(2 * x)
        o1 = apply(heat15, from_callable(g1, fn))
        o2 = apply(heat15, from_callable(g2, fn))
        change = np.abs(o1.values - o2.values[::2])
        interior = np.abs(g1.axis) <= 0.9 * g1.box_radius
        frac = np.mean(change[interior] <= o1.quadrature_error_estimate[interior])
        assert frac >= 0.95

    def test_error_estimate_finite_nonnegative(self, heat05):
        grid = Grid(1, 8.0, 128)
        out = apply(heat05, from_callable(grid, lambda x: np.exp(-(x**2))))
        err = out.quadrature_error_estimate
        assert np.all(np.isfinite(err)) and np.all(err >= 0)
        assert out.near_field_radius == pytest.approx(2 * grid.h)


class TestDuality:
    def test_identical_arguments_exact_zero(self, heat05, gaussian_pair):
        f, _ = gaussian_pair
        assert verify_duality(heat05, f, f).residual == 0.0

    def test_gaussian_pair_within_error_estimate(self, heat05, gaussian_pair):
        f, g = gaussian_pair
        res = verify_duality(heat05, f, g)
        assert res.warning is None
        out = apply(heat05, g)
        quad_scale = float(np.median(out.quadrature_error_estimate))
        assert res.residual <= 10 * max(quad_scale, 1e-12)

    def test_power_law_second_argument(self, heat05):
        # g = |x|^gamma truncated smoothly at the box
        grid = Grid(1, 12.0, 384)
        gamma = heat05.params.gamma
        f = from_callable(grid, lambda x: np.exp(-(x**2)))
        g = from_callable(grid, lambda x: np.abs(x) ** gamma * np.exp(-((x / 5.0) ** 6)))
        res = verify_duality(heat05, f, g)
        assert res.residual <= 1e-6

    def test_non_decaying_input_warns(self, heat05):
        grid = Grid(1, 12.0, 384)
        f = from_callable(grid, np.cos)
        g = from_callable(grid, lambda x: np.exp(-(x**2)))
        assert verify_duality(heat05, f, g).warning is not None


class TestMeanZero:
    def test_zero_input(self, heat05):
        grid = Grid(1, 8.0, 128)
        f = GridFunction(grid, np.zeros(128))
        assert verify_mean_zero(heat05, f) == 0.0

    @pytest.mark.parametrize("maker", [fractional_heat, lambda a: cosine_kernel(1.5)])
    def test_bump_residual_small(self, maker):
        ker = maker(0.5)
        grid = Grid(1, 12.0, 384)
        f = from_callable(grid, lambda x: np.exp(-(x**2)))
        assert verify_mean_zero(ker, f) <= 1e-9


class TestGammaProfile:
    def test_fractional_heat_stable(self, heat05):
        xs = np.linspace(0.5, 4.0, 10)
        prof = gamma_bound_profile(heat05, xs, box_radius=8.0, n_points=512)
        assert np.isfinite(prof.max_ratio)
        assert prof.drift < 0.10

    def test_growth_captured_by_normalizer(self, heat05):
        # the ratio at the largest |x| must not dominate the mid-range max
        xs = np.linspace(0.5, 4.0, 10)
        prof = gamma_bound_profile(heat05, xs, box_radius=8.0, n_points=512)
        mid = prof.ratio[(xs >= 1.0) & (xs <= 3.0)].max()
        assert prof.ratio[-1] <= 2 * mid

    def test_high_alpha_normalizer(self):
        ker = cosine_kernel(1.5)
        xs = np.linspace(0.5, 4.0, 10)
        prof = gamma_bound_profile(ker, xs, box_radius=8.0, n_points=512)
        assert np.isfinite(prof.max_ratio) and prof.drift < 0.10

    def test_origin_guard(self, heat05):
        with pytest.raises(ValueError, match="4h"):
            gamma_bound_profile(heat05, np.array([1e-5]), box_radius=8.0, n_points=128)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_random_even_profile_self_adjoint(seed):
    # any even nonnegative profile yields an exactly symmetric weight matrix,
    # hence machine-zero duality residuals on decaying pairs
    from nlh.kernels import KernelParams, make_translation_invariant

    rng = np.random.Generator(np.random.PCG64(seed))
    coef = rng.uniform(-0.2, 0.2, size=3)

    def profile(z):
        r = np.abs(np.asarray(z, dtype=float))
        return 1.0 + sum(c * np.cos((j + 1) * r) for j, c in enumerate(coef))

    ker = make_translation_invariant(profile, KernelParams(N=1, alpha=0.5, Lambda=2.0))
    grid = Grid(1, 10.0, 256)
    f = from_callable(grid, lambda x: np.exp(-((x - 0.5) ** 2)))
    g = from_callable(grid, lambda x: np.exp(-((x + 1.0) ** 2) / 1.5))
    assert verify_duality(ker, f, g).residual <= 1e-12
    assert verify_mean_zero(ker, f) <= 1e-12


def test_power_law_matches_independent_pv_quadrature(heat05):
    # dense symmetric PV quadrature of int (|x|^g - |y|^g) K dy with analytic
    # far remainder, fully independent of the operator machinery
    gamma = heat05.params.gamma
    alpha = heat05.params.alpha
    c = float(heat05(0, 0.0, 1.0))

    def reference(x):
        z = np.geomspace(1e-10, 1e12, 2_000_001)
        integrand = (2 * np.abs(x) ** gamma - np.abs(x + z) ** gamma
                     - np.abs(x - z) ** gamma) * c * z ** (-1 - alpha)
        val = np.trapezoid(integrand, z)
        return val - 2 * c * z[-1] ** (gamma - alpha) / (alpha - gamma)

    grid = Grid(1, 8.0, 1024)
    f = power_field(grid, gamma)
    out = apply(heat05, f, exterior_fn=lambda y: np.abs(y) ** gamma)
    for x in (1.0, 2.0, 3.0):
        i = int(np.argmin(np.abs(grid.axis - x)))
        assert out.values[i] == pytest.approx(reference(grid.axis[i]), rel=0.02)

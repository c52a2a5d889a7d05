import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nlh.dualclass import (band_mollifier, band_mollifier_constant,
                           direct_seminorm, holder_estimate, membership,
                           pairing, verify_transport_duality)
from nlh.evolution import make_double_bump
from nlh.grid import Grid, GridFunction, from_callable
from nlh.presets import fractional_heat, tdep_kernel


@pytest.fixture(scope="module")
def grid():
    return Grid(1, 8.0, 512)


@pytest.fixture(scope="module")
def double_bump(grid):
    return make_double_bump(grid, 0.5, sig=0.22, sep=0.26)


class TestMembership:
    def test_zero_function(self, grid):
        rep = membership(GridFunction(grid, np.zeros(512)), 0.5, A=1.0, gamma=0.4)
        assert rep.factor == 0.0
        assert rep.mean_zero_pass

    def test_factor_cross_check(self, double_bump, grid):
        # recompute the three conditions independently by direct quadrature
        rep = membership(double_bump, 0.5, A=1.0, gamma=0.4)
        v = double_bump.values
        h = grid.h
        l1 = np.abs(v).sum() * h
        linf = np.abs(v).max()
        conc = (np.abs(v) * np.abs(grid.axis - rep.center[0]) ** 0.4).sum() * h
        expected = max(l1, (0.5 / 1.0) * linf, conc / 0.5**0.4)
        assert rep.factor == pytest.approx(expected, rel=1e-10)

    def test_center_beats_origin(self, grid):
        # shifted mass: the searched center must do at least as well as x0 = 0
        phi = make_double_bump(grid, 0.5, sig=0.22, sep=0.26, shift=2.0)
        rep = membership(phi, 0.5, A=1.0, gamma=0.4)
        v = np.abs(phi.values)
        conc_origin = (v * np.abs(grid.axis) ** 0.4).sum() * grid.h
        assert rep.concentration <= conc_origin + 1e-12
        assert abs(rep.center[0] - 2.0) < 0.6

    def test_mean_zero_exact_for_antisymmetric(self, double_bump):
        rep = membership(double_bump, 0.5, A=1.0, gamma=0.4)
        assert rep.mean_zero_pass
        assert rep.mean_residual <= 1e-14

    @settings(max_examples=20, deadline=None)
    @given(c=st.floats(0.01, 50.0))
    def test_factor_homogeneous(self, double_bump, c):
        base = membership(double_bump, 0.5, A=1.0, gamma=0.4).factor
        scaled = membership(double_bump.with_values(c * double_bump.values),
                            0.5, A=1.0, gamma=0.4).factor
        assert scaled == pytest.approx(c * base, rel=1e-9)

    def test_translation_invariance(self, grid, double_bump):
        shift = 16  # grid cells
        rolled = double_bump.with_values(np.roll(double_bump.values, shift))
        a = membership(double_bump, 0.5, A=1.0, gamma=0.4)
        b = membership(rolled, 0.5, A=1.0, gamma=0.4)
        assert b.factor == pytest.approx(a.factor, rel=1e-9)
        assert b.center[0] - a.center[0] == pytest.approx(shift * grid.h, abs=1e-6)

    def test_factor_pieces_monotone_in_r(self, double_bump):
        # (r^N/A) linf is non-decreasing and r^-gamma conc non-increasing in r
        rs = np.linspace(0.25, 1.0, 6)
        reps = [membership(double_bump, r, A=1.0, gamma=0.4) for r in rs]
        linf_piece = [r * rep.linf for r, rep in zip(rs, reps)]
        conc_piece = [rep.concentration / r**0.4 for r, rep in zip(rs, reps)]
        assert np.all(np.diff(linf_piece) >= -1e-12)
        assert np.all(np.diff(conc_piece) <= 1e-12)

    def test_band_mollifier_family(self, grid):
        # Psi_(2^-j) lies in a*U_(2^-j), a the scale-free sum of its constants
        gamma = 0.4
        a = band_mollifier_constant(gamma)
        for j in range(-2, int(np.log2(1 / (4 * grid.h)))):
            scale = 2.0**-j
            if scale < 4 * grid.h or scale > grid.box_radius / 4:
                continue
            psi = band_mollifier(grid, scale)
            rep = membership(psi, scale, A=1.0, gamma=gamma)
            assert rep.factor <= a * 1.05

    def test_rejects_bad_args(self, double_bump):
        with pytest.raises(ValueError):
            membership(double_bump, -1.0, A=1.0, gamma=0.4)
        with pytest.raises(ValueError):
            membership(double_bump, 0.5, A=0.5, gamma=0.4)


class TestHolder:
    def test_constant_zero(self, grid):
        est = holder_estimate(GridFunction(grid, np.full(512, 2.0)), 0.3)
        assert est.direct_seminorm == 0.0
        assert est.band_estimate <= 1e-12

    def test_power_profile_seminorm_one(self, grid):
        beta = 0.3
        f = from_callable(grid, lambda x: np.minimum(np.abs(x) ** beta, 1.0))
        est = holder_estimate(f, beta)
        assert est.direct_seminorm == pytest.approx(1.0, rel=0.05)

    def test_cosine_brute_force(self):
        # cross-check the pair scan against a dense double-resolution scan
        beta = 0.4
        g1 = Grid(1, 8.0, 256)
        f1 = from_callable(g1, np.cos)
        direct = direct_seminorm(f1, beta)
        g2 = Grid(1, 8.0, 512)
        v = np.cos(g2.axis)
        worst = 0.0
        for d in range(1, 128):
            gap = np.abs(v[d:] - v[:-d]).max()
            worst = max(worst, gap / (d * g2.h) ** beta)
        assert direct == pytest.approx(worst, rel=0.02)

    def test_band_within_factor_of_direct(self, grid):
        f = from_callable(grid, lambda x: np.exp(-(x**2)) * np.sin(3 * x))
        est = holder_estimate(f, 0.4)
        assert 0.05 <= est.band_over_direct <= 5.0

    def test_beta_range_guard(self, grid):
        f = GridFunction(grid, np.zeros(512))
        with pytest.raises(ValueError):
            holder_estimate(f, 1.5)


class TestPairing:
    def test_constant_against_mean_zero(self, grid, double_bump):
        w = GridFunction(grid, np.full(512, 4.0))
        assert abs(pairing(w, double_bump)) <= 4.0 * 1e-12

    def test_high_resolution_oracle(self):
        g1 = Grid(1, 8.0, 512)
        g2 = Grid(1, 8.0, 4096)
        w = lambda x: np.exp(-(x**2)) * np.cos(2 * x)
        phi = lambda x: np.exp(-((x - 1) ** 2) / 0.5)
        coarse = pairing(from_callable(g1, w), from_callable(g1, phi))
        fine = pairing(from_callable(g2, w), from_callable(g2, phi))
        assert coarse == pytest.approx(fine, rel=1e-6)

    def test_duality_bound_of_class(self, grid, double_bump):
        # |int w phi| <= factor * r^beta * [w]_beta for certified members
        beta = 0.3
        w = from_callable(grid, lambda x: np.minimum(np.abs(x - 0.7) ** beta, 1.0))
        est = holder_estimate(w, beta)
        rep = membership(double_bump, 0.5, A=1.0, gamma=0.4)
        bound = rep.factor * 0.5**beta * est.direct_seminorm
        assert abs(pairing(w, double_bump)) <= bound * 1.05

    def test_grid_mismatch(self, grid, double_bump):
        other = Grid(1, 8.0, 256)
        w = GridFunction(other, np.zeros(256))
        with pytest.raises(ValueError):
            pairing(w, double_bump)


class TestTransportDuality:
    def test_zero_horizon_exact(self, grid, double_bump, heat05):
        w0 = from_callable(grid, lambda x: np.exp(-(x**2)))
        rep = verify_transport_duality(heat05, w0, double_bump, t_bar=0.0, dt=0.01)
        assert rep.residual == 0.0

    def test_time_independent_self_adjoint(self, heat05):
        # both marches share the one-step operators, so the pairing identity
        # is exact to rounding
        g = Grid(1, 8.0, 256)
        w0 = from_callable(g, lambda x: np.exp(-(x**2)))
        phi0 = make_double_bump(g, 0.5, sig=0.22, sep=0.26)
        rep = verify_transport_duality(heat05, w0, phi0, t_bar=0.3, dt=0.02)
        assert rep.residual <= 1e-12

    def test_time_dependent_order_dt_plus_h(self):
        ker = tdep_kernel(0.5)
        results = []
        for n, dt in ((128, 0.02), (256, 0.01)):
            g = Grid(1, 8.0, n)
            w0 = from_callable(g, lambda x: np.exp(-(x**2)))
            phi0 = make_double_bump(g, 0.5, sig=0.22, sep=0.26)
            rep = verify_transport_duality(ker, w0, phi0, t_bar=0.4, dt=dt)
            results.append((rep.residual, dt + g.h))
        c = [r / s for r, s in results]
        assert results[1][0] < results[0][0]
        assert max(c) <= 3 * min(c)


def test_reports_serialize_to_json(grid, double_bump):
    import dataclasses
    import json

    rep = membership(double_bump, 0.5, A=1.0, gamma=0.4)
    blob = json.dumps(rep.to_dict())
    assert "factor" in blob and "center" in blob
    est = holder_estimate(from_callable(grid, np.cos), 0.4)
    blob2 = json.dumps(dataclasses.asdict(est))
    assert "band_estimate" in blob2


def test_class_pairing_bound_over_ensemble():
    # Lemma-style duality bound with >= -5% slack across certified members
    from nlh.evolution import generate_ensemble

    g = Grid(1, 6.0, 512)
    beta = 0.2
    w = from_callable(g, lambda x: np.minimum(np.abs(x - 0.37) ** beta, 1.0))
    est = holder_estimate(w, beta)
    for phi, r in generate_ensemble(g, [0.25, 0.5, 1.0], 9, seed=21, gamma=0.4):
        rep = membership(phi, r, A=1.0, gamma=0.4)
        bound = rep.factor * r**beta * est.direct_seminorm
        assert abs(pairing(w, phi)) <= bound * 1.05


def test_mean_zero_failure_still_reports_factor(grid):
    # a lopsided field fails the mean-zero verdict but the factor is reported
    phi = from_callable(grid, lambda x: np.exp(-((x - 1.0) ** 2)))
    rep = membership(phi, 0.5, A=1.0, gamma=0.4)
    assert not rep.mean_zero_pass
    assert rep.mean_residual > rep.mean_zero_tol
    assert np.isfinite(rep.factor) and rep.factor > 0

"""Two-dimensional smoke coverage: the machinery is shared with 1D, so these
stay at desk scale (n <= 48) and looser tolerances."""

import numpy as np
import pytest

from nlh.dualclass import holder_estimate, membership
from nlh.grid import Grid, GridFunction, from_callable
from nlh.kernels import (KernelParams, SamplingPlan, check_conditions,
                         make_fractional_heat)
from nlh.operator import apply, verify_duality, verify_mean_zero
from nlh.solver import solve, verify_lp_monotone, verify_max_principle


@pytest.fixture(scope="module")
def heat2d():
    return make_fractional_heat(KernelParams(N=2, alpha=0.5))


@pytest.fixture(scope="module")
def grid2d():
    return Grid(2, 6.0, 32)


def test_conditions_pass(heat2d):
    plan = SamplingPlan(box_radius=4.0, n_times=2, n_space=9, n_radii=10,
                        sphere_points=32)
    rep = check_conditions(heat2d, plan)
    assert rep.passed
    assert rep.symmetry_max_defect == 0.0


def test_constants_null_space(heat2d, grid2d):
    f = GridFunction(grid2d, np.full((32, 32), 5.0), exterior="constant")
    out = apply(heat2d, f)
    assert np.abs(out.values).max() <= 1e-12 * 6.0


def test_symbol_coarse(heat2d):
    grid = Grid(2, 4 * np.pi, 48)
    f = from_callable(grid, lambda x, y: np.cos(x))
    out = apply(heat2d, f)
    ax = grid.axis
    interior = (np.abs(ax)[:, None] <= 5.0) & (np.abs(ax)[None, :] <= 5.0)
    err = np.abs(out.values - np.cos(ax)[:, None])[interior].max()
    assert err <= 0.05  # coarse grid


def test_duality_and_mean_zero(heat2d, grid2d):
    f = from_callable(grid2d, lambda x, y: np.exp(-(x**2 + y**2)))
    g = from_callable(grid2d, lambda x, y: np.exp(-((x - 1) ** 2 + (y + 1) ** 2) / 2))
    assert verify_duality(heat2d, f, g).residual <= 1e-10
    assert verify_mean_zero(heat2d, f) <= 1e-10


def test_march_monotone(heat2d, grid2d):
    w0 = from_callable(grid2d, lambda x, y: np.exp(-(x**2 + y**2)))
    traj = solve(heat2d, w0, 0.2, snapshot_stride=4)
    assert verify_lp_monotone(traj, np.inf).passed
    assert verify_max_principle(traj)


def test_membership_and_holder(grid2d):
    pts = grid2d.points()
    raw = np.exp(-((pts[:, 0] - 0.3) ** 2 + pts[:, 1] ** 2) / 0.1).reshape(32, 32)
    raw -= raw.mean()
    phi = GridFunction(grid2d, raw / (np.abs(raw).sum() * grid2d.cell_volume))
    rep = membership(phi, 0.5, A=2.0, gamma=0.3)
    assert np.isfinite(rep.factor) and rep.factor > 0
    assert abs(rep.center[0] - 0.3) < 0.3
    est = holder_estimate(
        from_callable(grid2d, lambda x, y: np.minimum(np.hypot(x, y) ** 0.3, 1.0)), 0.3)
    assert est.direct_seminorm == pytest.approx(1.0, rel=0.05)

import numpy as np
import pytest

from nlh.grid import Grid, GridFunction, from_callable, interior_mask, power_field


def test_grid_geometry():
    g = Grid(1, 8.0, 256)
    assert g.h == pytest.approx(2 * 8.0 / 256)
    assert g.axis[0] == -8.0
    assert g.axis[-1] == pytest.approx(8.0 - g.h)
    assert g.cell_volume == g.h


def test_grid_2d_points():
    g = Grid(2, 4.0, 16)
    pts = g.points()
    assert pts.shape == (256, 2)
    assert g.cell_volume == pytest.approx(g.h**2)


@pytest.mark.parametrize("bad", [dict(ndim=3, box_radius=1.0, n_points=16),
                                 dict(ndim=1, box_radius=-1.0, n_points=16),
                                 dict(ndim=1, box_radius=1.0, n_points=4)])
def test_grid_rejects(bad):
    with pytest.raises(ValueError):
        Grid(**bad)


def test_gridfunction_validation():
    g = Grid(1, 4.0, 16)
    with pytest.raises(ValueError):
        GridFunction(g, np.zeros(8))
    with pytest.raises(ValueError):
        GridFunction(g, np.full(16, np.nan))
    with pytest.raises(ValueError):
        GridFunction(g, np.zeros(16), exterior="mirror")


def test_norms_and_integral():
    g = Grid(1, 10.0, 1000)
    f = from_callable(g, lambda x: np.exp(-(x**2)))
    assert f.integrate() == pytest.approx(np.sqrt(np.pi), rel=1e-6)
    assert f.norm(1) == pytest.approx(np.sqrt(np.pi), rel=1e-6)
    assert f.norm(np.inf) == pytest.approx(1.0, abs=1e-12)
    assert f.norm(2) == pytest.approx((np.pi / 2) ** 0.25, rel=1e-6)


def test_power_field_origin_cell_average():
    g = Grid(1, 4.0, 64)
    gamma = 0.5
    f = power_field(g, gamma)
    origin = np.argmin(np.abs(g.axis))
    # cell average of |x|^gamma over [-h/2, h/2] is (h/2)^gamma / (gamma+1)
    assert f.values[origin] == pytest.approx((g.h / 2) ** gamma / (gamma + 1))
    off = origin + 5
    assert f.values[off] == pytest.approx(abs(g.axis[off]) ** gamma)


def test_interior_mask():
    g = Grid(1, 10.0, 100)
    m = interior_mask(g, 0.1)
    assert m.sum() < 100
    assert m[np.abs(g.axis) <= 8.9].all()

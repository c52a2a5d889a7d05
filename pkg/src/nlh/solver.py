"""Explicit time marching for the nonlocal evolution equation.

The update w <- w - dt * T w with dt at most 0.5 / (max total weight leaving a
point) is a convex combination of grid values (and the exterior value), which
is the discrete maximum principle in its sharpest form: max/min are monotone
in exact arithmetic, and all L^p norms are non-increasing because the weight
matrix is symmetric substochastic after scaling.  First order in time is the
price of unconditional monotonicity; accuracy is recovered with small dt at
desk scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grid import Grid, GridFunction
from .kernels import Kernel
from .operator import OperatorFactory


class SolverError(RuntimeError):
    pass


class StabilityError(SolverError):
    """Requested dt exceeds the computed stability bound."""

    def __init__(self, dt, bound):
        super().__init__(f"dt = {dt} exceeds the stability bound {bound}")
        self.dt = dt
        self.bound = bound


@dataclass
class NormSeries:
    """Per-frame norms: the scientific output of a run."""

    t: np.ndarray
    l1: np.ndarray
    l2: np.ndarray
    linf: np.ndarray
    wmax: np.ndarray
    wmin: np.ndarray
    holder: np.ndarray
    concentration: np.ndarray
    center: np.ndarray
    mass: np.ndarray
    flux_accum: np.ndarray

    def as_columns(self) -> dict[str, np.ndarray]:
        cols = {
            "t": self.t, "l1": self.l1, "l2": self.l2, "linf": self.linf,
            "wmax": self.wmax, "wmin": self.wmin, "holder_beta": self.holder,
            "concentration": self.concentration, "mass": self.mass,
            "flux_accum": self.flux_accum,
        }
        for j in range(self.center.shape[1]):
            cols[f"center_x{j + 1}"] = self.center[:, j]
        return cols


@dataclass
class Trajectory:
    """Snapshots plus the full per-step norm series of one march."""

    kernel: Kernel
    grid: Grid
    dt: float
    frames: list[GridFunction]
    series: NormSeries
    beta: float
    gamma: float
    exterior: str

    @property
    def times(self) -> np.ndarray:
        return np.array([f.time for f in self.frames])

    def frame_at(self, t: float) -> GridFunction:
        i = int(np.argmin(np.abs(self.times - t)))
        return self.frames[i]


def stability_bound(kernel: Kernel, grid: Grid, t: float = 0.0,
                    exterior: str = "zero", factory: OperatorFactory | None = None) -> float:
    """Largest dt keeping the update a convex combination: 0.5 / max row weight."""
    fac = factory or OperatorFactory(kernel, grid, exterior=exterior)
    return 0.5 / fac.at_time(t).row_bound()


def _quick_holder(values: np.ndarray, h: float, beta: float) -> float:
    """Direct seminorm over log-spaced offsets (series use; full scan in dualclass)."""
    flat = values if values.ndim == 1 else values
    n = flat.shape[0]
    dmax = max(2, n // 4)
    offs = np.unique(np.geomspace(1, dmax, 48).astype(int))
    worst = 0.0
    if values.ndim == 1:
        for d in offs:
            gap = np.abs(flat[d:] - flat[:-d]).max()
            worst = max(worst, gap / (d * h) ** beta)
        return worst
    for d in offs:
        g1 = np.abs(values[d:, :] - values[:-d, :]).max()
        g2 = np.abs(values[:, d:] - values[:, :-d]).max()
        worst = max(worst, max(g1, g2) / (d * h) ** beta)
    return worst


def _concentration(f: GridFunction, gamma: float) -> tuple[float, np.ndarray]:
    """Concentration integral about the |f|-weighted centroid."""
    grid = f.grid
    absv = np.abs(f.values)
    total = absv.sum()
    if total == 0.0:
        return 0.0, np.zeros(grid.ndim)
    pts = grid.points()
    w = absv.ravel() / total
    center = w @ pts
    d = np.linalg.norm(pts - center[None, :], axis=1)
    conc = grid.cell_volume * float((absv.ravel() * d**gamma).sum())
    return conc, center


def solve(kernel: Kernel, w0: GridFunction, t_end: float, dt: float | None = None,
          snapshot_stride: int = 1, beta: float = 0.25, gamma: float | None = None,
          factory: OperatorFactory | None = None, series_stride: int = 1,
          allow_unstable: bool = False) -> Trajectory:
    """March w' = -T w from w0 to t_end with explicit Euler steps.

    dt = None resolves to 0.9x the stability bound.  Snapshots keep every
    snapshot_stride-th frame plus first and last; the norm series is computed
    every series_stride steps (holder/concentration are the expensive
    entries; L^p norms and extrema are always recorded at series points).
    allow_unstable skips the dt rejection for deliberate negative controls.
    """
    grid = w0.grid
    gamma = kernel.params.gamma if gamma is None else gamma
    fac = factory or OperatorFactory(kernel, grid, exterior=w0.exterior)
    bound = stability_bound(kernel, grid, t=w0.time, exterior=w0.exterior, factory=fac)
    if dt is None:
        dt = 0.9 * bound
    elif dt > bound * (1.0 + 1e-12) and not allow_unstable:
        raise StabilityError(dt, bound)
    n_steps = max(1, int(math.ceil(t_end / dt - 1e-12)))
    dt = t_end / n_steps

    w = w0.values.copy()
    t = w0.time
    frames = [w0]
    rows = []
    flux = 0.0

    def record(tcur, values, flux_now):
        f = w0.with_values(values, time=tcur)
        conc, center = _concentration(f, gamma)
        rows.append((
            tcur, f.norm(1), f.norm(2), f.norm(np.inf),
            float(values.max()), float(values.min()),
            _quick_holder(values, grid.h, beta), conc, center,
            f.integrate(), flux_now,
        ))

    record(t, w, flux)
    for step in range(n_steps):
        op = fac.at_time(t)
        tw = op.apply_values(w0.with_values(w, time=t))
        flux += dt * grid.cell_volume * float((op.tail_total * w.ravel()).sum())
        w = w - dt * tw
        t = w0.time + (step + 1) * dt
        if not np.all(np.isfinite(w)):
            raise SolverError(f"non-finite values at step {step + 1} (t = {t})")
        if (step + 1) % series_stride == 0 or step == n_steps - 1:
            record(t, w, flux)
        if (step + 1) % snapshot_stride == 0 or step == n_steps - 1:
            frames.append(w0.with_values(w.copy(), time=t))

    r = list(zip(*rows))
    series = NormSeries(
        t=np.array(r[0]), l1=np.array(r[1]), l2=np.array(r[2]), linf=np.array(r[3]),
        wmax=np.array(r[4]), wmin=np.array(r[5]), holder=np.array(r[6]),
        concentration=np.array(r[7]), center=np.array(r[8]),
        mass=np.array(r[9]), flux_accum=np.array(r[10]),
    )
    return Trajectory(kernel=kernel, grid=grid, dt=dt, frames=frames, series=series,
                      beta=beta, gamma=gamma, exterior=w0.exterior)


@dataclass(frozen=True)
class MonotoneReport:
    p: float
    defect: float
    threshold: float
    passed: bool


def verify_lp_monotone(traj: Trajectory, p) -> MonotoneReport:
    """Worst relative increase of the L^p norm between consecutive series points."""
    s = traj.series
    series = {1: s.l1, 2: s.l2, np.inf: s.linf, "inf": s.linf}[p]
    inc = np.diff(series)
    rel = np.clip(inc, 0.0, None) / (1.0 + series[:-1])
    defect = float(rel.max()) if len(rel) else 0.0
    if p in (np.inf, "inf"):
        threshold = 1e-10
    else:
        a = traj.kernel.params.alpha
        threshold = 10.0 * (traj.dt + traj.grid.h ** min(a, 1.0)) * series[0]
    return MonotoneReport(p=p, defect=defect, threshold=threshold, passed=defect <= threshold)


def verify_max_principle(traj: Trajectory, rtol: float = 1e-12) -> bool:
    """max non-increasing and min non-decreasing along the whole series."""
    s = traj.series
    scale = 1.0 + np.abs(s.wmax[0]) + np.abs(s.wmin[0])
    up = np.diff(s.wmax).max(initial=-np.inf)
    dn = np.diff(s.wmin).min(initial=np.inf)
    return up <= rtol * scale and dn >= -rtol * scale


@dataclass(frozen=True)
class ConvexityReport:
    max_defect: float
    threshold: float
    passed: bool
    smoothing_eps: float | None = None


def verify_convexity_inequality(traj: Trajectory, eta=None, eta_pp=None,
                                factory: OperatorFactory | None = None) -> ConvexityReport:
    """Check d/dt eta(w) + T(eta(w)) <= tolerance at interior points, frame midpoints.

    eta defaults to u^2.  eta_pp is sampled on the value range to reject
    non-convex eta.  The tolerance 10 (dt + h)(1 + ||w||_inf^2) Lambda covers
    the first-order time difference and the near-field truncation.
    """
    if eta is None:
        eta = lambda u: u * u
        eta_pp = lambda u: 2.0 * np.ones_like(u)
    if eta_pp is not None:
        lo = min(f.values.min() for f in traj.frames)
        hi = max(f.values.max() for f in traj.frames)
        samples = np.linspace(lo - 1e-9, hi + 1e-9, 257)
        if np.min(eta_pp(samples)) < -1e-12:
            raise ValueError("eta is not convex on the sampled value range")
    fac = factory or OperatorFactory(traj.kernel, traj.grid, exterior=traj.exterior)
    worst = -np.inf
    wmax = max(f.norm(np.inf) for f in traj.frames)
    interior = _interior_slice(traj.grid)
    for f0, f1 in zip(traj.frames[:-1], traj.frames[1:]):
        dtf = f1.time - f0.time
        mid = 0.5 * (f0.values + f1.values)
        tmid = 0.5 * (f0.time + f1.time)
        dphi = (eta(f1.values) - eta(f0.values)) / dtf
        op = fac.at_time(tmid)
        tv = op.apply_values(f0.with_values(eta(mid), time=tmid))
        worst = max(worst, float((dphi + tv)[interior].max()))
    lam = traj.kernel.params.Lambda
    frame_dt = traj.frames[1].time - traj.frames[0].time if len(traj.frames) > 1 else traj.dt
    threshold = 10.0 * (frame_dt + traj.grid.h) * (1.0 + wmax**2) * lam
    return ConvexityReport(max_defect=worst, threshold=threshold, passed=worst <= threshold)


def _interior_slice(grid: Grid, fraction: float = 0.1):
    n = grid.n_points
    k = max(1, int(fraction * n))
    if grid.ndim == 1:
        return slice(k, n - k)
    return (slice(k, n - k), slice(k, n - k))


@dataclass(frozen=True)
class ExponentFit:
    slope: float
    half_width: float
    conclusive: bool
    n_points: int
    window: tuple[float, float]
    note: str = ""


def linf_decay_fit(kernel: Kernel, w0: GridFunction, horizon: float,
                   dt: float | None = None, snapshot_stride: int = 64,
                   fit_window: tuple[float, float] | None = None) -> tuple[ExponentFit, Trajectory]:
    """Fit the late-time slope of log ||w||_inf vs log t; expected -N/alpha.

    Inconclusive (not a failure) when the sup norm has not decayed below half
    its initial value by the horizon.
    """
    from .fitting import fit_exponent

    if dt is None:
        bound = stability_bound(kernel, w0.grid, t=w0.time, exterior=w0.exterior)
        dt = min(0.9 * bound, horizon / 512.0)
    traj = solve(kernel, w0, horizon, dt=dt, snapshot_stride=snapshot_stride,
                 series_stride=4)
    s = traj.series
    if s.linf[-1] > 0.5 * s.linf[0]:
        fit = ExponentFit(slope=np.nan, half_width=np.nan, conclusive=False,
                          n_points=0, window=(0.0, horizon),
                          note="insufficient dynamic range: linf(end) > 0.5 linf(0)")
        return fit, traj
    window = fit_window or (horizon / 12.0, horizon)
    fit = fit_exponent(s.t, s.linf, window=window)
    return fit, traj

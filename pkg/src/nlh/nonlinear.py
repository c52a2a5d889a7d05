"""The nonlinear neighbourhood-averaging flow and its induced linear kernel.

The scalar field evolves by  d theta/dt (x) = int phi'(theta(y) - theta(x))
G(y-x) dy  with an even C^2 potential phi (phi(0) = 0, sqrt(1/Lambda) <=
phi'' <= sqrt(Lambda)) and an even kernel G whose normalized profile g obeys
sqrt(1/Lambda) 1_{|z|<=zeta} <= g <= sqrt(Lambda)(1+|z|^omega).  Directional
derivatives w = D_e theta then solve the linear equation for the induced
kernel K(t,x,y) = phi''(theta(t,y) - theta(t,x)) G(y-x), which inherits
symmetry exactly and the two-sided bounds with constant Lambda; for
alpha >= 1 its spherical-mean cancellation is controlled by the Hoelder
seminorm of phi'' times the (non-increasing) gradient sup norm.

The discrete flow reuses the linear operator's weights, applying phi' to the
same pairwise differences, so the phi'' = const case reduces to the linear
solver to rounding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .exprs import Expression
from .grid import Grid, GridFunction
from .kernels import (HighOrderParams, Kernel, KernelParams, ParameterError,
                      sphere_surface)
from .operator import OperatorFactory
from .solver import SolverError, StabilityError, Trajectory, solve


@dataclass(frozen=True)
class ScalarTriple:
    """phi with its first two derivatives, each an expression in u."""

    phi: Expression
    phi_p: Expression
    phi_pp: Expression

    @staticmethod
    def from_sources(phi: str, phi_p: str, phi_pp: str) -> "ScalarTriple":
        return ScalarTriple(
            Expression(phi, ("u",)), Expression(phi_p, ("u",)), Expression(phi_pp, ("u",))
        )

    def check_derivatives(self, lo: float = -4.0, hi: float = 4.0, n: int = 64,
                          rtol: float = 1e-5) -> None:
        """Finite-difference spot check that phi_p, phi_pp differentiate phi."""
        u = np.linspace(lo, hi, n)
        eps = 1e-5 * (hi - lo)
        d1 = (self.phi(u=u + eps) - self.phi(u=u - eps)) / (2 * eps)
        d2 = (self.phi_p(u=u + eps) - self.phi_p(u=u - eps)) / (2 * eps)
        scale1 = np.abs(self.phi_p(u=u)) + 1.0
        scale2 = np.abs(self.phi_pp(u=u)) + 1.0
        if np.max(np.abs(d1 - self.phi_p(u=u)) / scale1) > rtol:
            raise ParameterError("phi_p is not the derivative of phi (finite-difference check)")
        if np.max(np.abs(d2 - self.phi_pp(u=u)) / scale2) > rtol:
            raise ParameterError("phi_pp is not the derivative of phi_p (finite-difference check)")


@dataclass(frozen=True)
class HolderPhi:
    """[phi'']_{C^nu} bound plus the product bound M >= [phi'']_nu ||grad theta0||_inf^nu."""

    nu: float
    seminorm: float
    M: float


@dataclass(frozen=True)
class NonlinearProblem:
    nonlinearity: ScalarTriple
    G: Kernel
    theta0: GridFunction
    Lambda: float
    holder_phi: HolderPhi | None = None

    def __post_init__(self):
        lam = self.Lambda
        if lam < 1.0:
            raise ParameterError("Lambda must be >= 1")
        u = np.linspace(-4.0, 4.0, 257)
        pp = self.nonlinearity.phi_pp(u=u)
        if np.any(pp < math.sqrt(1.0 / lam) - 1e-9) or np.any(pp > math.sqrt(lam) + 1e-9):
            raise ParameterError("phi'' leaves [sqrt(1/Lambda), sqrt(Lambda)] on samples")
        ph = self.nonlinearity.phi(u=u)
        if np.max(np.abs(ph - self.nonlinearity.phi(u=-u))) > 1e-9 * (1 + np.abs(ph).max()):
            raise ParameterError("phi is not even on samples")
        if abs(float(self.nonlinearity.phi(u=0.0))) > 1e-12:
            raise ParameterError("phi(0) must vanish")
        self.nonlinearity.check_derivatives()
        if self.G.params.alpha >= 1.0 and self.holder_phi is None:
            raise ParameterError("alpha >= 1 requires holder_phi (the [phi'']_nu bound and M)")

    @property
    def grid(self) -> Grid:
        return self.theta0.grid


@dataclass
class ThetaTrajectory:
    """Snapshots of the nonlinear flow with gradient-field norms per step."""

    problem: NonlinearProblem
    dt: float
    frames: list[GridFunction]
    t: np.ndarray
    theta_inf: np.ndarray
    grad_inf: np.ndarray
    grad_l1: np.ndarray
    grad_holder: np.ndarray
    energy: np.ndarray
    beta: float

    @property
    def times(self) -> np.ndarray:
        return np.array([f.time for f in self.frames])

    @property
    def t_end(self) -> float:
        return float(self.frames[-1].time)


def _grad(values: np.ndarray, h: float):
    if values.ndim == 1:
        return [np.gradient(values, h)]
    return list(np.gradient(values, h))


def _quick_holder(values: np.ndarray, h: float, beta: float) -> float:
    from .solver import _quick_holder as q

    return q(values, h, beta)


def solve_nonlinear(problem: NonlinearProblem, t_end: float, dt: float | None = None,
                    snapshot_stride: int = 1, beta: float = 0.25,
                    series_stride: int = 1) -> ThetaTrajectory:
    """Explicit march of the nonlinear flow, reusing the linear operator weights.

    The stable dt replaces the kernel constant by sqrt(Lambda) (the largest
    slope of phi'), which makes the linearized update a convex combination and
    keeps ||grad theta||_inf non-increasing.
    """
    grid = problem.grid
    theta0 = problem.theta0
    fac = OperatorFactory(problem.G, grid, exterior=theta0.exterior)
    op = fac.at_time(0.0)
    lam = problem.Lambda
    bound = 0.5 / (math.sqrt(lam) * op.row_bound())
    if dt is None:
        dt = 0.9 * bound
    elif dt > bound * (1.0 + 1e-12):
        raise StabilityError(dt, bound)
    n_steps = max(1, int(math.ceil(t_end / dt - 1e-12)))
    dt = t_end / n_steps

    phi_p = problem.nonlinearity.phi_p
    phi = problem.nonlinearity.phi
    n = grid.n_points
    h = grid.h
    W = op.W
    edge = op.edge_weights
    tail_half = 0.5 * (op.tail_lo + op.tail_hi)

    def rhs(th_flat, ext_vals):
        diff = th_flat[None, :] - th_flat[:, None]
        out = (W * phi_p(u=diff)).sum(axis=1)
        out += _edge_rhs(th_flat, edge, grid, phi_p)
        out += (tail_half * phi_p(u=ext_vals - th_flat[:, None])).sum(axis=1)
        return out

    def energy(th_flat):
        diff = th_flat[None, :] - th_flat[:, None]
        return 0.5 * grid.cell_volume * float((W * phi(u=diff)).sum())

    theta = theta0.values.ravel().copy()
    frames = [theta0]
    rows = []

    def ext_of(th_flat):
        if theta0.exterior == "zero":
            return np.zeros(tail_half.shape)
        if grid.ndim == 1:
            return np.stack([np.full(n, th_flat[0]), np.full(n, th_flat[-1])], axis=1)
        v = th_flat.reshape(n, n)
        bm = float(np.mean(np.concatenate([v[0], v[-1], v[:, 0], v[:, -1]])))
        return np.full(tail_half.shape, bm)

    def record(tcur, th_flat):
        vals = th_flat.reshape(grid.shape)
        g = _grad(vals, h)
        gmag = np.sqrt(sum(gi**2 for gi in g))
        rows.append((
            tcur, float(np.abs(vals).max()), float(gmag.max()),
            float(grid.cell_volume * gmag.sum()),
            max(_quick_holder(gi, h, beta) for gi in g),
            energy(th_flat),
        ))

    t = theta0.time
    record(t, theta)
    for step in range(n_steps):
        theta = theta + dt * rhs(theta, ext_of(theta))
        t = theta0.time + (step + 1) * dt
        if not np.all(np.isfinite(theta)):
            raise SolverError(f"non-finite values at step {step + 1} (t = {t})")
        if (step + 1) % series_stride == 0 or step == n_steps - 1:
            record(t, theta)
        if (step + 1) % snapshot_stride == 0 or step == n_steps - 1:
            frames.append(theta0.with_values(theta.reshape(grid.shape).copy(), time=t))

    cols = list(zip(*rows))
    return ThetaTrajectory(
        problem=problem, dt=dt, frames=frames, t=np.array(cols[0]),
        theta_inf=np.array(cols[1]), grad_inf=np.array(cols[2]),
        grad_l1=np.array(cols[3]), grad_holder=np.array(cols[4]),
        energy=np.array(cols[5]), beta=beta,
    )


def _edge_rhs(th_flat, edge_a, grid, phi_p):
    """Nearest-neighbour moment-correction weights, driven through phi'."""
    if grid.ndim == 1:
        out = np.zeros_like(th_flat)
        w = 0.5 * (edge_a[:-1] + edge_a[1:])
        out[:-1] += w * phi_p(u=th_flat[1:] - th_flat[:-1])
        out[1:] += w * phi_p(u=th_flat[:-1] - th_flat[1:])
        return out
    n = grid.n_points
    f = th_flat.reshape(n, n)
    a = edge_a.reshape(n, n)
    o = np.zeros_like(f)
    for axis in (0, 1):
        fa = np.moveaxis(f, axis, 0)
        aa = np.moveaxis(a, axis, 0)
        oo = np.moveaxis(o, axis, 0)
        w = 0.5 * (aa[:-1] + aa[1:])
        oo[:-1] += w * phi_p(u=fa[1:] - fa[:-1])
        oo[1:] += w * phi_p(u=fa[:-1] - fa[1:])
    return o.ravel()


# ---------------------------------------------------------------------------
# induced kernel


def induced_kernel(traj: ThetaTrajectory, problem: NonlinearProblem | None = None) -> Kernel:
    """K(t,x,y) = phi''(theta(t,y) - theta(t,x)) G(y-x) from stored snapshots.

    theta is interpolated linearly in time between snapshots and in space
    along each axis (clamped outside the box, matching the constant exterior
    continuation).  Symmetry is exact because phi'' is even; the bounds hold
    with constant Lambda as products of the sqrt-bounds; for alpha >= 1 the
    cancellation constant is tau = 2^(1+nu) M sqrt(Lambda) with s0 = 1.
    """
    problem = problem or traj.problem
    G = problem.G
    gp = G.params
    grid = problem.grid
    times = traj.times
    stack = np.stack([f.values for f in traj.frames])
    axis = grid.axis
    phi_pp = problem.nonlinearity.phi_pp
    t_lo, t_hi = float(times[0]), float(times[-1])

    if grid.ndim != 1:
        raise NotImplementedError("induced kernel evaluation is 1D")

    def theta_at(t, x):
        t = np.asarray(t, dtype=float)
        if np.any(t < t_lo - 1e-12) or np.any(t > t_hi + 1e-12):
            raise ValueError(f"time {t} outside the stored trajectory range [{t_lo}, {t_hi}]")
        tc = np.clip(t, t_lo, t_hi)
        it = np.clip(np.searchsorted(times, tc, side="right") - 1, 0, len(times) - 2)
        frac = (tc - times[it]) / (times[it + 1] - times[it])
        xc = np.clip(x, axis[0], axis[-1])
        pos = (xc - axis[0]) / grid.h
        ix = np.clip(np.floor(pos).astype(int), 0, len(axis) - 2)
        fx = pos - ix
        v0 = stack[it, ix] * (1 - fx) + stack[it, ix + 1] * fx
        v1 = stack[it + 1, ix] * (1 - fx) + stack[it + 1, ix + 1] * fx
        return v0 * (1 - frac) + v1 * frac

    def k(t, x, z):
        x = np.asarray(x, dtype=float)
        z = np.asarray(z, dtype=float)
        tb = np.broadcast_to(np.asarray(t, dtype=float), np.broadcast_shapes(
            np.shape(t), x.shape, z.shape))
        xb = np.broadcast_to(x, tb.shape)
        zb = np.broadcast_to(z, tb.shape)
        dth = theta_at(tb, xb + zb) - theta_at(tb, xb)
        return phi_pp(u=dth) * G(0.0, xb, zb)

    ho = None
    if gp.alpha >= 1.0:
        hp = problem.holder_phi
        tau = 2.0 ** (1.0 + hp.nu) * hp.M * math.sqrt(problem.Lambda)
        ho = HighOrderParams(nu=hp.nu, s0=1.0, tau=tau)
    params = KernelParams(N=gp.N, alpha=gp.alpha, zeta=gp.zeta, omega=gp.omega,
                          Lambda=problem.Lambda, high_order=ho, gamma=gp.gamma)
    return Kernel(k, params, translation_invariant=False, time_independent=False,
                  smooth=False, label="induced")


@dataclass(frozen=True)
class CancellationProfile:
    s: np.ndarray
    profile: np.ndarray          # max_  (t,x) |int k sigma dsigma| at each s
    bound_constant: float        # measured C in profile <= C M sqrt(Lambda) s^nu, s <= 1
    refinement_drift: float
    large_s_margin: float        # min over s of tau_bar s^nu (1+s^omega) - profile


def verify_induced_cancellation(traj: ThetaTrajectory, problem: NonlinearProblem | None = None,
                                s_grid: np.ndarray | None = None,
                                n_x: int = 24, n_t: int = 5) -> CancellationProfile:
    """Spherical-mean cancellation of the induced kernel against C M sqrt(Lambda) s^nu."""
    problem = problem or traj.problem
    if problem.holder_phi is None:
        raise ParameterError("verify_induced_cancellation requires holder_phi (alpha >= 1 case)")
    ker = induced_kernel(traj, problem)
    grid = problem.grid
    if s_grid is None:
        s_grid = np.geomspace(2 * grid.h, 4.0, 24)
    hp = problem.holder_phi
    lam = problem.Lambda

    def worst_profile(nx):
        xs = np.linspace(-grid.box_radius * 0.8, grid.box_radius * 0.8, nx)
        ts = np.linspace(0.0, traj.t_end, n_t)
        worst = np.zeros_like(s_grid)
        for t in ts:
            kp = ker(t, xs[:, None], s_grid[None, :])
            km = ker(t, xs[:, None], -s_grid[None, :])
            worst = np.maximum(worst, np.abs(kp - km).max(axis=0))
        return worst

    p1 = worst_profile(max(n_x, grid.n_points // 2))
    p2 = worst_profile(max(2 * n_x, grid.n_points))
    small = s_grid <= 1.0
    scale = hp.M * math.sqrt(lam) * s_grid**hp.nu
    c1 = float((p1[small] / scale[small]).max()) if small.any() else 0.0
    c2 = float((p2[small] / scale[small]).max()) if small.any() else 0.0
    drift = abs(c1 - c2) / max(c2, 1e-300)
    tau_bar = max(ker.params.tau, sphere_surface(grid.ndim) * lam * 1.0)
    bound = tau_bar * s_grid**hp.nu * (1.0 + s_grid**ker.params.omega)
    return CancellationProfile(s=s_grid, profile=p2, bound_constant=c2,
                               refinement_drift=drift,
                               large_s_margin=float((bound - p2).min()))


def gradient_persistence_experiment(problem: NonlinearProblem, beta: float,
                                    horizons=(1.0, 4.0, 16.0), dt: float | None = None,
                                    snapshots_per_horizon: int = 6,
                                    certify: bool = True):
    """Persistence and smoothing envelopes for the gradient of the nonlinear flow.

    Runs the flow to the largest horizon, certifies the induced kernel
    (symmetry, bounds, and the cancellation condition when alpha >= 1 -- a
    certification failure aborts with the condition report), then measures on
    w = D_e theta: the flatness of sup_t ||w(t)||_C^beta / ||w(0)||_C^beta
    across horizons and the two smoothing envelope constants

        [w(t)]_C^beta <= C max{1, t^(-beta/alpha)} ||w0||_inf,
        ||w(t)||_C^beta <= C (||w0||_inf + max{1, t^(-(N+beta)/alpha)} ||w0||_1).
    """
    from .dualclass import direct_seminorm
    from .estimates import DecayReport
    from .kernels import SamplingPlan, check_conditions

    horizons = sorted(horizons)
    grid = problem.grid
    traj = solve_nonlinear(problem, horizons[-1], dt=dt, snapshot_stride=4,
                           beta=beta, series_stride=8)
    if certify:
        ik = induced_kernel(traj)
        plan = SamplingPlan(box_radius=grid.box_radius / 2.0, n_times=3,
                            time_span=(0.0, traj.t_end), n_space=6, n_radii=12,
                            radius_min=grid.h, radius_max=2.0 * grid.box_radius)
        report = check_conditions(ik, plan)
        if not report.passed:
            raise ParameterError(f"induced kernel failed certification: "
                                 f"{ {k: v.passed for k, v in report.verdicts.items()} }")

    p = problem.G.params
    times = traj.times
    targets = np.geomspace(max(horizons[0] / snapshots_per_horizon, times[1]),
                           horizons[-1], snapshots_per_horizon * len(horizons) * 2)
    idx = sorted(set(int(np.argmin(np.abs(times - s))) for s in targets))

    def grad_field(frame):
        return frame.with_values(_grad(frame.values, grid.h)[0])

    w0 = grad_field(traj.frames[0])
    base = w0.norm(np.inf) + direct_seminorm(w0, beta)
    rows = []
    for i in idx:
        w = grad_field(traj.frames[i])
        rows.append((w.time, direct_seminorm(w, beta), w.norm(np.inf), w.norm(1)))
    c = list(zip(*rows))
    series = {"t": np.array(c[0]), "cbeta_direct": np.array(c[1]),
              "linf": np.array(c[2]), "l1": np.array(c[3])}
    series["norm_cbeta"] = series["linf"] + series["cbeta_direct"]

    ratios = {}
    for T in horizons:
        sel = series["t"] <= T * (1 + 1e-9)
        vals = np.concatenate([[base], series["norm_cbeta"][sel]])
        ratios[T] = float(vals.max() / base)
    flat = max(ratios.values()) <= min(ratios.values()) * 1.10

    a = p.alpha
    t = series["t"]
    sup_env = np.maximum(1.0, t ** (-beta / a)) * w0.norm(np.inf)
    c_sup = float((series["cbeta_direct"] / sup_env).max())
    l1_env = w0.norm(np.inf) + np.maximum(1.0, t ** (-(p.N + beta) / a)) * w0.norm(1)
    c_l1 = float((series["norm_cbeta"] / l1_env).max())
    series["envelope_value"] = max(ratios.values()) * base * np.ones_like(t)

    return DecayReport(
        law="gradient_persistence", beta=beta, measured_constant=max(ratios.values()),
        fitted_exponent=None, passed=bool(flat and np.isfinite(c_sup) and np.isfinite(c_l1)),
        horizon_ratios=ratios, series=series,
        note=f"smoothing constants: sup-law {c_sup:.4g}, l1-law {c_l1:.4g}",
    ), traj


def derivative_consistency(traj: ThetaTrajectory, problem: NonlinearProblem | None = None,
                           t_end: float | None = None) -> float:
    """Sup distance between D_e theta(t) and the linear solve with the induced kernel.

    The directional derivative of the nonlinear flow solves the linear
    equation with the induced kernel; both sides are marched discretely and
    compared at t_end, normalized by ||D_e theta0||_inf.
    """
    problem = problem or traj.problem
    grid = problem.grid
    t_end = traj.t_end if t_end is None else t_end
    ker = induced_kernel(traj, problem)
    w0 = problem.theta0.with_values(_grad(problem.theta0.values, grid.h)[0])
    lin = solve(ker, w0, t_end, dt=traj.dt, snapshot_stride=10**9, series_stride=10**9)
    target = traj.frames[-1]
    w_nl = _grad(target.values, grid.h)[0]
    return float(np.abs(lin.frames[-1].values - w_nl).max() / (np.abs(w0.values).max() + 1e-300))

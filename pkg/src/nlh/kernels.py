"""Jump kernels, their structural conditions, and derived kernels.

A kernel is stored through its normalized profile k(t, x, z) with
K(t, x, y) = k(t, x, y-x) / |y-x|^(N+alpha).  The conditions checked here are
sampled certificates, not proofs: symmetry k(t,x,y-x) = k(t,y,x-y), the
two-sided bounds

    1/Lambda * 1_{|z| <= zeta}  <=  k(t,x,z)  <=  Lambda * (1 + |z|^omega),

and, for alpha >= 1, either local Hoelder continuity of k in z (constants
tau, s0, exponent nu) or the spherical-mean cancellation bound

    | int_{S^{N-1}} k(t, x, s*sigma) sigma dsigma |  <=  tau * s^nu,  s < s0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .exprs import Expression
from .grid import Grid, GridFunction

INF = math.inf


class ParameterError(ValueError):
    """A kernel parameter violates its admissible range."""


class KernelEvalError(RuntimeError):
    """Kernel evaluation failed; carries the sample point."""

    def __init__(self, point, cause):
        super().__init__(f"kernel evaluation failed at {point}: {cause}")
        self.point = point


@dataclass(frozen=True)
class HighOrderParams:
    """Extra parameters required when alpha >= 1."""

    nu: float
    s0: float = INF
    tau: float = 0.0


@dataclass(frozen=True)
class KernelParams:
    """Parameter set {alpha, zeta, omega, Lambda} (+ {nu, s0, tau} for alpha >= 1).

    gamma is the fixed concentration exponent; when not supplied it defaults to
    the midpoint of its admissible open interval.
    """

    N: int
    alpha: float
    zeta: float = INF
    omega: float = 0.0
    Lambda: float = 1.0
    high_order: HighOrderParams | None = None
    gamma: float | None = None

    def __post_init__(self):
        if self.N not in (1, 2):
            raise ParameterError(f"N must be 1 or 2, got {self.N}")
        if not 0.0 < self.alpha < 2.0:
            raise ParameterError(f"alpha must satisfy 0 < alpha < 2, got {self.alpha}")
        if not 0.0 <= self.omega < self.alpha:
            raise ParameterError(f"omega must satisfy 0 <= omega < alpha, got {self.omega}")
        if self.Lambda < 1.0:
            raise ParameterError(f"Lambda must satisfy Lambda >= 1, got {self.Lambda}")
        if not self.zeta > 0.0:
            raise ParameterError(f"zeta must satisfy zeta > 0, got {self.zeta}")
        if (self.alpha >= 1.0) != (self.high_order is not None):
            raise ParameterError(
                "high_order params {nu, s0, tau} are required exactly when alpha >= 1"
            )
        if self.high_order is not None:
            ho = self.high_order
            if not self.alpha - 1.0 < ho.nu < 1.0:
                raise ParameterError(f"nu must satisfy alpha-1 < nu < 1, got {ho.nu}")
            if ho.nu + self.omega >= min(self.N, self.alpha):
                raise ParameterError(
                    f"nu + omega must be < min(N, alpha), got {ho.nu + self.omega}"
                )
            if not ho.s0 > 0.0:
                raise ParameterError(f"s0 must satisfy s0 > 0, got {ho.s0}")
            if ho.tau < 0.0:
                raise ParameterError(f"tau must satisfy tau >= 0, got {ho.tau}")
        lo, hi = self.gamma_bounds()
        if self.gamma is None:
            object.__setattr__(self, "gamma", 0.5 * (lo + hi))
        elif not lo < self.gamma < hi:
            raise ParameterError(
                f"gamma must lie in the open interval ({lo}, {hi}), got {self.gamma}"
            )

    def gamma_bounds(self) -> tuple[float, float]:
        if self.alpha < 1.0:
            return 0.0, self.alpha - self.omega
        return max(self.alpha - self.N, 0.0), self.alpha - (self.omega + self.high_order.nu)

    @property
    def nu(self) -> float | None:
        return None if self.high_order is None else self.high_order.nu

    @property
    def s0(self) -> float | None:
        return None if self.high_order is None else self.high_order.s0

    @property
    def tau(self) -> float | None:
        return None if self.high_order is None else self.high_order.tau


@dataclass(frozen=True)
class Kernel:
    """Evaluable normalized kernel profile with structural flags.

    k(t, x, z) must accept broadcastable numpy arrays: in one dimension x and z
    are coordinate arrays, in two dimensions they carry a trailing axis of
    length 2.  It must return finite nonnegative values for z != 0.
    """

    k: Callable
    params: KernelParams
    translation_invariant: bool = False
    time_independent: bool = False
    smooth: bool = False
    label: str = "kernel"

    def __call__(self, t, x, z):
        try:
            return np.asarray(self.k(t, x, z), dtype=float)
        except KernelEvalError:
            raise
        except Exception as exc:  # noqa: BLE001 - rewrap with the sample point
            raise KernelEvalError((t, x, z), exc) from exc

    def K(self, t, x, y):
        """Unnormalized kernel K(t,x,y) = k(t,x,y-x) / |y-x|^(N+alpha)."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        z = y - x
        dist = np.abs(z) if self.params.N == 1 else np.linalg.norm(z, axis=-1)
        return self(t, x, z) * dist ** -(self.params.N + self.params.alpha)


def displacement_norm(z, N: int):
    z = np.asarray(z, dtype=float)
    return np.abs(z) if N == 1 else np.linalg.norm(z, axis=-1)


def unit_ball_volume(N: int) -> float:
    return math.pi ** (N / 2.0) / math.gamma(N / 2.0 + 1.0)


def sphere_surface(N: int) -> float:
    """Surface measure of S^{N-1}; the zero-sphere carries counting measure 2."""
    return 2.0 if N == 1 else 2.0 * math.pi


def sphere_quadrature(N: int, n_points: int = 64) -> tuple[np.ndarray, np.ndarray]:
    """Directions and weights integrating over S^{N-1}.

    N=1 uses the exact two-point set {-1, +1}; N=2 uses n_points equally spaced
    angles with trapezoid weights (spectrally accurate for smooth integrands).
    """
    if N == 1:
        return np.array([[-1.0], [1.0]]), np.array([1.0, 1.0])
    ang = 2.0 * math.pi * np.arange(n_points) / n_points
    dirs = np.stack([np.cos(ang), np.sin(ang)], axis=1)
    return dirs, np.full(n_points, 2.0 * math.pi / n_points)


def fractional_symbol_constant(N: int, alpha: float) -> float:
    """Normalizing constant making the constant-profile operator have symbol |xi|^alpha."""
    return (
        alpha
        * 2.0 ** (alpha - 1.0)
        * math.gamma((N + alpha) / 2.0)
        / (math.pi ** (N / 2.0) * math.gamma(1.0 - alpha / 2.0))
    )


def zeta0(N: int, gamma: float) -> float:
    """Canonical lower-bound radius max{(8/V_N)^(1/N), 2*11^(1/gamma)}."""
    if N < 1 or int(N) != N:
        raise ParameterError(f"N must be a positive integer, got {N}")
    if not gamma > 0.0:
        raise ParameterError(f"gamma must be positive, got {gamma}")
    return max((8.0 / unit_ball_volume(N)) ** (1.0 / N), 2.0 * 11.0 ** (1.0 / gamma))


# ---------------------------------------------------------------------------
# built-in kernels


def make_fractional_heat(params: KernelParams) -> Kernel:
    """Constant profile k = c_alpha, whose operator has Fourier symbol |xi|^alpha.

    The symbol normalization need not sit inside [1/Lambda, Lambda] for the
    requested Lambda, so the stored ellipticity constant is lifted to
    max(Lambda, c_alpha, 1/c_alpha); the conditions then pass with tau = 0,
    s0 = inf.
    """
    c = fractional_symbol_constant(params.N, params.alpha)
    need = max(c, 1.0 / c)
    if params.Lambda < need:
        params = replace(params, Lambda=need)

    def k(t, x, z):
        shape = np.broadcast_shapes(
            np.shape(t), _xshape(x, params.N), _xshape(z, params.N)
        )
        return np.full(shape, c)

    return Kernel(
        k,
        params,
        translation_invariant=True,
        time_independent=True,
        smooth=True,
        label=f"fractional_heat(alpha={params.alpha})",
    )


def _xshape(x, N):
    """Broadcast shape contributed by a coordinate argument."""
    s = np.shape(x)
    if N == 1:
        return s
    return s[:-1] if s else s


def _even_witness(profile, N: int, tol: float = 1e-10):
    """Return a displacement where profile(z) != profile(-z), or None."""
    radii = np.geomspace(1e-3, 10.0, 40)
    dirs, _ = sphere_quadrature(N, 32)
    for d in dirs:
        z = radii[:, None] * d[None, :] if N == 2 else radii * d[0]
        a = np.asarray(profile(z), dtype=float)
        b = np.asarray(profile(-z), dtype=float)
        bad = np.abs(a - b) > tol * (1.0 + np.abs(a))
        if np.any(bad):
            i = int(np.argmax(bad))
            return z[i]
    return None


def make_translation_invariant(profile, params: KernelParams, smooth: bool = True,
                               label: str = "translation_invariant") -> Kernel:
    """Kernel k(t,x,z) = profile(z) for an even nonnegative profile.

    Evenness is certified by sampling; an asymmetric profile is rejected with a
    witness displacement.  Evenness makes the spherical-mean cancellation
    integral vanish identically, so any nu in (alpha-1, 1) with tau = 0,
    s0 = inf certifies the alpha >= 1 case.
    """
    witness = _even_witness(profile, params.N)
    if witness is not None:
        raise ParameterError(f"profile is not even: profile(z) != profile(-z) at z = {witness}")

    def k(t, x, z):
        vals = np.asarray(profile(z), dtype=float)
        shape = np.broadcast_shapes(np.shape(t), _xshape(x, params.N), vals.shape)
        return np.broadcast_to(vals, shape)

    return Kernel(k, params, translation_invariant=True, time_independent=True,
                  smooth=smooth, label=label)


def make_expression_kernel(source: str, params: KernelParams, smooth: bool = True,
                           label: str | None = None) -> Kernel:
    """Kernel from an expression in t, x, z, r (N=1) or t, x1, x2, z1, z2, r (N=2)."""
    if params.N == 1:
        expr = Expression(source, ("t", "x", "z", "r"))

        def k(t, x, z):
            z = np.asarray(z, dtype=float)
            out = expr(t=t, x=x, z=z, r=np.abs(z))
            shape = np.broadcast_shapes(np.shape(t), np.shape(x), z.shape)
            return np.broadcast_to(np.asarray(out, dtype=float), shape)

    else:
        expr = Expression(source, ("t", "x1", "x2", "z1", "z2", "r"))

        def k(t, x, z):
            x = np.asarray(x, dtype=float)
            z = np.asarray(z, dtype=float)
            out = expr(t=t, x1=x[..., 0], x2=x[..., 1], z1=z[..., 0], z2=z[..., 1],
                       r=np.linalg.norm(z, axis=-1))
            shape = np.broadcast_shapes(np.shape(t), x.shape[:-1], z.shape[:-1])
            return np.broadcast_to(np.asarray(out, dtype=float), shape)

    time_indep = "t" not in source
    return Kernel(k, params, translation_invariant=False, time_independent=time_indep,
                  smooth=smooth, label=label or f"expr({source})")


# ---------------------------------------------------------------------------
# condition checking


@dataclass(frozen=True)
class SamplingPlan:
    """Where the sampled certification looks.

    Radii are log-spaced; every sphere direction from the N-dependent
    quadrature is used for the cancellation integral.
    """

    box_radius: float = 8.0
    n_times: int = 8
    time_span: tuple[float, float] = (0.0, 1.0)
    n_space: int = 16
    n_radii: int = 24
    radius_min: float | None = None
    radius_max: float | None = None
    sphere_points: int = 64

    def times(self) -> np.ndarray:
        return np.linspace(self.time_span[0], self.time_span[1], self.n_times)

    def space_samples(self, N: int) -> np.ndarray:
        if N == 1:
            return np.linspace(-self.box_radius, self.box_radius, self.n_space)[:, None]
        m = max(2, int(round(math.sqrt(self.n_space))))
        ax = np.linspace(-self.box_radius, self.box_radius, m)
        xx, yy = np.meshgrid(ax, ax, indexing="ij")
        return np.stack([xx.ravel(), yy.ravel()], axis=1)

    def radii(self) -> np.ndarray:
        lo = self.radius_min if self.radius_min is not None else 1e-3 * self.box_radius
        hi = self.radius_max if self.radius_max is not None else 4.0 * self.box_radius
        return np.geomspace(lo, hi, self.n_radii)


@dataclass(frozen=True)
class Verdict:
    passed: bool
    witness: dict | None = None


@dataclass(frozen=True)
class ConditionReport:
    """Sampled certificate for the kernel conditions (not a proof)."""

    symmetry_max_defect: float
    lower_bound_margin: float
    upper_bound_margin: float
    holder_defect: float | None
    cancellation_profile: np.ndarray | None  # columns (s, |int k sigma| / s^nu)
    verdicts: dict[str, Verdict]
    remark13_bound_holds: bool | None = None
    remark13_measured_ratio: float | None = None
    remark15_margin: float | None = None

    @property
    def passed(self) -> bool:
        return all(v.passed for v in self.verdicts.values())


def cancellation_integral(kernel: Kernel, t, x, s, sphere_points: int = 64) -> np.ndarray:
    """|int_{S^{N-1}} k(t, x, s sigma) sigma dsigma| for an array of radii s."""
    N = kernel.params.N
    dirs, w = sphere_quadrature(N, sphere_points)
    s = np.atleast_1d(np.asarray(s, dtype=float))
    if N == 1:
        xx = np.asarray(x, dtype=float)
        vec = kernel(t, xx, s * 1.0) - kernel(t, xx, -s)
        return np.abs(vec)
    z = s[:, None, None] * dirs[None, :, :]  # (ns, nd, 2)
    xx = np.broadcast_to(np.asarray(x, dtype=float), (len(s), len(dirs), 2))
    vals = kernel(t, xx, z)  # (ns, nd)
    comp = np.einsum("sd,dj,d->sj", vals, dirs, w)
    return np.linalg.norm(comp, axis=-1)


def check_conditions(kernel: Kernel, plan: SamplingPlan | None = None) -> ConditionReport:
    """Sampled certification of symmetry, bounds, and (alpha >= 1) Hoelder/cancellation."""
    p = kernel.params
    plan = plan or SamplingPlan()
    N = p.N
    times = plan.times() if not kernel.time_independent else plan.times()[:1]
    xs = plan.space_samples(N)
    radii = plan.radii()
    dirs, _ = sphere_quadrature(N, plan.sphere_points)

    verdicts: dict[str, Verdict] = {}

    # symmetry: k(t, x, y-x) vs k(t, y, x-y) over all sampled (t, x, radius, direction)
    sym_defect, sym_wit = 0.0, None
    low_margin, low_wit = INF, None
    up_margin, up_wit = INF, None
    kmax = 0.0
    for t in times:
        for d in dirs:
            z = radii[:, None] * d[None, :]
            if N == 1:
                zz = z[:, 0]
                xb = xs[:, 0][:, None]
                k_xy = kernel(t, xb, zz[None, :])
                k_yx = kernel(t, xb + zz[None, :], -zz[None, :])
            else:
                xb = xs[:, None, :]
                zz = z[None, :, :]
                k_xy = kernel(t, xb, np.broadcast_to(zz, xb.shape[:1] + z.shape))
                k_yx = kernel(t, xb + zz, -np.broadcast_to(zz, xb.shape[:1] + z.shape))
            kmax = max(kmax, float(k_xy.max()))
            defect = np.abs(k_xy - k_yx)
            idx = np.unravel_index(np.argmax(defect), defect.shape)
            if defect[idx] > sym_defect:
                sym_defect = float(defect[idx])
                sym_wit = {"t": float(t), "x": xs[idx[0]].tolist(), "z": (radii[idx[-1]] * d).tolist()}

            rr = radii[None, :]
            lower = np.where(rr <= p.zeta, p.Lambda * k_xy - 1.0, INF)
            upper = p.Lambda * (1.0 + rr**p.omega) - k_xy
            i = np.unravel_index(np.argmin(lower), lower.shape)
            if lower[i] < low_margin:
                low_margin = float(lower[i])
                low_wit = {"t": float(t), "x": xs[i[0]].tolist(), "z": (radii[i[-1]] * d).tolist()}
            i = np.unravel_index(np.argmin(upper), upper.shape)
            if upper[i] < up_margin:
                up_margin = float(upper[i])
                up_wit = {"t": float(t), "x": xs[i[0]].tolist(), "z": (radii[i[-1]] * d).tolist()}

    verdicts["symmetry"] = Verdict(sym_defect <= 1e-12 * (1.0 + kmax),
                                   sym_wit if sym_defect > 1e-12 * (1.0 + kmax) else None)
    verdicts["lower_bound"] = Verdict(low_margin >= -1e-12, None if low_margin >= 0 else low_wit)
    verdicts["upper_bound"] = Verdict(up_margin >= -1e-12, None if up_margin >= 0 else up_wit)

    holder_defect = None
    prof = None
    r13_holds = None
    r13_ratio = None
    r15_margin = None
    if p.alpha >= 1.0:
        ho = p.high_order
        # (1.4): sup |k(t,x,z) - k(t,x,z~)| / |z - z~|^nu over |z-z~| <= s0, |z| <= s0
        s_hi = min(ho.s0, 4.0 * plan.box_radius)
        base_r = np.geomspace(min(radii[0], s_hi / 8), s_hi * 0.999, plan.n_radii)
        worst_q = 0.0
        for t in times:
            for d in dirs:
                z = base_r[:, None] * d[None, :]
                for shift in (0.25, 0.5, 1.0):
                    r2 = np.minimum(base_r * (1.0 + shift), s_hi * 0.999)
                    z2 = r2[:, None] * d[None, :]
                    gap = np.linalg.norm(z2 - z, axis=-1)
                    ok = (gap > 0) & (gap <= ho.s0)
                    if not np.any(ok):
                        continue
                    if N == 1:
                        xb = xs[:, 0][:, None]
                        dk = np.abs(kernel(t, xb, z[:, 0][None, :]) - kernel(t, xb, z2[:, 0][None, :]))
                    else:
                        xb = xs[:, None, :]
                        dk = np.abs(
                            kernel(t, xb, np.broadcast_to(z[None], (len(xs),) + z.shape))
                            - kernel(t, xb, np.broadcast_to(z2[None], (len(xs),) + z2.shape))
                        )
                    q = dk[:, ok] / gap[ok][None, :] ** ho.nu
                    worst_q = max(worst_q, float(q.max()))
        holder_defect = worst_q - ho.tau

        # (1.5): cancellation profile on a log-spaced s grid, stored as ratio to s^nu
        s_grid = radii
        worst = np.zeros_like(s_grid)
        for t in times:
            for x in xs:
                vals = cancellation_integral(kernel, t, x if N == 2 else x[0], s_grid,
                                             plan.sphere_points)
                worst = np.maximum(worst, vals)
        prof = np.stack([s_grid, worst / s_grid**ho.nu], axis=1)
        in_range = s_grid < ho.s0
        canc_ok = bool(np.all(worst[in_range] <= ho.tau * s_grid[in_range] ** ho.nu + 1e-12))
        wit = None
        if not canc_ok:
            j = int(np.argmax(worst[in_range] - ho.tau * s_grid[in_range] ** ho.nu))
            wit = {"s": float(s_grid[in_range][j]), "value": float(worst[in_range][j])}
        verdicts["cancellation"] = Verdict(canc_ok, wit)
        verdicts["holder"] = Verdict(
            holder_defect <= 1e-12,
            None if holder_defect <= 1e-12 else {"quotient": worst_q, "tau": ho.tau},
        )

        # Hoelder pass implies the cancellation bound with the sharp constant
        # 2^nu * |S+^{N-1}| in front of tau (measured ratio recorded regardless).
        if verdicts["holder"].passed and ho.tau > 0:
            half = sphere_surface(N) / 2.0
            c_sharp = 2.0**ho.nu * half * ho.tau
            sel = s_grid < ho.s0 / 2.0
            if np.any(sel):
                ratios = worst[sel] / (c_sharp * s_grid[sel] ** ho.nu)
                r13_ratio = float(ratios.max())
                r13_holds = bool(r13_ratio <= 1.0 + 1e-9)
        elif verdicts["holder"].passed:
            r13_ratio = 0.0 if np.all(worst == 0.0) else INF
            r13_holds = bool(np.all(worst[s_grid < ho.s0 / 2.0] <= 1e-12))

        # Remark 1.5 extension to all s with tau_bar = max{tau, C Lambda s0^{-nu}}
        c_full = sphere_surface(N)
        tau_bar = max(ho.tau, c_full * p.Lambda * (ho.s0 ** -ho.nu if ho.s0 < INF else 0.0))
        if ho.s0 == INF:
            tau_bar = max(ho.tau, 0.0)
        bound = tau_bar * s_grid**ho.nu * (1.0 + s_grid**p.omega)
        r15_margin = float(np.min(bound - worst))

    return ConditionReport(
        symmetry_max_defect=sym_defect,
        lower_bound_margin=low_margin,
        upper_bound_margin=up_margin,
        holder_defect=holder_defect,
        cancellation_profile=prof,
        verdicts=verdicts,
        remark13_bound_holds=r13_holds,
        remark13_measured_ratio=r13_ratio,
        remark15_margin=r15_margin,
    )


# ---------------------------------------------------------------------------
# derived kernels


def backward(kernel: Kernel, t_bar: float) -> Kernel:
    """Time-reversed kernel K^(t_bar)(s, x, y) = K(t_bar - s, x, y)."""
    if not np.isfinite(t_bar):
        raise ParameterError(f"t_bar must be finite, got {t_bar}")
    if kernel.time_independent:
        return kernel

    def k(s, x, z):
        return kernel(t_bar - np.asarray(s, dtype=float), x, z)

    return replace(kernel, k=k, label=f"backward({kernel.label}, {t_bar})")


def rescale(kernel: Kernel, w0: GridFunction, eps: float) -> tuple[Kernel, GridFunction]:
    """Scale reduction: profile k^eps(t,x,z) = k(eps^alpha t, eps x, eps z), w0^eps(x) = w0(eps x).

    The returned kernel's zeta is zeta/eps (so eps = zeta/zeta0 lifts a small
    support radius to the canonical one); s0 scales the same way and tau picks
    up eps^nu.
    """
    if not 0.0 < eps <= 1.0:
        raise ParameterError(f"eps must lie in (0, 1], got {eps}")
    p = kernel.params
    if eps == 1.0:
        return kernel, w0
    ho = p.high_order
    if ho is not None:
        ho = HighOrderParams(nu=ho.nu, s0=ho.s0 / eps if ho.s0 < INF else INF,
                             tau=ho.tau * eps**ho.nu)
    params = replace(p, zeta=p.zeta / eps if p.zeta < INF else INF, high_order=ho)
    a = p.alpha

    def k(t, x, z):
        return kernel(eps**a * np.asarray(t, dtype=float), eps * np.asarray(x, dtype=float),
                      eps * np.asarray(z, dtype=float))

    scaled = Kernel(k, params, translation_invariant=kernel.translation_invariant,
                    time_independent=kernel.time_independent, smooth=kernel.smooth,
                    label=f"rescale({kernel.label}, {eps})")

    ax = w0.grid.axis
    if w0.grid.ndim == 1:
        vals = np.interp(eps * ax, ax, w0.values)
    else:
        from numpy import clip

        pos = (eps * ax + w0.grid.box_radius) / w0.grid.h
        i0 = clip(np.floor(pos).astype(int), 0, w0.grid.n_points - 2)
        fr = pos - i0
        v = w0.values
        vx = v[i0, :] * (1 - fr)[:, None] + v[i0 + 1, :] * fr[:, None]
        vals = vx[:, i0] * (1 - fr)[None, :] + vx[:, i0 + 1] * fr[None, :]
    return scaled, w0.with_values(vals)


def _bump_nodes(n: int = 8) -> tuple[np.ndarray, np.ndarray]:
    """Gauss nodes/weights on [-1/2, 1/2] against the normalized standard bump."""
    x, w = np.polynomial.legendre.leggauss(n)
    u = 0.5 * x * 0.999  # keep strictly inside the support
    bump = np.exp(-1.0 / (1.0 - (2.0 * u) ** 2))
    wts = w * bump
    return u, wts / wts.sum()


def mollify(kernel: Kernel, eps: float, T: float = INF) -> Kernel:
    """Truncate-and-smooth regularization of the kernel profile.

    The profile h(t,x,y) = k(t,x,y-x) is replaced by 1/Lambda where
    |x-y| >= 1/eps or t > min(1/eps, T), then convolved with a tensorized
    compactly supported bump of width eps in (t, x, y).  The result carries
    zeta/2 and 2*Lambda (and s0/2 when alpha >= 1), matching the parameter
    bookkeeping of the regularized family.
    """
    p = kernel.params
    if not eps > 0.0:
        raise ParameterError(f"eps must be positive, got {eps}")
    if p.zeta < INF and eps > p.zeta / 4.0:
        raise ParameterError(f"eps must be << zeta/2 (require eps <= zeta/4 = {p.zeta / 4.0})")
    if p.high_order is not None and p.high_order.s0 < INF and eps > p.high_order.s0 / 4.0:
        raise ParameterError("eps must be << s0/2 (require eps <= s0/4)")

    lam_inv = 1.0 / p.Lambda
    t_cut = min(1.0 / eps, T)
    r_cut = 1.0 / eps
    N = p.N
    u, w = _bump_nodes()
    n = len(u)

    def h_trunc(t, x, y):
        z = y - x
        dist = displacement_norm(z, N)
        tt = np.maximum(np.asarray(t, dtype=float), 0.0)
        vals = kernel(np.minimum(tt, t_cut), x, z)
        keep = (dist < r_cut) & (np.asarray(t, dtype=float) <= t_cut)
        return np.where(keep, vals, lam_inv)

    def k(t, x, z):
        t = np.asarray(t, dtype=float)
        x = np.asarray(x, dtype=float)
        z = np.asarray(z, dtype=float)
        out = 0.0
        if N == 1:
            for ia in range(n):
                for ib in range(n):
                    for ic in range(n):
                        xa = x - eps * u[ib]
                        ya = x + z - eps * u[ic]
                        out = out + w[ia] * w[ib] * w[ic] * h_trunc(t - eps * u[ia], xa, ya)
            return out
        # N=2: tensorize the spatial bump over both coordinates of x and y
        for ia in range(n):
            wa = w[ia]
            for ib in range(n):
                for ic in range(n):
                    sb = eps * np.array([u[ib], u[ic]])
                    for id_ in range(n):
                        for ie in range(n):
                            sc = eps * np.array([u[id_], u[ie]])
                            out = out + (
                                wa * w[ib] * w[ic] * w[id_] * w[ie]
                                * h_trunc(t - eps * u[ia], x - sb, x + z - sc)
                            )
        return out

    ho = p.high_order
    if ho is not None:
        ho = HighOrderParams(nu=ho.nu, s0=ho.s0 / 2.0 if ho.s0 < INF else INF, tau=ho.tau)
    params = replace(p, zeta=p.zeta / 2.0 if p.zeta < INF else INF,
                     Lambda=2.0 * p.Lambda, high_order=ho)
    return Kernel(k, params, translation_invariant=kernel.translation_invariant,
                  time_independent=kernel.time_independent, smooth=True,
                  label=f"mollify({kernel.label}, {eps})")


# ---------------------------------------------------------------------------
# JSON loading


def _parse_extended(v):
    if isinstance(v, str) and v.lower() in ("inf", "infinity"):
        return INF
    return float(v)


def params_from_dict(d: dict) -> KernelParams:
    ho = None
    if "nu" in d or "high_order" in d:
        src = d.get("high_order", d)
        ho = HighOrderParams(nu=float(src["nu"]), s0=_parse_extended(src.get("s0", INF)),
                             tau=float(src.get("tau", 0.0)))
    return KernelParams(
        N=int(d.get("N", 1)),
        alpha=float(d["alpha"]),
        zeta=_parse_extended(d.get("zeta", INF)),
        omega=float(d.get("omega", 0.0)),
        Lambda=float(d.get("Lambda", 1.0)),
        high_order=ho,
        gamma=float(d["gamma"]) if "gamma" in d else None,
    )


def kernel_from_dict(doc: dict) -> Kernel:
    """Build a kernel from its JSON document (see README for the schema)."""
    params = params_from_dict(doc.get("params", {}))
    ktype = doc.get("type", "custom_expression")
    if ktype == "fractional_heat":
        return make_fractional_heat(params)
    if ktype == "translation_invariant":
        source = doc["profile"]
        if params.N == 1:
            expr = Expression(source, ("z", "r"))
            profile = lambda z: expr(z=np.asarray(z, dtype=float), r=np.abs(np.asarray(z, dtype=float)))
        else:
            expr = Expression(source, ("z1", "z2", "r"))

            def profile(z):
                z = np.asarray(z, dtype=float)
                return expr(z1=z[..., 0], z2=z[..., 1], r=np.linalg.norm(z, axis=-1))

        return make_translation_invariant(profile, params, label=f"ti({source})")
    if ktype == "custom_expression":
        return make_expression_kernel(doc["profile"], params)
    raise ParameterError(f"unknown kernel type {ktype!r}")

"""Bundled kernels, fields, and problems used by the verification battery."""

from __future__ import annotations

import numpy as np

from .grid import Grid, GridFunction, from_callable
from .kernels import (HighOrderParams, Kernel, KernelParams,
                      make_expression_kernel, make_fractional_heat,
                      make_translation_invariant)
from .nonlinear import HolderPhi, NonlinearProblem, ScalarTriple

_NU = {1.0: 0.5, 1.25: 0.55, 1.5: 0.6, 1.75: 0.7}


def heat_params(alpha: float, N: int = 1, gamma: float | None = None,
                Lambda: float = 1.0) -> KernelParams:
    ho = None
    if alpha >= 1.0:
        ho = HighOrderParams(nu=_NU.get(alpha, (alpha - 1.0 + 1.0) / 2.0), s0=np.inf, tau=0.0)
    return KernelParams(N=N, alpha=alpha, Lambda=Lambda, high_order=ho, gamma=gamma)


def fractional_heat(alpha: float, N: int = 1, gamma: float | None = None) -> Kernel:
    return make_fractional_heat(heat_params(alpha, N=N, gamma=gamma))


def cosine_kernel(alpha: float = 1.5, N: int = 1) -> Kernel:
    """Translation-invariant non-constant profile 1 + 0.5 cos|z|."""
    ho = None
    if alpha >= 1.0:
        ho = HighOrderParams(nu=_NU.get(alpha, 0.6), s0=1.0, tau=0.5)
    params = KernelParams(N=N, alpha=alpha, Lambda=2.0, high_order=ho)

    def profile(z):
        z = np.asarray(z, dtype=float)
        r = np.abs(z) if N == 1 else np.linalg.norm(z, axis=-1)
        return 1.0 + 0.5 * np.cos(r)

    return make_translation_invariant(profile, params, label=f"cosine(alpha={alpha})")


def xdep_kernel(alpha: float = 0.5) -> Kernel:
    """x-dependent symmetric kernel 1 + 0.4 cos((x+y)/2) cos(|x-y|) in midpoint form."""
    params = KernelParams(N=1, alpha=alpha, Lambda=1.7)
    return make_expression_kernel("1 + 0.4*cos(x + z/2)*cos(r)", params,
                                  label=f"xdep(alpha={alpha})")


def tdep_kernel(alpha: float = 0.5) -> Kernel:
    """Time-dependent constant-in-space profile 1 + t/(1+t)."""
    params = KernelParams(N=1, alpha=alpha, Lambda=2.0)
    return make_expression_kernel("1 + t/(1+t)", params, label=f"tdep(alpha={alpha})")


def gaussian_bump(grid: Grid, height: float = 1.0, width: float = 1.0,
                  center: float = 0.0, exterior: str = "zero") -> GridFunction:
    return from_callable(grid, lambda x: height * np.exp(-((x - center) / width) ** 2),
                         exterior=exterior)


def cosine_nonlinearity() -> ScalarTriple:
    """Even potential with phi'' = 1 + 0.4 cos(u), expressible in the grammar."""
    return ScalarTriple.from_sources(
        "u^2/2 + 0.4*(1 - cos(u))", "u + 0.4*sin(u)", "1 + 0.4*cos(u)"
    )


def linear_nonlinearity() -> ScalarTriple:
    return ScalarTriple.from_sources("u^2/2", "u", "0*u + 1")


def unit_g_kernel(alpha: float, Lambda: float = 4.0, nu: float = 0.75) -> Kernel:
    """G with constant normalized profile 1 (well inside the sqrt-Lambda bounds)."""
    ho = HighOrderParams(nu=nu, s0=np.inf, tau=0.0) if alpha >= 1.0 else None
    params = KernelParams(N=1, alpha=alpha, Lambda=max(np.sqrt(Lambda), 1.0), high_order=ho)

    def profile(z):
        return np.ones_like(np.asarray(z, dtype=float))

    return make_translation_invariant(profile, params, label=f"unitG(alpha={alpha})")


def nonlinear_problem(alpha: float, grid: Grid, Lambda: float = 4.0,
                      nu: float = 0.75, width: float = 1.0) -> NonlinearProblem:
    tri = cosine_nonlinearity()
    G = unit_g_kernel(alpha, Lambda=Lambda, nu=nu)
    theta0 = from_callable(grid, lambda x: np.exp(-((x / width) ** 2)), exterior="constant")
    hp = None
    if alpha >= 1.0:
        gmax = float(np.abs(np.gradient(theta0.values, grid.h)).max())
        semi = 0.4 * 2.0 ** (1.0 - nu)
        hp = HolderPhi(nu=nu, seminorm=semi, M=semi * gmax**nu)
    return NonlinearProblem(tri, G, theta0, Lambda=Lambda, holder_phi=hp)

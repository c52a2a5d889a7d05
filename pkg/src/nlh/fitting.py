"""Log-log exponent fitting with a bootstrap confidence half-width."""

from __future__ import annotations

import numpy as np

from .solver import ExponentFit


def fit_exponent(t, values, window=None, n_boot: int = 200, seed: int = 0,
                 min_points: int = 8, min_decade: float = 1.0) -> ExponentFit:
    """Least-squares slope of log(values) vs log(t) inside window.

    Requires at least min_points samples spanning at least min_decade decades
    of t, otherwise the fit is marked inconclusive.  The half-width is 1.96x
    the standard deviation of the slope over n_boot bootstrap resamples drawn
    with a fixed seed.
    """
    t = np.asarray(t, dtype=float)
    v = np.asarray(values, dtype=float)
    keep = (t > 0) & (v > 0)
    if window is not None:
        keep &= (t >= window[0]) & (t <= window[1])
    t, v = t[keep], v[keep]
    win = (float(t.min()), float(t.max())) if len(t) else (0.0, 0.0)
    if len(t) < min_points or (len(t) and np.log10(t.max() / t.min()) < min_decade):
        return ExponentFit(slope=np.nan, half_width=np.nan, conclusive=False,
                           n_points=len(t), window=win,
                           note="need >= 8 points spanning >= one decade")
    lt, lv = np.log(t), np.log(v)

    def lsq(ix):
        x, y = lt[ix], lv[ix]
        xm, ym = x.mean(), y.mean()
        den = ((x - xm) ** 2).sum()
        if den == 0.0:
            return np.nan
        return ((x - xm) * (y - ym)).sum() / den

    full = np.arange(len(t))
    slope = lsq(full)
    rng = np.random.Generator(np.random.PCG64(seed))
    boots = []
    for _ in range(n_boot):
        ix = rng.integers(0, len(t), size=len(t))
        s = lsq(ix)
        if np.isfinite(s):
            boots.append(s)
    hw = 1.96 * float(np.std(boots)) if boots else np.nan
    return ExponentFit(slope=float(slope), half_width=hw, conclusive=True,
                       n_points=len(t), window=win)

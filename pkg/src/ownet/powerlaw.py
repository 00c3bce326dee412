"""Decumulative distributions and discrete power-law fitting."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import optimize, special


@dataclass(frozen=True)
class PowerLawFit:
    exponent: float
    xmin: int
    n_tail: int
    method: str = "discrete"


def ccdf(values) -> list[tuple[int, float]]:
    """Points ``(x, P(X >= x))`` for every distinct value, ascending in x."""
    v = np.asarray(values)
    if v.size == 0:
        raise ValueError("ccdf of an empty sample")
    xs, counts = np.unique(v, return_counts=True)
    at_least = np.cumsum(counts[::-1])[::-1]
    return [(x.item(), c / v.size) for x, c in zip(xs, at_least.tolist())]


def _approx_exponent(tail: np.ndarray, xmin: int) -> float:
    return 1.0 + tail.size / np.log(tail / (xmin - 0.5)).sum()


def fit_power_law(values, xmin: int | None = None, method: str = "discrete") -> PowerLawFit:
    """Maximum-likelihood exponent of a discrete power law ``p(x) ~ x**-alpha``.

    ``method="discrete"`` maximises the exact likelihood, normalised by the
    Hurwitz zeta function ``zeta(alpha, xmin)``. ``method="approx"`` uses the
    closed form ``1 + n / sum(ln(x / (xmin - 0.5)))``, which is only accurate
    for xmin of roughly 6 or more.
    """
    v = np.asarray(values, dtype=np.float64)
    if v.size and (v <= 0).any():
        raise ValueError("power-law samples must be positive")
    if xmin is None:
        if v.size == 0:
            raise ValueError("need at least two samples")
        xmin = int(v.min())
    if xmin < 1:
        raise ValueError("xmin must be a positive integer")
    tail = v[v >= xmin]
    if tail.size < 2:
        raise ValueError(f"need at least two samples >= xmin={xmin}")
    if np.all(tail == xmin):
        raise ValueError("all tail samples equal xmin; exponent undefined")

    if method == "approx":
        alpha = _approx_exponent(tail, xmin)
    elif method == "discrete":
        mean_log = np.log(tail).mean()

        def nll(a):
            return np.log(special.zeta(a, xmin)) + a * mean_log

        start = _approx_exponent(tail, xmin)
        hi = max(2 * start, 10.0)
        while nll(hi) < nll(hi * 0.9):
            hi *= 2
            if hi > 1e4:
                raise ValueError("likelihood has no interior maximum")
        res = optimize.minimize_scalar(nll, bounds=(1.0 + 1e-9, hi), method="bounded",
                                       options={"xatol": 1e-10})
        alpha = float(res.x)
    else:
        raise ValueError(f"unknown method {method!r}")
    return PowerLawFit(float(alpha), int(xmin), int(tail.size), method)


def sample_discrete_power_law(alpha: float, n: int, xmin: int = 1, rng=None,
                              x_table: int = 10**6) -> np.ndarray:
    """Draw from ``p(x) = x**-alpha / zeta(alpha, xmin)`` by inverting the CDF.

    Values up to ``xmin + x_table`` use an exact table; the remaining tail
    mass falls back to the continuous approximation.
    """
    rng = np.random.default_rng(rng)
    xs = np.arange(xmin, xmin + x_table, dtype=np.float64)
    pmf = xs ** -alpha / special.zeta(alpha, xmin)
    cdf = np.cumsum(pmf)
    u = rng.random(n)
    idx = np.searchsorted(cdf, u, side="right")
    out = xs[np.minimum(idx, x_table - 1)]
    over = idx >= x_table
    if over.any():
        top = xs[-1] + 0.5
        r = (1 - u[over]) / (1 - cdf[-1])
        out[over] = np.floor(top * np.clip(r, 1e-300, 1) ** (-1 / (alpha - 1)) + 0.5)
    return out.astype(np.int64)

"""The two one-variable cut-off profiles: the radial step rho and the outer map G."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from .errors import InfeasibleRamp


def _psi(t):
    """exp(-1/t) for t > 0, else 0; returns (psi, dpsi/dt)."""
    t = np.asarray(t, dtype=float)
    pos = t > 0.0
    safe = np.where(pos, t, 1.0)
    with np.errstate(over="ignore"):  # -1/t = -inf for subnormal t, and exp(-inf) = 0 is right
        val = np.where(pos, np.exp(-1.0 / safe), 0.0)
    # val underflows long before t * t does, so only divide where val > 0
    live = val > 0.0
    return val, np.where(live, val / np.where(live, safe * safe, 1.0), 0.0)


def smooth_step(x):
    """C-infinity step: 0 for x <= 0, 1 for x >= 1, symmetric about (1/2, 1/2).

    Returns the value and the first derivative.
    """
    p, dp = _psi(x)
    q, dq = _psi(1.0 - np.asarray(x, dtype=float))
    den = p + q
    val = p / den
    der = (dp * q + p * dq) / (den * den)
    return val, der


@dataclass(frozen=True)
class RhoProfile:
    """rho(r) = step(3r - 1): zero exactly on r <= 1/3, one exactly on r >= 2/3."""

    def __call__(self, r):
        return smooth_step(3.0 * np.asarray(r, dtype=float) - 1.0)[0]

    def derivative(self, r):
        return 3.0 * smooth_step(3.0 * np.asarray(r, dtype=float) - 1.0)[1]

    def both(self, r):
        v, d = smooth_step(3.0 * np.asarray(r, dtype=float) - 1.0)
        return v, 3.0 * d


def build_rho() -> RhoProfile:
    return RhoProfile()


_GL_X, _GL_W = np.polynomial.legendre.leggauss(10)


@dataclass(frozen=True)
class GProfile:
    """Monotone G with G = 1 for t <= e^a, G(t) = t for t >= e^u_end, t (log G)'(t) <= 1.

    On the log scale u = log t the profile is g(u) = log G(e^u) with slope
    g'(u) = step((u - a) / (u_end - a)) in [0, 1].  The ramp start ``a`` is
    root-found so that g(u_end) = u_end, i.e. the slope integrates to exactly
    u_end over the ramp.  g is tabulated by Gauss-Legendre quadrature and
    interpolated with cubic Hermite pieces that use the exact slope.
    """

    lam: float
    C: float
    u_end: float
    a: float
    table_u: np.ndarray = field(repr=False)
    table_g: np.ndarray = field(repr=False)
    _spline: CubicHermiteSpline = field(repr=False, compare=False)

    def slope(self, u):
        return smooth_step((np.asarray(u, dtype=float) - self.a) / (self.u_end - self.a))[0]

    def log_profile(self, u):
        """g(u) and g'(u)."""
        u = np.asarray(u, dtype=float)
        inside = (u > self.a) & (u < self.u_end)
        g = np.where(u >= self.u_end, u, 0.0)
        g = np.where(inside, np.maximum(self._spline(np.clip(u, self.a, self.u_end)), 0.0), g)
        return g, self.slope(u)

    def __call__(self, t):
        g, _ = self.log_profile(np.log(t))
        return np.exp(g)

    def derivative(self, t):
        t = np.asarray(t, dtype=float)
        g, dg = self.log_profile(np.log(t))
        return np.exp(g) * dg / t

    def both(self, t):
        """G(t), G'(t) and t (log G)'(t)."""
        t = np.asarray(t, dtype=float)
        g, dg = self.log_profile(np.log(t))
        G = np.exp(g)
        return G, G * dg / t, dg

    def both_log(self, log_t):
        """G and t (log G)'(t) from log t; safe where t itself would underflow."""
        g, dg = self.log_profile(log_t)
        return np.exp(g), dg

    @property
    def identity_from(self) -> float:
        """G(t) = t for every t at or above this value."""
        return float(np.exp(self.u_end))

    @property
    def one_until(self) -> float:
        """G(t) = 1 for every t at or below this value."""
        return float(np.exp(self.a))


def _ramp_integral(a, u_end, panels=64):
    """Composite 10-point Gauss-Legendre integral of the ramp slope over [a, u_end]."""
    edges = np.linspace(a, u_end, panels + 1)
    half = 0.5 * np.diff(edges)
    xs = 0.5 * (edges[1:] + edges[:-1])[:, None] + half[:, None] * _GL_X[None, :]
    vals = smooth_step((xs - a) / (u_end - a))[0]
    return float(np.sum(half * (vals @ _GL_W)))


def build_G(lam: float, C: float, table_size: int = 4096, end_fraction: float = 0.5) -> GProfile:
    """Construct G for 1 < lam < e^C.

    The ramp ends at u_end = end_fraction * min(log lam, C - log lam) and its
    start is found by bisection inside (log lam - C, u_end).
    """
    if not (1.0 < lam < np.exp(C)):
        raise InfeasibleRamp(f"need 1 < lambda < e^C, got lambda={lam}, C={C}")
    log_lam = float(np.log(lam))
    u_end = end_fraction * min(log_lam, C - log_lam)
    lo, hi = log_lam - C, u_end
    # residual(a) = integral of the slope over [a, u_end] minus u_end; decreasing in a
    f_lo = _ramp_integral(lo, u_end) - u_end
    f_hi = -u_end
    if not (f_lo > 0.0 > f_hi):
        raise InfeasibleRamp("ramp-start bracket does not straddle the root")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if hi - lo <= 1e-13:
            break
        if _ramp_integral(mid, u_end) - u_end > 0.0:
            lo = mid
        else:
            hi = mid
    a = 0.5 * (lo + hi)

    nodes = np.linspace(a, u_end, table_size)
    width = u_end - a
    # integral of the slope over each cell, accumulated backwards from g(u_end) = u_end
    half = 0.5 * np.diff(nodes)
    mids = 0.5 * (nodes[1:] + nodes[:-1])
    xs = mids[:, None] + half[:, None] * _GL_X[None, :]
    cell = half * (smooth_step((xs - a) / width)[0] @ _GL_W)
    tail = np.concatenate([np.cumsum(cell[::-1])[::-1], [0.0]])
    table_g = u_end - tail
    slopes = smooth_step((nodes - a) / width)[0]
    spline = CubicHermiteSpline(nodes, table_g, slopes)
    return GProfile(float(lam), float(C), float(u_end), float(a), nodes, table_g, spline)

"""Standard contact form, the contact vector field of H, and Reeb certification.

All vectors are Cartesian arrays with components (dx_1, dy_1, ..., dx_n, dy_n, dz).
For alpha = alpha_st / H the Reeb field is the contact vector field

    X = H d/dz + sum_j [ (r_j/2 H_z - H_theta_j / r_j) d/dr_j
                         + (H_r_j / r_j) (d/dtheta_j - r_j^2/2 d/dz) ].
"""

from __future__ import annotations

import math
from bisect import bisect_right

import numpy as np

from .hamiltonian import R_CUT, HamiltonianModel, eval_H, polar_jet
from .phase import PhasePoint, as_cartesian, from_polar, split_cartesian, to_polar

__all__ = [
    "PhasePoint",
    "alpha_st",
    "d_alpha_st",
    "alpha",
    "d_alpha",
    "xi_frame",
    "polar_frame",
    "reeb_field",
    "cartesian_dH",
    "certify_reeb",
    "dz_rate",
    "from_polar",
]


def _squeeze(arr, p):
    return arr[0] if np.ndim(as_cartesian(p)) == 1 else arr


def alpha_st(p, v):
    """dz(v) + 1/2 sum_j (x_j dy_j - y_j dx_j)(v)."""
    x, y, _ = split_cartesian(as_cartesian(p))
    vx, vy, vz = split_cartesian(v)
    return vz + 0.5 * np.sum(x * vy - y * vx, axis=-1)


def d_alpha_st(p, v, w):
    """sum_j dx_j ^ dy_j on (v, w); independent of p."""
    vx, vy, _ = split_cartesian(v)
    wx, wy, _ = split_cartesian(w)
    return np.sum(vx * wy - vy * wx, axis=-1)


def xi_frame(p):
    """2n vectors spanning ker alpha_st, shape ``(..., 2n, 2n+1)``.

    Uses d/dx_j + (y_j/2) d/dz and d/dy_j - (x_j/2) d/dz, which stay valid on the
    polar axes.
    """
    cart = as_cartesian(p)
    x, y, _ = split_cartesian(cart)
    dim = cart.shape[-1]
    n = (dim - 1) // 2
    frame = np.zeros(cart.shape[:-1] + (2 * n, dim))
    for j in range(n):
        frame[..., 2 * j, 2 * j] = 1.0
        frame[..., 2 * j, -1] = 0.5 * y[..., j]
        frame[..., 2 * j + 1, 2 * j + 1] = 1.0
        frame[..., 2 * j + 1, -1] = -0.5 * x[..., j]
    return frame


def polar_frame(p):
    """The frame {d/dr_j, d/dtheta_j - r_j^2/2 d/dz} of ker alpha_st (needs r_j > 0)."""
    cart = as_cartesian(p)
    r, theta, _ = to_polar(cart)
    dim = cart.shape[-1]
    n = (dim - 1) // 2
    frame = np.zeros(cart.shape[:-1] + (2 * n, dim))
    x, y, _ = split_cartesian(cart)
    for j in range(n):
        frame[..., 2 * j, 2 * j] = np.cos(theta[..., j])
        frame[..., 2 * j, 2 * j + 1] = np.sin(theta[..., j])
        frame[..., 2 * j + 1, 2 * j] = -y[..., j]
        frame[..., 2 * j + 1, 2 * j + 1] = x[..., j]
        frame[..., 2 * j + 1, -1] = -0.5 * r[..., j] ** 2
    return frame


def _reeb_from_jet(cart, r, jet):
    x, y, _ = split_cartesian(cart)
    N, n = r.shape
    X = np.zeros((N, 2 * n + 1))
    X[:, -1] = 1.0
    inner = np.min(r, axis=-1) > R_CUT
    if np.any(inner):
        ri = r[inner]
        xi, yi = x[inner], y[inner]
        Hr, Ht, Hz, H = jet.H_r[inner], jet.H_theta[inner], jet.H_z[inner], jet.H[inner]
        rate_r = 0.5 * ri * Hz[:, None] - Ht / ri
        rate_t = Hr / ri
        Xi = np.empty((len(ri), 2 * n + 1))
        Xi[:, 0:-1:2] = rate_r * xi / ri - rate_t * yi
        Xi[:, 1:-1:2] = rate_r * yi / ri + rate_t * xi
        Xi[:, -1] = H - 0.5 * np.sum(ri * Hr, axis=-1)
        X[inner] = Xi
    return X


def reeb_field(m: HamiltonianModel, p):
    """Reeb vector field of alpha_st / H at p (Cartesian components)."""
    cart = np.atleast_2d(as_cartesian(p))
    r, theta, z = to_polar(cart)
    jet = polar_jet(m, r, theta, z)
    return _squeeze(_reeb_from_jet(cart, r, jet), p)


def _scalar_step(x):
    if x <= 0.0:
        return 0.0, 0.0
    if x >= 1.0:
        return 1.0, 0.0
    p = math.exp(-1.0 / x)
    q = math.exp(-1.0 / (1.0 - x))
    if p == 0.0 or q == 0.0:
        return (0.0 if p == 0.0 else 1.0), 0.0
    den = p + q
    return p / den, (p * q / (x * x) + p * q / ((1.0 - x) * (1.0 - x))) / (den * den)


def reeb_rhs(m: HamiltonianModel):
    """Right-hand side ``f(t, y)`` for one Cartesian state.

    Same field as ``reeb_field`` but evaluated with scalar arithmetic, which
    is an order of magnitude cheaper than the batched path for a single
    point.  The two are checked against each other in the test suite.
    """
    n, b, C, lam = m.n, m.b, m.C, m.lam
    dim = 2 * n + 1
    const_theta = m.field.is_constant and m.mu.is_constant
    zero = np.zeros(n)
    k_const = m.field.k(zero).tolist()
    mu_const = float(m.mu(zero))
    field_const = m.field.is_constant
    log_lam = math.log(lam)
    G = m.G
    a, u_end = G.a, G.u_end
    width = u_end - a
    knots = G._spline.x.tolist()
    coef = G._spline.c.T.tolist()
    last = len(coef) - 1
    e_z = np.zeros(dim)
    e_z[-1] = 1.0

    def rhs(_t, y):
        vals = y.tolist()
        xs, ys, z = vals[0:-1:2], vals[1:-1:2], vals[-1]
        r = [math.hypot(xs[j], ys[j]) for j in range(n)]
        if min(r) <= R_CUT:
            return e_z.copy()
        if const_theta:
            k, mu = k_const, mu_const
            qt = mt = None
        else:
            theta = np.arctan2(ys, xs)
            k = m.field.k(theta).tolist()
            mu = float(m.mu(theta))
            mt = m.mu.grad(theta).tolist()
            d2 = [(rj - 2.0) ** 2 for rj in r]
            if field_const:
                qt = [0.0] * n
            else:
                dk = m.field.dk(theta).tolist()
                qt = [sum(d2[i] * dk[i][j] for i in range(n)) for j in range(n)]
        S1 = sum(r)
        S2 = sum(rj * rj for rj in r)
        Q2 = sum(k[j] * (r[j] - 2.0) ** 2 for j in range(n)) + b * (2.0 * n * S2 - 2.0 * S1 * S1)
        rho, drho = zip(*(_scalar_step(3.0 * rj - 1.0) for rj in r))
        P = math.prod(rho)
        z2mu = z * z + mu
        T = 1.0 + C - Q2 - z2mu * S1
        u = log_lam + T * P - C  # log K
        if u <= a:
            return e_z.copy()
        if u >= u_end:
            g, dg = u, 1.0
        else:
            i = min(max(bisect_right(knots, u) - 1, 0), last)
            c0, c1, c2, c3 = coef[i]
            du = u - knots[i]
            g = max(((c0 * du + c1) * du + c2) * du + c3, 0.0)
            dg = _scalar_step((u - a) / width)[0]
        H = math.exp(g)
        w = H * dg  # dH = w * dlog K
        Hr = [0.0] * n
        Ht = [0.0] * n
        for j in range(n):
            dP = 3.0 * drho[j] * math.prod(rho[i] for i in range(n) if i != j)
            Q2r = 2.0 * k[j] * (r[j] - 2.0) + 4.0 * b * (n * r[j] - S1)
            Hr[j] = w * ((-Q2r - z2mu) * P + T * dP)
            if qt is not None:
                Ht[j] = w * (-qt[j] - mt[j] * S1) * P
        Hz = w * (-2.0 * z * S1 * P)
        out = np.empty(dim)
        for j in range(n):
            rate_r = 0.5 * r[j] * Hz - Ht[j] / r[j]
            rate_t = Hr[j] / r[j]
            out[2 * j] = rate_r * xs[j] / r[j] - rate_t * ys[j]
            out[2 * j + 1] = rate_r * ys[j] / r[j] + rate_t * xs[j]
        out[-1] = H - 0.5 * sum(r[j] * Hr[j] for j in range(n))
        return out

    return rhs


def cartesian_dH(m: HamiltonianModel, p):
    """Differential of H in Cartesian components (dH/dx_j, dH/dy_j, dH/dz)."""
    cart = np.atleast_2d(as_cartesian(p))
    r, theta, z = to_polar(cart)
    jet = polar_jet(m, r, theta, z)
    x, y, _ = split_cartesian(cart)
    out = np.zeros_like(cart)
    inner = np.min(r, axis=-1) > R_CUT
    ri, xi, yi = r[inner], x[inner], y[inner]
    Hr, Ht = jet.H_r[inner], jet.H_theta[inner]
    block = np.empty((len(ri), cart.shape[-1]))
    block[:, 0:-1:2] = Hr * xi / ri - Ht * yi / ri**2
    block[:, 1:-1:2] = Hr * yi / ri + Ht * xi / ri**2
    block[:, -1] = jet.H_z[inner]
    out[inner] = block
    return _squeeze(out, p), _squeeze(jet.H, p)


def alpha(m: HamiltonianModel, p, v):
    return alpha_st(p, v) / eval_H(m, p)


def d_alpha(m: HamiltonianModel, p, v, w):
    """d(alpha_st / H)(v, w) = dalpha_st/H - (dH ^ alpha_st)/H^2."""
    dH, H = cartesian_dH(m, p)
    dHv = np.sum(dH * v, axis=-1)
    dHw = np.sum(dH * w, axis=-1)
    return d_alpha_st(p, v, w) / H - (dHv * alpha_st(p, w) - dHw * alpha_st(p, v)) / H**2


def certify_reeb(m: HamiltonianModel, p):
    """(|alpha(X) - 1|, max_i |dalpha(X, e_i)|) over the xi_st frame e_i.

    alpha(X) and dalpha are evaluated from H and its Cartesian differential,
    independently of the closed-form expression used to build X.
    """
    cart = np.atleast_2d(as_cartesian(p))
    X = reeb_field(m, cart)
    dH, H = cartesian_dH(m, cart)
    a_res = np.abs(alpha_st(cart, X) / H - 1.0)
    frame = xi_frame(cart)
    Xb = np.broadcast_to(X[:, None, :], frame.shape)
    cb = np.broadcast_to(cart[:, None, :], frame.shape)
    dHX = np.sum(dH * X, axis=-1)[:, None]
    dHe = np.sum(dH[:, None, :] * frame, axis=-1)
    aX = alpha_st(cb, Xb)
    ae = alpha_st(cb, frame)
    Hb = H[:, None]
    vals = d_alpha_st(cb, Xb, frame) / Hb - (dHX * ae - dHe * aX) / Hb**2
    f_res = np.max(np.abs(vals), axis=-1)
    return _squeeze(a_res, p), _squeeze(f_res, p)


def dz_rate(m: HamiltonianModel, p):
    """dz(X) = H - 1/2 sum_j r_j H_r_j."""
    cart = np.atleast_2d(as_cartesian(p))
    r, theta, z = to_polar(cart)
    jet = polar_jet(m, r, theta, z)
    rate = np.where(np.min(r, axis=-1) > R_CUT, jet.H - 0.5 * np.sum(r * jet.H_r, axis=-1), 1.0)
    return _squeeze(rate, p)

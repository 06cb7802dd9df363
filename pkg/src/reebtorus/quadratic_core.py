"""The coupled quadratic form Q^b[tau] and its matrix A(b).

    Q^b[tau](r, theta) = sum_i k_i(theta) (r_i - tau)^2 + b sum_{p != q} (r_p - r_q)^2

with the second sum over ordered pairs, so that Q^b[0] = r^T A(b) r where
A(b) has diagonal k_i + 2(n-1)b and off-diagonal -2b.  Everything here is
vectorized over leading axes of ``r``/``theta`` (or of ``k``).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .errors import DomainError, MarginNegative, NotPositiveDefinite, SearchExhausted
from .torus_flows import NormalizedField, torus_grid

C_MAX = 7.0 / 9.0
L_LOW, L_HIGH = 1.0 / 3.0, 2.0 / 3.0


def _check_domain(r):
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0.0):
        raise DomainError("Q^b[tau] is defined only where every r_j > 0")
    return r


def q_value(k, r, tau, b):
    """Q^b[tau] from k values (no domain check)."""
    d = r - tau
    s1 = np.sum(r, axis=-1)
    s2 = np.sum(r * r, axis=-1)
    n = r.shape[-1]
    coupling = 2.0 * n * s2 - 2.0 * s1 * s1
    return np.sum(k * d * d, axis=-1) + b * coupling


def q_grad_r(k, r, tau, b):
    n = r.shape[-1]
    return 2.0 * k * (r - tau) + 4.0 * b * (n * r - np.sum(r, axis=-1, keepdims=True))


def q_grad_theta(dk, r, tau):
    """sum_i (dk_i/dtheta_j) (r_i - tau)^2 with ``dk[..., i, j]``."""
    d2 = (r - tau) ** 2
    return np.einsum("...i,...ij->...j", d2, dk)


def a_matrix(k, b):
    """A(b) for k values of shape ``(..., n)``; returns ``(..., n, n)``."""
    k = np.asarray(k, dtype=float)
    n = k.shape[-1]
    A = np.full(k.shape + (n,), -2.0 * b)
    idx = np.arange(n)
    A[..., idx, idx] = k + 2.0 * (n - 1) * b
    return A


@dataclass(frozen=True)
class QuadForm:
    b: float
    field: NormalizedField
    tau: float


def eval_Q(q: QuadForm, r, theta):
    r = _check_domain(r)
    return q_value(q.field.k(theta), r, q.tau, q.b)


def grad_Q(q: QuadForm, r, theta):
    """(dQ/dr_j, dQ/dtheta_j), each of shape ``(..., n)``."""
    r = _check_domain(r)
    gr = q_grad_r(q.field.k(theta), r, q.tau, q.b)
    if q.field.is_constant:
        gt = np.zeros_like(gr)
    else:
        gt = q_grad_theta(q.field.dk(theta), r, q.tau)
    return gr, gt


def _theta_samples(field: NormalizedField, grid):
    if isinstance(grid, np.ndarray):
        return grid
    if field.is_constant:
        return np.zeros((1, field.n))
    return torus_grid(field.n, int(grid))


def min_eig_over_torus(b: float, field: NormalizedField, grid=64):
    """Smallest eigenvalue of A(b)(theta) over a torus grid and where it occurs."""
    thetas = _theta_samples(field, grid)
    eigs = np.linalg.eigvalsh(a_matrix(field.k(thetas), b))[:, 0]
    i = int(np.argmin(eigs))  # first index on ties
    return float(eigs[i]), thetas[i]


@dataclass(frozen=True)
class EigenSnapshot:
    b: float
    eigenvalues: np.ndarray
    ratios: np.ndarray  # lambda_1 / lambda_i for i >= 2
    angle: float  # radians between the lowest eigenvector and (1, ..., 1)


def eigen_asymptotics(b_list, field: NormalizedField, theta):
    """Eigen structure of A(b) at one theta for each b in an increasing list."""
    b_list = list(b_list)
    if any(b1 >= b2 for b1, b2 in zip(b_list, b_list[1:])):
        raise ValueError("b_list must be increasing")
    k = field.k(np.asarray(theta, dtype=float))
    ones = np.ones(field.n) / np.sqrt(field.n)
    out = []
    for b in b_list:
        w, v = np.linalg.eigh(a_matrix(k, b))
        ratios = w[0] / w[1:] if w[1] != 0 else np.full(field.n - 1, np.nan)
        cosang = min(1.0, abs(float(v[:, 0] @ ones)))
        out.append(EigenSnapshot(float(b), w, ratios, float(np.arccos(cosang))))
    return out


def _point_segment_distance(points, c):
    """Exact distance from points to the segment joining +-(sqrt c, ..., sqrt c)."""
    n = points.shape[-1]
    u = np.ones(n) / np.sqrt(n)
    half = np.sqrt(c * n)
    t = np.clip(points @ u, -half, half)
    return np.linalg.norm(points - t[..., None] * u, axis=-1)


def _sphere_directions(n, count, rng):
    if n == 2:
        ang = np.linspace(0.0, 2.0 * np.pi, count, endpoint=False)
        return np.stack([np.cos(ang), np.sin(ang)], axis=-1)
    d = rng.standard_normal((count, n))
    d = np.vstack([d, np.eye(n), -np.eye(n)])
    return d / np.linalg.norm(d, axis=-1, keepdims=True)


def hausdorff_E_to_J(b, c, field: NormalizedField, theta, samples=4096, seed=0):
    """Hausdorff distance between E(c) = {v: v^T A v <= c} and the segment J(c).

    J(c) lies inside E(c), so the distance is the largest distance from a
    boundary point of E(c) to J(c).  Boundary points are the images of unit
    directions under the eigen-axis map; the eigen-axes themselves are always
    included.
    """
    if c <= 0:
        raise ValueError("c must be positive")
    k = field.k(np.asarray(theta, dtype=float))
    A = a_matrix(k, b)
    w, vecs = np.linalg.eigh(A)
    if w[0] <= 0.0:
        raise NotPositiveDefinite(f"A(b) has eigenvalue {w[0]:.3g} <= 0")
    n = field.n
    end = np.full(n, np.sqrt(c))
    if float(end @ A @ end) > c * (1.0 + 1e-12):
        raise AssertionError("J(c) is not contained in E(c)")
    rng = np.random.default_rng(seed)
    dirs = np.vstack([_sphere_directions(n, samples, rng), np.eye(n), -np.eye(n)])
    boundary = (dirs * np.sqrt(c / w)) @ vecs.T
    return float(np.max(_point_segment_distance(boundary, c)))


# ---------------------------------------------------------------------------
# region L certificate


@dataclass(frozen=True)
class LemmaLCertificate:
    b: float
    C: float
    margin: float  # min Q^b[2] over closure(L) minus (1 + C)
    witness_r: np.ndarray
    witness_theta: np.ndarray
    cap: float
    grid_spacing: float
    lipschitz_slack: float  # grid-only error bound before polishing
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.margin > 0.0


def _box_grid(n, i, cap, per_axis):
    inner = np.linspace(L_LOW, L_HIGH, per_axis)
    outer = np.linspace(L_LOW, cap, per_axis)
    axes = [inner if j == i else outer for j in range(n)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def check_lemma_L(b, C, field: NormalizedField, grid=16, r_grid=41, raise_on_negative=False):
    """Minimize Q^b[2] over the closure of L and report min - (1 + C).

    L is the set of r with some r_i in (1/3, 2/3) and all other r_j > 1/3;
    coordinates are capped at the radius beyond which Q^b[2] > 1 + C is
    automatic.  A dense grid locates the minimum, a bounded quasi-Newton
    polish on (r, theta) refines it.
    """
    if not 0.0 < C < C_MAX:
        raise ValueError(f"C must lie in (0, 7/9), got {C}")
    n = field.n
    thetas = _theta_samples(field, grid)
    lam_min, _ = min_eig_over_torus(b, field, thetas)
    if lam_min <= 0.0:
        cert = LemmaLCertificate(b, C, -np.inf, np.full(n, np.nan), thetas[0], np.inf, np.nan, np.nan)
        if raise_on_negative:
            raise MarginNegative(cert.margin, cert.witness_r)
        return cert
    cap = 2.0 + np.sqrt((1.0 + C) / lam_min) + 0.01
    ks = field.k(thetas)
    best = (np.inf, None, None, 0)
    spacing = 0.0
    slack = 0.0
    for i in range(n):
        pts = _box_grid(n, i, cap, r_grid)
        spacing = max(spacing, (cap - L_LOW) / (r_grid - 1))
        for t_idx in range(len(thetas)):
            vals = q_value(ks[t_idx], pts, 2.0, b)
            j = int(np.argmin(vals))
            if vals[j] < best[0]:
                best = (float(vals[j]), pts[j], thetas[t_idx], i)
            gmax = np.max(np.linalg.norm(q_grad_r(ks[t_idx], pts, 2.0, b), axis=-1))
            slack = max(slack, gmax * spacing * np.sqrt(n) / 2.0)
    grid_min, r0, th0, box_i = best

    bounds = []
    for j in range(n):
        bounds.append((L_LOW, L_HIGH) if j == box_i else (L_LOW, cap))
    if field.is_constant:
        k0 = ks[0]
        res = minimize(
            lambda r: q_value(k0, r, 2.0, b),
            r0,
            jac=lambda r: q_grad_r(k0, r, 2.0, b),
            method="L-BFGS-B",
            bounds=bounds,
            options={"ftol": 1e-15, "gtol": 1e-12},
        )
        r_opt, th_opt = res.x, th0
    else:
        def obj(x):
            r, th = x[:n], x[n:]
            k = field.k(th)
            gt = q_grad_theta(field.dk(th), r, 2.0)
            return q_value(k, r, 2.0, b), np.concatenate([q_grad_r(k, r, 2.0, b), gt])

        res = minimize(
            obj,
            np.concatenate([r0, th0]),
            jac=True,
            method="L-BFGS-B",
            bounds=bounds + [(None, None)] * n,
            options={"ftol": 1e-15, "gtol": 1e-12},
        )
        r_opt, th_opt = res.x[:n], res.x[n:]
    q_opt = float(q_value(field.k(th_opt), r_opt, 2.0, b))
    if q_opt > grid_min:
        q_opt, r_opt, th_opt = grid_min, r0, th0
    cert = LemmaLCertificate(
        b=float(b),
        C=float(C),
        margin=q_opt - (1.0 + C),
        witness_r=np.asarray(r_opt),
        witness_theta=np.asarray(th_opt),
        cap=float(cap),
        grid_spacing=float(spacing),
        lipschitz_slack=float(slack),
        details={"grid_min": grid_min, "lambda_min": lam_min},
    )
    if raise_on_negative and not cert.passed:
        raise MarginNegative(cert.margin, cert.witness_r)
    return cert


@dataclass(frozen=True)
class BCertificate:
    b: float
    min_eigenvalue: float
    min_eigenvalue_theta: np.ndarray
    lemma_L: LemmaLCertificate


def certify_b(b, C, field: NormalizedField, grid=16, r_grid=41) -> BCertificate:
    lam_min, th = min_eig_over_torus(b, field, grid)
    lemma = check_lemma_L(b, C, field, grid=grid, r_grid=r_grid)
    return BCertificate(float(b), lam_min, th, lemma)


def find_b(C, field: NormalizedField, grid=16, r_grid=41, cap_exponent=30) -> BCertificate:
    """Smallest power of two b (from 1) with A(b) positive definite and a positive L margin."""
    if not 0.0 < C < C_MAX:
        raise ValueError(f"C must lie in (0, 7/9), got {C}")
    for e in range(cap_exponent + 1):
        cert = certify_b(2.0**e, C, field, grid=grid, r_grid=r_grid)
        if cert.min_eigenvalue > 0.0 and cert.lemma_L.passed:
            return cert
    raise SearchExhausted(f"no valid b up to 2^{cap_exponent}")

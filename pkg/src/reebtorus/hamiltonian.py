"""The contact Hamiltonian H = G o K on R^{2n+1}.

    K = lam * exp{ [1 + C - Q^b[2] - (z^2 + mu) sum_j r_j] * prod_l rho(r_l) - C }

K is exactly lam * e^{-C} wherever some r_j <= 1/3 (the rho product
vanishes identically there), and G maps every value <= lam * e^{-C} to 1, so
H is exactly 1 on that region and outside the support box.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import quadratic_core as qc
from .errors import ConstraintViolation, ShellViolation
from .phase import as_cartesian, from_polar, to_polar
from .profiles import GProfile, RhoProfile, build_G, build_rho
from .torus_flows import (
    InvariantSetSpec,
    NormalizedField,
    TorusVectorField,
    TrigPoly,
    check_invariance,
    normalize_field,
)

R_CUT = 1.0 / 3.0


def validate_constants(C: float, lam: float) -> None:
    if not 0.0 < C < qc.C_MAX:
        raise ConstraintViolation(f"C = {C} violates 0 < C < 7/9")
    if not 1.0 < lam < np.exp(C):
        raise ConstraintViolation(f"lambda = {lam} violates 1 < lambda < e^C = {np.exp(C):.6g}")


@dataclass(frozen=True)
class HamiltonianModel:
    n: int
    C: float
    lam: float
    b: float
    field: NormalizedField
    mu: TrigPoly
    invariant_set: InvariantSetSpec
    rho: RhoProfile
    G: GProfile
    certificate: qc.BCertificate | None = None

    @property
    def V(self) -> TorusVectorField:
        return self.field.V

    @property
    def K_floor(self) -> float:
        """lam * e^{-C}: the value of K wherever the rho product vanishes."""
        return self.lam * np.exp(-self.C)

    def to_json(self) -> dict:
        out = {
            "n": self.n,
            "C": self.C,
            "lambda": self.lam,
            "b": self.b,
            "V": self.V.to_json(),
            "invariant_set": self.invariant_set.to_json(),
            "mu": self.mu.to_json(),
            "G": {"a": self.G.a, "u_end": self.G.u_end, "table_size": len(self.G.table_u)},
        }
        if self.certificate is not None:
            cert = self.certificate
            out["certificate"] = {
                "min_eigenvalue": cert.min_eigenvalue,
                "lemma_L_margin": cert.lemma_L.margin,
                "lemma_L_witness_r": cert.lemma_L.witness_r.tolist(),
            }
        return out

    def digest(self) -> str:
        blob = json.dumps(self.to_json(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def build_model(
    V: TorusVectorField,
    invariant_set: InvariantSetSpec,
    lam: float,
    C: float,
    b="auto",
    grid: int = 16,
    r_grid: int = 41,
) -> HamiltonianModel:
    """Assemble K and H; ``b="auto"`` runs the power-of-two search.

    An explicit b is certified but never rejected, so that failing
    certificates can be reported downstream.  Sub-tori and periodic orbits
    are flowed along V first and rejected if they are not invariant.
    """
    validate_constants(C, lam)
    if invariant_set.n != V.n:
        raise ConstraintViolation("invariant set and vector field live on different tori")
    field = normalize_field(V, lam)
    if invariant_set.kind in ("SubTorus", "PeriodicOrbit"):
        check_invariance(V, invariant_set, T=10.0, tol=1e-8)
    if b == "auto" or b is None:
        cert = qc.find_b(C, field, grid=grid, r_grid=r_grid)
    else:
        cert = qc.certify_b(float(b), C, field, grid=grid, r_grid=r_grid)
    return HamiltonianModel(
        n=V.n,
        C=float(C),
        lam=float(lam),
        b=cert.b,
        field=field,
        mu=invariant_set.mu,
        invariant_set=invariant_set,
        rho=build_rho(),
        G=build_G(lam, C),
        certificate=cert,
    )


class PolarJet(NamedTuple):
    """K, H and their polar partial derivatives on a batch of points."""

    K: np.ndarray
    K_r: np.ndarray
    K_theta: np.ndarray
    K_z: np.ndarray
    H: np.ndarray
    H_r: np.ndarray
    H_theta: np.ndarray
    H_z: np.ndarray
    log_slope: np.ndarray  # K (log G)'(K)


def _prod_except(v):
    """prod_{l != j} v_l along the last axis, without division."""
    ones = np.ones(v.shape[:-1] + (1,))
    left = np.cumprod(np.concatenate([ones, v[..., :-1]], axis=-1), axis=-1)
    right = np.cumprod(np.concatenate([ones, v[..., :0:-1]], axis=-1), axis=-1)[..., ::-1]
    return left * right


def polar_jet(m: HamiltonianModel, r, theta, z) -> PolarJet:
    r = np.atleast_2d(np.asarray(r, dtype=float))
    theta = np.atleast_2d(np.asarray(theta, dtype=float))
    z = np.atleast_1d(np.asarray(z, dtype=float))
    N, n = r.shape
    logK = np.full(N, np.log(m.lam) - m.C)
    dlog_r = np.zeros((N, n))
    dlog_t = np.zeros((N, n))
    dlog_z = np.zeros(N)
    inner = np.min(r, axis=-1) > R_CUT
    if np.any(inner):
        ri, ti, zi = r[inner], theta[inner], z[inner]
        k = m.field.k(ti)
        Q2 = qc.q_value(k, ri, 2.0, m.b)
        Q2_r = qc.q_grad_r(k, ri, 2.0, m.b)
        mu = m.mu(ti)
        S = ri.sum(axis=-1)
        rho, drho = m.rho.both(ri)
        P = np.prod(rho, axis=-1)
        dP = drho * _prod_except(rho)
        z2mu = zi * zi + mu
        T = 1.0 + m.C - Q2 - z2mu * S
        logK[inner] = np.log(m.lam) + T * P - m.C
        dlog_r[inner] = (-Q2_r - z2mu[:, None]) * P[:, None] + T[:, None] * dP
        if not (m.field.is_constant and m.mu.is_constant):
            Q2_t = 0.0 if m.field.is_constant else qc.q_grad_theta(m.field.dk(ti), ri, 2.0)
            dlog_t[inner] = (-Q2_t - m.mu.grad(ti) * S[:, None]) * P[:, None]
        dlog_z[inner] = -2.0 * zi * S * P
    K = np.exp(logK)
    H, slope = m.G.both_log(logK)
    w = H * slope  # dH = H (log G)' dK = w dlog K
    return PolarJet(
        K, K[:, None] * dlog_r, K[:, None] * dlog_t, K * dlog_z,
        H, w[:, None] * dlog_r, w[:, None] * dlog_t, w * dlog_z,
        slope,
    )


def _jet(m, p):
    cart = np.atleast_2d(as_cartesian(p))
    r, theta, z = to_polar(cart)
    return polar_jet(m, r, theta, z)


def _squeeze(arr, p):
    return arr[0] if np.ndim(as_cartesian(p)) == 1 else arr


def eval_K(m: HamiltonianModel, p):
    return _squeeze(_jet(m, p).K, p)


def grad_K(m: HamiltonianModel, p):
    """(K_r, K_theta, K_z) in polar coordinates."""
    j = _jet(m, p)
    return _squeeze(j.K_r, p), _squeeze(j.K_theta, p), _squeeze(j.K_z, p)


def eval_H(m: HamiltonianModel, p):
    return _squeeze(_jet(m, p).H, p)


def grad_H(m: HamiltonianModel, p):
    """(H_r, H_theta, H_z) in polar coordinates."""
    j = _jet(m, p)
    return _squeeze(j.H_r, p), _squeeze(j.H_theta, p), _squeeze(j.H_z, p)


def radial_log_derivative(m: HamiltonianModel, p):
    """sum_j r_j (log H)_{r_j}, evaluated through the radial identity for Q.

    Uses sum_j r_j Q^b[2]_{r_j} = 2 Q^b[1] - 2 instead of the gradient, so it
    is an independent route to the same quantity as ``grad_H``.
    """
    cart = np.atleast_2d(as_cartesian(p))
    r, theta, z = to_polar(cart)
    out = np.zeros(len(r))
    inner = np.min(r, axis=-1) > R_CUT
    if np.any(inner):
        ri, ti, zi = r[inner], theta[inner], z[inner]
        k = m.field.k(ti)
        Q1 = qc.q_value(k, ri, 1.0, m.b)
        Q2 = qc.q_value(k, ri, 2.0, m.b)
        mu = m.mu(ti)
        S = ri.sum(axis=-1)
        rho, drho = m.rho.both(ri)
        P = np.prod(rho, axis=-1)
        T = 1.0 + m.C - Q2 - (zi * zi + mu) * S
        first = (2.0 - 2.0 * Q1 - (zi * zi + mu) * S) * P
        second = T * np.sum(ri * drho * _prod_except(rho), axis=-1)
        _, slope = m.G.both_log(np.log(m.lam) + T * P - m.C)
        out[inner] = (first + second) * slope
    return _squeeze(out, p)


def h3_margin(m: HamiltonianModel, p):
    """H - (1/2) sum_j r_j H_{r_j}."""
    cart = np.atleast_2d(as_cartesian(p))
    r, theta, z = to_polar(cart)
    j = polar_jet(m, r, theta, z)
    return _squeeze(j.H - 0.5 * np.sum(r * j.H_r, axis=-1), p)


def distance_to_invariant_set(m: HamiltonianModel, p):
    """Distance proxy from p to A x {0}: sqrt(|r - 1|^2 + z^2 + d_A(theta)^2)."""
    cart = np.atleast_2d(as_cartesian(p))
    r, theta, z = to_polar(cart)
    dA = m.invariant_set.distance(theta)
    d = np.sqrt(np.sum((r - 1.0) ** 2, axis=-1) + z * z + dA * dA)
    return _squeeze(d, p)


@dataclass(frozen=True)
class SupportBox:
    r_max: float
    z_max: float
    lambda_min: float
    shell_samples: int
    shell_deviation: float

    def contains(self, p):
        cart = np.atleast_2d(as_cartesian(p))
        r, _, z = to_polar(cart)
        inside = np.all(r <= self.r_max, axis=-1) & (np.abs(z) <= self.z_max)
        return _squeeze(inside, p)


def shell_points(n, r_max, z_max, count, rng, beyond=0.0):
    """Random points on the faces of the box {r_j <= r_max, |z| <= z_max}.

    ``beyond`` > 0 pushes the sampled face coordinate outward by up to that amount.
    """
    r = rng.uniform(0.0, r_max, size=(count, n))
    theta = rng.uniform(0.0, 2.0 * np.pi, size=(count, n))
    z = rng.uniform(-z_max, z_max, size=count)
    face = rng.integers(0, n + 1, size=count)
    push = rng.uniform(0.0, beyond, size=count) if beyond > 0 else np.zeros(count)
    for j in range(n):
        sel = face == j
        r[sel, j] = r_max + push[sel]
    sel = face == n
    z[sel] = np.where(rng.random(sel.sum()) < 0.5, -1.0, 1.0) * (z_max + push[sel])
    return from_polar(r, theta, z)


def support_bounds(m: HamiltonianModel, samples: int = 1000, seed: int = 0, grid: int = 64) -> SupportBox:
    """Box outside which H is identically 1, checked on its boundary shell."""
    lam_min, _ = qc.min_eig_over_torus(m.b, m.field, grid)
    if lam_min <= 0.0:
        raise ShellViolation(np.inf, [])
    z_max = float(np.sqrt(3.0 * (1.0 + m.C) / m.n))
    r_max = float(2.0 + np.sqrt((1.0 + m.C) / lam_min) + 0.01)
    rng = np.random.default_rng(seed)
    pts = shell_points(m.n, r_max, z_max, samples, rng)
    dev = np.abs(eval_H(m, pts) - 1.0)
    i = int(np.argmax(dev))
    if dev[i] > 1e-12:
        raise ShellViolation(float(dev[i]), pts[i])
    return SupportBox(r_max, z_max, float(lam_min), samples, float(dev[i]))


def torus_points(m: HamiltonianModel, count: int):
    """Cartesian points of A x {0} (r_j = 1, z = 0) and their angles."""
    theta = m.invariant_set.sample(count)
    n = m.n
    return from_polar(np.ones((len(theta), n)), theta, np.zeros(len(theta))), theta


__all__ = [
    "HamiltonianModel",
    "PolarJet",
    "SupportBox",
    "build_model",
    "distance_to_invariant_set",
    "eval_H",
    "eval_K",
    "grad_H",
    "grad_K",
    "h3_margin",
    "polar_jet",
    "radial_log_derivative",
    "support_bounds",
    "validate_constants",
]

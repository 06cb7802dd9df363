"""Run every numerical certificate for a scenario and collect a JSON report."""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from . import quadratic_core as qc
from .contact_reeb import alpha_st, certify_reeb, dz_rate, reeb_field
from .dynamics import IntegratorConfig, integrate, reeb_residual_along, torus_drift, z_monotonicity_check
from .errors import ShellViolation
from .hamiltonian import (
    HamiltonianModel,
    distance_to_invariant_set,
    eval_H,
    eval_K,
    grad_H,
    grad_K,
    h3_margin,
    shell_points,
    support_bounds,
    torus_points,
)
from .phase import from_polar
from .scenario import ScenarioConfig


@dataclass(frozen=True)
class Plan:
    """Sample counts and thresholds for ``run_suite``."""

    samples: int = 10_000  # on-set, Reeb and margin sampling
    small_samples: int = 1_000  # gradients, identity, shell
    eps: float = 0.05
    fd_step: float = 1e-5
    drift_T: float = 100.0
    drift_tol: float = 1e-10
    orbit_count: int = 8
    orbit_T: float = 20.0
    threads: int = 1
    thresholds: dict = field(
        default_factory=lambda: {
            "on_set": 1e-9,
            "plateau": 1e-12,
            "identity": 1e-10,
            "gradient": 1e-6,
            "alpha": 1e-9,
            "d_alpha": 1e-8,
            "round_trip": 1e-12,
            "profile": 1e-12,
            "drift": 1e-6,
            "orbit_alpha": 1e-8,
        }
    )

    def with_samples(self, n: int) -> "Plan":
        return replace(self, samples=int(n), small_samples=max(10, int(n) // 10))


@dataclass(frozen=True)
class CheckResult:
    name: str
    anchor: str
    samples: int
    worst: float | None
    witness: list
    passed: bool

    def to_json(self) -> dict:
        worst = self.worst if self.worst is not None and np.isfinite(self.worst) else None
        return {
            "name": self.name,
            "anchor": self.anchor,
            "samples": int(self.samples),
            "worst": worst,
            "witness": [float(v) for v in self.witness],
            "pass": bool(self.passed),
        }


@dataclass(frozen=True)
class VerificationReport:
    scenario_hash: str
    seed: int
    checks: tuple
    model_b: float

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def check(self, name: str) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_json(self) -> dict:
        return {
            "scenario_hash": self.scenario_hash,
            "seed": self.seed,
            "checks": [c.to_json() for c in self.checks],
            "pass": self.passed,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, allow_nan=False) + "\n"


def check_rng(seed: int, name: str) -> np.random.Generator:
    """Counter-based stream keyed by (seed, check name)."""
    digest = hashlib.sha256(f"{int(seed)}:{name}".encode()).digest()
    return np.random.Generator(np.random.Philox(key=int.from_bytes(digest[:16], "little")))


def fd_gradient_oracle(f: Callable, p, step: float = 1e-5, richardson: bool = False):
    """Central differences of a batched scalar function.

    ``f`` maps an array of shape ``(..., d)`` to ``(...)``; the result has the
    shape of ``p``.  With ``richardson`` the steps h and h/2 are combined to
    cancel the O(h^2) truncation term.
    """
    p = np.asarray(p, dtype=float)
    d = p.shape[-1]

    def central(h):
        eye = np.eye(d) * h
        return (f(p[..., None, :] + eye) - f(p[..., None, :] - eye)) / (2.0 * h)

    if not richardson:
        return central(step)
    return (4.0 * central(0.5 * step) - central(step)) / 3.0


def _polar_fn(evaluator, m, n):
    def f(q):
        flat = q.reshape(-1, q.shape[-1])
        vals = evaluator(m, from_polar(flat[:, :n], flat[:, n : 2 * n], flat[:, -1]))
        return np.reshape(vals, q.shape[:-1])

    return f


# ---------------------------------------------------------------------------
# individual checks


@dataclass
class _Context:
    scenario: ScenarioConfig
    model: HamiltonianModel
    plan: Plan
    seed: int
    box_r: float
    box_z: float

    def rng(self, name):
        return check_rng(self.seed, name)

    def box_points(self, rng, count, r_lo=0.0, r_hi=None, z_hi=None):
        n = self.model.n
        r = rng.uniform(r_lo, self.box_r if r_hi is None else r_hi, (count, n))
        theta = rng.uniform(0.0, 2.0 * np.pi, (count, n))
        z = rng.uniform(-1.0, 1.0, count) * (self.box_z if z_hi is None else z_hi)
        return from_polar(r, theta, z)


def _max_check(name, anchor, values, points, threshold):
    values = np.asarray(values, dtype=float)
    i = int(np.argmax(values))
    worst = float(values[i])
    return CheckResult(name, anchor, len(values), worst, list(np.ravel(points[i])), worst <= threshold)


def _min_check(name, anchor, values, points, threshold=0.0):
    values = np.asarray(values, dtype=float)
    if len(values) == 0:
        return CheckResult(name, anchor, 0, None, [], True)
    i = int(np.argmin(values))
    worst = float(values[i])
    return CheckResult(name, anchor, len(values), worst, list(np.ravel(points[i])), worst > threshold)


def _check_constraints(ctx):
    C, lam = ctx.model.C, ctx.model.lam
    slack = min(C, qc.C_MAX - C, lam - 1.0, np.exp(C) - lam)
    return CheckResult("constraints", "0 < C < 7/9 and 1 < lambda < e^C", 1, float(slack), [C, lam], slack > 0)


def _check_positive_definite(ctx):
    lam_min, theta = qc.min_eig_over_torus(ctx.model.b, ctx.model.field, 64)
    return CheckResult(
        "b.positive_definite",
        "A(b)(theta) positive definite on the torus",
        1 if ctx.model.field.is_constant else 64**ctx.model.n,
        lam_min,
        list(theta),
        lam_min > 0,
    )


def _check_region_L(ctx):
    m = ctx.model
    cert = m.certificate.lemma_L if m.certificate is not None else qc.check_lemma_L(m.b, m.C, m.field)
    return CheckResult(
        "b.region_L",
        "Q^b[2] > 1 + C wherever some r_i lies in (1/3, 2/3) and all r_j > 1/3",
        1,
        cert.margin,
        list(cert.witness_r) + list(cert.witness_theta),
        cert.passed,
    )


def _check_rho(ctx):
    rng = ctx.rng("rho.profile")
    rho = ctx.model.rho
    r = np.sort(np.concatenate([rng.uniform(-0.5, 1.5, ctx.plan.samples), [1 / 3, 0.5, 2 / 3]]))
    v = rho(r)
    lo, hi = r <= 1 / 3, r >= 2 / 3
    # strictly between the thresholds, but away from where exp(-1/t) underflows
    mid = (r > 1 / 3 + 1e-2) & (r < 2 / 3 - 1e-2)
    bad = np.zeros_like(r)
    bad[lo] = np.abs(v[lo])
    bad[hi] = np.abs(v[hi] - 1.0)
    bad[mid] = np.where((v[mid] > 0) & (v[mid] < 1), 0.0, 1.0)
    bad[1:] = np.maximum(bad[1:], np.maximum(v[:-1] - v[1:], 0.0))
    return _max_check("rho.profile", "rho = 0 iff r <= 1/3, rho = 1 iff r >= 2/3, monotone", bad, r[:, None], 0.0)


def _check_G(ctx):
    m = ctx.model
    G = m.G
    t = np.sort(np.concatenate([np.logspace(-3, 3, ctx.plan.samples), [m.K_floor, m.lam]]))
    val, _, slope = G.both(t)
    bad = np.maximum(slope - 1.0, 0.0)
    low = t <= m.K_floor
    bad[low] = np.maximum(bad[low], np.abs(val[low] - 1.0))
    ident = t >= G.identity_from
    bad[ident] = np.maximum(bad[ident], np.abs(val[ident] - t[ident]) / t[ident])
    bad[1:] = np.maximum(bad[1:], np.maximum(val[:-1] - val[1:], 0.0))
    near_lam = G.identity_from < m.lam
    res = _max_check(
        "G.profile",
        "G = 1 below lambda e^-C, G(t) = t near lambda, t (log G)' <= 1, monotone",
        bad,
        t[:, None],
        ctx.plan.thresholds["profile"],
    )
    return replace(res, passed=res.passed and near_lam)


def _check_H_positive(ctx):
    rng = ctx.rng("H.positive")
    pts = ctx.box_points(rng, ctx.plan.samples, r_hi=1.5 * ctx.box_r, z_hi=1.5 * ctx.box_z)
    return _min_check("H.positive", "H > 0", eval_H(ctx.model, pts), pts)


def _outside_points(ctx, name):
    rng = ctx.rng(name)
    m = ctx.model
    count = ctx.plan.small_samples
    shell = shell_points(m.n, ctx.box_r, ctx.box_z, count, rng)
    beyond = shell_points(m.n, ctx.box_r, ctx.box_z, count, rng, beyond=5.0)
    return np.vstack([shell, beyond])


def _check_H_plateau(ctx):
    pts = _outside_points(ctx, "H.support_plateau")
    dev = np.abs(eval_H(ctx.model, pts) - 1.0)
    return _max_check("H.support_plateau", "H = 1 outside a compact set", dev, pts, ctx.plan.thresholds["plateau"])


def _off_set_points(ctx, name):
    rng = ctx.rng(name)
    pts = ctx.box_points(rng, ctx.plan.samples)
    far = distance_to_invariant_set(ctx.model, pts) > ctx.plan.eps
    return pts[far]


def _check_H_radial(ctx):
    pts = _off_set_points(ctx, "H.radial_margin")
    return _min_check(
        "H.radial_margin",
        "H - (1/2) sum r_j H_r_j > 0 off the invariant set (distance > eps)",
        h3_margin(ctx.model, pts),
        pts,
    )


def _check_H_on_set(ctx):
    m = ctx.model
    pts, theta = torus_points(m, ctx.plan.samples)
    Hr, Ht, Hz = grad_H(m, pts)
    k = m.field.k(theta)
    dev = np.max(
        np.column_stack(
            [
                np.abs(eval_H(m, pts) - m.lam),
                np.max(np.abs(Hr - 2.0 * m.lam * k), axis=-1),
                np.max(np.abs(Ht), axis=-1),
                np.abs(Hz),
                np.abs(h3_margin(m, pts)),
            ]
        ),
        axis=-1,
    )
    return _max_check(
        "H.on_set",
        "on the invariant set: H = lambda, H_r_j = 2 lambda k_j, H_theta = H_z = 0",
        dev,
        pts,
        ctx.plan.thresholds["on_set"],
    )


def _check_identity(ctx):
    rng = ctx.rng("Q.radial_identity")
    m = ctx.model
    N = ctx.plan.small_samples
    r = rng.uniform(0.05, 4.0, (N, m.n))
    theta = rng.uniform(0.0, 2.0 * np.pi, (N, m.n))
    k = m.field.k(theta)
    lhs = np.sum(r * qc.q_grad_r(k, r, 2.0, m.b), axis=-1)
    Q1 = qc.q_value(k, r, 1.0, m.b)
    rel = np.abs(lhs - (2.0 * Q1 - 2.0)) / (1.0 + np.abs(Q1))
    return _max_check(
        "Q.radial_identity",
        "sum r_j dQ^b[2]/dr_j = 2 Q^b[1] - 2",
        rel,
        np.column_stack([r, theta]),
        ctx.plan.thresholds["identity"],
    )


def _gradient_check(ctx, name, value_fn, grad_fn):
    rng = ctx.rng(name)
    m = ctx.model
    N = ctx.plan.small_samples
    r = rng.uniform(0.4, 3.5, (N, m.n))
    theta = rng.uniform(0.0, 2.0 * np.pi, (N, m.n))
    z = rng.uniform(-1.5, 1.5, N)
    q = np.column_stack([r, theta, z])
    fd = fd_gradient_oracle(_polar_fn(value_fn, m, m.n), q, ctx.plan.fd_step, richardson=True)
    gr, gt, gz = grad_fn(m, from_polar(r, theta, z))
    an = np.column_stack([gr, gt, gz])
    # H and K are O(1) quantities, so gradients are compared on that scale
    err = np.max(np.abs(fd - an), axis=-1) / np.maximum(np.max(np.abs(an), axis=-1), 1.0)
    return _max_check(name, "closed-form gradient vs central differences", err, q, ctx.plan.thresholds["gradient"])


def _check_grad_K(ctx):
    return _gradient_check(ctx, "gradient.K", eval_K, grad_K)


def _check_grad_H(ctx):
    return _gradient_check(ctx, "gradient.H", eval_H, grad_H)


def _reeb_points(ctx, name):
    rng = ctx.rng(name)
    return ctx.box_points(rng, ctx.plan.samples, r_hi=4.0, z_hi=2.0)


def _check_reeb(ctx):
    pts = _reeb_points(ctx, "reeb.residuals")
    a_res, f_res = certify_reeb(ctx.model, pts)
    th = ctx.plan.thresholds
    a = _max_check("reeb.alpha", "alpha(X) = 1 for alpha = alpha_st / H", a_res, pts, th["alpha"])
    f = _max_check("reeb.d_alpha", "i(X) d alpha = 0 on the contact planes", f_res, pts, th["d_alpha"])
    return [a, f]


def _check_X(ctx):
    m = ctx.model
    th = ctx.plan.thresholds
    pts = _reeb_points(ctx, "X.sampling")
    X = reeb_field(m, pts)
    H = eval_H(m, pts)
    a = alpha_st(pts, X)
    out = [
        _min_check("X.transverse", "alpha_st(X) > 0: X positively transverse to the contact planes", a, pts),
        _max_check(
            "X.round_trip",
            "alpha_st(X) = H: the Hamiltonian is recovered from its vector field",
            np.abs(a - H) / H,
            pts,
            th["round_trip"],
        ),
    ]
    outside = _outside_points(ctx, "X.outside_support")
    Xo = reeb_field(m, outside)
    Xo[:, -1] -= 1.0
    out.append(
        _max_check(
            "X.outside_support", "X = d/dz outside a compact set", np.max(np.abs(Xo), axis=-1), outside, th["plateau"]
        )
    )
    far = _off_set_points(ctx, "X.z_monotone")
    Xf = reeb_field(m, far)
    out.append(_min_check("X.z_monotone", "dz(X) > 0 off the invariant set (distance > eps)", Xf[:, -1], far))
    out.append(
        _max_check(
            "X.dz_agreement",
            "invented: dz(X) from the field equals H - (1/2) sum r_j H_r_j",
            np.abs(Xf[:, -1] - dz_rate(m, far)),
            far,
            th["round_trip"],
        )
    )
    tp, theta = torus_points(m, ctx.plan.samples)
    expected = from_polar(np.ones_like(theta), theta, np.zeros(len(theta)))
    rates = 2.0 * m.lam * m.field.k(theta)
    flow = np.zeros_like(tp)
    flow[:, 0:-1:2] = -rates * expected[:, 1:-1:2]
    flow[:, 1:-1:2] = rates * expected[:, 0:-1:2]
    dev = np.max(np.abs(reeb_field(m, tp) - flow), axis=-1)
    out.append(
        _max_check(
            "X.on_set_flow",
            "on the invariant set X = 2 lambda sum k_j d/dtheta_j",
            dev,
            tp,
            th["on_set"],
        )
    )
    return out


def _check_shell(ctx):
    m = ctx.model
    name = "support.shell"
    anchor = "K <= lambda e^-C, hence H = 1, on the boundary of the support box"
    seed = int.from_bytes(hashlib.sha256(f"{ctx.seed}:{name}".encode()).digest()[:8], "little")
    try:
        box = support_bounds(m, samples=ctx.plan.small_samples, seed=seed)
    except ShellViolation as exc:
        return CheckResult(name, anchor, ctx.plan.small_samples, exc.deviation, list(exc.witness), False)
    return CheckResult(
        name, anchor, box.shell_samples, box.shell_deviation, [box.r_max, box.z_max], box.shell_deviation <= 1e-12
    )


def _check_eigen(ctx):
    m = ctx.model
    _, theta = qc.min_eig_over_torus(m.b, m.field, 16)
    snaps = qc.eigen_asymptotics([1.0, 10.0, 100.0], m.field, theta)
    ratios = np.array([np.max(s.ratios) for s in snaps])
    worst = float(np.max(np.diff(ratios)))
    return CheckResult(
        "eigen.asymptotics",
        "lambda_1(b) / lambda_i(b) -> 0 as b grows",
        len(snaps),
        worst,
        list(theta),
        worst < 0.0,
    )


def _check_hausdorff(ctx):
    m = ctx.model
    _, theta = qc.min_eig_over_torus(m.b, m.field, 16)
    b_list = (10.0, 100.0, 1000.0)
    d = np.array([qc.hausdorff_E_to_J(b, 1.0, m.field, theta, samples=2048, seed=ctx.seed) for b in b_list])
    worst = float(np.max(np.diff(d)))
    return CheckResult(
        "hausdorff.decrease",
        "E(c) -> J(c) in the Hausdorff distance as b grows",
        3,
        worst,
        list(d),
        worst < 0.0,
    )


def _check_drift(ctx):
    m = ctx.model
    rng = ctx.rng("dynamics.torus_drift")
    sample = m.invariant_set.sample(64)
    theta0 = sample[int(rng.integers(len(sample)))]
    tol = ctx.plan.drift_tol
    dr, dz = torus_drift(m, theta0, ctx.plan.drift_T, IntegratorConfig(tol, tol))
    worst = max(dr, dz)
    return CheckResult(
        "dynamics.torus_drift",
        "the invariant set times {0} is invariant under the flow",
        1,
        worst,
        list(theta0),
        worst <= ctx.plan.thresholds["drift"],
    )


def _check_orbits(ctx):
    m = ctx.model
    rng = ctx.rng("dynamics.orbits")
    starts = ctx.box_points(rng, ctx.plan.orbit_count, r_lo=0.4)
    cfg = ctx.scenario.integrator
    worst_rate, rate_witness, checked = np.inf, [], 0
    worst_alpha, alpha_witness = 0.0, []
    for x0 in starts:
        trace = integrate(m, x0, (0.0, ctx.plan.orbit_T), cfg)
        rep = z_monotonicity_check(trace, m, ctx.plan.eps, raise_on_fail=False)
        checked += rep.checked
        if rep.worst_rate < worst_rate:
            worst_rate, rate_witness = rep.worst_rate, list(rep.witness)
        a, _ = reeb_residual_along(trace, m, 100)
        if a > worst_alpha:
            worst_alpha, alpha_witness = a, list(x0)
    mono = CheckResult(
        "dynamics.z_monotonicity",
        "z increases along orbits off the invariant set",
        checked,
        worst_rate,
        rate_witness,
        worst_rate > 0.0,
    )
    alpha = CheckResult(
        "dynamics.alpha_along_orbit",
        "invented: alpha(X) = 1 at dense-output points along computed orbits",
        ctx.plan.orbit_count * 100,
        worst_alpha,
        alpha_witness,
        worst_alpha <= ctx.plan.thresholds["orbit_alpha"],
    )
    return [mono, alpha]


CHECKS = (
    _check_constraints,
    _check_positive_definite,
    _check_region_L,
    _check_rho,
    _check_G,
    _check_H_positive,
    _check_H_plateau,
    _check_H_radial,
    _check_H_on_set,
    _check_identity,
    _check_grad_K,
    _check_grad_H,
    _check_reeb,
    _check_X,
    _check_shell,
    _check_eigen,
    _check_hausdorff,
    _check_drift,
    _check_orbits,
)


def scenario_hash(scenario: ScenarioConfig) -> str:
    blob = json.dumps(scenario.to_json(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def run_suite(scenario: ScenarioConfig, seed: int | None = None, plan: Plan = Plan(), model=None) -> VerificationReport:
    """Build the model (unless given) and run every check in a fixed order.

    Raises ConstraintViolation before any check if the constants are invalid.
    Checks run on ``plan.threads`` workers; the report order never depends on
    scheduling.
    """
    seed = scenario.seed if seed is None else int(seed)
    m = model if model is not None else scenario.build()
    lam_min, _ = qc.min_eig_over_torus(m.b, m.field, 64)
    box_r = 2.0 + np.sqrt((1.0 + m.C) / lam_min) + 0.01 if lam_min > 0 else 4.0
    box_z = float(np.sqrt(3.0 * (1.0 + m.C) / m.n))
    ctx = _Context(scenario, m, plan, seed, float(box_r), box_z)

    def run(check):
        out = check(ctx)
        return out if isinstance(out, list) else [out]

    if plan.threads > 1:
        with ThreadPoolExecutor(max_workers=plan.threads) as pool:
            batches = list(pool.map(run, CHECKS))
    else:
        batches = [run(c) for c in CHECKS]
    checks = tuple(c for batch in batches for c in batch)
    return VerificationReport(scenario_hash(scenario), seed, checks, m.b)

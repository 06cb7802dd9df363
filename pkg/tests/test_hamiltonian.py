import math

import numpy as np
import pytest
from conftest import SQRT2, random_polar

from reebtorus.errors import ConstraintViolation, InvarianceViolation
from reebtorus.hamiltonian import (
    build_model,
    distance_to_invariant_set,
    eval_H,
    eval_K,
    grad_H,
    grad_K,
    h3_margin,
    radial_log_derivative,
    support_bounds,
    torus_points,
)
from reebtorus.phase import from_polar
from reebtorus.torus_flows import InvariantSetSpec, TorusVectorField
from reebtorus.verify_report import fd_gradient_oracle


def _bump(t):
    return math.exp(-1.0 / t) if t > 0 else 0.0


def rho_scalar(r):
    x = 3.0 * r - 1.0
    a, b = _bump(x), _bump(1.0 - x)
    return a / (a + b) if a + b > 0 else (0.0 if x <= 0 else 1.0)


def K_oracle(m, r, theta, z):
    """Scalar transcription of K with the coupling summed over ordered pairs."""
    k = m.field.k(np.asarray(theta))
    n = len(r)
    Q2 = sum(k[i] * (r[i] - 2.0) ** 2 for i in range(n))
    Q2 += m.b * sum((r[p] - r[q]) ** 2 for p in range(n) for q in range(n) if p != q)
    mu = float(m.mu(np.asarray(theta)))
    P = math.prod(rho_scalar(ri) for ri in r)
    return m.lam * math.exp((1.0 + m.C - Q2 - (z * z + mu) * sum(r)) * P - m.C)


def pt(r, theta, z):
    return from_polar(np.asarray(r, float), np.asarray(theta, float), z)


def test_K_examples(default_model):
    m = default_model
    assert eval_K(m, pt([1, 1], [0, 0], 0.0)) == pytest.approx(1.5, abs=1e-14)
    assert eval_K(m, pt([2, 2], [0.3, 1.0], 0.0)) == pytest.approx(1.5 * math.e, rel=1e-14)
    assert abs(eval_K(m, pt([2, 2], [0, 0], 0.0)) - 4.0774227) <= 1e-6
    for z in (-3.0, 0.0, 0.4, 10.0):
        assert eval_K(m, pt([0.2, 1.7], [0, 0], z)) == 1.5 * math.exp(-0.7)


def test_K_matches_scalar_oracle(wavy_model, default_model):
    rng = np.random.default_rng(10)
    for m in (default_model, wavy_model):
        r, th, z = random_polar(rng, 300)
        got = eval_K(m, from_polar(r, th, z))
        want = np.array([K_oracle(m, r[i], th[i], z[i]) for i in range(300)])
        assert np.max(np.abs(got - want) / want) <= 1e-12


def test_grad_K_on_the_torus(half_model):
    Kr, Kt, Kz = grad_K(half_model, pt([1, 1], [0.2, 2.0], 0.0))
    assert np.allclose(Kr, [1.5, 1.5], atol=1e-13)
    assert np.all(np.abs(Kt) <= 1e-15) and abs(Kz) <= 1e-15


def test_gradients_vanish_near_the_axes(wavy_model):
    rng = np.random.default_rng(11)
    r, th, z = random_polar(rng, 500)
    r[:, 0] = rng.uniform(0.0, 1.0 / 3.0, 500)
    p = from_polar(r, th, z)
    for g in (grad_K(wavy_model, p), grad_H(wavy_model, p)):
        assert all(np.all(part == 0.0) for part in g)
    assert np.all(eval_H(wavy_model, p) == 1.0)


def test_H_values(default_model):
    m = default_model
    assert eval_H(m, pt([1, 1], [0.5, 0.5], 0.0)) == pytest.approx(1.5, abs=1e-14)
    assert eval_H(m, pt([5, 5], [0, 0], 0.0)) == 1.0
    assert eval_H(m, pt([1, 1], [0, 0], 2.0)) == 1.0
    rng = np.random.default_rng(12)
    r, th, z = random_polar(rng, 5000, r=(0.0, 6.0), z=3.0)
    assert np.all(eval_H(m, from_polar(r, th, z)) >= 1.0)


@pytest.mark.parametrize("which", ["default_model", "wavy_model"])
def test_gradients_match_richardson_differences(which, request):
    m = request.getfixturevalue(which)
    rng = np.random.default_rng(13)
    r, th, z = random_polar(rng, 400, r=(0.36, 3.0), z=1.2)
    q = np.concatenate([r, th, z[:, None]], axis=-1)
    for ev, gr in ((eval_K, grad_K), (eval_H, grad_H)):

        def f(qq, ev=ev):
            flat = qq.reshape(-1, 5)
            return ev(m, from_polar(flat[:, :2], flat[:, 2:4], flat[:, 4])).reshape(qq.shape[:-1])

        fd = fd_gradient_oracle(f, q, step=1e-4, richardson=True)
        a_r, a_t, a_z = gr(m, from_polar(r, th, z))
        an = np.concatenate([a_r, a_t, a_z[:, None]], axis=-1)
        err = np.max(np.abs(fd - an), axis=-1) / np.maximum(np.max(np.abs(an), axis=-1), 1.0)
        assert err.max() <= 1e-7


def test_radial_log_derivative(default_model, wavy_model):
    m = default_model
    assert radial_log_derivative(m, pt([0.3, 1.0], [0, 0], 0.0)) == 0.0
    assert radial_log_derivative(m, pt([1, 1], [0.1, 0.9], 0.0)) == pytest.approx(2.0, abs=1e-13)
    assert radial_log_derivative(m, pt([2, 2], [0, 0], 0.5)) < 2.0
    rng = np.random.default_rng(14)
    for mm in (m, wavy_model):
        r, th, z = random_polar(rng, 2000)
        p = from_polar(r, th, z)
        Hr, _, _ = grad_H(mm, p)
        direct = np.sum(r * Hr, axis=-1) / eval_H(mm, p)
        assert np.max(np.abs(radial_log_derivative(mm, p) - direct)) <= 1e-10


def test_h3_margin(default_model, wavy_model):
    m = default_model
    assert h3_margin(m, pt([5, 0.1], [0, 0], 0.0)) == 1.0
    assert abs(h3_margin(m, pt([1, 1], [0.3, 2.2], 0.0))) <= 1e-14
    rng = np.random.default_rng(15)
    for mm in (m, wavy_model):
        r, th, z = random_polar(rng, 100_000, r=(0.0, 4.0), z=2.0)
        p = from_polar(r, th, z)
        H = eval_H(mm, p)
        assert np.allclose(h3_margin(mm, p), 0.5 * H * (2.0 - radial_log_derivative(mm, p)), atol=1e-12)
        off = distance_to_invariant_set(mm, p) > 0.05
        assert np.all(h3_margin(mm, p[off]) > 0.0)


def test_support_bounds(default_model, half_model):
    box = support_bounds(default_model)
    assert box.z_max == pytest.approx(math.sqrt(2.55), abs=1e-12)
    assert abs(box.r_max - 3.8547576) <= 1e-6
    assert abs(support_bounds(half_model).r_max - 3.853908) <= 1e-6
    rng = np.random.default_rng(16)
    r, th, _ = random_polar(rng, 2000, r=(0.0, 6.0))
    r[:, 1] = rng.uniform(0.0, 1.0 / 3.0, 2000)
    z = rng.choice([-1.0, 1.0], 2000) * rng.uniform(box.z_max, 5.0, 2000)
    p = from_polar(r, th, z)
    assert np.all(eval_H(default_model, p) == 1.0)
    assert not np.any(box.contains(p))


def test_on_set_and_distance(wavy_model):
    p, theta = torus_points(wavy_model, 200)
    assert np.all(np.abs(theta[:, 1]) <= 1e-15)
    assert np.allclose(eval_H(wavy_model, p), 1.4, atol=1e-14)
    assert np.max(distance_to_invariant_set(wavy_model, p)) <= 1e-15


def test_digest_and_b_resolution(default_model):
    V = TorusVectorField.constant((1.0, SQRT2))
    explicit = build_model(V, InvariantSetSpec.full_torus(2), 1.5, 0.7, b=4)
    assert default_model.b == 4.0
    assert explicit.digest() == default_model.digest()
    assert build_model(V, InvariantSetSpec.full_torus(2), 1.5, 0.7, b=8).digest() != explicit.digest()


@pytest.mark.parametrize("lam, C", [(1.0, 0.7), (2.1, 0.7), (1.5, 0.0), (1.5, 0.78)])
def test_constraint_violations(lam, C):
    with pytest.raises(ConstraintViolation):
        build_model(TorusVectorField.constant((1.0, 1.0)), InvariantSetSpec.full_torus(2), lam, C)


def test_mismatched_dimensions():
    with pytest.raises(ConstraintViolation):
        build_model(TorusVectorField.constant((1.0, 1.0)), InvariantSetSpec.full_torus(3), 1.5, 0.7)


def test_non_invariant_set_is_rejected():
    with pytest.raises(InvarianceViolation):
        build_model(TorusVectorField.constant((1.0, 1.0)), InvariantSetSpec.sub_torus(2, [1], [0.0]), 1.5, 0.7)
    orbit = InvariantSetSpec.periodic_orbit(2, [0.0, 0.3], [1, 2])
    m = build_model(TorusVectorField.constant((1.0, 2.0)), orbit, 1.5, 0.7)
    assert m.invariant_set.kind == "PeriodicOrbit"

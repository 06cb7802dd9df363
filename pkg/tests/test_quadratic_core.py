import numpy as np
import pytest
from conftest import wavy_field
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import minimize_scalar

from reebtorus import quadratic_core as qc
from reebtorus.errors import DomainError, NotPositiveDefinite, SearchExhausted
from reebtorus.torus_flows import TorusVectorField, normalize_field

HALF = normalize_field(TorusVectorField.constant((1.0, 1.0)), 1.5)
WAVY = normalize_field(wavy_field(), 1.5)


def brute_Q(k, r, tau, b):
    """Q^b[tau] with the coupling written as an explicit double loop over ordered pairs."""
    n = len(r)
    s = sum(k[i] * (r[i] - tau) ** 2 for i in range(n))
    s += b * sum((r[p] - r[q]) ** 2 for p in range(n) for q in range(n) if p != q)
    return s


def face_oracle(b, C, k=(0.5, 0.5)):
    """min of Q^b[2] over r_1 = 2/3, r_2 >= 1/3 by 1-D bounded minimization, minus (1 + C)."""

    def f(r2):
        return brute_Q(k, [2.0 / 3.0, r2], 2.0, b)

    res = minimize_scalar(f, bounds=(1.0 / 3.0, 10.0), method="bounded", options={"xatol": 1e-12})
    return res.fun - (1.0 + C), res.x


def test_q_examples():
    q = qc.QuadForm(1.0, HALF, 2.0)
    th = np.zeros(2)
    assert qc.eval_Q(q, np.array([2.0, 2.0]), th) == 0.0
    assert np.isclose(qc.eval_Q(q, np.array([1.0, 1.0]), th), 1.0, atol=1e-15)
    assert qc.eval_Q(qc.QuadForm(1.0, HALF, 1.0), np.array([1.0, 1.0]), th) == 0.0
    gr, gt = qc.grad_Q(q, np.array([1.0, 1.0]), th)
    assert np.allclose(gr, [-1.0, -1.0]) and np.all(gt == 0.0)


def test_domain_error():
    with pytest.raises(DomainError):
        qc.eval_Q(qc.QuadForm(1.0, HALF, 2.0), np.array([1.0, 0.0]), np.zeros(2))
    with pytest.raises(DomainError):
        qc.grad_Q(qc.QuadForm(1.0, HALF, 2.0), np.array([-1.0, 1.0]), np.zeros(2))


@settings(max_examples=100, deadline=None)
@given(
    st.lists(st.floats(0.05, 5.0), min_size=3, max_size=3),
    st.floats(0.0, 20.0),
    st.floats(-3.0, 3.0),
)
def test_vectorized_q_matches_double_loop(r, b, tau):
    k = np.array([0.2, 0.3, 0.5])
    assert np.isclose(qc.q_value(k, np.array(r), tau, b), brute_Q(k, r, tau, b), rtol=1e-12, atol=1e-12)


def test_quadratic_form_equals_matrix_form():
    rng = np.random.default_rng(0)
    th = rng.uniform(0, 2 * np.pi, (500, 2))
    r = rng.normal(size=(500, 2))
    r *= rng.uniform(0, 10, (500, 1)) / np.linalg.norm(r, axis=-1, keepdims=True)
    k = WAVY.k(th)
    A = qc.a_matrix(k, 3.0)
    quad = np.einsum("...i,...ij,...j->...", r, A, r)
    assert np.max(np.abs(qc.q_value(k, r, 0.0, 3.0) - quad)) <= 1e-12
    assert np.allclose(A, np.swapaxes(A, -1, -2))


def test_radial_identity():
    rng = np.random.default_rng(1)
    th = rng.uniform(0, 2 * np.pi, (1000, 2))
    r = rng.uniform(0.01, 5.0, (1000, 2))
    k = WAVY.k(th)
    lhs = np.sum(r * qc.q_grad_r(k, r, 2.0, 7.0), axis=-1)
    Q1 = qc.q_value(k, r, 1.0, 7.0)
    assert np.max(np.abs(lhs - (2 * Q1 - 2)) / (1 + np.abs(Q1))) <= 1e-10


def test_theta_gradient_matches_finite_differences():
    rng = np.random.default_rng(2)
    q = qc.QuadForm(2.0, WAVY, 2.0)
    r = rng.uniform(0.4, 3.0, (40, 2))
    th = rng.uniform(0, 2 * np.pi, (40, 2))
    _, gt = qc.grad_Q(q, r, th)
    h = 1e-6
    for j in range(2):
        e = np.eye(2)[j]
        fd = (qc.eval_Q(q, r, th + h * e) - qc.eval_Q(q, r, th - h * e)) / (2 * h)
        assert np.max(np.abs(fd - gt[:, j]) / np.maximum(np.abs(gt[:, j]), 1.0)) <= 1e-7


def test_nonnegative_once_positive_definite():
    rng = np.random.default_rng(3)
    r = rng.uniform(0.01, 6.0, (2000, 2))
    th = rng.uniform(0, 2 * np.pi, (2000, 2))
    assert qc.min_eig_over_torus(4.0, WAVY)[0] > 0
    assert np.all(qc.eval_Q(qc.QuadForm(4.0, WAVY, 2.0), r, th) >= 0.0)


@pytest.mark.parametrize("b", [0.0, 1.0, 10.0])
def test_min_eigenvalue_constant_half(b):
    lam, _ = qc.min_eig_over_torus(b, HALF)
    assert np.isclose(lam, 0.5, atol=1e-13)


@pytest.mark.parametrize("b", [1.0, 4.0, 100.0, 1000.0])
def test_constant_k_eigenvalues_closed_form(b):
    for n in (2, 3, 4):
        k = np.full(n, 1.0 / n)
        w = np.linalg.eigvalsh(qc.a_matrix(k, b))
        expected = np.array([1.0 / n] + [1.0 / n + 2 * n * b] * (n - 1))
        assert np.max(np.abs(w - expected)) <= 1e-12 * max(1.0, b)


def test_eigen_asymptotics_examples():
    snaps = qc.eigen_asymptotics([1.0, 10.0, 100.0], HALF, np.zeros(2))
    s10 = snaps[1]
    assert np.isclose(s10.ratios[0], 0.5 / 40.5, rtol=1e-12)
    assert s10.angle <= 1e-7
    ratios = [s.ratios[0] for s in snaps]
    assert ratios[0] > ratios[1] > ratios[2]
    assert np.isclose(qc.eigen_asymptotics([0.0], HALF, np.zeros(2))[0].ratios[0], 1.0)
    with pytest.raises(ValueError):
        qc.eigen_asymptotics([10.0, 1.0], HALF, np.zeros(2))


def test_eigen_asymptotics_nonconstant_angle_shrinks():
    th = np.array([0.4, 1.9])
    angles = [s.angle for s in qc.eigen_asymptotics([1.0, 10.0, 100.0, 1000.0], WAVY, th)]
    assert all(a > b for a, b in zip(angles, angles[1:]))


def test_hausdorff_examples():
    d = qc.hausdorff_E_to_J(100.0, 1.0, HALF, np.zeros(2))
    # semi-minor axis of the ellipse: 1 / sqrt(0.5 + 400)
    assert np.isclose(d, 1.0 / np.sqrt(400.5), rtol=1e-9)
    assert abs(d - 0.04997) <= 1e-4
    ds = [qc.hausdorff_E_to_J(b, 1.0, HALF, np.zeros(2)) for b in (10.0, 100.0, 1000.0)]
    assert ds[0] > ds[1] > ds[2]


def test_segment_endpoints_on_ellipse_boundary():
    A = qc.a_matrix(HALF.k(np.zeros(2)), 37.0)
    end = np.ones(2)
    assert np.isclose(end @ A @ end, 1.0, atol=1e-12)


def test_hausdorff_nonconstant_decreases_and_contains():
    th = np.array([1.0, 2.0])
    ds = [qc.hausdorff_E_to_J(b, 0.7, WAVY, th) for b in (10.0, 100.0, 1000.0)]
    assert ds[0] > ds[1] > ds[2]


def test_hausdorff_errors():
    with pytest.raises(NotPositiveDefinite):
        qc.hausdorff_E_to_J(-1.0, 1.0, HALF, np.zeros(2))
    with pytest.raises(ValueError):
        qc.hausdorff_E_to_J(1.0, 0.0, HALF, np.zeros(2))


@pytest.mark.parametrize("b, expected, tol", [(1.0, -0.100, 0.005), (4.0, 0.0255, 0.003)])
def test_region_L_margin_matches_face_oracle(b, expected, tol):
    cert = qc.check_lemma_L(b, 0.7, HALF)
    oracle, r2 = face_oracle(b, 0.7)
    assert abs(cert.margin - expected) <= tol
    assert abs(cert.margin - oracle) <= 1e-9
    # closed-form face minimizer r_2 = (2 + 4 b r_1) / (1 + 4 b)
    assert np.isclose(r2, (2 + 4 * b * 2 / 3) / (1 + 4 * b), atol=1e-6)
    assert np.isclose(min(cert.witness_r), 2.0 / 3.0, atol=1e-9)
    assert cert.passed == (cert.margin > 0)


def test_region_L_inner_box_b0():
    # with both coordinates inside (1/3, 2/3) and b = 0 the worst corner is (2/3, 2/3)
    rr = np.linspace(1 / 3, 2 / 3, 101)
    R1, R2 = np.meshgrid(rr, rr)
    vals = qc.q_value(np.array([0.5, 0.5]), np.stack([R1, R2], -1), 2.0, 0.0)
    assert np.isclose(vals.min(), (4.0 / 3.0) ** 2, atol=1e-12)
    assert vals.min() > 1.7


def test_region_L_raises_when_asked():
    from reebtorus.errors import MarginNegative

    with pytest.raises(MarginNegative) as exc:
        qc.check_lemma_L(1.0, 0.7, HALF, raise_on_negative=True)
    assert exc.value.margin < 0
    with pytest.raises(ValueError):
        qc.check_lemma_L(1.0, 0.8, HALF)


def test_region_L_nonconstant_grid_bound():
    cert = qc.check_lemma_L(4.0, 0.6, WAVY)
    # polishing can only lower the grid minimum, and the Lipschitz slack bounds the gap
    assert cert.margin + 1.0 + 0.6 <= cert.details["grid_min"] + 1e-15
    assert cert.details["grid_min"] - (cert.margin + 1.6) <= cert.lipschitz_slack


def test_find_b():
    assert qc.find_b(0.7, HALF).b == 4.0
    cert = qc.find_b(0.1, HALF)
    assert cert.b <= 4.0 and cert.lemma_L.passed
    with pytest.raises(ValueError):
        qc.find_b(0.8, HALF)
    with pytest.raises(SearchExhausted):
        qc.find_b(0.7, HALF, cap_exponent=1)


def test_find_b_default_field():
    cert = qc.find_b(0.7, normalize_field(TorusVectorField.constant((1.0, np.sqrt(2))), 1.5))
    assert cert.b == 4.0
    assert np.isclose(cert.lemma_L.margin, 0.006726, atol=1e-6)

import json

import numpy as np
import pytest

from reebtorus.errors import ConstraintViolation
from reebtorus.scenario import default_scenario
from reebtorus.verify_report import Plan, check_rng, fd_gradient_oracle, run_suite

EXPECTED = [
    "constraints",
    "b.positive_definite",
    "b.region_L",
    "rho.profile",
    "G.profile",
    "H.positive",
    "H.support_plateau",
    "H.radial_margin",
    "H.on_set",
    "Q.radial_identity",
    "gradient.K",
    "gradient.H",
    "reeb.alpha",
    "reeb.d_alpha",
    "X.transverse",
    "X.round_trip",
    "X.outside_support",
    "X.z_monotone",
    "X.dz_agreement",
    "X.on_set_flow",
    "support.shell",
    "eigen.asymptotics",
    "hausdorff.decrease",
    "dynamics.torus_drift",
    "dynamics.z_monotonicity",
    "dynamics.alpha_along_orbit",
]


@pytest.fixture(scope="module")
def report():
    return run_suite(default_scenario(), seed=42)


def test_default_scenario_passes(report):
    assert [c.name for c in report.checks] == EXPECTED
    failed = [c.name for c in report.checks if not c.passed]
    assert report.passed, failed
    assert report.model_b == 4.0


def test_report_schema(report):
    data = json.loads(report.dumps())
    assert set(data) == {"scenario_hash", "seed", "checks", "pass"}
    assert data["seed"] == 42 and len(data["scenario_hash"]) == 64
    for c in data["checks"]:
        assert set(c) == {"name", "anchor", "samples", "worst", "witness", "pass"}
        assert c["anchor"]
        assert c["worst"] is None or np.isfinite(c["worst"])


def test_small_b_fails_only_region_L():
    rep = run_suite(default_scenario(b=1.0), seed=42)
    assert [c.name for c in rep.checks if not c.passed] == ["b.region_L"]
    assert rep.check("b.region_L").worst < 0


def test_invalid_constants_raise_before_checks():
    with pytest.raises(ConstraintViolation):
        run_suite(default_scenario(lam=2.5))


def test_reproducible_by_seed_and_thread_count(report):
    again = run_suite(default_scenario(), seed=42, plan=Plan(threads=4))
    assert again.dumps() == report.dumps()
    other = run_suite(default_scenario(), seed=43)
    assert other.dumps() != report.dumps() and other.passed


def test_check_lookup(report):
    assert report.check("H.on_set").passed
    with pytest.raises(KeyError):
        report.check("nonexistent")


def test_check_rng_streams_are_independent():
    a = check_rng(1, "x").random(5)
    assert np.array_equal(a, check_rng(1, "x").random(5))
    assert not np.array_equal(a, check_rng(1, "y").random(5))
    assert not np.array_equal(a, check_rng(2, "x").random(5))


def test_fd_oracle_examples():
    p = np.random.default_rng(0).normal(size=(20, 3))
    assert np.all(fd_gradient_oracle(lambda q: np.full(q.shape[:-1], 3.0), p) == 0.0)
    g = fd_gradient_oracle(lambda q: np.sum(q * q, axis=-1), p)
    assert np.allclose(g, 2 * p, atol=1e-9)
    cubic = fd_gradient_oracle(lambda q: np.sum(q**3, axis=-1), p, step=1e-3, richardson=True)
    assert np.allclose(cubic, 3 * p**2, atol=1e-10)


def test_with_samples():
    plan = Plan().with_samples(500)
    assert plan.samples == 500 and plan.small_samples == 50

"""Reeb flows on R^{2n+1} with a prescribed invariant torus set.

The contact Hamiltonian H = G o K is built from a flow on T^n; the Reeb field
of alpha_st / H keeps {r = 1, z = 0} x A invariant, sends every other point
upward in z, and equals d/dz outside a compact box.
"""

from .contact_reeb import certify_reeb, dz_rate, reeb_field
from .dynamics import IntegratorConfig, integrate, search_trapped, torus_drift
from .hamiltonian import HamiltonianModel, build_model, eval_H, eval_K, grad_H, grad_K, support_bounds
from .scenario import ScenarioConfig, default_scenario
from .torus_flows import InvariantSetSpec, TorusVectorField, TrigPoly
from .verify_report import Plan, VerificationReport, run_suite

__version__ = "0.1.0"

__all__ = [
    "HamiltonianModel",
    "IntegratorConfig",
    "InvariantSetSpec",
    "Plan",
    "ScenarioConfig",
    "TorusVectorField",
    "TrigPoly",
    "VerificationReport",
    "build_model",
    "certify_reeb",
    "default_scenario",
    "dz_rate",
    "eval_H",
    "eval_K",
    "grad_H",
    "grad_K",
    "integrate",
    "reeb_field",
    "run_suite",
    "search_trapped",
    "support_bounds",
    "torus_drift",
]

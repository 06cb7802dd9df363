"""Scenario files: everything needed to rebuild a model and rerun its checks."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .dynamics import IntegratorConfig
from .errors import ConstraintViolation
from .hamiltonian import HamiltonianModel, build_model, validate_constants
from .torus_flows import InvariantSetSpec, TorusVectorField


@dataclass(frozen=True)
class ScenarioConfig:
    n: int
    C: float
    lam: float
    V: TorusVectorField
    invariant_set: InvariantSetSpec
    b: float | str = "auto"
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    seed: int = 0

    def __post_init__(self):
        if self.V.n != self.n or self.invariant_set.n != self.n:
            raise ConstraintViolation(f"V and the invariant set must both live on T^{self.n}")
        if self.b != "auto" and not (isinstance(self.b, (int, float)) and self.b >= 0):
            raise ConstraintViolation(f'b must be "auto" or a non-negative number, got {self.b!r}')
        validate_constants(self.C, self.lam)

    def build(self, grid: int = 16, r_grid: int = 41) -> HamiltonianModel:
        return build_model(self.V, self.invariant_set, self.lam, self.C, b=self.b, grid=grid, r_grid=r_grid)

    def with_b(self, b) -> "ScenarioConfig":
        return replace(self, b=b)

    def to_json(self) -> dict:
        cfg = self.integrator
        return {
            "n": self.n,
            "C": self.C,
            "lambda": self.lam,
            "b": self.b,
            "V": self.V.to_json(),
            "invariant_set": self.invariant_set.to_json(),
            "integrator": {
                "rtol": cfg.rtol,
                "atol": cfg.atol,
                "max_step": None if np.isinf(cfg.max_step) else cfg.max_step,
                "max_steps": cfg.max_steps,
            },
            "seed": self.seed,
        }

    @classmethod
    def from_json(cls, data: dict) -> "ScenarioConfig":
        try:
            n = int(data["n"])
            integ = dict(data.get("integrator") or {})
            if integ.get("max_step") is None:
                integ.pop("max_step", None)
            b = data.get("b", "auto")
            return cls(
                n=n,
                C=float(data["C"]),
                lam=float(data["lambda"]),
                V=TorusVectorField.from_json(data["V"]),
                invariant_set=InvariantSetSpec.from_json(n, data.get("invariant_set", {"kind": "FullTorus"})),
                b=b if b == "auto" else float(b),
                integrator=IntegratorConfig(**integ),
                seed=int(data.get("seed", 0)),
            )
        except (KeyError, TypeError) as exc:
            raise ConstraintViolation(f"malformed scenario: {exc}") from exc

    @classmethod
    def load(cls, path) -> "ScenarioConfig":
        with open(path) as fh:
            return cls.from_json(json.load(fh))

    def dump(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2) + "\n")


def default_scenario(**overrides) -> ScenarioConfig:
    """n = 2, V = (1, sqrt 2) on the full torus, C = 0.7, lambda = 1.5."""
    base = dict(
        n=2,
        C=0.7,
        lam=1.5,
        V=TorusVectorField.constant((1.0, float(np.sqrt(2.0)))),
        invariant_set=InvariantSetSpec.full_torus(2),
        b="auto",
        seed=0,
    )
    base.update(overrides)
    return ScenarioConfig(**base)

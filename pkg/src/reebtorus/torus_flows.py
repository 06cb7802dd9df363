"""Functions, vector fields and invariant sets on the torus T^n.

Every torus function is a finite real trigonometric polynomial, so values and
derivatives are exact and the objects serialize to plain JSON.  Angles are
passed as arrays of shape ``(..., n)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy.integrate import solve_ivp

from .errors import InvarianceViolation, TransversalityViolation, UnsupportedSet

TWO_PI = 2.0 * np.pi
DEFAULT_GRID = 64


def torus_grid(n: int, per_axis: int = DEFAULT_GRID) -> np.ndarray:
    """Uniform grid on T^n as an array of shape ``(per_axis**n, n)``."""
    axis = np.arange(per_axis) * (TWO_PI / per_axis)
    mesh = np.meshgrid(*([axis] * n), indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def wrap_angle(theta):
    """Map angles to the interval [-pi, pi)."""
    return (np.asarray(theta) + np.pi) % TWO_PI - np.pi


@dataclass(frozen=True)
class TrigPoly:
    """``value(theta) = sum a*cos(m.theta) + s*sin(m.theta)`` over the terms."""

    n: int
    modes: np.ndarray = field(repr=False)  # (T, n) integer frequencies
    cos_coef: np.ndarray = field(repr=False)  # (T,)
    sin_coef: np.ndarray = field(repr=False)  # (T,)

    def __post_init__(self):
        modes = np.asarray(self.modes, dtype=np.int64).reshape(-1, self.n)
        a = np.asarray(self.cos_coef, dtype=float).reshape(-1)
        s = np.asarray(self.sin_coef, dtype=float).reshape(-1)
        if not (len(modes) == len(a) == len(s)):
            raise ValueError("modes and coefficient arrays differ in length")
        for arr in (modes, a, s):
            arr.setflags(write=False)
        object.__setattr__(self, "modes", modes)
        object.__setattr__(self, "cos_coef", a)
        object.__setattr__(self, "sin_coef", s)

    @classmethod
    def from_terms(cls, n: int, terms) -> "TrigPoly":
        terms = list(terms)
        if not terms:
            return cls(n, np.zeros((0, n), dtype=np.int64), np.zeros(0), np.zeros(0))
        modes = [list(t[0]) for t in terms]
        if any(len(m) != n for m in modes):
            raise ValueError(f"every mode vector must have length {n}")
        return cls(n, modes, [t[1] for t in terms], [t[2] for t in terms])

    @classmethod
    def constant(cls, n: int, value: float) -> "TrigPoly":
        return cls.from_terms(n, [((0,) * n, float(value), 0.0)])

    @property
    def is_constant(self) -> bool:
        return not np.any(self.modes)

    def _phases(self, theta):
        theta = np.asarray(theta, dtype=float)
        return theta @ self.modes.T.astype(float)

    def __call__(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        if self.is_constant:
            return np.full(theta.shape[:-1], self.cos_coef.sum())
        ph = self._phases(theta)
        return np.cos(ph) @ self.cos_coef + np.sin(ph) @ self.sin_coef

    def grad(self, theta) -> np.ndarray:
        """Partial derivatives, shape ``(..., n)``."""
        theta = np.asarray(theta, dtype=float)
        if self.is_constant:
            return np.zeros(theta.shape)
        ph = self._phases(theta)
        weights = np.cos(ph) * self.sin_coef - np.sin(ph) * self.cos_coef
        return weights @ self.modes.astype(float)

    def __add__(self, other: "TrigPoly") -> "TrigPoly":
        if other.n != self.n:
            raise ValueError("dimension mismatch")
        return TrigPoly(
            self.n,
            np.vstack([self.modes, other.modes]),
            np.concatenate([self.cos_coef, other.cos_coef]),
            np.concatenate([self.sin_coef, other.sin_coef]),
        )

    def scale(self, c: float) -> "TrigPoly":
        return TrigPoly(self.n, self.modes, c * self.cos_coef, c * self.sin_coef)

    def to_json(self) -> list:
        return [
            {"m": [int(v) for v in m], "a": float(a), "s": float(s)}
            for m, a, s in zip(self.modes, self.cos_coef, self.sin_coef)
        ]

    @classmethod
    def from_json(cls, n: int, data: Sequence[dict]) -> "TrigPoly":
        if isinstance(data, (int, float)):
            return cls.constant(n, data)
        return cls.from_terms(n, [(d["m"], d.get("a", 0.0), d.get("s", 0.0)) for d in data])


@dataclass(frozen=True)
class TorusVectorField:
    """V = sum_j nu_j d/dtheta_j."""

    nu: tuple

    def __post_init__(self):
        object.__setattr__(self, "nu", tuple(self.nu))
        if len({p.n for p in self.nu}) != 1 or self.nu[0].n != len(self.nu):
            raise ValueError("need n trigonometric polynomials in n variables")

    @property
    def n(self) -> int:
        return len(self.nu)

    @classmethod
    def constant(cls, values: Sequence[float]) -> "TorusVectorField":
        n = len(values)
        return cls(tuple(TrigPoly.constant(n, v) for v in values))

    def __call__(self, theta) -> np.ndarray:
        return np.stack([p(theta) for p in self.nu], axis=-1)

    def jacobian(self, theta) -> np.ndarray:
        """``J[..., i, j] = d nu_i / d theta_j``."""
        return np.stack([p.grad(theta) for p in self.nu], axis=-2)

    def transversality(self, theta) -> np.ndarray:
        """sum_j dtheta_j(V) at the given angles."""
        return self(theta).sum(axis=-1)

    def to_json(self) -> dict:
        return {"nu": [p.to_json() for p in self.nu]}

    @classmethod
    def from_json(cls, data) -> "TorusVectorField":
        """Accepts {"nu": [...]} or the bare list; each entry is a number or a list of terms."""
        nu = data["nu"] if isinstance(data, dict) else data
        n = len(nu)
        return cls(tuple(TrigPoly.from_json(n, p) for p in nu))


@dataclass(frozen=True)
class NormalizedField:
    """k_j = nu_j / sum(nu) and f = 2*lambda / sum(nu), evaluated as quotients."""

    V: TorusVectorField
    lam: float

    @property
    def n(self) -> int:
        return self.V.n

    @property
    def is_constant(self) -> bool:
        return all(p.is_constant for p in self.V.nu)

    def k(self, theta) -> np.ndarray:
        nu = self.V(theta)
        return nu / nu.sum(axis=-1, keepdims=True)

    def dk(self, theta) -> np.ndarray:
        """``dk[..., i, j] = d k_i / d theta_j`` by the quotient rule."""
        nu = self.V(theta)
        jac = self.V.jacobian(theta)
        sigma = nu.sum(axis=-1)[..., None, None]
        dsigma = jac.sum(axis=-2)[..., None, :]
        return (jac * sigma - nu[..., :, None] * dsigma) / sigma**2

    def f(self, theta) -> np.ndarray:
        return 2.0 * self.lam / self.V(theta).sum(axis=-1)


def normalize_field(V: TorusVectorField, lam: float, grid: int = DEFAULT_GRID) -> NormalizedField:
    """Split V into the direction k (sum k_j = 1) and the speed factor f.

    Raises TransversalityViolation when sum_j nu_j is not positive on the grid.
    """
    if not lam > 1.0:
        raise ValueError(f"lambda must exceed 1, got {lam}")
    pts = torus_grid(V.n, grid if not all(p.is_constant for p in V.nu) else 1)
    sigma = V.transversality(pts)
    i = int(np.argmin(sigma))
    if sigma[i] <= 0.0:
        raise TransversalityViolation(
            f"sum of nu_j = {sigma[i]:.6g} <= 0 at theta={pts[i].tolist()}"
        )
    return NormalizedField(V, float(lam))


# ---------------------------------------------------------------------------
# invariant sets


def integer_kernel(direction: Sequence[int]) -> np.ndarray:
    """Basis of {m in Z^n : m . direction = 0}, as rows of an (n-1, n) array.

    Column operations with unimodular matrices reduce ``direction`` to
    (g, 0, ..., 0); the trailing columns of the accumulated transform span
    the integer annihilator.
    """
    v = [int(d) for d in direction]
    n = len(v)
    U = [[int(i == j) for j in range(n)] for i in range(n)]

    def colop(dst, src, q):
        # column dst -= q * column src
        v[dst] -= q * v[src]
        for row in U:
            row[dst] -= q * row[src]

    def swap(i, j):
        v[i], v[j] = v[j], v[i]
        for row in U:
            row[i], row[j] = row[j], row[i]

    while True:
        nonzero = [i for i in range(n) if v[i] != 0]
        if len(nonzero) <= 1:
            break
        piv = min(nonzero, key=lambda i: abs(v[i]))
        for i in nonzero:
            if i != piv:
                colop(i, piv, v[i] // v[piv])
    if not any(v):
        raise UnsupportedSet("zero direction")
    piv = next(i for i in range(n) if v[i] != 0)
    swap(0, piv)
    return np.array([[U[r][c] for r in range(n)] for c in range(1, n)], dtype=np.int64)


def _as_integer_direction(direction) -> list:
    ints = []
    for d in direction:
        frac = Fraction(d).limit_denominator(10**6)
        if abs(float(frac) - float(d)) > 1e-12:
            raise UnsupportedSet(f"direction component {d} is not rational")
        ints.append(frac)
    lcm = math.lcm(*[f.denominator for f in ints])
    out = [int(f * lcm) for f in ints]
    g = math.gcd(*out)
    if g == 0:
        raise UnsupportedSet("zero direction")
    return [x // g for x in out]


KINDS = ("FullTorus", "SubTorus", "PeriodicOrbit", "Custom")


@dataclass(frozen=True)
class InvariantSetSpec:
    """A compact set A in T^n together with a function mu vanishing to second order on it.

    ``indices`` are 0-based angle indices for SubTorus.  For Custom sets the
    caller supplies ``points`` (a sample cloud of A) and ``mu``.
    """

    n: int
    kind: str
    mu: TrigPoly | None = None
    indices: tuple = ()
    values: tuple = ()
    base: tuple = ()
    direction: tuple = ()
    points: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise UnsupportedSet(f"unknown invariant set kind {self.kind!r}")
        if self.kind == "PeriodicOrbit":
            object.__setattr__(self, "direction", tuple(_as_integer_direction(self.direction)))
        if self.kind == "Custom":
            if self.mu is None or self.points is None:
                raise UnsupportedSet("Custom sets need both sample points and mu")
            pts = np.atleast_2d(np.asarray(self.points, dtype=float))
            object.__setattr__(self, "points", pts)
        elif self.mu is None:
            object.__setattr__(self, "mu", build_mu(self))

    @classmethod
    def full_torus(cls, n: int) -> "InvariantSetSpec":
        return cls(n, "FullTorus")

    @classmethod
    def sub_torus(cls, n: int, indices, values) -> "InvariantSetSpec":
        return cls(n, "SubTorus", indices=tuple(int(i) for i in indices), values=tuple(float(v) for v in values))

    @classmethod
    def periodic_orbit(cls, n: int, base, direction) -> "InvariantSetSpec":
        return cls(n, "PeriodicOrbit", base=tuple(float(b) for b in base), direction=tuple(direction))

    @classmethod
    def custom(cls, points, mu: TrigPoly) -> "InvariantSetSpec":
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return cls(mu.n, "Custom", mu=mu, points=pts)

    def sample(self, count: int = 64) -> np.ndarray:
        """Points of A, shape ``(N, n)``; roughly ``count`` of them for the continuous kinds."""
        n = self.n
        if self.kind == "FullTorus":
            per = max(1, round(count ** (1.0 / n)))
            return torus_grid(n, per)
        if self.kind == "SubTorus":
            free = [j for j in range(n) if j not in self.indices]
            per = max(1, round(count ** (1.0 / max(len(free), 1))))
            sub = torus_grid(len(free), per) if free else np.zeros((1, 0))
            pts = np.zeros((len(sub), n))
            pts[:, free] = sub
            pts[:, list(self.indices)] = self.values
            return pts
        if self.kind == "PeriodicOrbit":
            t = np.arange(count) * (TWO_PI / count)
            return wrap_angle(np.asarray(self.base) + t[:, None] * np.asarray(self.direction, float)) % TWO_PI
        return self.points

    def distance(self, theta) -> np.ndarray:
        """Distance from theta to A (a mu-based proxy for periodic orbits)."""
        theta = np.asarray(theta, dtype=float)
        if self.kind == "FullTorus":
            return np.zeros(theta.shape[:-1])
        if self.kind == "SubTorus":
            d = wrap_angle(theta[..., list(self.indices)] - np.asarray(self.values))
            return np.sqrt(np.sum(d**2, axis=-1))
        if self.kind == "PeriodicOrbit":
            if self.n == 1:
                return np.zeros(theta.shape[:-1])
            # sqrt(2 mu), with 1 - cos d written as 2 sin^2(d/2) to keep small distances accurate
            K = integer_kernel(_as_integer_direction(self.direction))
            d = (theta - np.asarray(self.base, dtype=float)) @ K.T.astype(float)
            return 2.0 * np.sqrt(np.sum(np.sin(0.5 * d) ** 2, axis=-1))
        d = wrap_angle(theta[..., None, :] - self.points)
        return np.sqrt(np.min(np.sum(d**2, axis=-1), axis=-1))

    def to_json(self) -> dict:
        out = {"kind": self.kind}
        if self.kind == "SubTorus":
            out.update(indices=list(self.indices), values=list(self.values))
        elif self.kind == "PeriodicOrbit":
            out.update(base=list(self.base), direction=list(self.direction))
        elif self.kind == "Custom":
            out.update(points=self.points.tolist(), mu=self.mu.to_json())
        return out

    @classmethod
    def from_json(cls, n: int, data: dict) -> "InvariantSetSpec":
        kind = data.get("kind", "FullTorus")
        if kind == "FullTorus":
            return cls.full_torus(n)
        if kind == "SubTorus":
            return cls.sub_torus(n, data["indices"], data["values"])
        if kind == "PeriodicOrbit":
            return cls.periodic_orbit(n, data.get("base", [0.0] * n), data["direction"])
        if kind == "Custom":
            return cls.custom(data["points"], TrigPoly.from_json(n, data["mu"]))
        raise UnsupportedSet(f"unknown invariant set kind {kind!r}")


def build_mu(spec: InvariantSetSpec) -> TrigPoly:
    """Closed-form mu >= 0 with mu = grad mu = 0 exactly on A and mu > 0 off A."""
    n = spec.n
    if spec.kind == "FullTorus":
        return TrigPoly.from_terms(n, [])
    if spec.kind == "SubTorus":
        terms = []
        for i, c in zip(spec.indices, spec.values):
            m = [0] * n
            m[i] = 1
            terms.append(((0,) * n, 1.0, 0.0))
            terms.append((tuple(m), -math.cos(c), -math.sin(c)))
        return TrigPoly.from_terms(n, terms)
    if spec.kind == "PeriodicOrbit":
        direction = _as_integer_direction(spec.direction)
        if n == 1:
            return TrigPoly.from_terms(n, [])
        base = np.asarray(spec.base, dtype=float)
        terms = []
        for m in integer_kernel(direction):
            phase = float(m @ base)
            terms.append(((0,) * n, 1.0, 0.0))
            terms.append((tuple(int(v) for v in m), -math.cos(phase), -math.sin(phase)))
        return TrigPoly.from_terms(n, terms)
    raise UnsupportedSet("Custom invariant sets carry a user-supplied mu")


def check_invariance(
    V: TorusVectorField,
    spec: InvariantSetSpec,
    T: float,
    tol: float = 1e-9,
    samples: int = 64,
) -> float:
    """Flow sample points of A along sum_j k_j d/dtheta_j for time T; return the worst drift."""
    if spec.kind == "FullTorus":
        return 0.0
    pts = spec.sample(samples)
    if len(pts) == 0:
        raise InvarianceViolation("invariant set has no sample points")
    field_ = NormalizedField(V, 2.0)
    n = V.n

    def rhs(_t, y):
        return field_.k(y.reshape(-1, n)).ravel()

    sol = solve_ivp(rhs, (0.0, T), pts.ravel(), method="DOP853", rtol=1e-12, atol=1e-12, dense_output=True)
    times = np.linspace(0.0, T, 201)
    traj = sol.sol(times).T.reshape(len(times), -1, n)
    drift = float(np.max(spec.distance(traj)))
    if drift > tol:
        raise InvarianceViolation(f"flow leaves the invariant set: drift {drift:.3g} > {tol:.3g}")
    return drift

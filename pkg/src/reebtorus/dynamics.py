"""Orbits of the Reeb flow: integration, drift, escape classification, trapped-orbit search."""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import DOP853, OdeSolution
from scipy.optimize import brentq

from .contact_reeb import certify_reeb, dz_rate, reeb_rhs
from .errors import MonotonicityViolation, NoBracket, StepLimit, StepUnderflow
from .fileio import atomic_write
from .hamiltonian import HamiltonianModel, distance_to_invariant_set, eval_H
from .phase import as_cartesian, from_polar, to_polar


@dataclass(frozen=True)
class IntegratorConfig:
    rtol: float = 1e-10
    atol: float = 1e-10
    max_step: float = np.inf
    max_steps: int = 1_000_000

    def __post_init__(self):
        if not (self.rtol > 0 and self.atol > 0):
            raise ValueError("rtol and atol must be positive")
        if self.max_steps < 1:
            raise ValueError("max_steps must be positive")


@dataclass
class OrbitTrace:
    """States at the accepted integrator steps (plus optional sample times).

    ``reason`` is one of "horizon", "escaped", "event" or "step-limit".
    """

    times: np.ndarray
    states: np.ndarray
    reason: str
    n_steps: int
    nfev: int
    sol: OdeSolution | None = field(default=None, repr=False)
    event_time: float | None = None

    @property
    def direction(self) -> int:
        return 1 if self.times[-1] >= self.times[0] else -1

    def at(self, t):
        return self.sol(t).T if np.ndim(t) else self.sol(t)


def _trace(ts, ys, interpolants, reason, n_steps, nfev, event_time=None):
    sol = OdeSolution(ts, interpolants) if interpolants else None
    return OrbitTrace(np.asarray(ts), np.asarray(ys), reason, n_steps, nfev, sol, event_time)


def integrate(
    m: HamiltonianModel,
    x0,
    t_span,
    cfg: IntegratorConfig = IntegratorConfig(),
    t_eval=None,
    escape_radius: float | None = None,
    event: Callable[[float, np.ndarray], float] | None = None,
    event_direction: int = 0,
) -> OrbitTrace:
    """Integrate the Reeb field with an adaptive 8(5,3) Dormand-Prince scheme.

    Stops at the horizon, when |x| first reaches ``escape_radius``, or at the
    first zero of ``event`` crossed in ``event_direction`` (0 = either).  The
    stopping point is located on the dense output.  When ``t_eval`` is given
    the returned states are the dense-output values at those times.
    """
    t0, t1 = map(float, t_span)
    y0 = np.array(as_cartesian(x0), dtype=float)
    if t1 == t0:
        return OrbitTrace(np.array([t0]), y0[None, :], "horizon", 0, 0, None)
    rhs = reeb_rhs(m)
    solver = DOP853(rhs, t0, y0, t1, max_step=cfg.max_step, rtol=cfg.rtol, atol=cfg.atol)
    ts, ys, interps = [t0], [y0.copy()], []
    reason, stop_t = "horizon", None
    g_prev = event(t0, y0) if event is not None else None
    steps = 0
    while solver.status == "running":
        if steps >= cfg.max_steps:
            partial = _trace(ts, ys, interps, "step-limit", steps, solver.nfev)
            raise StepLimit(f"step limit {cfg.max_steps} reached at t={ts[-1]:.6g}", partial)
        msg = solver.step()
        if solver.status == "failed":
            partial = _trace(ts, ys, interps, "step-limit", steps, solver.nfev)
            raise StepUnderflow(f"integrator failed at t={ts[-1]:.6g}: {msg}", partial)
        steps += 1
        dense = solver.dense_output()
        t_new, y_new = solver.t, solver.y.copy()
        if escape_radius is not None and np.linalg.norm(y_new) >= escape_radius:
            fn = lambda t: np.linalg.norm(dense(t)) - escape_radius  # noqa: E731
            stop_t = ts[-1] if fn(ts[-1]) >= 0 else brentq(fn, ts[-1], t_new, xtol=1e-14, rtol=1e-15)
            reason = "escaped"
        if event is not None:
            g_new = event(t_new, y_new)
            crossed = (g_prev < 0 <= g_new and event_direction >= 0) or (g_prev > 0 >= g_new and event_direction <= 0)
            if crossed:
                te = brentq(lambda t: event(t, dense(t)), ts[-1], t_new, xtol=1e-15, rtol=1e-15)
                if stop_t is None or (te - stop_t) * (t1 - t0) < 0:
                    stop_t, reason = te, "event"
            g_prev = g_new
        interps.append(dense)
        if stop_t is not None:
            ts.append(stop_t)
            ys.append(dense(stop_t))
            break
        ts.append(t_new)
        ys.append(y_new)
    trace = _trace(ts, ys, interps, reason, steps, solver.nfev, stop_t if reason == "event" else None)
    if t_eval is not None:
        t_eval = np.asarray(t_eval, dtype=float)
        lo, hi = sorted((trace.times[0], trace.times[-1]))
        t_eval = t_eval[(t_eval >= lo) & (t_eval <= hi)]
        trace.times, trace.states = t_eval, trace.sol(t_eval).T
    return trace


def torus_drift(m: HamiltonianModel, theta0, T: float, cfg: IntegratorConfig = IntegratorConfig()):
    """Worst |r_j - 1| and |z| along the orbit of (r = 1, theta0, z = 0) over [0, T]."""
    theta0 = np.asarray(theta0, dtype=float)
    x0 = from_polar(np.ones(m.n), theta0, 0.0)
    if T == 0:
        return 0.0, 0.0
    trace = integrate(m, x0, (0.0, T), cfg)
    # refine between steps with the dense output
    fine = np.linspace(0.0, T, max(2001, 4 * len(trace.times)))
    states = np.vstack([trace.states, trace.sol(fine).T])
    r, _, z = to_polar(states)
    return float(np.max(np.abs(r - 1.0))), float(np.max(np.abs(z)))


@dataclass(frozen=True)
class MonotonicityReport:
    passed: bool
    worst_rate: float
    witness: np.ndarray | None
    checked: int


def z_monotonicity_check(trace: OrbitTrace, m: HamiltonianModel, eps: float = 0.05, raise_on_fail=True):
    """dz(X) > 0 at every stored state farther than eps from A x {0}."""
    far = distance_to_invariant_set(m, trace.states) > eps
    if not np.any(far):
        return MonotonicityReport(True, np.inf, None, 0)
    rates = dz_rate(m, trace.states[far])
    i = int(np.argmin(rates))
    report = MonotonicityReport(bool(rates[i] > 0.0), float(rates[i]), trace.states[far][i], int(far.sum()))
    if raise_on_fail and not report.passed:
        raise MonotonicityViolation(report.worst_rate, report.witness)
    return report


@dataclass(frozen=True)
class Box:
    """{r_min <= r_j <= r_max, |z| <= z_max}, optionally also |x| <= radius."""

    r_min: float = 0.0
    r_max: float = np.inf
    z_max: float = np.inf
    radius: float = np.inf

    def inside(self, states):
        r, _, z = to_polar(np.atleast_2d(states))
        ok = np.all((r >= self.r_min) & (r <= self.r_max), axis=-1) & (np.abs(z) <= self.z_max)
        return ok & (np.linalg.norm(np.atleast_2d(states), axis=-1) <= self.radius)

    def contains_box(self, other: "Box") -> bool:
        return (
            self.r_min <= other.r_min
            and self.r_max >= other.r_max
            and self.z_max >= other.z_max
            and self.radius >= other.radius
        )


@dataclass(frozen=True)
class Classification:
    stays: bool
    exit_time: float | None
    horizon: float

    @property
    def label(self) -> str:
        return "Stays" if self.stays else "Escapes"


def classify(trace: OrbitTrace, box: Box) -> Classification:
    """First time the orbit leaves ``box`` (refined on the dense output), or Stays."""
    inside = box.inside(trace.states)
    horizon = float(trace.times[-1])
    if inside.all():
        # an escape-ball stop lands on the sphere itself, up to root-finding error
        on_sphere = np.linalg.norm(trace.states[-1]) >= box.radius * (1.0 - 1e-9)
        if trace.reason == "escaped" and on_sphere:
            return Classification(False, horizon, horizon)
        return Classification(True, None, horizon)
    i = int(np.argmin(inside))
    if i == 0:
        return Classification(False, float(trace.times[0]), horizon)
    t_in, t_out = trace.times[i - 1], trace.times[i]
    if trace.sol is not None:
        # bisect on the dense output; the indicator is not smooth so use plain halving
        for _ in range(200):
            mid = 0.5 * (t_in + t_out)
            if mid in (t_in, t_out):
                break
            if box.inside(trace.sol(mid)[None, :])[0]:
                t_in = mid
            else:
                t_out = mid
    return Classification(False, float(t_out), horizon)


# ---------------------------------------------------------------------------
# trapped orbit search


@dataclass(frozen=True)
class ShootingFamily:
    """x0(s) = (r_j = radius, theta = theta0, z = s): a vertical line below the torus."""

    n: int
    radius: float = 0.99
    theta0: tuple = ()

    def __call__(self, s: float) -> np.ndarray:
        theta = np.asarray(self.theta0 or (0.0,) * self.n, dtype=float)
        return from_polar(np.full(self.n, self.radius), theta, s)


@dataclass(frozen=True)
class SideReport:
    side: int  # -1 passes inside the torus, +1 outside, 0 no crossing before the horizon
    crossing_time: float | None
    mean_r: float | None


def passage_side(m: HamiltonianModel, x0, horizon: float, cfg: IntegratorConfig) -> SideReport:
    """Which side of A x {0} the forward orbit passes when z first rises through 0."""
    x0 = np.asarray(x0, dtype=float)
    if x0[-1] >= 0:
        raise ValueError("shooting points must start below the plane z = 0")
    trace = integrate(m, x0, (0.0, horizon), cfg, event=lambda t, y: y[-1], event_direction=1)
    if trace.reason != "event":
        return SideReport(0, None, None)
    r, _, _ = to_polar(trace.states[-1])
    mean_r = float(np.mean(r))
    return SideReport(1 if mean_r > 1.0 else -1, trace.event_time, mean_r)


@dataclass
class TrappedOrbitResult:
    s_star: float
    bracket: tuple
    width: float
    iterations: int
    forward: OrbitTrace
    backward: OrbitTrace
    forward_class: Classification
    backward_class: Classification
    monotonicity: MonotonicityReport  # over the backward and forward traces joined
    history: list = field(default_factory=list)


def search_trapped(
    m: HamiltonianModel,
    family: ShootingFamily | None = None,
    s_range=(-0.05, -1e-6),
    T_fwd: float = 1000.0,
    T_bwd: float = 100.0,
    box: Box = Box(0.2, 4.0, 3.0),
    cfg: IntegratorConfig = IntegratorConfig(),
    width_tol: float = 1e-9,
    escape_radius: float = 50.0,
    eps: float = 0.05,
    threads: int = 2,
) -> TrappedOrbitResult:
    """Bisect along a shooting family for an orbit that never rises past A x {0}.

    Every non-trapped orbit eventually escapes, so the two bracket ends are
    told apart by the side on which they pass the invariant set (the mean
    radius when z first crosses 0).  Bisection stops once the bracket is
    narrower than ``width_tol`` and the midpoint stays below the plane
    through ``T_fwd``, or when floating point resolution is exhausted.
    """
    family = family or ShootingFamily(m.n)
    lo, hi = map(float, s_range)
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        side_lo, side_hi = pool.map(lambda s: passage_side(m, family(s), T_fwd, cfg), (lo, hi))
    history = [(lo, side_lo.side), (hi, side_hi.side)]
    if side_lo.side == side_hi.side or 0 in (side_lo.side, side_hi.side):
        raise NoBracket(f"family ends pass on sides {side_lo.side} and {side_hi.side}")
    best = None
    iterations = 0
    while True:
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        rep = passage_side(m, family(mid), T_fwd, cfg)
        iterations += 1
        history.append((mid, rep.side))
        if rep.side == 0:
            best = mid
            if hi - lo <= width_tol:
                break
            # undecided at this horizon: shrink symmetrically around the candidate
            quarter = 0.25 * (hi - lo)
            probe_lo = passage_side(m, family(mid - quarter), T_fwd, cfg)
            probe_hi = passage_side(m, family(mid + quarter), T_fwd, cfg)
            history += [(mid - quarter, probe_lo.side), (mid + quarter, probe_hi.side)]
            if probe_lo.side == side_lo.side:
                lo = mid - quarter
            if probe_hi.side == side_hi.side:
                hi = mid + quarter
            if probe_lo.side != side_lo.side and probe_hi.side != side_hi.side:
                break
            continue
        if rep.side == side_lo.side:
            lo = mid
        else:
            hi = mid
    s_star = best if best is not None else 0.5 * (lo + hi)
    x0 = family(s_star)
    fwd = integrate(m, x0, (0.0, T_fwd), cfg)
    bwd = integrate(m, x0, (0.0, -T_bwd), cfg, escape_radius=escape_radius)
    fwd_class = classify(fwd, box)
    bwd_class = classify(bwd, Box(radius=escape_radius))
    mono = z_monotonicity_check(join_traces(bwd, fwd), m, eps, raise_on_fail=False)
    return TrappedOrbitResult(
        s_star, (lo, hi), hi - lo, iterations, fwd, bwd, fwd_class, bwd_class, mono, history
    )


def join_traces(backward: OrbitTrace, forward: OrbitTrace) -> OrbitTrace:
    """One trace in increasing time from a backward and a forward run sharing x0."""
    times = np.concatenate([backward.times[::-1], forward.times[1:]])
    states = np.vstack([backward.states[::-1], forward.states[1:]])
    return OrbitTrace(
        times, states, forward.reason, backward.n_steps + forward.n_steps, backward.nfev + forward.nfev
    )


# ---------------------------------------------------------------------------
# CSV


def csv_header(n: int) -> list:
    cols = ["t"]
    for j in range(1, n + 1):
        cols += [f"x{j}", f"y{j}"]
    cols.append("z")
    cols += [f"r{j}" for j in range(1, n + 1)]
    return cols + ["H", "dzrate"]


def write_orbit_csv(path, trace: OrbitTrace, m: HamiltonianModel) -> None:
    r, _, _ = to_polar(trace.states)
    H = eval_H(m, trace.states)
    rate = dz_rate(m, trace.states)

    def write(fh):
        w = csv.writer(fh)
        w.writerow(csv_header(m.n))
        for t, y, rr, h, d in zip(trace.times, trace.states, r, H, rate):
            w.writerow([f"{v:.17g}" for v in (t, *y, *rr, h, d)])

    atomic_write(path, write, newline="")


def read_orbit_csv(path):
    """(times, states, header) from a file written by ``write_orbit_csv``."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], np.array(rows[1:], dtype=float)
    n = sum(1 for c in header if c.startswith("r"))
    return body[:, 0], body[:, 1 : 2 * n + 2], header


def reeb_residual_along(trace: OrbitTrace, m: HamiltonianModel, count: int = 200):
    """Worst Reeb residuals at dense-output spot checks along the trace."""
    if trace.sol is None:
        pts = trace.states
    else:
        pts = trace.sol(np.linspace(trace.times[0], trace.times[-1], count)).T
    a, f = certify_reeb(m, pts)
    return float(np.max(a)), float(np.max(f))

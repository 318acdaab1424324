"""Explicit Runge-Kutta integration shared by the within-host and between-host models.

Two schemes are provided:

* ``adaptive_rk45`` -- Dormand-Prince 5(4) with FSAL and a max-norm error
  controller, the default for every simulation.
* ``fixed_rk4`` -- classical fourth-order Runge-Kutta on a uniform grid, used
  as a deterministic cross-check.

Trajectories keep every accepted step; values between steps are obtained by
linear interpolation (:func:`sample`).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .records import format_float

RhsFunction = Callable[[float, np.ndarray], np.ndarray]
TupleRhsFunction = Callable[[float, tuple], tuple]

METHODS = ("adaptive_rk45", "fixed_rk4")


class IntegrationError(RuntimeError):
    """Base class for numerical integration failures."""


class StepBudgetExceeded(IntegrationError):
    """Raised when ``max_steps`` is exhausted before reaching ``t_end``."""

    def __init__(self, max_steps: int, time: float):
        super().__init__(f"step budget of {max_steps} exhausted at t={time!r}")
        self.max_steps = max_steps
        self.time = time


class DivergenceError(IntegrationError):
    """Raised when the derivative becomes non-finite or the step size collapses."""

    def __init__(self, time: float, reason: str = "non-finite derivative"):
        super().__init__(f"{reason} at t={time!r}")
        self.time = time
        self.reason = reason


class SampleRangeError(ValueError):
    """Query time outside the span of a trajectory."""


@dataclass(frozen=True)
class OdeSystem:
    """Autonomous or time-dependent right-hand side ``dy/dt = rhs(t, y)``.

    ``rhs_tuple`` optionally gives the same field on plain float sequences. For
    low-dimensional systems the adaptive integrator then skips the per-stage
    numpy overhead, which dominates the cost of a three-component step.
    """

    dimension: int
    rhs: RhsFunction
    labels: tuple[str, ...] = ()
    rhs_tuple: TupleRhsFunction | None = None

    def __post_init__(self):
        if self.dimension < 1:
            raise ValueError("dimension must be a positive integer")
        if self.labels and len(self.labels) != self.dimension:
            raise ValueError("labels must match dimension")


@dataclass(frozen=True)
class IntegratorConfig:
    """Integrator selection and tolerances.

    ``step`` is the fixed step for ``fixed_rk4`` and the initial trial step for
    ``adaptive_rk45``.
    """

    method: str = "adaptive_rk45"
    step: float = 1e-2
    abs_tol: float = 1e-9
    rel_tol: float = 1e-9
    max_steps: int = 10_000_000

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        for name in ("step", "abs_tol", "rel_tol"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be a positive finite number, got {value!r}")
        if int(self.max_steps) != self.max_steps or self.max_steps < 1:
            raise ValueError(f"max_steps must be a positive integer, got {self.max_steps!r}")


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Accepted integration points.

    Attributes
    ----------
    times : ndarray, shape (n,)
        Strictly increasing output times.
    states : ndarray, shape (n, dim)
        One state row per time.
    accepted, rejected : int
        Step statistics (``rejected`` is always 0 for fixed-step runs).
    labels : tuple of str
        Component names, used as CSV column headers.
    """

    times: np.ndarray
    states: np.ndarray
    accepted: int = 0
    rejected: int = 0
    labels: tuple[str, ...] = field(default=())

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        states = np.asarray(self.states, dtype=float)
        if states.ndim == 1:
            states = states[:, None]
        if times.ndim != 1 or states.shape[0] != times.shape[0]:
            raise ValueError("states must have one row per time")
        if times.size > 1 and not np.all(np.diff(times) > 0):
            raise ValueError("times must be strictly increasing")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "states", states)

    @property
    def t0(self) -> float:
        return float(self.times[0])

    @property
    def t_end(self) -> float:
        return float(self.times[-1])

    @property
    def final(self) -> np.ndarray:
        return self.states[-1].copy()

    def component(self, label: str) -> np.ndarray:
        return self.states[:, self.labels.index(label)]

    def sample(self, query_times) -> np.ndarray:
        return sample(self, query_times)

    def to_csv(self, path: str | Path, time_label: str = "t") -> None:
        header = [time_label, *(self.labels or [f"y{i}" for i in range(self.states.shape[1])])]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            for t, row in zip(self.times, self.states):
                writer.writerow([format_float(t), *(format_float(v) for v in row)])


def sample(trajectory: Trajectory, query_times) -> np.ndarray:
    """Linearly interpolate ``trajectory`` at ``query_times``.

    Returns an array of shape ``(len(query_times), dim)``; stored times are
    reproduced exactly.
    """
    q = np.atleast_1d(np.asarray(query_times, dtype=float))
    lo, hi = trajectory.t0, trajectory.t_end
    if q.size and (np.any(q < lo) or np.any(q > hi) or not np.all(np.isfinite(q))):
        raise SampleRangeError(f"query times must lie within [{lo!r}, {hi!r}]")
    times, states = trajectory.times, trajectory.states
    if times.size == 1:
        return np.repeat(states[:1], q.size, axis=0)
    idx = np.searchsorted(times, q, side="right") - 1
    idx = np.clip(idx, 0, times.size - 2)
    t_left, t_right = times[idx], times[idx + 1]
    w = ((q - t_left) / (t_right - t_left))[:, None]
    out = states[idx] + w * (states[idx + 1] - states[idx])
    # exact at nodes, including the final point
    exact = q == t_left
    out[exact] = states[idx[exact]]
    at_end = q == times[-1]
    out[at_end] = states[-1]
    return out


def integrate(
    system: OdeSystem,
    initial: Sequence[float],
    t0: float,
    t_end: float,
    config: IntegratorConfig | None = None,
) -> Trajectory:
    """Integrate ``system`` from ``t0`` to ``t_end``.

    Raises
    ------
    ValueError
        On an invalid span or initial vector.
    StepBudgetExceeded
        When ``config.max_steps`` steps (accepted plus rejected) are used up.
    DivergenceError
        When the derivative at an accepted state is non-finite or the
        adaptive step size underflows.
    """
    config = config or IntegratorConfig()
    y0 = np.array(initial, dtype=float).reshape(-1)
    if y0.size != system.dimension:
        raise ValueError(f"initial has length {y0.size}, expected {system.dimension}")
    if not np.all(np.isfinite(y0)):
        raise ValueError("initial state must be finite")
    if not (math.isfinite(t0) and math.isfinite(t_end) and t_end > t0):
        raise ValueError(f"need finite t_end > t0, got t0={t0!r}, t_end={t_end!r}")

    if config.method == "fixed_rk4":
        return _rk4(system, y0, float(t0), float(t_end), config)
    if system.rhs_tuple is not None:
        return _dopri45_tuple(system, y0, float(t0), float(t_end), config)
    return _dopri45(system, y0, float(t0), float(t_end), config)


def _derivative(system: OdeSystem, t: float, y: np.ndarray) -> np.ndarray:
    k = np.asarray(system.rhs(t, y), dtype=float)
    if k.shape != (system.dimension,):
        raise ValueError(f"rhs returned shape {k.shape}, expected ({system.dimension},)")
    return k


def _rk4(system, y0, t0, t_end, config) -> Trajectory:
    rhs = system.rhs
    h = config.step
    n = math.ceil((t_end - t0) / h - 1e-9)
    if n > config.max_steps:
        raise StepBudgetExceeded(config.max_steps, t0)
    times = t0 + h * np.arange(n + 1, dtype=float)
    times[-1] = t_end
    states = np.empty((n + 1, y0.size))
    states[0] = y = y0
    for i in range(n):
        t = times[i]
        dt = times[i + 1] - t
        k1 = _derivative(system, t, y)
        if not np.all(np.isfinite(k1)):
            raise DivergenceError(t)
        k2 = rhs(t + 0.5 * dt, y + (0.5 * dt) * k1)
        k3 = rhs(t + 0.5 * dt, y + (0.5 * dt) * k2)
        k4 = rhs(t + dt, y + dt * k3)
        y = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        states[i + 1] = y
    if not np.all(np.isfinite(y)):
        raise DivergenceError(t_end, "non-finite state")
    return Trajectory(times, states, accepted=n, rejected=0, labels=system.labels)


# Dormand-Prince 5(4) tableau
_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0)
_A = (
    (),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
)
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84])
# fifth-order minus embedded fourth-order weights
_E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40])

_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 5.0


def _dopri45(system, y0, t0, t_end, config) -> Trajectory:
    rhs = system.rhs
    atol, rtol = config.abs_tol, config.rel_tol
    max_steps = config.max_steps
    eps = float(np.finfo(float).eps)
    end_slack = 1e-12 * max(1.0, abs(t_end))

    t = t0
    y = y0
    K = np.empty((7, y0.size))
    K[0] = _derivative(system, t, y)
    if not np.isfinite(K[0]).all():
        raise DivergenceError(t)
    h = min(config.step, t_end - t0)
    abs_y = np.abs(y)

    times = [t]
    states = [y]
    accepted = rejected = 0
    while t < t_end:
        if accepted + rejected >= max_steps:
            raise StepBudgetExceeded(max_steps, t)
        last = t + h >= t_end - end_slack
        if last:
            h = t_end - t

        for i in range(1, 6):
            K[i] = rhs(t + _C[i] * h, y + h * (_A[i] @ K[:i]))
        y_new = y + h * (_B @ K[:6])
        K[6] = rhs(t + h, y_new)
        abs_new = np.abs(y_new)
        scale = atol + rtol * np.maximum(abs_y, abs_new)
        err = (np.abs(h * (_E @ K)) / scale).max()

        if err <= 1.0:
            # a finite error norm implies every stage derivative was finite
            accepted += 1
            t = t_end if last else t + h
            y = y_new
            abs_y = abs_new
            K[0] = K[6]
            times.append(t)
            states.append(y)
            factor = _MAX_FACTOR if err == 0.0 else min(_MAX_FACTOR, _SAFETY * err ** -0.2)
        else:
            # NaN lands here too: overflow inside a trial step is treated as a rejection
            rejected += 1
            factor = _MIN_FACTOR if not err < math.inf else max(_MIN_FACTOR, _SAFETY * err ** -0.2)
        h *= factor
        if t < t_end and h <= 16 * eps * max(abs(t), 1.0):
            raise DivergenceError(t, "step size underflow")

    return Trajectory(
        np.asarray(times), np.vstack(states), accepted=accepted, rejected=rejected, labels=system.labels
    )


def _dopri45_tuple(system, y0, t0, t_end, config) -> Trajectory:
    """Same scheme and controller as :func:`_dopri45` on float tuples."""
    f = system.rhs_tuple
    atol, rtol = config.abs_tol, config.rel_tol
    max_steps = config.max_steps
    eps = float(np.finfo(float).eps)
    end_slack = 1e-12 * max(1.0, abs(t_end))
    (a21,), (a31, a32), (a41, a42, a43), (a51, a52, a53, a54), (a61, a62, a63, a64, a65) = (
        tuple(map(float, row)) for row in _A[1:]
    )
    b1, _, b3, b4, b5, b6 = map(float, _B)
    e1, _, e3, e4, e5, e6, e7 = map(float, _E)
    c2, c3, c4, c5 = _C[1:5]

    t = t0
    y = tuple(float(v) for v in y0)
    k1 = tuple(f(t, y))
    if len(k1) != system.dimension:
        raise ValueError(f"rhs returned length {len(k1)}, expected {system.dimension}")
    if not all(math.isfinite(v) for v in k1):
        raise DivergenceError(t)
    h = min(config.step, t_end - t0)

    times = [t]
    states = [y]
    accepted = rejected = 0
    while t < t_end:
        if accepted + rejected >= max_steps:
            raise StepBudgetExceeded(max_steps, t)
        last = t + h >= t_end - end_slack
        if last:
            h = t_end - t

        k2 = f(t + c2 * h, [v + h * a21 * p1 for v, p1 in zip(y, k1)])
        k3 = f(t + c3 * h, [v + h * (a31 * p1 + a32 * p2) for v, p1, p2 in zip(y, k1, k2)])
        k4 = f(t + c4 * h, [v + h * (a41 * p1 + a42 * p2 + a43 * p3) for v, p1, p2, p3 in zip(y, k1, k2, k3)])
        k5 = f(t + c5 * h, [v + h * (a51 * p1 + a52 * p2 + a53 * p3 + a54 * p4)
                            for v, p1, p2, p3, p4 in zip(y, k1, k2, k3, k4)])
        k6 = f(t + h, [v + h * (a61 * p1 + a62 * p2 + a63 * p3 + a64 * p4 + a65 * p5)
                       for v, p1, p2, p3, p4, p5 in zip(y, k1, k2, k3, k4, k5)])
        y_new = tuple(v + h * (b1 * p1 + b3 * p3 + b4 * p4 + b5 * p5 + b6 * p6)
                      for v, p1, p3, p4, p5, p6 in zip(y, k1, k3, k4, k5, k6))
        k7 = f(t + h, y_new)
        errs = [abs(h * (e1 * p1 + e3 * p3 + e4 * p4 + e5 * p5 + e6 * p6 + e7 * p7))
                / (atol + rtol * max(abs(v), abs(w)))
                for v, w, p1, p3, p4, p5, p6, p7 in zip(y, y_new, k1, k3, k4, k5, k6, k7)]
        err = max(errs)
        if math.isnan(sum(errs)):
            err = math.nan

        if err <= 1.0:
            accepted += 1
            t = t_end if last else t + h
            y = y_new
            k1 = k7
            times.append(t)
            states.append(y)
            factor = _MAX_FACTOR if err == 0.0 else min(_MAX_FACTOR, _SAFETY * err ** -0.2)
        else:
            rejected += 1
            factor = _MIN_FACTOR if not err < math.inf else max(_MIN_FACTOR, _SAFETY * err ** -0.2)
        h *= factor
        if t < t_end and h <= 16 * eps * max(abs(t), 1.0):
            raise DivergenceError(t, "step size underflow")

    return Trajectory(
        np.asarray(times), np.array(states, dtype=float), accepted=accepted, rejected=rejected, labels=system.labels
    )

"""Slow-scale SEI model with the within-host output frozen into ``N_h``.

::

    dS/dt = Lambda - beta N_h S I - mu S
    dE/dt = beta N_h S I - (mu + pi + gamma1) E
    dI/dt = pi E - (mu + gamma2) I - d N_h I

The recovered class decouples and is only reconstructed on demand
(:func:`reconstruct_recovered`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace

import numpy as np

from .integrator import IntegratorConfig, OdeSystem, Trajectory, integrate
from .within_host import InvariantViolation, check_positivity

LABELS = ("S", "E", "I")
DEFAULT_HORIZON = 500.0
BOUND_TOL = 1e-6
# Classes decaying to zero undershoot by up to about abs_tol, which must sit
# well inside the -1e-9 positivity tolerance.
DEFAULT_INTEGRATOR = IntegratorConfig(abs_tol=1e-12, rel_tol=1e-9)


@dataclass(frozen=True)
class BetweenHostParams:
    Lambda: float
    beta: float
    mu: float
    pi: float
    gamma1: float
    gamma2: float
    d: float
    N_h: float

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if not (value >= 0) or value == math.inf:
                raise ValueError(f"{f.name} must be finite and >= 0, got {value!r}")
        if not self.mu > 0:
            raise ValueError(f"mu must be > 0, got {self.mu!r}")

    def replace(self, **changes) -> "BetweenHostParams":
        return replace(self, **changes)

    @property
    def carrying_capacity(self) -> float:
        """``Lambda / mu``, the upper bound of the feasible total population."""
        return self.Lambda / self.mu

    def as_dict(self) -> dict[str, float]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


PARAMETER_NAMES = tuple(f.name for f in fields(BetweenHostParams))


@dataclass(frozen=True)
class BetweenHostState:
    S: float
    E: float
    I: float

    def as_array(self) -> np.ndarray:
        return np.array([self.S, self.E, self.I], dtype=float)

    @property
    def total(self) -> float:
        return self.S + self.E + self.I


BASELINE_BETWEEN_HOST_INITIAL = BetweenHostState(S=1000.0, E=100.0, I=50.0)


def recruitment_from_population(mu: float, initial: BetweenHostState) -> float:
    """``Lambda = mu * N(0)``: recruitment that makes the initial population the carrying capacity."""
    return mu * initial.total


def baseline_between_host(N_h: float, initial: BetweenHostState = BASELINE_BETWEEN_HOST_INITIAL) -> BetweenHostParams:
    """Between-host rates of the reference scenario with a given coupling constant."""
    mu = 0.062
    return BetweenHostParams(
        Lambda=recruitment_from_population(mu, initial),
        beta=0.0115,
        mu=mu,
        pi=0.09,
        gamma1=0.05,
        gamma2=0.0714,
        d=0.0018,
        N_h=N_h,
    )


def between_host_rhs(params: BetweenHostParams, state) -> np.ndarray:
    if isinstance(state, BetweenHostState):
        S, E, I = state.S, state.E, state.I
    else:
        S, E, I = state
    p = params
    incidence = p.beta * p.N_h * S * I
    return np.array(
        [
            p.Lambda - incidence - p.mu * S,
            incidence - (p.mu + p.pi + p.gamma1) * E,
            p.pi * E - (p.mu + p.gamma2) * I - p.d * p.N_h * I,
        ]
    )


def between_host_system(params: BetweenHostParams) -> OdeSystem:
    Lambda, mu, pi = params.Lambda, params.mu, params.pi
    contact = params.beta * params.N_h
    exposed_loss = params.mu + params.pi + params.gamma1
    infected_loss = params.mu + params.gamma2 + params.d * params.N_h

    def field(t, z):
        S, E, I = z
        incidence = contact * S * I
        return (Lambda - incidence - mu * S, incidence - exposed_loss * E, pi * E - infected_loss * I)

    def rhs(t, z):
        return np.array(field(t, z.tolist()))

    return OdeSystem(3, rhs, LABELS, rhs_tuple=field)


def check_bounded(trajectory: Trajectory, params: BetweenHostParams, tol: float = BOUND_TOL) -> None:
    """Total population never exceeds ``Lambda/mu`` once it starts inside that bound."""
    totals = trajectory.states.sum(axis=1)
    cap = params.carrying_capacity
    if totals[0] > cap + tol:
        return
    excess = totals - cap
    i = int(np.argmax(excess))
    if excess[i] > tol:
        raise InvariantViolation(f"S+E+I = {totals[i]!r} exceeds Lambda/mu = {cap!r} at t={trajectory.times[i]!r}")


def simulate_between_host(
    params: BetweenHostParams,
    initial: BetweenHostState = BASELINE_BETWEEN_HOST_INITIAL,
    horizon: float = DEFAULT_HORIZON,
    config: IntegratorConfig | None = None,
) -> Trajectory:
    """Integrate over ``[0, horizon]``, then verify positivity and boundedness.

    Without ``config`` the adaptive integrator runs with ``abs_tol=1e-12``.
    """
    y0 = initial.as_array() if isinstance(initial, BetweenHostState) else np.asarray(initial, dtype=float)
    if np.any(y0 < 0):
        raise ValueError("initial between-host state must be non-negative")
    trajectory = integrate(between_host_system(params), y0, 0.0, float(horizon), config or DEFAULT_INTEGRATOR)
    check_positivity(trajectory)
    check_bounded(trajectory, params)
    return trajectory


def reconstruct_recovered(trajectory: Trajectory, params: BetweenHostParams, R0: float = 0.0) -> np.ndarray:
    """Recovered class ``R(t)`` from ``dR/dt = gamma1 E + gamma2 I - mu R``.

    Uses the integrating factor ``exp(mu t)`` with trapezoidal quadrature on
    the stored grid.
    """
    t = trajectory.times - trajectory.t0
    E, I = trajectory.states[:, 1], trajectory.states[:, 2]
    inflow = params.gamma1 * E + params.gamma2 * I
    # integrate exp(-mu (t_j - s)) inflow(s) step by step to avoid overflow of exp(mu t)
    R = np.empty_like(t)
    R[0] = R0
    for j in range(1, t.size):
        dt = t[j] - t[j - 1]
        decay = math.exp(-params.mu * dt)
        R[j] = R[j - 1] * decay + 0.5 * dt * (inflow[j - 1] * decay + inflow[j])
    return R

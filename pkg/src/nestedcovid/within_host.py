"""Fast-scale viral dynamics inside one infected host.

State ``(U, U_star, V)``: susceptible epithelial cells, infected epithelial
cells and free virions, evolving in fast time ``s``::

    dU/ds      = omega - k U V - mu_c U
    dU_star/ds = k U V - x U_star - mu_c U_star
    dV/ds      = alpha U_star - y V - mu_v V

``x`` and ``y`` are the aggregated immune clearance rates of infected cells
and virions (sums of six cytokine/chemokine-specific rates each).
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .integrator import IntegratorConfig, OdeSystem, Trajectory, integrate

LABELS = ("U", "U_star", "V")
DEFAULT_HORIZON = 30.0
POSITIVITY_TOL = 1e-9


class InvariantViolation(RuntimeError):
    """A simulated trajectory left the region guaranteed by the model's well-posedness."""


@dataclass(frozen=True)
class WithinHostParams:
    """Within-host rates.

    Either pass ``x``/``y`` directly or build from the individual clearance
    rates with :meth:`from_clearance_rates`; the dynamics only use the sums.
    """

    omega: float
    k: float
    mu_c: float
    mu_v: float
    alpha: float
    x: float
    y: float
    d_rates: tuple[float, ...] | None = None
    b_rates: tuple[float, ...] | None = None

    def __post_init__(self):
        for name in ("omega", "k", "mu_c", "mu_v", "alpha", "x", "y"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise ValueError(f"{name} must be finite and >= 0, got {value!r}")
        for name in ("omega", "mu_c", "mu_v", "alpha"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)!r}")
        for rates_name, total_name in (("d_rates", "x"), ("b_rates", "y")):
            rates = getattr(self, rates_name)
            if rates is None:
                continue
            rates = tuple(float(r) for r in rates)
            if len(rates) != 6 or any(not math.isfinite(r) or r < 0 for r in rates):
                raise ValueError(f"{rates_name} must be six non-negative rates")
            if not math.isclose(math.fsum(rates), getattr(self, total_name), rel_tol=1e-12, abs_tol=1e-15):
                raise ValueError(f"{total_name} must equal the sum of {rates_name}")
            object.__setattr__(self, rates_name, rates)

    @classmethod
    def from_clearance_rates(cls, omega, k, mu_c, mu_v, alpha, d_rates: Sequence[float], b_rates: Sequence[float]):
        return cls(
            omega=omega,
            k=k,
            mu_c=mu_c,
            mu_v=mu_v,
            alpha=alpha,
            x=math.fsum(d_rates),
            y=math.fsum(b_rates),
            d_rates=tuple(d_rates),
            b_rates=tuple(b_rates),
        )

    def modified(self, **changes) -> "WithinHostParams":
        """Copy with ``changes`` applied; changing ``x``/``y`` drops the itemised rates."""
        if "x" in changes:
            changes.setdefault("d_rates", None)
        if "y" in changes:
            changes.setdefault("b_rates", None)
        return dataclasses.replace(self, **changes)

    @property
    def infection_free_cells(self) -> float:
        return self.omega / self.mu_c


@dataclass(frozen=True)
class WithinHostState:
    U: float
    U_star: float
    V: float

    def __post_init__(self):
        for name in LABELS:
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")

    def as_array(self) -> np.ndarray:
        return np.array([self.U, self.U_star, self.V], dtype=float)


BASELINE_WITHIN_HOST = WithinHostParams.from_clearance_rates(
    omega=2.0,
    k=0.05,
    mu_c=0.1,
    mu_v=0.1,
    alpha=0.24,
    d_rates=(0.027, 0.22, 0.1, 0.428, 0.01, 0.01),
    b_rates=(0.1, 0.1, 0.08, 0.11, 0.01, 0.07),
)
BASELINE_WITHIN_HOST_INITIAL = WithinHostState(U=3.2e5, U_star=0.0, V=5.2)


def within_host_rhs(params: WithinHostParams, state) -> np.ndarray:
    """Right-hand side at ``state`` (a :class:`WithinHostState` or length-3 vector)."""
    if isinstance(state, WithinHostState):
        U, Us, V = state.U, state.U_star, state.V
    else:
        U, Us, V = (float(v) for v in state)
    infection = params.k * U * V
    return np.array(
        [
            params.omega - infection - params.mu_c * U,
            infection - (params.x + params.mu_c) * Us,
            params.alpha * Us - (params.y + params.mu_v) * V,
        ]
    )


def within_host_system(params: WithinHostParams) -> OdeSystem:
    omega, k, mu_c = params.omega, params.k, params.mu_c
    cell_loss = params.x + params.mu_c
    alpha, virion_loss = params.alpha, params.y + params.mu_v

    def field(s, z):
        U, Us, V = z
        infection = k * U * V
        return (omega - infection - mu_c * U, infection - cell_loss * Us, alpha * Us - virion_loss * V)

    def rhs(s, z):
        return np.array(field(s, z.tolist()))

    return OdeSystem(3, rhs, LABELS, rhs_tuple=field)


def check_positivity(trajectory: Trajectory, tol: float = POSITIVITY_TOL) -> None:
    worst = float(trajectory.states.min())
    if worst < -tol:
        i, j = np.unravel_index(np.argmin(trajectory.states), trajectory.states.shape)
        raise InvariantViolation(
            f"{trajectory.labels[j] if trajectory.labels else j} = {worst!r} < -{tol} at time {trajectory.times[i]!r}"
        )


def simulate_within_host(
    params: WithinHostParams,
    initial: WithinHostState = BASELINE_WITHIN_HOST_INITIAL,
    horizon: float = DEFAULT_HORIZON,
    config: IntegratorConfig | None = None,
) -> Trajectory:
    """Integrate the within-host model over ``[0, horizon]`` and check positivity."""
    y0 = initial.as_array() if isinstance(initial, WithinHostState) else np.asarray(initial, dtype=float)
    if np.any(y0 < 0):
        raise ValueError("initial within-host state must be non-negative")
    if not horizon > 0:
        raise ValueError(f"horizon must be positive, got {horizon!r}")
    trajectory = integrate(within_host_system(params), y0, 0.0, float(horizon), config)
    check_positivity(trajectory)
    return trajectory

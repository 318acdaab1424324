"""Parameter sweeps over the reduced model.

* :func:`bifurcation_sweep` -- equilibrium branches along ``beta``.
* :func:`heat_grid` -- ``R0`` over a two-parameter rectangle.
* :func:`within_host_influence` -- infected class ``I(t)`` as a within-host
  rate is varied and pushed through the coupling constant.

Grid cells are evaluated independently and stored by index, so running them
on a thread pool yields the same bytes as a serial run.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .analysis import compute_R0
from .between_host import (
    BASELINE_BETWEEN_HOST_INITIAL,
    PARAMETER_NAMES,
    BetweenHostParams,
    BetweenHostState,
    simulate_between_host,
)
from .coupling import DEFAULT_DETECTION_LIMIT, coupling_summary
from .integrator import IntegratorConfig, Trajectory
from .records import write_csv
from .within_host import BASELINE_WITHIN_HOST_INITIAL, DEFAULT_HORIZON, WithinHostParams, WithinHostState

INFLUENCE_HORIZON = 100.0
INFLUENCE_PARAMETERS = ("alpha", "x", "y")


@dataclass(frozen=True)
class SweepCell:
    R0: float
    stable_equilibrium: str  # "E0" or "E1"
    I_star: float | None = None


@dataclass(frozen=True)
class SweepGrid:
    """Cells indexed ``cells[ix][iy]``; one-parameter sweeps have a single column."""

    x_name: str
    x_values: np.ndarray
    y_name: str | None
    y_values: np.ndarray | None
    cells: tuple[tuple[SweepCell, ...], ...]

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.x_values), 1 if self.y_values is None else len(self.y_values)

    def R0_matrix(self) -> np.ndarray:
        """R0 values with rows along ``y`` and columns along ``x`` (image orientation)."""
        nx, ny = self.shape
        return np.array([[self.cells[ix][iy].R0 for ix in range(nx)] for iy in range(ny)])


def classify_cell(params: BetweenHostParams) -> SweepCell:
    R0 = float(compute_R0(params))
    if R0 < 1:
        return SweepCell(R0, "E0", None)
    I_star = params.mu * (R0 - 1.0) / (params.beta * params.N_h) if R0 > 1 else None
    return SweepCell(R0, "E1", I_star)


def _evaluate(tasks: Sequence, func: Callable, workers: int | None):
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(func, tasks))
    return [func(task) for task in tasks]


def bifurcation_sweep(
    base: BetweenHostParams,
    beta_range: tuple[float, float],
    n_points: int = 101,
    workers: int | None = None,
) -> SweepGrid:
    """Disease-free and endemic branches on an evenly spaced ``beta`` grid."""
    lo, hi = beta_range
    if not lo < hi:
        raise ValueError(f"need lo < hi, got {beta_range!r}")
    if n_points < 3:
        raise ValueError("n_points must be at least 3")
    betas = np.linspace(lo, hi, n_points)
    cells = _evaluate(betas, lambda b: classify_cell(base.replace(beta=float(b))), workers)
    return SweepGrid("beta", betas, None, None, tuple((c,) for c in cells))


def exchange_bracket(grid: SweepGrid) -> tuple[float, float] | None:
    """Consecutive grid values between which the stable branch switches from E0 to E1."""
    labels = [grid.cells[i][0].stable_equilibrium for i in range(len(grid.x_values))]
    for i in range(1, len(labels)):
        if labels[i - 1] != labels[i]:
            return float(grid.x_values[i - 1]), float(grid.x_values[i])
    return None


def write_bifurcation_csv(path: str | Path, grid: SweepGrid) -> None:
    rows = []
    for i, beta in enumerate(grid.x_values):
        cell = grid.cells[i][0]
        rows.append((beta, cell.R0, 0.0, cell.I_star, cell.stable_equilibrium))
    write_csv(path, ("beta", "R0", "I_star_dfe", "I_star_endemic", "stable_branch"), rows)


def _axis(spec) -> tuple[str, np.ndarray]:
    name, lo, hi, n = spec
    if name not in PARAMETER_NAMES:
        raise NameError(f"unknown between-host parameter {name!r}; expected one of {PARAMETER_NAMES}")
    if int(n) != n or n < 2:
        raise ValueError(f"grid size for {name!r} must be an integer >= 2")
    return name, np.linspace(float(lo), float(hi), int(n))


def heat_grid(base: BetweenHostParams, x, y, workers: int | None = None) -> SweepGrid:
    """``R0`` on the grid spanned by ``x = (name, lo, hi, n)`` and ``y = (name, lo, hi, n)``."""
    x_name, xs = _axis(x)
    y_name, ys = _axis(y)
    if x_name == y_name:
        raise ValueError("x and y must name different parameters")
    # row-major by (y index, x index)
    tasks = [(ix, iy) for iy in range(len(ys)) for ix in range(len(xs))]

    def cell(task):
        ix, iy = task
        return classify_cell(base.replace(**{x_name: float(xs[ix]), y_name: float(ys[iy])}))

    results = dict(zip(tasks, _evaluate(tasks, cell, workers)))
    cells = tuple(tuple(results[(ix, iy)] for iy in range(len(ys))) for ix in range(len(xs)))
    return SweepGrid(x_name, xs, y_name, ys, cells)


def write_heat_grid_csv(path: str | Path, grid: SweepGrid) -> None:
    rows = []
    for iy, yv in enumerate(grid.y_values):
        for ix, xv in enumerate(grid.x_values):
            R0 = grid.cells[ix][iy].R0
            rows.append((grid.x_name, grid.y_name, xv, yv, R0, "subcritical" if R0 < 1 else "supercritical"))
    write_csv(path, ("x_name", "y_name", "x", "y", "R0", "region"), rows)


# reference heat-map rectangles, as (x axis, y axis)
REFERENCE_HEAT_GRIDS = {
    "mu_d": (("mu", 0.5, 0.94), ("d", 0.001, 0.44)),
    "pi_d": (("pi", 0.0005, 0.005), ("d", 0.05, 0.5)),
    "mu_pi": (("mu", 1.05, 1.5), ("pi", 0.004, 0.049)),
    "beta_d": (("beta", 0.0005, 0.005), ("d", 0.05, 0.5)),
}


@dataclass(frozen=True)
class InfluenceRun:
    value: float
    N_h: float
    trajectory: Trajectory

    @property
    def final_I(self) -> float:
        return float(self.trajectory.states[-1, 2])


@dataclass(frozen=True)
class InfluenceFamily:
    parameter: str
    runs: tuple[InfluenceRun, ...]

    def final_I(self) -> np.ndarray:
        return np.array([run.final_I for run in self.runs])

    def to_csv(self, path: str | Path, n_samples: int = 201) -> None:
        """Long format ``parameter,value,N_h,t,I`` on a common uniform time grid."""
        rows = []
        for run in self.runs:
            times = np.linspace(run.trajectory.t0, run.trajectory.t_end, n_samples)
            I = run.trajectory.sample(times)[:, 2]
            rows.extend((self.parameter, run.value, run.N_h, t, i) for t, i in zip(times, I))
        write_csv(path, ("parameter", "value", "N_h", "t", "I"), rows)


def within_host_influence(
    base_wh: WithinHostParams,
    base_bh: BetweenHostParams,
    vary: str,
    values: Sequence[float],
    horizon: float = INFLUENCE_HORIZON,
    wh_initial: WithinHostState = BASELINE_WITHIN_HOST_INITIAL,
    wh_horizon: float = DEFAULT_HORIZON,
    bh_initial: BetweenHostState = BASELINE_BETWEEN_HOST_INITIAL,
    detection_limit: float = DEFAULT_DETECTION_LIMIT,
    config: IntegratorConfig | None = None,
    bh_config: IntegratorConfig | None = None,
    workers: int | None = None,
) -> InfluenceFamily:
    """Re-derive ``N_h`` for each value of ``alpha``, ``x`` or ``y`` and simulate ``I(t)``.

    ``config`` drives the within-host runs and ``bh_config`` the between-host
    ones (each falls back to its model's default).
    """
    if vary not in INFLUENCE_PARAMETERS:
        raise ValueError(f"vary must be one of {INFLUENCE_PARAMETERS}, got {vary!r}")
    if any(not v > 0 for v in values):
        raise ValueError("values must be positive")

    def run(value):
        wh = base_wh.modified(**{vary: float(value)})
        N_h = coupling_summary(wh, wh_initial, float(wh_horizon), float(detection_limit), config).N_h
        trajectory = simulate_between_host(base_bh.replace(N_h=N_h), bh_initial, horizon, bh_config)
        return InfluenceRun(float(value), N_h, trajectory)

    return InfluenceFamily(vary, tuple(_evaluate(list(values), run, workers)))

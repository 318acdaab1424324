"""Collapse the within-host scale into a single infectiousness constant.

The area under the viral-load curve over the detection window is obtained
from the infected-cell integral,

    N_h = alpha * int_{s_begin}^{s_end} U_star ds / (y + mu_v),

and the between-host model treats it as a fixed parameter.  Interventions
acting inside the host modify the rates, re-simulate, and yield ``N_m``.
"""

from __future__ import annotations

import functools
import json
import warnings
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import TYPE_CHECKING

import numpy as np

from .integrator import IntegratorConfig, Trajectory
from .records import write_csv
from .within_host import (
    BASELINE_WITHIN_HOST,
    BASELINE_WITHIN_HOST_INITIAL,
    DEFAULT_HORIZON,
    WithinHostParams,
    WithinHostState,
    simulate_within_host,
)

if TYPE_CHECKING:
    from .interventions import InterventionEfficacies

DEFAULT_DETECTION_LIMIT = 0.0
SUMMARY_FIELDS = (
    "N_h",
    "s_begin",
    "s_end",
    "integral_Ustar",
    "detection_limit",
    "horizon",
    "alpha",
    "clearance",
    "empty_window",
)


class EmptyWindowError(ValueError):
    """Viral load never reaches the detection limit."""


@dataclass(frozen=True)
class CouplingSummary:
    """Result of reducing one within-host trajectory.

    ``clearance`` is the denominator ``y + mu_v`` actually used, so that
    ``N_h == alpha * integral_Ustar / clearance`` can be re-checked from the
    record alone.
    """

    N_h: float
    window: tuple[float, float]
    integral_Ustar: float
    detection_limit: float
    horizon: float
    alpha: float
    clearance: float
    empty_window: bool = False

    def reconstruction_error(self) -> float:
        expected = self.alpha * self.integral_Ustar / self.clearance
        if expected == 0.0:
            return abs(self.N_h)
        return abs(self.N_h - expected) / abs(expected)

    def to_record(self) -> dict:
        record = asdict(self)
        s_begin, s_end = record.pop("window")
        record["s_begin"] = s_begin
        record["s_end"] = s_end
        return {name: record[name] for name in SUMMARY_FIELDS}

    def to_json(self, path: str | Path) -> None:
        record = {k: (v if isinstance(v, bool) else float(v)) for k, v in self.to_record().items()}
        Path(path).write_text(json.dumps(record, indent=2, sort_keys=False) + "\n")

    def to_csv(self, path: str | Path) -> None:
        record = self.to_record()
        write_csv(path, list(record), [list(record.values())])


def _crossing(t0, v0, t1, v1, level) -> float:
    if v1 == v0:
        return float(t0)
    return float(t0 + (level - v0) * (t1 - t0) / (v1 - v0))


def detection_window(trajectory: Trajectory, detection_limit: float = DEFAULT_DETECTION_LIMIT) -> tuple[float, float]:
    """Times at which the viral load first rises to, and last falls from, ``detection_limit``.

    Crossings between stored points are located by linear interpolation.  A
    limit of zero selects the whole trajectory.
    """
    if detection_limit < 0:
        raise ValueError("detection_limit must be >= 0")
    times = trajectory.times
    if detection_limit == 0:
        return trajectory.t0, trajectory.t_end
    V = trajectory.component("V") if "V" in trajectory.labels else trajectory.states[:, -1]
    above = np.flatnonzero(V >= detection_limit)
    if above.size == 0:
        raise EmptyWindowError(
            f"viral load peaks at {float(V.max())!r}, below the detection limit {detection_limit!r}"
        )
    first, last = int(above[0]), int(above[-1])
    s_begin = times[0] if first == 0 else _crossing(times[first - 1], V[first - 1], times[first], V[first], detection_limit)
    if last == times.size - 1:
        s_end = times[-1]
    else:
        s_end = _crossing(times[last], V[last], times[last + 1], V[last + 1], detection_limit)
    return float(s_begin), float(s_end)


def _window_integral(times: np.ndarray, values: np.ndarray, s_begin: float, s_end: float) -> float:
    """Composite trapezoid of ``values`` on the stored grid clipped to ``[s_begin, s_end]``."""
    if s_end <= s_begin:
        return 0.0
    inside = (times > s_begin) & (times < s_end)
    grid = np.concatenate(([s_begin], times[inside], [s_end]))
    vals = np.concatenate(
        ([np.interp(s_begin, times, values)], values[inside], [np.interp(s_end, times, values)])
    )
    return float(np.trapezoid(vals, grid))


def compute_Nh(
    params: WithinHostParams,
    trajectory: Trajectory,
    detection_limit: float = DEFAULT_DETECTION_LIMIT,
) -> CouplingSummary:
    """Area under the viral load curve from a within-host trajectory.

    If the viral load never reaches ``detection_limit`` the summary carries
    ``N_h = 0`` and ``empty_window=True`` and a warning is emitted.
    """
    clearance = params.y + params.mu_v
    horizon = trajectory.t_end - trajectory.t0
    try:
        s_begin, s_end = detection_window(trajectory, detection_limit)
    except EmptyWindowError as exc:
        warnings.warn(str(exc), RuntimeWarning, stacklevel=2)
        return CouplingSummary(0.0, (trajectory.t_end, trajectory.t_end), 0.0, detection_limit, horizon,
                               params.alpha, clearance, empty_window=True)
    U_star = trajectory.component("U_star") if "U_star" in trajectory.labels else trajectory.states[:, 1]
    integral = _window_integral(trajectory.times, U_star, s_begin, s_end)
    N_h = params.alpha * integral / clearance
    return CouplingSummary(N_h, (s_begin, s_end), integral, detection_limit, horizon, params.alpha, clearance)


@functools.lru_cache(maxsize=256)
def coupling_summary(
    params: WithinHostParams = BASELINE_WITHIN_HOST,
    initial: WithinHostState = BASELINE_WITHIN_HOST_INITIAL,
    horizon: float = DEFAULT_HORIZON,
    detection_limit: float = DEFAULT_DETECTION_LIMIT,
    config: IntegratorConfig | None = None,
) -> CouplingSummary:
    """Simulate the within-host model and reduce it; memoised on its (hashable) inputs."""
    trajectory = simulate_within_host(params, initial, horizon, config)
    return compute_Nh(params, trajectory, detection_limit)


def modified_within_host(params: WithinHostParams, efficacies: "InterventionEfficacies") -> WithinHostParams:
    """Within-host rates under antivirals (alpha, k) and immunomodulators (x, y)."""
    return params.modified(
        alpha=params.alpha * (1.0 - efficacies.epsilon),
        k=params.k * (1.0 - efficacies.gamma_k),
        x=params.x * (1.0 + efficacies.delta),
        y=params.y * (1.0 + efficacies.delta),
    )


def compute_Nm(
    params: WithinHostParams,
    efficacies: "InterventionEfficacies",
    detection_limit: float = DEFAULT_DETECTION_LIMIT,
    config: IntegratorConfig | None = None,
    initial: WithinHostState = BASELINE_WITHIN_HOST_INITIAL,
    horizon: float = DEFAULT_HORIZON,
    trajectory: Trajectory | None = None,
) -> CouplingSummary:
    """Intervention-modified area under the viral load curve.

    The within-host model is re-simulated with ``alpha(1-epsilon)``,
    ``k(1-gamma_k)``, ``x(1+delta)`` and ``y(1+delta)``, and the result is
    scaled by the modified ``alpha`` and ``y``.  Passing ``trajectory`` skips
    the re-simulation and only rescales the given infected-cell curve.
    """
    modified = modified_within_host(params, efficacies)
    if trajectory is None:
        return coupling_summary(modified, initial, float(horizon), float(detection_limit), config)
    return compute_Nh(modified, trajectory, detection_limit)


def summaries_to_csv(path: str | Path, summaries) -> None:
    rows = []
    for summary in summaries:
        rows.append(list(summary.to_record().values()))
    write_csv(path, SUMMARY_FIELDS, rows)


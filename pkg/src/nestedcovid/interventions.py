"""Interventions: effective reproduction number and comparative effectiveness.

Social distancing (``rho``) scales transmission directly.  Antivirals
(``epsilon``, ``gamma_k``) and immunomodulators (``delta``) act inside the
host, so they enter through the modified coupling constant ``N_m``.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Sequence

from .analysis import compute_R0
from .between_host import BetweenHostParams
from .coupling import DEFAULT_DETECTION_LIMIT, compute_Nm, coupling_summary
from .integrator import IntegratorConfig
from .records import write_csv
from .within_host import BASELINE_WITHIN_HOST_INITIAL, DEFAULT_HORIZON, WithinHostParams, WithinHostState

DEFAULT_LEVELS = (0.3, 0.6, 0.9)
# canonical order used in combo names
TABLE_INTERVENTIONS = ("rho", "delta", "epsilon")
TABLE_HEADER = ("combo", "level", "R_E", "pct_reduction", "rank")


@dataclass(frozen=True)
class InterventionEfficacies:
    epsilon: float = 0.0
    gamma_k: float = 0.0
    delta: float = 0.0
    rho: float = 0.0

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if not 0.0 <= value < 1.0:
                raise ValueError(f"efficacy {f.name} must lie in [0, 1), got {value!r}")

    @property
    def acts_within_host(self) -> bool:
        return bool(self.epsilon or self.gamma_k or self.delta)


@dataclass(frozen=True)
class CouplingSetup:
    """Everything besides the rates that determines ``N_h`` and ``N_m``."""

    initial: WithinHostState = BASELINE_WITHIN_HOST_INITIAL
    horizon: float = DEFAULT_HORIZON
    detection_limit: float = DEFAULT_DETECTION_LIMIT
    integrator: IntegratorConfig | None = None


def modified_coupling(base_wh: WithinHostParams, eff: InterventionEfficacies, setup: CouplingSetup | None = None) -> float:
    """``N_m``; reduces to the unmodified ``N_h`` when no within-host intervention is active."""
    s = setup or CouplingSetup()
    if not eff.acts_within_host:
        return coupling_summary(base_wh, s.initial, float(s.horizon), float(s.detection_limit), s.integrator).N_h
    return compute_Nm(base_wh, eff, s.detection_limit, s.integrator, s.initial, s.horizon).N_h


def reproduction_number(base_bh: BetweenHostParams, N_m: float, rho: float = 0.0) -> float:
    """``beta (1-rho) N_m Lambda pi / (mu (mu+pi+gamma1) (mu+gamma2+d N_m))``."""
    return float(compute_R0(base_bh.replace(beta=base_bh.beta * (1.0 - rho), N_h=N_m)))


def effective_R(
    base_bh: BetweenHostParams,
    base_wh: WithinHostParams,
    eff: InterventionEfficacies,
    setup: CouplingSetup | None = None,
) -> float:
    """Effective reproduction number under the given efficacies.

    ``base_bh.N_h`` is ignored; the coupling constant is always re-derived
    from ``base_wh`` so that ``R_E`` with no intervention equals ``R0`` built
    from the same within-host run.
    """
    return reproduction_number(base_bh, modified_coupling(base_wh, eff, setup), eff.rho)


def pct_reduction(R0: float, R_E: float) -> float:
    """``100 (R0 - R_E) / R0``."""
    if R0 == 0:
        raise ZeroDivisionError("percentage reduction is undefined for R0 = 0")
    return (R0 - R_E) / R0 * 100.0


def combo_name(combo: Sequence[str]) -> str:
    active = [name for name in TABLE_INTERVENTIONS if name in combo]
    return "+".join(active) if active else "none"


ALL_COMBOS = tuple(
    combo_name(c) for r in range(len(TABLE_INTERVENTIONS) + 1) for c in itertools.combinations(TABLE_INTERVENTIONS, r)
)


def combo_members(name: str) -> frozenset[str]:
    return frozenset() if name == "none" else frozenset(name.split("+"))


@dataclass(frozen=True)
class EffectivenessRow:
    combo: str
    level: float
    R_E: float
    pct_reduction: float
    rank: int

    @property
    def members(self) -> frozenset[str]:
        return combo_members(self.combo)


@dataclass(frozen=True)
class EffectivenessTable:
    R0: float
    rows: tuple[EffectivenessRow, ...]

    @property
    def levels(self) -> tuple[float, ...]:
        return tuple(dict.fromkeys(row.level for row in self.rows))

    def at_level(self, level: float) -> list[EffectivenessRow]:
        return [row for row in self.rows if row.level == level]

    def lookup(self, combo: str, level: float) -> EffectivenessRow:
        for row in self.rows:
            if row.combo == combo and row.level == level:
                return row
        raise KeyError((combo, level))

    def to_csv(self, path: str | Path) -> None:
        write_csv(path, TABLE_HEADER, [(r.combo, r.level, r.R_E, r.pct_reduction, r.rank) for r in self.rows])


def _rank(entries: list[tuple[str, float, float]]) -> dict[str, int]:
    """Rank 1 = smallest reduction; ties by number of interventions, then name."""
    order = sorted(entries, key=lambda e: (e[2], len(combo_members(e[0])), e[0]))
    return {combo: i + 1 for i, (combo, _, _) in enumerate(order)}


def effectiveness_table(
    base_bh: BetweenHostParams,
    base_wh: WithinHostParams,
    levels: Sequence[float] = DEFAULT_LEVELS,
    setup: CouplingSetup | None = None,
    workers: int | None = None,
) -> EffectivenessTable:
    """All eight ``{rho, delta, epsilon}`` combinations at each efficacy level.

    Active interventions take the level as their efficacy, inactive ones 0;
    ``gamma_k`` stays 0.  ``N_m`` depends only on ``(epsilon, delta)``, so
    each distinct pair is simulated once.
    """
    levels = tuple(float(v) for v in levels)
    for level in levels:
        if not 0.0 < level < 1.0:
            raise ValueError(f"efficacy levels must lie in (0, 1), got {level!r}")
    if len(set(levels)) != len(levels):
        raise ValueError("efficacy levels must be distinct")

    pairs = sorted({(lv if "epsilon" in c else 0.0, lv if "delta" in c else 0.0)
                    for lv in levels for c in map(combo_members, ALL_COMBOS)})

    def coupling_for(pair):
        epsilon, delta = pair
        return modified_coupling(base_wh, InterventionEfficacies(epsilon=epsilon, delta=delta), setup)

    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            N_m = dict(zip(pairs, pool.map(coupling_for, pairs)))
    else:
        N_m = {pair: coupling_for(pair) for pair in pairs}

    R0 = reproduction_number(base_bh, N_m[(0.0, 0.0)])
    rows = []
    for level in levels:
        entries = []
        for combo in ALL_COMBOS:
            members = combo_members(combo)
            pair = (level if "epsilon" in members else 0.0, level if "delta" in members else 0.0)
            R_E = reproduction_number(base_bh, N_m[pair], level if "rho" in members else 0.0)
            entries.append((combo, R_E, pct_reduction(R0, R_E)))
        ranks = _rank(entries)
        rows.extend(EffectivenessRow(combo, level, R_E, pct, ranks[combo]) for combo, R_E, pct in entries)
    return EffectivenessTable(R0, tuple(rows))


def subset_monotone(table: EffectivenessTable, tol: float = 1e-9) -> bool:
    """Adding an intervention never lowers the reduction, at every level."""
    for level in table.levels:
        rows = table.at_level(level)
        for small in rows:
            for big in rows:
                if small.members < big.members and big.pct_reduction < small.pct_reduction - tol:
                    return False
    return True


def is_finite_table(table: EffectivenessTable) -> bool:
    return all(math.isfinite(r.R_E) and math.isfinite(r.pct_reduction) for r in table.rows)

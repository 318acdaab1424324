"""Acceptance criteria, one test each.

Every test prints a single PASS/FAIL line (also collected into the terminal
summary) before asserting.
"""

import math
import time

import numpy as np

from nestedcovid.analysis import (
    bifurcation_quantities,
    characteristic_coefficients,
    compute_R0,
    critical_beta,
    disease_free_equilibrium,
    equilibria,
    jacobian,
)
from nestedcovid.between_host import BetweenHostParams, BetweenHostState, simulate_between_host
from nestedcovid.coupling import compute_Nh, coupling_summary
from nestedcovid.integrator import IntegratorConfig, OdeSystem, Trajectory, integrate
from nestedcovid.interventions import ALL_COMBOS, effectiveness_table, subset_monotone
from nestedcovid.sensitivity import PARAMETERS, elasticity_closed_form, elasticity_finite_difference, relative_gap
from nestedcovid.sweeps import bifurcation_sweep, exchange_bracket, heat_grid, within_host_influence
from nestedcovid.within_host import BASELINE_WITHIN_HOST, LABELS, WithinHostState, simulate_within_host

from conftest import random_between_host


def test_01_rk4_order(acceptance_report):
    start = time.perf_counter()
    errors = []
    for h in (0.1, 0.05, 0.025):
        traj = integrate(OdeSystem(1, lambda t, y: -y), [1.0], 0.0, 1.0, IntegratorConfig(method="fixed_rk4", step=h))
        errors.append(abs(traj.final[0] - math.exp(-1.0)))
    ratios = [errors[0] / errors[1], errors[1] / errors[2]]
    elapsed = time.perf_counter() - start
    ok = all(14 <= r <= 18 for r in ratios) and elapsed < 1
    acceptance_report(1, "integrator order", ok, f"ratios {ratios[0]:.3f}, {ratios[1]:.3f}; {elapsed:.3f}s")
    assert ok


def test_02_area_oracle(acceptance_report):
    start = time.perf_counter()
    s = np.linspace(0.0, 10.0, 4001)
    states = np.column_stack([np.zeros_like(s), np.exp(-s), np.ones_like(s)])
    traj = Trajectory(s, states, s.size - 1, 0, LABELS)
    params = BASELINE_WITHIN_HOST.modified(alpha=0.24, y=0.57 - BASELINE_WITHIN_HOST.mu_v)
    N_h = compute_Nh(params, traj, 0.0).N_h
    expected = 0.24 * (1 - math.exp(-10.0)) / 0.57
    rel = abs(N_h - expected) / expected
    elapsed = time.perf_counter() - start
    ok = rel < 1e-4 and elapsed < 1
    acceptance_report(2, "area under the curve oracle", ok, f"relative error {rel:.2e}; {elapsed:.3f}s")
    assert ok


def test_03_elasticity_cross_oracle(acceptance_report, baseline_bh):
    start = time.perf_counter()
    rng = np.random.default_rng(303)
    draws = [baseline_bh] + [random_between_host(rng) for _ in range(100)]
    worst = 0.0
    unit_gap = {"beta": 0.0, "Lambda": 0.0, "pi": 0.0}
    for params in draws:
        closed = elasticity_closed_form(params)
        fd = elasticity_finite_difference(params)
        worst = max(worst, max(relative_gap(closed[name], fd[name]) for name in PARAMETERS))
        for name in unit_gap:
            unit_gap[name] = max(unit_gap[name], abs(closed[name] - 1.0))
    elapsed = time.perf_counter() - start
    agree = worst < 1e-6
    units = all(gap <= 1e-12 for gap in unit_gap.values())
    ok = agree and units and elapsed < 5
    detail = (
        f"closed vs finite difference worst {worst:.2e}; "
        f"max |phi-1|: beta {unit_gap['beta']:.1e}, Lambda {unit_gap['Lambda']:.1e}, pi {unit_gap['pi']:.3f}; "
        f"{elapsed:.2f}s"
    )
    acceptance_report(3, "elasticity cross-oracle", ok, detail)
    assert agree, "closed form and finite differences disagree"
    assert units, f"unit elasticities violated: {unit_gap}"
    assert elapsed < 5


def test_04_stability_threshold(acceptance_report):
    start = time.perf_counter()
    rng = np.random.default_rng(404)
    checked = eig_mismatch = c1_mismatch = 0
    while checked < 1000:
        params = random_between_host(rng)
        R0 = compute_R0(params)
        if abs(R0 - 1) <= 0.01:
            continue
        checked += 1
        lead = np.max(np.linalg.eigvals(jacobian(params, disease_free_equilibrium(params))).real)
        eig_mismatch += np.sign(lead) != np.sign(R0 - 1)
        c1_mismatch += np.sign(characteristic_coefficients(params)[2]) != np.sign(R0 - 1)
    elapsed = time.perf_counter() - start
    ok = eig_mismatch == 0 and c1_mismatch == 0 and elapsed < 10
    acceptance_report(4, "stability threshold", ok,
                      f"{checked} draws, eigenvalue exceptions {eig_mismatch}, C1 exceptions {c1_mismatch}; {elapsed:.2f}s")
    assert ok


def test_05_endemic_convergence(acceptance_report, baseline_bh):
    start = time.perf_counter()
    assert compute_R0(baseline_bh) > 1
    traj = simulate_between_host(baseline_bh, BetweenHostState(1000.0, 100.0, 50.0), 500.0)
    _, E1 = equilibria(baseline_bh)
    rel = np.abs(traj.final - E1.as_array()) / np.abs(E1.as_array())
    elapsed = time.perf_counter() - start
    ok = bool(np.all(rel < 1e-3)) and elapsed < 5
    acceptance_report(5, "endemic convergence", ok, f"max relative gap {rel.max():.2e}; {elapsed:.2f}s")
    assert ok


def test_06_bifurcation(acceptance_report, baseline_bh):
    start = time.perf_counter()
    beta_star = critical_beta(baseline_bh)
    lo, hi = 0.5 * beta_star, 2.0 * beta_star
    grid = bifurcation_sweep(baseline_bh, (lo, hi), 101)
    bracket = exchange_bracket(grid)
    cell = (hi - lo) / 100
    located = bracket is not None and bracket[0] <= beta_star <= bracket[1] and bracket[1] - bracket[0] <= cell * (1 + 1e-9)
    rng = np.random.default_rng(606)
    forward = all(bifurcation_quantities(random_between_host(rng)).forward for _ in range(100))
    elapsed = time.perf_counter() - start
    ok = located and forward and elapsed < 5
    acceptance_report(6, "bifurcation localization", ok,
                      f"bracket {bracket}, beta* {beta_star:.6e}, a<0<b on 100 draws: {forward}; {elapsed:.2f}s")
    assert ok


def test_07_intervention_table(acceptance_report, baseline_bh):
    coupling_summary.cache_clear()  # include every within-host re-simulation in the timing
    start = time.perf_counter()
    table = effectiveness_table(baseline_bh, BASELINE_WITHIN_HOST, (0.3, 0.6, 0.9))
    elapsed = time.perf_counter() - start
    rho_exact = all(abs(table.lookup("rho", lv).pct_reduction - 100 * lv) <= 1e-9 for lv in (0.3, 0.6, 0.9))
    full_top = all(table.lookup("rho+delta+epsilon", lv).rank == 8 for lv in (0.3, 0.6, 0.9))
    complete = len(table.rows) == 3 * len(ALL_COMBOS)
    monotone = subset_monotone(table)
    ok = rho_exact and full_top and complete and monotone and elapsed < 30
    acceptance_report(7, "intervention table", ok,
                      f"rho rows exact {rho_exact}, full combo rank 8 {full_top}, subset monotone {monotone}; {elapsed:.2f}s")
    assert ok


def _random_initial(rng, cap, inside):
    share = rng.dirichlet([1.0, 1.0, 1.0])
    total = cap * (rng.uniform(0.0, 1.0) if inside else rng.uniform(1.05, 3.0))
    return BetweenHostState(*(share * total))


def test_08_well_posedness(acceptance_report):
    """40 between-host and 10 within-host runs from random parameters and initial states.

    Between-host rates uniform in [0.01, 1] except transmission
    beta in [1e-4, 1e-2] and N_h in [1, 100] (keeps the explicit integrator
    out of the stiff regime); every other run starts outside Lambda/mu.
    """
    start = time.perf_counter()
    rng = np.random.default_rng(808)
    worst_low = math.inf
    worst_excess = -math.inf
    for i in range(40):
        params = random_between_host(rng).replace(beta=float(rng.uniform(1e-4, 1e-2)), N_h=float(rng.uniform(1, 100)))
        cap = params.carrying_capacity
        initial = _random_initial(rng, cap, inside=i % 2 == 0)
        traj = simulate_between_host(params, initial, 50.0)
        worst_low = min(worst_low, traj.states.min())
        if initial.total <= cap:
            worst_excess = max(worst_excess, (traj.states.sum(axis=1) - cap).max())
    for _ in range(10):
        params = BASELINE_WITHIN_HOST.modified(
            k=float(rng.uniform(0.005, 0.1)), alpha=float(rng.uniform(0.05, 1.0)),
            x=float(rng.uniform(0.1, 1.5)), y=float(rng.uniform(0.1, 1.5)),
        )
        initial = WithinHostState(*rng.uniform(0.0, [100.0, 10.0, 10.0]))
        traj = simulate_within_host(params, initial, 30.0)
        worst_low = min(worst_low, traj.states.min())
    elapsed = time.perf_counter() - start
    ok = worst_low >= -1e-9 and worst_excess <= 1e-6 and elapsed < 10
    acceptance_report(8, "well-posedness invariants", ok,
                      f"min state {worst_low:.2e}, max excess over Lambda/mu {worst_excess:.2e}; {elapsed:.2f}s")
    assert ok


def test_09_within_host_influence(acceptance_report, baseline_bh):
    start = time.perf_counter()
    cases = {"alpha": ((0.24, 0.5, 0.7), +1), "x": ((0.5, 0.795, 0.85), -1), "y": ((0.56, 0.7, 0.8), -1)}
    results = {}
    for vary, (values, direction) in cases.items():
        late = within_host_influence(BASELINE_WITHIN_HOST, baseline_bh, vary, values, horizon=100.0).final_I()
        steps = np.diff(late) * direction
        results[vary] = (bool(np.all(steps > 0)), late)
    elapsed = time.perf_counter() - start
    ok = all(flag for flag, _ in results.values()) and elapsed < 10
    detail = "; ".join(
        f"{vary} {'ok' if flag else 'reversed'} I(100)=" + ",".join(f"{v:.4g}" for v in late)
        for vary, (flag, late) in results.items()
    )
    acceptance_report(9, "within-host influence ordering", ok, f"{detail}; {elapsed:.2f}s")
    assert ok


def test_10_determinism(acceptance_report, baseline_bh, tmp_path):
    start = time.perf_counter()
    axes = (("beta", 0.0005, 0.005, 40), ("d", 0.05, 0.5, 40))
    outputs = {"heat": [], "table": []}
    for run, workers in enumerate((None, 4, None, 4)):
        path = tmp_path / f"heat{run}.csv"
        grid = heat_grid(baseline_bh, *axes, workers=workers)
        from nestedcovid.sweeps import write_heat_grid_csv

        write_heat_grid_csv(path, grid)
        outputs["heat"].append(path.read_bytes())
        coupling_summary.cache_clear()
        path = tmp_path / f"table{run}.csv"
        effectiveness_table(baseline_bh, BASELINE_WITHIN_HOST, workers=workers).to_csv(path)
        outputs["table"].append(path.read_bytes())
    elapsed = time.perf_counter() - start
    identical = all(len(set(blobs)) == 1 for blobs in outputs.values())
    ok = identical and elapsed < 30
    acceptance_report(10, "determinism", ok, f"4 heatmap and 4 table runs byte-identical {identical}; {elapsed:.2f}s")
    assert ok

import itertools
import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nestedcovid.coupling import (
    SUMMARY_FIELDS,
    EmptyWindowError,
    compute_Nh,
    compute_Nm,
    coupling_summary,
    detection_window,
    summaries_to_csv,
)
from nestedcovid.integrator import IntegratorConfig, Trajectory
from nestedcovid.interventions import InterventionEfficacies
from nestedcovid.within_host import BASELINE_WITHIN_HOST, LABELS, simulate_within_host

from conftest import PINNED_NH

P = BASELINE_WITHIN_HOST


def synthetic(times, U_star, V=None):
    times = np.asarray(times, dtype=float)
    V = np.ones_like(times) if V is None else np.asarray(V, dtype=float)
    states = np.column_stack([np.zeros_like(times), U_star, V])
    return Trajectory(times, states, len(times) - 1, 0, LABELS)


def test_full_window_for_zero_limit():
    traj = simulate_within_host(P, horizon=5.0)
    assert detection_window(traj, 0.0) == (0.0, 5.0)


def test_interpolated_rising_crossing():
    traj = synthetic([0.0, 1.0], [0.0, 0.0], V=[1.0, 10.0])
    s_begin, s_end = detection_window(traj, 5.0)
    assert s_begin == pytest.approx(4.0 / 9.0, abs=1e-15)
    assert s_end == 1.0


def test_interpolated_falling_crossing():
    traj = synthetic([0.0, 1.0, 2.0, 3.0], [0, 0, 0, 0], V=[0.0, 8.0, 4.0, 0.0])
    s_begin, s_end = detection_window(traj, 2.0)
    assert s_begin == pytest.approx(0.25)
    assert s_end == pytest.approx(2.5)


def test_limit_above_peak_is_an_empty_window():
    traj = simulate_within_host(P, horizon=5.0)
    with pytest.raises(EmptyWindowError):
        detection_window(traj, 1e9)
    with pytest.warns(RuntimeWarning):
        summary = compute_Nh(P, traj, 1e9)
    assert summary.N_h == 0.0 and summary.empty_window


def test_negative_limit_rejected():
    with pytest.raises(ValueError):
        detection_window(simulate_within_host(P, horizon=1.0), -1.0)


@given(st.floats(0.1, 1e4), st.floats(0.5, 20.0))
def test_rectangle_rule(c, length):
    traj = synthetic(np.linspace(0, length, 7), np.full(7, c))
    summary = compute_Nh(P, traj, 0.0)
    assert summary.N_h == pytest.approx(P.alpha * c * length / (P.y + P.mu_v), rel=1e-12)


def test_exponential_area_oracle():
    s = np.linspace(0.0, 10.0, 4001)
    p = P.modified(alpha=0.24, y=0.47)  # y + mu_v = 0.57
    summary = compute_Nh(p, synthetic(s, np.exp(-s)), 0.0)
    expected = 0.24 * (1 - math.exp(-10)) / 0.57
    assert expected == pytest.approx(0.421034, abs=1e-6)
    assert abs(summary.N_h - expected) / expected < 1e-4


def test_window_clips_the_integral():
    s = np.linspace(0.0, 4.0, 5)
    traj = synthetic(s, np.ones(5), V=[0.0, 2.0, 4.0, 2.0, 0.0])
    summary = compute_Nh(P, traj, 1.0)
    assert summary.window == (0.5, 3.5)
    assert summary.integral_Ustar == pytest.approx(3.0)


def test_pinned_baseline_value():
    summary = coupling_summary()
    assert summary.N_h == pytest.approx(PINNED_NH, rel=1e-9)
    assert summary.window == (0.0, 30.0)
    # the printed 3.3759e4 differs by a factor of about 4.4; recorded, not asserted
    assert summary.N_h / 3.3759e4 > 4


def test_reconstruction_identity():
    for limit in (0.0, 1.0, 100.0):
        summary = compute_Nh(P, simulate_within_host(P), limit)
        assert summary.reconstruction_error() < 1e-12
        assert summary.window[0] <= summary.window[1] and summary.N_h >= 0


def test_quadrature_converges_with_denser_output():
    coarse_traj = simulate_within_host(P)
    coarse = compute_Nh(P, coarse_traj).N_h
    # uniform grid with ten times as many points as the adaptive one
    step = 30.0 / (10 * coarse_traj.times.size)
    dense_traj = simulate_within_host(P, config=IntegratorConfig(method="fixed_rk4", step=step))
    dense = compute_Nh(P, dense_traj).N_h
    assert abs(dense - coarse) / dense < 1e-4


def test_identity_intervention_reproduces_Nh():
    assert compute_Nm(P, InterventionEfficacies()).N_h == coupling_summary().N_h


def test_fixed_trajectory_halves_with_half_burst_rate():
    traj = simulate_within_host(P)
    base = compute_Nh(P, traj).N_h
    halved = compute_Nm(P, InterventionEfficacies(epsilon=0.5), trajectory=traj).N_h
    assert halved == pytest.approx(base / 2, rel=1e-14)


def test_combined_intervention_lowers_coupling():
    assert compute_Nm(P, InterventionEfficacies(epsilon=0.3, delta=0.3)).N_h < coupling_summary().N_h


def test_monotone_over_efficacy_grid():
    levels = (0.0, 0.3, 0.6)
    values = {
        (e, g, d): compute_Nm(P, InterventionEfficacies(epsilon=e, gamma_k=g, delta=d)).N_h
        for e, g, d in itertools.product(levels, repeat=3)
    }
    for (e, g, d), v in values.items():
        for axis in range(3):
            key = [e, g, d]
            i = levels.index(key[axis])
            if i + 1 < len(levels):
                key[axis] = levels[i + 1]
                assert values[tuple(key)] <= v * (1 + 1e-12)


def test_record_exports(tmp_path):
    summary = coupling_summary()
    record = summary.to_record()
    assert tuple(record) == SUMMARY_FIELDS
    summary.to_json(tmp_path / "c.json")
    loaded = json.loads((tmp_path / "c.json").read_text())
    assert loaded["N_h"] == summary.N_h and loaded["empty_window"] is False
    summary.to_csv(tmp_path / "c.csv")
    header, row = (tmp_path / "c.csv").read_text().splitlines()
    assert header == ",".join(SUMMARY_FIELDS)
    assert float(row.split(",")[0]) == summary.N_h
    summaries_to_csv(tmp_path / "many.csv", [summary, summary])
    assert len((tmp_path / "many.csv").read_text().splitlines()) == 3

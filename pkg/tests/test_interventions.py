import pytest
from hypothesis import given
from hypothesis import strategies as st

from nestedcovid.analysis import compute_R0
from nestedcovid.coupling import coupling_summary
from nestedcovid.interventions import (
    ALL_COMBOS,
    InterventionEfficacies,
    combo_members,
    combo_name,
    effective_R,
    effectiveness_table,
    pct_reduction,
    subset_monotone,
)
from nestedcovid.within_host import BASELINE_WITHIN_HOST

WH = BASELINE_WITHIN_HOST


@pytest.fixture(scope="module")
def table(baseline_bh):
    return effectiveness_table(baseline_bh, WH)


def test_efficacy_bounds():
    InterventionEfficacies(0.0, 0.0, 0.0, 0.999)
    for bad in ({"rho": 1.0}, {"epsilon": -0.1}, {"delta": 1.5}, {"gamma_k": 1.0}):
        with pytest.raises(ValueError):
            InterventionEfficacies(**bad)


def test_no_intervention_reproduces_R0(baseline_bh):
    assert effective_R(baseline_bh, WH, InterventionEfficacies()) == compute_R0(baseline_bh)


def test_effective_R_ignores_stale_coupling_constant(baseline_bh):
    stale = baseline_bh.replace(N_h=1.0)
    assert effective_R(stale, WH, InterventionEfficacies()) == compute_R0(baseline_bh)


def test_distancing_alone_scales_R0(baseline_bh):
    R0 = compute_R0(baseline_bh)
    R_E = effective_R(baseline_bh, WH, InterventionEfficacies(rho=0.3))
    assert R_E == pytest.approx(0.7 * R0, rel=1e-14)
    assert pct_reduction(R0, R_E) == pytest.approx(30.0, abs=1e-9)


def test_strong_antiviral_gives_small_reduction(baseline_bh):
    R0 = compute_R0(baseline_bh)
    R_E = effective_R(baseline_bh, WH, InterventionEfficacies(epsilon=0.9))
    assert R_E < R0
    assert pct_reduction(R0, R_E) < 5.0


def test_entry_inhibitor_lowers_R_E(baseline_bh):
    R0 = compute_R0(baseline_bh)
    assert effective_R(baseline_bh, WH, InterventionEfficacies(gamma_k=0.5)) < R0


def test_pct_reduction_examples():
    assert pct_reduction(5.0, 5.0) == 0.0
    assert pct_reduction(5.0, 0.0) == 100.0
    assert pct_reduction(10.0, 7.0) == pytest.approx(30.0, abs=1e-12)
    with pytest.raises(ZeroDivisionError):
        pct_reduction(0.0, 1.0)


@given(st.floats(1e-3, 1e4), st.floats(0, 1e4))
def test_pct_reduction_at_most_100(R0, R_E):
    assert pct_reduction(R0, R_E) <= 100.0


def test_combo_names():
    assert ALL_COMBOS == ("none", "rho", "delta", "epsilon", "rho+delta", "rho+epsilon", "delta+epsilon",
                          "rho+delta+epsilon")
    assert combo_name(["epsilon", "rho"]) == "rho+epsilon"
    assert combo_members("none") == frozenset()
    assert combo_members("delta+epsilon") == {"delta", "epsilon"}


def test_table_structure(table):
    assert len(table.rows) == 24
    for level in (0.3, 0.6, 0.9):
        rows = table.at_level(level)
        assert len(rows) == 8
        assert sorted(r.rank for r in rows) == list(range(1, 9))
        ordered = sorted(rows, key=lambda r: r.rank)
        assert all(a.pct_reduction <= b.pct_reduction for a, b in zip(ordered, ordered[1:]))
        none = table.lookup("none", level)
        assert none.rank == 1 and none.pct_reduction == 0.0


def test_table_rho_rows_and_top_rank(table):
    for level in (0.3, 0.6, 0.9):
        assert abs(table.lookup("rho", level).pct_reduction - 100 * level) < 1e-9
        assert table.lookup("rho+delta+epsilon", level).rank == 8


def test_table_qualitative_order(table):
    for level in (0.3, 0.6, 0.9):
        with_rho = [r for r in table.at_level(level) if "rho" in r.members]
        drug_only = [r for r in table.at_level(level) if "rho" not in r.members]
        assert min(r.rank for r in with_rho) > max(r.rank for r in drug_only)
        assert table.lookup("rho+delta", level).pct_reduction > table.lookup("rho", level).pct_reduction
        assert table.lookup("rho+epsilon", level).pct_reduction > table.lookup("rho", level).pct_reduction


def test_subset_and_level_monotonicity(table):
    assert subset_monotone(table)
    for combo in ALL_COMBOS:
        values = [table.lookup(combo, level).pct_reduction for level in (0.3, 0.6, 0.9)]
        assert values == sorted(values)


def test_level_validation(baseline_bh):
    with pytest.raises(ValueError):
        effectiveness_table(baseline_bh, WH, levels=(0.0,))
    with pytest.raises(ValueError):
        effectiveness_table(baseline_bh, WH, levels=(0.3, 0.3))


def test_table_csv_and_concurrency(tmp_path, baseline_bh, table):
    threaded = effectiveness_table(baseline_bh, WH, workers=4)
    table.to_csv(tmp_path / "a.csv")
    threaded.to_csv(tmp_path / "b.csv")
    data = (tmp_path / "a.csv").read_bytes()
    assert data == (tmp_path / "b.csv").read_bytes()
    lines = data.decode().splitlines()
    assert lines[0] == "combo,level,R_E,pct_reduction,rank"
    assert len(lines) == 25


def test_table_uses_same_coupling_as_R0(table, baseline_bh):
    assert table.R0 == compute_R0(baseline_bh.replace(N_h=coupling_summary(WH).N_h))

import numpy as np
import pytest

from nestedcovid.between_host import BetweenHostParams, baseline_between_host
from nestedcovid.coupling import coupling_summary

# N_h of the reference scenario (full 30-unit horizon, detection limit 0,
# adaptive integrator at 1e-9 tolerances); pinned regression value
PINNED_NH = 149153.71663055368

ACCEPTANCE_LINES = []


def random_between_host(rng: np.random.Generator) -> BetweenHostParams:
    """Rates uniform in [0.01, 1], Lambda in [1, 100], N_h in [1, 1e5]."""
    rate = lambda: float(rng.uniform(0.01, 1.0))
    return BetweenHostParams(
        Lambda=float(rng.uniform(1.0, 100.0)),
        beta=rate(),
        mu=rate(),
        pi=rate(),
        gamma1=rate(),
        gamma2=rate(),
        d=rate(),
        N_h=float(rng.uniform(1.0, 1e5)),
    )


@pytest.fixture(scope="session")
def baseline_Nh() -> float:
    return coupling_summary().N_h


@pytest.fixture(scope="session")
def baseline_bh(baseline_Nh) -> BetweenHostParams:
    return baseline_between_host(baseline_Nh)


@pytest.fixture
def acceptance_report():
    def report(number: int, title: str, ok: bool, detail: str = "") -> None:
        line = f"ACCEPTANCE {number:>2} {'PASS' if ok else 'FAIL'}  {title}" + (f"  [{detail}]" if detail else "")
        print(line)
        ACCEPTANCE_LINES.append((number, line))

    return report


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(line)

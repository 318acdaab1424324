"""Elasticity indices ``(dR0/dp) * p / R0`` of the basic reproduction number.

The closed forms come from differentiating ``log R0``; an exact-arithmetic
central difference that only calls :func:`compute_R0` serves as the oracle.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

from .analysis import compute_R0
from .between_host import BetweenHostParams
from .records import write_csv

PARAMETERS = ("beta", "Lambda", "pi", "mu", "gamma1", "gamma2", "N_h", "d")
CLOSED_FORM = "closed_form"
FINITE_DIFFERENCE = "finite_difference"


class UndefinedElasticityError(ValueError):
    pass


@dataclass(frozen=True)
class ElasticityReport:
    """Elasticity per parameter; ``None`` marks a parameter that could not be perturbed."""

    values: dict[str, float | None]
    method: str

    def __getitem__(self, name: str) -> float | None:
        return self.values[name]


def elasticity_closed_form(params: BetweenHostParams) -> ElasticityReport:
    p = params
    if not compute_R0(p) > 0:
        raise UndefinedElasticityError("elasticities are undefined when R0 = 0")
    exposed_loss = p.mu + p.pi + p.gamma1
    infected_loss = p.mu + p.gamma2 + p.d * p.N_h
    values = {
        "beta": 1.0,
        "Lambda": 1.0,
        # pi also sits in the exit rate from E, so this is below one
        "pi": (p.mu + p.gamma1) / exposed_loss,
        "mu": -1.0 - p.mu / exposed_loss - p.mu / infected_loss,
        "gamma1": -p.gamma1 / exposed_loss,
        "gamma2": -p.gamma2 / infected_loss,
        "N_h": (p.mu + p.gamma2) / infected_loss,
        "d": -p.d * p.N_h / infected_loss,
    }
    return ElasticityReport(values, CLOSED_FORM)


def mu_elasticity_expanded(params: BetweenHostParams) -> float:
    """``mu`` elasticity written as ``-mu D'(mu) / D(mu)`` with ``D = mu (mu+pi+gamma1)(mu+gamma2+d N_h)``.

    Polynomial form of the same derivative, used to cross-check the
    log-derivative expression above.
    """
    p = params
    q = p.pi + p.gamma1
    r = p.gamma2 + p.d * p.N_h
    D = p.mu**3 + p.mu**2 * (q + r) + p.mu * q * r
    dD = 3 * p.mu**2 + 2 * p.mu * (q + r) + q * r
    return -p.mu * dD / D


def elasticity_finite_difference(params: BetweenHostParams, rel_step: float = 1e-6) -> ElasticityReport:
    """Central difference ``(R0(p(1+h)) - R0(p(1-h))) / (2 h R0(p))``.

    Every evaluation goes through :func:`compute_R0` in exact rational
    arithmetic, so the only error is the O(h^2) truncation of the central
    difference.  Parameters equal to zero get ``None``.
    """
    if not (0 < rel_step <= 0.01):
        raise ValueError(f"rel_step must lie in (0, 0.01], got {rel_step!r}")
    h = Fraction(rel_step)
    exact = params.replace(**{name: Fraction(value) for name, value in params.as_dict().items()})
    base = compute_R0(exact)
    if base == 0:
        raise UndefinedElasticityError("elasticities are undefined when R0 = 0")
    values: dict[str, float | None] = {}
    for name in PARAMETERS:
        value = getattr(exact, name)
        if value == 0:
            values[name] = None
            continue
        up = compute_R0(exact.replace(**{name: value * (1 + h)}))
        down = compute_R0(exact.replace(**{name: value * (1 - h)}))
        values[name] = float((up - down) / (2 * h * base))
    return ElasticityReport(values, FINITE_DIFFERENCE)


def elasticity_rows(params: BetweenHostParams, rel_step: float = 1e-6) -> list[tuple]:
    closed = elasticity_closed_form(params)
    fd = elasticity_finite_difference(params, rel_step)
    rows = []
    for name in PARAMETERS:
        c, f = closed[name], fd[name]
        rows.append((name, c, f, None if f is None else abs(c - f)))
    return rows


def write_elasticity_csv(path: str | Path, params: BetweenHostParams, rel_step: float = 1e-6) -> None:
    write_csv(path, ("parameter", "closed_form", "finite_difference", "abs_diff"), elasticity_rows(params, rel_step))


def relative_gap(a: float, b: float) -> float:
    scale = max(abs(a), abs(b))
    return 0.0 if scale == 0 else abs(a - b) / scale


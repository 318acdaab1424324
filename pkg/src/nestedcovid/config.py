"""Scenario files: a sectioned ``key = value`` text format.

::

    [within_host]     omega k mu_c mu_v alpha, d_rates (six, comma separated) or x,
                      b_rates or y, U0 U_star0 V0, horizon
    [between_host]    Lambda (number or "auto" = mu (S0+E0+I0)), beta mu pi gamma1
                      gamma2 d, S0 E0 I0, horizon, abs_tol (replaces the coupling
                      section's abs_tol for this scale)
    [coupling]        detection_limit, method, step, abs_tol, rel_tol, max_steps
    [interventions]   epsilon gamma_k delta rho, levels
    [output]          directory, workers

Every key is optional except the rates without defaults; unknown sections or
keys are rejected.  Overrides ``section.key=value`` are merged into the raw
text values before anything is validated.
"""

from __future__ import annotations

import configparser
import dataclasses
import io
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable

from .between_host import BetweenHostParams, BetweenHostState
from .coupling import DEFAULT_DETECTION_LIMIT
from .integrator import IntegratorConfig
from .interventions import DEFAULT_LEVELS, CouplingSetup, InterventionEfficacies
from .within_host import WithinHostParams, WithinHostState

AUTO = "auto"
DEFAULT_OUTPUT_DIR = "nestedcovid-out"

_REQUIRED = object()

# section -> key -> default (``_REQUIRED`` for mandatory keys, None for "absent")
SCHEMA: dict[str, dict[str, object]] = {
    "within_host": {
        "omega": _REQUIRED,
        "k": _REQUIRED,
        "mu_c": _REQUIRED,
        "mu_v": _REQUIRED,
        "alpha": _REQUIRED,
        "d_rates": None,
        "b_rates": None,
        "x": None,
        "y": None,
        "U0": _REQUIRED,
        "U_star0": _REQUIRED,
        "V0": _REQUIRED,
        "horizon": "30",
    },
    "between_host": {
        "Lambda": AUTO,
        "beta": _REQUIRED,
        "mu": _REQUIRED,
        "pi": _REQUIRED,
        "gamma1": _REQUIRED,
        "gamma2": _REQUIRED,
        "d": _REQUIRED,
        "S0": _REQUIRED,
        "E0": _REQUIRED,
        "I0": _REQUIRED,
        "horizon": "500",
        "abs_tol": "1e-12",
    },
    "coupling": {
        "detection_limit": repr(DEFAULT_DETECTION_LIMIT),
        "method": "adaptive_rk45",
        "step": "0.01",
        "abs_tol": "1e-9",
        "rel_tol": "1e-9",
        "max_steps": "10000000",
    },
    "interventions": {
        "epsilon": "0",
        "gamma_k": "0",
        "delta": "0",
        "rho": "0",
        "levels": ",".join(map(str, DEFAULT_LEVELS)),
    },
    "output": {
        "directory": DEFAULT_OUTPUT_DIR,
        "workers": "1",
    },
}


class ConfigError(ValueError):
    """Unparseable or invalid scenario; the message names the offending key."""


@dataclass(frozen=True)
class ScenarioConfig:
    within_host: WithinHostParams
    wh_initial: WithinHostState
    wh_horizon: float
    # between-host rates; N_h is a placeholder until the coupling step fills it in
    between_host: BetweenHostParams
    bh_initial: BetweenHostState
    bh_horizon: float
    detection_limit: float
    integrator: IntegratorConfig
    efficacies: InterventionEfficacies
    levels: tuple[float, ...]
    output_dir: str = DEFAULT_OUTPUT_DIR
    workers: int = 1
    lambda_auto: bool = True
    bh_abs_tol: float = 1e-12

    @property
    def bh_integrator(self) -> IntegratorConfig:
        return dataclasses.replace(self.integrator, abs_tol=self.bh_abs_tol)

    @property
    def coupling_setup(self) -> CouplingSetup:
        return CouplingSetup(self.wh_initial, self.wh_horizon, self.detection_limit, self.integrator)


def _fresh_parser() -> configparser.ConfigParser:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str  # keys are case-sensitive (Lambda, U0)
    return parser


def parse_overrides(overrides: Iterable[str]) -> list[tuple[str, str, str]]:
    parsed = []
    for item in overrides:
        key, sep, value = item.partition("=")
        section, dot, name = key.strip().partition(".")
        if not sep or not dot or not name:
            raise ConfigError(f"override {item!r} must look like section.key=value")
        parsed.append((section, name, value.strip()))
    return parsed


def _raw_values(text: str, source: str, overrides: Iterable[str]) -> dict[str, dict[str, str]]:
    parser = _fresh_parser()
    try:
        parser.read_string(text, source=source)
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError(f"cannot parse {source}, line {exc.lineno}: key outside any [section]") from exc
    except configparser.ParsingError as exc:
        where = "; ".join(f"line {lineno}: {line.strip()!r}" for lineno, line in exc.errors)
        raise ConfigError(f"cannot parse {source}, {where}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {source}: {exc}") from exc
    raw: dict[str, dict[str, str]] = {}
    for section in parser.sections():
        if section not in SCHEMA:
            raise ConfigError(f"unknown section [{section}] in {source}")
        for key, value in parser.items(section):
            if key not in SCHEMA[section]:
                raise ConfigError(f"unknown key {section}.{key} in {source}")
            raw.setdefault(section, {})[key] = value
    overridden: set[str] = set()
    for section, key, value in parse_overrides(overrides):
        if section not in SCHEMA or key not in SCHEMA[section]:
            raise ConfigError(f"override names unknown key {section}.{key}")
        raw.setdefault(section, {})[key] = value
        # an aggregate rate given on the command line supersedes itemised rates from the file
        if section == "within_host" and key in ("x", "y"):
            itemised = "d_rates" if key == "x" else "b_rates"
            if itemised not in overridden:
                raw[section].pop(itemised, None)
        overridden.add(key)
    return raw


def _lookup(raw, section: str, key: str) -> str | None:
    value = raw.get(section, {}).get(key)
    if value is None or value == "":
        default = SCHEMA[section][key]
        if default is _REQUIRED:
            raise ConfigError(f"missing required key {section}.{key}")
        return default
    return value


def _number(raw, section: str, key: str) -> float | None:
    text = _lookup(raw, section, key)
    if text is None:
        return None
    try:
        value = float(text)
    except ValueError:
        raise ConfigError(f"{section}.{key}: expected a number, got {text!r}") from None
    if not math.isfinite(value):
        raise ConfigError(f"{section}.{key}: must be finite, got {text!r}")
    return value


def _numbers(raw, section: str, key: str) -> tuple[float, ...] | None:
    text = _lookup(raw, section, key)
    if text is None:
        return None
    try:
        return tuple(float(part) for part in text.split(","))
    except ValueError:
        raise ConfigError(f"{section}.{key}: expected comma-separated numbers, got {text!r}") from None


def _validated(section: str, build):
    """Run a constructor, re-raising its ValueError with the section name attached."""
    try:
        return build()
    except ValueError as exc:
        raise ConfigError(f"[{section}] {exc}") from exc


def _build(raw) -> ScenarioConfig:
    wh = "within_host"
    d_rates, b_rates = _numbers(raw, wh, "d_rates"), _numbers(raw, wh, "b_rates")
    x, y = _number(raw, wh, "x"), _number(raw, wh, "y")
    if d_rates is None and x is None:
        raise ConfigError("within_host: give either d_rates or x")
    if b_rates is None and y is None:
        raise ConfigError("within_host: give either b_rates or y")
    if d_rates is not None and len(d_rates) != 6:
        raise ConfigError(f"within_host.d_rates: expected six rates, got {len(d_rates)}")
    if b_rates is not None and len(b_rates) != 6:
        raise ConfigError(f"within_host.b_rates: expected six rates, got {len(b_rates)}")
    rates = {name: _number(raw, wh, name) for name in ("omega", "k", "mu_c", "mu_v", "alpha")}
    within = _validated(
        wh,
        lambda: WithinHostParams(
            **rates,
            x=math.fsum(d_rates) if x is None else x,
            y=math.fsum(b_rates) if y is None else y,
            d_rates=d_rates,
            b_rates=b_rates,
        ),
    )
    wh_initial = _validated(wh, lambda: WithinHostState(*(_number(raw, wh, k) for k in ("U0", "U_star0", "V0"))))
    if min(wh_initial.U, wh_initial.U_star, wh_initial.V) < 0:
        raise ConfigError("within_host: initial state U0, U_star0, V0 must be non-negative")
    wh_horizon = _number(raw, wh, "horizon")
    if not wh_horizon > 0:
        raise ConfigError("within_host.horizon: must be > 0")

    bh = "between_host"
    bh_initial = BetweenHostState(*(_number(raw, bh, k) for k in ("S0", "E0", "I0")))
    if min(bh_initial.S, bh_initial.E, bh_initial.I) < 0:
        raise ConfigError("between_host: initial state S0, E0, I0 must be non-negative")
    mu = _number(raw, bh, "mu")
    if not mu > 0:
        raise ConfigError(f"between_host.mu: must be > 0, got {mu!r}")
    lambda_text = _lookup(raw, bh, "Lambda")
    lambda_auto = lambda_text.strip().lower() == AUTO
    Lambda = mu * bh_initial.total if lambda_auto else _number(raw, bh, "Lambda")
    between = _validated(
        bh,
        lambda: BetweenHostParams(
            Lambda=Lambda,
            mu=mu,
            N_h=0.0,
            **{name: _number(raw, bh, name) for name in ("beta", "pi", "gamma1", "gamma2", "d")},
        ),
    )
    bh_horizon = _number(raw, bh, "horizon")
    if not bh_horizon > 0:
        raise ConfigError("between_host.horizon: must be > 0")
    bh_abs_tol = _number(raw, bh, "abs_tol")
    if not bh_abs_tol > 0:
        raise ConfigError("between_host.abs_tol: must be > 0")

    cp = "coupling"
    detection_limit = _number(raw, cp, "detection_limit")
    if detection_limit < 0:
        raise ConfigError("coupling.detection_limit: must be >= 0")
    max_steps = _number(raw, cp, "max_steps")
    if max_steps != int(max_steps):
        raise ConfigError("coupling.max_steps: must be an integer")
    integrator = _validated(
        cp,
        lambda: IntegratorConfig(
            method=_lookup(raw, cp, "method"),
            step=_number(raw, cp, "step"),
            abs_tol=_number(raw, cp, "abs_tol"),
            rel_tol=_number(raw, cp, "rel_tol"),
            max_steps=int(max_steps),
        ),
    )

    iv = "interventions"
    efficacies = _validated(
        iv, lambda: InterventionEfficacies(**{name: _number(raw, iv, name) for name in ("epsilon", "gamma_k", "delta", "rho")})
    )
    levels = _numbers(raw, iv, "levels")
    if any(not 0 < lv < 1 for lv in levels) or len(set(levels)) != len(levels):
        raise ConfigError("interventions.levels: must be distinct values in (0, 1)")

    workers = _number(raw, "output", "workers")
    if workers != int(workers) or workers < 1:
        raise ConfigError("output.workers: must be a positive integer")

    return ScenarioConfig(
        within_host=within,
        wh_initial=wh_initial,
        wh_horizon=wh_horizon,
        between_host=between,
        bh_initial=bh_initial,
        bh_horizon=bh_horizon,
        detection_limit=detection_limit,
        integrator=integrator,
        efficacies=efficacies,
        levels=levels,
        output_dir=_lookup(raw, "output", "directory"),
        workers=int(workers),
        lambda_auto=lambda_auto,
        bh_abs_tol=bh_abs_tol,
    )


def loads_config(text: str, overrides: Iterable[str] = (), source: str = "<string>") -> ScenarioConfig:
    return _build(_raw_values(text, source, overrides))


def load_config(path: str | Path | None = None, overrides: Iterable[str] = ()) -> ScenarioConfig:
    """Read a scenario file; ``None`` loads the bundled baseline scenario."""
    if path is None:
        return loads_config(baseline_text(), overrides, source="baseline.ini")
    text = Path(path).read_text()
    return loads_config(text, overrides, source=str(path))


def baseline_text() -> str:
    return resources.files("nestedcovid").joinpath("data", "baseline.ini").read_text()


def _fmt(value: float) -> str:
    return repr(float(value))


def dumps_config(config: ScenarioConfig) -> str:
    """Normalized scenario text; loading it reproduces ``config``."""
    wh, bh, ig, eff = config.within_host, config.between_host, config.integrator, config.efficacies
    sections = {
        "within_host": {
            "omega": _fmt(wh.omega),
            "k": _fmt(wh.k),
            "mu_c": _fmt(wh.mu_c),
            "mu_v": _fmt(wh.mu_v),
            "alpha": _fmt(wh.alpha),
        },
        "between_host": {
            "Lambda": AUTO if config.lambda_auto else _fmt(bh.Lambda),
            **{name: _fmt(getattr(bh, name)) for name in ("beta", "mu", "pi", "gamma1", "gamma2", "d")},
            "S0": _fmt(config.bh_initial.S),
            "E0": _fmt(config.bh_initial.E),
            "I0": _fmt(config.bh_initial.I),
            "horizon": _fmt(config.bh_horizon),
            "abs_tol": _fmt(config.bh_abs_tol),
        },
        "coupling": {
            "detection_limit": _fmt(config.detection_limit),
            "method": ig.method,
            "step": _fmt(ig.step),
            "abs_tol": _fmt(ig.abs_tol),
            "rel_tol": _fmt(ig.rel_tol),
            "max_steps": str(ig.max_steps),
        },
        "interventions": {
            **{name: _fmt(getattr(eff, name)) for name in ("epsilon", "gamma_k", "delta", "rho")},
            "levels": ",".join(_fmt(v) for v in config.levels),
        },
        "output": {"directory": config.output_dir, "workers": str(config.workers)},
    }
    w = sections["within_host"]
    if wh.d_rates is not None:
        w["d_rates"] = ",".join(_fmt(r) for r in wh.d_rates)
    else:
        w["x"] = _fmt(wh.x)
    if wh.b_rates is not None:
        w["b_rates"] = ",".join(_fmt(r) for r in wh.b_rates)
    else:
        w["y"] = _fmt(wh.y)
    w.update(
        U0=_fmt(config.wh_initial.U),
        U_star0=_fmt(config.wh_initial.U_star),
        V0=_fmt(config.wh_initial.V),
        horizon=_fmt(config.wh_horizon),
    )
    parser = _fresh_parser()
    parser.read_dict(sections)
    buffer = io.StringIO()
    parser.write(buffer)
    return buffer.getvalue()

"""Config parsing for experiment runs: INI sections, hard unknown-key errors.

Schema (all keys optional unless marked required; see README for details):

    [experiment]  kind = oracle | boltzmann | fragmentation |
                         lifted_checks | shattering_sweep      (required)
    [engine]      s, t_end, dt (required), n_max, series_tol, rule
    [honesty]     threshold, persistence
    [initial]     kind = uniform | point | maxwellian | csv; node;
                  temperature; path
    [output]      directory, emit_svg
    [oracle]      rate                      (oracle / lifted_checks runs)
    [grid]        kind = velocity: min, max, n
                  kind = mass:     xmin, xmax, n
    [frequency]   kind = constant | affine | power | pwlinear | matching
                  + the kind's parameters   (collision loss rate)
    [kernel]      kind = uniform | gaussian | outflow + parameters;
                  time_kind + time-profile parameters prefixed time_
    [rate]        kind = constant | linear | power | product_t + parameters
    [daughter]    kind = binary_uniform | powerlaw; nu
    [model]       strict_subcritical; strict_kernel; force_normalize
    [lifted]      t_max, h, lam_factorization, lam_series, n_terms,
                  lam_laplace, laplace_t_max, n_laplace_max
    [shattering]  alpha (required for shattering_sweep), x_max,
                  x_min_start, n_grids, nodes_per_grid, n_max,
                  rel_threshold
    [sweep]       kind = dt | x_min; values (comma list, >= 2 entries,
                  required for the sweep subcommand)

Unknown sections or keys abort parsing with an error listing them: a
silently ignored typo could flip an honesty verdict.
"""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, field

from .errors import ConfigError

EXPERIMENT_KINDS = ("oracle", "boltzmann", "fragmentation", "lifted_checks",
                    "shattering_sweep")
INITIAL_KINDS = ("uniform", "point", "maxwellian", "csv")
GRID_KINDS = ("velocity", "mass")
SWEEP_KINDS = ("dt", "x_min")

_PROFILE_PARAMS = {
    "constant": {"value"},
    "affine": {"c0", "c1"},
    "power": {"scale", "exponent"},
    "pwlinear": {"times", "values"},
}
_FREQUENCY_PARAMS = dict(_PROFILE_PARAMS, matching=set())
_KERNEL_PARAMS = {
    "uniform": {"value"},
    "gaussian": {"amplitude", "width"},
    "outflow": {"target"},
}
_RATE_PARAMS = {
    "constant": {"value"},
    "linear": {"scale"},
    "power": {"scale", "exponent"},
    "product_t": {"scale", "exponent"},
}
_DAUGHTER_PARAMS = {
    "binary_uniform": set(),
    "powerlaw": {"nu"},
}

_FIXED_SECTION_KEYS = {
    "experiment": {"kind"},
    "engine": {"s", "t_end", "dt", "n_max", "series_tol", "rule"},
    "honesty": {"threshold", "persistence"},
    "initial": {"kind", "node", "temperature", "path"},
    "output": {"directory", "emit_svg"},
    "oracle": {"rate"},
    "grid": {"kind", "min", "max", "xmin", "xmax", "n"},
    "model": {"strict_subcritical", "strict_kernel", "force_normalize"},
    "lifted": {"t_max", "h", "lam_factorization", "lam_series", "n_terms",
               "lam_laplace", "laplace_t_max", "n_laplace_max"},
    "shattering": {"alpha", "x_max", "x_min_start", "n_grids",
                   "nodes_per_grid", "n_max", "rel_threshold"},
    "sweep": {"kind", "values"},
}
_KIND_SECTIONS = {
    "frequency": _FREQUENCY_PARAMS,
    "kernel": _KERNEL_PARAMS,
    "rate": _RATE_PARAMS,
    "daughter": _DAUGHTER_PARAMS,
}


@dataclass(frozen=True)
class EngineSection:
    s: float = 0.0
    t_end: float = 1.0
    dt: float = 0.0
    n_max: int = 20
    series_tol: float = 1e-10
    rule: str = "trapezoid"


@dataclass(frozen=True)
class HonestySection:
    threshold: float = 1e-8
    persistence: int = 3


@dataclass(frozen=True)
class InitialSection:
    kind: str = "uniform"
    node: int = 0
    temperature: float = 1.0
    path: str = ""


@dataclass(frozen=True)
class OutputSection:
    directory: str = "out"
    emit_svg: bool = False


@dataclass(frozen=True)
class ExperimentConfig:
    """Parsed experiment configuration plus the raw key/value echo."""

    kind: str
    engine: EngineSection
    honesty: HonestySection
    initial: InitialSection
    output: OutputSection
    sections: dict = field(default_factory=dict)
    echo_rows: tuple = ()


def _parse_scalar(section: str, key: str, raw: str, kind: type):
    try:
        if kind is bool:
            lowered = raw.strip().lower()
            if lowered in ("true", "yes", "on", "1"):
                return True
            if lowered in ("false", "no", "off", "0"):
                return False
            raise ValueError(raw)
        return kind(raw)
    except ValueError:
        raise ConfigError(
            f"[{section}] {key} = {raw!r} is not a valid {kind.__name__}"
        ) from None


def get_float(sections: dict, section: str, key: str, default=None) -> float:
    raw = sections.get(section, {}).get(key)
    if raw is None:
        if default is None:
            raise ConfigError(f"missing required key [{section}] {key}")
        return float(default)
    return _parse_scalar(section, key, raw, float)


def get_int(sections: dict, section: str, key: str, default=None) -> int:
    raw = sections.get(section, {}).get(key)
    if raw is None:
        if default is None:
            raise ConfigError(f"missing required key [{section}] {key}")
        return int(default)
    return _parse_scalar(section, key, raw, int)


def get_bool(sections: dict, section: str, key: str, default: bool) -> bool:
    raw = sections.get(section, {}).get(key)
    if raw is None:
        return default
    return _parse_scalar(section, key, raw, bool)


def get_str(sections: dict, section: str, key: str, default=None) -> str:
    raw = sections.get(section, {}).get(key)
    if raw is None:
        if default is None:
            raise ConfigError(f"missing required key [{section}] {key}")
        return default
    return raw.strip()


def get_float_list(sections: dict, section: str, key: str, default=None) -> list:
    raw = sections.get(section, {}).get(key)
    if raw is None:
        if default is None:
            raise ConfigError(f"missing required key [{section}] {key}")
        return list(default)
    out = []
    for piece in raw.split(","):
        piece = piece.strip()
        if piece:
            out.append(_parse_scalar(section, key, piece, float))
    if not out:
        raise ConfigError(f"[{section}] {key} holds no values")
    return out


def _validate_keys(sections: dict) -> None:
    problems = []
    for section, pairs in sections.items():
        if section in _FIXED_SECTION_KEYS:
            allowed = _FIXED_SECTION_KEYS[section]
            extra = sorted(set(pairs) - allowed)
            problems.extend(f"[{section}] {k}" for k in extra)
        elif section in _KIND_SECTIONS:
            kinds = _KIND_SECTIONS[section]
            kind = pairs.get("kind", "").strip()
            if kind not in kinds:
                problems.append(
                    f"[{section}] kind = {kind!r} (expected one of "
                    f"{sorted(kinds)})"
                )
                continue
            allowed = {"kind"} | kinds[kind]
            if section == "kernel":
                time_kind = pairs.get("time_kind", "constant").strip()
                if time_kind not in _PROFILE_PARAMS:
                    problems.append(f"[kernel] time_kind = {time_kind!r}")
                    continue
                allowed |= {"time_kind"} | {
                    f"time_{p}" for p in _PROFILE_PARAMS[time_kind]}
            extra = sorted(set(pairs) - allowed)
            problems.extend(f"[{section}] {k}" for k in extra)
        else:
            problems.append(f"[{section}] (unknown section)")
    if problems:
        raise ConfigError("unknown configuration keys: " + ", ".join(problems))


def parse_config(path) -> ExperimentConfig:
    """Parse and validate an experiment configuration file."""
    if not os.path.isfile(path):
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except (configparser.Error, UnicodeDecodeError) as exc:
        raise ConfigError(f"config file {path} does not parse: {exc}") from exc

    sections = {name: dict(parser.items(name)) for name in parser.sections()}
    if parser.defaults():
        raise ConfigError("top-level keys outside a section are not allowed")
    _validate_keys(sections)

    kind = get_str(sections, "experiment", "kind")
    if kind not in EXPERIMENT_KINDS:
        raise ConfigError(
            f"[experiment] kind = {kind!r}; expected one of {EXPERIMENT_KINDS}"
        )

    engine = EngineSection(
        s=get_float(sections, "engine", "s", 0.0),
        t_end=get_float(sections, "engine", "t_end", 1.0),
        dt=get_float(sections, "engine", "dt"),
        n_max=get_int(sections, "engine", "n_max", 20),
        series_tol=get_float(sections, "engine", "series_tol", 1e-10),
        rule=get_str(sections, "engine", "rule", "trapezoid"),
    )
    if engine.dt <= 0.0:
        raise ConfigError("[engine] dt must be positive")
    if engine.t_end <= engine.s:
        raise ConfigError("[engine] t_end must exceed s")
    if engine.n_max < 3:
        raise ConfigError("[engine] n_max must be >= 3")
    if engine.rule not in ("trapezoid", "midpoint"):
        raise ConfigError(f"[engine] rule = {engine.rule!r}")

    honesty = HonestySection(
        threshold=get_float(sections, "honesty", "threshold", 1e-8),
        persistence=get_int(sections, "honesty", "persistence", 3),
    )
    if honesty.threshold <= 0.0:
        raise ConfigError("[honesty] threshold must be positive")
    if honesty.persistence < 1:
        raise ConfigError("[honesty] persistence must be >= 1")

    initial = InitialSection(
        kind=get_str(sections, "initial", "kind", "uniform"),
        node=get_int(sections, "initial", "node", 0),
        temperature=get_float(sections, "initial", "temperature", 1.0),
        path=get_str(sections, "initial", "path", ""),
    )
    if initial.kind not in INITIAL_KINDS:
        raise ConfigError(
            f"[initial] kind = {initial.kind!r}; expected one of {INITIAL_KINDS}"
        )
    if initial.kind == "csv" and not initial.path:
        raise ConfigError("[initial] kind = csv requires path")
    if initial.kind == "maxwellian" and initial.temperature <= 0.0:
        raise ConfigError("[initial] temperature must be positive")

    output = OutputSection(
        directory=get_str(sections, "output", "directory", "out"),
        emit_svg=get_bool(sections, "output", "emit_svg", False),
    )

    echo_rows = tuple(
        (f"{section}.{key}", value)
        for section in sorted(sections)
        for key, value in sorted(sections[section].items())
    )
    return ExperimentConfig(kind=kind, engine=engine, honesty=honesty,
                            initial=initial, output=output,
                            sections=sections, echo_rows=echo_rows)


def profile_params(sections: dict, section: str) -> dict:
    """Collect the kind-specific parameters of a profile-style section."""
    pairs = sections.get(section, {})
    kind = pairs.get("kind", "").strip()
    out = {}
    for key, raw in pairs.items():
        if key == "kind" or key.startswith("time_"):
            continue
        if key in ("times", "values", "target"):
            out[key] = get_float_list(sections, section, key)
        else:
            out[key] = get_float(sections, section, key)
    out["kind"] = kind
    return out


def kernel_time_params(sections: dict) -> dict:
    """Collect the kernel section's time-profile parameters (time_ prefix)."""
    pairs = sections.get("kernel", {})
    kind = pairs.get("time_kind", "constant").strip()
    out = {"kind": kind}
    for key in pairs:
        if key.startswith("time_") and key != "time_kind":
            name = key[len("time_"):]
            if name in ("times", "values"):
                out[name] = get_float_list(sections, "kernel", key)
            else:
                out[name] = get_float(sections, "kernel", key)
    return out

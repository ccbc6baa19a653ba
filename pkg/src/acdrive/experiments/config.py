"""Config file grammar and scenario parameter resolution.

The format is deliberately minimal: `key = value` pairs, `#` comments,
section headers [model], [bath], [schedule], [integrator], [output], and
one top-level `scenario = <name>` line before the first section. Values
are decimal numbers (optional exponent), integers, booleans, bare
strings, or comma-separated number lists. Every key not set explicitly
is filled from the scenario's default table and echoed as a default in
the run report.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..errors import BadSyntax, OutOfRange, UnknownKey

SECTIONS = ("model", "bath", "schedule", "integrator", "output")

# value kinds: f = float, i = int, b = bool, s = string, lf = float list
_KIND = {
    "alpha": "f", "delta": "f", "delta_a": "f", "delta_b": "f",
    "coupling": "f", "lambda0": "f", "delta_ref": "f", "samples": "i",
    "gamma0": "f", "gamma_list": "lf", "temperature": "f",
    "multiple": "f", "fraction": "f", "swap_fraction": "f", "settle": "f",
    "margin": "f", "transit_speed": "f", "max_steps": "i", "threshold": "f",
    "start_label": "i", "goal_label": "i", "v_multiples": "lf",
    "dt_max": "f", "eta": "f", "sample_stride": "i",
    "prefix": "s", "gnuplot": "b",
}

_SECTION_OF = {
    "alpha": "model", "delta": "model", "delta_a": "model", "delta_b": "model",
    "coupling": "model", "lambda0": "model", "delta_ref": "model",
    "samples": "model",
    "gamma0": "bath", "gamma_list": "bath", "temperature": "bath",
    "multiple": "schedule", "fraction": "schedule", "swap_fraction": "schedule",
    "settle": "schedule", "margin": "schedule", "transit_speed": "schedule",
    "max_steps": "schedule", "threshold": "schedule",
    "start_label": "schedule", "goal_label": "schedule",
    "v_multiples": "schedule",
    "dt_max": "integrator", "eta": "integrator", "sample_stride": "integrator",
    "prefix": "output", "gnuplot": "output",
}

_FOUR_LEVEL_MODEL = {"delta_a": 50.0, "delta_b": 2.5, "coupling": 25.0,
                     "delta_ref": 2.43}
_TWO_LEVEL_MODEL = {"alpha": 1.0, "delta": 1.0, "lambda0": 20.0}

# Per-scenario defaults. Only keys listed here are legal for the scenario.
SCENARIO_DEFAULTS: dict[str, dict[str, dict]] = {
    "spectrum": {
        "model": dict(_FOUR_LEVEL_MODEL, lambda0=4.0, samples=2001),
        "output": {"prefix": "spectrum", "gnuplot": False},
    },
    "lz-check": {
        "model": dict(_TWO_LEVEL_MODEL),
        "schedule": {"v_multiples": [0.25, 1.0, 4.0]},
        "integrator": {"dt_max": 0.1, "eta": 0.03, "sample_stride": 50},
        "output": {"prefix": "lz_check", "gnuplot": False},
    },
    "two-level-ss": {
        "model": dict(_TWO_LEVEL_MODEL),
        "bath": {"gamma_list": [1e-3, 1e-2], "temperature": 10.0},
        "schedule": {"swap_fraction": 1.0, "settle": 1e-6},
        "integrator": {"dt_max": 0.1, "eta": 0.01, "sample_stride": 10},
        "output": {"prefix": "two_level_ss", "gnuplot": False},
    },
    "two-level-adiabatic": {
        "model": dict(_TWO_LEVEL_MODEL),
        "bath": {"gamma0": 5e-4, "temperature": 10.0},
        "schedule": {"fraction": 0.05},
        "integrator": {"dt_max": 0.1, "eta": 0.05, "sample_stride": 200},
        "output": {"prefix": "two_level_adiabatic", "gnuplot": False},
    },
    "four-level": {
        "model": dict(_FOUR_LEVEL_MODEL),
        "bath": {"gamma0": 1e-3, "temperature": 48.6},
        "schedule": {"multiple": 400.0, "swap_fraction": 1.0, "settle": 0.4,
                     "margin": 10.0},
        "integrator": {"dt_max": 0.1, "eta": 0.01, "sample_stride": 10},
        "output": {"prefix": "four_level", "gnuplot": False},
    },
    "gamma-sweep": {
        "model": dict(_FOUR_LEVEL_MODEL),
        "bath": {"gamma_list": [1e-5, 1e-4, 1e-3, 1e-2], "temperature": 48.6},
        "schedule": {"multiple": 400.0, "fraction": 0.01, "swap_fraction": 1.0,
                     "settle": 0.4, "margin": 10.0},
        "integrator": {"dt_max": 0.1, "eta": 0.05, "sample_stride": 100},
        "output": {"prefix": "gamma_sweep", "gnuplot": False},
    },
    "path-search": {
        "model": dict(_FOUR_LEVEL_MODEL),
        "schedule": {"multiple": 400.0, "settle": 1e-6, "margin": 10.0,
                     "max_steps": 4, "threshold": 0.95,
                     "start_label": 1, "goal_label": 2},
        "integrator": {"dt_max": 0.1, "eta": 0.01, "sample_stride": 10},
        "output": {"prefix": "path_search", "gnuplot": False},
    },
}


def _check_range(key: str, value, line: int | None):
    """Domain checks for every config value, shared by parser and overrides."""
    def bad(msg: str):
        raise OutOfRange(f"{key} {msg} (got {value!r})", line)

    positive = {"delta", "delta_a", "delta_b", "lambda0", "delta_ref",
                "margin", "transit_speed", "dt_max"}
    nonnegative = {"coupling", "gamma0", "temperature", "settle"}
    if key == "alpha":
        if value == 0.0:
            bad("must be nonzero")
    elif key in positive:
        if not value > 0.0:
            bad("must be > 0")
    elif key in nonnegative:
        if value < 0.0:
            bad("must be >= 0")
    elif key == "multiple":
        if value < 10.0:
            bad("must be >= 10")
    elif key == "fraction":
        if not (0.0 < value <= 0.1):
            bad("must be in (0, 0.1]")
    elif key in ("swap_fraction", "threshold"):
        if not (0.0 < value <= 1.0):
            bad("must be in (0, 1]")
    elif key == "eta":
        if not (0.0 < value <= 0.1):
            bad("must be in (0, 0.1]")
    elif key == "max_steps":
        if not (0 <= value <= 6):
            bad("must be in 0..6")
    elif key in ("start_label", "goal_label"):
        if not (1 <= value <= 4):
            bad("must be in 1..4")
    elif key == "sample_stride":
        if value < 1:
            bad("must be >= 1")
    elif key == "samples":
        if value < 2:
            bad("must be >= 2")
    elif key in ("gamma_list", "v_multiples"):
        if not value:
            bad("must not be empty")
        floor = 0.0 if key == "gamma_list" else None
        for x in value:
            if floor is not None and x < floor:
                bad("entries must be >= 0")
            if floor is None and x <= 0.0:
                bad("entries must be > 0")


@dataclass(frozen=True)
class RunSpec:
    scenario: str
    sections: dict
    defaults_applied: tuple[str, ...]

    def get(self, section: str, key: str):
        return self.sections[section][key]


def _coerce(key: str, raw: str, line: int, col: int):
    kind = _KIND[key]
    try:
        if kind == "f":
            return float(raw)
        if kind == "i":
            return int(raw)
        if kind == "b":
            if raw in ("true", "false"):
                return raw == "true"
            raise ValueError
        if kind == "lf":
            return [float(p.strip()) for p in raw.split(",") if p.strip()]
        return raw
    except ValueError:
        raise BadSyntax(f"bad {kind!r} value for {key}: {raw!r}", line, col) from None


def parse_config(text: str) -> RunSpec:
    """Parse and fully resolve a config, applying scenario defaults."""
    scenario: str | None = None
    explicit: dict[str, dict] = {s: {} for s in SECTIONS}
    section: str | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        stripped = line.strip()
        col = raw.index(stripped[0]) + 1
        if stripped.startswith("["):
            if not stripped.endswith("]"):
                raise BadSyntax("unterminated section header", lineno, col)
            name = stripped[1:-1].strip()
            if name not in SECTIONS:
                raise BadSyntax(f"unknown section [{name}]", lineno, col)
            section = name
            continue
        if "=" not in stripped:
            raise BadSyntax("expected 'key = value'", lineno, col)
        key, _, raw_val = stripped.partition("=")
        key = key.strip()
        raw_val = raw_val.strip()
        if not raw_val:
            raise BadSyntax(f"missing value for {key}", lineno,
                            raw.index("=") + 2)
        if section is None:
            if key != "scenario":
                raise BadSyntax("only 'scenario = <name>' may precede the "
                                "first section", lineno, col)
            if raw_val not in SCENARIO_DEFAULTS:
                raise OutOfRange(
                    f"scenario must be one of {', '.join(SCENARIO_DEFAULTS)}"
                    f" (got {raw_val!r})", lineno)
            scenario = raw_val
            continue
        if key == "scenario":
            raise BadSyntax("scenario must precede the first section", lineno, col)
        if scenario is None:
            raise BadSyntax("scenario must be set before any section", lineno, col)
        allowed = SCENARIO_DEFAULTS[scenario].get(section, {})
        if key not in allowed:
            raise UnknownKey(key, lineno)
        if _SECTION_OF[key] != section:
            raise UnknownKey(key, lineno)
        value = _coerce(key, raw_val, lineno, col)
        _check_range(key, value, lineno)
        explicit[section][key] = value
    if scenario is None:
        raise BadSyntax("missing 'scenario = <name>' line", 1, 1)
    sections: dict[str, dict] = {}
    defaults: list[str] = []
    for sec, table in SCENARIO_DEFAULTS[scenario].items():
        resolved = {}
        for key, default in table.items():
            if key in explicit[sec]:
                resolved[key] = explicit[sec][key]
            else:
                resolved[key] = default
                defaults.append(f"{sec}.{key}")
        sections[sec] = resolved
    return RunSpec(scenario=scenario, sections=sections,
                   defaults_applied=tuple(defaults))


def _format_value(key: str, value) -> str:
    kind = _KIND[key]
    if kind == "lf":
        return ", ".join(repr(float(x)) for x in value)
    if kind == "b":
        return "true" if value else "false"
    if kind == "f":
        return repr(float(value))
    return str(value)


def serialize_config(spec: RunSpec) -> str:
    """Canonical text whose parse reproduces the resolved spec."""
    lines = [f"scenario = {spec.scenario}", ""]
    for sec in SECTIONS:
        if sec not in spec.sections:
            continue
        lines.append(f"[{sec}]")
        for key, value in spec.sections[sec].items():
            lines.append(f"{key} = {_format_value(key, value)}")
        lines.append("")
    return "\n".join(lines)


def scenario_config(name: str, overrides: list[tuple[str, str]]) -> str:
    """Synthesize config text for `scenario <name> --set key=value ...`."""
    if name not in SCENARIO_DEFAULTS:
        raise OutOfRange(
            f"scenario must be one of {', '.join(SCENARIO_DEFAULTS)}"
            f" (got {name!r})", None)
    per_section: dict[str, list[str]] = {}
    for key, raw_val in overrides:
        if "." in key:
            section, key = key.split(".", 1)
        else:
            section = _SECTION_OF.get(key)
        if section is None or key not in _KIND:
            raise UnknownKey(key, 0)
        per_section.setdefault(section, []).append(f"{key} = {raw_val}")
    lines = [f"scenario = {name}"]
    for sec in SECTIONS:
        if sec in per_section:
            lines.append(f"[{sec}]")
            lines.extend(per_section[sec])
    return "\n".join(lines) + "\n"

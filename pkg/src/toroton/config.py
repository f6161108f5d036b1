"""Sectioned run configuration (INI text) with full validation.

Every key has a default, unknown keys are rejected and all problems are
reported together with their line numbers.  ``--set section.key=value``
overrides are applied on top of the document and validated the same way.
"""

from __future__ import annotations

import configparser
import hashlib
import math
import re
from dataclasses import dataclass, field

from .errors import ConfigError
from .medium import MediumParams, WaveParams

SWEEP_KEYS = ("eps_lin", "d_eps", "i_sat", "mu1", "u_sat", "mu_exp", "e0")


@dataclass(frozen=True)
class Key:
    kind: str  # float | int | bool | str | floats
    default: object
    doc: str
    choices: tuple = ()
    check: str = ""  # "pos", "nonneg", "pow2", "pow2or1"


# section -> key -> Key
SCHEMA: dict[str, dict[str, Key]] = {
    "medium": {
        "eps_lin": Key("float", 1.0, "linear relative permittivity"),
        "d_eps": Key("float", 0.05, "nonlinear permittivity coefficient"),
        "i_sat": Key("float", 1.0, "saturation intensity (inf = pure Kerr)"),
        "mu1": Key("float", 0.0, "permeability coefficient"),
        "u_sat": Key("float", 1.0, "permeability saturation level"),
        "mu_exp": Key("float", 1.0, "permeability response exponent (1 = rational form)"),
    },
    "wave": {
        "k0": Key("float", 1.0, "free-space wavenumber", check="pos"),
    },
    "grid": {
        "nx": Key("int", 128, "transverse samples along x", check="pow2"),
        "ny": Key("int", 128, "transverse samples along y (1 = single row)", check="pow2or1"),
        "dx": Key("float", 0.5, "transverse sample spacing", check="pos"),
        "nr": Key("int", 400, "radial samples of the core disk", check="pos"),
        "ntheta": Key("int", 128, "angular samples of the core disk", check="pos"),
        "core_fraction": Key("float", 1e-3, "amplitude fraction that bounds the core disk", check="pos"),
    },
    "run": {
        "e0": Key("float", 1.0, "on-axis soliton amplitude", check="pos"),
        "dz": Key("float", 0.0, "propagation step (0 = lambda/10)", check="nonneg"),
        "n_diffraction": Key("float", 20.0, "run length in diffraction lengths", check="pos"),
        "record_every": Key("int", 10, "steps between trace records", check="pos"),
        "absorber": Key("bool", True, "absorbing rim on the transverse grid"),
        "initial": Key("str", "soliton", "initial field for propagate", choices=("soliton", "gaussian")),
        "w0": Key("float", 4.0, "gaussian waist for initial = gaussian", check="pos"),
        "kind": Key("str", "symmetric-ring", "stability perturbation",
                    choices=("symmetric-ring", "asymmetric-tilt", "noise")),
        "level": Key("float", 0.05, "perturbation level", check="nonneg"),
        "separation": Key("float", 0.0, "pair separation (0 = four core widths)", check="nonneg"),
        "relative_phase": Key("float", 0.0, "pair relative phase in radians"),
        "seed": Key("int", 0, "random seed", check="nonneg"),
        "workers": Key("int", 1, "parallel workers for sweeps", check="pos"),
        "m_policy": Key("str", "nearest", "winding-number policy", choices=("nearest", "all-within")),
        "delta": Key("float", 0.1, "frequency-shift window for all-within", check="pos"),
        "allow_unstable": Key("bool", False, "let torus use an unstable crossing (flagged)"),
        "amplitudes": Key("floats", (), "amplitudes for a power curve (empty = none)"),
    },
    "mask": {
        "mode": Key("str", "1d", "young geometry (2d uses the [grid] section)", choices=("1d", "2d")),
        "nx": Key("int", 2048, "slit-grid samples in 1d mode", check="pow2"),
        "dx": Key("float", 0.25, "slit-grid spacing in 1d mode", check="pos"),
        "kappa": Key("float", 0.25, "decay rate of the 1d filament", check="pos"),
        "filament_x": Key("float", 0.0, "filament position (multiple of dx)"),
        "hole1_size": Key("float", 10.0, "slit half-width or hole radius around the filament", check="pos"),
        "side_offsets": Key("floats", (15.0,), "side-hole offsets from the filament"),
        "hole2_size": Key("float", 4.0, "side-hole size (0 = closed)", check="nonneg"),
        "z_screen": Key("float", 10.0, "screen plane", check="nonneg"),
        "n_aperture_lengths": Key("float", 20.0, "post-screen run in aperture diffraction lengths", check="pos"),
        "edge": Key("float", 0.0, "soft edge width (0 = 2 dx)", check="nonneg"),
        "track_half_width": Key("float", 8.0, "tracking window half-width", check="pos"),
        "significance": Key("float", 5.0, "required test/control ratio", check="pos"),
        "randomize_side_phase": Key("bool", False, "phase-randomize the side-hole field"),
        "n_realizations": Key("int", 16, "seeded copies for randomized runs", check="pos"),
    },
    "scan": {
        "c_min": Key("float", 1e-3, "smallest curvature", check="nonneg"),
        "c_max": Key("float", 0.05, "largest curvature", check="pos"),
        "n_scan": Key("int", 40, "curvature samples", check="pos"),
        **{f"vary_{k}": Key("floats", (), f"sweep values for {k}") for k in SWEEP_KEYS},
    },
}


def fmt_float(v: float) -> str:
    """17 significant digits, enough to round-trip any double."""
    v = float(v)
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    if math.isnan(v):
        return "nan"
    return format(v, ".17g")


@dataclass
class RunConfig:
    """Typed values per section; missing keys hold their defaults."""

    values: dict = field(default_factory=lambda: {s: {k: key.default for k, key in keys.items()}
                                                  for s, keys in SCHEMA.items()})

    def __getitem__(self, section):
        return self.values[section]

    def medium(self) -> MediumParams:
        return MediumParams(**self.values["medium"])

    def wave(self) -> WaveParams:
        return WaveParams.from_k0(self["wave"]["k0"], self.medium())

    def sweep_grid(self) -> dict:
        return {k: list(self["scan"][f"vary_{k}"]) for k in SWEEP_KEYS if self["scan"][f"vary_{k}"]}

    def serialize(self) -> str:
        lines = []
        for sec, keys in SCHEMA.items():
            lines.append(f"[{sec}]")
            for k, spec in keys.items():
                lines.append(f"{k} = {_format(spec, self.values[sec][k])}")
            lines.append("")
        return "\n".join(lines)

    def digest(self) -> str:
        return hashlib.sha256(self.serialize().encode()).hexdigest()


def _format(spec: Key, v) -> str:
    if spec.kind == "float":
        return fmt_float(v)
    if spec.kind == "bool":
        return "true" if v else "false"
    if spec.kind == "floats":
        return ", ".join(fmt_float(x) for x in v)
    return str(v)


_BOOLS = {"true": True, "yes": True, "on": True, "1": True,
          "false": False, "no": False, "off": False, "0": False}


def _convert(spec: Key, raw: str):
    raw = raw.strip()
    if spec.kind == "float":
        return float(raw)
    if spec.kind == "int":
        v = float(raw) if re.fullmatch(r"[+-]?\d+\.0*", raw) else int(raw)
        if v != int(v):
            raise ValueError(raw)
        return int(v)
    if spec.kind == "bool":
        if raw.lower() not in _BOOLS:
            raise ValueError(raw)
        return _BOOLS[raw.lower()]
    if spec.kind == "floats":
        return tuple(float(x) for x in raw.split(",") if x.strip()) if raw else ()
    if spec.choices and raw not in spec.choices:
        raise ValueError(raw)
    return raw


def _check(spec: Key, v) -> str | None:
    if spec.kind == "floats" and any(math.isnan(x) for x in v):
        return "values must not be NaN"
    if spec.kind not in ("float", "int"):
        return None
    if isinstance(v, float) and math.isnan(v):
        return "value must not be NaN"
    if spec.check == "pos" and not v > 0:
        return "must be > 0"
    if spec.check == "nonneg" and not v >= 0:
        return "must be >= 0"
    if spec.check in ("pow2", "pow2or1"):
        if v < 1 or v & (v - 1):
            return "must be a power of two"
        if spec.check == "pow2" and v < 2:
            return "must be >= 2"
    return None


def _line_numbers(text: str) -> dict:
    """``(section, key) -> line`` for the last assignment of every key."""
    out = {}
    section = None
    for no, line in enumerate(text.splitlines(), start=1):
        s = line.strip()
        if not s or s[0] in "#;":
            continue
        m = re.fullmatch(r"\[([^\]]+)\]", s)
        if m:
            section = m.group(1).strip()
            continue
        m = re.match(r"([^=:]+?)\s*[=:]", s)
        if m and section is not None:
            out[(section, m.group(1).strip().lower())] = no
    return out


def parse_config(text: str, overrides=()) -> RunConfig:
    """Validate ``text`` plus ``section.key=value`` overrides into a :class:`RunConfig`.

    Raises :class:`ConfigError` listing every problem.
    """
    problems = []
    cp = configparser.ConfigParser(interpolation=None, strict=True, default_section="\x00defaults")
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError([f"line {getattr(exc, 'lineno', '?')}: {exc.message.splitlines()[0]}"]) from None
    lines = _line_numbers(text)
    raw = {}
    for sec in cp.sections():
        if sec not in SCHEMA:
            problems.append(f"line {_section_line(text, sec)}: unknown section [{sec}]")
            continue
        for k, v in cp.items(sec):
            raw[(sec, k)] = (v, f"line {lines.get((sec, k), '?')}")
    for item in overrides:
        key, sep, v = item.partition("=")
        sec, dot, k = key.strip().partition(".")
        if not sep or not dot:
            problems.append(f"--set {item}: expected section.key=value")
            continue
        if sec not in SCHEMA:
            problems.append(f"--set {item}: unknown section [{sec}]")
            continue
        raw[(sec, k.strip().lower())] = (v, f"--set {key.strip()}")

    cfg = RunConfig()
    where = {}
    for (sec, k), (v, origin) in raw.items():
        spec = SCHEMA[sec].get(k)
        if spec is None:
            problems.append(f"{origin}: unknown key '{k}' in [{sec}]")
            continue
        try:
            val = _convert(spec, v)
        except ValueError:
            expected = f"one of {', '.join(spec.choices)}" if spec.choices else spec.kind
            problems.append(f"{origin}: {sec}.{k} = {v.strip()!r} is not {expected}")
            continue
        msg = _check(spec, val)
        if msg:
            problems.append(f"{origin}: {sec}.{k} {msg} (got {v.strip()})")
            continue
        cfg.values[sec][k] = val
        where[(sec, k)] = origin

    # cross-field invariants
    med = cfg.values["medium"]
    try:
        MediumParams(**med)
    except ValueError:
        for msg in MediumParams.violations(_Shadow(med)):
            name = msg.split()[0]
            origin = where.get(("medium", name), "default")
            problems.append(f"{origin}: {msg}")
    scan = cfg.values["scan"]
    if not scan["c_min"] < scan["c_max"]:
        problems.append(f"{where.get(('scan', 'c_min'), 'default')}: scan.c_min < scan.c_max violated")
    if problems:
        raise ConfigError(problems)
    return cfg


class _Shadow:
    """Attribute view of raw medium values so violations() can run without construction."""

    def __init__(self, values):
        self.__dict__.update(values)


def _section_line(text: str, name: str):
    for no, line in enumerate(text.splitlines(), start=1):
        if line.strip() == f"[{name}]":
            return no
    return "?"


def describe() -> str:
    """Documented defaults as an annotated config document."""
    out = []
    for sec, keys in SCHEMA.items():
        out.append(f"[{sec}]")
        for k, spec in keys.items():
            out.append(f"# {spec.doc}")
            out.append(f"{k} = {_format(spec, spec.default)}")
        out.append("")
    return "\n".join(out)

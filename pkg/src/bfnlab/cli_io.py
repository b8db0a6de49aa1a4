"""Run configuration files and deterministic CSV / JSON writers.

A configuration is a flat ``key = value`` text file; ``#`` starts a comment.
Profiles are written ``name amplitude [phase=..] [mode=..] [offset=..]``
with ``name`` one of ``zero``, ``sin2pi``, ``sinpi``.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .bfn import BfnConfig
from .core import (
    BC,
    ConstantAdvection,
    EquationSpec,
    Gain,
    Grid1D,
    NamedProfile,
    ProfileAdvection,
    SelfAdvection,
)

DEFAULTS = {
    "equation": "linear",
    "viscosity": "0",
    "advection": "1",
    "bc": "auto",
    "T": "1",
    "grid_n": "512",
    "nt": "2048",
    "record_every": "64",
    "gain_amplitude": "1",
    "kappa": "1",
    "gain_support": "full",
    "gain_window": "full",
    "u0": "sin2pi 1",
    "uobs0": "zero",
    "iterations": "1",
}


class ConfigError(ValueError):
    pass


def read_config_text(text: str) -> dict:
    """Parse ``key = value`` lines, rejecting unknown and repeated keys."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (p.strip() for p in line.split("=", 1))
        if key not in DEFAULTS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in out:
            raise ConfigError(f"line {lineno}: repeated key {key!r}")
        out[key] = value
    return out


def parse_number(text: str, key: str) -> float:
    # float() ignores the process locale, so '.' is always the separator.
    try:
        value = float(text)
    except ValueError:
        raise ConfigError(f"{key}: {text!r} is not a number") from None
    if not math.isfinite(value):
        raise ConfigError(f"{key}: value must be finite")
    return value


def parse_int(text: str, key: str) -> int:
    value = parse_number(text, key)
    if value != int(value):
        raise ConfigError(f"{key}: expected an integer")
    return int(value)


def parse_profile(text: str, key: str = "profile") -> NamedProfile:
    parts = text.split()
    if not parts:
        raise ConfigError(f"{key}: empty profile")
    kwargs = {}
    if len(parts) > 1:
        kwargs["amplitude"] = parse_number(parts[1], key)
    for extra in parts[2:]:
        name, _, value = extra.partition("=")
        if name not in ("phase", "mode", "offset") or not value:
            raise ConfigError(f"{key}: bad option {extra!r}")
        kwargs[name] = parse_int(value, key) if name == "mode" else parse_number(value, key)
    try:
        return NamedProfile(parts[0], **kwargs)
    except ValueError as exc:
        raise ConfigError(f"{key}: {exc}") from None


def parse_interval(text: str, key: str) -> Optional[tuple[float, float]]:
    if text.strip().lower() == "full":
        return None
    parts = text.split(",")
    if len(parts) != 2:
        raise ConfigError(f"{key}: expected 'full' or 'a,b'")
    return parse_number(parts[0], key), parse_number(parts[1], key)


def build_config(raw: dict) -> BfnConfig:
    """Turn parsed key/value pairs (defaults filled in) into a :class:`BfnConfig`."""
    kv = dict(DEFAULTS, **raw)
    nu = parse_number(kv["viscosity"], "viscosity")
    grid_n = parse_int(kv["grid_n"], "grid_n")
    bc = kv["bc"].lower()
    if bc == "auto":
        bc = BC.DIRICHLET if nu > 0 else BC.PERIODIC
    try:
        bc = BC(bc)
    except ValueError:
        raise ConfigError(f"bc: unknown boundary kind {kv['bc']!r}") from None

    equation = kv["equation"].lower()
    if equation == "burgers":
        adv = SelfAdvection()
    elif equation == "linear":
        text = kv["advection"]
        try:
            adv = ConstantAdvection(float(text))
        except ValueError:
            prof = parse_profile(text, "advection")
            adv = ProfileAdvection(prof(Grid1D(grid_n, BC.PERIODIC).x))
    else:
        raise ConfigError("equation must be 'linear' or 'burgers'")

    try:
        spec = EquationSpec(nu, adv, bc, parse_number(kv["T"], "T"))
        gain = Gain(
            parse_number(kv["gain_amplitude"], "gain_amplitude"),
            parse_number(kv["kappa"], "kappa"),
            parse_interval(kv["gain_support"], "gain_support"),
            parse_interval(kv["gain_window"], "gain_window"),
        )
        return BfnConfig(
            spec, gain, parse_profile(kv["u0"], "u0"), parse_profile(kv["uobs0"], "uobs0"),
            iterations=parse_int(kv["iterations"], "iterations"),
            nt=parse_int(kv["nt"], "nt"),
            record_every=parse_int(kv["record_every"], "record_every"),
            grid_n=grid_n,
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path) -> BfnConfig:
    return build_config(read_config_text(Path(path).read_text(encoding="utf-8")))


# -- writers -----------------------------------------------------------------------


def fmt(value) -> str:
    """17 significant digits; empty cell for missing values."""
    if value is None:
        return ""
    value = float(value)
    if not math.isfinite(value):
        return ""
    return "%.17g" % value


def write_csv(path, header: Sequence[str], columns: Iterable[Sequence]) -> None:
    cols = [list(c) for c in columns]
    rows = zip(*cols)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) for v in row) + "\n")


def jsonable(obj):
    """Replace non-finite floats by ``None`` and numpy scalars by Python ones."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj) if math.isfinite(obj) else None
    return obj


def write_json(path, payload: dict) -> None:
    text = json.dumps(jsonable(payload), sort_keys=True, indent=2, allow_nan=False)
    Path(path).write_text(text + "\n", encoding="utf-8")


def write_profile_csv(path, x, w0, wt0, rate) -> None:
    write_csv(path, ["x", "w0", "wtilde0", "rate"], [x, w0, wt0, rate])


def rate_column(T: float) -> str:
    return "rate_T=" + fmt(T)


def write_gnuplot(path, csv_name: str, Ts: Sequence[float], title: str) -> None:
    lines = [
        "set datafile separator ','",
        "set key outside right",
        "set xlabel 'x'",
        "set ylabel 'decrease rate'",
        f"set title '{title}'",
    ]
    plots = [f"'{csv_name}' using 1:{i + 2} with lines title 'T={fmt(T)}'" for i, T in enumerate(Ts)]
    lines.append("plot " + ", \\\n     ".join(plots))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")

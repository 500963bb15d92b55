"""Strict JSON run configuration."""

from __future__ import annotations

import difflib
import json
import numbers
from pathlib import Path

from .flow import INTEGRATORS, FlowConfig, InitSpec

__all__ = ["ConfigError", "parse_config", "config_from_dict"]


class ConfigError(ValueError):
    pass


_SCHEMA = {
    "grid": {"n": "int", "sizes": "int_list", "lengths": "float_list?"},
    "k": "int",
    "S0": "float",
    "dt": "float",
    "t_end": "float",
    "integrator": "str?",
    "dealias": "bool?",
    "init": {"seed": "int", "kmax": "int", "amp_phi": "float", "amp_a": "float",
             "spinor_rank": "int?"},
    "cadence?": {"record_every": "int?", "snapshot_every": "int?"},
    "blowup_ceiling": "float?",
    "fd?": {"h": "float?", "num_directions": "int?"},
}


def _key_name(key: str) -> str:
    return key.rstrip("?")


def _check_type(value, kind: str, where: str):
    kind = kind.rstrip("?")
    if kind == "int":
        if isinstance(value, bool) or not isinstance(value, numbers.Integral):
            raise ConfigError(f"{where}: expected an integer, got {value!r}")
        return int(value)
    if kind == "float":
        if isinstance(value, bool) or not isinstance(value, numbers.Real):
            raise ConfigError(f"{where}: expected a number, got {value!r}")
        return float(value)
    if kind == "bool":
        if not isinstance(value, bool):
            raise ConfigError(f"{where}: expected true or false, got {value!r}")
        return value
    if kind == "str":
        if not isinstance(value, str):
            raise ConfigError(f"{where}: expected a string, got {value!r}")
        return value
    if kind in ("int_list", "float_list"):
        if not isinstance(value, list) or not value:
            raise ConfigError(f"{where}: expected a non-empty list, got {value!r}")
        inner = kind.split("_")[0]
        return [_check_type(v, inner, f"{where}[{i}]") for i, v in enumerate(value)]
    raise AssertionError(kind)


def _walk(data, schema: dict, prefix: str) -> dict:
    if not isinstance(data, dict):
        raise ConfigError(f"{prefix or 'config'}: expected an object")
    known = {_key_name(k): k for k in schema}
    for key in data:
        if key not in known:
            where = f"{prefix}.{key}" if prefix else key
            hint = difflib.get_close_matches(key, list(known), n=1)
            msg = f"unknown key {where!r}"
            if hint:
                msg += f" (did you mean {hint[0]!r}?)"
            raise ConfigError(msg)
    out = {}
    for name, raw_key in known.items():
        spec = schema[raw_key]
        where = f"{prefix}.{name}" if prefix else name
        optional = raw_key.endswith("?") or (isinstance(spec, str) and spec.endswith("?"))
        if name not in data:
            if not optional:
                raise ConfigError(f"missing required key {where!r}")
            continue
        if isinstance(spec, dict):
            out[name] = _walk(data[name], spec, where)
        else:
            out[name] = _check_type(data[name], spec, where)
    return out


def config_from_dict(raw: dict) -> FlowConfig:
    c = _walk(raw, _SCHEMA, "")
    grid = c["grid"]
    n = grid["n"]
    if n < 1:
        raise ConfigError("grid.n: must be >= 1")
    if len(grid["sizes"]) != n:
        raise ConfigError(f"grid.sizes: need {n} entries")
    if any(N < 4 or N % 2 for N in grid["sizes"]):
        raise ConfigError("grid.sizes: every size must be even and >= 4")
    lengths = grid.get("lengths")
    if lengths is not None:
        if len(lengths) != n:
            raise ConfigError(f"grid.lengths: need {n} entries")
        if any(not L > 0 for L in lengths):
            raise ConfigError("grid.lengths: periods must be positive")
    if c["k"] < 0:
        raise ConfigError("k: must be >= 0")
    if not c["dt"] > 0:
        raise ConfigError(f"dt: must be positive, got {c['dt']}")
    if c["t_end"] < 0:
        raise ConfigError(f"t_end: must be >= 0, got {c['t_end']}")
    integrator = c.get("integrator", "imex_deturck")
    if integrator not in INTEGRATORS:
        raise ConfigError(f"integrator: must be one of {', '.join(INTEGRATORS)}")
    ini = c["init"]
    if ini["kmax"] < 0 or 3 * ini["kmax"] >= min(grid["sizes"]):
        raise ConfigError("init.kmax: must satisfy 0 <= kmax < min(sizes)/3")
    if ini["amp_phi"] < 0 or ini["amp_a"] < 0:
        raise ConfigError("init: amplitudes must be >= 0")
    spinor_rank = ini.get("spinor_rank", 1)
    if spinor_rank < 1:
        raise ConfigError("init.spinor_rank: must be >= 1")
    cad = c.get("cadence", {})
    for key in ("record_every", "snapshot_every"):
        if cad.get(key, 1) < 1:
            raise ConfigError(f"cadence.{key}: must be >= 1")
    ceiling = c.get("blowup_ceiling", 1e6)
    if not ceiling > 0:
        raise ConfigError("blowup_ceiling: must be positive")
    fd = c.get("fd", {})
    h = fd.get("h", 1e-4)
    if not 1e-6 <= h <= 1e-3:
        raise ConfigError(f"fd.h: must lie in [1e-6, 1e-3], got {h}")
    num_dirs = fd.get("num_directions", 20)
    if num_dirs < 1:
        raise ConfigError("fd.num_directions: must be >= 1")
    return FlowConfig(
        n=n,
        sizes=tuple(grid["sizes"]),
        lengths=tuple(lengths) if lengths is not None else None,
        k=c["k"],
        S0=c["S0"],
        dt=c["dt"],
        t_end=c["t_end"],
        integrator=integrator,
        dealias=c.get("dealias", True),
        init=InitSpec(ini["seed"], ini["kmax"], ini["amp_phi"], ini["amp_a"], spinor_rank),
        record_every=cad.get("record_every", 1),
        snapshot_every=cad.get("snapshot_every", 100),
        blowup_ceiling=ceiling,
        fd_h=h,
        fd_num_directions=num_dirs,
    )


def parse_config(path: str | Path) -> FlowConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return config_from_dict(raw)

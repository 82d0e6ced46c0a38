"""Experiment configuration: TOML files checked against a fixed schema.

Top-level keys are ``seed``, ``threads``, ``out`` and ``verbosity``; the
remaining keys live in the sections below.  Unknown sections or keys are
rejected.  :func:`resolve` fills in defaults so the manifest can echo the
complete configuration.
"""

from __future__ import annotations

import copy
import math
import sys

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ConfigError

__all__ = ["SCHEMA", "load_config", "resolve", "parse_config"]

_NUM = (int, float)
_ANY = object

# key -> (accepted types, default)
SCHEMA = {
    "": {
        "seed": (int, 42),
        "threads": (int, 1),
        "out": (str, None),
        "verbosity": (int, 0),
    },
    "campaign": {
        "count": (int, 1_000_000),
        "p_values": (list, [2.0, 2.5, 3.0, 5.0]),
        "dimensions": (list, [2, 3]),
        "lemmas": (list, None),
        "magnitude_range": (list, [1e-3, 1e3]),
        "near_pair_fraction": (_NUM, 0.1),
        "chunk_size": (int, 1 << 17),
        "c_star_scale": (_NUM, 1.0),
    },
    "problem": {
        "bounds": (list, [1.0, 2.0, 0.0, 1.0]),
        "n": (list, [16, 32, 64]),
        "diagonal": (str, "ne"),
        "p": (_NUM, 2.0),
        "rhs": (dict, {"kind": "manufactured"}),
        "boundary": (dict, {"kind": "manufactured"}),
        "exact": (str, None),
    },
    "solver": {
        "tolerance": (_NUM, 1e-8),
        "max_inner": (int, 50_000),
        "max_outer": (int, 200),
        "eps_schedule": (list, []),
        "damping": (_NUM, 0.5),
        "outer_tolerance": (_NUM, None),
    },
    "compare": {
        "pairs": (int, 5),
        "amplitude": (_NUM, 0.2),
        "gap": (_NUM, 0.2),
        "shift": (_NUM, 0.0),
        "c_cmp": (_NUM, None),
    },
    "diagnostics": {
        "region": (list, None),
        "thresholds": (list, None),
        "beta": (_NUM, 0.0),
        "t_values": (list, None),
        "eps_floors": (list, [1e-2, 1e-4, 0.0]),
        "lattice": (int, 5),
        "riesz_alpha": (_NUM, 1.0),
        "riesz_s": (_NUM, 1.5),
        "riesz_m": (_NUM, 2.0),
        "riesz_constant": (bool, False),
    },
    "sobolev": {
        "t": (_NUM, 1.0),
        "gamma": (_NUM, 0.0),
        "q": (_NUM, 3.0),
        "weight": (str, "one"),
        "offset": (_NUM, 0.1),
        "lattice": (int, 5),
        "subsample": (int, 4),
    },
}

_RHS_KEYS = {
    "constant": {"kind", "value"},
    "manufactured": {"kind"},
    "separable": {"kind", "h", "g", "positive", "nonincreasing", "L", "M"},
}
_BOUNDARY_KEYS = {"kind", "expr", "a", "b", "c", "shift", "perturb"}
_PERTURB_KEYS = {"seed", "amplitude", "nonnegative"}


def _check_type(section, key, value, types):
    label = f"{section}.{key}" if section else key
    if types is _ANY:
        return
    if types is _NUM:
        ok = isinstance(value, _NUM) and not isinstance(value, bool) and math.isfinite(value)
    elif types is int:
        ok = isinstance(value, int) and not isinstance(value, bool)
    else:
        ok = isinstance(value, types)
    if not ok:
        raise ConfigError(f"{label}: expected {getattr(types, '__name__', 'number')}, got {value!r}")


def _check_table(name, table, allowed):
    if not isinstance(table, dict):
        raise ConfigError(f"{name} must be a table")
    extra = set(table) - set(allowed)
    if extra:
        raise ConfigError(f"unknown key(s) in {name}: {', '.join(sorted(extra))}")


def _check_nested(cfg):
    prob = cfg.get("problem", {})
    rhs = prob.get("rhs")
    if rhs is not None:
        kind = rhs.get("kind") if isinstance(rhs, dict) else None
        if kind not in _RHS_KEYS:
            raise ConfigError(f"problem.rhs.kind must be one of {sorted(_RHS_KEYS)}, got {kind!r}")
        _check_table("problem.rhs", rhs, _RHS_KEYS[kind])
    bnd = prob.get("boundary")
    if bnd is not None:
        _check_table("problem.boundary", bnd, _BOUNDARY_KEYS)
        if "perturb" in bnd:
            _check_table("problem.boundary.perturb", bnd["perturb"], _PERTURB_KEYS)


def parse_config(data):
    """Validate a parsed TOML mapping and return it with defaults filled in."""
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a table")
    sections = set(SCHEMA) - {""}
    for key, value in data.items():
        if key in sections:
            _check_table(key, value, SCHEMA[key])
            for k, v in value.items():
                _check_type(key, k, v, SCHEMA[key][k][0])
        elif key in SCHEMA[""]:
            _check_type("", key, value, SCHEMA[""][key][0])
        else:
            raise ConfigError(f"unknown top-level key or section: {key}")
    _check_nested(data)
    return resolve(data)


def resolve(data):
    out = {}
    for key, (_, default) in SCHEMA[""].items():
        out[key] = data.get(key, default)
    for section, keys in SCHEMA.items():
        if not section:
            continue
        given = data.get(section, {})
        out[section] = {k: copy.deepcopy(given.get(k, d)) for k, (_, d) in keys.items()}
    if out["campaign"]["count"] < 1:
        raise ConfigError("campaign.count must be >= 1")
    if out["threads"] < 1:
        raise ConfigError("threads must be >= 1")
    if any(not isinstance(n, int) or n < 2 for n in out["problem"]["n"]) or not out["problem"]["n"]:
        raise ConfigError("problem.n must be a nonempty list of integers >= 2")
    if len(out["problem"]["bounds"]) != 4:
        raise ConfigError("problem.bounds must have four entries [x0, x1, y0, y1]")
    return out


def load_config(path=None):
    """Read and validate a TOML file; ``None`` gives the defaults."""
    if path is None:
        return resolve({})
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from exc
    return parse_config(data)

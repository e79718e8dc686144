"""Run configuration: defaults, strict YAML merging and provenance."""

from __future__ import annotations

import copy
import hashlib
import json

import yaml

from . import __version__
from .exceptions import ConfigError

# Every recognised key with its default. ``None`` marks keys that are
# optional and have no default value.
DEFAULTS = {
    "seed": 0,
    "simulator": {
        "kind": "gp_draw",
        "phi2_sq": 10.0,
        "gamma": 0.5,
        "phi1_sq": 1.0,
        "a": 1.0,
        "l": 4.0,
        "sigma2": 1.0,
        "d": 1,
        "m": 1,
        "family": "gaussian",
        "nodes_per_dim": 101,
        "n_levels": 21,
        "t_max": 1.0,
        "amplitude": 0.05,
    },
    "cost": {"form": "power_single", "c": 2.0, "a": None, "a1": None, "a2": None, "b": None},
    "fidelity": {"t_lo": [0.25], "t_hi": [1.0]},
    "kernel": {
        "family": "gaussian",
        "exponents_l": None,
        "fixed_gamma": None,
        "gamma_bounds": [0.01, 0.99],
        "phi2_bounds": [1e-4, 1e4],
        "a_bounds": [1e-4, 1e4],
    },
    "trend": {"kind": "constant", "include_fidelity_trend": False},
    "budget": {"total": 128.0, "initial": 64.0},
    "design": {"kind": "mmed", "levels": 3, "stack_size": 4, "reps_per_loc": 2, "n": None},
    "fit": {"n_starts": 20, "refit_starts": 2, "max_iters": 200, "tol": 1e-6},
    "criterion": {"n_starts": 30, "n_screen": 256, "tol": 1e-8, "max_iters": 100},
    "al": {"refit_every": 1},
    "evaluation": {"n_test": 200},
    "single_fidelity": {"t": 0.25, "n": None},
    "benchmark": {
        "phi2_sq": [1.0, 10.0, 100.0],
        "gamma": [0.05, 0.5, 0.95],
        "sets": 3,
        "reps": 3,
        "methods": ["AL-LBM", "OS-LBM", "AL-BM", "OS-BM", "SF"],
        "fit_starts": 8,
        "refit_starts": 2,
        "criterion_starts": 8,
        "criterion_screen": 256,
        "refit_every": 1,
    },
    "data": {"path": None, "x_bounds": None, "t_scale": 1.0},
    "surface": {"nx": 100, "nt": 20, "design_budget": 64.0},
    "validate": {"draws": 200, "families": ["gaussian", "matern05", "matern15", "matern25"]},
}

# keys whose values are free-form mappings (not validated further)
_LEAF_DICTS: set = set()


def _merge(defaults, user, path, applied):
    out = {}
    if not isinstance(user, dict):
        raise ConfigError(f"section {'.'.join(path) or '<root>'} must be a mapping")
    unknown = set(user) - set(defaults)
    if unknown:
        where = ".".join(path) or "<root>"
        raise ConfigError(f"unknown configuration keys in {where}: {sorted(unknown)}")
    for key, dv in defaults.items():
        p = path + (key,)
        if key in user:
            uv = user[key]
            if isinstance(dv, dict) and key not in _LEAF_DICTS:
                out[key] = _merge(dv, uv if uv is not None else {}, p, applied)
            else:
                out[key] = uv
        else:
            if isinstance(dv, dict):
                out[key] = _merge(dv, {}, p, applied)
            else:
                out[key] = copy.deepcopy(dv)
                applied.append(".".join(p))
    return out


class RunConfig:
    """Effective configuration plus the list of keys that fell back to defaults."""

    def __init__(self, user: dict | None = None):
        self.user = copy.deepcopy(user or {})
        self.defaults_applied: list = []
        self.values = _merge(DEFAULTS, self.user, (), self.defaults_applied)

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        try:
            with open(path) as fh:
                data = yaml.safe_load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except yaml.YAMLError as exc:
            raise ConfigError(f"invalid YAML in {path}: {exc}") from exc
        return cls(data or {})

    def __getitem__(self, key):
        return self.values[key]

    def set_seed(self, seed):
        if seed is not None:
            self.values["seed"] = int(seed)
            if "seed" in self.defaults_applied:
                self.defaults_applied.remove("seed")

    def digest(self) -> str:
        blob = json.dumps(self.values, sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def provenance(self, extra=()) -> list:
        lines = [
            f"cfgp {__version__}",
            f"config_sha256 {self.digest()}",
            f"seed {self['seed']}",
            "defaults_applied " + (",".join(self.defaults_applied) if self.defaults_applied else "none"),
        ]
        lines.extend(extra)
        return lines


def header_text(lines) -> str:
    return "".join(f"# {line}\n" for line in lines)

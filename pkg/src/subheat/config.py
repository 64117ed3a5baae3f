"""Run configuration: JSON file, built-in defaults and SUBHEAT_ environment overrides."""

from __future__ import annotations

import copy
import hashlib
import json
import math
import os
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

ENV_PREFIX = "SUBHEAT_"

DEFAULT_CONFIG: dict = {
    "grid": {"dim": 3, "sizes": [16, 16, 16], "spacing": [0.0625, 0.0625, 0.0625], "max_points": 8192},
    "refinement": {"sizes": [24, 24, 24], "max_points": 13824, "enabled": True},
    "coefficient": {
        "kind": "shear",
        "params": {"amplitude": 0.3, "axes": [0, 1], "phase": 1.5707963267948966},
        "seed": 0,
    },
    "potential": {
        "kind": "spike",
        "params": {"center": [0.5, 0.5, 0.5], "width": 0.1, "height": 30.0, "background": 2.0},
        "seed": 0,
    },
    "positivity_coefficient": {"kind": "diagonal_cosine", "params": {"amplitude": 0.3}},
    "duhamel_potential": {"kind": "cosine", "params": {"mean": 1.0, "amplitude": 0.5, "axis": 0}, "seed": 0},
    "fractional": {
        "alpha_list": [0.3, 0.5, 0.7],
        "beta_list": [0.5, 1.5],
        "gamma": 0.25,
        "kappa": 0.2,
        "decay_alpha": 0.5,
        "decay_beta": 0.5,
        "carleson_alpha": 0.4,
        "carleson_beta": 0.5,
    },
    "sweeps": {
        "t_list": [0.01, 0.1, 1.0],
        "dual_path_t": [0.05, 0.2, 1.0],
        "gauss_t": [0.00390625, 0.0078125, 0.015625],
        "N_list": [1, 2, 4],
        "p_list": [1, 2, 4],
        "lp_t": [0.00390625, 0.0078125, 0.015625],
        "lp_alpha_w": [0.0, 0.05],
        "t_decay": 0.002,
        "cancel_t": [0.001, 0.08, 8],
        "duhamel_t": 0.2,
        "laplace_lambda_max": 20.0,
        "laplace_nodes": 33,
        "ball_family": {
            "positions": [[0.25, 0.25, 0.25], [0.5, 0.5, 0.5], [0.5, 0.5, 0.625]],
            "radii": [0.125, 0.25],
        },
        "probes": [[0.5, 0.5, 0.5], [0.5, 0.5, 0.625], [0.25, 0.25, 0.25]],
        "n_atoms": 9,
    },
    "tolerances": {
        "dual_path": 1e-5,
        "laplace": 1e-6,
        "closed_form": 1e-8,
        "weyl": 1e-4,
        "weyl_exact": 1e-9,
        "conservation": 1e-10,
        "negativity": 1e-12,
        "duhamel": 1e-6,
        "duhamel_scalar": 1e-8,
        "isometry": 1e-5,
        "ratio_windows": {
            "refinement": [0.5, 2.0],
            "gauss_rate_factor": 1.5,
            "slope": 0.3,
            "lp_spread": 4.0,
            "atom_spread": 8.0,
            "area_l2_spread": 3.0,
            "equivalence": [0.1, 10.0],
            "band_stability": 0.5,
        },
    },
    "output_dir": "subheat_out",
    "cache_dir": None,
    "seed": 0,
    "jobs": 1,
}


class ConfigError(ValueError):
    """Malformed configuration; ``line`` points into the source file when known."""

    def __init__(self, message: str, source: Optional[str] = None, line: Optional[int] = None):
        self.source, self.line = source, line
        where = f"{source}:{line}: " if source and line else (f"{source}: " if source else "")
        super().__init__(where + message)


def _merge(base: dict, update: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in update.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict) and k not in ("params",):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _line_of(text: Optional[str], key: str) -> Optional[int]:
    if not text:
        return None
    m = re.search(r'"%s"\s*:' % re.escape(key), text)
    return text.count("\n", 0, m.start()) + 1 if m else None


@dataclass
class RunConfig:
    data: dict
    source: Optional[str] = None
    text: Optional[str] = field(default=None, repr=False)

    def __getitem__(self, key):
        return self.data[key]

    @property
    def output_dir(self) -> Path:
        return Path(self.data["output_dir"])

    @property
    def cache_dir(self) -> Optional[Path]:
        c = self.data.get("cache_dir")
        return Path(c).expanduser() if c else None

    @property
    def seed(self) -> int:
        return int(self.data["seed"])

    @property
    def jobs(self) -> int:
        return int(self.data["jobs"])

    @property
    def tol(self) -> dict:
        return self.data["tolerances"]

    @property
    def windows(self) -> dict:
        return self.data["tolerances"]["ratio_windows"]

    def config_hash(self) -> str:
        """Hash of the settings that shape results (paths and job count excluded)."""
        d = {k: v for k, v in self.data.items() if k not in ("output_dir", "cache_dir", "jobs")}
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]

    def to_json(self) -> dict:
        return copy.deepcopy(self.data)

    # -- validation ------------------------------------------------------

    def _fail(self, key: str, message: str):
        raise ConfigError(message, self.source, _line_of(self.text, key))

    def validate(self) -> "RunConfig":
        d = self.data
        for key in sorted(set(d) - set(DEFAULT_CONFIG)):
            self._fail(key, f"unknown configuration key {key!r}")
        for section in ("grid", "coefficient", "potential", "fractional", "sweeps", "tolerances"):
            if not isinstance(d.get(section), dict):
                self._fail(section, f"section {section!r} must be an object")
        g = d["grid"]
        dim = g.get("dim")
        if not isinstance(dim, int) or not 1 <= dim <= 3:
            self._fail("dim", "grid.dim must be 1, 2 or 3")
        for key in ("sizes", "spacing"):
            v = g.get(key)
            if not isinstance(v, list) or len(v) != dim:
                self._fail(key, f"grid.{key} needs {dim} entries")
        if any(not isinstance(s, int) or s < 4 for s in g["sizes"]):
            self._fail("sizes", "grid sizes must be integers >= 4")
        if any(not _is_number(h) or h <= 0 for h in g["spacing"]):
            self._fail("spacing", "grid spacing must be positive")
        ref = d.get("refinement") or {}
        if ref.get("enabled", False):
            if not isinstance(ref.get("sizes"), list) or len(ref["sizes"]) != dim:
                self._fail("refinement", f"refinement.sizes needs {dim} entries")
        for section in ("coefficient", "potential", "duhamel_potential"):
            sec = d.get(section)
            if sec is None:
                continue
            if not isinstance(sec.get("kind"), str):
                self._fail(section, f"{section}.kind must be a string")
            path = (sec.get("params") or {}).get("path")
            if sec["kind"] == "file" and (path is None or not Path(path).exists()):
                self._fail("path", f"{section} file {path!r} does not exist")
        fr = d["fractional"]
        for key in ("alpha_list", "beta_list"):
            v = fr.get(key)
            if not isinstance(v, list) or not v:
                self._fail(key, f"fractional.{key} must be a nonempty list")
        if any(not _is_number(a) or not 0 < a < 1 for a in fr["alpha_list"]):
            self._fail("alpha_list", "alpha values must lie in (0, 1)")
        if any(not _is_number(b) or b <= 0 for b in fr["beta_list"]):
            self._fail("beta_list", "beta values must be positive")
        sw = d["sweeps"]
        for key in ("t_list", "N_list", "p_list"):
            v = sw.get(key)
            if not isinstance(v, list) or not v:
                self._fail(key, f"sweeps.{key} must be a nonempty list")
        if any(not _is_number(t) or t <= 0 for t in sw["t_list"]):
            self._fail("t_list", "times must be positive")
        bf = sw.get("ball_family")
        if not isinstance(bf, dict) or not bf.get("positions") or not bf.get("radii"):
            self._fail("ball_family", "sweeps.ball_family needs nonempty positions and radii")
        self._check_tolerances(d["tolerances"], "tolerances")
        if not isinstance(d.get("seed"), int) or d["seed"] < 0:
            self._fail("seed", "seed must be a nonnegative integer")
        if not isinstance(d.get("jobs"), int) or d["jobs"] < 1:
            self._fail("jobs", "jobs must be a positive integer")
        return self

    def _check_tolerances(self, tol: dict, prefix: str):
        for k, v in tol.items():
            if isinstance(v, dict):
                self._check_tolerances(v, f"{prefix}.{k}")
            elif isinstance(v, list):
                if not v or any(not _is_number(x) or x <= 0 for x in v):
                    self._fail(k, f"{prefix}.{k} must hold positive numbers")
            elif not _is_number(v) or v <= 0:
                self._fail(k, f"{prefix}.{k} must be a positive number")


def _is_number(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)


def _parse_env_value(raw: str) -> Any:
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def env_overrides(environ=None) -> dict:
    """SUBHEAT_SEED=3, SUBHEAT_TOLERANCES__DUAL_PATH=1e-12, ... as a nested update dict.

    Double underscores separate nesting levels; values are parsed as JSON
    when possible.  SUBHEAT_CONFIG is consumed by the CLI, not here; the
    short names SUBHEAT_OUTPUT and SUBHEAT_CACHE map to the path keys.
    """
    environ = os.environ if environ is None else environ
    aliases = {"OUTPUT": "output_dir", "CACHE": "cache_dir"}
    out: dict = {}
    for name in sorted(environ):
        if not name.startswith(ENV_PREFIX) or name == ENV_PREFIX + "CONFIG":
            continue
        key = name[len(ENV_PREFIX):]
        parts = [aliases.get(key, key.lower())] if "__" not in key else [p.lower() for p in key.split("__")]
        node = out
        for p in parts[:-1]:
            node = node.setdefault(p, {})
        node[parts[-1]] = _parse_env_value(environ[name])
    return out


def _match_case(update: dict, base: dict) -> dict:
    """Rename lower-cased environment keys to the spelling used in ``base`` (N_list, ...)."""
    out = {}
    for k, v in update.items():
        key = next((b for b in base if b.lower() == k.lower()), k) if isinstance(base, dict) else k
        sub = base.get(key) if isinstance(base, dict) else None
        out[key] = _match_case(v, sub) if isinstance(v, dict) and isinstance(sub, dict) else v
    return out


def load_config(path=None, overrides: Optional[dict] = None, environ=None) -> RunConfig:
    """Defaults, then the JSON file, then environment, then explicit overrides; validated."""
    data = copy.deepcopy(DEFAULT_CONFIG)
    text, source = None, None
    if path is not None:
        source = str(path)
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc.strerror}", source) from exc
        try:
            user = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc.msg} (column {exc.colno})", source, exc.lineno) from exc
        if not isinstance(user, dict):
            raise ConfigError("top level must be a JSON object", source, 1)
        data = _merge(data, user)
    data = _merge(data, _match_case(env_overrides(environ), data))
    if overrides:
        data = _merge(data, {k: v for k, v in overrides.items() if v is not None})
    return RunConfig(data, source, text).validate()

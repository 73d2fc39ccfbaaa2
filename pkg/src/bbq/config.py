"""
Run configuration: YAML input, strict schema validation, canonical echo.

Example::

    grid:   {n: 128, L: 6.283185307179586}
    model:  {nu: 0.2, lambda: 0.2, N: null}
    stepper: {dt: 0.01, t_end: 5.0, sample_every: 10}
    init:   {shape: random_band, seed: 1,
             target_grad_u_besov: 0.1, target_grad_theta_besov: 0.02}
    diagnostics: {q_list: [2, 4, inf], s_list: [1, 3], c0_override: null}
    sweep:  {param: amplitude, values: [0.25, 0.5, 1.0, 2.0]}
    output: {dir: out, snapshot_every: 0}

Relative ``output.dir`` and ``init.path`` are resolved against the
directory of the configuration file.
"""

from __future__ import annotations

import copy
import math
import os
from dataclasses import dataclass, replace
from typing import Any, Dict, Optional, Tuple

import yaml

from .diagnostics import DEFAULT_Q_LIST, DEFAULT_S_LIST
from .errors import ConfigError
from .solver import InitialDataSpec, ModelParams, StepperConfig
from .spectral import GridSpec

SWEEP_PARAMS = ("nu", "lambda", "amplitude")

_SCHEMA: Dict[str, Dict[str, Tuple[str, bool, Any]]] = {
    # key -> (type, required, default)
    "grid": {"n": ("int", True, None), "L": ("float", False, 2.0 * math.pi)},
    "model": {"nu": ("float", True, None), "lambda": ("float", True, None),
              "N": ("float?", False, None)},
    "stepper": {"dt": ("float", True, None), "t_end": ("float", True, None),
                "sample_every": ("int", False, 1)},
    "init": {"shape": ("str", True, None), "seed": ("int", False, 0),
             "target_grad_u_besov": ("float", True, None),
             "target_grad_theta_besov": ("float", True, None),
             "band": ("pair", False, [1.0, 6.0]), "slope": ("float", False, 0.0),
             "path": ("str?", False, None)},
    "diagnostics": {"q_list": ("qlist", False, list(DEFAULT_Q_LIST)),
                    "s_list": ("flist", False, list(DEFAULT_S_LIST)),
                    "c0_override": ("float?", False, None)},
    "sweep": {"param": ("str", True, None), "values": ("flist", True, None)},
    "output": {"dir": ("str", True, None), "snapshot_every": ("int", False, 0)},
}
_REQUIRED_SECTIONS = ("grid", "model", "stepper", "init", "output")


def _number(value, where, allow_inf=False):
    if isinstance(value, bool):
        raise ConfigError(f"{where}: expected a number, got a boolean")
    if isinstance(value, str):
        if allow_inf and value.strip().lower() in ("inf", "infinity", ".inf"):
            return math.inf
        raise ConfigError(f"{where}: expected a number, got {value!r}")
    if not isinstance(value, (int, float)):
        raise ConfigError(f"{where}: expected a number, got {type(value).__name__}")
    v = float(value)
    if math.isnan(v) or (math.isinf(v) and not allow_inf):
        raise ConfigError(f"{where}: expected a finite number, got {value!r}")
    return v


def _coerce(kind, value, where):
    if kind.endswith("?"):
        if value is None:
            return None
        kind = kind[:-1]
    if kind == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where}: expected an integer, got {value!r}")
        return int(value)
    if kind == "float":
        return _number(value, where)
    if kind == "str":
        if not isinstance(value, str) or not value:
            raise ConfigError(f"{where}: expected a non-empty string, got {value!r}")
        return value
    if kind in ("flist", "qlist", "pair"):
        if not isinstance(value, list):
            raise ConfigError(f"{where}: expected a list, got {value!r}")
        out = [_number(v, f"{where}[{i}]", allow_inf=(kind == "qlist"))
               for i, v in enumerate(value)]
        if kind == "pair" and len(out) != 2:
            raise ConfigError(f"{where}: expected two entries, got {len(out)}")
        return out
    raise AssertionError(kind)


@dataclass(frozen=True)
class RunConfig:
    """Validated configuration; ``data`` holds the canonical nested dict."""

    data: Dict[str, Dict[str, Any]]
    base_dir: str = "."

    # -- construction -------------------------------------------------------

    @classmethod
    def from_dict(cls, raw: Any, base_dir: str = ".", require_sweep: bool = False) -> "RunConfig":
        if not isinstance(raw, dict):
            raise ConfigError("configuration must be a mapping of sections")
        unknown = sorted(set(raw) - set(_SCHEMA))
        if unknown:
            raise ConfigError(f"unknown section(s): {', '.join(map(str, unknown))}")
        data: Dict[str, Dict[str, Any]] = {}
        for section, keys in _SCHEMA.items():
            if section not in raw:
                if section in _REQUIRED_SECTIONS or (section == "sweep" and require_sweep):
                    raise ConfigError(f"missing section '{section}'")
                if section == "sweep":
                    continue
                body = {}
            else:
                body = raw[section]
                if body is None:
                    body = {}
                if not isinstance(body, dict):
                    raise ConfigError(f"section '{section}' must be a mapping")
            bad = sorted(set(body) - set(keys))
            if bad:
                raise ConfigError(f"unknown key(s) in '{section}': {', '.join(map(str, bad))}")
            out = {}
            for key, (kind, required, default) in keys.items():
                where = f"{section}.{key}"
                if key in body:
                    out[key] = _coerce(kind, body[key], where)
                elif required:
                    raise ConfigError(f"missing required key '{where}'")
                else:
                    out[key] = copy.deepcopy(default)
            data[section] = out
        cfg = cls(data, os.path.abspath(base_dir))
        cfg._validate(require_sweep)
        return cfg

    @classmethod
    def load(cls, path: str, require_sweep: bool = False) -> "RunConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                raw = yaml.safe_load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: invalid YAML: {exc}") from exc
        return cls.from_dict(raw, os.path.dirname(os.path.abspath(path)), require_sweep)

    def _validate(self, require_sweep):
        # building the typed objects runs their own invariant checks
        try:
            grid = self.grid()
            self.params()
            stepper = self.stepper()
            self.init_spec()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if stepper.n_samples < 3:
            raise ConfigError(
                "t_end/(dt*sample_every) must be at least 2 so that the run has 3 samples "
                "(time derivatives need them)"
            )
        N = self.data["model"]["N"]
        if N is not None and N > grid.dealias_cutoff:
            raise ConfigError(
                f"model.N={N:g} exceeds the dealiasing cutoff {grid.dealias_cutoff:g}"
            )
        diag = self.data["diagnostics"]
        for q in diag["q_list"]:
            if not q >= 2.0:
                raise ConfigError(f"diagnostics.q_list entries must lie in [2, inf], got {q}")
        for s in diag["s_list"]:
            if not s >= 0.0:
                raise ConfigError(f"diagnostics.s_list entries must be >= 0, got {s}")
        c0 = diag["c0_override"]
        if c0 is not None and not c0 > 0:
            raise ConfigError("diagnostics.c0_override must be positive")
        if self.data["output"]["snapshot_every"] < 0:
            raise ConfigError("output.snapshot_every must be >= 0")
        sweep = self.data.get("sweep")
        if sweep is not None:
            if sweep["param"] not in SWEEP_PARAMS:
                raise ConfigError(
                    f"sweep.param must be one of {', '.join(SWEEP_PARAMS)}, got {sweep['param']!r}"
                )
            if not sweep["values"]:
                raise ConfigError("sweep.values must be nonempty")
            if any(not v > 0 for v in sweep["values"]):
                raise ConfigError("sweep.values must be positive")
        elif require_sweep:
            raise ConfigError("missing section 'sweep'")
        _check_writable(self.output_dir)

    # -- typed views ----------------------------------------------------------

    def grid(self) -> GridSpec:
        g = self.data["grid"]
        return GridSpec(g["n"], g["L"])

    def params(self) -> ModelParams:
        m = self.data["model"]
        return ModelParams(m["nu"], m["lambda"], m["N"])

    def stepper(self) -> StepperConfig:
        s = self.data["stepper"]
        return StepperConfig(dt=s["dt"], t_end=s["t_end"], sample_every=s["sample_every"])

    def init_spec(self) -> InitialDataSpec:
        i = self.data["init"]
        path = i["path"]
        if path is not None and not os.path.isabs(path):
            path = os.path.join(self.base_dir, path)
        return InitialDataSpec(i["shape"], i["target_grad_u_besov"],
                               i["target_grad_theta_besov"], seed=i["seed"],
                               band=tuple(i["band"]), path=path, slope=i["slope"])

    @property
    def q_list(self):
        return tuple(self.data["diagnostics"]["q_list"])

    @property
    def s_list(self):
        return tuple(self.data["diagnostics"]["s_list"])

    @property
    def c0_override(self) -> Optional[float]:
        return self.data["diagnostics"]["c0_override"]

    @property
    def snapshot_every(self) -> int:
        return self.data["output"]["snapshot_every"]

    @property
    def output_dir(self) -> str:
        d = self.data["output"]["dir"]
        return d if os.path.isabs(d) else os.path.normpath(os.path.join(self.base_dir, d))

    @property
    def sweep(self) -> Optional[Dict[str, Any]]:
        return self.data.get("sweep")

    # -- derived configs ------------------------------------------------------

    def with_values(self, **changes) -> "RunConfig":
        """Copy with ``section.key`` overrides given as ``section__key=value``."""
        data = copy.deepcopy(self.data)
        for name, value in changes.items():
            section, key = name.split("__", 1)
            data.setdefault(section, {})[key] = value
        return replace(self, data=data)

    def canonical(self) -> Dict[str, Any]:
        """Fully populated config with sorted keys and inf spelled "inf"."""
        out = copy.deepcopy(self.data)
        out["diagnostics"]["q_list"] = [
            "inf" if math.isinf(q) else q for q in out["diagnostics"]["q_list"]
        ]
        return out


def _check_writable(path: str) -> None:
    probe = os.path.abspath(path)
    while not os.path.exists(probe):
        parent = os.path.dirname(probe)
        if parent == probe:
            break
        probe = parent
    if not os.path.isdir(probe):
        raise ConfigError(f"output.dir {path!r} is below a non-directory {probe!r}")
    if not os.access(probe, os.W_OK):
        raise ConfigError(f"output.dir {path!r} is not writable")


def from_canonical(data: Dict[str, Any], base_dir: str = ".") -> RunConfig:
    """Rebuild a RunConfig from its canonical echo (config.json)."""
    return RunConfig.from_dict(data, base_dir)

"""Experiment configuration: YAML file with explicit units in the key names.

A user file is deep-merged onto :data:`DEFAULT_CONFIG` (mappings merge, lists
and scalars replace), then validated. Every error names the offending field
path and, when the value came from a file, its line number.
"""
from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from .errors import ConfigError, DomainError
from .estimators.calibration import METHODS, MODELS
from .physics import SITE_A, SITE_B, SiteLevelStructure, ZeemanConfig
from .spin import ProbeSequence, RelaxationParams
from .synth import (
    GRID_SPAN_NM,
    DetectionFilter,
    LineShapeParams,
    QuenchModel,
    SynthesisConfig,
    ZeemanLineParams,
)

SWEEP_T_SPAN_K = (1.2, 295.0)
# keys that steer execution but not the produced data
NON_OUTPUT_KEYS = ("output_dir", "workers")

_LOW_T = [2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 10.0, 12.0, 15.0, 18.0, 20.0, 25.0, 30.0, 35.0, 40.0, 45.0,
          50.0, 60.0, 70.0, 80.0, 90.0, 98.0, 103.0, 110.0, 120.0, 130.0, 140.0, 150.0, 160.0, 174.0,
          180.0, 190.0, 200.0]

DEFAULT_SWEEP = {
    "name": "sweep",
    "temperatures_K": [],
    "fields_T": [0.0],
    "filter": {"kind": "longpass", "step_center_nm": 1551.3, "step_width_nm": 1.5},
    "grid": {"start_nm": 1475.0, "stop_nm": 1570.0, "step_nm": 0.05},
    "averages": 500,
    "noise": True,
}

DEFAULT_CONFIG = {
    "sample": "FZ",
    "seed": 20231,
    "output_dir": "erthermo_run",
    "workers": 1,
    "sites": [SITE_A.to_dict(), SITE_B.to_dict()],
    "synthesis": {
        "scale_counts": 145.0,
        "ion_density_scale": 1.0,
        "dark_counts": 0.5,
        "site_weights": [1.0, 1.0],
        "strengths": None,
        "branching": None,
        "lineshape": {
            "fwhm0_nm": 0.3,
            "fwhm_linear_nm_per_K": 1e-3,
            "fwhm_quadratic_nm_per_K2": 4e-5,
            "shift_linear_nm_per_K": 1e-4,
            "shift_quadratic_nm_per_K2": 2e-6,
        },
        "quench": {"activation_energy_K": 2000.0, "prefactor": 1e5, "radiative_rate_per_s": 5e3},
        "spin_line_fwhm_GHz": 5.0,
    },
    "zeeman": {
        "g_eff_ground_GHz_per_T": 116.0,
        "g_eff_excited_GHz_per_T": 81.2,
        "g_eff_uncertainty_GHz_per_T": 13.0,
    },
    "spin_dynamics": {
        "direct_coeff_per_s_T5": 400.0,
        "orbach_coeff_per_s": 1.5e9,
        "orbach_gap_K": 126.0,
        "direct_thermal_factor": True,
        "pulse_duration_s": 200e-6,
        "repetition_period_s": 4e-3,
        "pump_rate_per_s": 50.0,
        "max_repetitions": 1_000_000,
        "probed_state": "down",
    },
    "sweeps": [
        {**DEFAULT_SWEEP, "name": "quench", "temperatures_K": [float(t) for t in range(180, 300, 5)],
         "filter": {"kind": "none", "step_center_nm": 1551.3, "step_width_nm": 1.5},
         "grid": {"start_nm": 1515.0, "stop_nm": 1555.0, "step_nm": 0.1}},
        {**DEFAULT_SWEEP, "name": "lowT", "temperatures_K": list(_LOW_T),
         "grid": {"start_nm": 1485.0, "stop_nm": 1530.0, "step_nm": 0.05}},
        {**DEFAULT_SWEEP, "name": "ratio_3T", "temperatures_K": [2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 10.0, 12.0, 15.0],
         "fields_T": [3.0], "averages": 750,
         "grid": {"start_nm": 1537.0, "stop_nm": 1538.6, "step_nm": 0.004}},
        {**DEFAULT_SWEEP, "name": "ratio_1p5T", "temperatures_K": [1.5, 2.0, 2.5, 3.0, 4.0, 5.0, 6.0],
         "fields_T": [1.5], "averages": 750,
         "grid": {"start_nm": 1537.2, "stop_nm": 1538.4, "step_nm": 0.004}},
    ],
    "probes": list(METHODS),
    "analysis": {
        "normalize_integration_s": None,
        "quench": {"sweep": "quench", "window_nm": [1520.0, 1550.0], "model": "exponential_offset",
                   "T_range_K": [180.0, 295.0], "points": 75000},
        "filtered": {"sweep": "lowT", "window_nm": [1505.0, 1525.0], "single_nm": 1519.0,
                     "model": "exponential_piecewise", "split_K": [98.0, 103.0],
                     "T_range_K": [18.0, 174.0], "points": 100000, "single_points": 125},
        "peak": {"sweep": "lowT", "window_nm": [1488.6, 1492.6], "amplitude_model": "cubic_spline",
                 "fwhm_model": "poly2", "center_model": "poly2", "smoothing": 0.0,
                 "T_range_K": [2.0, 200.0], "points": 40000},
        "ratiometric": {"sweeps": ["ratio_3T", "ratio_1p5T"], "half_window_nm": 0.12, "points": 160000},
    },
}


# -- diagnostics ---------------------------------------------------------------


def _fmt_path(path) -> str:
    out = ""
    for p in path:
        out += f"[{p}]" if isinstance(p, int) else (f".{p}" if out else str(p))
    return out


def _node_line(node, path):
    """1-based line of the YAML node at ``path`` (or its deepest present ancestor)."""
    if node is None:
        return None
    line = node.start_mark.line + 1
    for key in path:
        if isinstance(node, yaml.MappingNode) and isinstance(key, str):
            nxt = next((v for k, v in node.value if k.value == key), None)
        elif isinstance(node, yaml.SequenceNode) and isinstance(key, int) and key < len(node.value):
            nxt = node.value[key]
        else:
            nxt = None
        if nxt is None:
            break
        node = nxt
        line = node.start_mark.line + 1
    return line


class _Checker:
    def __init__(self, node=None, source=None):
        self.node, self.source = node, source

    def fail(self, path, msg):
        line = _node_line(self.node, path)
        where = _fmt_path(path) or "<root>"
        loc = f"{self.source}:{line}: " if (self.source and line) else (f"line {line}: " if line else "")
        raise ConfigError(f"{loc}{where}: {msg}")

    def number(self, d, path, key, lo=None, hi=None, strict_lo=False, integer=False):
        v = d[key]
        p = path + [key]
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            self.fail(p, f"expected a number, got {v!r}")
        if integer and int(v) != v:
            self.fail(p, f"expected an integer, got {v!r}")
        if not np.isfinite(v):
            self.fail(p, "must be finite")
        if lo is not None and (v <= lo if strict_lo else v < lo):
            self.fail(p, f"must be {'>' if strict_lo else '>='} {lo}, got {v}")
        if hi is not None and v > hi:
            self.fail(p, f"must be <= {hi}, got {v}")
        return v

    def keys(self, d, path, allowed):
        if not isinstance(d, dict):
            self.fail(path, "expected a mapping")
        extra = sorted(set(d) - set(allowed))
        if extra:
            self.fail(path + [extra[0]], f"unknown key (allowed: {', '.join(sorted(allowed))})")

    def wrap(self, path, fn):
        try:
            return fn()
        except (DomainError, TypeError, KeyError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            self.fail(path, str(exc))


def _merge(base, over):
    if isinstance(base, dict) and isinstance(over, dict):
        out = dict(base)
        for k, v in over.items():
            out[k] = _merge(base[k], v) if k in base else copy.deepcopy(v)
        return out
    return copy.deepcopy(over)


def _normalize(x):
    """Plain JSON-compatible types; ints stay ints, numpy scalars become floats."""
    if isinstance(x, dict):
        return {str(k): _normalize(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_normalize(v) for v in x]
    if isinstance(x, np.ndarray):
        return _normalize(x.tolist())
    if isinstance(x, np.generic):
        return x.item()
    return x


# -- config object ---------------------------------------------------------------


@dataclass
class SweepSpec:
    name: str
    temperatures: list
    fields: list
    filter: DetectionFilter
    grid: np.ndarray
    averages: int
    noise: bool


class ExperimentConfig:
    """Validated experiment description.

    ``data`` holds the full, defaults-merged document; the builder methods turn
    its sections into the domain objects of the other modules.
    """

    def __init__(self, data: dict, node=None, source=None):
        self.data = _normalize(data)
        self._validate(_Checker(node, source))

    # -- construction -----------------------------------------------------

    @classmethod
    def from_dict(cls, user: dict | None = None, *, node=None, source=None) -> "ExperimentConfig":
        user = user or {}
        chk = _Checker(node, source)
        chk.keys(user, [], DEFAULT_CONFIG)
        merged = _merge(DEFAULT_CONFIG, user)
        if "sweeps" in user:
            if not isinstance(user["sweeps"], list):
                chk.fail(["sweeps"], "expected a list of sweep blocks")
            merged["sweeps"] = []
            for i, sw in enumerate(user["sweeps"]):
                chk.keys(sw, ["sweeps", i], DEFAULT_SWEEP)
                merged["sweeps"].append(_merge(DEFAULT_SWEEP, sw))
        return cls(merged, node, source)

    @classmethod
    def from_yaml(cls, text: str, source: str | None = None) -> "ExperimentConfig":
        try:
            node = yaml.compose(text, Loader=yaml.SafeLoader)
            user = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            mark = getattr(exc, "problem_mark", None)
            loc = f"{source or '<config>'}:{mark.line + 1}: " if mark else ""
            raise ConfigError(f"{loc}YAML syntax error: {getattr(exc, 'problem', exc)}") from None
        if user is not None and not isinstance(user, dict):
            raise ConfigError(f"{source or '<config>'}: top level must be a mapping")
        return cls.from_dict(user, node=node, source=source)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror or exc}") from None
        return cls.from_yaml(text, source=str(path))

    def to_dict(self) -> dict:
        return copy.deepcopy(self.data)

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.data, sort_keys=True, default_flow_style=None, width=100)

    def replace(self, **top) -> "ExperimentConfig":
        return ExperimentConfig({**self.data, **top})

    def config_hash(self) -> str:
        """sha256 of the canonical JSON of every field that affects outputs."""
        d = {k: v for k, v in self.data.items() if k not in NON_OUTPUT_KEYS}
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"), allow_nan=False)
        return hashlib.sha256(blob.encode()).hexdigest()

    def __eq__(self, other):
        return isinstance(other, ExperimentConfig) and self.data == other.data

    # -- accessors ---------------------------------------------------------

    @property
    def seed(self):
        return self.data["seed"]

    @property
    def workers(self) -> int:
        return int(self.data["workers"])

    @property
    def output_dir(self) -> str:
        return self.data["output_dir"]

    @property
    def probes(self) -> list:
        return list(self.data["probes"])

    @property
    def analysis(self) -> dict:
        return copy.deepcopy(self.data["analysis"])

    def sites(self) -> list[SiteLevelStructure]:
        return [SiteLevelStructure.from_dict(s) for s in self.data["sites"]]

    def synthesis(self, sweep: SweepSpec | None = None) -> SynthesisConfig:
        s = self.data["synthesis"]
        ls, q = s["lineshape"], s["quench"]
        return SynthesisConfig(
            sites=self.sites(),
            lineshape=LineShapeParams(
                ls["fwhm0_nm"],
                (ls["fwhm_linear_nm_per_K"], ls["fwhm_quadratic_nm_per_K2"]),
                (ls["shift_linear_nm_per_K"], ls["shift_quadratic_nm_per_K2"]),
            ),
            quench=QuenchModel(q["activation_energy_K"], q["prefactor"], q["radiative_rate_per_s"]),
            filter=sweep.filter if sweep is not None else DetectionFilter(),
            zeeman_line=ZeemanLineParams(s["spin_line_fwhm_GHz"]),
            strengths=s["strengths"],
            branching=s["branching"],
            site_weights=s["site_weights"],
            scale=s["scale_counts"],
            ion_density_scale=s["ion_density_scale"],
            dark_counts=s["dark_counts"],
            n_averages=sweep.averages if sweep is not None else 500,
        )

    def zeeman(self, field_T: float) -> ZeemanConfig:
        z = self.data["zeeman"]
        return ZeemanConfig(
            field_T, z["g_eff_ground_GHz_per_T"], z["g_eff_excited_GHz_per_T"], z["g_eff_uncertainty_GHz_per_T"]
        )

    def relaxation(self) -> RelaxationParams:
        d = self.data["spin_dynamics"]
        return RelaxationParams(
            d["direct_coeff_per_s_T5"], d["orbach_coeff_per_s"], d["orbach_gap_K"], d["direct_thermal_factor"]
        )

    def probe_sequence(self) -> ProbeSequence:
        d = self.data["spin_dynamics"]
        return ProbeSequence(d["pulse_duration_s"], d["repetition_period_s"], d["pump_rate_per_s"], d["max_repetitions"])

    @property
    def probed_state(self) -> str:
        return self.data["spin_dynamics"]["probed_state"]

    def sweeps(self) -> list[SweepSpec]:
        out = []
        for sw in self.data["sweeps"]:
            g = sw["grid"]
            n = int(round((g["stop_nm"] - g["start_nm"]) / g["step_nm"])) + 1
            f = sw["filter"]
            out.append(
                SweepSpec(
                    sw["name"],
                    [float(t) for t in sw["temperatures_K"]],
                    [float(b) for b in sw["fields_T"]],
                    DetectionFilter(f["kind"], f["step_center_nm"], f["step_width_nm"]),
                    g["start_nm"] + g["step_nm"] * np.arange(n),
                    int(sw["averages"]),
                    bool(sw["noise"]),
                )
            )
        return out

    # -- validation ----------------------------------------------------------

    def _validate(self, chk: _Checker):
        d = self.data
        chk.keys(d, [], DEFAULT_CONFIG)
        if d["sample"] not in ("FZ", "CVD"):
            chk.fail(["sample"], f"must be 'FZ' or 'CVD', got {d['sample']!r}")
        if d["seed"] is not None:
            chk.number(d, [], "seed", lo=0, integer=True)
        chk.number(d, [], "workers", lo=1, integer=True)
        if not isinstance(d["output_dir"], str) or not d["output_dir"]:
            chk.fail(["output_dir"], "must be a non-empty path string")

        if not isinstance(d["sites"], list) or not d["sites"]:
            chk.fail(["sites"], "need at least one site table")
        for i, s in enumerate(d["sites"]):
            chk.keys(s, ["sites", i], SITE_A.to_dict())
            chk.wrap(["sites", i], lambda s=s: SiteLevelStructure.from_dict(s))

        syn = d["synthesis"]
        chk.keys(syn, ["synthesis"], DEFAULT_CONFIG["synthesis"])
        chk.keys(syn["lineshape"], ["synthesis", "lineshape"], DEFAULT_CONFIG["synthesis"]["lineshape"])
        chk.keys(syn["quench"], ["synthesis", "quench"], DEFAULT_CONFIG["synthesis"]["quench"])
        for k in ("scale_counts", "ion_density_scale", "dark_counts"):
            chk.number(syn, ["synthesis"], k, lo=0)
        chk.number(syn, ["synthesis"], "spin_line_fwhm_GHz", lo=0, strict_lo=True)
        for k in syn["quench"]:
            chk.number(syn["quench"], ["synthesis", "quench"], k, lo=0)
        for k in syn["lineshape"]:
            chk.number(syn["lineshape"], ["synthesis", "lineshape"], k)
        if not isinstance(syn["site_weights"], list) or len(syn["site_weights"]) != len(d["sites"]):
            chk.fail(["synthesis", "site_weights"], "need one weight per site")
        chk.wrap(["synthesis"], lambda: self.synthesis())

        z = d["zeeman"]
        chk.keys(z, ["zeeman"], DEFAULT_CONFIG["zeeman"])
        for k in z:
            chk.number(z, ["zeeman"], k, lo=0)
        chk.wrap(["zeeman"], lambda: self.zeeman(0.0))

        sd = d["spin_dynamics"]
        chk.keys(sd, ["spin_dynamics"], DEFAULT_CONFIG["spin_dynamics"])
        for k in ("direct_coeff_per_s_T5", "orbach_coeff_per_s", "orbach_gap_K", "pump_rate_per_s"):
            chk.number(sd, ["spin_dynamics"], k, lo=0)
        chk.number(sd, ["spin_dynamics"], "pulse_duration_s", lo=0, strict_lo=True)
        chk.number(sd, ["spin_dynamics"], "repetition_period_s", lo=0, strict_lo=True)
        chk.number(sd, ["spin_dynamics"], "max_repetitions", lo=1, integer=True)
        if not isinstance(sd["direct_thermal_factor"], bool):
            chk.fail(["spin_dynamics", "direct_thermal_factor"], "expected true or false")
        if sd["probed_state"] not in ("up", "down"):
            chk.fail(["spin_dynamics", "probed_state"], "must be 'up' or 'down'")
        chk.wrap(["spin_dynamics"], self.probe_sequence)
        chk.wrap(["spin_dynamics"], self.relaxation)

        self._validate_sweeps(chk)

        if not isinstance(d["probes"], list):
            chk.fail(["probes"], "expected a list of probe names")
        for i, p in enumerate(d["probes"]):
            if p not in METHODS:
                chk.fail(["probes", i], f"unknown probe {p!r} (choose from {', '.join(METHODS)})")
        self._validate_analysis(chk)

    def _validate_sweeps(self, chk):
        sweeps = self.data["sweeps"]
        if not isinstance(sweeps, list) or not sweeps:
            chk.fail(["sweeps"], "empty sweep: no sweep blocks")
        names = set()
        tlo, thi = SWEEP_T_SPAN_K
        for i, sw in enumerate(sweeps):
            p = ["sweeps", i]
            chk.keys(sw, p, DEFAULT_SWEEP)
            if not isinstance(sw["name"], str) or not sw["name"] or "/" in sw["name"]:
                chk.fail(p + ["name"], "must be a non-empty name without '/'")
            if sw["name"] in names:
                chk.fail(p + ["name"], f"duplicate sweep name {sw['name']!r}")
            names.add(sw["name"])
            T = sw["temperatures_K"]
            if not isinstance(T, list) or not T:
                chk.fail(p + ["temperatures_K"], "empty sweep: no temperatures")
            for j in range(len(T)):
                chk.number(T, p + ["temperatures_K"], j, lo=tlo, hi=thi)
            if len(set(T)) != len(T):
                chk.fail(p + ["temperatures_K"], "temperatures must be distinct")
            B = sw["fields_T"]
            if not isinstance(B, list) or not B:
                chk.fail(p + ["fields_T"], "empty sweep: no fields")
            for j in range(len(B)):
                chk.number(B, p + ["fields_T"], j, lo=0)
            chk.keys(sw["filter"], p + ["filter"], DEFAULT_SWEEP["filter"])
            chk.keys(sw["grid"], p + ["grid"], DEFAULT_SWEEP["grid"])
            g = sw["grid"]
            lo, hi = GRID_SPAN_NM
            chk.number(g, p + ["grid"], "start_nm", lo=lo, hi=hi)
            chk.number(g, p + ["grid"], "stop_nm", lo=lo, hi=hi)
            chk.number(g, p + ["grid"], "step_nm", lo=0, strict_lo=True)
            if g["stop_nm"] <= g["start_nm"]:
                chk.fail(p + ["grid", "stop_nm"], "must exceed start_nm")
            n = (g["stop_nm"] - g["start_nm"]) / g["step_nm"]
            if abs(n - round(n)) > 1e-6:
                chk.fail(p + ["grid", "step_nm"], "must divide stop_nm - start_nm")
            if round(n) + 1 > 200_000:
                chk.fail(p + ["grid", "step_nm"], "grid exceeds 200000 points")
            chk.number(sw, p, "averages", lo=1, integer=True)
            if not isinstance(sw["noise"], bool):
                chk.fail(p + ["noise"], "expected true or false")
            if sw["noise"] and self.data["seed"] is None:
                chk.fail(p + ["noise"], "noise is enabled but no seed is set")
            f = sw["filter"]
            chk.wrap(p + ["filter"], lambda f=f: DetectionFilter(f["kind"], f["step_center_nm"], f["step_width_nm"]))

    def _validate_analysis(self, chk):
        a = self.data["analysis"]
        base = ["analysis"]
        chk.keys(a, base, DEFAULT_CONFIG["analysis"])
        if a["normalize_integration_s"] is not None:
            chk.number(a, base, "normalize_integration_s", lo=0, strict_lo=True)
        defaults = DEFAULT_CONFIG["analysis"]
        for probe in ("quench", "filtered", "peak", "ratiometric"):
            sec = a[probe]
            p = base + [probe]
            chk.keys(sec, p, defaults[probe])
            chk.number(sec, p, "points", lo=1)
            if "window_nm" in sec:
                w = sec["window_nm"]
                if not (isinstance(w, list) and len(w) == 2 and all(isinstance(v, (int, float)) for v in w) and w[0] < w[1]):
                    chk.fail(p + ["window_nm"], "expected [low, high] with low < high")
            if "T_range_K" in sec:
                r = sec["T_range_K"]
                if not (isinstance(r, list) and len(r) == 2 and all(isinstance(v, (int, float)) for v in r) and r[0] < r[1]):
                    chk.fail(p + ["T_range_K"], "expected [low, high] with low < high")
            for k in ("model", "amplitude_model", "fwhm_model", "center_model"):
                if k in sec and sec[k] not in MODELS:
                    chk.fail(p + [k], f"unknown calibration model {sec[k]!r}")
        chk.number(a["filtered"], base + ["filtered"], "single_points", lo=1)
        split = a["filtered"]["split_K"]
        if split is not None and not (isinstance(split, list) and len(split) == 2 and split[0] < split[1]):
            chk.fail(base + ["filtered", "split_K"], "expected [low, high] with low < high, or null")
        chk.number(a["ratiometric"], base + ["ratiometric"], "half_window_nm", lo=0, strict_lo=True)
        if not isinstance(a["ratiometric"]["sweeps"], list):
            chk.fail(base + ["ratiometric", "sweeps"], "expected a list of sweep names")

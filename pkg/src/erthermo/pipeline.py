"""Sweep orchestration, per-probe analysis and the single-spectrum thermometer."""
from __future__ import annotations

import logging
import os
import shutil
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .config import ExperimentConfig, _merge
from .errors import ArtifactIOError, ConfigError, DomainError, ErThermoError, FitError, InsufficientPointsError
from .estimators import (
    TemperatureEstimate,
    boltzmann_calibration,
    calibrate_probe,
    fit_peak_gaussian,
    fit_peak_lorentzian,
    invert_calibration,
    ratiometric_temperature,
)
from .estimators.calibration import ProbeCalibration
from .io import (
    PROFILE_COLUMNS,
    REGIME_COLUMNS,
    RANKING_COLUMNS,
    profile_rows,
    read_json,
    read_spectrum,
    sha256_file,
    write_calibration,
    write_json,
    write_spectrum,
    write_table,
    write_text_atomic,
)
from .metrology import SensitivityProfile, compare_probes, profile_from_calibration
from .physics import zeeman_splitting, zeeman_splitting_sigma
from .spin import ratiometric_validity_flags, steady_spin_populations
from .synth import PleSpectrum, spin_line_positions, spinsplit_ple_spectrum, synthesize_ple_spectrum

log = logging.getLogger(__name__)

OUTPUT_ROOT_ENV = "ERTHERMO_OUTPUT_ROOT"
MANIFEST = "manifest.json"
CONFIG_SNAPSHOT = "config.yaml"
MANIFEST_FORMAT = "erthermo-manifest"


def resolve_output_dir(path) -> Path:
    """Relative output paths are taken below $ERTHERMO_OUTPUT_ROOT when it is set."""
    p = Path(path)
    root = os.environ.get(OUTPUT_ROOT_ENV)
    if root and not p.is_absolute():
        p = Path(root) / p
    return p


def _claim_dir(out: Path, overwrite: bool, owned=()):
    """Make ``out`` usable; an existing non-empty directory needs ``overwrite``."""
    if out.exists() and not out.is_dir():
        raise ArtifactIOError(f"{out} exists and is not a directory")
    if out.exists() and any(out.iterdir()):
        if not overwrite:
            raise ArtifactIOError(f"{out} is not empty; pass --overwrite to replace its outputs")
        for name in owned:  # clear only what this command writes
            target = out / name
            if target.is_dir():
                shutil.rmtree(target)
            elif target.exists():
                target.unlink()
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / f".write_test{os.getpid()}"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise ArtifactIOError(f"output directory {out} is not writable: {exc.strerror or exc}") from None


# -- simulate ------------------------------------------------------------------------


def sweep_points(cfg: ExperimentConfig) -> list[dict]:
    """All (sweep, B, T) points in execution order with their derived seeds."""
    pts = []
    for sw in cfg.sweeps():
        for B in sw.fields:
            for T in sw.temperatures:
                idx = len(pts)
                seed = None
                if sw.noise:
                    seed = int(np.random.SeedSequence([int(cfg.seed), idx]).generate_state(1, np.uint64)[0])
                rel = f"spectra/{sw.name}/T{T:08.3f}K_B{B:06.3f}T.csv"
                pts.append({"index": idx, "sweep": sw.name, "T_K": T, "B_T": B, "seed": seed, "file": rel})
    if not pts:
        raise ConfigError("empty sweep")
    return pts


def simulate_point(cfg: ExperimentConfig, point: dict) -> PleSpectrum:
    sw = next(s for s in cfg.sweeps() if s.name == point["sweep"])
    syn = cfg.synthesis(sw)
    T, B = point["T_K"], point["B_T"]
    if B > 0:
        zc = cfg.zeeman(B)
        dg = zeeman_splitting(zc, "ground")
        pops = steady_spin_populations(cfg.relaxation(), cfg.probe_sequence(), B, T, dg, cfg.probed_state)
        spec = spinsplit_ple_spectrum(syn, T, zc, pops, sw.grid, rng_seed=point["seed"])
    else:
        spec = synthesize_ple_spectrum(syn, T, B, sw.grid, rng_seed=point["seed"])
    spec.meta.update({"config_hash": cfg.config_hash(), "sweep": sw.name, "point_index": point["index"]})
    return spec


def _worker(args):
    data, point, out = args
    cfg = ExperimentConfig(data)
    t0 = time.perf_counter()
    spec = simulate_point(cfg, point)
    write_spectrum(Path(out) / point["file"], spec, overwrite=True)
    return point["index"], time.perf_counter() - t0


def run_sweep(cfg: ExperimentConfig, out_dir=None, *, overwrite: bool = False, workers: int | None = None):
    """Simulate every (T, B) point of every sweep block into ``out_dir``.

    Writes ``config.yaml`` (the resolved configuration), one spectrum CSV per
    point and finally ``manifest.json``. Returns (directory, manifest).
    """
    t_start = time.perf_counter()
    points = sweep_points(cfg)
    out = resolve_output_dir(out_dir if out_dir is not None else cfg.output_dir)
    _claim_dir(out, overwrite, owned=("spectra", CONFIG_SNAPSHOT, MANIFEST))
    write_text_atomic(out / CONFIG_SNAPSHOT, cfg.to_yaml(), overwrite=True)
    n_workers = cfg.workers if workers is None else int(workers)
    if n_workers < 1:
        raise ConfigError("workers must be >= 1")
    tasks = [(cfg.data, p, str(out)) for p in points]
    if n_workers == 1:
        durations = dict(map(_worker, tasks))
    else:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            durations = dict(pool.map(_worker, tasks, chunksize=max(1, len(tasks) // (4 * n_workers))))
    files = {CONFIG_SNAPSHOT: sha256_file(out / CONFIG_SNAPSHOT)}
    for p in points:
        files[p["file"]] = sha256_file(out / p["file"])
    manifest = {
        "format": MANIFEST_FORMAT,
        "config_hash": cfg.config_hash(),
        "artifact_version": __version__,
        "seed": cfg.seed,
        "points": points,
        "files": files,
        "timings": {
            "created_utc": datetime.now(timezone.utc).isoformat(timespec="seconds"),
            "wall_s": time.perf_counter() - t_start,
            "workers": n_workers,
            "point_s": [durations[p["index"]] for p in points],
        },
    }
    write_json(out / MANIFEST, manifest, overwrite=True)
    log.info("wrote %d spectra to %s", len(points), out)
    return out, manifest


def load_dataset(path) -> tuple[ExperimentConfig, dict]:
    """Config snapshot and manifest of a dataset, after checksum verification."""
    d = Path(path)
    mpath = d / MANIFEST
    if not mpath.exists():
        raise ArtifactIOError(f"{d} has no {MANIFEST}; run simulate first")
    manifest = read_json(mpath)
    if manifest.get("format") != MANIFEST_FORMAT:
        raise ArtifactIOError(f"{mpath} is not a dataset manifest")
    for rel, digest in manifest["files"].items():
        if not (d / rel).exists():
            raise ArtifactIOError(f"dataset file {rel} listed in the manifest is missing")
        if sha256_file(d / rel) != digest:
            raise ArtifactIOError(f"checksum mismatch for {rel}")
    cfg = ExperimentConfig.load(d / CONFIG_SNAPSHOT)
    if cfg.config_hash() != manifest["config_hash"]:
        raise ArtifactIOError("config snapshot does not match the manifest hash")
    return cfg, manifest


# -- observables ------------------------------------------------------------------------


def _fit(shape, spec, window):
    f = fit_peak_lorentzian if shape == "lorentzian" else fit_peak_gaussian
    return f(spec, window)


def read_observable(spec: PleSpectrum, obs: dict) -> tuple[float, float, int]:
    """(y, sigma_y, n_samples) of a probe observable on one spectrum.

    ``n_samples`` counts wavelength points times averages that went into y; it
    sets how the noise rescales to a different acquisition budget.
    """
    kind = obs.get("kind")
    need = obs.get("filter")
    have = (spec.meta.get("filter") or {}).get("kind")
    if need is not None and have is not None and need != have:
        raise DomainError(f"probe applies to spectra recorded with filter {need!r}, this one used {have!r}")
    n_avg = int(spec.meta.get("n_averages", 1))
    if kind == "window_mean":
        sub = spec.window(*obs["window_nm"])
        if sub.wavelengths.size == 0:
            raise DomainError(f"spectrum has no points in {obs['window_nm']} nm")
        n = sub.wavelengths.size
        return float(sub.counts.mean()), float(np.sqrt(np.sum(sub.uncertainties**2)) / n), n * n_avg
    if kind == "single_wavelength":
        wl = spec.wavelengths
        i = int(np.argmin(np.abs(wl - obs["wavelength_nm"])))
        step = float(np.min(np.diff(wl))) if wl.size > 1 else 0.0
        if abs(wl[i] - obs["wavelength_nm"]) > 0.5 * step + 1e-9:
            raise DomainError(f"spectrum does not sample {obs['wavelength_nm']} nm")
        return float(spec.counts[i]), float(spec.uncertainties[i]), n_avg
    if kind == "peak_fit":
        res = _fit(obs["shape"], spec, obs["window_nm"])
        name = obs["parameter"]
        y = float(getattr(res, name)) - float(obs.get("reference") or 0.0)
        n = spec.window(*obs["window_nm"]).wavelengths.size
        return y, res.sigma(name), n * n_avg
    raise DomainError(f"unknown observable kind {kind!r}")


# -- analysis ---------------------------------------------------------------------------


@dataclass
class ProbeOutcome:
    probe: str
    status: str = "ok"  # ok | skipped | error
    reason: str = ""
    calibrations: dict = field(default_factory=dict)  # label -> ProbeCalibration
    profiles: list = field(default_factory=list)
    tables: dict = field(default_factory=dict)  # name -> (columns, rows)
    notes: list = field(default_factory=list)


def _spectra_of(dataset: Path, manifest: dict, sweep: str, zero_field: bool | None = None):
    out = []
    for p in manifest["points"]:
        if p["sweep"] != sweep:
            continue
        if zero_field is True and p["B_T"] != 0:
            continue
        if zero_field is False and p["B_T"] == 0:
            continue
        out.append(read_spectrum(dataset / p["file"]))
    return sorted(out, key=lambda s: (s.field, s.temperature))


def _has_sweep(manifest, name):
    return any(p["sweep"] == name for p in manifest["points"])


def _budget(points, n_samples):
    """Factor that maps measured relative noise onto the probe's point budget."""
    return np.sqrt(np.asarray(n_samples, dtype=float) / float(points))


def _calibrated_probe(method, label, rows, model, opts, period, observable, *, split=None, smoothing=0.0, notes=None):
    """Fit a calibration to rows of (T, y, sigma, n_samples) and build its profile."""
    rows = sorted(rows)
    arr = np.array([r[:3] for r in rows], dtype=float) if rows else np.zeros((0, 3))
    if arr.shape[0] == 0:
        raise InsufficientPointsError(f"insufficient points: no usable spectra for {label}")
    cal = calibrate_probe(arr, model, split=split, smoothing=smoothing, method=method)
    cal.observable = observable
    T = arr[:, 0]
    y = cal.predict(T)
    rel = np.abs(arr[:, 2] / y) * _budget(opts["points"], [r[3] for r in rows])
    valid = np.array([not cal.in_gap(t) for t in T]) & (np.abs(y) > 0)
    prof = profile_from_calibration(cal, T, rel, opts["points"] * period, method, label, valid)
    return cal, prof


def _probe_quench(cfg, dataset, manifest, a, period):
    o = a["quench"]
    if not _has_sweep(manifest, o["sweep"]):
        return ProbeOutcome("quench", "skipped", f"dataset has no sweep {o['sweep']!r}")
    obs = {"kind": "window_mean", "window_nm": o["window_nm"], "filter": "none"}
    lo, hi = o["T_range_K"]
    rows = []
    for s in _spectra_of(dataset, manifest, o["sweep"], zero_field=True):
        if lo <= s.temperature <= hi:
            y, sy, n = read_observable(s, obs)
            rows.append((s.temperature, y, sy, n))
    cal, prof = _calibrated_probe("quench", "quench", rows, o["model"], o, period, obs)
    return ProbeOutcome("quench", calibrations={"quench": cal}, profiles=[prof])


def _probe_filtered(cfg, dataset, manifest, a, period):
    o = a["filtered"]
    if not _has_sweep(manifest, o["sweep"]):
        return ProbeOutcome("filtered", "skipped", f"dataset has no sweep {o['sweep']!r}")
    spectra = [s for s in _spectra_of(dataset, manifest, o["sweep"], zero_field=True) if s.meta["filter"]["kind"] != "none"]
    if not spectra:
        return ProbeOutcome("filtered", "skipped", f"sweep {o['sweep']!r} was recorded without the detection filter")
    lo, hi = o["T_range_K"]
    spectra = [s for s in spectra if lo <= s.temperature <= hi]
    out = ProbeOutcome("filtered")
    kind = spectra[0].meta["filter"]["kind"] if spectra else None
    variants = [("filtered_avg", {"kind": "window_mean", "window_nm": o["window_nm"], "filter": kind}, o)]
    if o.get("single_nm") is not None:
        # the single wavelength is one slice of the same raw data, with its own (small) budget
        obs = {"kind": "single_wavelength", "wavelength_nm": o["single_nm"], "filter": kind}
        variants.append((f"filtered_{o['single_nm']:g}nm", obs, {**o, "points": o["single_points"]}))
    for label, obs, budget in variants:
        rows = [(s.temperature, *read_observable(s, obs)) for s in spectra]
        cal, prof = _calibrated_probe("filtered", label, rows, o["model"], budget, period, obs, split=o["split_K"])
        out.calibrations[label] = cal
        out.profiles.append(prof)
    return out


def _peak_fits(dataset, manifest, o):
    """Lorentzian fits of the isolated line for every zero-field spectrum in range."""
    lo, hi = o["T_range_K"]
    fits, notes, kinds = [], [], set()
    for s in _spectra_of(dataset, manifest, o["sweep"], zero_field=True):
        if not lo <= s.temperature <= hi:
            continue
        kinds.add(s.meta["filter"]["kind"])
        try:
            res = fit_peak_lorentzian(s, o["window_nm"])
        except FitError as exc:
            notes.append(f"T = {s.temperature:g} K: peak fit failed ({exc})")
            continue
        n = s.window(*o["window_nm"]).wavelengths.size * int(s.meta.get("n_averages", 1))
        fits.append((s.temperature, res, n))
    return fits, notes, kinds.pop() if len(kinds) == 1 else None


def _probe_peak(method, cfg, dataset, manifest, a, period, cache):
    o = a["peak"]
    if not _has_sweep(manifest, o["sweep"]):
        return ProbeOutcome(method, "skipped", f"dataset has no sweep {o['sweep']!r}")
    if "fits" not in cache:
        cache["fits"] = _peak_fits(dataset, manifest, o)
    fits, notes, filter_kind = cache["fits"]
    name = method.split("_", 1)[1]
    model = o[f"{name}_model"]
    ref = None
    if name == "center" and fits:
        ref = fits[0][1].center  # shift relative to the coldest spectrum
    obs = {"kind": "peak_fit", "shape": "lorentzian", "window_nm": o["window_nm"], "parameter": name, "reference": ref,
           "filter": filter_kind}
    rows = [(T, getattr(r, name) - (ref or 0.0), r.sigma(name), n) for T, r, n in fits]
    smoothing = o["smoothing"] if model == "cubic_spline" else 0.0
    cal, prof = _calibrated_probe(method, method, rows, model, o, period, obs, smoothing=smoothing)
    return ProbeOutcome(method, calibrations={method: cal}, profiles=[prof], notes=list(notes))


def ratiometric_from_spectrum(cfg: ExperimentConfig, spec: PleSpectrum, half_window: float = 0.12, site_index: int = 0,
                              include_g_uncertainty: bool = True) -> tuple[TemperatureEstimate, dict]:
    """Spin temperature of one field-split spectrum from Gaussian fits of both lines."""
    B = spec.field
    if not B > 0:
        raise DomainError("ratiometric thermometry needs a spectrum recorded at B > 0")
    z = cfg.data["zeeman"]
    zc = cfg.zeeman(B).__class__(
        B,
        spec.meta.get("g_eff_ground_GHz_per_T", z["g_eff_ground_GHz_per_T"]),
        spec.meta.get("g_eff_excited_GHz_per_T", z["g_eff_excited_GHz_per_T"]),
        spec.meta.get("g_eff_uncertainty_GHz_per_T", z["g_eff_uncertainty_GHz_per_T"]),
    )
    site = cfg.sites()[site_index]
    lam_up, lam_down = spin_line_positions(site, zc)
    up = fit_peak_gaussian(spec, (lam_up - half_window, lam_up + half_window))
    down = fit_peak_gaussian(spec, (lam_down - half_window, lam_down + half_window))
    dg = zeeman_splitting(zc, "ground")
    dg_sigma = zeeman_splitting_sigma(zc) if include_g_uncertainty else 0.0
    est = ratiometric_temperature(up.amplitude, down.amplitude, up.sigma("amplitude"), down.sigma("amplitude"), dg, dg_sigma)
    lifetime = 1.0 / cfg.data["synthesis"]["quench"]["radiative_rate_per_s"]
    est.validity_flags = ratiometric_validity_flags(cfg.relaxation(), cfg.probe_sequence(), B, est.value, dg, lifetime)
    n = (spec.window(lam_up - half_window, lam_up + half_window).wavelengths.size
         + spec.window(lam_down - half_window, lam_down + half_window).wavelengths.size)
    info = {"delta_g_K": dg, "n_samples": n * int(spec.meta.get("n_averages", 1)), "line_up_nm": up.center,
            "line_down_nm": down.center}
    return est, info


def _probe_ratiometric(cfg, dataset, manifest, a, period):
    o = a["ratiometric"]
    out = ProbeOutcome("ratiometric")
    missing = []
    for name in o["sweeps"]:
        spectra = _spectra_of(dataset, manifest, name, zero_field=False) if _has_sweep(manifest, name) else []
        if not spectra:
            missing.append(name)
            continue
        for B in sorted({s.field for s in spectra}):
            label = f"ratiometric_{B:g}T"
            Ts, S, dT, ok, rows = [], [], [], [], []
            for s in (s for s in spectra if s.field == B):
                T = s.temperature
                row = {"T_set_K": T, "T_est_K": float("nan"), "sigma_K": float("nan"), "in_optimal_range": False,
                       "slow_thermalization": False, "orbach_shortcut": False, "note": ""}
                try:
                    est, info = ratiometric_from_spectrum(cfg, s, o["half_window_nm"], include_g_uncertainty=False)
                except ErThermoError as exc:
                    row["note"] = f"{type(exc).__name__}: {exc}"
                    Ts.append(T), S.append(0.0), dT.append(0.0), ok.append(False), rows.append(row)
                    continue
                flags = est.validity_flags
                row.update({"T_est_K": est.value, "sigma_K": est.sigma, "in_optimal_range": est.in_optimal_range,
                            "slow_thermalization": flags["slow_thermalization"],
                            "orbach_shortcut": flags["orbach_shortcut"]})
                rows.append(row)
                Ts.append(T)
                S.append(info["delta_g_K"] / T**2)
                dT.append(est.sigma * float(_budget(o["points"], info["n_samples"])))
                ok.append(not (flags["slow_thermalization"] or flags["orbach_shortcut"]))
            prof = SensitivityProfile("ratiometric", Ts, S, dT, o["points"] * period, valid=ok, label=label)
            out.profiles.append(prof)
            dg = zeeman_splitting(cfg.zeeman(B), "ground")
            cal = boltzmann_calibration(dg, zeeman_splitting_sigma(cfg.zeeman(B)))
            cal.observable = {"kind": "spin_ratio", "field_T": B, "half_window_nm": o["half_window_nm"]}
            out.calibrations[label] = cal
            cols = ("T_set_K", "T_est_K", "sigma_K", "in_optimal_range", "slow_thermalization", "orbach_shortcut", "note")
            out.tables[f"estimates_{label}"] = (cols, rows)
    if not out.profiles:
        why = "no field-split spectra (B = 0 everywhere)" if not missing else f"no B > 0 spectra in sweeps {missing}"
        return ProbeOutcome("ratiometric", "skipped", why)
    if missing:
        out.notes.append(f"sweeps without B > 0 spectra: {missing}")
    return out


def _normalize_profile(p: SensitivityProfile, t_norm: float) -> SensitivityProfile:
    f = np.sqrt(p.integration_time / t_norm) if p.integration_time > 0 else 1.0
    return SensitivityProfile(p.method, p.T_grid, p.S_r, p.delta_T * f, t_norm, p.S_r_sigma, p.delta_T_sigma * f,
                              p.valid, p.label)


def run_analysis(dataset_dir, probes=None, options: dict | None = None, out_dir=None, *, overwrite: bool = False) -> dict:
    """Run the configured probe pipelines over a simulated dataset.

    Writes ``calibrations/<label>.json``, ``profiles/<label>.csv``,
    ``comparison.csv`` (all profile rows), ``ranking.csv``, ``regimes.csv``
    and ``report.json`` into ``out_dir`` (default ``<dataset>/analysis``).
    A probe whose prerequisites are missing is skipped with a reason; a probe
    whose fit fails is reported as an error; neither stops the others.
    """
    dataset = Path(dataset_dir)
    cfg, manifest = load_dataset(dataset)
    a = _merge(cfg.analysis, options or {})
    probes = cfg.probes if probes is None else list(probes)
    out = Path(out_dir) if out_dir is not None else dataset / "analysis"
    _claim_dir(out, overwrite, owned=("calibrations", "profiles", "tables", "comparison.csv", "ranking.csv",
                                      "regimes.csv", "report.json"))
    period = cfg.probe_sequence().repetition_period
    cache: dict = {}
    runners = {
        "quench": lambda: _probe_quench(cfg, dataset, manifest, a, period),
        "filtered": lambda: _probe_filtered(cfg, dataset, manifest, a, period),
        "ratiometric": lambda: _probe_ratiometric(cfg, dataset, manifest, a, period),
    }
    for m in ("peak_amplitude", "peak_fwhm", "peak_center"):
        runners[m] = lambda m=m: _probe_peak(m, cfg, dataset, manifest, a, period, cache)
    outcomes = []
    for probe in probes:
        if probe not in runners:
            raise ConfigError(f"unknown probe {probe!r}")
        try:
            oc = runners[probe]()
        except ErThermoError as exc:
            oc = ProbeOutcome(probe, "error", f"{type(exc).__name__}: {exc}")
        outcomes.append(oc)
        log.info("probe %s: %s %s", probe, oc.status, oc.reason)

    t_norm = a.get("normalize_integration_s")
    profiles = []
    for oc in outcomes:
        for label, cal in oc.calibrations.items():
            write_calibration(out / "calibrations" / f"{label}.json", cal, overwrite=True)
        for name, (cols, rows) in oc.tables.items():
            write_table(out / "tables" / f"{name}.csv", cols, rows, overwrite=True)
        for p in oc.profiles:
            p = _normalize_profile(p, t_norm) if t_norm else p
            profiles.append(p)
            write_table(out / "profiles" / f"{p.label}.csv", PROFILE_COLUMNS, profile_rows(p), overwrite=True)
    comparison = None
    if profiles:
        rows = [r for p in profiles for r in profile_rows(p)]
        write_table(out / "comparison.csv", PROFILE_COLUMNS, rows, overwrite=True)
        comparison = compare_probes(profiles)
        write_ranking(out, comparison)
    report = {
        "dataset": str(dataset),
        "config_hash": manifest["config_hash"],
        "probes": [
            {"probe": oc.probe, "status": oc.status, "reason": oc.reason, "labels": [p.label for p in oc.profiles],
             "notes": oc.notes}
            for oc in outcomes
        ],
        "regimes": [] if comparison is None else [list(r) for r in comparison.regimes],
        "normalize_integration_s": t_norm,
    }
    write_json(out / "report.json", report, overwrite=True)
    return {"out_dir": out, "report": report, "profiles": profiles, "comparison": comparison,
            "calibrations": {k: v for oc in outcomes for k, v in oc.calibrations.items()}}


def write_ranking(out: Path, comparison, overwrite: bool = True):
    rows = [{"T_K": float(T), "best_label": b or "", "deltaT_K": float(d) if b else float("nan")}
            for T, b, d in zip(comparison.T_grid, comparison.best, comparison.best_delta_T)]
    write_table(out / "ranking.csv", RANKING_COLUMNS, rows, overwrite=overwrite)
    regimes = [{"label": r[0], "T_start_K": r[1], "T_end_K": r[2]} for r in comparison.regimes]
    write_table(out / "regimes.csv", REGIME_COLUMNS, regimes, overwrite=overwrite)


# -- estimate ------------------------------------------------------------------------------


def estimate_temperature(spectrum: PleSpectrum, calibration: ProbeCalibration | None = None, *,
                         cfg: ExperimentConfig | None = None, half_window: float = 0.12) -> TemperatureEstimate:
    """Temperature from one spectrum, through a calibration or ratiometrically.

    With ``calibration`` None (or a Boltzmann-ratio calibration) the
    spectrum must carry B > 0 and the spin-pair ratio is used; the reported
    sigma then includes the g-factor uncertainty.
    """
    cfg = cfg or ExperimentConfig.from_dict({})
    if calibration is None or calibration.model == "boltzmann_ratio":
        if calibration is not None and calibration.observable:
            half_window = calibration.observable.get("half_window_nm", half_window)
        est, _ = ratiometric_from_spectrum(cfg, spectrum, half_window)
        return est
    obs = calibration.observable
    if not obs:
        raise DomainError("calibration carries no observable recipe; it cannot be applied to a spectrum")
    y, sy, _ = read_observable(spectrum, obs)
    return invert_calibration(calibration, y, sy, calibration.method)

"""Dataset, calibration and table persistence.

Spectrum CSV layout::

    # T_K: 18.0
    # B_T: 0.0
    # filter: {"kind": "longpass", ...}
    # seed: 123
    # config_hash: ...
    wavelength_nm,counts,sigma
    1475.0,0.5012,0.0316
    ...

Header values are JSON. Floats are written with ``repr`` so a read-back
reproduces the arrays bit for bit and reruns produce byte-identical files.
"""
from __future__ import annotations

import csv
import hashlib
import io as _io
import json
import os
from pathlib import Path

import numpy as np

from .errors import ArtifactIOError, DomainError
from .estimators.calibration import ProbeCalibration
from .synth import PleSpectrum

SPECTRUM_COLUMNS = ("wavelength_nm", "counts", "sigma")
PROFILE_COLUMNS = ("T_K", "method", "S_r_perK", "deltaT_K", "valid", "integration_s", "label", "S_r_sigma_perK", "deltaT_sigma_K")
COMPARISON_COLUMNS = PROFILE_COLUMNS
RANKING_COLUMNS = ("T_K", "best_label", "deltaT_K")
REGIME_COLUMNS = ("label", "T_start_K", "T_end_K")


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, np.generic):
        return x.item()
    return x


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_text_atomic(path, text: str, overwrite: bool = False) -> Path:
    """Write ``text`` via a temporary sibling and rename; refuses to clobber unless asked."""
    path = Path(path)
    if path.exists() and not overwrite:
        raise ArtifactIOError(f"{path} exists; pass overwrite to replace it")
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_name(path.name + f".tmp{os.getpid()}")
        tmp.write_text(text)
        os.replace(tmp, path)
    except OSError as exc:
        raise ArtifactIOError(f"cannot write {path}: {exc.strerror or exc}") from None
    return path


def read_text(path) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise ArtifactIOError(f"cannot read {path}: {exc.strerror or exc}") from None


def sha256_file(path) -> str:
    h = hashlib.sha256()
    try:
        with open(path, "rb") as fh:
            for chunk in iter(lambda: fh.read(1 << 20), b""):
                h.update(chunk)
    except OSError as exc:
        raise ArtifactIOError(f"cannot read {path}: {exc.strerror or exc}") from None
    return h.hexdigest()


# -- spectra -----------------------------------------------------------------------


def spectrum_to_csv(spec: PleSpectrum) -> str:
    buf = _io.StringIO()
    for k in sorted(spec.meta):
        buf.write(f"# {k}: {json.dumps(_jsonable(spec.meta[k]), sort_keys=True)}\n")
    buf.write(",".join(SPECTRUM_COLUMNS) + "\n")
    for row in zip(spec.wavelengths, spec.counts, spec.uncertainties):
        buf.write(",".join(repr(float(v)) for v in row) + "\n")
    return buf.getvalue()


def write_spectrum(path, spec: PleSpectrum, overwrite: bool = False) -> Path:
    return write_text_atomic(path, spectrum_to_csv(spec), overwrite)


def read_spectrum(path) -> PleSpectrum:
    meta, rows, header = {}, [], None
    for n, line in enumerate(read_text(path).splitlines(), 1):
        if not line.strip():
            continue
        if line.startswith("#"):
            key, sep, val = line[1:].partition(":")
            if not sep:
                raise DomainError(f"{path}:{n}: malformed header line")
            try:
                meta[key.strip()] = json.loads(val.strip())
            except json.JSONDecodeError:
                raise DomainError(f"{path}:{n}: header value is not JSON") from None
            continue
        if header is None:
            header = tuple(c.strip() for c in line.split(","))
            if header != SPECTRUM_COLUMNS:
                raise DomainError(f"{path}:{n}: expected columns {','.join(SPECTRUM_COLUMNS)}")
            continue
        try:
            rows.append([float(v) for v in line.split(",")])
        except ValueError:
            raise DomainError(f"{path}:{n}: non-numeric row") from None
        if len(rows[-1]) != 3:
            raise DomainError(f"{path}:{n}: expected 3 columns")
    if not rows:
        raise DomainError(f"{path}: no spectrum rows")
    if "T_K" not in meta:
        raise DomainError(f"{path}: header lacks T_K")
    arr = np.array(rows)
    return PleSpectrum(arr[:, 0], arr[:, 1], arr[:, 2], meta)


# -- calibrations ----------------------------------------------------------------------


def write_calibration(path, cal: ProbeCalibration, overwrite: bool = False) -> Path:
    text = json.dumps(_jsonable(cal.to_dict()), indent=2, sort_keys=True) + "\n"
    return write_text_atomic(path, text, overwrite)


def read_calibration(path) -> ProbeCalibration:
    try:
        d = json.loads(read_text(path))
    except json.JSONDecodeError as exc:
        raise DomainError(f"{path}: invalid JSON ({exc.msg})") from None
    return ProbeCalibration.from_dict(d)


def write_json(path, obj, overwrite: bool = False) -> Path:
    return write_text_atomic(path, json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n", overwrite)


def read_json(path):
    try:
        return json.loads(read_text(path))
    except json.JSONDecodeError as exc:
        raise DomainError(f"{path}: invalid JSON ({exc.msg})") from None


# -- tables -------------------------------------------------------------------------


def rows_to_csv(columns, rows) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r[c]) for c in columns])
    return buf.getvalue()


def write_table(path, columns, rows, overwrite: bool = False) -> Path:
    return write_text_atomic(path, rows_to_csv(columns, rows), overwrite)


def read_table(path) -> list[dict]:
    return list(csv.DictReader(_io.StringIO(read_text(path))))


def profile_rows(profile) -> list[dict]:
    return [
        {
            "T_K": float(T),
            "method": profile.method,
            "S_r_perK": float(s),
            "deltaT_K": float(d),
            "valid": bool(v),
            "integration_s": float(profile.integration_time),
            "label": profile.label,
            "S_r_sigma_perK": float(ss),
            "deltaT_sigma_K": float(ds),
        }
        for T, s, d, v, ss, ds in zip(
            profile.T_grid, profile.S_r, profile.delta_T, profile.valid, profile.S_r_sigma, profile.delta_T_sigma
        )
    ]


def profiles_from_rows(rows) -> list:
    """Group comparison-table rows back into SensitivityProfiles (one per label)."""
    from .metrology import SensitivityProfile

    groups: dict[str, list] = {}
    for r in rows:
        groups.setdefault(r.get("label") or r["method"], []).append(r)
    out = []
    for label, rs in groups.items():
        rs = sorted(rs, key=lambda r: float(r["T_K"]))

        def col(name, default=0.0):
            return [float(r.get(name) or default) for r in rs]

        out.append(
            SensitivityProfile(
                rs[0]["method"],
                col("T_K"),
                col("S_r_perK"),
                col("deltaT_K"),
                float(rs[0]["integration_s"]),
                col("S_r_sigma_perK"),
                col("deltaT_sigma_K"),
                [r["valid"].strip().lower() in ("true", "1") for r in rs],
                label,
            )
        )
    return out

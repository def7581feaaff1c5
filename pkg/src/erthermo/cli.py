"""Command-line interface: simulate, analyze, estimate, compare.

Exit codes: 0 ok, 2 configuration/usage error, 3 fit or convergence failure,
4 value out of range, 5 file I/O problem.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .config import ExperimentConfig
from .errors import ConfigError, ErThermoError
from .io import PROFILE_COLUMNS, profile_rows, profiles_from_rows, read_calibration, read_spectrum, read_table, write_table
from .metrology import compare_probes
from .pipeline import (
    _claim_dir,
    estimate_temperature,
    resolve_output_dir,
    run_analysis,
    run_sweep,
    write_ranking,
)

log = logging.getLogger("erthermo")


def _load_config(path) -> ExperimentConfig:
    return ExperimentConfig.load(path) if path else ExperimentConfig.from_dict({})


def cmd_simulate(args) -> int:
    cfg = _load_config(args.config)
    if args.seed is not None:
        cfg = cfg.replace(seed=args.seed)
    if args.workers is not None:
        cfg = cfg.replace(workers=args.workers)
    out, manifest = run_sweep(cfg, args.out, overwrite=args.overwrite)
    print(f"wrote {len(manifest['points'])} spectra to {out} (config hash {manifest['config_hash'][:12]})")
    return 0


def cmd_analyze(args) -> int:
    probes = args.probes.split(",") if args.probes else None
    options = {}
    if args.normalize_integration is not None:
        options["normalize_integration_s"] = args.normalize_integration
    out = resolve_output_dir(args.out) if args.out else None
    res = run_analysis(args.dataset, probes, options, out, overwrite=args.overwrite)
    for p in res["report"]["probes"]:
        extra = f" ({p['reason']})" if p["reason"] else ""
        print(f"{p['probe']:<15} {p['status']}{extra}")
    for label, lo, hi in res["report"]["regimes"]:
        print(f"best {label:<18} {lo:g} - {hi:g} K")
    print(f"outputs in {res['out_dir']}")
    failed = [p for p in res["report"]["probes"] if p["status"] == "error"]
    return 3 if failed and len(failed) == len(res["report"]["probes"]) else 0


def cmd_estimate(args) -> int:
    spec = read_spectrum(args.spectrum)
    cal = read_calibration(args.calibration) if args.calibration else None
    if cal is None and not args.ratiometric:
        raise ConfigError("give --calibration FILE or --ratiometric")
    cfg = _load_config(args.config)
    est = estimate_temperature(spec, cal, cfg=cfg, half_window=args.half_window)
    if args.json:
        print(json.dumps(est.to_dict(), indent=2, sort_keys=True))
        return 0
    print(f"T = {est.value:.4f} +/- {est.sigma:.4f} K")
    print(f"method: {est.method}")
    if est.method == "ratiometric":
        print(f"in optimal range: {'yes' if est.in_optimal_range else 'no'}")
    for k, v in sorted(est.validity_flags.items()):
        print(f"{k}: {v}")
    return 0


def cmd_compare(args) -> int:
    rows = [r for path in args.profiles for r in read_table(path)]
    missing = [c for c in ("T_K", "method", "S_r_perK", "deltaT_K", "valid", "integration_s") if rows and c not in rows[0]]
    if not rows or missing:
        raise ConfigError(f"profile tables need columns {', '.join(PROFILE_COLUMNS[:6])}")
    profiles = profiles_from_rows(rows)
    comp = compare_probes(profiles)
    if args.out:
        out = resolve_output_dir(args.out)
        _claim_dir(out, args.overwrite, owned=("ranking.csv", "regimes.csv", "comparison.csv"))
        write_table(out / "comparison.csv", PROFILE_COLUMNS, [r for p in profiles for r in profile_rows(p)])
        write_ranking(out, comp)
    for label, lo, hi in comp.regimes:
        print(f"best {label:<18} {lo:g} - {hi:g} K")
    return 0


def cmd_config(args) -> int:
    cfg = _load_config(args.config)
    sys.stdout.write(cfg.to_yaml())
    print(f"# config_hash: {cfg.config_hash()}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="erthermo", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="synthesize the spectra of all sweep points")
    s.add_argument("--config", type=Path, help="YAML experiment config (default: built-in defaults)")
    s.add_argument("--out", type=Path, help="dataset directory (default: output_dir of the config)")
    s.add_argument("--seed", type=int, help="override the master seed")
    s.add_argument("--workers", type=int, help="worker processes")
    s.add_argument("--overwrite", action="store_true", help="replace outputs in an existing directory")
    s.set_defaults(func=cmd_simulate)

    a = sub.add_parser("analyze", help="calibrate probes and compare their precision")
    a.add_argument("dataset", type=Path)
    a.add_argument("--probes", help="comma-separated subset of probes")
    a.add_argument("--out", type=Path, help="analysis directory (default: <dataset>/analysis)")
    a.add_argument("--normalize-integration", type=float, metavar="SECONDS",
                   help="rescale every deltaT to this integration time")
    a.add_argument("--overwrite", action="store_true")
    a.set_defaults(func=cmd_analyze)

    e = sub.add_parser("estimate", help="temperature of one spectrum")
    e.add_argument("--spectrum", type=Path, required=True)
    e.add_argument("--calibration", type=Path, help="calibration JSON written by analyze")
    e.add_argument("--ratiometric", action="store_true", help="calibration-free spin-ratio estimate (B > 0)")
    e.add_argument("--config", type=Path, help="config with site, g-factor and spin-dynamics parameters")
    e.add_argument("--half-window", type=float, default=0.12, help="spin-line fit half window in nm")
    e.add_argument("--json", action="store_true")
    e.set_defaults(func=cmd_estimate)

    c = sub.add_parser("compare", help="rank probes from profile CSV tables")
    c.add_argument("profiles", type=Path, nargs="+")
    c.add_argument("--out", type=Path)
    c.add_argument("--overwrite", action="store_true")
    c.set_defaults(func=cmd_compare)

    k = sub.add_parser("config", help="print the resolved config and its hash")
    k.add_argument("--config", type=Path)
    k.set_defaults(func=cmd_config)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ErThermoError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code if exc.exit_code != 1 else 2
    except KeyboardInterrupt:
        return 130


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

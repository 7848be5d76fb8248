"""Command line: ``hwmimo {trial,sweep,calibrate,preset} ...``.

Exit codes: 0 success, 2 configuration error, 3 numeric error, 4 sweep finished
with failed points.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import yaml

from .. import stochastic
from .config import ConfigError, SweepAxis, SweepSpec, TrialConfig, load_config, with_overrides
from .experiments import _stochastic_cfg, fit_table
from .output import Table, to_csv_text, write_csv
from .presets import PRESETS, run_preset
from .sweep import NUMERIC_ERRORS, run_sweep, trial_tables
from .trial import run_trial

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_PARTIAL = 0, 2, 3, 4

log = logging.getLogger("hwmimo")


def _u64(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return v


def _assignment(text: str) -> tuple[str, object]:
    if "=" not in text:
        raise argparse.ArgumentTypeError(f"expected path=value, got {text!r}")
    path, value = text.split("=", 1)
    parsed = yaml.safe_load(value)
    if isinstance(parsed, str):
        # YAML 1.1 reads exponent floats without a dot (1e20) as strings
        try:
            parsed = float(parsed)
        except ValueError:
            pass
    return path.strip(), parsed


def _axis(text: str) -> SweepAxis:
    path, values = _assignment(text)
    if not isinstance(values, list):
        values = [values]
    return SweepAxis(path, values)


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="YAML configuration file")
    p.add_argument("--seed", type=_u64, help="master seed (overrides the config)")
    p.add_argument("--out", type=Path, help="output directory; CSV goes to stdout when omitted")
    p.add_argument("--workers", type=int, default=1, help="worker processes (default 1)")
    p.add_argument("--format", choices=["csv", "records"], default="csv",
                   help="csv tables, or one JSON record per trial (trial only)")
    p.add_argument("--realizations", type=int, help="realizations per point (overrides the config)")
    p.add_argument("--set", dest="overrides", type=_assignment, action="append", default=[],
                   metavar="PATH=VALUE", help="override one config field, e.g. array.spacing=0.35")
    p.add_argument("-v", "--verbose", action="count", default=0)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hwmimo", description="Massive MIMO downlink hardware-impairment simulator")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("trial", help="Monte-Carlo trial of one configuration")
    _common(p)

    p = sub.add_parser("sweep", help="grid sweep over config fields")
    _common(p)
    p.add_argument("--spec", type=Path, help="YAML sweep spec with 'axes: [{path, values}]'")
    p.add_argument("--axis", type=_axis, action="append", default=[], metavar="PATH=[V1,V2,...]",
                   help="sweep axis, may be repeated")
    p.add_argument("--zip", action="store_true", help="zip the axes instead of crossing them")

    p = sub.add_parser("calibrate", help="fit stochastic models to the deterministic chain of the config")
    _common(p)
    p.add_argument("--model", choices=["additive", "multiplicative", "both"], default="both")
    p.add_argument("--tol", type=float, default=0.05, help="EVM tolerance in percentage points")

    p = sub.add_parser("preset", help="reproduce one figure")
    _common(p)
    p.add_argument("name", nargs="?", choices=sorted(PRESETS), help="preset name")
    p.add_argument("--list", action="store_true", help="list presets and exit")
    return ap


def _config(args) -> TrialConfig:
    cfg = load_config(args.config) if args.config else TrialConfig()
    over = dict(args.overrides)
    if args.seed is not None:
        over["master_seed"] = args.seed
    if args.realizations is not None:
        if args.realizations < 1:
            raise ConfigError("realizations must be >= 1")
        over["realizations"] = args.realizations
    try:
        return with_overrides(cfg, over) if over else cfg.validate()
    except TypeError as exc:
        raise ConfigError(f"wrongly typed override: {exc}") from exc


def _emit(tables: dict[str, Table], args, stem: str) -> None:
    if args.out is None:
        # stdout gets the main table only
        sys.stdout.write(to_csv_text(tables["summary"]))
        return
    for key, table in tables.items():
        name = f"{stem}.csv" if key == "summary" else f"{stem}_{key}.csv"
        path = write_csv(table, args.out / name)
        log.info("wrote %s", path)


def _cmd_trial(args) -> int:
    cfg = _config(args)
    res = run_trial(cfg, workers=args.workers)
    if args.format == "records":
        text = res.report().to_record() + "\n"
        if args.out is None:
            sys.stdout.write(text)
        else:
            args.out.mkdir(parents=True, exist_ok=True)
            (args.out / "trial.jsonl").write_text(text, encoding="utf-8")
        return EXIT_OK
    _emit(trial_tables(cfg, res), args, "trial")
    return EXIT_OK


def _cmd_sweep(args) -> int:
    cfg = _config(args)
    axes = list(args.axis)
    cross, n = not args.zip, args.realizations
    if args.spec:
        try:
            data = yaml.safe_load(args.spec.read_text(encoding="utf-8")) or {}
        except (OSError, yaml.YAMLError) as exc:
            raise ConfigError(f"cannot read sweep spec {args.spec}: {exc}") from exc
        spec = SweepSpec.from_dict(data)
        axes = spec.axes + axes
        cross = spec.cross and cross
        n = n or spec.realizations
    res = run_sweep(cfg, SweepSpec(axes, cross=cross, realizations=n), workers=args.workers)
    _emit(res.tables(), args, "sweep")
    return EXIT_OK if res.complete else EXIT_PARTIAL


def _cmd_calibrate(args) -> int:
    cfg = _config(args)
    det = run_trial(with_overrides(cfg, {"stochastic.model": "none"}), workers=args.workers)
    models = ["additive", "multiplicative"] if args.model == "both" else [args.model]
    brackets = {"additive": (0.0, 0.5), "multiplicative": (0.0, 0.3)}
    fits = {}
    for model in models:
        def evaluate(params, model=model):
            r = run_trial(_stochastic_cfg(cfg, model, params), workers=args.workers)
            return r.evm_mean, r.evm_stderr

        cal = stochastic.calibrate(model, det.evm_mean, evaluate, bracket=brackets[model], tol_pp=args.tol)
        fits[model] = cal
    table = fit_table({m: _Fit(m, c) for m, c in fits.items()}, cfg.master_seed)
    _emit({"summary": table}, args, "calibration")
    return EXIT_OK


class _Fit:
    """Adapter so single-point calibrations reuse the comparison fit table."""

    def __init__(self, model: str, cal: stochastic.CalibrationResult):
        self.model, self.params, self.calibration = model, cal.params, cal
        self.spearman = None
        self.max_abs_dev_pp = abs(cal.achieved_evm - cal.reference_evm)


def _cmd_preset(args) -> int:
    if args.list or not args.name:
        for name, p in PRESETS.items():
            print(f"{name:11s} {p.description}")
        return EXIT_OK
    cfg = _config(args)
    tables, n_errors = run_preset(args.name, cfg, workers=args.workers, realizations=args.realizations)
    _emit(tables, args, args.name)
    return EXIT_PARTIAL if n_errors else EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    if args.workers < 1:
        print("error: --workers must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    handler = {"trial": _cmd_trial, "sweep": _cmd_sweep, "calibrate": _cmd_calibrate, "preset": _cmd_preset}
    try:
        return handler[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NUMERIC_ERRORS as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())

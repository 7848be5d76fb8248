"""Parameter sweeps: one Monte-Carlo trial per grid point, failures kept as error rows."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from ..frontend import FrontendConvergenceError
from ..metrics import REPORT_COLUMNS
from ..stochastic import CalibrationError
from .config import ConfigError, SweepSpec, TrialConfig, config_hash, with_overrides
from .output import Table, split_complex
from .trial import TrialError, TrialResult, run_trial

__all__ = [
    "NUMERIC_ERRORS",
    "SweepResult",
    "run_sweep",
    "summary_columns",
    "trial_tables",
]

log = logging.getLogger(__name__)

NUMERIC_ERRORS = (
    TrialError,
    CalibrationError,
    FrontendConvergenceError,
    np.linalg.LinAlgError,
    FloatingPointError,
    ArithmeticError,
)

_CONTEXT_COLUMNS = ["n_antennas", "n_users", "kappa", "spacing", "realizations"]
_TAIL_COLUMNS = ["master_seed", "config_hash", "status", "error"]

REALIZATION_COLUMNS = [
    "point", "realization", "evm_pct_avg", "snr_db", "signal_power", "error_power",
    "aslr_db", "unwanted_rel_db", "alpha", "beta", "frontend_iterations",
]
USER_COLUMNS = ["point", "user", "evm_pct", "gain_re", "gain_im"]


def summary_columns(axis_paths=()) -> list[str]:
    """Column order of every summary table: point, sweep axes, context, metrics, provenance."""
    axes = [p for p in axis_paths if p.split(".")[-1] not in _CONTEXT_COLUMNS]
    return ["point", *axes, *_CONTEXT_COLUMNS, *REPORT_COLUMNS, *_TAIL_COLUMNS]


def _context(cfg: TrialConfig, n: int) -> dict:
    return {
        "n_antennas": cfg.array.n_antennas,
        "n_users": cfg.channel.n_users,
        "kappa": cfg.channel.kappa,
        "spacing": cfg.array.spacing,
        "realizations": n,
    }


def _summary_row(point: int, values: dict, cfg: TrialConfig, res: TrialResult) -> dict:
    row = {"point": point, **values, **_context(cfg, len(res.realizations))}
    row.update(res.report().to_row())
    row.update({"master_seed": cfg.master_seed, "config_hash": config_hash(cfg), "status": "ok", "error": None})
    return row


def _add_detail(res: TrialResult, point: int, reals: Table, users: Table) -> None:
    for i, r in enumerate(res.realizations):
        reals.add({
            "point": point, "realization": i, "evm_pct_avg": r.evm_avg, "snr_db": r.snr_db,
            "signal_power": r.signal_power, "error_power": r.error_power,
            "aslr_db": None if math.isnan(r.aslr_db) else r.aslr_db,
            "unwanted_rel_db": None if math.isnan(r.unwanted_rel_db) else r.unwanted_rel_db,
            "alpha": r.alpha, "beta": r.beta, "frontend_iterations": r.frontend_iterations,
        })
    per_user = np.mean([r.evm_per_user for r in res.realizations], axis=0)
    gains = np.mean([r.user_gain for r in res.realizations], axis=0)
    for k in range(per_user.size):
        users.add({"point": point, "user": k, "evm_pct": per_user[k], **split_complex("gain", gains[k])})


def trial_tables(cfg: TrialConfig, res: TrialResult) -> dict[str, Table]:
    """Summary, per-realization and per-user tables for a single trial."""
    summary = Table(summary_columns())
    summary.add(_summary_row(res.point, {}, cfg, res))
    reals, users = Table(list(REALIZATION_COLUMNS)), Table(list(USER_COLUMNS))
    _add_detail(res, res.point, reals, users)
    return {"summary": summary, "realizations": reals, "users": users}


@dataclass
class SweepResult:
    summary: Table
    realizations: Table
    users: Table
    n_errors: int

    @property
    def complete(self) -> bool:
        return self.n_errors == 0

    def tables(self) -> dict[str, Table]:
        return {"summary": self.summary, "realizations": self.realizations, "users": self.users}


def run_sweep(
    cfg: TrialConfig,
    spec: SweepSpec,
    workers: int = 1,
    pool: ProcessPoolExecutor | None = None,
) -> SweepResult:
    """Run every grid point of ``spec`` on top of ``cfg``.

    Point ``p`` draws its realizations from ``(master_seed, p, i)``. Config and
    numeric failures at a point become error rows and the sweep moves on;
    anything else is a bug and propagates.
    """
    points = spec.points()
    paths = [a.path for a in spec.axes]
    summary = Table(summary_columns(paths))
    reals, users = Table(list(REALIZATION_COLUMNS)), Table(list(USER_COLUMNS))
    n_errors = 0
    own = pool is None and workers > 1
    if own:
        pool = ProcessPoolExecutor(max_workers=workers)
    try:
        for p, over in enumerate(points):
            values = {k: v for k, v in over.items() if k.split(".")[-1] not in _CONTEXT_COLUMNS}
            try:
                pcfg = with_overrides(cfg, over)
                res = run_trial(pcfg, point=p, realizations=spec.realizations, pool=pool)
            except (ConfigError, *NUMERIC_ERRORS) as exc:
                n_errors += 1
                log.warning("sweep point %d %s failed: %s", p, over, exc)
                row = {"point": p, **values, "master_seed": cfg.master_seed,
                       "status": "config_error" if isinstance(exc, ConfigError) else "numeric_error",
                       "error": str(exc)}
                for k, v in over.items():
                    name = k.split(".")[-1]
                    if name in _CONTEXT_COLUMNS:
                        row[name] = v
                summary.add(row)
                continue
            summary.add(_summary_row(p, values, pcfg, res))
            _add_detail(res, p, reals, users)
    finally:
        if own:
            pool.shutdown()
    return SweepResult(summary, reals, users, n_errors)

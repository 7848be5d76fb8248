"""Figure-level experiments built on top of single trials.

Every experiment returns a :class:`~hwmimo.harness.output.Table` whose rows are
ordered by grid index, so the CSV is independent of how the work was scheduled.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .. import channel as ch
from .. import converters, frontend, precode, stochastic, waveform
from .config import TrialConfig, config_hash, with_overrides
from .output import Table
from .trial import TrialResult, coupling_for, realize_channel, run_trial, streams

__all__ = [
    "loglog_slope",
    "db_per_decade",
    "dither_residual",
    "distortion_averaging",
    "ComparisonFit",
    "calibrated_comparison",
    "fit_table",
    "snr_scaling",
]

log = logging.getLogger(__name__)


def loglog_slope(x, y) -> float:
    """Least-squares slope of ``log10(y)`` against ``log10(x)``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 2 or np.any(x <= 0) or np.any(y <= 0):
        raise ValueError("need at least two strictly positive points")
    return float(np.polyfit(np.log10(x), np.log10(y), 1)[0])


def db_per_decade(x, y_db) -> float:
    """Slope of a dB quantity per decade of ``x``."""
    x = np.asarray(x, dtype=float)
    return float(np.polyfit(np.log10(x), np.asarray(y_db, dtype=float), 1)[0])


def _map(fn, tasks, workers: int):
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(fn, tasks, chunksize=max(1, len(tasks) // (4 * workers))))
    return [fn(t) for t in tasks]


# --- dither reaching the users -------------------------------------------------


def _dither_one(args):
    seed, point, idx, M, K, n_samples, lsb = args
    rng = streams(seed, point, idx)
    H = ch.draw_iid(M, K, rng["channel"])
    eps = converters.draw_dither(M, n_samples, lsb, rng["dither"])
    proj = converters.null_projector(H)
    Hh = H.conj().T
    plain = Hh @ eps / M
    nspd = Hh @ (proj.P @ eps) / M
    return float(np.mean(np.abs(plain) ** 2)), float(np.mean(np.abs(nspd) ** 2))


def dither_residual(
    Ms=(16, 32, 64, 128, 256, 512, 1024),
    n_users: int = 10,
    realizations: int = 200,
    bits: int = 4,
    n_samples: int = 64,
    master_seed: int = 0,
    workers: int = 1,
) -> Table:
    """RMS dither seen by the users, ``(1/M) H^H eps`` with and without null-space projection.

    The dither is ``U(-LSB/2, LSB/2)`` per rail for a ``bits``-bit converter with
    unit full scale. Dividing by the coherent array gain ``M`` puts the residual
    on the same footing as the precoded signal.
    """
    lsb = converters.QuantizerConfig(bits, 1.0).lsb
    table = Table(["point", "n_antennas", "n_users", "realizations", "plain_rms", "nspd_rms", "lsb"])
    for point, M in enumerate(Ms):
        if M <= n_users:
            raise ValueError(f"null-space projection needs M > K (M={M}, K={n_users})")
        tasks = [(master_seed, point, i, M, n_users, n_samples, lsb) for i in range(realizations)]
        res = np.array(_map(_dither_one, tasks, workers))
        table.add({
            "point": point, "n_antennas": M, "n_users": n_users, "realizations": realizations,
            "plain_rms": float(np.sqrt(res[:, 0].mean())), "nspd_rms": float(np.sqrt(res[:, 1].mean())),
            "lsb": lsb,
        })
    table.meta["plain_slope"] = loglog_slope(table.column("n_antennas"), table.column("plain_rms"))
    return table


# --- averaging of coupling-induced distortion ---------------------------------


def _distortion_one(args):
    cfg, point, idx = args
    rngs = streams(cfg.master_seed, point, idx)
    wf = cfg.waveform
    qcfg = waveform.QamConfig(wf.qam_order, wf.symbols)
    pcfg = waveform.PulseConfig(wf.rolloff, wf.osr, wf.span_symbols)
    geom, _, H = realize_channel(cfg, rngs)
    K = cfg.channel.n_users
    s = waveform.map_qam(rngs["bits"].integers(0, 2, (K, wf.symbols * qcfg.bits_per_symbol)), qcfg)
    u = waveform.pulse_shape(s, pcfg)
    X, _ = precode.apply_precoder(precode.rzf(H, math.inf), u)

    pa = cfg.frontend.pa_params()
    drive = math.sqrt(geom.n_elements) * 10.0 ** (-cfg.frontend.backoff_db / 20.0)
    linearized = cfg.frontend.mode == "linearized"
    y = frontend.run_frontend(drive * X, coupling_for(cfg), pa, linearized=linearized).y
    y0 = frontend.pa_output(drive * X, np.zeros_like(X), pa).y
    Hh = H.H.conj().T
    d = Hh @ (y - y0) / drive
    sig = Hh @ X
    # the part of d along each user's own signal is a gain error, which EVM removes
    c = np.sum(d * sig.conj(), axis=1, keepdims=True) / np.sum(np.abs(sig) ** 2, axis=1, keepdims=True)
    resid = d - c * sig
    user = float(np.mean(np.mean(np.abs(resid) ** 2, axis=1) / np.mean(np.abs(sig) ** 2, axis=1)))
    antenna = float(np.mean(np.abs(y - y0) ** 2) / np.mean(np.abs(drive * X) ** 2))
    return user, antenna


def distortion_averaging(
    cfg: TrialConfig, Ms=(16, 64, 256), realizations: int | None = None, workers: int = 1
) -> Table:
    """Per-user coupling distortion power relative to the useful signal, against ``M``.

    The residual is ``H^H (y(S) - y(0))`` for a zero-forcing, noise-free link,
    i.e. only what mutual coupling adds on top of the uncoupled PAs, with each
    user's own-signal component projected out. ``antenna_dsr_db`` is the same
    distortion measured at the antenna ports, before any array averaging.
    """
    n = realizations or cfg.realizations
    table = Table(["point", "n_antennas", "n_users", "kappa", "realizations", "residual_db", "antenna_dsr_db"])
    for point, M in enumerate(Ms):
        pcfg = with_overrides(cfg, {"array.n_antennas": M, "frontend.enabled": True})
        vals = np.array(_map(_distortion_one, [(pcfg, point, i) for i in range(n)], workers))
        table.add({
            "point": point, "n_antennas": M, "n_users": cfg.channel.n_users,
            "kappa": cfg.channel.kappa, "realizations": n,
            "residual_db": float(10.0 * np.log10(vals[:, 0].mean())),
            # coupled distortion per antenna; it grows with M because edge elements have fewer neighbours
            "antenna_dsr_db": float(10.0 * np.log10(vals[:, 1].mean())),
        })
    x = table.column("n_antennas")
    table.meta["slope"] = db_per_decade(x, table.column("residual_db")) / 10.0
    return table


# --- stochastic versus deterministic ------------------------------------------


@dataclass
class ComparisonFit:
    model: str
    params: dict
    spearman: float
    max_abs_dev_pp: float
    calibration: stochastic.CalibrationResult


def _stochastic_cfg(cfg: TrialConfig, model: str, params: dict) -> TrialConfig:
    over = {"frontend.enabled": False, "dac.enabled": False, "stochastic.model": model}
    over.update({f"stochastic.{k}": v for k, v in params.items()})
    return with_overrides(cfg, over)


def calibrated_comparison(
    cfg: TrialConfig,
    Ms=(4, 16, 36, 64, 100),
    realizations: int | None = None,
    workers: int = 1,
    brackets: dict | None = None,
    tol_pp: float = 0.05,
    models=("additive", "multiplicative"),
) -> Table:
    """Deterministic hardware chain against both stochastic models fitted at the smallest ``M``.

    ``cfg`` describes the deterministic chain (PA, coupling, DAC). Each
    stochastic model is calibrated on the first grid point so that its mean EVM
    matches the deterministic one, then evaluated over the rest of the grid.
    All three families reuse the same seed batch at each grid point, so their
    differences are not masked by channel-draw noise.
    """
    brackets = {"additive": (0.0, 0.5), "multiplicative": (0.0, 0.3), **(brackets or {})}
    n = realizations or cfg.realizations
    det_cfg = with_overrides(cfg, {"stochastic.model": "none"})
    pool = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        def trial(c: TrialConfig, point: int, M: int) -> TrialResult:
            return run_trial(with_overrides(c, {"array.n_antennas": M}), point=point,
                             realizations=n, pool=pool)

        det = [trial(det_cfg, i, M) for i, M in enumerate(Ms)]
        fits: dict[str, ComparisonFit] = {}
        curves: dict[str, list[TrialResult]] = {}
        for model in models:
            def evaluate(params, model=model):
                r = trial(_stochastic_cfg(cfg, model, params), 0, Ms[0])
                return r.evm_mean, r.evm_stderr

            cal = stochastic.calibrate(model, det[0].evm_mean, evaluate, bracket=brackets[model], tol_pp=tol_pp)
            scfg = _stochastic_cfg(cfg, model, cal.params)
            curves[model] = [trial(scfg, i, M) for i, M in enumerate(Ms)]
            d = np.array([r.evm_mean for r in det])
            s = np.array([r.evm_mean for r in curves[model]])
            rho = float(stats.spearmanr(d, s)[0]) if np.ptp(d) > 0 and np.ptp(s) > 0 else math.nan
            fits[model] = ComparisonFit(model, cal.params, rho, float(np.max(np.abs(d - s))), cal)
            log.info("%s fit: params=%s spearman=%.3f max dev=%.3f pp",
                     model, cal.params, rho, fits[model].max_abs_dev_pp)
    finally:
        if pool is not None:
            pool.shutdown()

    cols = ["point", "n_antennas", "kappa", "realizations", "evm_det", "evm_det_stderr"]
    for model in models:
        cols += [f"evm_{model}", f"evm_{model}_stderr"]
    table = Table(cols)
    for i, M in enumerate(Ms):
        row = {"point": i, "n_antennas": M, "kappa": cfg.channel.kappa, "realizations": n,
               "evm_det": det[i].evm_mean, "evm_det_stderr": det[i].evm_stderr}
        for model in models:
            row[f"evm_{model}"] = curves[model][i].evm_mean
            row[f"evm_{model}_stderr"] = curves[model][i].evm_stderr
        table.add(row)
    table.meta.update({"fits": fits, "config_hash": config_hash(cfg), "master_seed": cfg.master_seed})
    return table


def fit_table(fits: dict[str, ComparisonFit], master_seed: int | None = None) -> Table:
    """Calibration outcome and fit diagnostics, one row per stochastic model."""
    table = Table(["model", "nu", "sigma_a2", "sigma_phi2", "reference_evm", "achieved_evm",
                   "achieved_stderr", "iterations", "spearman", "max_abs_dev_pp", "master_seed"])
    for model, f in fits.items():
        table.add({
            "model": model, "nu": f.params.get("nu"), "sigma_a2": f.params.get("sigma_a2"),
            "sigma_phi2": f.params.get("sigma_phi2"), "reference_evm": f.calibration.reference_evm,
            "achieved_evm": f.calibration.achieved_evm, "achieved_stderr": f.calibration.stderr,
            "iterations": f.calibration.iterations, "spearman": f.spearman,
            "max_abs_dev_pp": f.max_abs_dev_pp, "master_seed": master_seed,
        })
    return table


# --- SNR against M with and without power normalization -------------------------


def snr_scaling(
    cfg: TrialConfig,
    Ms=(4, 16, 36, 64, 100, 225),
    nu: float = 0.05,
    mult_scale: float = 0.15,
    realizations: int | None = None,
    workers: int = 1,
) -> Table:
    """SNR (no gain correction) and EVM against ``M`` for both stochastic models.

    The link is noise free so that only the impairment sets the SNR. Each
    (model, normalization) family reuses the seed batch of its grid point.
    """
    n = realizations or cfg.realizations
    base = with_overrides(cfg, {"link.snr_db": None, "frontend.enabled": False, "dac.enabled": False})
    params = {
        "additive": {"nu": nu},
        "multiplicative": {"sigma_a2": mult_scale**2, "sigma_phi2": mult_scale**2},
    }
    cols = ["point", "n_antennas", "realizations"]
    for model in params:
        for tag in ("norm", "raw"):
            cols += [f"snr_{model}_{tag}", f"evm_{model}_{tag}"]
    table = Table(cols)
    pool = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        for point, M in enumerate(Ms):
            row = {"point": point, "n_antennas": M, "realizations": n}
            for model, p in params.items():
                for tag, norm in (("norm", True), ("raw", False)):
                    c = _stochastic_cfg(base, model, p)
                    c = with_overrides(c, {"stochastic.normalize": norm, "array.n_antennas": M})
                    r = run_trial(c, point=point, realizations=n, pool=pool)
                    row[f"snr_{model}_{tag}"] = r.snr_db
                    row[f"evm_{model}_{tag}"] = r.evm_mean
            table.add(row)
    finally:
        if pool is not None:
            pool.shutdown()
    x = table.column("n_antennas")
    for model in params:
        for tag in ("norm", "raw"):
            table.meta[f"slope_{model}_{tag}"] = db_per_decade(x, table.column(f"snr_{model}_{tag}"))
    return table

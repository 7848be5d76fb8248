"""One downlink realization end to end, and Monte-Carlo trials over many realizations."""

from __future__ import annotations

import functools
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .. import channel as ch
from .. import converters, frontend, metrics, precode, stochastic, waveform
from ..io import read_s_matrix
from .config import ConfigError, TrialConfig, config_hash

__all__ = [
    "STREAM_NAMES",
    "streams",
    "RealizationResult",
    "TrialResult",
    "simulate",
    "realize_channel",
    "run_trial",
    "coupling_for",
    "TrialError",
]

log = logging.getLogger(__name__)

STREAM_NAMES = ("users", "channel", "bits", "dither", "impair", "noise")


def streams(master_seed: int, point: int, realization: int) -> dict[str, np.random.Generator]:
    """Independent named generators derived from ``(master_seed, point, realization)``."""
    root = np.random.SeedSequence([int(master_seed), int(point), int(realization)])
    return {
        name: np.random.default_rng(child)
        for name, child in zip(STREAM_NAMES, root.spawn(len(STREAM_NAMES)))
    }


@functools.lru_cache(maxsize=32)
def _coupling_cached(M, spacing, c0_db, decay_exp, ref_distance, max_rho, s_file):
    if s_file:
        S = read_s_matrix(s_file)
        if S.S.shape != (M, M):
            raise ConfigError(f"S-matrix file is {S.S.shape}, array has {M} elements")
        return S
    geom = ch.rect_array(M, spacing)
    return frontend.synth_coupling(geom, c0_db, decay_exp, ref_distance, max_rho)


def coupling_for(cfg: TrialConfig) -> frontend.CouplingMatrix:
    fe = cfg.frontend
    M = cfg.array.n_antennas
    if not fe.coupling:
        return frontend.CouplingMatrix(np.zeros((M, M), complex))
    return _coupling_cached(
        M, float(cfg.array.spacing), float(fe.c0_db), float(fe.decay_exp),
        float(fe.ref_distance), float(fe.max_spectral_radius), fe.s_matrix_file,
    )


def realize_channel(cfg: TrialConfig, rngs) -> tuple[ch.ArrayGeometry, ch.UserPlacement, ch.ChannelMatrix]:
    c = cfg.channel
    geom = ch.rect_array(cfg.array.n_antennas, cfg.array.spacing)
    if c.placement == "pinned":
        users = ch.UserPlacement(c.pinned_theta, c.pinned_phi)
    else:
        users = ch.draw_users(c.n_users, rngs["users"], c.theta_range, c.phi_range)
    if c.pair_separation_deg is not None:
        users = ch.pair_with_separation(users, c.pair_separation_deg)
    H_iid = ch.draw_iid(geom.n_elements, c.n_users, rngs["channel"])
    H = ch.rice_mix(H_iid, ch.los_matrix(geom, users), c.kappa)
    return geom, users, H


@dataclass
class RealizationResult:
    evm_per_user: np.ndarray
    evm_avg: float
    snr_db: float
    signal_power: float
    error_power: float
    aslr_db: float = math.nan
    unwanted_rel_db: float = math.nan
    frontend_iterations: int = 0
    user_gain: np.ndarray | None = None
    alpha: float = 1.0
    beta: float = 1.0
    extra: dict = field(default_factory=dict)


def simulate(cfg: TrialConfig, rngs) -> RealizationResult:
    """Run a single channel realization through the whole transmit/receive chain.

    Order: bits -> QAM -> RRC -> precoder -> [additive model] -> [DAC] -> [PA with
    coupling] -> channel (``H^H`` or the multiplicative map) -> matched filter ->
    gain removal -> receive noise -> metrics.
    """
    wf = cfg.waveform
    qcfg = waveform.QamConfig(wf.qam_order, wf.symbols)
    pcfg = waveform.PulseConfig(wf.rolloff, wf.osr, wf.span_symbols)
    taps = waveform.rrc_taps(pcfg)
    K = cfg.channel.n_users

    geom, users, H = realize_channel(cfg, rngs)
    M = geom.n_elements

    bits = rngs["bits"].integers(0, 2, (K, wf.symbols * qcfg.bits_per_symbol))
    s = waveform.map_qam(bits, qcfg)
    u = waveform.pulse_shape(s, pcfg, taps)

    snr_lin = math.inf
    if cfg.link.precoder == "rzf" and cfg.link.snr_db is not None:
        snr_lin = 10.0 ** (cfg.link.snr_db / 10.0)
    P = precode.rzf(H, snr_lin)
    X, P = precode.apply_precoder(P, u)
    g = precode.user_gains(H, P)

    result_extra: dict = {}
    alpha = beta = 1.0
    st = cfg.stochastic
    hardware = cfg.dac.enabled or cfg.frontend.enabled
    if st.model == "additive":
        raw, _ = stochastic.additive_impair(
            X, stochastic.AdditiveModelParams(st.nu), rngs["impair"], normalize=False
        )
        if st.normalize:
            alpha = float(np.linalg.norm(X) / np.linalg.norm(raw))
        # ahead of nonlinear hardware the scaling must be applied in place; otherwise
        # it is a pure link gain and is carried to the receiver as a scalar
        X = alpha * raw if hardware else raw

    X_in = X
    if cfg.dac.enabled:
        qc = converters.QuantizerConfig(
            cfg.dac.bits, cfg.dac.clip * converters.rail_rms(X), cfg.dac.dither
        )
        X = converters.dithered_quantize(X, qc, H, rngs["dither"])

    fe_iter = 0
    if cfg.frontend.enabled:
        pa = cfg.frontend.pa_params()
        drive = math.sqrt(M) * 10.0 ** (-cfg.frontend.backoff_db / 20.0)
        res = frontend.run_frontend(
            drive * X, coupling_for(cfg), pa, linearized=cfg.frontend.mode == "linearized"
        )
        if cfg.frontend.chain_gain_calibration:
            # per-chain loopback calibration sees each DAC+PA chain on its own,
            # so it removes the average compression but not the array coupling
            alone = frontend.pa_output(drive * X, np.zeros_like(X), pa).y
            c = np.vdot(X_in, alone) / np.vdot(X_in, X_in)
        else:
            c = drive
        X = res.y / c
        fe_iter = res.iterations
    elif cfg.dac.enabled and cfg.frontend.chain_gain_calibration:
        X = X * (np.vdot(X_in, X_in) / np.vdot(X_in, X))

    if st.model == "multiplicative":
        draw = stochastic.mult_impair(
            H,
            stochastic.MultiplicativeModelParams(st.sigma_a2, st.sigma_phi2),
            rngs["impair"],
            normalize=False,
        )
        downlink = draw.downlink
        if st.normalize:
            beta = float(np.linalg.norm(H.H) / np.linalg.norm(downlink))
    else:
        downlink = H.H.conj().T
    link_gain = (1.0 if hardware else alpha) * beta
    R = downlink @ X

    noise_var = precode.noise_variance(cfg.link.snr_db)
    noise = rngs["noise"]
    n_os = None
    if noise_var > 0 and cfg.link.noise_injection == "oversampled":
        std = g[:, None] * math.sqrt(noise_var / 2.0)
        n_os = std * (noise.standard_normal(R.shape) + 1j * noise.standard_normal(R.shape))
        n_os = waveform.matched_filter_decimate(n_os, pcfg, n_symbols=wf.symbols, taps=taps) / g[:, None]
    r = waveform.matched_filter_decimate(R, pcfg, n_symbols=wf.symbols, taps=taps)
    r = r / g[:, None]
    n = n_os
    if noise_var > 0 and cfg.link.noise_injection == "symbol":
        std = math.sqrt(noise_var / 2.0)
        n = std * (noise.standard_normal(r.shape) + 1j * noise.standard_normal(r.shape))

    # y is what the user sees; y_ref is the same stream referred back through the
    # link gain, which the EVM scalar removes anyway. Keeping the gain out of y_ref
    # makes the noise-free EVM exactly independent of the power normalizations.
    if link_gain == 1.0:
        y = y_ref = r if n is None else r + n
    else:
        y = link_gain * r if n is None else link_gain * r + n
        y_ref = r if n is None else r + n / link_gain

    if cfg.metrics.discard_edge_symbols and wf.symbols > 2 * wf.span_symbols:
        keep = slice(wf.span_symbols, wf.symbols - wf.span_symbols)
        s, y, y_ref = s[:, keep], y[:, keep], y_ref[:, keep]

    per_user, avg = metrics.evm(s, y_ref, rho=cfg.metrics.rho, per_user=cfg.metrics.per_user_rho)
    # least-squares complex gain of what each user actually sees
    user_gain = np.sum(np.conj(s) * y, axis=1) / np.sum(np.abs(s) ** 2, axis=1)
    sig = float(np.mean(np.abs(s) ** 2))
    err = float(np.mean(np.abs(s - y) ** 2))
    snr_db = math.inf if err == 0 else 10.0 * math.log10(sig / err)

    out = RealizationResult(
        evm_per_user=per_user, evm_avg=avg, snr_db=snr_db, signal_power=sig,
        error_power=err, frontend_iterations=fe_iter, user_gain=user_gain, alpha=alpha, beta=beta,
        extra=result_extra,
    )
    if cfg.metrics.emissions:
        m = cfg.metrics
        spectra = metrics.antenna_spectra(X, m.segment, m.overlap)
        useful = metrics.UsefulRegion.for_pulse(
            wf.rolloff, wf.osr, theta=tuple(m.useful_theta), phi=tuple(m.useful_phi)
        )
        pat = frontend.ElementPattern(cfg.frontend.pattern_exponent)
        grid = metrics.AngularGrid(m.angular_step_deg)
        p_use, p_unw = metrics.emission_powers(spectra, geom, pat, useful, grid)
        R_in = metrics.band_covariance(spectra, useful.bandwidth / 2.0)
        Hm = H.H
        rx = float(np.mean(np.real(np.einsum("mk,mn,nk->k", Hm.conj(), R_in, Hm))))
        out.aslr_db = metrics._db(p_use, p_unw) if p_unw > 0 else math.inf
        out.unwanted_rel_db = metrics._db(p_unw, rx)
    return out


class TrialError(RuntimeError):
    """A module error raised inside a realization, with the run context attached."""

    def __init__(self, message: str, context: dict | None = None):
        super().__init__(message)
        self.context = dict(context or {})

    def __reduce__(self):
        return type(self), (self.args[0], self.context)


def _one(args) -> RealizationResult:
    cfg, point, idx = args
    try:
        return simulate(cfg, streams(cfg.master_seed, point, idx))
    except ConfigError:
        raise
    except Exception as exc:
        ctx = {
            "error_type": type(exc).__name__,
            "config_hash": config_hash(cfg),
            "master_seed": cfg.master_seed,
            "point": point,
            "realization": idx,
            "n_antennas": cfg.array.n_antennas,
            "n_users": cfg.channel.n_users,
        }
        where = ", ".join(f"{k}={v}" for k, v in ctx.items() if k != "error_type")
        raise TrialError(f"{type(exc).__name__}: {exc} ({where})", ctx) from exc


@dataclass
class TrialResult:
    config: TrialConfig
    point: int
    realizations: list[RealizationResult]

    @property
    def evm_values(self) -> np.ndarray:
        return np.array([r.evm_avg for r in self.realizations])

    @property
    def evm_mean(self) -> float:
        return float(np.mean(self.evm_values))

    @property
    def evm_stderr(self) -> float:
        v = self.evm_values
        return float(np.std(v, ddof=1) / math.sqrt(v.size)) if v.size > 1 else 0.0

    @property
    def snr_db(self) -> float:
        sig = sum(r.signal_power for r in self.realizations)
        err = sum(r.error_power for r in self.realizations)
        return math.inf if err == 0 else 10.0 * math.log10(sig / err)

    def _mean_finite(self, name: str) -> float:
        v = np.array([getattr(r, name) for r in self.realizations], dtype=float)
        v = v[~np.isnan(v)]
        if v.size == 0:
            return math.nan
        # average in the linear domain, report in dB
        return float(10.0 * np.log10(np.mean(10.0 ** (v / 10.0))))

    @property
    def aslr_db(self) -> float:
        return self._mean_finite("aslr_db")

    @property
    def unwanted_rel_db(self) -> float:
        return self._mean_finite("unwanted_rel_db")

    def report(self) -> metrics.MetricsReport:
        per_user = np.mean([r.evm_per_user for r in self.realizations], axis=0)
        return metrics.MetricsReport(
            evm_pct_per_user=per_user,
            evm_pct_avg=self.evm_mean,
            snr_db=self.snr_db,
            aslr_db=None if math.isnan(self.aslr_db) else self.aslr_db,
            unwanted_rel_db=None if math.isnan(self.unwanted_rel_db) else self.unwanted_rel_db,
            meta={
                "config_hash": config_hash(self.config),
                "master_seed": self.config.master_seed,
                "point": self.point,
                "realizations": len(self.realizations),
                "evm_stderr": self.evm_stderr,
            },
        )


def run_trial(
    cfg: TrialConfig,
    point: int = 0,
    workers: int = 1,
    realizations: int | None = None,
    pool: ProcessPoolExecutor | None = None,
) -> TrialResult:
    """Monte-Carlo over independent realizations of one configuration.

    Realization ``i`` of point ``p`` always uses ``streams(master_seed, p, i)``,
    so results do not depend on the worker count.
    """
    cfg.validate()
    n = realizations or cfg.realizations
    tasks = [(cfg, point, i) for i in range(n)]
    if pool is not None:
        results = list(pool.map(_one, tasks, chunksize=max(1, n // (4 * 8))))
    elif workers > 1 and n > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_one, tasks, chunksize=max(1, n // (4 * workers))))
    else:
        results = [_one(t) for t in tasks]
    return TrialResult(cfg, point, results)

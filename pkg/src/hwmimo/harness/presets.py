"""Named experiment recipes, one per figure.

Each preset takes a base configuration (defaults unless the user supplies one),
layers its own settings on top and returns named tables ready for CSV.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from . import experiments
from .config import SweepAxis, SweepSpec, TrialConfig, with_overrides
from .output import Table
from .sweep import run_sweep

__all__ = ["Preset", "PRESETS", "run_preset", "SPACINGS", "BITS"]

SPACINGS = [0.35, 0.5, 0.75, 1.0, 1.25, 1.5]
BITS = [2, 3, 4, 5, 6, 7, 8]

# PA and array only, two of the four users 3 degrees apart in azimuth
_COUPLING = {"frontend.enabled": True, "channel.pair_separation_deg": 3.0}
# deterministic chain used for the model comparison
_FULL_CHAIN = {"frontend.enabled": True, "dac.enabled": True, "dac.bits": 6}


@dataclass(frozen=True)
class Preset:
    name: str
    description: str
    run: Callable[..., tuple[dict[str, Table], int]]


def _sweep(over: dict, axes: list[tuple[str, list]]):
    def run(cfg: TrialConfig, workers: int = 1, realizations: int | None = None):
        spec = SweepSpec([SweepAxis(p, list(v)) for p, v in axes], realizations=realizations)
        res = run_sweep(with_overrides(cfg, over), spec, workers=workers)
        return res.tables(), res.n_errors

    return run


def _fig4(cfg: TrialConfig, workers: int = 1, realizations: int | None = None):
    t = experiments.dither_residual(
        realizations=realizations or cfg.realizations, master_seed=cfg.master_seed, workers=workers
    )
    return {"summary": t}, 0


def _comparison(kappa: float):
    def run(cfg: TrialConfig, workers: int = 1, realizations: int | None = None):
        c = with_overrides(cfg, {**_FULL_CHAIN, "channel.kappa": kappa})
        t = experiments.calibrated_comparison(c, realizations=realizations, workers=workers)
        return {"summary": t, "fit": experiments.fit_table(t.meta["fits"], cfg.master_seed)}, 0

    return run


def _fig8(cfg: TrialConfig, workers: int = 1, realizations: int | None = None):
    t = experiments.snr_scaling(cfg, Ms=FIG8_ANTENNAS, nu=FIG8_NU, mult_scale=FIG8_MULT_SCALE,
                                realizations=realizations, workers=workers)
    return {"summary": t}, 0


# M = K makes zero forcing noise-limited by the Gram inverse, so the grid starts above it
FIG8_ANTENNAS = (16, 36, 64, 100, 144, 225)
FIG8_NU = 0.3
FIG8_MULT_SCALE = 0.15

PRESETS: dict[str, Preset] = {
    p.name: p
    for p in [
        Preset("fig1", "EVM vs element spacing, kappa=100, M in {16, 64, 144}",
               _sweep({**_COUPLING, "channel.kappa": 100.0},
                      [("array.n_antennas", [16, 64, 144]), ("array.spacing", SPACINGS)])),
        Preset("fig2", "EVM vs element spacing, M=64, kappa in {1, 10, 100}",
               _sweep({**_COUPLING, "array.n_antennas": 64},
                      [("channel.kappa", [1.0, 10.0, 100.0]), ("array.spacing", SPACINGS)])),
        Preset("fig3", "EVM vs element spacing, kappa=0, M in {16, 64, 144, 225}",
               _sweep({**_COUPLING, "channel.kappa": 0.0},
                      [("array.n_antennas", [16, 64, 144, 225]), ("array.spacing", SPACINGS)])),
        Preset("fig4", "dither reaching the users vs M, plain and null-space projected, K=10",
               _fig4),
        Preset("fig5", "EVM vs DAC bits and M, DAC only",
               _sweep({"dac.enabled": True},
                      [("array.n_antennas", [25, 64, 100, 144, 225]), ("dac.bits", BITS)])),
        Preset("fig6", "unwanted emissions vs DAC bits, DAC only and DAC with PA/array",
               _sweep({"dac.enabled": True, "metrics.emissions": True, "array.n_antennas": 64},
                      [("frontend.enabled", [False, True]), ("dac.bits", BITS)])),
        Preset("dither_evm", "EVM vs DAC bits without dither and with null-space dither, kappa in {0, 100}",
               _sweep({"dac.enabled": True, "array.n_antennas": 64},
                      [("channel.kappa", [0.0, 100.0]), ("dac.dither", ["none", "nspd"]),
                       ("dac.bits", [2, 3, 4, 5, 6])])),
        Preset("fig7a", "deterministic vs calibrated stochastic models, kappa=0", _comparison(0.0)),
        Preset("fig7b", "deterministic vs calibrated stochastic models, kappa=100", _comparison(100.0)),
        Preset("fig8", "SNR vs M for both stochastic models, with and without power normalization",
               _fig8),
    ]
}


def run_preset(
    name: str, cfg: TrialConfig | None = None, workers: int = 1, realizations: int | None = None
) -> tuple[dict[str, Table], int]:
    """Run preset ``name``. Returns its tables and the number of failed grid points."""
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    return PRESETS[name].run(cfg or TrialConfig(), workers=workers, realizations=realizations)

"""Link-level simulation of massive MU-MIMO downlinks with hardware impairments.

Submodules
----------
waveform    QAM mapping and root-raised-cosine pulse shaping
channel     array geometry and Rice channels
precode     regularized zero-forcing precoding
frontend    dual-input PA model with mutual coupling, far-field synthesis
converters  DAC quantization and dithering
stochastic  additive and multiplicative impairment models and their calibration
metrics     EVM, SNR and space-frequency emission metrics
harness     configuration, trials, sweeps and the command line
"""

__version__ = "0.1.0"

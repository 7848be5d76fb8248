import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from hwmimo.channel import draw_iid
from hwmimo.converters import (
    QuantizerConfig,
    dithered_quantize,
    draw_dither,
    null_projector,
    quantize,
    rail_rms,
)
from hwmimo.converters import with_fullscale
from hwmimo.metrics import evm

finite = st.floats(-3.0, 3.0, allow_nan=False)


def test_config_validation():
    for kw in ({"bits": 0}, {"bits": 17}, {"fullscale": 0.0}, {"dither": "triangular"}):
        with pytest.raises(ValueError):
            QuantizerConfig(**kw)
    assert QuantizerConfig(bits=6, fullscale=2.0).lsb == pytest.approx(2 * 2.0 / 64)


def test_one_bit():
    q = quantize(np.array([-2.0, -0.1, 0.0, 0.1, 3.0]), QuantizerConfig(bits=1))
    np.testing.assert_array_equal(q, [-0.5, -0.5, 0.5, 0.5, 0.5])


def test_level_arithmetic():
    cfg = QuantizerConfig(bits=2, fullscale=1.0)
    assert cfg.lsb == 0.5
    assert quantize(np.array([0.3]), cfg)[0] == 0.25
    levels = np.unique(quantize(np.linspace(-1.2, 1.2, 1001), cfg))
    np.testing.assert_array_equal(levels, [-0.75, -0.25, 0.25, 0.75])
    assert quantize(np.array([5.0]), QuantizerConfig(bits=4))[0] == 0.9375
    assert quantize(np.array([-5.0]), QuantizerConfig(bits=4))[0] == -0.9375


def test_complex_rails_independent():
    cfg = QuantizerConfig(bits=3)
    z = np.array([0.3 - 0.6j, -0.9 + 0.05j])
    np.testing.assert_array_equal(quantize(z, cfg), quantize(z.real, cfg) + 1j * quantize(z.imag, cfg))


@settings(max_examples=50, deadline=None)
@given(arrays(float, 40, elements=finite), st.integers(1, 12))
def test_idempotent(x, bits):
    cfg = QuantizerConfig(bits=bits, fullscale=1.5)
    q = quantize(x, cfg)
    np.testing.assert_array_equal(quantize(q, cfg), q)


@settings(max_examples=50, deadline=None)
@given(arrays(float, 40, elements=finite), st.integers(1, 12))
def test_monotone(x, bits):
    cfg = QuantizerConfig(bits=bits, fullscale=1.5)
    xs = np.sort(x)
    assert np.all(np.diff(quantize(xs, cfg)) >= 0)


@settings(max_examples=50, deadline=None)
@given(arrays(float, 40, elements=st.floats(-1.5, 1.5)), st.integers(1, 14))
def test_error_bound_in_range(x, bits):
    cfg = QuantizerConfig(bits=bits, fullscale=1.5)
    assert np.all(np.abs(x - quantize(x, cfg)) <= cfg.lsb / 2 * (1 + 1e-12))


def test_dither_statistics():
    rng = np.random.default_rng(0)
    lsb = 0.125
    e = draw_dither(100, 2000, lsb, rng)
    for rail in (e.real, e.imag):
        assert np.var(rail) == pytest.approx(lsb**2 / 12, rel=0.05)
        assert np.max(np.abs(rail)) <= lsb / 2
    np.testing.assert_array_equal(e, draw_dither(100, 2000, lsb, np.random.default_rng(0)))
    with pytest.raises(ValueError):
        draw_dither(4, 4, 0.0, rng)


def test_projector_trivial_cases():
    H = draw_iid(4, 4, np.random.default_rng(1))
    assert np.max(np.abs(null_projector(H).P)) < 1e-12
    np.testing.assert_array_equal(null_projector(np.zeros((5, 0))).P, np.eye(5))
    P = null_projector(draw_iid(8, 3, np.random.default_rng(2))).P
    assert abs(np.trace(P).real - 5) < 1e-9


def test_projector_rank_deficient():
    H = draw_iid(8, 2, np.random.default_rng(3))
    H = np.column_stack([H[:, 0], 2 * H[:, 0]])
    with pytest.raises(np.linalg.LinAlgError):
        null_projector(H)
    with pytest.raises(ValueError):
        null_projector(np.ones((2, 3)))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 10), st.integers(1, 60))
def test_projector_suite(seed, K, extra):
    rng = np.random.default_rng(seed)
    M = K + extra
    H = draw_iid(M, K, rng)
    P = null_projector(H).P
    assert np.linalg.norm(P @ P - P) <= 1e-10
    assert np.linalg.norm(P @ H) <= 1e-10 * np.linalg.norm(H)
    np.testing.assert_allclose(P, P.conj().T, atol=1e-14)
    assert abs(np.trace(P).real - (M - K)) < 1e-9
    eps = draw_dither(M, 50, 0.1, rng)
    Hh = H.conj().T
    assert np.linalg.norm(Hh @ P @ eps) / np.linalg.norm(Hh @ eps) < 1e-10


def test_dither_modes():
    rng = np.random.default_rng(4)
    H = draw_iid(16, 4, rng)
    x = 0.3 * (rng.standard_normal((16, 100)) + 1j * rng.standard_normal((16, 100)))
    plain = QuantizerConfig(bits=4)
    np.testing.assert_array_equal(dithered_quantize(x, plain), quantize(x, plain))
    nspd = QuantizerConfig(bits=4, dither="nspd")
    a = dithered_quantize(x, nspd, H, np.random.default_rng(5))
    b = dithered_quantize(x, nspd, H, np.random.default_rng(5))
    np.testing.assert_array_equal(a, b)
    with pytest.raises(ValueError):
        dithered_quantize(x, QuantizerConfig(dither="uniform"))
    with pytest.raises(ValueError):
        dithered_quantize(x, nspd, rng=rng)
    with pytest.raises(ValueError):
        dithered_quantize(x[:4], nspd, draw_iid(4, 4, rng), rng)


def test_nspd_perturbation_invisible_to_users():
    rng = np.random.default_rng(6)
    H = draw_iid(32, 4, rng)
    cfg = QuantizerConfig(bits=4, dither="nspd")
    eps = draw_dither(32, 200, cfg.lsb, np.random.default_rng(7))
    pert = null_projector(H).P @ eps
    Hh = H.conj().T
    assert np.linalg.norm(Hh @ pert) / np.linalg.norm(Hh @ eps) < 1e-10


@pytest.mark.parametrize("mode", ["none", "uniform", "nspd"])
def test_16_bit_transparent(mode):
    rng = np.random.default_rng(8)
    H = draw_iid(32, 4, rng)
    x = (rng.standard_normal((32, 2000)) + 1j * rng.standard_normal((32, 2000))) / np.sqrt(64)
    peak = max(np.abs(x.real).max(), np.abs(x.imag).max())
    cfg = with_fullscale(QuantizerConfig(bits=16, dither=mode), x, 1.01 * peak / rail_rms(x))
    q = dithered_quantize(x, cfg, H, rng)
    _, avg = evm(x, q, per_user=False)
    assert avg < 0.1


def test_rail_rms():
    assert rail_rms(np.full(10, 1 + 1j)) == pytest.approx(1.0)

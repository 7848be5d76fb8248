import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hwmimo.channel import (
    UserPlacement,
    channel_correlation,
    draw_iid,
    draw_users,
    grid_shape,
    los_matrix,
    pair_with_separation,
    rect_array,
    rice_mix,
)


@pytest.mark.parametrize("M,shape", [(1, (1, 1)), (4, (2, 2)), (10, (4, 3)), (64, (8, 8)), (225, (15, 15))])
def test_grid_shape(M, shape):
    assert grid_shape(M) == shape
    g = rect_array(M, 0.5)
    assert g.n_elements == M
    np.testing.assert_allclose(g.positions.mean(axis=0)[0] if M in (1, 4, 64, 225) else 0.0, 0.0, atol=1e-12)


def test_broadside_all_ones():
    g = rect_array(16, 0.7)
    H = los_matrix(g, UserPlacement([0.0, 0.0], [10.0, -40.0]))
    np.testing.assert_allclose(H, 1.0, atol=1e-15)


def test_single_element_all_ones():
    H = los_matrix(rect_array(1), UserPlacement([10, -25, 30], [5, 50, -60]))
    np.testing.assert_allclose(H, 1.0)


def test_ula_progression():
    d, phi = 0.5, 17.0
    g = rect_array(16, d)
    column = np.flatnonzero(np.isclose(g.positions[:, 0], g.positions[0, 0]))
    h = los_matrix(g, UserPlacement([90.0], [phi]))[column, 0]
    m = np.arange(column.size)
    ref = np.exp(2j * np.pi * d * m * np.sin(np.deg2rad(phi)))
    np.testing.assert_allclose(h / h[0], ref, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 100), st.floats(0.2, 2.0), st.floats(-90, 90), st.floats(-90, 90))
def test_los_unit_modulus(M, d, th, ph):
    H = los_matrix(rect_array(M, d), UserPlacement([th], [ph]))
    np.testing.assert_allclose(np.abs(H), 1.0, atol=1e-12)


def test_rice_weights():
    rng = np.random.default_rng(0)
    A, B = draw_iid(8, 3, rng), draw_iid(8, 3, rng)
    np.testing.assert_array_equal(rice_mix(A, B, 0.0).H, A)
    np.testing.assert_allclose(rice_mix(A, B, 1.0).H, (A + B) / np.sqrt(2), atol=1e-15)
    H100 = rice_mix(A, B, 100.0).H
    los = np.sqrt(100 / 101) * B
    assert np.linalg.norm(H100 - los) / np.linalg.norm(los) < 0.15
    with pytest.raises(ValueError):
        rice_mix(A, B[:, :2], 1.0)
    with pytest.raises(ValueError):
        rice_mix(A, B, -1.0)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0, 1e3))
def test_reconstruction(seed, kappa):
    rng = np.random.default_rng(seed)
    geom = rect_array(12, 0.5)
    c = rice_mix(draw_iid(12, 2, rng), los_matrix(geom, draw_users(2, rng)), kappa)
    ref = np.sqrt(1 / (1 + c.kappa)) * c.H_iid + np.sqrt(c.kappa / (1 + c.kappa)) * c.H_los
    assert np.max(np.abs(c.H - ref)) <= 1e-14


def test_correlation_trivial():
    g = rect_array(64, 0.5)
    H = los_matrix(g, UserPlacement([0.0, 0.0, 20.0], [0.0, 30.0, 10.0]))
    assert channel_correlation(H, 0, 0) == pytest.approx(1.0)
    assert channel_correlation(H, 0, 1) == pytest.approx(1.0)
    with pytest.raises(IndexError):
        channel_correlation(H, 0, 3)


def test_correlation_brute_force():
    rng = np.random.default_rng(5)
    g = rect_array(64, 0.5)
    users = pair_with_separation(UserPlacement([15.0, -5.0], [20.0, 0.0]), 3.0)
    assert users.theta[1] == users.theta[0] and users.phi[1] == 23.0
    c = rice_mix(draw_iid(64, 2, rng), los_matrix(g, users), 100.0)
    acc = 0j
    for m in range(64):
        acc += np.conj(c.H[m, 0]) * c.H[m, 1]
    assert channel_correlation(c, 0, 1) == pytest.approx(acc / 64, abs=1e-14)


def test_iid_decorrelation():
    rng = np.random.default_rng(9)
    acc = np.mean([channel_correlation(draw_iid(64, 2, rng), 0, 1) for _ in range(200)])
    assert abs(acc) <= 0.05


def test_correlation_non_decreasing_in_kappa():
    rng = np.random.default_rng(4)
    g = rect_array(64, 0.5)
    users = pair_with_separation(UserPlacement([10.0, 0.0], [0.0, 0.0]), 3.0)
    H_los = los_matrix(g, users)
    draws = [draw_iid(64, 2, rng) for _ in range(200)]
    curve = [
        np.mean([abs(channel_correlation(rice_mix(A, H_los, k), 0, 1)) for A in draws])
        for k in (0.0, 1.0, 10.0, 100.0, 1000.0)
    ]
    assert np.all(np.diff(curve) >= 0)


def test_users_in_sector():
    u = draw_users(500, np.random.default_rng(1))
    assert u.n_users == 500
    assert np.all(np.abs(u.theta) <= 30) and np.all(np.abs(u.phi) <= 60)

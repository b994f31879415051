import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from camisac.channel import (
    ChannelParams,
    generate_channel,
    generate_channels,
    rate_lte,
    rate_mmwave,
    sinr_db,
    sinr_db_all,
    steering_vector,
    sum_rate,
)

# rate_mmwave(gamma=1, B=1, L=14, Lp=2, var=2) from the extended-precision oracle
GOLDEN_RATE = 14.300575204559931387


def test_steering_vector_cases():
    np.testing.assert_allclose(steering_vector(0.0, 4, 1.0, 2.0), np.full(4, 0.5))
    np.testing.assert_allclose(steering_vector(np.pi / 2, 2, 0.5, 1.0), np.array([1, -1]) / np.sqrt(2), atol=1e-15)


@settings(max_examples=100, deadline=None)
@given(
    st.floats(-np.pi, np.pi),
    st.integers(1, 64),
    st.floats(1e-4, 10.0),
    st.floats(1e-4, 10.0),
)
def test_steering_vector_unit_norm(phi, M, d, lam):
    assert np.linalg.norm(steering_vector(phi, M, d, lam)) == pytest.approx(1.0, abs=1e-12)


def test_single_path_closed_form():
    p = ChannelParams(n_antennas=6, n_paths=1)
    ch = generate_channel(p, None, gains=[1.0], angles=[0.0])
    np.testing.assert_allclose(ch.h, np.ones(6), atol=1e-14)
    assert ch.rat_wavelength == p.wavelength


def test_channel_energy_statistics():
    p = ChannelParams(n_antennas=8, n_paths=5)
    rng = np.random.default_rng(0)
    H = generate_channels(p, 100_000, rng)
    mean_energy = np.mean(np.sum(np.abs(H) ** 2, axis=1))
    assert mean_energy == pytest.approx(8.0, rel=0.03)


def test_channel_determinism():
    p = ChannelParams(n_antennas=4, n_paths=3)
    a = generate_channel(p, np.random.default_rng(5)).h
    b = generate_channel(p, np.random.default_rng(5)).h
    np.testing.assert_array_equal(a, b)


def test_params_validation():
    with pytest.raises(ValueError):
        ChannelParams(symbols_per_slot=2, pilot_symbols=2)
    with pytest.raises(ValueError):
        ChannelParams(noise_power=0.0)


def _unit_geometry(**kw):
    # lambda = 4*pi*d0 cancels the reference-loss term
    return ChannelParams(n_antennas=2, wavelength=4 * np.pi, reference_distance=1.0, **kw)


def test_sinr_single_user_zero_db():
    p = _unit_geometry(noise_power=1.0)
    assert sinr_db(0, np.array([[1, 0]]), np.array([[1, 0]]), [1], p, 1.0) == pytest.approx(0.0, abs=1e-12)


def test_sinr_unit_interference():
    p = _unit_geometry(noise_power=1e-300)
    H = np.array([[1, 0], [0, 1]])
    W = np.array([[1, 0], [1, 0]])
    assert sinr_db(0, H, W, [1, 1], p, 1.0) == pytest.approx(0.0, abs=1e-9)


def test_sinr_zero_signal_returns_floor():
    p = _unit_geometry()
    assert sinr_db(0, np.array([[1, 0]]), np.array([[0, 1]]), [1], p, 1.0) == -200.0
    assert sinr_db(0, np.array([[1, 0]]), np.array([[0, 1]]), [1], p, 1.0, floor_db=-90) == -90.0


def test_sinr_printed_unsquared_interference():
    p = _unit_geometry(noise_power=1e-300)
    H = np.array([[1, 0], [0, 1]])
    W = np.array([[1, 0], [0.5, 0]])
    squared = sinr_db(0, H, W, [1, 1], p, 1.0)
    printed = sinr_db(0, H, W, [1, 1], p, 1.0, interference_exponent=1)
    assert squared == pytest.approx(10 * math.log10(1 / 0.25))
    assert printed == pytest.approx(10 * math.log10(1 / 0.5))


def _sinr_oracle(n, H, W, x, p, d):
    # straight transcription with mpmath
    with mpmath.workdps(40):
        sig = abs(sum(mpmath.mpc(complex(np.conj(H[n, m]) * W[n, m])) for m in range(H.shape[1]))) ** 2
        interf = mpmath.mpf(0)
        for i in range(len(x)):
            if i != n and x[i] == x[n]:
                interf += abs(sum(mpmath.mpc(complex(np.conj(H[n, m]) * W[i, m])) for m in range(H.shape[1]))) ** 2
        val = (10 * mpmath.log10(sig / (interf + p.noise_power))
               - 20 * mpmath.log10(p.wavelength / (4 * mpmath.pi * p.reference_distance))
               + 10 * p.pathloss_exponent * mpmath.log10(d / p.reference_distance))
        return float(val)


def test_sinr_matches_oracle_random():
    rng = np.random.default_rng(2)
    p = ChannelParams(n_antennas=4, noise_power=1e-3, pathloss_exponent=2.7)
    for _ in range(10):
        H = rng.normal(size=(5, 4)) + 1j * rng.normal(size=(5, 4))
        W = rng.normal(size=(5, 4)) + 1j * rng.normal(size=(5, 4))
        x = rng.integers(0, 2, 5)
        d = rng.uniform(5, 100)
        for n in range(5):
            assert sinr_db(n, H, W, x, p, d) == pytest.approx(_sinr_oracle(n, H, W, x, p, d), abs=1e-9)


def test_sinr_all_matches_scalar():
    rng = np.random.default_rng(4)
    mm = ChannelParams(n_antennas=4, wavelength=0.002)
    lte = ChannelParams(n_antennas=4, wavelength=0.1, n_paths=9)
    Hmm = rng.normal(size=(6, 4)) + 1j * rng.normal(size=(6, 4))
    Hlte = rng.normal(size=(6, 4)) + 1j * rng.normal(size=(6, 4))
    W = rng.normal(size=(6, 4)) + 1j * rng.normal(size=(6, 4))
    x = np.array([1, 0, 1, 1, 0, 0])
    d = rng.uniform(10, 90, 6)
    H_own = np.where(x[:, None] == 1, Hmm, Hlte)
    got = sinr_db_all(H_own, W, x, (mm, lte), d)
    for n in range(6):
        H, p = (Hmm, mm) if x[n] else (Hlte, lte)
        assert got[n] == pytest.approx(sinr_db(n, H, W, x, p, d[n]), abs=1e-10)


def test_sinr_phase_invariance():
    rng = np.random.default_rng(9)
    p = ChannelParams(n_antennas=4)
    H = rng.normal(size=(3, 4)) + 1j * rng.normal(size=(3, 4))
    W = rng.normal(size=(3, 4)) + 1j * rng.normal(size=(3, 4))
    x = [1, 1, 0]
    rotated = W * np.exp(1j * 0.77)
    for n in range(3):
        assert sinr_db(n, H, rotated, x, p, 20.0) == pytest.approx(sinr_db(n, H, W, x, p, 20.0), abs=1e-10)


def test_interference_partition():
    # moving user 2 to the other RAT removes exactly its term from user 0's sum
    p = ChannelParams(n_antennas=3, noise_power=0.5, wavelength=4 * np.pi)
    rng = np.random.default_rng(1)
    H = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    W = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    proj = np.abs(W @ H[0].conj()) ** 2
    both = sinr_db(0, H, W, [1, 1, 1], p, 1.0)
    moved = sinr_db(0, H, W, [1, 1, 0], p, 1.0)
    assert both == pytest.approx(10 * math.log10(proj[0] / (proj[1] + proj[2] + 0.5)))
    assert moved == pytest.approx(10 * math.log10(proj[0] / (proj[1] + 0.5)))


def test_rate_mmwave_golden():
    p = ChannelParams(bandwidth=1.0, symbols_per_slot=14, pilot_symbols=2, channel_variance=2.0)
    assert rate_mmwave(1.0, p) == pytest.approx(GOLDEN_RATE, rel=1e-12)


def test_rate_mmwave_properties():
    p = ChannelParams(bandwidth=3.0)
    assert rate_mmwave(2.0, p) > rate_mmwave(1.0, p)
    assert rate_mmwave(5.0, p.with_(bandwidth=6.0)) == pytest.approx(2 * rate_mmwave(5.0, p), rel=1e-15)
    for bad in (0.0, -1.0, float("inf")):
        with pytest.raises(ValueError):
            rate_mmwave(bad, p)


def test_rate_mmwave_matches_oracle():
    from oracles import rate_mmwave_mp
    p = ChannelParams(bandwidth=2.5, symbols_per_slot=14, pilot_symbols=3, channel_variance=1.5)
    for g in (0.05, 0.3, 1.0, 7.0, 1e3, 1e9, 1e20):
        assert rate_mmwave(g, p) == pytest.approx(float(rate_mmwave_mp(g, 2.5, 14, 3, 1.5)), rel=1e-11)


def test_rates_monotone_on_grid():
    p = ChannelParams(bandwidth=1.0)
    grid = np.logspace(-6, 22, 400)
    mm = [rate_mmwave(g, p) for g in grid]
    lte = [rate_lte(g, 1.0) for g in grid]
    assert all(v > 0 for v in mm)
    assert all(b > a for a, b in zip(mm, mm[1:]))
    assert all(b >= a for a, b in zip(lte, lte[1:]))


def test_rate_lte_closed_forms():
    assert rate_lte(1.0, 1.0) == 1.0
    assert rate_lte(3.0, 2.0) == 4.0
    assert rate_lte(0.0, 5.0) == 0.0
    with pytest.raises(ValueError):
        rate_lte(-0.1, 1.0)


def test_sum_rate():
    assert sum_rate([0, 0, 0], [1, 0, 1]) == 0
    assert sum_rate([1, 2, 3], [1, 0, 1]) == 6
    rng = np.random.default_rng(0)
    rates = rng.uniform(0, 1e9, 12)
    x = rng.integers(0, 2, 12)
    total = 0.0
    for r, xi in zip(rates, x):
        total += r
    assert sum_rate(rates, x) == pytest.approx(total, rel=1e-14)

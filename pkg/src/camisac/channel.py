"""mmWave / LTE link model: geometric channels, SINR and per-user rates."""

import math
from dataclasses import dataclass, replace

import numpy as np

from .numerics import exp_times_ei

LN2 = math.log(2.0)


@dataclass(frozen=True)
class ChannelParams:
    """Link parameters for one radio access technology.

    ``antenna_spacing=None`` means half a wavelength. ``symbols_per_slot`` and
    ``pilot_symbols`` only matter for the mmWave rate expression.
    """

    n_antennas: int = 16
    n_paths: int = 5
    wavelength: float = 0.002
    antenna_spacing: float | None = None
    pathloss_exponent: float = 2.0
    reference_distance: float = 1.0
    noise_power: float = 1e-9
    channel_variance: float = 2.0
    bandwidth: float = 1e7
    symbols_per_slot: int = 14
    pilot_symbols: int = 2

    def __post_init__(self):
        if self.n_antennas < 1 or self.n_paths < 1:
            raise ValueError("n_antennas and n_paths must be >= 1")
        if not self.symbols_per_slot > self.pilot_symbols >= 1:
            raise ValueError("need symbols_per_slot > pilot_symbols >= 1")
        for name in ("wavelength", "pathloss_exponent", "reference_distance",
                     "noise_power", "channel_variance", "bandwidth"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.antenna_spacing is not None and not self.antenna_spacing > 0:
            raise ValueError("antenna_spacing must be positive")

    @property
    def spacing(self):
        return self.wavelength / 2 if self.antenna_spacing is None else self.antenna_spacing

    def with_(self, **changes):
        return replace(self, **changes)


@dataclass(frozen=True)
class UserChannel:
    h: np.ndarray
    rat_wavelength: float


def steering_vector(phi, n_antennas, spacing, wavelength):
    """Uniform linear array response toward departure angle ``phi`` (unit norm)."""
    m = np.arange(n_antennas)
    phase = 2 * np.pi / wavelength * spacing * m * np.sin(phi)
    return np.exp(1j * phase) / np.sqrt(n_antennas)


def generate_channel(params, rng, gains=None, angles=None):
    """Draw one narrow-band multipath channel.

    ``gains`` (complex, one per path) and ``angles`` (radians) may be pinned;
    otherwise gains are unit-variance circular Gaussian and angles are
    uniform on [-pi/2, pi/2].
    """
    M, n_paths = params.n_antennas, params.n_paths
    if gains is None:
        gains = (rng.standard_normal(n_paths) + 1j * rng.standard_normal(n_paths)) / np.sqrt(2)
    if angles is None:
        angles = rng.uniform(-np.pi / 2, np.pi / 2, n_paths)
    gains = np.asarray(gains, dtype=complex).reshape(n_paths)
    angles = np.asarray(angles, dtype=float).reshape(n_paths)
    m = np.arange(M)
    steer = np.exp(1j * 2 * np.pi / params.wavelength * params.spacing
                   * np.outer(np.sin(angles), m)) / np.sqrt(M)
    h = np.sqrt(M / n_paths) * (gains @ steer)
    return UserChannel(h=h, rat_wavelength=params.wavelength)


def generate_channels(params, n_users, rng):
    """Stack of independent channels, shape ``(n_users, M)``."""
    return np.stack([generate_channel(params, rng).h for _ in range(n_users)])


def geometry_gain_db(params, distance):
    """Distance-dependent terms added to the small-scale SINR in dB."""
    d0 = params.reference_distance
    return (-20 * np.log10(params.wavelength / (4 * np.pi * d0))
            + 10 * params.pathloss_exponent * np.log10(np.asarray(distance) / d0))


def _as_matrix(channels):
    if isinstance(channels, np.ndarray):
        return np.atleast_2d(channels)
    return np.stack([c.h if isinstance(c, UserChannel) else np.asarray(c) for c in channels])


def sinr_db(n, channels, W, x, params, distance, interference_exponent=2, floor_db=-200.0):
    """SINR of user ``n`` in dB.

    ``channels[n]`` must be user n's channel on its own RAT; only users
    sharing that RAT (``x[i] == x[n]``) interfere. Returns ``floor_db`` when
    the useful signal is exactly zero.
    """
    H = _as_matrix(channels)
    W = np.atleast_2d(np.asarray(W, dtype=complex))
    x = np.asarray(x)
    if not distance > 0:
        raise ValueError("distance must be positive")
    proj = np.abs(W @ H[n].conj())
    signal = proj[n] ** 2
    if signal == 0:
        return float(floor_db)
    same = (x == x[n])
    same[n] = False
    interference = np.sum(proj[same] ** interference_exponent)
    ratio_db = 10 * math.log10(signal / (interference + params.noise_power))
    return float(max(ratio_db + geometry_gain_db(params, distance), floor_db))


def sinr_db_all(H_own, W, x, params_by_user, distances, interference_exponent=2, floor_db=-200.0):
    """Vectorized SINR for every user.

    ``H_own[n]`` is user n's channel on the RAT selected by ``x[n]`` and
    ``params_by_user`` gives per-user (noise_power, wavelength, reference
    distance, pathloss exponent) through a pair ``(mm_params, lte_params)``.
    """
    mm, lte = params_by_user
    x = np.asarray(x).astype(bool)
    proj = np.abs(np.conj(H_own) @ W.T)  # proj[n, i] = |h_n^H w_i|
    signal = np.diag(proj) ** 2
    same = x[:, None] == x[None, :]
    np.fill_diagonal(same, False)
    interference = np.sum(np.where(same, proj ** interference_exponent, 0.0), axis=1)
    noise = np.where(x, mm.noise_power, lte.noise_power)
    with np.errstate(divide="ignore"):
        ratio_db = 10 * np.log10(signal / (interference + noise))
    geo = np.where(x, geometry_gain_db(mm, distances), geometry_gain_db(lte, distances))
    out = np.maximum(ratio_db + geo, floor_db)
    return np.where(signal == 0, floor_db, out)


def db_to_linear(value_db):
    return 10.0 ** (np.asarray(value_db, dtype=float) / 10.0)


def rate_mmwave(gamma, params):
    """Achievable mmWave rate (bit/s) for linear SINR ``gamma`` with pilot overhead."""
    gamma = float(gamma)
    if not gamma > 0 or not math.isfinite(gamma):
        raise ValueError(f"gamma must be positive and finite, got {gamma}")
    L, Lp, var = params.symbols_per_slot, params.pilot_symbols, params.channel_variance
    eps = var * gamma * Lp
    # 1 - 1/(1+eps) written without cancellation
    denom = eps / (1.0 + eps) * LN2
    z1 = (1.0 + gamma * Lp) / gamma
    z2 = 1.0 / (gamma * var)
    bracket = exp_times_ei(z1) - exp_times_ei(z2)
    return params.bandwidth * (L - Lp) / denom * bracket


def rate_lte(gamma, bandwidth):
    gamma = float(gamma)
    if gamma < 0:
        raise ValueError(f"gamma must be >= 0, got {gamma}")
    return bandwidth * math.log2(1.0 + gamma)


def sum_rate(rates, x):
    """Total rate: mmWave users plus LTE users (``x`` only selects the partition)."""
    rates = np.asarray(rates, dtype=float)
    x = np.asarray(x).astype(bool)
    return float(np.sum(rates[x]) + np.sum(rates[~x]))

"""Sensing channel and sensing mutual information of the mmWave precoders."""

import logging
import math
from dataclasses import dataclass

import numpy as np

from .channel import steering_vector
from .numerics import frobenius_norm_sq, hermitian, lu_factor

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SensingConfig:
    noise_variance: float = 1.0
    ofdm_symbols: int = 128
    rice_factor: float = 3.0
    n_antennas: int = 16

    def __post_init__(self):
        if not self.noise_variance > 0:
            raise ValueError("noise_variance must be positive")
        if self.ofdm_symbols < 1:
            raise ValueError("ofdm_symbols must be >= 1")
        if not self.rice_factor >= 0:
            raise ValueError("rice_factor must be >= 0")
        if self.n_antennas < 1:
            raise ValueError("n_antennas must be >= 1")


def generate_sensing_channel(cfg, rng, los_angle=None):
    """Rician M x M sensing channel scaled so its squared Frobenius norm is M.

    The LoS part is ``M * a a^H`` (unit-modulus entries, same per-entry power
    as the diffuse part). ``rice_factor=inf`` gives the pure rank-one matrix.
    """
    M = cfg.n_antennas
    if los_angle is None:
        los_angle = rng.uniform(-np.pi / 2, np.pi / 2)
    a = steering_vector(los_angle, M, 0.5, 1.0)
    los = M * np.outer(a, a.conj())
    K = cfg.rice_factor
    if math.isinf(K):
        g = los
    else:
        nlos = (rng.standard_normal((M, M)) + 1j * rng.standard_normal((M, M))) / np.sqrt(2)
        g = np.sqrt(K / (K + 1)) * los + np.sqrt(1 / (K + 1)) * nlos
    return g * np.sqrt(M / frobenius_norm_sq(g))


def transmit_covariance(W, x):
    """``W_mm^H W_mm`` for the rows selected by ``x`` (M x M)."""
    W = np.atleast_2d(np.asarray(W, dtype=complex))
    rows = W[np.asarray(x).astype(bool)]
    return hermitian(rows) @ rows


def _mi_from_covariance(R, sigma_g, cfg):
    M = cfg.n_antennas
    d2 = cfg.noise_variance
    A = cfg.ofdm_symbols * R @ sigma_g + d2 * np.eye(M)
    lu, sign = lu_factor(A)
    diag = np.diagonal(lu, axis1=-2, axis2=-1)
    mag = np.abs(diag)
    with np.errstate(divide="ignore"):
        log_abs = np.sum(np.log(mag), axis=-1)
    phase = np.angle(sign * np.prod(diag / np.where(mag == 0, 1, mag), axis=-1))
    mi = ((cfg.ofdm_symbols - 2 * M) * math.log(d2) + log_abs) / math.log(2)
    return mi, phase


def sensing_mi(W, x, sigma_g, cfg):
    """Sensing mutual information in bits.

    Only mmWave rows of ``W`` (``x == 1``) contribute; with no mmWave user
    the result is 0 by convention. A singular determinant yields ``-inf``.
    """
    x = np.asarray(x)
    W = np.atleast_2d(np.asarray(W, dtype=complex))
    if W.shape[0] != x.shape[0]:
        raise ValueError(f"W has {W.shape[0]} rows but x has {x.shape[0]} entries")
    if not np.any(x):
        return 0.0
    mi, phase = _mi_from_covariance(transmit_covariance(W, x), sigma_g, cfg)
    mi = float(mi)
    if math.isinf(mi):
        log.warning("sensing determinant is singular to working precision")
    elif abs(math.remainder(float(phase), math.pi)) > 1e-6:
        log.debug("non-real determinant in sensing MI (phase %.3g rad)", phase)
    return mi


def sensing_mi_batch(Ws, x, sigma_g, cfg):
    """Vectorized :func:`sensing_mi` over a stack of precoders ``(B, N, M)``."""
    Ws = np.asarray(Ws, dtype=complex)
    x = np.asarray(x).astype(bool)
    if not np.any(x):
        return np.zeros(Ws.shape[0])
    rows = Ws[:, x, :]
    R = np.conj(np.swapaxes(rows, -1, -2)) @ rows
    mi, _ = _mi_from_covariance(R, sigma_g, cfg)
    return mi


def random_power_feasible_precoders(n_samples, n_users, n_antennas, p_max, rng):
    """Gaussian precoders rescaled to full power ``p_max``."""
    W = (rng.standard_normal((n_samples, n_users, n_antennas))
         + 1j * rng.standard_normal((n_samples, n_users, n_antennas)))
    power = np.sum(np.abs(W) ** 2, axis=(1, 2))
    return W * np.sqrt(p_max / power)[:, None, None]


def probe_mi_ceiling(sigma_g, n_users, p_max, cfg, rng, n_samples=10_000, chunk=2_000):
    """Best sensing MI over random full-power precoders with every user on mmWave."""
    x = np.ones(n_users, dtype=bool)
    best = -np.inf
    done = 0
    while done < n_samples:
        k = min(chunk, n_samples - done)
        Ws = random_power_feasible_precoders(k, n_users, cfg.n_antennas, p_max, rng)
        best = max(best, float(np.max(sensing_mi_batch(Ws, x, sigma_g, cfg))))
        done += k
    return best

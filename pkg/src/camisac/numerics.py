"""Small numerical kernels shared by the physical-layer code.

Complex vectors and matrices are plain ``numpy.complex128`` arrays; the
functions here check shapes themselves rather than wrapping arrays in a
dedicated type.
"""

import math

import numpy as np

EULER_GAMMA = 0.57721566490153286061

# Below this |x| the power series is used, above it the continued fraction.
# The series loses ~|x|/ln(10) digits to cancellation, so the crossover is kept low.
EI_CROSSOVER = 2.0

_CF_EPS = 1e-16
_CF_MAX_ITER = 10_000
_TINY = 1e-300


def _ei_series(x):
    # Ei(x) = gamma + ln|x| + sum_k x^k / (k * k!)
    total = 0.0
    term = 1.0
    k = 1
    while True:
        term *= x / k
        contrib = term / k
        total += contrib
        if abs(contrib) <= 1e-18 * max(abs(total), 1e-300):
            break
        k += 1
        if k > 500:
            break
    return EULER_GAMMA + math.log(abs(x)) + total


def _e1_scaled_cf(z):
    """Return exp(z) * E1(z) for z > 0 via modified Lentz."""
    b = z + 1.0
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, _CF_MAX_ITER):
        an = -float(i * i)
        b += 2.0
        d = 1.0 / (an * d + b)
        c = b + an / c
        delta = c * d
        h *= delta
        if abs(delta - 1.0) < _CF_EPS:
            return h
    raise ArithmeticError(f"continued fraction for E1({z}) did not converge")


def _check_negative(x):
    if not math.isfinite(x):
        raise ValueError(f"argument must be finite, got {x}")
    if x >= 0:
        raise ValueError(f"Ei is only defined here for x < 0, got {x}")


def exp_integral_ei(x):
    """Exponential integral Ei(x) for negative real ``x``.

    Raises ValueError for ``x >= 0`` or non-finite input.
    """
    x = float(x)
    _check_negative(x)
    z = -x
    if z <= EI_CROSSOVER:
        return _ei_series(x)
    return -math.exp(-z) * _e1_scaled_cf(z)


def exp_times_ei(z):
    """Return ``exp(z) * Ei(-z)`` for ``z > 0`` without overflow.

    The product stays O(1/z) for large z even when Ei(-z) underflows.
    """
    z = float(z)
    _check_negative(-z)
    if z <= EI_CROSSOVER:
        return math.exp(z) * _ei_series(-z)
    return -_e1_scaled_cf(z)


def _as_square(a):
    a = np.asarray(a, dtype=np.complex128)
    if a.ndim < 2 or a.shape[-1] != a.shape[-2]:
        raise ValueError(f"expected square matrix (or stack), got shape {a.shape}")
    return a


def lu_factor(a):
    """LU factorization with partial pivoting.

    Works on a single ``(n, n)`` matrix or a stack ``(..., n, n)``. Returns
    ``(lu, sign)`` where ``lu`` packs unit-lower L and U, and ``sign`` is the
    permutation parity (+1 or -1) per matrix.
    """
    lu = _as_square(a).copy()
    n = lu.shape[-1]
    batch = lu.shape[:-2]
    lu = lu.reshape((-1, n, n))
    sign = np.ones(lu.shape[0])
    idx = np.arange(lu.shape[0])
    for k in range(n):
        piv = k + np.argmax(np.abs(lu[:, k:, k]), axis=1)
        swap = piv != k
        if np.any(swap):
            rows_k = lu[idx[swap], k, :].copy()
            lu[idx[swap], k, :] = lu[idx[swap], piv[swap], :]
            lu[idx[swap], piv[swap], :] = rows_k
            sign[swap] *= -1.0
        pivot = lu[:, k, k]
        nonzero = pivot != 0
        if k + 1 < n and np.any(nonzero):
            safe = np.where(nonzero, pivot, 1.0)
            factors = lu[:, k + 1:, k] / safe[:, None]
            factors[~nonzero] = 0.0
            lu[:, k + 1:, k] = factors
            lu[:, k + 1:, k + 1:] -= factors[:, :, None] * lu[:, k, None, k + 1:]
    return lu.reshape(batch + (n, n)), sign.reshape(batch)


def det_complex(a):
    """Determinant of a complex square matrix (or stack) via pivoted LU."""
    lu, sign = lu_factor(a)
    diag = np.diagonal(lu, axis1=-2, axis2=-1)
    det = sign * np.prod(diag, axis=-1)
    if np.ndim(det) == 0:
        return complex(det)
    return det


def log_abs_det(a):
    """Return ``log|det(a)|`` from the LU diagonal, avoiding overflow.

    ``-inf`` is returned for exactly singular inputs.
    """
    lu, _ = lu_factor(a)
    diag = np.abs(np.diagonal(lu, axis1=-2, axis2=-1))
    with np.errstate(divide="ignore"):
        out = np.sum(np.log(diag), axis=-1)
    if np.ndim(out) == 0:
        return float(out)
    return out


def frobenius_norm_sq(a):
    """Sum of squared moduli of all entries."""
    a = np.asarray(a)
    return float(np.sum(a.real ** 2 + a.imag ** 2))


def hermitian(a):
    a = np.asarray(a)
    return np.conj(np.swapaxes(a, -1, -2))

"""Discrete Fresnel transform of even order.

The DFnT matrix is ``Phi = Theta1 @ F @ Theta2`` with ``F`` the unitary DFT
(``numpy.fft`` sign convention, ``norm="ortho"``). ``Phi`` is circulant,
``Phi[m, n] = exp(-j pi/4) exp(j pi (m - n)^2 / M) / sqrt(M)``, and is
diagonalised by the DFT with eigenvalues ``Gamma(m) = exp(-j pi m^2 / M)``,
so both directions run as FFT, diagonal scale, inverse FFT.
"""

from functools import lru_cache

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from ._validation import check_complex
from .errors import InvalidOrderError

# Every FFT in the package goes through these two so that the scaling
# convention lives in one place.


def dft(x, axis=0, n=None):
    """Unitary forward DFT, ``exp(-j 2 pi m k / M) / sqrt(M)``."""
    return np.fft.fft(x, n=n, axis=axis, norm="ortho")


def idft(x, axis=0, n=None):
    """Unitary inverse DFT."""
    return np.fft.ifft(x, n=n, axis=axis, norm="ortho")


def check_order(order):
    if isinstance(order, bool) or not isinstance(order, (int, np.integer)):
        raise InvalidOrderError(f"order must be an integer, got {order!r}")
    if order < 2 or order % 2:
        raise InvalidOrderError(f"order must be an even integer >= 2, got {order}")
    return int(order)


def _readonly(a):
    a.setflags(write=False)
    return a


@lru_cache(maxsize=32)
def gamma_sequence(order):
    """Zadoff-Chu eigenvalue diagonal ``exp(-j pi m^2 / M)``, ``m = 0..M-1``."""
    M = check_order(order)
    m = np.arange(M, dtype=np.float64)
    # m^2 mod 2M keeps the phase argument small for large M
    return _readonly(np.exp(-1j * np.pi * (m * m % (2 * M)) / M))


@lru_cache(maxsize=32)
def quadratic_phases(order):
    """Pre- and post-DFT diagonals ``(theta1, theta2)`` of the factorisation."""
    M = check_order(order)
    m = np.arange(M, dtype=np.float64)
    q = np.exp(1j * np.pi * (m * m % (2 * M)) / M)
    theta1 = np.exp(-1j * np.pi / 4) * q
    return _readonly(theta1), _readonly(q.copy())


@lru_cache(maxsize=8)
def dfnt_matrix(order):
    """Dense unitary DFnT matrix of the given order (read-only).

    Built from the closed-form first column ``exp(-j pi/4) exp(j pi k^2 / M) / sqrt(M)``
    indexed by ``(m - n) mod M``, so every row is an exact cyclic shift of the first.
    """
    M = check_order(order)
    k = np.arange(M, dtype=np.float64)
    col = np.exp(-1j * np.pi / 4) * np.exp(1j * np.pi * (k * k % (2 * M)) / M) / np.sqrt(M)
    m = np.arange(M)
    return _readonly(col[(m[:, None] - m[None, :]) % M])


def _as_columns(X, order):
    M = check_order(order)
    X = check_complex(X, name="X")
    if X.ndim not in (1, 2) or X.shape[0] != M:
        raise ValueError(f"input must have {M} rows, got shape {X.shape}")
    return X, M


def apply_idfnt(X, order):
    """Inverse DFnT ``Phi^H @ X`` of each column, computed as ``F^H Gamma^H F X``."""
    X, M = _as_columns(X, order)
    g = np.conj(gamma_sequence(M))
    g = g if X.ndim == 1 else g[:, None]
    return idft(g * dft(X, axis=0), axis=0)


def apply_dfnt(Y, order):
    """Forward DFnT ``Phi @ Y`` of each column, computed as ``F^H Gamma F Y``."""
    Y, M = _as_columns(Y, order)
    g = gamma_sequence(M)
    g = g if Y.ndim == 1 else g[:, None]
    return idft(g * dft(Y, axis=0), axis=0)


class FresnelTransform(TransformerMixin, BaseEstimator):
    """Column-wise DFnT as a stateless transformer.

    ``transform`` is the forward DFnT and ``inverse_transform`` the IDFnT.
    Inputs are ``(M, n_columns)`` complex arrays.
    """

    def __init__(self, order=256):
        self.order = order

    def fit(self, X=None, y=None):
        self.order_ = check_order(self.order)
        if X is not None:
            _as_columns(X, self.order_)
        return self

    def transform(self, X):
        return apply_dfnt(X, self._fitted_order())

    def inverse_transform(self, X):
        return apply_idfnt(X, self._fitted_order())

    def _fitted_order(self):
        return getattr(self, "order_", None) or check_order(self.order)

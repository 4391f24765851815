"""Bits -> QPSK -> Fresnel precoding -> comb pilots -> CP-OFDM modulator."""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from ._validation import check_bits, check_grid
from .fresnel import dft, gamma_sequence, idft
from .frame import FrameConfig

WAVEFORMS = ("ocdm", "ofdm")

_INV_SQRT2 = 1.0 / np.sqrt(2.0)


def qpsk_map(bits, cfg):
    """Gray-mapped QPSK with unit average power.

    Bit pairs ``(b0, b1)`` map as 00 -> (1+j), 01 -> (-1+j), 11 -> (-1-j),
    10 -> (1-j), all divided by sqrt(2). Symbols fill the
    ``(M - M'_P, N)`` grid column by column (chirp index fastest).
    """
    bits = check_bits(bits, cfg.n_bits)
    pairs = bits.reshape(-1, 2).astype(np.float64)
    symbols = ((1.0 - 2.0 * pairs[:, 1]) + 1j * (1.0 - 2.0 * pairs[:, 0])) * _INV_SQRT2
    return symbols.reshape(cfg.n_symbols, cfg.n_data).T.copy()


def precode_grid(X, cfg):
    """Fresnel precoding ``conj(Gamma) * F[:, :M-M'_P] @ X`` (zero-padded DFT)."""
    M, K = cfg.n_subcarriers, cfg.n_data
    X = check_grid(X, K, cfg.n_symbols, name="X")
    return np.conj(gamma_sequence(M))[:, None] * dft(X, axis=0, n=M)


def pilot_values(cfg):
    """Comb pilots ``U(k) = exp(j pi k^2 / M) / sqrt(M)`` for ``k < M'_P``."""
    M = cfg.n_subcarriers
    k = np.arange(cfg.n_pilots, dtype=np.float64)
    return np.exp(1j * np.pi * (k * k % (2 * M)) / M) / np.sqrt(M)


def transmitted_pilots(cfg):
    """Pilot values as written into the grid, ``pilot_amplitude * U(k)``."""
    return cfg.pilot_amplitude * pilot_values(cfg)


def insert_pilots(Z, cfg):
    """Overwrite rows ``k L`` of every symbol with the (boosted) pilots."""
    Z = check_grid(Z, cfg.n_subcarriers, cfg.n_symbols, name="Z").copy()
    if cfg.n_pilots:
        Z[cfg.pilot_rows, :] = transmitted_pilots(cfg)[:, None]
    return Z


def modulate(Zp, cfg):
    """Per-symbol unitary IDFT, CP prepend, serialise in time order."""
    Zp = check_grid(Zp, cfg.n_subcarriers, cfg.n_symbols, name="Zp")
    s = idft(Zp, axis=0)
    blocks = np.concatenate([s[cfg.n_subcarriers - cfg.cp_len:, :], s], axis=0)
    return blocks.T.reshape(-1)


def map_data_rows(X, cfg):
    """Place ``(M - M'_P, N)`` data directly on the non-pilot subcarriers."""
    X = check_grid(X, cfg.n_data, cfg.n_symbols, name="X")
    Z = np.zeros((cfg.n_subcarriers, cfg.n_symbols), dtype=np.complex128)
    Z[cfg.data_rows, :] = X
    return Z


def frequency_grid(X, cfg, waveform="ocdm"):
    """Full ``M x N`` frequency-domain grid, pilots included."""
    if waveform == "ocdm":
        return insert_pilots(precode_grid(X, cfg), cfg)
    if waveform == "ofdm":
        return insert_pilots(map_data_rows(X, cfg), cfg)
    raise ValueError(f"waveform must be one of {WAVEFORMS}, got {waveform!r}")


def ofdm_modulate_baseline(X, cfg):
    """CP-OFDM reference: same comb pilots, no Fresnel precoding."""
    return modulate(frequency_grid(X, cfg, "ofdm"), cfg)


class OCDMTransmitter(TransformerMixin, BaseEstimator):
    """Bits-to-frame transmitter.

    Parameters
    ----------
    config : FrameConfig, optional
        Frame constants; defaults to ``FrameConfig()``.
    waveform : {"ocdm", "ofdm"}
        ``"ofdm"`` skips the Fresnel precoder (CP-OFDM baseline).

    Attributes
    ----------
    config_ : FrameConfig
    pilots_ : ndarray
        Pilot values as placed on the comb rows.
    """

    def __init__(self, config=None, waveform="ocdm"):
        self.config = config
        self.waveform = waveform

    def fit(self, X=None, y=None):
        if self.waveform not in WAVEFORMS:
            raise ValueError(f"waveform must be one of {WAVEFORMS}, got {self.waveform!r}")
        self.config_ = self.config if self.config is not None else FrameConfig()
        self.pilots_ = transmitted_pilots(self.config_)
        return self

    def symbols(self, bits):
        return qpsk_map(bits, self._cfg())

    def grid(self, bits):
        return frequency_grid(self.symbols(bits), self._cfg(), self.waveform)

    def transform(self, bits):
        """Map a bit payload to the complex baseband frame."""
        return modulate(self.grid(bits), self._cfg())

    def _cfg(self):
        if not hasattr(self, "config_"):
            self.fit()
        return self.config_

"""Communications receiver: CP removal, DFT, comb-pilot LS estimation,
per-bin ZF/MMSE equalisation and Fresnel de-precoding."""

from functools import lru_cache

import numpy as np
from sklearn.base import BaseEstimator

from ._validation import check_complex, check_frame, check_grid
from .channel import frequency_response
from .errors import NumericalError
from .fresnel import dft, gamma_sequence
from .frame import FrameConfig
from .transmitter import WAVEFORMS, transmitted_pilots

EQUALIZERS = ("zf", "mmse")
ESTIMATIONS = ("ls", "perfect_csi")

SINGULAR_BIN = 1e-12


def demodulate(frame, cfg):
    """Drop each block's CP and take the unitary M-point DFT; returns ``(M, N)``."""
    frame = check_frame(frame, cfg)
    bodies = frame.reshape(cfg.n_symbols, cfg.block_len)[:, cfg.cp_len:]
    return dft(bodies, axis=1).T


def ls_estimate(Yf, cfg):
    """Least-squares channel at the pilot rows, ``Y(kL, n) / pilot(k)``.

    Returns a ``(M'_P, N)`` array (pilot rows only).
    """
    if not cfg.n_pilots:
        raise ValueError("LS estimation needs n_pilots > 0")
    Yf = check_grid(Yf, cfg.n_subcarriers, cfg.n_symbols, name="Yf")
    return Yf[cfg.pilot_rows, :] / transmitted_pilots(cfg)[:, None]


INTERPOLATION_EDGES = ("circular", "extrapolate")


def interpolate_channel(H_pilots, cfg, edge="circular"):
    """Linear interpolation between neighbouring comb pilots, per symbol.

    Rows above the final pilot have no right-hand neighbour. ``edge`` picks
    how they are filled: ``"circular"`` interpolates towards pilot 0 (exact
    only when every path delay is a whole number of samples, since the
    response ``exp(-j 2 pi m tau delta_f)`` is otherwise not M-periodic in
    ``m``); ``"extrapolate"`` continues the line through the last two pilots,
    which removes that wrap bias at the cost of extra noise gain.
    """
    if edge not in INTERPOLATION_EDGES:
        raise ValueError(f"edge must be one of {INTERPOLATION_EDGES}, got {edge!r}")
    L = cfg.group_size
    H_pilots = check_complex(H_pilots, name="H_pilots", ndim=2, shape=(cfg.n_pilots, None))
    nxt = np.roll(H_pilots, -1, axis=0)
    if edge == "extrapolate" and H_pilots.shape[0] > 1:
        nxt[-1] = 2.0 * H_pilots[-1] - H_pilots[-2]
    frac = np.arange(L) / L
    H = H_pilots[:, None, :] + (nxt - H_pilots)[:, None, :] * frac[None, :, None]
    return H.reshape(cfg.n_subcarriers, H_pilots.shape[1])


def equalize(Yf, H, cfg, kind="mmse", noise_to_signal=None, return_singular=False):
    """Per-bin equalisation; pilot rows are dropped from the output.

    ``kind="zf"`` divides by ``H``; ``kind="mmse"`` computes
    ``conj(H) Y / (|H|^2 + N0/Ps)``. ZF bins with ``|H| < 1e-12`` are nulled;
    their count is returned when ``return_singular`` is set.
    """
    Yf = check_grid(Yf, cfg.n_subcarriers, cfg.n_symbols, name="Yf")
    H = check_grid(H, cfg.n_subcarriers, cfg.n_symbols, name="H")
    rows = cfg.data_rows
    Y, Hd = Yf[rows], H[rows]
    if kind == "zf":
        singular = np.abs(Hd) < SINGULAR_BIN
        with np.errstate(divide="ignore", invalid="ignore"):
            Z = np.where(singular, 0.0, Y / np.where(singular, 1.0, Hd))
        n_singular = int(singular.sum())
    elif kind == "mmse":
        if noise_to_signal is None or not noise_to_signal > 0:
            raise ValueError("MMSE needs a positive noise_to_signal ratio")
        Z = np.conj(Hd) * Y / (np.abs(Hd) ** 2 + noise_to_signal)
        n_singular = 0
    else:
        raise ValueError(f"equalizer must be one of {EQUALIZERS}, got {kind!r}")
    return (Z, n_singular) if return_singular else Z


@lru_cache(maxsize=16)
def _precoder_inverse(cfg):
    """Inverse of the data-row / data-column block of ``diag(conj Gamma) F``."""
    M, K = cfg.n_subcarriers, cfg.n_data
    rows = cfg.data_rows
    A = np.conj(gamma_sequence(M))[rows, None] * dft(np.eye(M)[:, :K], axis=0)[rows]
    Q, R = np.linalg.qr(A)
    if np.min(np.abs(np.diag(R))) < 1e-10 * np.max(np.abs(np.diag(R))):
        raise NumericalError("data-row precoder block is singular for this pilot comb")
    inv = np.linalg.solve(R, Q.conj().T)
    inv.setflags(write=False)
    return inv


def decode_symbols(Z_data, cfg, waveform="ocdm"):
    """Recover the ``(M - M'_P, N)`` data grid from equalised data rows."""
    Z_data = check_grid(Z_data, cfg.n_data, cfg.n_symbols, name="Z_data")
    if waveform == "ofdm":
        return Z_data.copy()
    if waveform != "ocdm":
        raise ValueError(f"waveform must be one of {WAVEFORMS}, got {waveform!r}")
    return _precoder_inverse(cfg) @ Z_data


def qpsk_hard(X):
    """Nearest QPSK constellation points."""
    X = np.asarray(X)
    return (np.where(X.real < 0, -1.0, 1.0) + 1j * np.where(X.imag < 0, -1.0, 1.0)) / np.sqrt(2.0)


def qpsk_demap(X):
    """Hard-decision Gray demap, inverse of ``qpsk_map`` (column-major)."""
    X = np.asarray(X)
    flat = X.T.reshape(-1)
    bits = np.empty((flat.size, 2), dtype=np.uint8)
    bits[:, 0] = flat.imag < 0
    bits[:, 1] = flat.real < 0
    return bits.reshape(-1)


def bit_errors(bits, ref_bits):
    bits, ref_bits = np.asarray(bits), np.asarray(ref_bits)
    if bits.shape != ref_bits.shape:
        raise ValueError(f"length mismatch: {bits.shape} vs {ref_bits.shape}")
    return int(np.count_nonzero(bits != ref_bits))


def ber(bits, ref_bits):
    """Bit error rate (Hamming distance over length)."""
    return bit_errors(bits, ref_bits) / np.asarray(ref_bits).size


def channel_estimate(Yf, cfg, estimation="ls", channel=None):
    """Full ``(M, N)`` channel estimate for either estimation mode."""
    if estimation == "ls":
        return interpolate_channel(ls_estimate(Yf, cfg), cfg)
    if estimation == "perfect_csi":
        if channel is None:
            raise ValueError("perfect_csi estimation needs the true ChannelSpec")
        return frequency_response(channel, cfg)
    raise ValueError(f"estimation must be one of {ESTIMATIONS}, got {estimation!r}")


class OCDMReceiver(BaseEstimator):
    """Pilot-aided OCDM / OFDM receiver.

    ``fit(frame)`` estimates the channel from the received frame, ``transform``
    returns the soft data-symbol grid and ``predict`` the hard-decision bits.

    Parameters
    ----------
    config : FrameConfig, optional
    waveform : {"ocdm", "ofdm"}
    equalizer : {"zf", "mmse"}
    estimation : {"ls", "perfect_csi"}
    noise_to_signal : float, optional
        ``N0 / Ps`` for MMSE (the true noise variance per bin for unit power).
    channel : ChannelSpec, optional
        Ground truth, required for ``estimation="perfect_csi"``.
    """

    def __init__(self, config=None, waveform="ocdm", equalizer="mmse", estimation="ls",
                 noise_to_signal=None, channel=None):
        self.config = config
        self.waveform = waveform
        self.equalizer = equalizer
        self.estimation = estimation
        self.noise_to_signal = noise_to_signal
        self.channel = channel

    def fit(self, frame, y=None):
        self.config_ = self.config if self.config is not None else FrameConfig()
        self.freq_grid_ = demodulate(frame, self.config_)
        self.channel_estimate_ = channel_estimate(self.freq_grid_, self.config_, self.estimation, self.channel)
        Z, self.n_singular_bins_ = equalize(self.freq_grid_, self.channel_estimate_, self.config_,
                                            self.equalizer, self.noise_to_signal, return_singular=True)
        self.symbols_ = decode_symbols(Z, self.config_, self.waveform)
        return self

    def transform(self, frame):
        return self.fit(frame).symbols_

    def predict(self, frame):
        return qpsk_demap(self.transform(frame))

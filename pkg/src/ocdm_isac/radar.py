"""SUNDAE: sequential symbol decoding and radar parameter estimation.

The communications observation is decoded first; the decoded symbols are
re-precoded (plus the known pilots) into the full frequency-domain grid,
wiped off the radar observation, and the delay / Doppler of each target is
read from the peak of a zero-padded 2-D periodogram.

Wipe-off happens in the frequency domain, where a delay is a linear phase
across subcarriers and a Doppler shift a linear phase across symbols. In
the chirp (Fresnel) domain a delay instead shifts the chirp index, so
``chirp_matched_filter`` is provided for inspection but the estimator works
on ``demodulate`` output (the two are related by ``Gamma^H F``).
"""

from dataclasses import dataclass
import math

import numpy as np
from sklearn.base import BaseEstimator

from ._validation import check_complex, check_frame, check_grid
from .fresnel import apply_dfnt
from .frame import SPEED_OF_LIGHT, FrameConfig
from .receiver import channel_estimate, decode_symbols, demodulate, equalize, qpsk_hard
from .transmitter import frequency_grid

REFINEMENTS = ("none", "quadratic", "ml")
WIPE_METHODS = ("matched", "divide")

_WIPE_FLOOR = 1e-9


@dataclass(frozen=True)
class PeriodogramSpec:
    """Zero-padded transform sizes and peak refinement mode.

    ``mask_halfwidth`` is the half-size (in periodogram bins, per axis) of the
    rectangle blanked around each extracted peak; ``None`` uses the
    oversampling factor of each axis, i.e. one resolution cell.
    """

    m_per: int
    n_per: int
    refine: str = "ml"
    mask_halfwidth: tuple | None = None

    def __post_init__(self):
        if self.refine not in REFINEMENTS:
            raise ValueError(f"refine must be one of {REFINEMENTS}, got {self.refine!r}")

    @classmethod
    def oversampled(cls, cfg, factor_m=4, factor_n=4, refine="ml", mask_halfwidth=None):
        return cls(int(factor_m * cfg.n_subcarriers), int(factor_n * cfg.n_symbols), refine, mask_halfwidth)

    def validate(self, cfg):
        if not (self.m_per > cfg.n_subcarriers and self.n_per > cfg.n_symbols):
            raise ValueError(
                f"periodogram sizes ({self.m_per}, {self.n_per}) must exceed the grid "
                f"({cfg.n_subcarriers}, {cfg.n_symbols})")
        return self

    def mask(self, cfg):
        if self.mask_halfwidth is not None:
            return tuple(int(h) for h in self.mask_halfwidth)
        return (max(1, self.m_per // cfg.n_subcarriers), max(1, self.n_per // cfg.n_symbols))


@dataclass(frozen=True)
class TargetEstimate:
    tau_hat: float
    doppler_hat: float
    range_hat: float
    velocity_hat: float
    peak_power: float

    @classmethod
    def from_normalized(cls, delay_norm, doppler_norm, peak_power, cfg):
        """Build from ``tau * delta_f`` and ``nu * T0`` (cycles per bin / symbol)."""
        tau = delay_norm / cfg.subcarrier_spacing
        nu = doppler_norm / cfg.block_duration
        return cls(float(tau), float(nu), float(SPEED_OF_LIGHT * tau),
                   float(SPEED_OF_LIGHT * nu / cfg.carrier_hz), float(peak_power))


@dataclass(frozen=True)
class CrlbValues:
    var_delay_norm: float
    var_doppler_norm: float
    var_delay_s2: float
    var_doppler_hz2: float

    @property
    def range_std(self):
        return SPEED_OF_LIGHT * math.sqrt(self.var_delay_s2)

    def velocity_std(self, carrier_hz):
        return SPEED_OF_LIGHT * math.sqrt(self.var_doppler_hz2) / carrier_hz


def crlb(cfg, snr_rad_linear):
    """High-SNR bound on the delay / Doppler MSE.

    Normalised bounds are ``6 / ((2 pi)^2 M N (M^2 - 1) SNR)`` for
    ``tau * delta_f`` and ``6 / ((2 pi)^2 M N (N^2 - 1) SNR)`` for
    ``nu * T0``; physical values divide by ``delta_f^2`` and ``T0^2``.
    """
    if not snr_rad_linear > 0:
        raise ValueError("SNR must be positive")
    M, N = cfg.n_subcarriers, cfg.n_symbols
    base = 6.0 / ((2.0 * math.pi) ** 2 * M * N * snr_rad_linear)
    var_tau = base / (M * M - 1)
    var_nu = base / (N * N - 1) if N > 1 else math.inf
    return CrlbValues(var_tau, var_nu, var_tau / cfg.subcarrier_spacing ** 2,
                      var_nu / cfg.block_duration ** 2)


def chirp_matched_filter(frame_rad, cfg):
    """CP removal followed by the forward DFnT of every block, ``(M, N)``."""
    frame_rad = check_frame(frame_rad, cfg, name="frame_rad")
    bodies = frame_rad.reshape(cfg.n_symbols, cfg.block_len)[:, cfg.cp_len:]
    return apply_dfnt(bodies.T, cfg.n_subcarriers)


def rebuild_grid(X_hat, cfg, waveform="ocdm", hard=True):
    """Full frequency-domain symbol grid (data + known pilots) from decoded data."""
    X = qpsk_hard(X_hat) if hard else np.asarray(X_hat)
    return frequency_grid(X, cfg, waveform)


def wipe_symbols(Yr, Z_full, cfg, method="matched"):
    """Remove the communications symbols from the radar observation.

    ``method="matched"`` multiplies by ``conj(Z)`` (the maximum-likelihood
    weighting for known symbols); ``method="divide"`` divides element-wise and
    zeroes entries where ``|Z| < 1e-9``.
    """
    Yr = check_grid(Yr, cfg.n_subcarriers, cfg.n_symbols, name="Yr")
    Z_full = check_grid(Z_full, cfg.n_subcarriers, cfg.n_symbols, name="Z_full")
    if not np.any(np.abs(Z_full) > _WIPE_FLOOR):
        raise ValueError("symbol grid is all zero")
    if method == "matched":
        return Yr * np.conj(Z_full)
    if method == "divide":
        small = np.abs(Z_full) < _WIPE_FLOOR
        return np.where(small, 0.0, Yr / np.where(small, 1.0, Z_full))
    raise ValueError(f"method must be one of {WIPE_METHODS}, got {method!r}")


def periodogram_complex(Y, spec):
    """``sum_mn y[m, n] exp(-j 2 pi n n'/N_per) exp(+j 2 pi m m'/M_per)``."""
    Y = check_complex(Y, name="Y", ndim=2)
    M_per, N_per = spec.m_per, spec.n_per
    along_m = np.fft.ifft(Y, n=M_per, axis=0) * M_per
    return np.fft.fft(along_m, n=N_per, axis=1)


def periodogram_2d(Y, spec):
    """``|Z(m', n')|^2`` of shape ``(M_per, N_per)``; column ``n'`` is unsigned here."""
    S = periodogram_complex(Y, spec)
    return S.real ** 2 + S.imag ** 2


def _parabolic_offset(left, centre, right):
    """Vertex of the parabola through three log-power samples."""
    tiny = np.finfo(float).tiny
    a, b, c = (math.log(max(v, tiny)) for v in (left, centre, right))
    denom = a - 2.0 * b + c
    if denom >= 0 or not math.isfinite(denom):
        return 0.0
    return float(np.clip(0.5 * (a - c) / denom, -0.5, 0.5))


def _ml_polish(Y, mu, nu, max_iter=12):
    """Newton ascent of ``|sum y exp(j 2 pi (m mu - n nu))|^2`` from ``(mu, nu)``."""
    M, N = Y.shape
    m = np.arange(M, dtype=np.float64)
    n = np.arange(N, dtype=np.float64)
    k = 2j * np.pi
    start = (mu, nu)
    for _ in range(max_iter):
        a = np.exp(k * m * mu)
        b = np.exp(-k * n * nu)
        Ya = Y * a[:, None]
        u0 = Ya @ b
        u1 = Ya @ (b * n)
        u2 = Ya @ (b * n * n)
        S = u0.sum()
        Sm, Smm = (m * u0).sum(), (m * m * u0).sum()
        Sn, Snn, Smn = u1.sum(), u2.sum(), (m * u1).sum()
        d1 = (k * Sm, -k * Sn)
        d2 = ((k * k * Smm, -k * k * Smn), (-k * k * Smn, k * k * Snn))
        cs = np.conj(S)
        grad = np.array([2.0 * (cs * d).real for d in d1])
        hess = np.array([[2.0 * (np.conj(d1[i]) * d1[j] + cs * d2[i][j]).real for j in range(2)]
                         for i in range(2)])
        if not np.all(np.isfinite(hess)) or np.linalg.det(hess) <= 0 or hess[0, 0] >= 0:
            return start
        step = np.linalg.solve(hess, -grad)
        mu, nu = mu + step[0], nu + step[1]
        # stay inside the main lobe of the starting peak
        if abs(mu - start[0]) > 1.0 / M or abs(nu - start[1]) > 1.0 / N:
            return start
        if np.max(np.abs(step)) < 1e-13:
            break
    return mu, nu


def extract_peaks(Y, cfg, spec, n_targets=1, surface=None):
    """Successive global-maximum extraction on the periodogram of ``Y``.

    Each found peak is refined per ``spec.refine``, converted to
    delay / Doppler, then a rectangle of ``spec.mask(cfg)`` bins around it is
    blanked before the next search. The Doppler axis is read on the signed
    interval ``[-N_per/2, N_per/2)``. Estimates come back in extraction
    (descending peak power) order.
    """
    spec.validate(cfg)
    Y = check_grid(Y, cfg.n_subcarriers, cfg.n_symbols, name="Y")
    P = periodogram_2d(Y, spec) if surface is None else np.array(surface, dtype=np.float64)
    M_per, N_per = spec.m_per, spec.n_per
    work = P.copy()
    hm, hn = spec.mask(cfg)
    found = []
    for _ in range(n_targets):
        a, b = np.unravel_index(int(np.argmax(work)), work.shape)
        peak = P[a, b]
        da = db = 0.0
        if spec.refine in ("quadratic", "ml"):
            da = _parabolic_offset(P[(a - 1) % M_per, b], peak, P[(a + 1) % M_per, b])
            db = _parabolic_offset(P[a, (b - 1) % N_per], peak, P[a, (b + 1) % N_per])
        b_signed = b - N_per if b >= N_per // 2 else b
        mu = (a + da) / M_per
        nu = (b_signed + db) / N_per
        if spec.refine == "ml":
            mu, nu = _ml_polish(Y, mu, nu)
        found.append(TargetEstimate.from_normalized(mu, nu, peak, cfg))
        rows = np.arange(a - hm, a + hm + 1) % M_per
        cols = np.arange(b - hn, b + hn + 1) % N_per
        work[np.ix_(rows, cols)] = -np.inf
    return found


def extract_peak(surface, spec, cfg, Y=None):
    """Single strongest target from a precomputed power surface.

    ``Y`` (the wiped grid) is needed only for ``refine="ml"``; without it the
    ML polish falls back to quadratic refinement.
    """
    if spec.refine == "ml" and Y is None:
        spec = PeriodogramSpec(spec.m_per, spec.n_per, "quadratic", spec.mask_halfwidth)
    if Y is None:
        Y = np.zeros((cfg.n_subcarriers, cfg.n_symbols), dtype=np.complex128)
    return extract_peaks(Y, cfg, spec, 1, surface=surface)[0]


def estimate_targets(frame_rad, Z_full, cfg, spec, n_targets=1, wipe="matched"):
    """Radar-only chain: DFT of the radar blocks, wipe-off, periodogram, peaks."""
    Yr = demodulate(frame_rad, cfg)
    W = wipe_symbols(Yr, Z_full, cfg, wipe)
    return extract_peaks(W, cfg, spec, n_targets), W


def sundae(frame_com, frame_rad, cfg, equalizer="mmse", spec=None, n_targets=1,
           noise_to_signal=None, estimation="ls", channel=None, waveform="ocdm", wipe="matched"):
    """Decode the communications frame, then estimate the radar targets.

    Returns ``(X_hat, estimates)`` with ``X_hat`` the hard-decision data grid.
    """
    if spec is None:
        spec = PeriodogramSpec.oversampled(cfg)
    Yc = demodulate(frame_com, cfg)
    H = channel_estimate(Yc, cfg, estimation, channel)
    Z = equalize(Yc, H, cfg, equalizer, noise_to_signal)
    X_hat = qpsk_hard(decode_symbols(Z, cfg, waveform))
    estimates, _ = estimate_targets(frame_rad, rebuild_grid(X_hat, cfg, waveform), cfg, spec, n_targets, wipe)
    return X_hat, estimates


class SundaeEstimator(BaseEstimator):
    """Bistatic target estimator fed by the decoded communications link.

    ``fit(frame_com, frame_rad)`` runs decoding and estimation; ``predict``
    returns a ``(n_targets, 2)`` array of (bistatic range m, velocity m/s).
    Passing ``symbols`` (the true data grid) bypasses decoding.

    Parameters
    ----------
    config : FrameConfig, optional
    n_targets : int
    equalizer, estimation, noise_to_signal, channel, waveform
        Forwarded to the communications receiver.
    oversample : tuple of int
        Periodogram zero-padding factors ``(M_per / M, N_per / N)``.
    refine : {"none", "quadratic", "ml"}
    wipe : {"matched", "divide"}
    symbols : ndarray, optional
        Genie data grid.
    """

    def __init__(self, config=None, n_targets=1, equalizer="mmse", estimation="ls",
                 noise_to_signal=None, channel=None, waveform="ocdm", oversample=(4, 4),
                 refine="ml", wipe="matched", symbols=None):
        self.config = config
        self.n_targets = n_targets
        self.equalizer = equalizer
        self.estimation = estimation
        self.noise_to_signal = noise_to_signal
        self.channel = channel
        self.waveform = waveform
        self.oversample = oversample
        self.refine = refine
        self.wipe = wipe
        self.symbols = symbols

    def fit(self, frame_com, frame_rad):
        cfg = self.config if self.config is not None else FrameConfig()
        self.config_ = cfg
        self.spec_ = PeriodogramSpec.oversampled(cfg, *self.oversample, refine=self.refine).validate(cfg)
        if self.symbols is not None:
            self.symbols_ = check_grid(self.symbols, cfg.n_data, cfg.n_symbols, name="symbols")
        else:
            Yc = demodulate(frame_com, cfg)
            H = channel_estimate(Yc, cfg, self.estimation, self.channel)
            Z = equalize(Yc, H, cfg, self.equalizer, self.noise_to_signal)
            self.symbols_ = qpsk_hard(decode_symbols(Z, cfg, self.waveform))
        Z_full = rebuild_grid(self.symbols_, cfg, self.waveform, hard=self.symbols is None)
        self.targets_, self.wiped_ = estimate_targets(frame_rad, Z_full, cfg, self.spec_,
                                                      self.n_targets, self.wipe)
        return self

    def predict(self, frame_com=None, frame_rad=None):
        if frame_rad is not None:
            self.fit(frame_com, frame_rad)
        return np.array([[t.range_hat, t.velocity_hat] for t in self.targets_])

    def periodogram(self):
        """Power surface of the last fit, Doppler axis unsigned."""
        return periodogram_2d(self.wiped_, self.spec_)

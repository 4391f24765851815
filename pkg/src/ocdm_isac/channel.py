"""Doubly-spread (delay-Doppler) multipath channels and calibrated AWGN.

Each path delays the transmitted waveform, applies a Doppler phase ramp over
absolute frame time and scales by its complex gain::

    y(t) = sum_p h_p s(t - tau_p) exp(j 2 pi nu_p (t - tau_p))

The transmitted waveform is modelled as a train of rect-windowed CP blocks,
each a band-limited periodic signal (a sum of the ``M`` subcarrier tones)
restricted to its own ``T0`` interval. Delaying it exactly therefore means a
per-block frequency-domain phase ramp, with the first ``tau * B`` samples of
every block window taken from the delayed tail of the previous block (the
frame is treated as periodic, so block ``-1`` is block ``N-1``). For
integer-sample delays this coincides with a circular shift of the whole
frame.
"""

from dataclasses import dataclass, field
import math

import numpy as np

from ._validation import check_frame
from .errors import ConstraintViolation
from .frame import SPEED_OF_LIGHT

KINDS = ("com", "rad")


@dataclass(frozen=True)
class PathSpec:
    gain: complex = 1.0 + 0.0j
    delay: float = 0.0
    doppler: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "gain", complex(self.gain))
        object.__setattr__(self, "delay", float(self.delay))
        object.__setattr__(self, "doppler", float(self.doppler))
        if self.delay < 0 or not math.isfinite(self.delay):
            raise ConstraintViolation(f"path delay must be finite and >= 0, got {self.delay}")
        if not math.isfinite(self.doppler):
            raise ConstraintViolation("path Doppler must be finite")


@dataclass(frozen=True)
class ChannelSpec:
    paths: tuple = field(default_factory=lambda: (PathSpec(),))
    kind: str = "com"

    def __post_init__(self):
        object.__setattr__(self, "paths", tuple(self.paths))
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if not self.paths:
            raise ValueError("a channel needs at least one path")

    @property
    def total_power(self):
        return float(sum(abs(p.gain) ** 2 for p in self.paths))

    def validate(self, cfg):
        """Raise ConstraintViolation unless ``tau_max < T_cp`` and ``|nu|max < delta_f``."""
        for i, p in enumerate(self.paths):
            if p.delay >= cfg.cp_duration and p.delay > 0:
                raise ConstraintViolation(
                    f"path {i}: delay {p.delay:.4g} s is not below the CP duration {cfg.cp_duration:.4g} s")
            if abs(p.doppler) >= cfg.subcarrier_spacing:
                raise ConstraintViolation(
                    f"path {i}: |Doppler| {abs(p.doppler):.4g} Hz is not below the subcarrier "
                    f"spacing {cfg.subcarrier_spacing:.4g} Hz")
        return self


@dataclass(frozen=True)
class NoiseSpec:
    snr_db: float = math.inf
    kind: str = "com"

    def variance(self, spec, p_avg=1.0):
        """Per-complex-sample noise variance ``sum |h_p|^2 P_avg / SNR``."""
        if math.isinf(self.snr_db) and self.snr_db > 0:
            return 0.0
        return spec.total_power * p_avg / 10.0 ** (self.snr_db / 10.0)


def _delayed_blocks(bodies_f, delay_samples, cfg):
    """Delay a block train given the DFT of its bodies, shape ``(N, M)``."""
    M, Lcp, L0 = cfg.n_subcarriers, cfg.cp_len, cfg.block_len
    m = np.arange(M)
    q = np.fft.ifft(bodies_f * np.exp(-2j * np.pi * m * delay_samples / M), axis=1)
    i = np.arange(L0)
    current = q[:, (i - Lcp) % M]
    prev = np.roll(q, 1, axis=0)[:, i % M]
    out = np.where(i[None, :] < delay_samples, prev, current)
    return out.reshape(-1)


def apply_channel(frame, spec, cfg):
    """Pass a CP-structured frame through every path of ``spec`` (noise-free)."""
    frame = check_frame(frame, cfg)
    spec.validate(cfg)
    bodies = frame.reshape(cfg.n_symbols, cfg.block_len)[:, cfg.cp_len:]
    bodies_f = np.fft.fft(bodies, axis=1)
    t = np.arange(cfg.frame_len) / cfg.sample_rate
    out = np.zeros(cfg.frame_len, dtype=np.complex128)
    for p in spec.paths:
        d = p.delay * cfg.sample_rate
        # snap delays that are a whole number of samples up to rounding error
        if abs(d - round(d)) < 1e-9:
            d = float(round(d))
        delayed = frame if d == 0 else _delayed_blocks(bodies_f, d, cfg)
        if p.doppler:
            delayed = delayed * np.exp(2j * np.pi * p.doppler * (t - p.delay))
        out += p.gain * delayed
    return out


def complex_noise(rng, size, variance=1.0):
    """Circularly-symmetric complex Gaussian samples of the given variance."""
    scale = math.sqrt(variance / 2.0)
    return scale * (rng.standard_normal(size) + 1j * rng.standard_normal(size))


def add_awgn(frame, noise, spec, rng=None):
    """Add AWGN at ``noise.snr_db`` relative to the total path power of ``spec``.

    ``rng`` may be a seed or a ``numpy.random.Generator``; identical seeds give
    identical noise.
    """
    frame = np.asarray(frame, dtype=np.complex128)
    var = noise.variance(spec)
    if var == 0.0:
        return frame.copy()
    rng = np.random.default_rng(rng)
    return frame + complex_noise(rng, frame.shape, var)


def random_com_channel(n_paths, cfg, rng=None, doppler_max=0.0, max_delay=None):
    """Random multipath: i.i.d. CN(0, 1) gains, uniform delays and Dopplers.

    Delays are uniform on ``[0, max_delay]`` (default ``0.8 T_cp``) with path 0
    pinned at zero delay; Dopplers are uniform on ``[-doppler_max, doppler_max]``.
    """
    if n_paths < 1:
        raise ValueError("n_paths must be >= 1")
    if max_delay is None:
        max_delay = 0.8 * cfg.cp_duration
    if not 0 <= max_delay < cfg.cp_duration:
        raise ConstraintViolation("max_delay must lie in [0, T_cp)")
    if not 0 <= doppler_max < cfg.subcarrier_spacing:
        raise ConstraintViolation("doppler_max must lie in [0, delta_f)")
    rng = np.random.default_rng(rng)
    gains = complex_noise(rng, n_paths)
    delays = rng.uniform(0.0, max_delay, n_paths)
    delays[0] = 0.0
    dopplers = rng.uniform(-doppler_max, doppler_max, n_paths)
    paths = tuple(PathSpec(g, d, v) for g, d, v in zip(gains, delays, dopplers))
    return ChannelSpec(paths, kind="com").validate(cfg)


def radar_target_channel(range_m, velocity_mps, rcs_gain=1.0, cfg=None):
    """Single point target: ``tau = r / c``, ``nu = v f_c / c``."""
    if cfg is None:
        raise ValueError("cfg is required")
    path = PathSpec(rcs_gain, range_m / SPEED_OF_LIGHT, velocity_mps * cfg.carrier_hz / SPEED_OF_LIGHT)
    return ChannelSpec((path,), kind="rad").validate(cfg)


def radar_targets_channel(targets, cfg):
    """Several point targets given as ``(range_m, velocity_mps, gain)`` triples."""
    paths = []
    for r, v, g in targets:
        paths.extend(radar_target_channel(r, v, g, cfg).paths)
    return ChannelSpec(tuple(paths), kind="rad").validate(cfg)


def frequency_response(spec, cfg):
    """Exact per-symbol diagonal of the post-DFT channel, shape ``(M, N)``.

    Entry ``(m, n)`` is the gain subcarrier ``m`` of symbol ``n`` sees after CP
    removal; with a Doppler path this is the diagonal of the (weakly
    non-diagonal) ICI matrix. Used as perfect CSI.
    """
    M, N = cfg.n_subcarriers, cfg.n_symbols
    m = np.arange(M)
    n = np.arange(N)
    fs = cfg.sample_rate
    H = np.zeros((M, N), dtype=np.complex128)
    body_start = n * cfg.block_duration + cfg.cp_duration
    for p in spec.paths:
        ramp = np.exp(-2j * np.pi * m * p.delay * cfg.subcarrier_spacing)
        if p.doppler:
            mean_rot = np.mean(np.exp(2j * np.pi * p.doppler * np.arange(M) / fs))
            time = np.exp(2j * np.pi * p.doppler * (body_start - p.delay)) * mean_rot
        else:
            time = np.ones(N)
        H += p.gain * ramp[:, None] * time[None, :]
    return H

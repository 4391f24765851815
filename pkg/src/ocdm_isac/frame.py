"""Waveform configuration shared by every stage of the link."""

from dataclasses import dataclass, field, replace
from fractions import Fraction
import math

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0


@dataclass(frozen=True)
class FrameConfig:
    """Constants of one OCDM / OFDM frame.

    Parameters
    ----------
    carrier_hz : float
        Carrier frequency, used only for Doppler <-> velocity conversion.
    bandwidth_hz : float
        Occupied bandwidth, which is also the complex baseband sample rate.
    n_subcarriers : int
        Number of sub-chirps / subcarriers ``M`` (even).
    n_symbols : int
        Number of OCDM symbols per frame ``N``.
    n_pilots : int
        Number of comb pilots per symbol ``M'_P``; must divide ``M``.
        Zero disables pilots.
    cp_ratio : Fraction
        CP duration over useful symbol duration; ``cp_ratio * M`` must be
        an integer.
    modulation : str
        Constellation id. Only ``"qpsk"``.
    pilot_boost : float or None
        Amplitude multiplier applied to the unit-power-normalised pilots
        ``U(k)`` when they are written into the frequency grid. ``None``
        selects ``sqrt(M)``, which gives pilots the same power as the
        precoded data subcarriers.
    """

    carrier_hz: float = 79e9
    bandwidth_hz: float = 100e6
    n_subcarriers: int = 256
    n_symbols: int = 50
    n_pilots: int = 4
    cp_ratio: Fraction = field(default=Fraction(1, 4))
    modulation: str = "qpsk"
    pilot_boost: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "cp_ratio", Fraction(self.cp_ratio).limit_denominator(1 << 20))
        M = self.n_subcarriers
        if not isinstance(M, (int, np.integer)) or M < 2 or M % 2:
            raise ValueError(f"n_subcarriers must be an even integer >= 2, got {M!r}")
        if self.n_symbols < 1:
            raise ValueError("n_symbols must be >= 1")
        if self.n_pilots < 0 or self.n_pilots >= M:
            raise ValueError(f"n_pilots must be in [0, {M}), got {self.n_pilots}")
        if self.n_pilots and M % self.n_pilots:
            raise ValueError(f"n_pilots={self.n_pilots} does not divide n_subcarriers={M}")
        if not 0 <= self.cp_ratio < 1:
            raise ValueError("cp_ratio must be in [0, 1)")
        if (self.cp_ratio * M).denominator != 1:
            raise ValueError(f"cp_ratio * n_subcarriers must be an integer, got {self.cp_ratio * M}")
        if self.bandwidth_hz <= 0 or self.carrier_hz <= 0:
            raise ValueError("bandwidth_hz and carrier_hz must be positive")
        if self.modulation != "qpsk":
            raise ValueError(f"unsupported modulation {self.modulation!r}")
        if self.pilot_boost is not None and not self.pilot_boost > 0:
            raise ValueError("pilot_boost must be positive")

    def replace(self, **changes):
        return replace(self, **changes)

    @property
    def subcarrier_spacing(self):
        return self.bandwidth_hz / self.n_subcarriers

    @property
    def symbol_duration(self):
        """Useful symbol duration ``T = 1 / delta_f``."""
        return 1.0 / self.subcarrier_spacing

    @property
    def cp_duration(self):
        return float(self.cp_ratio) * self.symbol_duration

    @property
    def block_duration(self):
        """``T0 = T + T_cp``."""
        return self.symbol_duration + self.cp_duration

    @property
    def cp_len(self):
        return int(self.cp_ratio * self.n_subcarriers)

    @property
    def block_len(self):
        return self.n_subcarriers + self.cp_len

    @property
    def frame_len(self):
        return self.block_len * self.n_symbols

    @property
    def sample_rate(self):
        return self.bandwidth_hz

    @property
    def group_size(self):
        """Comb spacing ``L = M / M'_P`` (``None`` without pilots)."""
        return self.n_subcarriers // self.n_pilots if self.n_pilots else None

    @property
    def n_data(self):
        return self.n_subcarriers - self.n_pilots

    @property
    def n_bits(self):
        return 2 * self.n_data * self.n_symbols

    @property
    def pilot_rows(self):
        if not self.n_pilots:
            return np.zeros(0, dtype=int)
        return np.arange(self.n_pilots) * self.group_size

    @property
    def data_rows(self):
        mask = np.ones(self.n_subcarriers, dtype=bool)
        mask[self.pilot_rows] = False
        return np.flatnonzero(mask)

    @property
    def pilot_amplitude(self):
        if self.pilot_boost is None:
            return math.sqrt(self.n_subcarriers)
        return float(self.pilot_boost)

    def delay_to_range(self, tau):
        return SPEED_OF_LIGHT * np.asarray(tau)

    def doppler_to_velocity(self, doppler):
        return SPEED_OF_LIGHT * np.asarray(doppler) / self.carrier_hz

    def range_to_delay(self, r):
        return np.asarray(r) / SPEED_OF_LIGHT

    def velocity_to_doppler(self, v):
        return np.asarray(v) * self.carrier_hz / SPEED_OF_LIGHT

"""OCDM bistatic integrated sensing-and-communications link simulator."""

__version__ = "0.1.0"

from .channel import (ChannelSpec, NoiseSpec, PathSpec, add_awgn, apply_channel, frequency_response,
                      radar_target_channel, random_com_channel)
from .frame import SPEED_OF_LIGHT, FrameConfig
from .fresnel import FresnelTransform, apply_dfnt, apply_idfnt, dfnt_matrix, gamma_sequence
from .radar import PeriodogramSpec, SundaeEstimator, TargetEstimate, crlb, sundae
from .receiver import OCDMReceiver, ber
from .transmitter import OCDMTransmitter

__all__ = [
    "ChannelSpec", "FrameConfig", "FresnelTransform", "NoiseSpec", "OCDMReceiver", "OCDMTransmitter",
    "PathSpec", "PeriodogramSpec", "SPEED_OF_LIGHT", "SundaeEstimator", "TargetEstimate", "add_awgn",
    "apply_channel", "apply_dfnt", "apply_idfnt", "ber", "crlb", "dfnt_matrix", "frequency_response",
    "gamma_sequence", "radar_target_channel", "random_com_channel", "sundae",
]

"""Conditional-GAN denoising of CHROM rPPG pulse signals, on numpy."""
from .chrom import RgbTrace, chrom_pulse
from .dsp import SampledSignal, Spectrum1024
from .losses import LossWeights
from .models import Discriminator, Generator, NetPlan
from .training import GanState, TrainConfig, train

__version__ = "0.1.0"

__all__ = [
    "Discriminator", "GanState", "Generator", "LossWeights", "NetPlan", "RgbTrace",
    "SampledSignal", "Spectrum1024", "TrainConfig", "chrom_pulse", "train",
]

"""Denoising score matching trainer for the learned channel prior.

Reads JEDCHAN1 channel datasets, fits a noise-conditional feed-forward
score network, and exports JEDSCORE1 weights for the sampler package.
"""

from .io import read_channels, read_score_weights, write_channels, write_score_weights
from .model import ScoreNet, gaussian_reference_score, real_stack
from .training import TrainResult, TrainSpec, dsm_loss, per_level_losses, train

__version__ = "0.1.0"

"""Hyperspectral super-resolution in the eigenimage domain.

A single-channel SR operator is applied to the leading eigenimages of a
low-resolution cube instead of to every band, and the result is mapped
back with the cube's spectral basis.
"""

from .cube import CubeFormatError, HsiCube, cube_from_matrix, matrix_view, read_cube, write_cube, write_npy
from .finetune import TrainConfig, build_triplets, finetune, sample_pair, train_epoch
from .inference import InferenceConfig, eigensr_alpha, eigensr_beta, invocation_count, run
from .metrics import MetricReport, evaluate, psnr, sam, ssim
from .resample import bicubic_downsample, bicubic_upsample, downsample_cube, upsample_cube
from .speclin import (
    EigenimageStack,
    SpectralDecomposition,
    channel_cutoff,
    project,
    reconstruct,
    sample_channel,
    spectral_svd,
)
from .srmodel import BicubicSR, CheckpointError, ScaleMismatchError, TinyNet, load_weights, save_weights, sr_apply

__version__ = "0.1.0"

__all__ = [
    "CubeFormatError",
    "HsiCube",
    "cube_from_matrix",
    "matrix_view",
    "read_cube",
    "write_cube",
    "write_npy",
    "TrainConfig",
    "build_triplets",
    "finetune",
    "sample_pair",
    "train_epoch",
    "InferenceConfig",
    "eigensr_alpha",
    "eigensr_beta",
    "invocation_count",
    "run",
    "MetricReport",
    "evaluate",
    "psnr",
    "sam",
    "ssim",
    "bicubic_downsample",
    "bicubic_upsample",
    "downsample_cube",
    "upsample_cube",
    "EigenimageStack",
    "SpectralDecomposition",
    "channel_cutoff",
    "project",
    "reconstruct",
    "sample_channel",
    "spectral_svd",
    "BicubicSR",
    "CheckpointError",
    "ScaleMismatchError",
    "TinyNet",
    "load_weights",
    "save_weights",
    "sr_apply",
]

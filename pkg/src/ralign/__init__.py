"""Representation alignment metrics, kernel-task alignment and linear stitching checks."""
from .core import GramMatrix, OverlapMatrix, PairedDataset, RepresentationSet, Spectrum
from .errors import AlignmentError, BoundViolation, ValidationError
from .kernels import KernelSpec, center, gram, spectrum
from .metrics import AlignmentReport, align, cka, hsic, ka
from .stitching import HeadFunction, StitchInstance, StitchReport, fit_stitcher
from .synth import OracleValues, SyntheticSpec, generate, generate_task

__version__ = "0.1.0"

__all__ = [
    "AlignmentError",
    "AlignmentReport",
    "BoundViolation",
    "GramMatrix",
    "HeadFunction",
    "KernelSpec",
    "OracleValues",
    "OverlapMatrix",
    "PairedDataset",
    "RepresentationSet",
    "Spectrum",
    "StitchInstance",
    "StitchReport",
    "SyntheticSpec",
    "ValidationError",
    "align",
    "center",
    "cka",
    "fit_stitcher",
    "generate",
    "generate_task",
    "gram",
    "hsic",
    "ka",
    "spectrum",
]

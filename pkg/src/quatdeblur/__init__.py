"""Blind deconvolution of colour images with a normalised quaternion kernel."""

from .errors import DegenerateInputError, EmptyKernelError, NumericalError, SingularSystemError
from .quat_core import QuatKernel, qconv, qconv_fft, qnorms, realify
from .pipeline import DeblurResult, SolverConfig, blind_deblur, nonblind_restore, synth_blur

__version__ = "0.1.0"

__all__ = [
    "QuatKernel",
    "qconv",
    "qconv_fft",
    "qnorms",
    "realify",
    "SolverConfig",
    "DeblurResult",
    "blind_deblur",
    "nonblind_restore",
    "synth_blur",
    "NumericalError",
    "DegenerateInputError",
    "EmptyKernelError",
    "SingularSystemError",
]

"""Coarse-to-fine blind deconvolution with a normalised quaternion kernel.

Per pyramid level the alternation is: latent update, kernel least squares,
support projection, intensity normalisation.  The estimated kernel is then
upsampled to the next level.  A final non-blind pass with a smaller L0
weight produces the full-resolution latent image.
"""

import dataclasses
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from .errors import EmptyKernelError
from .image_domain import as_color_image, build_pyramid, crop, gradient, pad_taper, upsample_kernel
from .kernel_solver import CGInfo, estimate_kernel, project_kernel
from .latent_solver import LatentDiagnostics, solve_latent
from .normalizer import ScaleVector, normalize_kernel
from .quat_core import QuatKernel, qconv

__all__ = [
    "SolverConfig",
    "LevelDiagnostics",
    "DeblurResult",
    "initial_kernel",
    "blind_deblur",
    "nonblind_restore",
    "synth_blur",
    "motion_psf",
    "gaussian_psf",
    "data_objective",
]

log = logging.getLogger(__name__)

# "taper": replicate-pad with a cosine seam before the periodic solvers (photos);
# "periodic": use the image as is (data that really was blurred circularly).
BOUNDARY_HANDLING = ("taper", "periodic")


@dataclass(frozen=True)
class SolverConfig:
    lam: float = 0.004
    gamma: float = 2.0
    beta_max: float = 8.0
    outer_iters: int = 50
    kernel_size: int = 25
    pyramid_scale: float = 1 / math.sqrt(2)
    min_kernel: int = 3
    cg_iters: int = 50
    cg_tol: float = 1e-6
    clip_ratio: float = 0.05
    final_lambda: float = 0.002
    boundary: str = "taper"

    def __post_init__(self):
        checks = [
            (self.lam > 0, "lam must be positive"),
            (self.gamma > 0, "gamma must be positive"),
            (self.beta_max > 2 * self.lam, "beta_max must exceed the initial beta 2*lam"),
            (self.outer_iters >= 0, "outer_iters must be non-negative"),
            (self.kernel_size >= 3 and self.kernel_size % 2 == 1, "kernel_size must be odd and >= 3"),
            (0 < self.pyramid_scale < 1, "pyramid_scale must lie in (0, 1)"),
            (self.min_kernel >= 3 and self.min_kernel % 2 == 1, "min_kernel must be odd and >= 3"),
            (self.min_kernel <= self.kernel_size, "min_kernel must not exceed kernel_size"),
            (self.cg_iters >= 1, "cg_iters must be at least 1"),
            (self.cg_tol > 0, "cg_tol must be positive"),
            (0 <= self.clip_ratio < 1, "clip_ratio must lie in [0, 1)"),
            (self.final_lambda > 0, "final_lambda must be positive"),
            (self.boundary in BOUNDARY_HANDLING, f"boundary must be one of {BOUNDARY_HANDLING}"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ValueError(f"invalid solver config: {msg}")

    @classmethod
    def field_names(cls):
        return [f.name for f in dataclasses.fields(cls)]

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def to_dict(self):
        return dataclasses.asdict(self)


@dataclass
class LevelDiagnostics:
    kernel_size: int
    shape: tuple
    objectives: List[float] = field(default_factory=list)
    cg_iterations: List[int] = field(default_factory=list)
    cg_residuals: List[float] = field(default_factory=list)
    scale_residuals: List[float] = field(default_factory=list)
    real_part_max: List[float] = field(default_factory=list)

    def to_dict(self):
        return dataclasses.asdict(self)


@dataclass
class DeblurResult:
    latent: np.ndarray
    kernel: QuatKernel
    scale_history: List[ScaleVector] = field(default_factory=list)
    diagnostics: List[LevelDiagnostics] = field(default_factory=list)

    def diagnostics_dict(self) -> Dict:
        return {
            "levels": [d.to_dict() for d in self.diagnostics],
            "scales": [{"t": s.as_list(), "residual": s.residual, "fallback": s.fallback}
                       for s in self.scale_history],
        }


def initial_kernel(size=3):
    """Two horizontally adjacent taps of 0.5 at the centre of ``q0``: a tiny motion guess."""
    data = np.zeros((4, size, size))
    c = size // 2
    data[0, c, c] = data[0, c, c + 1] = 0.5
    return QuatKernel(data)


def data_objective(f, k, u, lam):
    """``||Q (*) u - [0, f]||^2 + lam ||grad u||_0`` at periodic boundary."""
    g = gradient(u)
    nnz = np.count_nonzero(np.any((g.gx != 0) | (g.gy != 0), axis=-1))
    resid = qconv(k, u)
    resid[..., 1:] -= as_color_image(f)
    return float(np.sum(resid ** 2)) + lam * nnz


def _embed(k, size):
    """Place a smaller kernel at the centre of a ``size x size`` support."""
    if k.size == size:
        return k
    data = np.zeros((4, size, size))
    off = (size - k.size) // 2
    data[:, off:off + k.size, off:off + k.size] = k.data
    return QuatKernel(data)


def blind_deblur(f, cfg: Optional[SolverConfig] = None):
    """Estimate a quaternion kernel and a sharp latent image from one blurred colour image."""
    cfg = cfg or SolverConfig()
    f = as_color_image(f, "blurred image")
    pyramid = build_pyramid(f, cfg.kernel_size, cfg.pyramid_scale, cfg.min_kernel)
    k = _embed(initial_kernel(3), pyramid.levels[0].kernel_size)
    if cfg.outer_iters == 0:
        return DeblurResult(f.copy(), _embed(initial_kernel(3), cfg.kernel_size))

    scales, diags = [], []
    for idx, level in enumerate(pyramid.levels):
        if idx > 0:
            k = upsample_kernel(k, level.kernel_size)
        r = level.kernel_size // 2 if cfg.boundary == "taper" else 0
        fp = pad_taper(level.image, r)
        diag = LevelDiagnostics(level.kernel_size, tuple(level.image.shape[:2]))
        log.info("level %d/%d: %dx%d, kernel %d", idx + 1, len(pyramid), *level.image.shape[:2],
                 level.kernel_size)
        for _ in range(cfg.outer_iters):
            lat = LatentDiagnostics()
            u = solve_latent(fp, k, cfg.lam, beta_max=cfg.beta_max, diagnostics=lat)
            info = CGInfo()
            k_ls = estimate_kernel(u, fp, level.kernel_size, cfg.gamma, cfg.cg_iters, cfg.cg_tol,
                                   init=k, info=info)
            try:
                k_proj = project_kernel(k_ls, cfg.clip_ratio)
            except EmptyKernelError as exc:
                raise EmptyKernelError(
                    f"empty kernel at pyramid level {idx + 1} ({level.kernel_size}x{level.kernel_size}): {exc}"
                ) from exc
            k, t = normalize_kernel(k_proj, u, fp)
            scales.append(t)
            diag.objectives.append(data_objective(fp, k, u, cfg.lam))
            diag.cg_iterations.append(info.iterations)
            diag.cg_residuals.append(info.residuals[-1] if info.residuals else float("nan"))
            diag.scale_residuals.append(t.residual)
            diag.real_part_max.append(lat.real_part_max[-1] if lat.real_part_max else 0.0)
        diags.append(diag)

    latent = nonblind_restore(f, k, cfg.final_lambda, beta_max=cfg.beta_max, pad=cfg.boundary == "taper")
    return DeblurResult(latent, k, scales, diags)


def nonblind_restore(f, k, lam, beta_max=8.0, pad=True):
    """One latent solve at full resolution with a fixed kernel.

    With ``pad`` the image is taper-padded by the kernel radius first and
    cropped afterwards; without it the boundary is treated as periodic.
    """
    f = as_color_image(f, "blurred image")
    width = k.radius if pad else 0
    u = solve_latent(pad_taper(f, width), k, lam, beta_max=beta_max)
    return np.array(crop(u, width))


def synth_blur(u, k, noise_sigma=0.0, seed=0, boundary="periodic", return_real=False):
    """Blur a colour image with a quaternion kernel and add Gaussian noise.

    Returns the colour planes of ``Q (*) u`` (unclipped) plus noise; with
    ``return_real`` also the real-part plane, which is not observable.
    """
    if noise_sigma < 0:
        raise ValueError(f"noise_sigma must be non-negative, got {noise_sigma}")
    out = qconv(k, as_color_image(u, "sharp image"), boundary)
    f = out[..., 1:]
    if noise_sigma > 0:
        f = f + np.random.default_rng(seed).normal(0.0, noise_sigma, f.shape)
    return (f, out[..., 0]) if return_real else f


def motion_psf(size, length=None, angle=0.0, sigma=0.5):
    """Linear motion PSF of the given ``length`` (pixels) and ``angle`` (degrees), softened by a Gaussian."""
    if size % 2 == 0 or size < 1:
        raise ValueError(f"PSF size must be odd, got {size}")
    length = size - 2 if length is None else length
    c = size // 2
    yy, xx = np.mgrid[-c:c + 1, -c:c + 1].astype(np.float64)
    a = math.radians(angle)
    along = xx * math.cos(a) + yy * math.sin(a)
    across = -xx * math.sin(a) + yy * math.cos(a)
    half = length / 2.0
    dist_along = np.maximum(np.abs(along) - half, 0.0)
    psf = np.exp(-(dist_along ** 2 + across ** 2) / (2 * sigma ** 2))
    return psf / psf.sum()


def gaussian_psf(size, sigma):
    if size % 2 == 0 or size < 1:
        raise ValueError(f"PSF size must be odd, got {size}")
    c = size // 2
    yy, xx = np.mgrid[-c:c + 1, -c:c + 1]
    psf = np.exp(-(xx ** 2 + yy ** 2) / (2.0 * sigma ** 2))
    return psf / psf.sum()

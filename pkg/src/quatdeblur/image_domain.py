"""Colour-image utilities: periodic gradients, pyramids, padding and file I/O.

Colour images are plain ``float64`` arrays of shape ``m x n x 3`` with values
nominally in ``[0, 1]``.  The difference operators below act on the two
leading (spatial) axes of any ``m x n x C`` or ``m x n`` array.
"""

import logging
import math
import os
from dataclasses import dataclass
from typing import List

import cv2
import numpy as np
from skimage.transform import resize

from .quat_core import QuatKernel

__all__ = [
    "GradientField",
    "PyramidLevel",
    "Pyramid",
    "as_color_image",
    "gradient",
    "divergence_adjoint",
    "round_to_odd",
    "pyramid_kernel_sizes",
    "build_pyramid",
    "upsample_kernel",
    "resize_image",
    "pad_taper",
    "crop",
    "load_image",
    "save_image",
]

log = logging.getLogger(__name__)

MIN_IMAGE_TO_KERNEL = 2


@dataclass
class GradientField:
    """Horizontal and vertical forward differences with periodic wrap."""

    gx: np.ndarray
    gy: np.ndarray

    def __post_init__(self):
        if self.gx.shape != self.gy.shape:
            raise ValueError(f"gx {self.gx.shape} and gy {self.gy.shape} differ in shape")

    @property
    def shape(self):
        return self.gx.shape

    @classmethod
    def zeros(cls, shape):
        return cls(np.zeros(shape), np.zeros(shape))


def as_color_image(u, name="image"):
    u = np.asarray(u, dtype=np.float64)
    if u.ndim != 3 or u.shape[2] != 3:
        raise ValueError(f"{name} must be an m x n x 3 colour image, got shape {u.shape}")
    if not np.all(np.isfinite(u)):
        raise ValueError(f"{name} contains non-finite values")
    return u


def gradient(u):
    """Forward differences ``gx[i, j] = u[i, j+1] - u[i, j]``, ``gy`` likewise down rows.

    Both wrap around (circulant difference matrix), so every column/row of a
    difference image sums to zero.
    """
    u = np.asarray(u, dtype=np.float64)
    if u.ndim < 2 or u.shape[0] < 2 or u.shape[1] < 2:
        raise ValueError(f"gradient needs at least 2x2 pixels, got shape {u.shape}")
    gx = np.roll(u, -1, axis=1) - u
    gy = np.roll(u, -1, axis=0) - u
    return GradientField(gx, gy)


def divergence_adjoint(g):
    """Exact adjoint ``Dx^T gx + Dy^T gy`` of :func:`gradient` (minus the divergence)."""
    return (np.roll(g.gx, 1, axis=1) - g.gx) + (np.roll(g.gy, 1, axis=0) - g.gy)


@dataclass
class PyramidLevel:
    image: np.ndarray
    kernel_size: int
    scale: float


@dataclass
class Pyramid:
    """Coarse-to-fine image stack; ``levels[0]`` is the coarsest."""

    levels: List[PyramidLevel]
    scale: float

    def __len__(self):
        return len(self.levels)

    @property
    def kernel_sizes(self):
        return [lvl.kernel_size for lvl in self.levels]


def round_to_odd(x):
    """Nearest odd integer to ``x`` (ties go up)."""
    return int(2 * math.floor((x - 1) / 2 + 0.5) + 1)


def pyramid_kernel_sizes(kernel_size, scale, min_kernel=3):
    """Kernel sizes from coarsest to finest, plus the matching image scales."""
    if not 0 < scale < 1:
        raise ValueError(f"pyramid scale must lie in (0, 1), got {scale}")
    if min_kernel < 3 or min_kernel % 2 == 0:
        raise ValueError(f"min_kernel must be odd and >= 3, got {min_kernel}")
    if kernel_size % 2 == 0 or kernel_size < min_kernel:
        raise ValueError(f"kernel_size must be odd and >= min_kernel={min_kernel}, got {kernel_size}")
    sizes, scales = [], []
    level = 0
    while True:
        factor = scale ** level
        size = max(round_to_odd(kernel_size * factor), min_kernel)
        sizes.append(size)
        scales.append(factor)
        if size <= min_kernel:
            break
        level += 1
    return sizes[::-1], scales[::-1]


def resize_image(u, shape):
    """Bilinear resize with a Gaussian anti-alias prefilter when shrinking."""
    shape = tuple(int(s) for s in shape[:2])
    if shape == u.shape[:2]:
        return np.array(u, dtype=np.float64, copy=True)
    shrinking = shape[0] < u.shape[0] or shape[1] < u.shape[1]
    return resize(u, shape + u.shape[2:], order=1, mode="edge",
                  anti_aliasing=shrinking, preserve_range=True)


def build_pyramid(f, kernel_size, scale=1 / math.sqrt(2), min_kernel=3):
    """Build the coarse-to-fine pyramid used for kernel estimation.

    The number of levels follows from shrinking ``kernel_size`` by ``scale``
    per level until it reaches ``min_kernel``; images are shrunk by the same
    continuous factor.  Every level must be at least twice as large as its
    kernel in both directions.
    """
    f = as_color_image(f)
    sizes, scales = pyramid_kernel_sizes(kernel_size, scale, min_kernel)
    m, n = f.shape[:2]
    levels = []
    for size, factor in zip(sizes, scales):
        if factor == 1.0:
            img = f.copy()
        else:
            shape = (max(1, int(round(m * factor))), max(1, int(round(n * factor))))
            img = resize_image(f, shape)
        if min(img.shape[:2]) < MIN_IMAGE_TO_KERNEL * size:
            raise ValueError(
                f"image of {img.shape[0]}x{img.shape[1]} at pyramid scale {factor:.3f} is too small "
                f"for a {size}x{size} kernel (need at least {MIN_IMAGE_TO_KERNEL}x the kernel size)"
            )
        levels.append(PyramidLevel(img, size, factor))
    return Pyramid(levels, scale)


def upsample_kernel(k, new_size):
    """Bilinearly resize every kernel component to ``new_size``.

    Each component keeps its L1 mass, so a non-negative ``Q0`` keeps its sum.
    """
    if new_size < k.size:
        raise ValueError(f"cannot upsample a {k.size}x{k.size} kernel to {new_size}x{new_size}")
    if new_size % 2 == 0:
        raise ValueError(f"kernel size must be odd, got {new_size}")
    if new_size == k.size:
        return QuatKernel(k.data)
    out = np.zeros((4, new_size, new_size))
    for c in range(4):
        comp = k.data[c]
        mass = np.abs(comp).sum()
        if mass == 0.0:
            continue
        big = resize(comp, (new_size, new_size), order=1, mode="constant", cval=0.0,
                     anti_aliasing=False, preserve_range=True)
        big_mass = np.abs(big).sum()
        if big_mass > 0:
            out[c] = big * (mass / big_mass)
    return QuatKernel(out)


def _taper_axis(u, width, axis):
    # Blend from the last sample back to the first over 2*width new samples so
    # the padded array is continuous under periodic wrap.
    first = np.take(u, [0], axis=axis)
    last = np.take(u, [-1], axis=axis)
    steps = np.arange(1, 2 * width + 1) / (2 * width + 1)
    w = 0.5 * (1 - np.cos(np.pi * steps))
    shape = [1] * u.ndim
    shape[axis] = 2 * width
    w = w.reshape(shape)
    band = (1 - w) * last + w * first
    after, before = np.split(band, 2, axis=axis)
    return np.concatenate([before, u, after], axis=axis)


def pad_taper(u, width):
    """Replicate-pad by ``width`` on every side with a cosine blend across the wrap seam."""
    if width <= 0:
        return np.array(u, dtype=np.float64, copy=True)
    u = np.asarray(u, dtype=np.float64)
    return _taper_axis(_taper_axis(u, width, 1), width, 0)


def crop(u, width):
    if width <= 0:
        return u
    return u[width:-width, width:-width]


def load_image(path):
    """Read an 8/16-bit RGB PNG or binary PPM into ``[0, 1]`` floats."""
    path = os.fspath(path)
    if not os.path.isfile(path):
        raise FileNotFoundError(f"no such image: {path}")
    raw = cv2.imread(path, cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise ValueError(f"unreadable image file: {path}")
    if raw.ndim == 2 or (raw.ndim == 3 and raw.shape[2] == 1):
        raise ValueError(f"color input required: {path} is grayscale")
    if raw.shape[2] == 4:
        log.info("dropping alpha channel of %s", path)
        raw = raw[..., :3]
    if raw.shape[2] != 3:
        raise ValueError(f"color input required: {path} has {raw.shape[2]} channels")
    if raw.dtype == np.uint8:
        peak = 255.0
    elif raw.dtype == np.uint16:
        peak = 65535.0
    else:
        raise ValueError(f"unsupported sample type {raw.dtype} in {path}")
    return raw[..., ::-1].astype(np.float64) / peak


def save_image(img, path, bit_depth=8):
    """Clamp to ``[0, 1]``, quantise and write PNG or PPM (chosen by extension)."""
    img = as_color_image(img)
    if bit_depth == 8:
        q = np.round(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)
    elif bit_depth == 16:
        q = np.round(np.clip(img, 0.0, 1.0) * 65535.0).astype(np.uint16)
    else:
        raise ValueError(f"bit_depth must be 8 or 16, got {bit_depth}")
    path = os.fspath(path)
    ext = os.path.splitext(path)[1].lower()
    if ext not in (".png", ".ppm"):
        raise ValueError(f"unsupported image extension {ext!r}; use .png or .ppm")
    if not cv2.imwrite(path, np.ascontiguousarray(q[..., ::-1])):
        raise OSError(f"failed to write {path}")

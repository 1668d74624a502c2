"""Image quality and colour-error metrics.

All functions take ``m x n x 3`` float images in ``[0, 1]`` (sRGB encoded)
unless stated otherwise.  Lab values use the D65 white point and the 2
degree observer.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

__all__ = [
    "PSNR_CAP",
    "ErrorMap",
    "psnr",
    "ssim",
    "srgb_to_linear",
    "rgb_to_xyz",
    "xyz_to_lab",
    "rgb_to_lab",
    "ciede2000",
    "mean_ciede2000",
    "scielab_map",
    "error_map_image",
    "kernel_ncc",
]

PSNR_CAP = 100.0

# sRGB (linear) -> XYZ, D65.
RGB_TO_XYZ = np.array([
    [0.4124564, 0.3575761, 0.1804375],
    [0.2126729, 0.7151522, 0.0721750],
    [0.0193339, 0.1191920, 0.9503041],
])
D65_WHITE = RGB_TO_XYZ.sum(axis=1)

LUMA = np.array([0.299, 0.587, 0.114])

# Opponent colour space of the spatial CIELAB model.
XYZ_TO_OPP = np.array([
    [0.2787336, 0.7218031, -0.1065520],
    [-0.4487736, 0.2898056, -0.0771569],
    [0.0859513, -0.5899859, 0.5011089],
])
# (spread in degrees, weight) of the Gaussian mixture per opponent channel.
SCIELAB_FILTERS = (
    ((0.05, 1.00327), (0.225, 0.114416), (7.0, -0.117686)),
    ((0.0685, 0.616725), (0.826, 0.383275)),
    ((0.0920, 0.567885), (0.6451, 0.432115)),
)


def _pair(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"image shapes differ: {a.shape} vs {b.shape}")
    if a.ndim != 3 or a.shape[2] != 3:
        raise ValueError(f"expected m x n x 3 colour images, got {a.shape}")
    return a, b


def psnr(a, b):
    """Peak signal-to-noise ratio for peak 1, capped at 100 dB for identical images."""
    a, b = _pair(a, b)
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return PSNR_CAP
    return min(PSNR_CAP, 10.0 * math.log10(1.0 / mse))


def ssim(a, b, sigma=1.5, k1=0.01, k2=0.03):
    """Mean SSIM on the luma channel, Gaussian window (11 x 11 for sigma 1.5), data range 1."""
    a, b = _pair(a, b)
    x = a @ LUMA
    y = b @ LUMA
    c1, c2 = (k1 * 1.0) ** 2, (k2 * 1.0) ** 2

    def blur(z):
        return ndimage.gaussian_filter(z, sigma, mode="reflect", truncate=3.5)

    mx, my = blur(x), blur(y)
    sxx = blur(x * x) - mx * mx
    syy = blur(y * y) - my * my
    sxy = blur(x * y) - mx * my
    num = (2 * mx * my + c1) * (2 * sxy + c2)
    den = (mx * mx + my * my + c1) * (sxx + syy + c2)
    # Drop the border where the window leaves the image, as is conventional.
    pad = int(3.5 * sigma + 0.5)
    s = num / den
    if s.shape[0] > 2 * pad and s.shape[1] > 2 * pad:
        s = s[pad:-pad, pad:-pad]
    return float(s.mean())


def srgb_to_linear(rgb):
    rgb = np.asarray(rgb, dtype=np.float64)
    return np.where(rgb <= 0.04045, rgb / 12.92, ((rgb + 0.055) / 1.055) ** 2.4)


def rgb_to_xyz(rgb):
    return srgb_to_linear(rgb) @ RGB_TO_XYZ.T


def xyz_to_lab(xyz, white=D65_WHITE):
    t = np.asarray(xyz, dtype=np.float64) / np.asarray(white)
    eps = (6 / 29) ** 3
    ft = np.where(t > eps, np.cbrt(t), t / (3 * (6 / 29) ** 2) + 4 / 29)
    L = 116 * ft[..., 1] - 16
    A = 500 * (ft[..., 0] - ft[..., 1])
    B = 200 * (ft[..., 1] - ft[..., 2])
    return np.stack([L, A, B], axis=-1)


def rgb_to_lab(rgb):
    return xyz_to_lab(rgb_to_xyz(rgb))


def ciede2000(lab1, lab2, kL=1.0, kC=1.0, kH=1.0):
    """CIEDE2000 colour difference; broadcasts over leading axes of ``... x 3`` inputs."""
    lab1 = np.asarray(lab1, dtype=np.float64)
    lab2 = np.asarray(lab2, dtype=np.float64)
    L1, a1, b1 = np.moveaxis(lab1, -1, 0)
    L2, a2, b2 = np.moveaxis(lab2, -1, 0)

    C1 = np.hypot(a1, b1)
    C2 = np.hypot(a2, b2)
    Cbar7 = ((C1 + C2) / 2) ** 7
    G = 0.5 * (1 - np.sqrt(Cbar7 / (Cbar7 + 25.0 ** 7)))
    a1p, a2p = (1 + G) * a1, (1 + G) * a2
    C1p, C2p = np.hypot(a1p, b1), np.hypot(a2p, b2)
    h1p = np.degrees(np.arctan2(b1, a1p)) % 360
    h2p = np.degrees(np.arctan2(b2, a2p)) % 360
    h1p = np.where((a1p == 0) & (b1 == 0), 0.0, h1p)
    h2p = np.where((a2p == 0) & (b2 == 0), 0.0, h2p)

    dLp = L2 - L1
    dCp = C2p - C1p
    chroma0 = C1p * C2p == 0
    dh = h2p - h1p
    dh = np.where(dh > 180, dh - 360, np.where(dh < -180, dh + 360, dh))
    dh = np.where(chroma0, 0.0, dh)
    dHp = 2 * np.sqrt(C1p * C2p) * np.sin(np.radians(dh) / 2)

    Lbp = (L1 + L2) / 2
    Cbp = (C1p + C2p) / 2
    hsum = h1p + h2p
    hbp = np.where(np.abs(h1p - h2p) <= 180, hsum / 2,
                   np.where(hsum < 360, (hsum + 360) / 2, (hsum - 360) / 2))
    hbp = np.where(chroma0, hsum, hbp)

    T = (1 - 0.17 * np.cos(np.radians(hbp - 30)) + 0.24 * np.cos(np.radians(2 * hbp))
         + 0.32 * np.cos(np.radians(3 * hbp + 6)) - 0.20 * np.cos(np.radians(4 * hbp - 63)))
    dtheta = 30 * np.exp(-(((hbp - 275) / 25) ** 2))
    Cbp7 = Cbp ** 7
    Rc = 2 * np.sqrt(Cbp7 / (Cbp7 + 25.0 ** 7))
    Sl = 1 + 0.015 * (Lbp - 50) ** 2 / np.sqrt(20 + (Lbp - 50) ** 2)
    Sc = 1 + 0.045 * Cbp
    Sh = 1 + 0.015 * Cbp * T
    Rt = -np.sin(np.radians(2 * dtheta)) * Rc

    tl = dLp / (kL * Sl)
    tc = dCp / (kC * Sc)
    th = dHp / (kH * Sh)
    return np.sqrt(tl ** 2 + tc ** 2 + th ** 2 + Rt * tc * th)


def mean_ciede2000(a, b):
    """Image-level score: mean per-pixel CIEDE2000 between two sRGB images."""
    a, b = _pair(a, b)
    return float(np.mean(ciede2000(rgb_to_lab(a), rgb_to_lab(b))))


@dataclass
class ErrorMap:
    delta_e: np.ndarray
    exceed_count: int
    mean_de: float
    threshold: float = 5.0

    @property
    def total(self):
        return float(self.delta_e.sum())

    def exceed_mask(self):
        return self.delta_e > self.threshold

    def summary(self):
        return {"sum": self.total, "exceed_count": self.exceed_count, "mean": self.mean_de,
                "threshold": self.threshold}


def _mixture_kernel(terms, ppd):
    width = 2 * int(math.ceil(ppd / 2)) - 1
    x = np.arange(width) - (width - 1) / 2
    out = np.zeros(width)
    for spread, weight in terms:
        g = np.exp(-((x / (spread * ppd)) ** 2))
        out += weight * g / g.sum()
    return out


def _opponent_filter(plane, kernel):
    out = ndimage.convolve1d(plane, kernel, axis=0, mode="reflect")
    return ndimage.convolve1d(out, kernel, axis=1, mode="reflect")


def _scielab_lab(rgb, ppd):
    opp = rgb_to_xyz(rgb) @ XYZ_TO_OPP.T
    filtered = np.stack([_opponent_filter(opp[..., c], _mixture_kernel(SCIELAB_FILTERS[c], ppd))
                         for c in range(3)], axis=-1)
    xyz = filtered @ np.linalg.inv(XYZ_TO_OPP).T
    return xyz_to_lab(xyz, white=rgb_to_xyz(np.ones(3)))


def scielab_map(ref, test, ppd=23.0, threshold=5.0):
    """Spatial CIELAB error map: opponent-channel filtering, then per-pixel CIE76 in Lab."""
    ref, test = _pair(ref, test)
    if ppd <= 0:
        raise ValueError(f"ppd must be positive, got {ppd}")
    de = np.sqrt(np.sum((_scielab_lab(ref, ppd) - _scielab_lab(test, ppd)) ** 2, axis=-1))
    return ErrorMap(de, int(np.count_nonzero(de > threshold)), float(de.mean()), float(threshold))


def error_map_image(img, emap, tint=(0.0, 1.0, 0.0), alpha=0.6):
    """Overlay pixels whose error exceeds the threshold with a green tint."""
    img = np.clip(np.asarray(img, dtype=np.float64), 0.0, 1.0)
    mask = emap.exceed_mask()[..., None]
    return np.where(mask, (1 - alpha) * img + alpha * np.asarray(tint), img)


def kernel_ncc(a, b, max_shift=None):
    """Normalized cross-correlation of two 2-D kernels after centroid alignment.

    The smaller kernel is zero-padded to the size of the larger; ``b`` is
    shifted (integer pixels, zero fill) so the centroids coincide.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    size = max(a.shape[0], b.shape[0])
    a = np.pad(a, (size - a.shape[0]) // 2)
    b = np.pad(b, (size - b.shape[0]) // 2)
    if not a.any() or not b.any():
        return 0.0

    def centroid(k):
        w = np.abs(k)
        ii, jj = np.indices(k.shape)
        return (ii * w).sum() / w.sum(), (jj * w).sum() / w.sum()

    (ai, aj), (bi, bj) = centroid(a), centroid(b)
    di, dj = int(round(ai - bi)), int(round(aj - bj))
    b = ndimage.shift(b, (di, dj), order=0, mode="constant", cval=0.0)
    x = a - a.mean()
    y = b - b.mean()
    den = math.sqrt(float((x * x).sum() * (y * y).sum()))
    return float((x * y).sum() / den) if den > 0 else 0.0

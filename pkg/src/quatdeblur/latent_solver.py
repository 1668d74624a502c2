"""L0-gradient latent image update by half-quadratic splitting.

For a fixed quaternion kernel ``Q`` the latent colour image minimises

    ||Q (*) u - f||^2 + lambda * ||grad u||_0

which is split with an auxiliary gradient field ``v`` and a penalty ``beta``
that doubles every inner iteration:

* v-step: hard threshold of the channel-averaged gradient energy;
* u-step: normal equations of ``||Q (*) u - f||^2 + beta ||grad u - v||^2``,
  which are block-circulant with circulant blocks and therefore split into
  one independent 4x4 complex system per frequency.

The u-step solves for all four quaternion planes (``f`` enters as
``[0, f1, f2, f3]``, ``v`` as ``[0, v1, v2, v3]``); only planes 1..3 are fed
back as the colour image, plane 0 is kept as a consistency diagnostic.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .errors import SingularSystemError
from .image_domain import GradientField, as_color_image, divergence_adjoint, gradient
from .quat_core import QuatKernel, lift, qconv_fft, quat_symbol

__all__ = [
    "FourierSystem",
    "LatentDiagnostics",
    "threshold_gradients",
    "gradient_symbols",
    "build_fourier_system",
    "solve_fourier_system",
    "apply_fourier_system",
    "solve_latent",
    "hqs_objective",
    "normal_equation_residual",
    "beta_schedule",
]

log = logging.getLogger(__name__)


@dataclass
class FourierSystem:
    """Per-frequency blocks ``matrices[x, y] @ F(u)[x, y] = rhs[x, y]``."""

    matrices: np.ndarray  # m x n x 4 x 4 complex
    rhs: np.ndarray  # m x n x 4 complex

    @property
    def shape(self):
        return self.rhs.shape[:2]


@dataclass
class LatentDiagnostics:
    betas: List[float] = field(default_factory=list)
    kept_fraction: List[float] = field(default_factory=list)
    real_part_max: List[float] = field(default_factory=list)

    @property
    def iterations(self):
        return len(self.betas)


def threshold_gradients(u, lam, beta):
    """Hard-threshold the gradients of ``u`` with one mask shared by all channels.

    A pixel keeps its gradient (in every channel) when the channel mean of
    ``gx**2 + gy**2`` is at least ``lam / beta``; otherwise it is zeroed.
    """
    if lam <= 0 or beta <= 0:
        raise ValueError(f"lambda and beta must be positive, got {lam}, {beta}")
    g = gradient(u)
    score = np.mean(g.gx ** 2 + g.gy ** 2, axis=-1)
    keep = (score >= lam / beta)[..., None]
    return GradientField(np.where(keep, g.gx, 0.0), np.where(keep, g.gy, 0.0))


def gradient_symbols(shape):
    """Fourier symbols of the periodic forward differences (horizontal, vertical)."""
    m, n = shape
    hx = np.zeros((m, n))
    hx[0, 0], hx[0, -1] = -1.0, 1.0
    hy = np.zeros((m, n))
    hy[0, 0], hy[-1, 0] = -1.0, 1.0
    return np.fft.fft2(hx), np.fft.fft2(hy)


class _SystemParts:
    """Pieces of the u-step that do not depend on ``beta`` or ``v``."""

    def __init__(self, k, f):
        fq = lift(as_color_image(f, "blurred image"))
        fq[..., 0] = 0.0
        shape = fq.shape[:2]
        self.shape = shape
        self.sym = quat_symbol(k, shape)
        sym_h = np.conj(np.swapaxes(self.sym, -1, -2))
        self.normal = sym_h @ self.sym
        self.data_rhs = np.einsum("xypq,xyq->xyp", sym_h, np.fft.fft2(fq, axes=(0, 1)))
        self.fdx, self.fdy = gradient_symbols(shape)
        self.grad_energy = np.abs(self.fdx) ** 2 + np.abs(self.fdy) ** 2

    def system(self, v, beta):
        mats = self.normal + (beta * self.grad_energy)[..., None, None] * np.eye(4)
        rhs = self.data_rhs.copy()
        if beta != 0.0:
            fvx = np.fft.fft2(v.gx, axes=(0, 1))
            fvy = np.fft.fft2(v.gy, axes=(0, 1))
            rhs[..., 1:] += beta * (np.conj(self.fdx)[..., None] * fvx + np.conj(self.fdy)[..., None] * fvy)
        return FourierSystem(mats, rhs)


def build_fourier_system(k, f, v, beta):
    """Assemble the per-frequency 4x4 systems of the u-step.

    ``matrices = K^H K + beta (|Dx|^2 + |Dy|^2) I`` with ``K`` the 4x4 symbol of
    the quaternion kernel, ``rhs = K^H F([0, f]) + beta (Dx^H F(vx) + Dy^H F(vy))``.
    """
    parts = _SystemParts(k, f)
    if v.shape != parts.shape + (3,):
        raise ValueError(f"gradient field shape {v.shape} does not match image {parts.shape}")
    return parts.system(v, beta)


def apply_fourier_system(sys, x):
    """Apply the block system to a spatial ``m x n x 4`` field; returns a spatial field."""
    fx = np.fft.fft2(np.asarray(x, dtype=np.float64), axes=(0, 1))
    out = np.einsum("xypq,xyq->xyp", sys.matrices, fx)
    return np.real(np.fft.ifft2(out, axes=(0, 1)))


def solve_fourier_system(sys, full=False):
    """Solve every 4x4 block by LU with partial pivoting and transform back.

    Returns the ``m x n x 3`` colour image (planes 1..3), or the whole
    ``m x n x 4`` quaternion field when ``full`` is true.
    """
    try:
        sol = np.linalg.solve(sys.matrices, sys.rhs[..., None])[..., 0]
    except np.linalg.LinAlgError:
        sol = None
    if sol is None or not np.all(np.isfinite(sol)):
        det = np.abs(np.linalg.det(sys.matrices))
        idx = np.unravel_index(int(np.argmin(det)), det.shape)
        raise SingularSystemError(f"singular 4x4 block at frequency index {idx}", index=idx)
    u = np.real(np.fft.ifft2(sol, axes=(0, 1)))
    return u if full else u[..., 1:]


def beta_schedule(lam, beta0=None, beta_max=8.0):
    """Penalty values visited by the inner loop: ``beta0, 2 beta0, ...`` while ``< beta_max``."""
    beta = 2.0 * lam if beta0 is None else float(beta0)
    if beta <= 0:
        raise ValueError(f"beta0 must be positive, got {beta}")
    if beta > beta_max:
        raise ValueError(f"beta0={beta} exceeds beta_max={beta_max}")
    betas = []
    while beta < beta_max:
        betas.append(beta)
        beta *= 2.0
    return betas


def solve_latent(f, k, lam, beta0=None, beta_max=8.0, diagnostics: Optional[LatentDiagnostics] = None):
    """Algorithm-2 style inner loop; returns the (unclamped) latent colour image.

    ``beta0`` defaults to ``2 * lam``.  The loop alternates the v-step and the
    Fourier u-step, doubling ``beta`` until it reaches ``beta_max``.
    """
    if lam <= 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    f = as_color_image(f, "blurred image")
    parts = _SystemParts(k, f)
    u = f.copy()
    for beta in beta_schedule(lam, beta0, beta_max):
        v = threshold_gradients(u, lam, beta)
        uq = solve_fourier_system(parts.system(v, beta), full=True)
        u = uq[..., 1:]
        if diagnostics is not None:
            diagnostics.betas.append(beta)
            kept = np.any((v.gx != 0) | (v.gy != 0), axis=-1)
            diagnostics.kept_fraction.append(float(kept.mean()))
            diagnostics.real_part_max.append(float(np.max(np.abs(uq[..., 0]))))
    return u


def hqs_objective(f, k, u, v, lam, beta):
    """Split objective ``||Q(*)u - [0,f]||^2 + lam ||v||_0 + beta ||grad u - [0,v]||^2``.

    ``u`` may be a colour image (zero real part) or a full quaternion field;
    the real-part residual plane and the real-part gradients are included,
    exactly as in the u-step.  ``||v||_0`` counts pixels whose gradient
    vector is nonzero in any channel.
    """
    uq = lift(u)
    target = lift(as_color_image(f, "blurred image"))
    target[..., 0] = 0.0
    resid = qconv_fft(k, uq) - target
    g = gradient(uq)
    vx, vy = lift(v.gx), lift(v.gy)
    nnz = np.count_nonzero(np.any((v.gx != 0) | (v.gy != 0), axis=-1))
    fit = float(np.sum(resid ** 2))
    return fit + lam * nnz + beta * float(np.sum((g.gx - vx) ** 2 + (g.gy - vy) ** 2))


def normal_equation_residual(f, k, uq, v, beta):
    """Relative residual of the u-step normal equations, computed matrix-free.

    ``r = T^T (T u - [0,f]) + beta (Dx^T (Dx u - vx) + Dy^T (Dy u - vy))``
    where ``T`` is the quaternion convolution and the differences act on
    all four planes (``v`` is padded with a zero real plane).
    """
    uq = np.asarray(uq, dtype=np.float64)
    target = lift(as_color_image(f, "blurred image"))
    target[..., 0] = 0.0
    resid = qconv_fft(k, uq) - target
    # T^T is the quaternion convolution with the conjugate, spatially flipped kernel.
    flipped = k.data[:, ::-1, ::-1] * np.array([1.0, -1.0, -1.0, -1.0])[:, None, None]
    adj = qconv_fft(QuatKernel(flipped), resid)
    g = gradient(uq)
    vx, vy = lift(v.gx), lift(v.gy)
    r = adj + beta * divergence_adjoint(GradientField(g.gx - vx, g.gy - vy))
    rhs = qconv_fft(QuatKernel(flipped), target) + beta * divergence_adjoint(GradientField(vx, vy))
    denom = max(float(np.linalg.norm(rhs)), 1e-300)
    return float(np.linalg.norm(r)) / denom

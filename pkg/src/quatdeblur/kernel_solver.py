"""Kernel update: Tikhonov-regularised least squares in the gradient domain.

For the quaternion kernel the fit is

    sum_d ||Q (*) D_d u - [0, D_d f]||^2 + gamma ||Q||^2,   d in {x, y}

restricted to an ``s x s`` support.  ``Q (*) w`` is linear in ``Q``:
output plane ``p`` picks up ``Q_c`` convolved with ``sign(p, q) w_q`` for
the single ``q`` with ``BLOCK_INDEX[p, q] == c``.  All convolutions are
periodic, so the normal operator is a 4x4 block of per-frequency products
that is applied with FFTs (zero-pad the support, multiply, crop back).
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from scipy.sparse.linalg import LinearOperator, cg

from .errors import DegenerateInputError, EmptyKernelError
from .image_domain import as_color_image, gradient
from .quat_core import BLOCK_INDEX, BLOCK_SIGN, QuatKernel, lift, otf2psf, psf2otf

__all__ = [
    "CGInfo",
    "KernelSystem",
    "conjugate_gradient",
    "estimate_kernel",
    "project_kernel",
    "estimate_kernel_cck",
    "normalize_cck",
]

log = logging.getLogger(__name__)

# Column c of output row p reads input plane p XOR c (Klein four-group table).
_PLANE_FOR = np.array([[p ^ c for c in range(4)] for p in range(4)])
_SIGN_FOR = np.array([[BLOCK_SIGN[p, p ^ c] for c in range(4)] for p in range(4)])
assert np.all(BLOCK_INDEX[np.arange(4)[:, None], _PLANE_FOR] == np.arange(4)[None, :])

_FLAT_GRADIENT = 1e-12


@dataclass
class CGInfo:
    iterations: int = 0
    converged: bool = False
    residuals: List[float] = field(default_factory=list)
    objectives: List[float] = field(default_factory=list)


class KernelSystem:
    """Implicit ``A = T^T T + gamma I`` on the kernel support, with right-hand side ``T^T t``.

    ``symbols`` holds the per-frequency design ``m x n x P x C`` (``P`` output
    planes, ``C`` kernel components); ``targets`` the FFT of the ``P`` target
    planes.
    """

    def __init__(self, symbols, targets, size, gamma):
        if gamma < 0:
            raise ValueError(f"gamma must be non-negative, got {gamma}")
        if size % 2 == 0 or size < 1:
            raise ValueError(f"kernel size must be odd, got {size}")
        m, n = symbols.shape[:2]
        if size > m or size > n:
            raise ValueError(f"kernel size {size} exceeds the {m}x{n} image")
        self.size = size
        self.gamma = float(gamma)
        self.shape = (m, n)
        self.components = symbols.shape[3]
        sym_h = np.conj(symbols)
        self.gram = np.einsum("xypc,xypd->xycd", sym_h, symbols)
        self._rhs = otf2psf(np.moveaxis(np.einsum("xypc,xyp->xyc", sym_h, targets), -1, 0), size)
        self._target_energy = float(np.sum(np.abs(targets) ** 2)) / (m * n)

    @classmethod
    def quaternion(cls, u, f, size, gamma):
        """System for the four-component quaternion kernel.

        ``f`` may be a colour image (observed as ``[0, f1, f2, f3]``) or a full
        quaternion image when the real part is known (synthetic data).
        """
        uq = lift(u)
        fq = lift(f)
        if fq.shape != uq.shape:
            raise ValueError(f"latent {uq.shape[:2]} and blurred {fq.shape[:2]} images differ in size")
        gu = gradient(uq)
        if max(np.abs(gu.gx).max(), np.abs(gu.gy).max()) < _FLAT_GRADIENT:
            raise DegenerateInputError("degenerate input: latent image has no gradients")
        gf = gradient(fq)
        symbols, targets = [], []
        for w, t in ((gu.gx, gf.gx), (gu.gy, gf.gy)):
            fw = np.fft.fft2(w, axes=(0, 1))
            symbols.append(fw[..., _PLANE_FOR] * _SIGN_FOR)
            targets.append(np.fft.fft2(t, axes=(0, 1)))
        return cls(np.concatenate(symbols, axis=2), np.concatenate(targets, axis=2), size, gamma)

    @classmethod
    def conventional(cls, u, f, size, gamma):
        """System for one real kernel shared by the three colour channels."""
        u = as_color_image(u, "sharp image")
        f = as_color_image(f, "blurred image")
        if u.shape != f.shape:
            raise ValueError(f"sharp {u.shape[:2]} and blurred {f.shape[:2]} images differ in size")
        gu, gf = gradient(u), gradient(f)
        if max(np.abs(gu.gx).max(), np.abs(gu.gy).max()) < _FLAT_GRADIENT:
            raise DegenerateInputError("degenerate input: sharp image has no gradients")
        symbols = np.concatenate([np.fft.fft2(gu.gx, axes=(0, 1)), np.fft.fft2(gu.gy, axes=(0, 1))], axis=2)
        targets = np.concatenate([np.fft.fft2(gf.gx, axes=(0, 1)), np.fft.fft2(gf.gy, axes=(0, 1))], axis=2)
        return cls(symbols[..., None], targets, size, gamma)

    @property
    def rhs(self):
        return self._rhs

    @property
    def n_unknowns(self):
        return self.components * self.size * self.size

    def apply(self, x):
        """``(T^T T + gamma I) x`` for ``x`` of shape ``C x s x s``."""
        x = np.asarray(x, dtype=np.float64).reshape(self.components, self.size, self.size)
        fx = np.stack([psf2otf(x[c], self.shape) for c in range(self.components)], axis=-1)
        fy = np.einsum("xycd,xyd->xyc", self.gram, fx)
        return otf2psf(np.moveaxis(fy, -1, 0), self.size) + self.gamma * x

    def objective(self, x):
        """Quadratic ``0.5 x.Ax - b.x`` minimised by the normal equations."""
        x = np.asarray(x, dtype=np.float64).reshape(self.components, self.size, self.size)
        return float(0.5 * np.vdot(x, self.apply(x)) - np.vdot(self._rhs, x))

    def fit_residual(self, x):
        """Data misfit ``||T x - t||^2`` (up to the Tikhonov term), via Parseval."""
        return 2.0 * (self.objective(x) - 0.5 * self.gamma * float(np.sum(np.square(x)))) + self._target_energy


def conjugate_gradient(system, x0=None, max_iter=50, tol=1e-6):
    """Run CG on ``system`` and record the quadratic objective after every step."""
    n = system.n_unknowns
    op = LinearOperator((n, n), matvec=lambda v: system.apply(v).ravel(), dtype=np.float64)
    b = system.rhs.ravel()
    start = np.zeros(n) if x0 is None else np.asarray(x0, dtype=np.float64).ravel()
    info = CGInfo(objectives=[system.objective(start)])

    def record(xk):
        info.iterations += 1
        info.objectives.append(system.objective(xk))

    x, status = cg(op, b, x0=start, rtol=tol, atol=0.0, maxiter=max_iter, callback=record)
    info.converged = status == 0
    bnorm = np.linalg.norm(b)
    info.residuals.append(float(np.linalg.norm(b - op.matvec(x)) / bnorm) if bnorm > 0 else 0.0)
    return x.reshape(system.components, system.size, system.size), info


def estimate_kernel(u, f, size, gamma, cg_iters=50, cg_tol=1e-6, init: Optional[QuatKernel] = None,
                    info: Optional[CGInfo] = None):
    """Least-squares quaternion kernel from latent ``u`` and blurred ``f``.

    Both x and y gradients enter the fit with equal weight.  CG stops after
    ``cg_iters`` iterations or once the relative residual drops below
    ``cg_tol``.  ``init`` warm-starts CG (it must have the requested size).

    Raises:
        DegenerateInputError: ``u`` has no gradients at all.
    """
    if gamma <= 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    system = KernelSystem.quaternion(u, f, size, gamma)
    x0 = None
    if init is not None:
        if init.size != size:
            raise ValueError(f"initial kernel has size {init.size}, expected {size}")
        x0 = init.data
    x, run = conjugate_gradient(system, x0, cg_iters, cg_tol)
    if info is not None:
        info.iterations, info.converged = run.iterations, run.converged
        info.residuals[:], info.objectives[:] = run.residuals, run.objectives
    return QuatKernel(x)


def project_kernel(k, clip_ratio=0.05):
    """Clip a kernel estimate to a clean support.

    ``Q0`` loses its negative entries and everything below
    ``clip_ratio * max(Q0)``; ``Q1..Q3`` lose entries whose magnitude is below
    ``clip_ratio`` times their own peak magnitude.
    """
    if not 0.0 <= clip_ratio < 1.0:
        raise ValueError(f"clip_ratio must lie in [0, 1), got {clip_ratio}")
    data = np.array(k.data)
    q0 = np.maximum(data[0], 0.0)
    peak = q0.max()
    if peak <= 0.0:
        raise EmptyKernelError("empty kernel: Q0 has no positive entries")
    q0[q0 < clip_ratio * peak] = 0.0
    data[0] = q0
    for c in (1, 2, 3):
        comp = data[c]
        comp[np.abs(comp) < clip_ratio * np.abs(comp).max()] = 0.0
    return QuatKernel(data)


def normalize_cck(k):
    """Clamp negatives and rescale to unit sum."""
    k = np.maximum(np.asarray(k, dtype=np.float64), 0.0)
    total = k.sum()
    if total <= 0.0:
        raise EmptyKernelError("empty kernel: no positive entries to normalise")
    return k / total


def estimate_kernel_cck(u, f, size, gamma, cg_iters=50, cg_tol=1e-6):
    """Single real kernel shared by R, G and B, then ``k >= 0`` and ``sum(k) = 1``."""
    if gamma <= 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    system = KernelSystem.conventional(u, f, size, gamma)
    x, _ = conjugate_gradient(system, None, cg_iters, cg_tol)
    return normalize_cck(x[0])

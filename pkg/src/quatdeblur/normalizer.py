"""Intensity-preserving rescaling of a quaternion kernel.

Each component ``Qc`` gets its own scale ``tc``.  The scales come from a
3x4 system that balances the L1 norms of the three colour channels of
``(t0 Q0 + t1 Q1 i + t2 Q2 j + t3 Q3 k) (*) u`` against those of ``f``:

    row R: [|Q0*u1|,       0,  |Q2*u3|, -|Q3*u2|]
    row G: [|Q0*u2|, -|Q1*u3|,       0, +|Q3*u1|]
    row B: [|Q0*u3|,  |Q1*u2|, -|Q2*u1|,       0]

(``|.|`` is the L1 norm.)  Each sign is the sign the term carries in the
colour planes of the quaternion product ``Q u``, so for non-negative
kernels, images and blurred data the rows hold exactly.  A variant with
``-|Q3*u1|`` in row G is available as ``NORM_PATTERN_ALT``.  The system is
underdetermined and is solved with the Moore-Penrose pseudoinverse.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError, EmptyKernelError
from .image_domain import as_color_image
from .quat_core import QuatKernel, conv2, qconv

__all__ = [
    "NormSystem",
    "ScaleVector",
    "NORM_PATTERN",
    "NORM_PATTERN_ALT",
    "build_norm_system",
    "solve_scale",
    "apply_normalization",
    "normalize_kernel",
    "normalize_l1",
    "channel_l1_mismatch",
]

PINV_RCOND = 1e-12

# (sign, kernel component, colour channel 1..3) per entry; None marks a structural zero.
NORM_PATTERN = (
    ((1, 0, 1), None, (1, 2, 3), (-1, 3, 2)),
    ((1, 0, 2), (-1, 1, 3), None, (1, 3, 1)),
    ((1, 0, 3), (1, 1, 2), (-1, 2, 1), None),
)
# Same table with the Q3 entry of row G negated.
NORM_PATTERN_ALT = (
    NORM_PATTERN[0],
    ((1, 0, 2), (-1, 1, 3), None, (-1, 3, 1)),
    NORM_PATTERN[2],
)


@dataclass(frozen=True)
class ScaleVector:
    t: np.ndarray
    residual: float = 0.0
    fallback: bool = False

    @property
    def t0(self):
        return float(self.t[0])

    def as_list(self):
        return [float(x) for x in self.t]


@dataclass
class NormSystem:
    A: np.ndarray  # 3 x 4
    rhs: np.ndarray  # 3


def build_norm_system(k, u, f, boundary="periodic", pattern=NORM_PATTERN):
    """Fill the 3x4 L1 system for kernel ``k``, latent ``u`` and blurred ``f``."""
    u = as_color_image(u, "latent image")
    f = np.asarray(f, dtype=np.float64)
    if f.ndim == 3 and f.shape[2] == 4:
        f = f[..., 1:]
    f = as_color_image(f, "blurred image")
    if u.shape != f.shape:
        raise ValueError(f"latent {u.shape[:2]} and blurred {f.shape[:2]} images differ in size")
    cache = {}

    def l1(c, ch):
        if (c, ch) not in cache:
            comp = k.data[c]
            cache[c, ch] = float(np.abs(conv2(comp, u[..., ch - 1], boundary)).sum()) if comp.any() else 0.0
        return cache[c, ch]

    A = np.zeros((3, 4))
    for row, entries in enumerate(pattern):
        for col, entry in enumerate(entries):
            if entry is not None:
                sign, c, ch = entry
                A[row, col] = sign * l1(c, ch)
    rhs = np.abs(f).sum(axis=(0, 1))
    return NormSystem(A, rhs)


def solve_scale(system):
    """Minimum-norm least-squares ``t = pinv(A) rhs``.

    Singular values below ``1e-12 * sigma_max`` are discarded.

    Raises:
        DegenerateInputError: ``A`` is numerically zero.
    """
    U, s, Vt = np.linalg.svd(system.A, full_matrices=False)
    if s.size == 0 or s[0] <= 0.0 or not np.isfinite(s[0]):
        raise DegenerateInputError("degenerate normalization system (A = 0)")
    keep = s > PINV_RCOND * s[0]
    t = Vt[keep].T @ ((U[:, keep].T @ system.rhs) / s[keep])
    residual = float(np.linalg.norm(system.A @ t - system.rhs))
    return ScaleVector(t, residual)


def apply_normalization(k, t, system=None):
    """Return ``(t0 Q0, t1 Q1, t2 Q2, t3 Q3)``.

    When ``t`` is missing (degenerate solve) or ``t0 <= 0`` the kernel is
    instead rescaled as a whole-intensity match on ``Q0`` alone:
    ``t0 = sum(rhs) / sum(A[:, 0])`` and ``t1 = t2 = t3 = 1``; this needs the
    ``system`` the scales came from.
    """
    if t is not None and not np.all(np.isfinite(t.t)):
        raise ValueError("scale vector must be finite")
    if t is not None and t.t0 > 0.0:
        return k.scaled(t.t)
    if system is None:
        raise ValueError("fallback normalization needs the norm system")
    denom = float(system.A[:, 0].sum())
    if denom <= 0.0:
        raise EmptyKernelError("empty kernel: Q0 response is zero, cannot normalise")
    return k.scaled([float(system.rhs.sum()) / denom, 1.0, 1.0, 1.0])


def normalize_kernel(k, u, f, boundary="periodic", pattern=NORM_PATTERN):
    """Build, solve and apply in one go; returns ``(kernel, ScaleVector)``."""
    system = build_norm_system(k, u, f, boundary, pattern)
    try:
        t = solve_scale(system)
    except DegenerateInputError:
        t = None
    out = apply_normalization(k, t, system)
    if t is None or t.t0 <= 0.0:
        denom = float(system.A[:, 0].sum())
        t = ScaleVector(np.array([system.rhs.sum() / denom, 1.0, 1.0, 1.0]),
                        residual=float("nan") if t is None else t.residual, fallback=True)
    return out, t


def normalize_l1(k):
    """Divide all four components by ``|Q0|_1 + |Q1|_1 + |Q2|_1 + |Q3|_1``."""
    total = float(np.abs(k.data).sum())
    if total == 0.0:
        raise EmptyKernelError("cannot L1-normalise a zero kernel")
    return QuatKernel(k.data / total)


def channel_l1_mismatch(k, u, f, boundary="periodic"):
    """``sum_c | ||(Q (*) u)_c||_1 - ||f_c||_1 |`` over the three colour channels."""
    f = np.asarray(f, dtype=np.float64)
    if f.shape[-1] == 4:
        f = f[..., 1:]
    out = qconv(k, u, boundary)[..., 1:]
    return float(np.sum(np.abs(np.abs(out).sum(axis=(0, 1)) - np.abs(f).sum(axis=(0, 1)))))

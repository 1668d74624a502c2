"""Quaternion kernels and the quaternion convolution operator.

A colour image ``u`` (``m x n x 3``, channels R, G, B) is identified with the
pure-imaginary quaternion field ``u1 i + u2 j + u3 k``.  Quaternion-valued
images are stored channel-last as ``m x n x 4`` arrays whose plane 0 is the
real part.  A quaternion kernel ``Q = Q0 + Q1 i + Q2 j + Q3 k`` is stored as a
``4 x s x s`` array with odd ``s`` and its origin at the geometric centre.

``Q (*) u`` is the left Hamilton product applied tap-wise, i.e. the real
block operator

    [[Q0, -Q1, -Q2, -Q3],
     [Q1,  Q0, -Q3,  Q2],
     [Q2,  Q3,  Q0, -Q1],
     [Q3, -Q2,  Q1,  Q0]]

acting on the stacked planes ``[u0, u1, u2, u3]``, where every entry is an
ordinary 2-D convolution (kernel flipped, not correlation).

Vectorisation convention used by :func:`realify`: planes are stacked in the
order 0..3 and each plane is flattened row-major.
"""

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

__all__ = [
    "BLOCK_SIGN",
    "BLOCK_INDEX",
    "QuatKernel",
    "lift",
    "conv2",
    "qconv",
    "qconv_fft",
    "psf2otf",
    "otf2psf",
    "quat_symbol",
    "realify",
    "re_matrix",
    "qnorms",
]

# Row p, column q of the block operator is BLOCK_SIGN[p, q] * Q_{BLOCK_INDEX[p, q]}.
BLOCK_SIGN = np.array(
    [[1, -1, -1, -1],
     [1, 1, -1, 1],
     [1, 1, 1, -1],
     [1, -1, 1, 1]],
    dtype=np.float64,
)
BLOCK_INDEX = np.array(
    [[0, 1, 2, 3],
     [1, 0, 3, 2],
     [2, 3, 0, 1],
     [3, 2, 1, 0]],
)

BOUNDARY_MODES = ("periodic", "replicate")
_NDIMAGE_MODE = {"periodic": "wrap", "replicate": "nearest"}

REALIFY_MAX_PIXELS = 4096


@dataclass(frozen=True, eq=False)
class QuatKernel:
    """Four real ``s x s`` kernels sharing one odd support.

    ``data[c]`` is component ``Qc``; use :meth:`from_components` to build one
    from separate arrays.
    """

    data: np.ndarray

    def __post_init__(self):
        arr = np.array(self.data, dtype=np.float64, copy=True)
        if arr.ndim != 3 or arr.shape[0] != 4:
            raise ValueError(f"quaternion kernel must have shape (4, s, s), got {arr.shape}")
        s = arr.shape[1]
        if arr.shape[2] != s:
            raise ValueError(f"kernel components must be square, got {arr.shape[1:]}")
        if s < 1 or s % 2 == 0:
            raise ValueError(f"kernel size must be odd and >= 1, got {s}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("kernel entries must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @classmethod
    def from_components(cls, q0, q1=None, q2=None, q3=None):
        q0 = np.asarray(q0, dtype=np.float64)
        parts = [q0] + [np.zeros_like(q0) if q is None else np.asarray(q, dtype=np.float64)
                        for q in (q1, q2, q3)]
        shapes = {p.shape for p in parts}
        if len(shapes) != 1:
            raise ValueError(f"kernel components disagree in shape: {sorted(shapes)}")
        return cls(np.stack(parts))

    @classmethod
    def identity(cls, size=1):
        """The quaternion delta ``(delta, 0, 0, 0)`` on an odd ``size`` support."""
        data = np.zeros((4, size, size))
        data[0, size // 2, size // 2] = 1.0
        return cls(data)

    @property
    def size(self):
        return self.data.shape[1]

    @property
    def radius(self):
        return self.size // 2

    @property
    def q0(self):
        return self.data[0]

    @property
    def q1(self):
        return self.data[1]

    @property
    def q2(self):
        return self.data[2]

    @property
    def q3(self):
        return self.data[3]

    def scaled(self, t):
        """Component-wise scaling ``(t0 Q0, t1 Q1, t2 Q2, t3 Q3)``."""
        t = np.asarray(t, dtype=np.float64).reshape(4, 1, 1)
        return QuatKernel(self.data * t)

    def allclose(self, other, rtol=1e-12, atol=0.0):
        return self.size == other.size and np.allclose(self.data, other.data, rtol=rtol, atol=atol)

    def __repr__(self):
        return f"QuatKernel(size={self.size}, l1={np.abs(self.data).sum(axis=(1, 2)).round(6).tolist()})"


def lift(u):
    """Return ``u`` as an ``m x n x 4`` quaternion image.

    Three-channel colour images get a zero real part; four-channel input is
    returned as a float64 copy.
    """
    u = np.asarray(u, dtype=np.float64)
    if u.ndim != 3 or u.shape[2] not in (3, 4):
        raise ValueError(f"expected an m x n x 3 or m x n x 4 array, got shape {u.shape}")
    if u.shape[2] == 4:
        return u.copy()
    out = np.zeros(u.shape[:2] + (4,))
    out[..., 1:] = u
    return out


def _check_kernel_fits(k, shape):
    if k.size > shape[0] or k.size > shape[1]:
        raise ValueError(f"kernel of size {k.size} is larger than the {shape[0]}x{shape[1]} image")


def conv2(kernel, plane, boundary="periodic"):
    """Centred 2-D convolution of one real plane with one real kernel."""
    if boundary not in BOUNDARY_MODES:
        raise ValueError(f"boundary must be one of {BOUNDARY_MODES}, got {boundary!r}")
    return ndimage.convolve(plane, kernel, mode=_NDIMAGE_MODE[boundary])


def qconv(k, u, boundary="periodic"):
    """Quaternion convolution ``Q (*) u`` in the spatial domain.

    Args:
        k: the quaternion kernel.
        u: ``m x n x 3`` colour image (lifted to zero real part) or an
            ``m x n x 4`` quaternion image.
        boundary: ``"periodic"`` or ``"replicate"`` (pad by edge replication,
            convolve, crop).

    Returns:
        ``m x n x 4`` quaternion image.
    """
    uq = lift(u)
    _check_kernel_fits(k, uq.shape)
    out = np.zeros_like(uq)
    for q in range(4):
        plane = uq[..., q]
        if not plane.any():
            continue
        for p in range(4):
            comp = k.data[BLOCK_INDEX[p, q]]
            if comp.any():
                out[..., p] += BLOCK_SIGN[p, q] * conv2(comp, plane, boundary)
    return out


def psf2otf(psf, shape):
    """FFT of a centred odd-sized kernel zero-padded to ``shape``, origin at (0, 0)."""
    psf = np.asarray(psf, dtype=np.float64)
    s0, s1 = psf.shape
    if s0 > shape[0] or s1 > shape[1]:
        raise ValueError(f"kernel {psf.shape} does not fit into {shape}")
    pad = np.zeros(shape)
    pad[:s0, :s1] = psf
    pad = np.roll(pad, (-(s0 // 2), -(s1 // 2)), axis=(0, 1))
    return np.fft.fft2(pad)


def otf2psf(otf, size):
    """Inverse of :func:`psf2otf` restricted to an odd ``size x size`` support.

    Also the exact adjoint of the zero-padding step, so ``crop(F^-1 X)`` can
    be used inside symmetric operators.
    """
    full = np.real(np.fft.ifft2(otf, axes=(-2, -1)))
    r = size // 2
    full = np.roll(full, (r, r), axis=(-2, -1))
    return full[..., :size, :size]


def quat_symbol(k, shape):
    """Per-frequency 4x4 complex matrices of the block operator.

    Returns an ``m x n x 4 x 4`` array ``K`` with
    ``F(Q (*) u)[..., p] = sum_q K[..., p, q] * F(u)[..., q]``.
    """
    _check_kernel_fits(k, shape)
    otfs = np.stack([psf2otf(k.data[c], shape) for c in range(4)], axis=-1)
    return otfs[..., BLOCK_INDEX] * BLOCK_SIGN


def qconv_fft(k, u):
    """Periodic quaternion convolution through the 2-D FFT."""
    uq = lift(u)
    sym = quat_symbol(k, uq.shape[:2])
    fu = np.fft.fft2(uq, axes=(0, 1))
    fout = np.einsum("xypq,xyq->xyp", sym, fu)
    return np.real(np.fft.ifft2(fout, axes=(0, 1)))


def _conv_matrix(kernel, m, n):
    """Dense ``mn x mn`` periodic convolution matrix (row-major vec)."""
    s = kernel.shape[0]
    r = s // 2
    rows = np.arange(m * n)
    ii, jj = np.divmod(rows, n)
    mat = np.zeros((m * n, m * n))
    for a in range(s):
        for b in range(s):
            w = kernel[a, b]
            if w == 0.0:
                continue
            cols = ((ii - (a - r)) % m) * n + (jj - (b - r)) % n
            np.add.at(mat, (rows, cols), w)
    return mat


def realify(k, m, n):
    """Dense ``4mn x 4mn`` real matrix of ``Q (*) .`` with periodic boundary.

    Only meant for small oracle computations; refuses ``m * n > 4096``.
    """
    if m * n > REALIFY_MAX_PIXELS:
        raise ValueError(f"dense realification limited to {REALIFY_MAX_PIXELS} pixels, got {m * n}")
    _check_kernel_fits(k, (m, n))
    N = m * n
    blocks = [_conv_matrix(k.data[c], m, n) for c in range(4)]
    out = np.zeros((4 * N, 4 * N))
    for p in range(4):
        for q in range(4):
            out[p * N:(p + 1) * N, q * N:(q + 1) * N] = BLOCK_SIGN[p, q] * blocks[BLOCK_INDEX[p, q]]
    return out


def re_matrix(x):
    """Real ``4a x 4b`` representation of a quaternion matrix with components ``x[0..3]``."""
    comps = x.data if isinstance(x, QuatKernel) else np.asarray(x, dtype=np.float64)
    return np.block([[BLOCK_SIGN[p, q] * comps[BLOCK_INDEX[p, q]] for q in range(4)] for p in range(4)])


def qnorms(x):
    """Entry-wise norms of a quaternion kernel or quaternion image.

    ``l1`` sums absolute values of all real components.  ``l2`` and
    ``frobenius`` both equal the square root of the summed squared
    per-site moduli (they coincide for entry-wise fields; both are kept
    so callers can name whichever they mean).
    """
    if isinstance(x, QuatKernel):
        comps = x.data
    else:
        arr = np.asarray(x, dtype=np.float64)
        comps = np.moveaxis(lift(arr), -1, 0) if arr.ndim == 3 else arr
    modulus = np.sqrt(np.sum(comps ** 2, axis=0))
    fro = float(np.sqrt(np.sum(modulus ** 2)))
    return {"l1": float(np.abs(comps).sum()), "l2": fro, "frobenius": fro}

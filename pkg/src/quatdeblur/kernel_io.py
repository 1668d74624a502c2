"""Plain-text quaternion kernel files (``QKERN 1``).

Layout::

    QKERN 1
    size <s>
    mode <cck|qck-l1|qck-norm|raw>
    t <t0> <t1> <t2> <t3>        (optional)
    Q0
    <s lines of s floats>
    Q1
    ...

Floats are written with ``repr`` (shortest round-trip form), so reading a
file back gives bit-identical arrays.
"""

import os

import numpy as np

from .quat_core import QuatKernel

__all__ = ["KERNEL_MODES", "write_kernel", "read_kernel"]

KERNEL_MODES = ("cck", "qck-l1", "qck-norm", "raw")
MAGIC = "QKERN 1"


def _row(values):
    return " ".join(repr(float(v)) for v in values)


def write_kernel(path, k, mode="raw", t=None):
    if mode not in KERNEL_MODES:
        raise ValueError(f"mode must be one of {KERNEL_MODES}, got {mode!r}")
    lines = [MAGIC, f"size {k.size}", f"mode {mode}"]
    if t is not None:
        t = np.asarray(t, dtype=np.float64).ravel()
        if t.size != 4:
            raise ValueError(f"scale vector must have 4 entries, got {t.size}")
        lines.append("t " + _row(t))
    for c in range(4):
        lines.append(f"Q{c}")
        lines.extend(_row(r) for r in k.data[c])
    with open(os.fspath(path), "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_kernel(path):
    """Return ``(kernel, mode, t)``; ``t`` is ``None`` when the file has no scale line."""
    path = os.fspath(path)
    with open(path, encoding="ascii") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]

    def fail(msg):
        raise ValueError(f"malformed kernel file {path}: {msg}")

    if not lines or lines[0] != MAGIC:
        fail(f"expected first line {MAGIC!r}")
    try:
        key, value = lines[1].split()
        size = int(value)
    except (IndexError, ValueError):
        fail("expected 'size <s>' on line 2")
    if key != "size" or size < 1 or size % 2 == 0:
        fail("size must be a positive odd integer")
    if len(lines) < 3 or not lines[2].startswith("mode "):
        fail("expected 'mode <name>' on line 3")
    mode = lines[2].split(None, 1)[1]
    if mode not in KERNEL_MODES:
        fail(f"unknown mode {mode!r}")
    pos = 3
    t = None
    if pos < len(lines) and lines[pos].startswith("t "):
        t = np.array([float(x) for x in lines[pos].split()[1:]])
        if t.size != 4:
            fail("scale line needs four values")
        pos += 1
    data = np.zeros((4, size, size))
    for c in range(4):
        if pos >= len(lines) or lines[pos] != f"Q{c}":
            fail(f"expected block header Q{c}")
        pos += 1
        for r in range(size):
            if pos >= len(lines):
                fail(f"block Q{c} is truncated")
            row = lines[pos].split()
            if len(row) != size:
                fail(f"block Q{c} row {r} has {len(row)} values, expected {size}")
            data[c, r] = [float(x) for x in row]
            pos += 1
    if pos != len(lines):
        fail("trailing content after Q3")
    return QuatKernel(data), mode, t

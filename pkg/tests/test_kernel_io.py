import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from quatdeblur.kernel_io import read_kernel, write_kernel
from quatdeblur.quat_core import QuatKernel

floats = st.floats(allow_nan=False, allow_infinity=False, width=64)


@settings(max_examples=50, deadline=None)
@given(st.sampled_from([1, 3, 5]).flatmap(lambda s: arrays(np.float64, (4, s, s), elements=floats)),
       st.sampled_from(["cck", "qck-l1", "qck-norm", "raw"]),
       st.one_of(st.none(), arrays(np.float64, 4, elements=floats)))
def test_roundtrip_is_exact(tmp_path_factory, data, mode, t):
    path = tmp_path_factory.mktemp("k") / "k.qkern"
    write_kernel(path, QuatKernel(data), mode, t)
    k, m, t2 = read_kernel(path)
    np.testing.assert_array_equal(k.data, data)
    assert m == mode
    if t is None:
        assert t2 is None
    else:
        np.testing.assert_array_equal(t2, t)


def test_layout(tmp_path):
    path = tmp_path / "k.qkern"
    write_kernel(path, QuatKernel.identity(1), "cck")
    assert path.read_text().splitlines() == ["QKERN 1", "size 1", "mode cck",
                                             "Q0", "1.0", "Q1", "0.0", "Q2", "0.0", "Q3", "0.0"]


@pytest.mark.parametrize("text,msg", [
    ("", "first line"),
    ("QKERN 2\n", "first line"),
    ("QKERN 1\nsize 2\nmode raw\n", "odd"),
    ("QKERN 1\nsize x\n", "size"),
    ("QKERN 1\nsize 1\nmode blah\n", "unknown mode"),
    ("QKERN 1\nsize 1\nmode raw\nt 1 2\n", "four values"),
    ("QKERN 1\nsize 1\nmode raw\nQ0\n1\nQ1\n0\nQ2\n0\n", "Q3"),
    ("QKERN 1\nsize 1\nmode raw\nQ0\n1 2\n", "row 0"),
    ("QKERN 1\nsize 1\nmode raw\nQ0\n1\nQ1\n0\nQ2\n0\nQ3\n0\nextra\n", "trailing"),
])
def test_malformed_files(tmp_path, text, msg):
    path = tmp_path / "bad.qkern"
    path.write_text(text)
    with pytest.raises(ValueError, match=f"malformed kernel file.*{msg}"):
        read_kernel(path)


def test_write_validation(tmp_path):
    with pytest.raises(ValueError):
        write_kernel(tmp_path / "k", QuatKernel.identity(1), "bogus")
    with pytest.raises(ValueError):
        write_kernel(tmp_path / "k", QuatKernel.identity(1), "raw", t=[1, 2])

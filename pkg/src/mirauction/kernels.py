"""Backend selection for the hot loops.

numba is used when importable unless ``MIRAUCTION_DISABLE_NUMBA`` is set to a
non-empty value other than ``0``; the numpy backend gives identical results.
"""
import os

from . import _kernels_numpy

_disabled = os.environ.get("MIRAUCTION_DISABLE_NUMBA", "") not in ("", "0")

_impl = _kernels_numpy
BACKEND = "numpy"
if not _disabled:
    try:
        from . import _kernels_numba as _impl  # noqa: F811
        BACKEND = "numba"
    except ImportError:  # pragma: no cover
        pass

dp_choices = _impl.dp_choices
batch_welfare = _impl.batch_welfare
itemized = _impl.itemized
subadditive_disjoint = _impl.subadditive_disjoint

__all__ = ["BACKEND", "dp_choices", "batch_welfare", "itemized", "subadditive_disjoint"]

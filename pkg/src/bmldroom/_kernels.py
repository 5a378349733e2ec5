"""Backend selection for the hot kernels.

The compiled extension is used when it was built; otherwise (or when the
environment variable ``BMLDROOM_PURE_PYTHON`` is set) the numpy
implementation is used.  Both produce the same image-source sets.
"""
import os

from . import _ism_py

BACKEND = "python"
ism_traverse_py = _ism_py.ism_traverse
ism_traverse_ext = None

try:
    from ._ism_ext import ism_traverse as ism_traverse_ext  # noqa: F811
except ImportError:  # extension not built
    ism_traverse_ext = None

if ism_traverse_ext is not None and not os.environ.get("BMLDROOM_PURE_PYTHON"):
    BACKEND = "compiled"
    ism_traverse = ism_traverse_ext
else:
    ism_traverse = ism_traverse_py

"""Network kernels: the compiled extension when it is built, numpy otherwise.

Set ``SWARMCOV_BACKEND=python`` to force the numpy path.
"""

import os

from . import _reference

reference = _reference

if os.environ.get("SWARMCOV_BACKEND", "").lower() in ("python", "numpy", "reference"):
    fast = None
else:
    try:
        from . import _fast as fast
    except ImportError:
        fast = None

active = fast if fast is not None else _reference
BACKEND = "cython" if fast is not None else "python"

forward = active.forward
gradients = active.gradients
rmsprop = active.rmsprop
all_finite = active.all_finite


def get(name):
    """Return the kernel module called ``name`` ("cython" or "python")."""
    if name == "python":
        return _reference
    if name == "cython":
        if fast is None:
            raise ImportError("compiled kernels are not available; build with `pip install -e .`")
        return fast
    raise ValueError(f"unknown backend {name!r}")

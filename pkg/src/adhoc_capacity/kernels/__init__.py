"""Hot-loop kernels with a compiled backend and a numpy fallback.

The backend is picked at import: the Cython extension when it was built, else
numpy. ``ADHOC_CAPACITY_KERNELS=python`` forces the fallback,
``ADHOC_CAPACITY_KERNELS=compiled`` makes a missing extension an ImportError.
"""

import os

from . import _pykernels as python_backend

try:
    from . import _ckernels as compiled_backend
except ImportError:  # extension not built
    compiled_backend = None

_choice = os.environ.get("ADHOC_CAPACITY_KERNELS", "auto").lower()
if _choice == "python":
    _impl = python_backend
elif _choice == "compiled":
    if compiled_backend is None:
        raise ImportError("ADHOC_CAPACITY_KERNELS=compiled but the extension is not built")
    _impl = compiled_backend
else:
    _impl = compiled_backend or python_backend

BACKEND = "compiled" if _impl is compiled_backend else "python"

point_arc_angles = _impl.point_arc_angles
walk_routes = _impl.walk_routes
hop_interference = _impl.hop_interference
polygon_pair_angles = _impl.polygon_pair_angles

__all__ = [
    "BACKEND",
    "compiled_backend",
    "hop_interference",
    "point_arc_angles",
    "polygon_pair_angles",
    "python_backend",
    "walk_routes",
]

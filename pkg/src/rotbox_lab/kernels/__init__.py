"""Hot geometry kernels with a compiled core and a pure-Python twin.

The compiled extension (``_core``, Cython) and the fallback (``_pure``)
implement the same clipping algorithm operation-for-operation; results
agree to float precision.  Selection happens once at import:

* ``ROTBOX_LAB_PURE=1`` in the environment forces the pure backend;
* otherwise the compiled core is used when the extension built.

``benchmarks/bench_kernels.py`` compares the two backends.
"""

import os

_force_pure = os.environ.get("ROTBOX_LAB_PURE", "") not in ("", "0")

if _force_pure:
    from . import _pure as _impl
    BACKEND = "pure"
else:
    try:
        from . import _core as _impl  # compiled extension
        BACKEND = "compiled"
    except ImportError:
        from . import _pure as _impl
        BACKEND = "pure"

rbox_iou_single = _impl.rbox_iou_single
rbox_iou_pairs = _impl.rbox_iou_pairs
rbox_iou_matrix = _impl.rbox_iou_matrix

__all__ = ["BACKEND", "rbox_iou_single", "rbox_iou_pairs", "rbox_iou_matrix"]

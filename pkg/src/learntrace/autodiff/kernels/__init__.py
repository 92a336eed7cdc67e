"""Kernel backend selection.

The compiled extension is preferred when it imports cleanly; otherwise the
NumPy implementation is used. ``LEARNTRACE_KERNELS=numpy`` or
``LEARNTRACE_KERNELS=compiled`` forces a choice (the latter raises if the
extension is unavailable).
"""

import os

from . import numpy_backend

_forced = os.environ.get("LEARNTRACE_KERNELS", "").strip().lower()

compiled_backend = None
try:
    from . import _convkernels as compiled_backend  # type: ignore[no-redef]
except ImportError:
    compiled_backend = None

if _forced == "numpy":
    impl = numpy_backend
elif _forced == "compiled":
    if compiled_backend is None:
        raise ImportError(
            "LEARNTRACE_KERNELS=compiled but the extension is not built; "
            "run `python setup.py build_ext --inplace`"
        )
    impl = compiled_backend
else:
    impl = compiled_backend if compiled_backend is not None else numpy_backend


def backend_name() -> str:
    return impl.name

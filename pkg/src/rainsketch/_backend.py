"""Kernel backend selection.

The compiled Cython kernels are preferred when importable; otherwise the
numpy fallback is used. Set RAINSKETCH_BACKEND=python or =compiled to
force a choice (forcing "compiled" raises if the extension is missing).
"""

import os

_forced = os.environ.get("RAINSKETCH_BACKEND")

if _forced == "python":
    from . import _pykernels as kernels
elif _forced == "compiled":
    from . import _ckernels as kernels  # type: ignore[no-redef]
elif _forced:
    raise ValueError(f"unknown RAINSKETCH_BACKEND {_forced!r}")
else:
    try:
        from . import _ckernels as kernels  # type: ignore[no-redef]
    except ImportError:
        from . import _pykernels as kernels

BACKEND: str = kernels.NAME


def backend_name() -> str:
    """Name of the active kernel backend: "compiled" or "python"."""
    return BACKEND

"""Backend selection for the numerical hot kernels.

The compiled ``_core`` extension is preferred; the numpy fallback in
``_core_py`` is used when it is missing or when the environment variable
``P6DMA_PURE_PYTHON`` is set to a non-empty value other than ``0``.
"""
import os

from . import _core_py

if os.environ.get("P6DMA_PURE_PYTHON", "") not in ("", "0"):
    _backend = _core_py
else:
    try:
        from . import _core as _backend
    except ImportError:  # extension not built
        _backend = _core_py

BACKEND = "compiled" if _backend is not _core_py else "python"

project_codebook = _backend.project_codebook
precoder_eta = _backend.precoder_eta
solve_2x2 = _backend.solve_2x2
pdd_sweep = getattr(_backend, "pdd_sweep", None)

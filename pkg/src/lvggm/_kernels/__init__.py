"""Hot-kernel backend selection.

The splitting solvers spend essentially all of their time in three kernels:
an entrywise soft threshold and two symmetric eigenvalue maps. A compiled
Cython implementation is preferred when the extension built; the pure-NumPy
reference is always available as a fallback.

Selection happens at import time from the ``LVGGM_BACKEND`` environment
variable (``auto``, ``cython`` or ``python``) and can be changed at runtime
with :func:`use`, which the backend benchmark relies on. Solver code looks
the kernels up through this module at call time, so a switch takes effect
immediately.
"""

import os

from . import numpy_backend

try:
    from . import _core as _cython_backend
except ImportError:  # extension not built; NumPy path still works
    _cython_backend = None

_BACKENDS = {"python": numpy_backend}
if _cython_backend is not None:
    _BACKENDS["cython"] = _cython_backend

soft_threshold = None
psd_trace_prox = None
logdet_prox_core = None
_active = None


def available_backends():
    return sorted(_BACKENDS)


def active_backend():
    return _active


def use(name):
    """Select the kernel backend by name ('cython' or 'python')."""
    global soft_threshold, psd_trace_prox, logdet_prox_core, _active
    if name not in _BACKENDS:
        raise ValueError(
            f"unknown backend {name!r}; available: {available_backends()}"
        )
    mod = _BACKENDS[name]
    soft_threshold = mod.soft_threshold
    psd_trace_prox = mod.psd_trace_prox
    logdet_prox_core = mod.logdet_prox_core
    _active = name
    return name


_requested = os.environ.get("LVGGM_BACKEND", "auto").lower()
if _requested == "auto":
    use("cython" if "cython" in _BACKENDS else "python")
elif _requested in _BACKENDS:
    use(_requested)
elif _requested == "cython":
    raise ImportError(
        "LVGGM_BACKEND=cython but the compiled extension is not available"
    )
else:
    raise ImportError(f"LVGGM_BACKEND={_requested!r} is not a known backend")

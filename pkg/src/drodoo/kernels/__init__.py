"""Backend dispatch for the hot experiment kernels.

Two interchangeable implementations exist: a JIT-compiled one (``numba_impl``)
used by default and a pure-numpy fallback (``numpy_impl``).  Set the
environment variable ``DRODOO_NO_NUMBA`` to ``1``/``true``/``yes``/``on``
before import to force the fallback; it is also selected automatically when
the JIT compiler cannot be imported.  Both backends implement the same
contracts and agree to floating-point noise; within a single backend results
are fully deterministic and independent of any thread count.

All kernels assume uniform sample weights.  The general-weight reference
implementations live in :mod:`drodoo.inner` and :mod:`drodoo.models`.
"""

import os
import warnings

_flag = os.environ.get("DRODOO_NO_NUMBA", "").strip().lower()
_DISABLED = _flag in {"1", "true", "yes", "on"}

if _DISABLED:
    from . import numpy_impl as _impl

    BACKEND = "numpy"
else:
    try:
        from . import numba_impl as _impl

        BACKEND = "numba"
    except ImportError as exc:  # pragma: no cover - depends on environment
        warnings.warn(
            f"JIT kernel backend unavailable ({exc}); falling back to numpy",
            RuntimeWarning,
            stacklevel=2,
        )
        from . import numpy_impl as _impl

        BACKEND = "numpy"

REFINE_ITERS = _impl.REFINE_ITERS
chi2_inner_value = _impl.chi2_inner_value
newsvendor_family = _impl.newsvendor_family
newsvendor_sweep = _impl.newsvendor_sweep
newsvendor_bootstrap = _impl.newsvendor_bootstrap
population_mean_var = _impl.population_mean_var


def backend_name():
    """Name of the active kernel backend ("numba" or "numpy")."""
    return BACKEND


def set_thread_cap(jobs):
    """Cap the JIT threading layer at ``jobs`` threads (no-op for numpy).

    Kernel results are independent of the cap; it only bounds resource use.
    """
    if BACKEND != "numba":
        return
    import numba

    limit = max(1, min(int(jobs), numba.config.NUMBA_NUM_THREADS))
    numba.set_num_threads(limit)


__all__ = [
    "BACKEND",
    "REFINE_ITERS",
    "backend_name",
    "chi2_inner_value",
    "newsvendor_family",
    "newsvendor_sweep",
    "newsvendor_bootstrap",
    "population_mean_var",
    "set_thread_cap",
]

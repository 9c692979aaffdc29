"""Numeric backend selection.

Hot kernels (see :mod:`stableseq.kernels`) are compiled with numba when it is
importable, unless the environment variable ``STABLESEQ_NO_NUMBA`` is set to
``1``/``true``/``yes``, in which case the pure-numpy fallbacks are used.
``STABLESEQ_THREADS`` caps the worker lanes used by distance-matrix assembly;
results are bit-identical for any lane count.
"""

from __future__ import annotations

import os

_TRUTHY = {"1", "true", "yes", "on"}


def numba_disabled() -> bool:
    return os.environ.get("STABLESEQ_NO_NUMBA", "").strip().lower() in _TRUTHY


try:
    import numba  # noqa: F401

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only on numba-less installs
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and not numba_disabled()


def backend_name() -> str:
    """Name of the active kernel backend, recorded in run manifests."""
    return "numba" if USE_NUMBA else "numpy"


def worker_lanes(override: int | None = None) -> int:
    """Worker-lane count for distance matrices: explicit override, else env, else 1."""
    if override is not None:
        return max(1, int(override))
    raw = os.environ.get("STABLESEQ_THREADS", "").strip()
    if not raw:
        return 1
    try:
        return max(1, int(raw))
    except ValueError:
        return 1

"""Kernel backend selection.

The compiled extension (radarseg._gridcore) is preferred when present;
otherwise the pure-numpy fallback is used. Set RADARSEG_BACKEND=python
to force the fallback (used by the benchmark and the backend tests).
Both backends implement:

    neighbor_counts(x, y, t, d_xy, dt) -> int64[n]
    dbscan_labels(x, y, vr, t, nmin, vr_min, variant, eps_a, eps_b, eps_t) -> int64[n]
"""

from __future__ import annotations

import os

from . import pygrid

BOX = pygrid.BOX
EUCLID_XY = pygrid.EUCLID_XY
EUCLID_XYVR = pygrid.EUCLID_XYVR
NOISE = pygrid.NOISE

_forced = os.environ.get("RADARSEG_BACKEND", "").lower()

if _forced in ("", "compiled", "c"):
    try:
        from radarseg import _gridcore as _impl

        BACKEND = "compiled"
    except ImportError:
        if _forced:
            raise
        _impl = pygrid
        BACKEND = "python"
elif _forced == "python":
    _impl = pygrid
    BACKEND = "python"
else:
    raise RuntimeError(f"unknown RADARSEG_BACKEND value {_forced!r}")

neighbor_counts = _impl.neighbor_counts
dbscan_labels = _impl.dbscan_labels


def available_backends() -> dict[str, object]:
    """Importable backends by name (for benchmarks and equivalence tests)."""
    out = {"python": pygrid}
    try:
        from radarseg import _gridcore

        out["compiled"] = _gridcore
    except ImportError:
        pass
    return out

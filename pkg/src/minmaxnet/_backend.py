"""Kernel selection.

The compiled ``_kernels`` extension is used when it imports; otherwise the
numpy versions in ``_fallback`` are used.  Setting ``MINMAXNET_PURE=1`` in
the environment forces the fallback.
"""

import os

from . import _fallback

_compiled = None
if os.environ.get("MINMAXNET_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        _compiled = None

BACKENDS = {"python": _fallback}
if _compiled is not None:
    BACKENDS["compiled"] = _compiled

NAME = "compiled" if _compiled is not None else "python"
kernels = BACKENDS[NAME]


def get(name=None):
    """Return the kernel module ``name`` (``"compiled"`` or ``"python"``)."""
    if name is None:
        return kernels
    try:
        return BACKENDS[name]
    except KeyError:
        raise ValueError(
            f"kernel backend {name!r} unavailable; have {sorted(BACKENDS)}"
        ) from None

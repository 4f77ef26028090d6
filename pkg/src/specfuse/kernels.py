"""Kernel selection: compiled extension when built, pure Python otherwise.

Set ``SPECFUSE_PURE_PYTHON=1`` to force the fallback.
"""

from __future__ import annotations

import os

from . import _fallback

fallback = _fallback
compiled = None

if os.environ.get("SPECFUSE_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as compiled
    except ImportError:
        compiled = None

impl = compiled if compiled is not None else fallback
BACKEND = "cython" if compiled is not None else "python"

dense_probs = impl.dense_probs
pick_token = impl.pick_token


def use(name: str) -> None:
    """Switch kernels at runtime (``"cython"`` or ``"python"``); for benchmarks."""
    global impl, BACKEND, dense_probs, pick_token
    if name == "cython":
        if compiled is None:
            raise ImportError("compiled kernels are not built")
        impl = compiled
    elif name == "python":
        impl = fallback
    else:
        raise ValueError(f"unknown kernel backend {name!r}")
    BACKEND = name
    dense_probs = impl.dense_probs
    pick_token = impl.pick_token

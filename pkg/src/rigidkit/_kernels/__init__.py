"""Hot kernels: compiled when the extension is built, pure Python otherwise.

Set ``RIGIDKIT_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _pykernels as py

if os.environ.get("RIGIDKIT_PURE_PYTHON", "") not in ("", "0"):
    compiled = None
else:
    try:
        from . import _ckernels as compiled
    except ImportError:
        compiled = None


def use(name: str) -> None:
    """Switch every kernel to ``"cython"`` or ``"python"``.

    Library code looks kernels up on this module at call time, so the switch
    takes effect immediately.
    """
    global impl, BACKEND, PebbleGame, rank_mod_p, incidence_minors
    if name == "cython":
        if compiled is None:
            raise ImportError("compiled kernels are not built")
        impl = compiled
    elif name == "python":
        impl = py
    else:
        raise ValueError(f"unknown backend {name!r}")
    BACKEND = name
    PebbleGame = impl.PebbleGame
    rank_mod_p = impl.rank_mod_p
    incidence_minors = impl.incidence_minors


use("cython" if compiled is not None else "python")

__all__ = ["PebbleGame", "rank_mod_p", "incidence_minors", "BACKEND", "compiled", "py", "use"]

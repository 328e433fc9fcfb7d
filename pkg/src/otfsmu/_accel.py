"""Backend switch for the compiled kernels.

Set ``OTFSMU_DISABLE_NUMBA=1`` to force the pure-numpy path. The numba path is
also skipped silently when numba cannot be imported.
"""
import os

_FLAG = os.environ.get("OTFSMU_DISABLE_NUMBA", "").strip().lower()
DISABLED_BY_ENV = _FLAG not in ("", "0", "false", "no")

try:
    import numba  # noqa: F401

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAS_NUMBA = False

USE_NUMBA = HAS_NUMBA and not DISABLED_BY_ENV


def backend_name() -> str:
    return "numba" if USE_NUMBA else "numpy"

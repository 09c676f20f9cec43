"""Throw-kernel lane selection.

The simulator runs on one of two interchangeable kernels: a compiled
(Cython) loop and a pure-numpy twin. Both consume the random stream
identically (see either module's docstring), so results are
bit-identical; only speed differs. The compiled lane is preferred
when the extension built; set the environment variable
URNRATES_FORCE_PURE=1 to force the pure lane (used by the parity
tests and the benchmark).
"""

from __future__ import annotations

import os

from . import _throws_py

if os.environ.get("URNRATES_FORCE_PURE", "").strip() not in ("", "0"):
    _impl = _throws_py
else:
    try:
        from . import _throws as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _throws_py

run_block = _impl.run_block
ACTIVE_LANE = _impl.LANE


def kernel_info() -> dict:
    """Describe the active kernel lane."""
    return {
        "lane": ACTIVE_LANE,
        "module": getattr(_impl, "__file__", None),
        "generator": "PCG64, per-trial SeedSequence((seed, trial_index)), "
                     "one double per throw",
    }


def available_lanes() -> dict:
    """Map lane name -> run_block for every importable lane."""
    lanes = {"pure": _throws_py.run_block}
    try:
        from . import _throws
        lanes["compiled"] = _throws.run_block
    except ImportError:
        pass
    return lanes

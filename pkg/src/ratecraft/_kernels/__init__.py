"""Rollout kernel backend selection.

The compiled extension is preferred when it built; the pure-python twin in
reference.py is the fallback. Set RATECRAFT_BACKEND=python (or =compiled)
to force one side, e.g. for the comparison benchmark.
"""

import os

from . import reference

_requested = os.environ.get("RATECRAFT_BACKEND", "auto")
if _requested not in ("auto", "python", "compiled"):
    raise RuntimeError(f"RATECRAFT_BACKEND must be auto|python|compiled, not {_requested!r}")

compiled = None
if _requested != "python":
    try:
        from . import _rollout as compiled  # type: ignore[attr-defined]
    except ImportError:
        compiled = None
        if _requested == "compiled":
            raise RuntimeError(
                "RATECRAFT_BACKEND=compiled but the extension is not built; "
                "run pip install -e . --no-build-isolation"
            )

if compiled is not None:
    BACKEND_NAME = "compiled"
    rollout_episode = compiled.rollout_episode
else:
    BACKEND_NAME = "python"
    rollout_episode = reference.rollout_episode

LINE_WALKER = reference.LINE_WALKER
POINT_MAZE = reference.POINT_MAZE

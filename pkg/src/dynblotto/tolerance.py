"""Global numerical tolerance.

One absolute tolerance is shared by every feasibility residual and every
comparison in the package. ``BLOTTO_TOLERANCE`` in the environment overrides
the default at import time.
"""

from __future__ import annotations

import os

DEFAULT_EPS = 1e-9


def _from_env() -> float:
    raw = os.environ.get("BLOTTO_TOLERANCE")
    if raw is None:
        return DEFAULT_EPS
    value = float(raw)
    if not value > 0:
        raise ValueError(f"BLOTTO_TOLERANCE must be positive, got {raw!r}")
    return value


EPS = _from_env()

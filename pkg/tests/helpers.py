from __future__ import annotations

import os

import numpy as np
import pytest

slow = pytest.mark.skipif(
    os.getenv("MEDIANBAYES_SLOW") != "1",
    reason="Monte Carlo acceptance run; set MEDIANBAYES_SLOW=1",
)


def binomial_band(p: float, reps: int, sigmas: float = 3.0) -> float:
    return sigmas * float(np.sqrt(p * (1.0 - p) / reps))

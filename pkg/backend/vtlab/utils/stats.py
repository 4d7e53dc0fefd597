"""Distribution statistics shared by training diagnostics and the experiment harness."""
import math
from typing import Sequence

import numpy as np
from scipy import special, stats

PROB_FLOOR = 1e-8


def tv_distance(p: Sequence[float], q: Sequence[float]) -> float:
    """Total-variation distance between two probability vectors."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    return float(0.5 * np.abs(p - q).sum())


def entropy(p: Sequence[float]) -> float:
    """Shannon entropy in nats (0 log 0 = 0)."""
    return float(special.entr(np.asarray(p, dtype=np.float64)).sum())


def kl_divergence(p: Sequence[float], q: Sequence[float], floor: float = PROB_FLOOR) -> float:
    """KL(p || q) with both arguments floored at ``floor`` inside the logarithms."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    return float(np.sum(p * (np.log(np.maximum(p, floor)) - np.log(np.maximum(q, floor)))))


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    """Pearson correlation; NaN when either series is constant or shorter than 2."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.size < 2 or np.ptp(x) == 0.0 or np.ptp(y) == 0.0:
        return math.nan
    return float(stats.pearsonr(x, y)[0])


def relative_gap(value: float, reference: float) -> float:
    """|value - reference| / |reference| (infinite when the reference is zero and value is not)."""
    if reference == 0.0:
        return 0.0 if value == 0.0 else math.inf
    return abs(value - reference) / abs(reference)

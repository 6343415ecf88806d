"""Independent reference computations used by several test modules."""
import numpy as np


def enumerate_at_least(delta: float, n: int, k: int) -> float:
    """P(at least k of n independent faults) by summing over all 2^n fault patterns."""
    if n == 0:
        return 1.0 if k <= 0 else 0.0
    masks = np.arange(2 ** n, dtype=np.uint32)
    weight = np.bitwise_count(masks).astype(np.int64)
    probs = delta ** weight * (1.0 - delta) ** (n - weight)
    return float(np.sum(probs[weight >= k]))


def hand_beta(no_z, no_x, alpha, g2, g1m, gw, gmax, s):
    """Closed-form solution of the linear zero-syndrome equation beta = A (beta Q W + (1 - beta) Q^s)."""
    t = 2.0 / 3.0
    a = (no_z / alpha) * (1 - t * g2) ** 7 * (1 - t * g1m) ** 7 * (1 - t * gmax) ** 7
    q = (1 - t * g2) ** 7 * no_x / alpha
    w = (1 - t * gw) ** (21 * (s - 1))
    return a * q ** s / (1 - a * q * w + a * q ** s)

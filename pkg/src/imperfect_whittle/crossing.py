"""First crossing time of a passive belief trajectory over a threshold."""
from __future__ import annotations

import enum
import math

from .belief import TransitionMatrix, stationary_belief, tau, tau_k
from .errors import UnsupportedParametersError


class Never(enum.Enum):
    """Marker for a crossing that never happens."""

    NEVER = "never"

    def __repr__(self):
        return "NEVER"


NEVER = Never.NEVER

CrossingTime = int | Never  # finite k >= 0, or NEVER

# once tau^k has converged in floating point, further steps cannot cross
_MAX_CORRECTION = 64


def first_crossing_time(w: float, threshold: float, P: TransitionMatrix) -> CrossingTime:
    """Smallest k >= 0 with tau^k(w) > threshold, or NEVER."""
    if P.p01 == P.p11:
        raise UnsupportedParametersError("p01 == p11")
    if w > threshold:
        return 0
    if P.p11 < P.p01:
        # oscillating chain: the largest passive iterate after step 0 is tau(w)
        return 1 if tau(w, P) > threshold else NEVER

    w_o = stationary_belief(P)
    if threshold >= w_o:
        return NEVER
    d = 1.0 + P.p01 - P.p11
    num = P.p01 - threshold * d
    if num <= 0.0:
        # threshold equals the stationary belief up to rounding
        return NEVER
    L = math.floor(math.log(num / (P.p01 - w * d)) / math.log(P.correlation)) + 1
    L = max(L, 1)
    # floor(log) is fragile at the boundary; settle it on the trajectory itself
    while L > 1 and tau_k(w, P, L - 1) > threshold:
        L -= 1
    for _ in range(_MAX_CORRECTION):
        if tau_k(w, P, L) > threshold:
            return L
        L += 1
    return NEVER


def brute_force_crossing_time(w: float, threshold: float, P: TransitionMatrix,
                              cap: int = 10_000) -> CrossingTime:
    """Iterate tau until the belief exceeds the threshold; NEVER past ``cap`` steps."""
    x = w
    for k in range(cap + 1):
        if x > threshold:
            return k
        x = tau(x, P)
    return NEVER

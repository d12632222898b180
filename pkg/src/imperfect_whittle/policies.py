"""Decision rules over belief vectors, and exact finite-horizon dynamic programs.

The dynamic programs enumerate the belief tree exactly; they are the
verification oracle for the index machinery and the upper-bound baseline for
the simulations.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .belief import TransitionMatrix, tau, tau_phi
from .errors import BudgetError
from .index import DEFAULT_ITERS, REPEAT, index
from .models import ArmModel, BanditConfig

ActionSet = tuple[int, ...]  # sorted 0-based arm indices

MAX_SINGLE_HORIZON = 25
MAX_JOINT = {"N": 5, "M": 2, "T": 6}
_CHUNK = 1 << 18


def _top_m(scores: Sequence[float], M: int) -> ActionSet:
    if not (1 <= M < len(scores)):
        raise ValueError(f"need 1 <= M < N, got M={M}, N={len(scores)}")
    order = sorted(range(len(scores)), key=lambda i: (-scores[i], i))
    return tuple(sorted(order[:M]))


class IndexCache:
    """Memo of Whittle indices keyed by arm parameters and the exact belief.

    Values are deterministic, so concurrent duplicate inserts are harmless.
    """

    def __init__(self):
        self._d = {}

    def __len__(self):
        return len(self._d)

    def get(self, w, P, eps, beta, n=DEFAULT_ITERS, closure=REPEAT) -> float:
        key = (P.p01, P.p11, eps, beta, n, closure, w)
        v = self._d.get(key)
        if v is None:
            v = index(w, P, eps, beta, 1.0, n, closure)
            self._d[key] = v
        return v


def whittle_scores(beliefs, arms, eps, beta, n=DEFAULT_ITERS, cache=None, closure=REPEAT) -> list[float]:
    if cache is None:
        return [index(w, a.P, eps, beta, a.B, n, closure) for w, a in zip(beliefs, arms)]
    return [a.B * cache.get(w, a.P, eps, beta, n, closure) for w, a in zip(beliefs, arms)]


def select_whittle(beliefs, arms: Sequence[ArmModel], eps, beta, n=DEFAULT_ITERS, M=1,
                   cache: IndexCache | None = None, closure=REPEAT) -> ActionSet:
    """The M arms with the largest approximated Whittle index; ties go to the lower index."""
    return _top_m(whittle_scores(beliefs, arms, eps, beta, n, cache, closure), M)


def select_myopic(beliefs, arms: Sequence[ArmModel], M=1) -> ActionSet:
    """The M arms with the largest ``w * B``."""
    return _top_m([w * a.B for w, a in zip(beliefs, arms)], M)


# ---------------------------------------------------------------------------
# single arm, finite horizon


def _tau_phi_vec(w, P, eps):
    den = eps * w + (1.0 - w)
    # den == 0 only at eps == 0, w == 1, where the no-ACK branch has weight zero
    post = np.divide(eps * w, den, out=np.zeros_like(w), where=den > 0)
    return np.clip(post * P.p11 + (1.0 - post) * P.p01, 0.0, 1.0)


def finite_horizon_values(w, P: TransitionMatrix, eps: float, beta: float, m: float, T: int,
                          max_horizon: int = MAX_SINGLE_HORIZON):
    """T-horizon optimal value and its active/passive branches at each belief in ``w``.

    Returns three arrays (V, V_active, V_passive).  At T == 0 the branches are NaN.
    """
    if T < 0:
        raise ValueError("horizon must be nonnegative")
    if T > max_horizon:
        raise BudgetError(f"horizon {T} exceeds the cap {max_horizon} (cost grows like 2^T)")
    w = np.atleast_1d(np.asarray(w, dtype=float))
    if T == 0:
        nan = np.full_like(w, np.nan)
        return np.zeros_like(w), nan, nan

    v11 = {}

    def at_p11(t):
        if t not in v11:
            v11[t] = float(V(np.array([P.p11]), t)[0])
        return v11[t]

    def branches(x, t):
        ack = (1.0 - eps) * x
        if t == 1:
            return ack, np.full_like(x, float(m))
        nxt = V(np.concatenate([_tau_phi_vec(x, P, eps), np.clip(x * P.p11 + (1.0 - x) * P.p01, 0.0, 1.0)]), t - 1)
        k = x.size
        va = ack + beta * (ack * at_p11(t - 1) + (1.0 - ack) * nxt[:k])
        vp = m + beta * nxt[k:]
        return va, vp

    def V(x, t):
        if t == 0:
            return np.zeros_like(x)
        if x.size > 1 and x.size << t > _CHUNK:
            parts = max(2, (x.size << t) // _CHUNK)
            return np.concatenate([V(c, t) for c in np.array_split(x, min(parts, x.size))])
        va, vp = branches(x, t)
        return np.maximum(va, vp)

    va, vp = branches(w, T)
    return np.maximum(va, vp), va, vp


def single_arm_finite_value(w: float, P: TransitionMatrix, eps: float, beta: float, m: float, T: int,
                            max_horizon: int = MAX_SINGLE_HORIZON):
    """(V, V_active, V_passive) at one belief; the branches are None when T == 0."""
    V, va, vp = finite_horizon_values([w], P, eps, beta, m, T, max_horizon)
    if T == 0:
        return 0.0, None, None
    return float(V[0]), float(va[0]), float(vp[0])


@dataclass(frozen=True)
class ThresholdScan:
    """Outcome of scanning the optimal action across a belief grid.

    ``threshold`` is the largest grid belief where resting is optimal; -inf if
    activation is optimal everywhere, +inf if resting is.  None when the action
    pattern is not passive-then-active.
    """

    is_threshold: bool
    threshold: float | None
    switches: int


def single_arm_threshold_scan(P, eps, beta, m, T, grid=1e-3, tol=1e-12) -> ThresholdScan:
    """Check that the T-horizon optimal policy rests below a point and activates above it."""
    if np.isscalar(grid):
        if grid > 1e-3:
            raise ValueError("grid resolution must be at least 1e-3")
        grid = np.linspace(0.0, 1.0, int(round(1.0 / grid)) + 1)
    grid = np.asarray(grid, dtype=float)
    _, va, vp = finite_horizon_values(grid, P, eps, beta, m, T)
    active = (va - vp) > tol
    switches = int(np.count_nonzero(active[1:] != active[:-1]))
    if np.any(active[:-1] & ~active[1:]):
        return ThresholdScan(False, None, switches)
    if active.all():
        return ThresholdScan(True, -math.inf, switches)
    if not active.any():
        return ThresholdScan(True, math.inf, switches)
    return ThresholdScan(True, float(grid[np.argmax(active) - 1]), switches)


# ---------------------------------------------------------------------------
# joint problem, finite horizon


def _check_joint_budget(N, M, T, limits):
    limits = {**MAX_JOINT, **(limits or {})}
    if N > limits["N"] or M > limits["M"] or T > limits["T"]:
        raise BudgetError(
            f"joint DP with N={N}, M={M}, T={T} exceeds the limits "
            f"N<={limits['N']}, M<={limits['M']}, T<={limits['T']}"
        )


def joint_optimal_value(config: BanditConfig, T: int | None = None, limits: dict | None = None) -> float:
    """Exact optimal expected discounted reward of the M-of-N problem over T slots."""
    T = config.horizon if T is None else T
    N, M, eps, beta = config.N, config.M, config.eps, config.beta
    _check_joint_budget(N, M, T, limits)
    arms = config.arms
    subsets = list(itertools.combinations(range(N), M))
    outcomes = list(itertools.product((True, False), repeat=M))
    memo = {}

    def value(b, t):
        gains = [(1.0 - eps) * b[i] * arms[i].B for i in range(N)]
        if t == 1:
            return sum(sorted(gains, reverse=True)[:M])
        key = (b, t)
        if key in memo:
            return memo[key]
        passive = [tau(b[i], arms[i].P) for i in range(N)]
        best = -math.inf
        for S in subsets:
            total = sum(gains[i] for i in S)
            future = 0.0
            for acks in outcomes:
                prob = 1.0
                nb = list(passive)
                for i, ack in zip(S, acks):
                    q = (1.0 - eps) * b[i]
                    if ack:
                        prob *= q
                        nb[i] = arms[i].P.p11
                    else:
                        prob *= 1.0 - q
                        nb[i] = tau_phi(b[i], arms[i].P, eps)
                if prob > 0.0:
                    future += prob * value(tuple(nb), t - 1)
            best = max(best, total + beta * future)
        memo[key] = best
        return best

    if T == 0:
        return 0.0
    return value(tuple(config.beliefs0()), T)

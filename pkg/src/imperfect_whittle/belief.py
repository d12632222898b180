"""Belief-state operators for a two-state arm observed through a noisy sensor.

A belief ``w`` is the probability that the arm is in state 1 (good).  All
operators are pure float functions and clamp their result to [0, 1].
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import BoundInapplicableError, ContractViolation, DegenerateInputError


def _clamp(x: float) -> float:
    return 0.0 if x < 0.0 else 1.0 if x > 1.0 else x


@dataclass(frozen=True)
class TransitionMatrix:
    """Two-state Markov chain given by Pr(0->1) and Pr(1->1)."""

    p01: float
    p11: float

    def __post_init__(self):
        for name in ("p01", "p11"):
            v = getattr(self, name)
            if not (0.0 < v < 1.0) or not math.isfinite(v):
                raise ValueError(f"{name} must lie in (0, 1), got {v!r}")
        if self.p01 == self.p11:
            raise ValueError("p01 == p11 makes belief updates uninformative")

    @property
    def p10(self) -> float:
        return 1.0 - self.p11

    @property
    def p00(self) -> float:
        return 1.0 - self.p01

    @property
    def correlation(self) -> float:
        """p11 - p01; positive for a positively correlated chain."""
        return self.p11 - self.p01


@dataclass(frozen=True)
class ObservationModel:
    """Sensor error model.

    ``eps`` is Pr(O=0 | S=1).  ``delta`` (Pr(O=1 | S=0)) is carried for
    documentation only; rewards and belief updates depend on ``eps`` alone.
    """

    eps: float
    delta: float | None = None

    def __post_init__(self):
        if not (0.0 <= self.eps < 1.0):
            raise ValueError(f"eps must lie in [0, 1), got {self.eps!r}")
        if self.delta is not None and not (0.0 <= self.delta <= 1.0):
            raise ValueError(f"delta must lie in [0, 1], got {self.delta!r}")


def check_belief(w: float) -> float:
    if not (0.0 <= w <= 1.0):
        raise ValueError(f"belief must lie in [0, 1], got {w!r}")
    return float(w)


def tau(w: float, P: TransitionMatrix) -> float:
    """One-step belief update of an unobserved arm."""
    return _clamp(w * P.p11 + (1.0 - w) * P.p01)


def tau_k(w: float, P: TransitionMatrix, k: int) -> float:
    """k-step update of an unobserved arm, evaluated in closed form."""
    if k < 0:
        raise ValueError("k must be nonnegative")
    if k == 0:
        return w
    d = 1.0 + P.p01 - P.p11
    return _clamp((P.p01 - P.correlation**k * (P.p01 - d * w)) / d)


def phi(w: float, eps: float) -> float:
    """Posterior of state 1 after the arm was observed and no ACK came back."""
    den = eps * w + (1.0 - w)  # exact when w is close to 1
    if den <= 0.0:
        raise DegenerateInputError("no-ACK has probability zero (eps=0 and w=1)")
    return _clamp(eps * w / den)


def tau_phi(w: float, P: TransitionMatrix, eps: float) -> float:
    return tau(phi(w, eps), P)


def stationary_belief(P: TransitionMatrix) -> float:
    return P.p01 / (P.p01 + P.p10)


def update_belief(w: float, P: TransitionMatrix, eps: float, chosen: bool, ack: bool) -> float:
    if ack and not chosen:
        raise ContractViolation("an ACK can only be received from a chosen arm")
    if not chosen:
        return tau(w, P)
    if ack:
        return P.p11
    return tau(phi(w, eps), P)


def lipschitz_bound(P: TransitionMatrix, eps: float, beta: float) -> float:
    """Lipschitz constant of the finite-horizon value function in the belief.

    Valid only when ``beta < 1 / ((2 - eps) |p11 - p01|)``.
    """
    rate = (2.0 - eps) * abs(P.correlation)
    if beta * rate >= 1.0:
        raise BoundInapplicableError(
            f"beta={beta} must be below {1.0 / rate:.6g} for the Lipschitz bound"
        )
    return (1.0 - eps) / (1.0 - rate * beta)

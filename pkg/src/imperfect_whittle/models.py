"""Arm and experiment descriptions shared by the policy and simulation layers."""
from __future__ import annotations

from dataclasses import dataclass, field

from .belief import TransitionMatrix, stationary_belief


@dataclass(frozen=True)
class ArmModel:
    P: TransitionMatrix
    B: float = 1.0

    def __post_init__(self):
        if not self.B >= 0:
            raise ValueError(f"reward B must be nonnegative, got {self.B!r}")

    @classmethod
    def of(cls, p01: float, p11: float, B: float = 1.0) -> ArmModel:
        return cls(TransitionMatrix(p01, p11), B)


@dataclass(frozen=True)
class BanditConfig:
    """A full experiment: N arms, M activations per slot, observation error and discount."""

    arms: tuple[ArmModel, ...]
    M: int
    eps: float
    beta: float
    horizon: int
    seed: int = 0
    initial_beliefs: tuple[float, ...] | None = None
    delta: float | None = field(default=None, compare=False)  # documented, unused

    def __post_init__(self):
        object.__setattr__(self, "arms", tuple(self.arms))
        N = len(self.arms)
        if not (1 <= self.M < N):
            raise ValueError(f"need 1 <= M < N, got M={self.M}, N={N}")
        if not (0.0 <= self.eps < 1.0):
            raise ValueError(f"eps must lie in [0, 1), got {self.eps!r}")
        if not (0.0 < self.beta < 1.0):
            raise ValueError(f"beta must lie in (0, 1), got {self.beta!r}")
        if self.horizon < 1:
            raise ValueError("horizon must be at least 1")
        if not (0 <= self.seed < 2**64):
            raise ValueError("seed must be an unsigned 64-bit integer")
        if self.initial_beliefs is not None:
            b = tuple(float(x) for x in self.initial_beliefs)
            if len(b) != N or not all(0.0 <= x <= 1.0 for x in b):
                raise ValueError("initial_beliefs must hold one probability per arm")
            object.__setattr__(self, "initial_beliefs", b)

    @property
    def N(self) -> int:
        return len(self.arms)

    def beliefs0(self) -> tuple[float, ...]:
        if self.initial_beliefs is not None:
            return self.initial_beliefs
        return tuple(stationary_belief(a.P) for a in self.arms)

    def to_dict(self) -> dict:
        return {
            "arms": [{"p01": a.P.p01, "p11": a.P.p11, "B": a.B} for a in self.arms],
            "M": self.M,
            "eps": self.eps,
            "beta": self.beta,
            "horizon": self.horizon,
            "seed": self.seed,
            "initial_beliefs": None if self.initial_beliefs is None else list(self.initial_beliefs),
            "delta": self.delta,
        }

    @classmethod
    def from_dict(cls, d: dict) -> BanditConfig:
        arms = tuple(ArmModel.of(a["p01"], a["p11"], a.get("B", 1.0)) for a in d["arms"])
        ib = d.get("initial_beliefs")
        return cls(arms, int(d["M"]), float(d["eps"]), float(d["beta"]), int(d["horizon"]),
                   int(d.get("seed", 0)), None if ib is None else tuple(ib), d.get("delta"))

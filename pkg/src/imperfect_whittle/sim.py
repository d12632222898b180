"""Ground-truth simulation of the multi-arm system and Monte Carlo evaluation.

Random numbers come from numpy's PCG64 bit generator.  Episode ``i`` of a
Monte Carlo run with base seed ``s`` is seeded with ``splitmix64(s ^ i)``.
Within an episode the draws are consumed in a fixed order: N uniforms for the
initial states, then per slot N uniforms for observations and N uniforms for
state transitions (arm order, drawn whether or not an arm is chosen).  The
random policy draws from its own generator seeded with
``splitmix64(seed ^ RANDOM_POLICY_SALT)`` so all policies see the same world.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .belief import update_belief
from .index import DEFAULT_ITERS
from .models import BanditConfig
from .policies import IndexCache, select_myopic, select_whittle

MASK64 = (1 << 64) - 1
RANDOM_POLICY_SALT = 0x5EED0F0A11CE


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def episode_seed(base: int, i: int) -> int:
    return splitmix64((base ^ i) & MASK64)


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


@dataclass(frozen=True)
class Policy:
    """``whittle`` (with iteration count ``n``), ``myopic`` or ``random``."""

    kind: str
    n: int = DEFAULT_ITERS

    def __post_init__(self):
        if self.kind not in ("whittle", "myopic", "random"):
            raise ValueError(f"unknown policy {self.kind!r}")

    @classmethod
    def parse(cls, text: str, n: int = DEFAULT_ITERS) -> Policy:
        """Parse ``whittle``, ``whittle:N``, ``whittle(N)``, ``myopic`` or ``random``.

        A bare ``whittle`` uses iteration count ``n``.
        """
        t = text.strip().lower()
        for sep in (":", "("):
            if t.startswith("whittle" + sep):
                return cls("whittle", int(t[len("whittle") + 1:].rstrip(")")))
        return cls(t, n)

    def __str__(self):
        return f"whittle({self.n})" if self.kind == "whittle" else self.kind


@dataclass(frozen=True)
class SlotRecord:
    t: int
    states: tuple[int, ...]
    chosen: tuple[int, ...]
    acks: tuple[bool, ...]
    reward: float
    beliefs: tuple[float, ...]  # after the update at the end of the slot


class SimulationTrace(list):
    """Per-slot records of one episode."""

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "states", "chosen", "acks", "reward", "beliefs"])
        for r in self:
            w.writerow([
                r.t,
                ";".join(map(str, r.states)),
                ";".join(map(str, r.chosen)),
                ";".join(str(int(a)) for a in r.acks),
                repr(r.reward),
                ";".join(repr(b) for b in r.beliefs),
            ])
        return buf.getvalue()


def run_episode(config: BanditConfig, policy: Policy | str, seed: int | None = None,
                cache: IndexCache | None = None) -> tuple[float, SimulationTrace]:
    """Simulate one episode; returns the discounted total reward and its trace."""
    if isinstance(policy, str):
        policy = Policy.parse(policy)
    seed = config.seed if seed is None else seed
    rng = make_rng(seed)
    prng = make_rng(splitmix64(seed ^ RANDOM_POLICY_SALT)) if policy.kind == "random" else None
    arms, N, M, eps, beta = config.arms, config.N, config.M, config.eps, config.beta
    if cache is None and policy.kind == "whittle":
        cache = IndexCache()

    beliefs = list(config.beliefs0())
    states = [int(u < b) for u, b in zip(rng.random(N), beliefs)]
    trace = SimulationTrace()
    total = 0.0
    disc = 1.0
    for t in range(1, config.horizon + 1):
        if policy.kind == "whittle":
            chosen = select_whittle(beliefs, arms, eps, beta, policy.n, M, cache)
        elif policy.kind == "myopic":
            chosen = select_myopic(beliefs, arms, M)
        else:
            chosen = tuple(sorted(int(i) for i in prng.choice(N, size=M, replace=False)))
        u_obs = rng.random(N)
        u_tr = rng.random(N)

        picked = set(chosen)
        acks = tuple(i in picked and states[i] == 1 and u_obs[i] < 1.0 - eps for i in range(N))
        reward = sum(arms[i].B for i in range(N) if acks[i])
        total += disc * reward
        disc *= beta

        record_states = tuple(states)
        beliefs = [update_belief(beliefs[i], arms[i].P, eps, i in picked, acks[i]) for i in range(N)]
        states = [int(u_tr[i] < (arms[i].P.p11 if states[i] else arms[i].P.p01)) for i in range(N)]
        trace.append(SlotRecord(t, record_states, chosen, acks, float(reward), tuple(beliefs)))
    return total, trace


class MonteCarloResult(NamedTuple):
    mean: float
    stderr: float


def monte_carlo(config: BanditConfig, policy: Policy | str, episodes: int,
                cache: IndexCache | None = None, return_samples: bool = False):
    """Mean discounted reward and its standard error over independent episodes.

    The standard error is NaN for a single episode.
    """
    if episodes < 1:
        raise ValueError("need at least one episode")
    if isinstance(policy, str):
        policy = Policy.parse(policy)
    if cache is None and policy.kind == "whittle":
        cache = IndexCache()
    samples = np.array([
        run_episode(config, policy, episode_seed(config.seed, i), cache)[0] for i in range(episodes)
    ])
    mean = float(samples.mean())
    se = float(samples.std(ddof=1) / math.sqrt(episodes)) if episodes > 1 else math.nan
    res = MonteCarloResult(mean, se)
    return (res, samples) if return_samples else res

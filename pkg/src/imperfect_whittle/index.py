"""Approximated Whittle index for a two-state arm with imperfect observations.

The single-arm problem with subsidy ``m`` is solved under a threshold policy
whose threshold is the queried belief.  Value functions along the no-ACK
belief sequence k_0, k_1, ... satisfy a finite linear system once the sequence
is cut after ``n`` steps.  The right-hand side is affine in ``m``, so each value
is carried as an :class:`AffineValue` and the index is the root of a scalar
linear equation.

With ``n == 0`` every no-ACK successor is approximated by ``p01`` (the
``eps -> 0`` limit of tau(phi(w))); this is the variant with a closed form,
see :func:`closed_form_whittle_index`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import linalg
from .belief import TransitionMatrix, stationary_belief, tau, tau_k, tau_phi
from .crossing import NEVER, first_crossing_time
from .errors import CrossingNeverHappens, SolverDegenerateError

DEFAULT_ITERS = 4
SLOPE_TOL = 1e-12

REPEAT = "repeat"  # V(k_{n+1}) := V(k_n)
ZERO = "zero"      # V(k_{n+1}) := 0
CLOSURES = (REPEAT, ZERO)


@dataclass(frozen=True)
class AffineValue:
    """``intercept + slope * m``: a value function at fixed belief, as a function of subsidy."""

    intercept: float
    slope: float

    def __call__(self, m: float) -> float:
        return self.intercept + self.slope * m

    @classmethod
    def _from_vec(cls, v) -> AffineValue:
        return cls(float(v[0]), float(v[1]))


@dataclass(frozen=True)
class IndexQuery:
    w: float
    P: TransitionMatrix
    eps: float
    beta: float
    B: float = 1.0
    n: int = DEFAULT_ITERS
    closure: str = REPEAT

    def __post_init__(self):
        _check_params(self.eps, self.beta, self.n, self.closure)
        if not (0.0 <= self.w <= 1.0):
            raise ValueError(f"belief must lie in [0, 1], got {self.w!r}")
        if self.B < 0:
            raise ValueError("reward B must be nonnegative")


def _check_params(eps, beta, n, closure=REPEAT):
    if not (0.0 < eps < 1.0):
        raise ValueError(f"the index solver needs eps in (0, 1), got {eps!r}")
    if not (0.0 < beta < 1.0):
        raise ValueError(f"beta must lie in (0, 1), got {beta!r}")
    if n < 0 or int(n) != n:
        raise ValueError(f"iteration count must be a nonnegative integer, got {n!r}")
    if closure not in CLOSURES:
        raise ValueError(f"closure must be one of {CLOSURES}, got {closure!r}")


# ---------------------------------------------------------------------------
# belief sequence


def f_map(w: float, threshold: float, P: TransitionMatrix, eps: float) -> float:
    """Belief after waiting passively until the threshold is crossed, then a no-ACK."""
    L = first_crossing_time(w, threshold, P)
    if L is NEVER:
        raise CrossingNeverHappens(f"belief {w} never exceeds threshold {threshold}")
    return tau_phi(tau_k(w, P, L), P, eps)


def k_sequence(k0: float, threshold: float, P: TransitionMatrix, eps: float, n: int) -> list[float]:
    seq = [k0]
    for i in range(n):
        try:
            seq.append(f_map(seq[-1], threshold, P, eps))
        except CrossingNeverHappens as exc:
            raise CrossingNeverHappens(str(exc), step=i) from None
    return seq


# ---------------------------------------------------------------------------
# linear systems
#
# Both the value system and the passive-time system share one shape.  A node x
# with finite crossing time L and y = tau^L(x) contributes
#     X(x) = base(x) + c11 * X(p11) + cs * X(succ(x)),
#     c11 = beta^(L+1) (1-eps) y,   cs = beta^(L+1) (1 - (1-eps) y),
# with base = [beta^L (1-eps) y, (1-beta^L)/(1-beta)] for values (reward and
# subsidy columns) and base = [(1-beta^L)/(1-beta)] for passive times.
# A node that never crosses is passive forever: base = [0, 1/(1-beta)] or
# [1/(1-beta)], with no dependence on other nodes.


@dataclass(frozen=True)
class _Node:
    belief: float
    L: object
    y: float = math.nan


def _node(x, threshold, P):
    L = first_crossing_time(x, threshold, P)
    if L is NEVER:
        return _Node(x, NEVER)
    return _Node(x, L, tau_k(x, P, L))


def _base(node, eps, beta, passive_only):
    if node.L is NEVER:
        sub = 1.0 / (1.0 - beta)
        return np.array([sub]) if passive_only else np.array([0.0, sub])
    g = beta**node.L
    sub = (1.0 - g) / (1.0 - beta)
    return np.array([sub]) if passive_only else np.array([g * (1.0 - eps) * node.y, sub])


def _coeffs(node, eps, beta):
    g1 = beta ** (node.L + 1)
    ack = (1.0 - eps) * node.y
    return g1 * ack, g1 * (1.0 - ack)


def _solve_nodes(nodes, successors, p11, eps, beta, passive_only):
    """Solve the chain system.

    ``successors[i]`` is an unknown index, a known value vector, or None (the
    zero closure).  ``p11`` is likewise an unknown index or a known vector.
    Returns one row per node.
    """
    r = len(nodes)
    ncol = 1 if passive_only else 2
    A = np.eye(r)
    b = np.zeros((r, ncol))
    for i, node in enumerate(nodes):
        b[i] = _base(node, eps, beta, passive_only)
        if node.L is NEVER:
            continue
        c11, cs = _coeffs(node, eps, beta)
        for ref, c in ((p11, c11), (successors[i], cs)):
            if ref is None:
                continue
            if isinstance(ref, (int, np.integer)):
                A[i, ref] -= c
            else:
                b[i] += c * np.asarray(ref)
    return linalg.solve(A, b)


def _sequence_nodes(k0, threshold, P, eps, n, closure):
    """Nodes k0, k1, ..., kn of the no-ACK sequence and each node's successor.

    The sequence stops early at a node that never crosses the threshold.
    """
    nodes = [_node(k0, threshold, P)]
    successors = []
    while True:
        i = len(nodes) - 1
        node = nodes[i]
        if node.L is NEVER:
            successors.append(None)
            break
        if i == n:
            successors.append(i if closure == REPEAT else None)
            break
        successors.append(i + 1)
        nodes.append(_node(tau_phi(node.y, P, eps), threshold, P))
    return nodes, successors


@dataclass(frozen=True)
class _Chain:
    threshold: float
    P: TransitionMatrix
    eps: float
    beta: float
    n: int
    closure: str
    passive_only: bool
    beliefs: tuple
    rows: np.ndarray = field(repr=False)

    @property
    def p11_vec(self):
        return self.rows[0]

    @property
    def p01_vec(self):
        # only meaningful at n == 0, where node 1 is p01
        return self.rows[1]

    def at(self, x: float) -> np.ndarray:
        """X(x) by re-expanding the no-ACK sequence from ``x`` to depth n."""
        if self.n == 0:
            nodes, succ = [_node(x, self.threshold, self.P)], [self.p01_vec]
        else:
            nodes, succ = _sequence_nodes(x, self.threshold, self.P, self.eps, self.n,
                                          self.closure)
        rows = _solve_nodes(nodes, succ, self.p11_vec, self.eps, self.beta, self.passive_only)
        return rows[0]

    def successor(self, y: float) -> np.ndarray:
        """X at the no-ACK successor of an activation at belief ``y``."""
        if self.n == 0:
            return self.p01_vec
        return self.at(tau_phi(y, self.P, self.eps))

    def active(self, y: float) -> np.ndarray:
        ack = (1.0 - self.eps) * y
        out = self.beta * (ack * self.p11_vec + (1.0 - ack) * self.successor(y))
        if not self.passive_only:
            out = out + np.array([ack, 0.0])
        return out

    def passive(self, w: float) -> np.ndarray:
        one = np.array([1.0]) if self.passive_only else np.array([0.0, 1.0])
        return one + self.beta * self.at(tau(w, self.P))


def _build_chain(threshold, P, eps, beta, n, closure, passive_only):
    _check_params(eps, beta, n, closure)
    if n == 0:
        nodes, succ = [_node(P.p11, threshold, P), _node(P.p01, threshold, P)], [1, 1]
    else:
        nodes, succ = _sequence_nodes(P.p11, threshold, P, eps, n, closure)
    rows = _solve_nodes(nodes, succ, 0, eps, beta, passive_only)
    return _Chain(threshold, P, eps, beta, n, closure, passive_only,
                  tuple(nd.belief for nd in nodes), rows)


class ValueChain:
    """Solved value system for one threshold; values are affine in the subsidy.

    ``values`` maps each solved belief (p11, k1, ..., kn; p11 and p01 at
    n == 0) to its :class:`AffineValue`.
    """

    def __init__(self, threshold: float, P: TransitionMatrix, eps: float, beta: float,
                 n: int = DEFAULT_ITERS, closure: str = REPEAT):
        self._c = _build_chain(threshold, P, eps, beta, n, closure, passive_only=False)

    threshold = property(lambda self: self._c.threshold)
    n = property(lambda self: self._c.n)

    @property
    def beliefs(self) -> tuple[float, ...]:
        return self._c.beliefs

    @property
    def values(self) -> list[AffineValue]:
        return [AffineValue._from_vec(r) for r in self._c.rows]

    @property
    def p11(self) -> AffineValue:
        return AffineValue._from_vec(self._c.p11_vec)

    def value_at(self, w: float) -> AffineValue:
        return AffineValue._from_vec(self._c.at(w))

    def value_active(self, w: float) -> AffineValue:
        return AffineValue._from_vec(self._c.active(w))

    def value_passive(self, w: float) -> AffineValue:
        return AffineValue._from_vec(self._c.passive(w))


class PassiveTimeChain:
    """Solved discounted passive-time system under a fixed threshold policy."""

    def __init__(self, threshold: float, P: TransitionMatrix, eps: float, beta: float,
                 n: int = DEFAULT_ITERS, closure: str = REPEAT):
        self._c = _build_chain(threshold, P, eps, beta, n, closure, passive_only=True)

    @property
    def beliefs(self) -> tuple[float, ...]:
        return self._c.beliefs

    @property
    def values(self) -> list[float]:
        return [float(r[0]) for r in self._c.rows]

    @property
    def p11(self) -> float:
        return float(self._c.p11_vec[0])

    def at(self, w: float) -> float:
        return float(self._c.at(w)[0])

    def active(self, w: float) -> float:
        """Passive time after activating at belief ``w``."""
        return float(self._c.active(w)[0])

    def passive(self, w: float) -> float:
        """Passive time after staying passive at belief ``w``."""
        return float(self._c.passive(w)[0])


def solve_value_chain(threshold, P, eps, beta, n=DEFAULT_ITERS, closure=REPEAT) -> dict[float, AffineValue]:
    chain = ValueChain(threshold, P, eps, beta, n, closure)
    return dict(zip(chain.beliefs, chain.values))


def value_at(w, threshold, P, eps, beta, n=DEFAULT_ITERS, closure=REPEAT) -> AffineValue:
    return ValueChain(threshold, P, eps, beta, n, closure).value_at(w)


def passive_time_chain(threshold, P, eps, beta, n=DEFAULT_ITERS, closure=REPEAT) -> dict[float, float]:
    chain = PassiveTimeChain(threshold, P, eps, beta, n, closure)
    return dict(zip(chain.beliefs, chain.values))


def passive_time_at(w, threshold, P, eps, beta, n=DEFAULT_ITERS, closure=REPEAT) -> float:
    return PassiveTimeChain(threshold, P, eps, beta, n, closure).at(w)


# ---------------------------------------------------------------------------
# index


def index_equation(w, P, eps, beta, n=DEFAULT_ITERS, closure=REPEAT) -> tuple[AffineValue, AffineValue]:
    """Active and passive values at belief ``w`` with the threshold set to ``w`` (B = 1)."""
    chain = ValueChain(w, P, eps, beta, n, closure)
    return chain.value_active(w), chain.value_passive(w)


def _unit_index(w, P, eps, beta, n, closure) -> float:
    try:
        va, vp = index_equation(w, P, eps, beta, n, closure)
    except SolverDegenerateError:
        return w
    ds = vp.slope - va.slope
    if abs(ds) < SLOPE_TOL:
        return w
    return (va.intercept - vp.intercept) / ds


def whittle_index(q: IndexQuery) -> float:
    """Subsidy at which activating and resting are equally good at belief q.w.

    Falls back to ``w * B`` when the two values have the same slope in ``m``
    or the chain system is singular.
    """
    return q.B * _unit_index(q.w, q.P, q.eps, q.beta, q.n, q.closure)


def index(w, P, eps, beta, B=1.0, n=DEFAULT_ITERS, closure=REPEAT) -> float:
    return whittle_index(IndexQuery(w, P, eps, beta, B, n, closure))


def index_curve(grid: Iterable[float], P, eps, beta, B=1.0, n=DEFAULT_ITERS, closure=REPEAT) -> np.ndarray:
    return np.array([index(w, P, eps, beta, B, n, closure) for w in grid])


def closed_form_whittle_index(w: float, P: TransitionMatrix, eps: float, beta: float) -> float:
    """Closed-form index of the n = 0 approximation (B = 1)."""
    _check_params(eps, beta, 0)
    p01, p11 = P.p01, P.p11
    w_o = stationary_belief(P)
    a = 1.0 - eps
    low = w * a * (1 - beta * p11 + beta * p01) / (1 - beta * a * p11 + beta * a * p01)

    if p11 > p01:
        if w <= p01:
            return low
        if w < w_o:
            K = 1 - beta * a * p11
            L = first_crossing_time(p01, w, P)
            y = tau_k(p01, P, L)
            den = K * (1 - beta ** (L + 1)) + a * (1 - beta) * beta ** (L + 1) * y
            C1 = K * (1 - beta**L) / den
            C2 = a * beta**L * y / den
            z = w - beta * tau(w, P)
            return (a * z + C2 * (1 - beta) * beta * (K - a * z)) / (K - C1 * beta * (K - a * z))
        if w < p11:
            return a * w / (1 - beta * a * p11 + beta * a * w)
        return a * w

    t11 = tau(p11, P)
    if w <= p11:
        return low
    if w >= p01:
        return a * w
    den = 1 + beta * (1 + beta) * a * p01 - beta**2 * a * t11
    C3 = (1 - beta * (1 - a * p01)) / den
    C4 = (beta * a * t11 * (1 - beta) + beta**2 * a * p01) / den
    if w < w_o:
        return (a * (1 - beta + C4 * beta) * (beta * p01 + w - beta * tau(w, P))
                / (1 - beta * (1 - a * p01) + a * C3 * beta * (beta * tau(w, P) - beta * p01 - w)))
    if w < t11:
        return (a * (1 - beta + beta * C4) * (beta * p01 + w * (1 - beta))
                / (1 - beta * (1 - a * p01) - a * beta * C3 * (beta * p01 + w - beta * w)))
    return a * (beta * p01 + (1 - beta) * w) / (1 + a * beta * (p01 - w))


# ---------------------------------------------------------------------------
# structural conditions


def indexability_margin(threshold, P, eps, beta, n=DEFAULT_ITERS, closure=REPEAT) -> float:
    """RHS minus LHS of the passive-time ordering at the threshold; positive means it holds."""
    chain = PassiveTimeChain(threshold, P, eps, beta, n, closure)
    return chain.passive(threshold) - chain.active(threshold)


def check_indexability(threshold, P, eps, beta, n=DEFAULT_ITERS, closure=REPEAT) -> bool:
    return indexability_margin(threshold, P, eps, beta, n, closure) > 0.0


def threshold_structure_beta_bound(P: TransitionMatrix, eps: float) -> float:
    """Largest discount for which the optimal single-arm policy is provably a threshold policy."""
    d = P.correlation
    if d > 0:
        return 1.0 / ((3.0 - eps) * d)
    return 1.0 / ((5.0 - 2.0 * eps) * -d)


def threshold_beta_bound(P: TransitionMatrix, eps: float) -> float:
    """Discount bound under which both the threshold structure and indexability are proven."""
    return min(threshold_structure_beta_bound(P, eps), 0.5)


def monitor_index_monotonicity(history: Sequence[tuple[float, float]], tol: float = 0.0) -> bool:
    """True iff the index never decreases across visited beliefs (sorted by belief)."""
    pairs = sorted(history)
    return all(w2 >= w1 - tol for (_, w1), (_, w2) in zip(pairs, pairs[1:]))

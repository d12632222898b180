import math

import numpy as np
import pytest

import imperfect_whittle.index as ix
from imperfect_whittle import presets
from imperfect_whittle.belief import TransitionMatrix, phi, stationary_belief, tau, tau_k, tau_phi
from imperfect_whittle.crossing import first_crossing_time
from imperfect_whittle.errors import CrossingNeverHappens
from imperfect_whittle.index import (
    ZERO,
    AffineValue,
    IndexQuery,
    PassiveTimeChain,
    ValueChain,
    check_indexability,
    closed_form_whittle_index,
    f_map,
    index,
    index_curve,
    indexability_margin,
    k_sequence,
    monitor_index_monotonicity,
    passive_time_at,
    solve_value_chain,
    threshold_beta_bound,
    threshold_structure_beta_bound,
    whittle_index,
)

from conftest import random_matrix

P36 = TransitionMatrix(0.3, 0.6)
FIG1 = TransitionMatrix(0.9, 0.2)


def all_arms():
    for sid in ("1", "2", "3", "4"):
        yield from presets.system_arms(sid)


def plain_chain_values(threshold, P, eps, beta, n, m):
    """Independent oracle: the n-iteration equation set at a fixed subsidy, solved by numpy."""
    ks = [P.p11]
    Ls, ys = [], []
    for _ in range(n + 1):
        L = 0
        x = ks[-1]
        while x <= threshold:
            x = x * P.p11 + (1 - x) * P.p01
            L += 1
            assert L < 10_000
        Ls.append(L)
        ys.append(x)
        e = eps * x / (eps * x + 1 - x)
        ks.append(e * P.p11 + (1 - e) * P.p01)
    r = n + 1
    A = np.eye(r)
    b = np.zeros(r)
    for i in range(r):
        L, y = Ls[i], ys[i]
        b[i] = (1 - beta**L) / (1 - beta) * m + beta**L * (1 - eps) * y
        A[i, 0] -= beta ** (L + 1) * (1 - eps) * y
        A[i, min(i + 1, n)] -= beta ** (L + 1) * (1 - (1 - eps) * y)
    return ks[:r], np.linalg.solve(A, b)


def closed_form_v_p11(threshold, P, eps, beta, m):
    """Closed form of V(p11) for p11 > p01 under the n = 0 approximation."""
    a = 1 - eps
    p01, p11 = P.p01, P.p11
    K = 1 - beta * a * p11
    wo = stationary_belief(P)
    if threshold < p01:
        v01 = a * p01 / ((1 - beta) * (1 - beta * a * p11 + beta * a * p01))
    elif threshold < wo:
        L = first_crossing_time(p01, threshold, P)
        y = tau_k(p01, P, L)
        num = K * (1 - beta**L) * m + a * (1 - beta) * beta**L * y
        den = K * (1 - beta) * (1 - beta ** (L + 1)) + a * (1 - beta) ** 2 * beta ** (L + 1) * y
        v01 = num / den
    else:
        v01 = m / (1 - beta)
    if threshold < p11:
        return (a * p11 + beta * (1 - a * p11) * v01) / K
    return m / (1 - beta)


def forced_active_value(w, P, eps, beta, T, memo=None):
    """Always-activate value over T slots, by direct recursion."""
    memo = {} if memo is None else memo
    if T == 0:
        return 0.0
    key = (w, T)
    if key not in memo:
        ack = (1 - eps) * w
        memo[key] = ack + beta * (ack * forced_active_value(P.p11, P, eps, beta, T - 1, memo)
                                  + (1 - ack) * forced_active_value(tau_phi(w, P, eps), P, eps, beta, T - 1, memo))
    return memo[key]


class TestSequence:
    def test_f_map_examples(self):
        assert f_map(0.5, 0.4, P36, 0.1) == pytest.approx(tau(phi(0.5, 0.1), P36))
        assert f_map(0.5, 0.4, P36, 0.1) == pytest.approx(0.327273, abs=1e-6)
        # L = 2, tau^2(0.1) = 0.124, phi = 0.0124 / 0.8884, then one passive step
        expected = 0.1 + 0.2 * (0.0124 / 0.8884)
        assert f_map(0.1, 0.12, TransitionMatrix(0.1, 0.3), 0.1) == pytest.approx(expected, abs=1e-12)
        assert expected == pytest.approx(0.1027915, abs=1e-7)

    def test_f_map_never(self):
        with pytest.raises(CrossingNeverHappens):
            f_map(0.1, 0.5, TransitionMatrix(0.1, 0.3), 0.1)

    def test_k_sequence_basic(self):
        assert k_sequence(0.4, 0.3, P36, 0.1, 0) == [0.4]
        seq = k_sequence(0.9, -1.0, P36, 0.1, 5)
        x = 0.9
        for k in seq[1:]:
            x = tau_phi(x, P36, 0.1)
            assert k == pytest.approx(x, abs=1e-15)

    def test_k_sequence_reports_step(self):
        with pytest.raises(CrossingNeverHappens) as info:
            k_sequence(0.6, 0.5, P36, 0.1, 4)  # k1 = 0.339 < stationary belief < 0.5
        assert info.value.step == 1

    def test_sequence_converges(self):
        # damped oscillation around a limit belief
        seq = k_sequence(FIG1.p11, 0.3, FIG1, 0.1, 16)
        steps = np.abs(np.diff(seq[1:]))
        assert np.all(steps[1:] < steps[:-1])
        assert abs(seq[4] - seq[8]) < 5e-3
        assert abs(seq[8] - seq[16]) < abs(seq[4] - seq[8])


class TestValueChain:
    def test_always_passive(self):
        for v in solve_value_chain(1.0, P36, 0.1, 0.9, 4).values():
            assert v.intercept == 0.0
            assert v.slope == pytest.approx(10.0)

    @pytest.mark.parametrize("P", [P36, FIG1, TransitionMatrix(0.2, 0.9)])
    def test_always_active_matches_direct_recursion(self, P):
        # deep enough that the repeat closure is discounted below the horizon gap
        eps, beta, T = 0.1, 0.5, 30
        chain = ValueChain(-0.01, P, eps, beta, 40)
        for m in (0.0, 0.4):
            bound = beta**T * max(1.0, abs(m)) / (1 - beta)
            for w in (0.0, 0.25, 0.7, 1.0):
                got = chain.value_at(w)(m)
                assert abs(got - forced_active_value(w, P, eps, beta, T)) <= bound

    def test_n0_matches_closed_form_value(self):
        P, eps, beta, m = P36, 0.1, 0.9, 0.2
        for thr in (0.1, 0.299, 0.35, 0.41, 0.5, 0.65):
            v = solve_value_chain(thr, P, eps, beta, 0)[P.p11]
            assert v(m) == pytest.approx(closed_form_v_p11(thr, P, eps, beta, m), abs=1e-9)

    def test_affine_matches_fixed_subsidy_solve(self, rng):
        for _ in range(20):
            P = random_matrix(rng)
            eps = float(rng.uniform(0.05, 0.9))
            beta = float(rng.uniform(0.1, 0.95))
            thr = float(rng.uniform(0.0, min(P.p01, P.p11)))  # every node crosses
            n = int(rng.integers(1, 6))
            m = float(rng.uniform(-1, 1))
            ks, vals = plain_chain_values(thr, P, eps, beta, n, m)
            chain = ValueChain(thr, P, eps, beta, n)
            got = [v(m) for v in chain.values]
            np.testing.assert_allclose(got, vals, atol=1e-9)
            np.testing.assert_allclose(chain.beliefs, ks, atol=1e-15)

    def test_active_passive_structure(self):
        c = ValueChain(0.45, P36, 0.1, 0.9)
        assert c.value_active(0.0)(0.3) == pytest.approx(0.9 * c.value_at(P36.p01)(0.3), abs=1e-12)
        vp = c.value_passive(0.3)
        assert vp.slope == pytest.approx(1 + 0.9 * c.value_at(tau(0.3, P36)).slope, abs=1e-12)

    def test_full_ack_limit(self):
        c = ValueChain(0.45, P36, 1e-9, 0.9)
        assert c.value_active(1.0)(0.2) == pytest.approx(1 + 0.9 * c.p11(0.2), abs=1e-7)

    def test_value_at_cases(self):
        c = ValueChain(0.3, P36, 0.1, 0.9)
        assert c.value_at(0.1) != c.value_active(0.1)
        never = ValueChain(0.5, P36, 0.1, 0.9).value_at(0.2)
        assert never == AffineValue(0.0, pytest.approx(10.0))

    def test_threshold_consistency(self):
        for w in (0.2, 0.35, 0.5, 0.7):
            m = index(w, P36, 0.1, 0.9)
            c = ValueChain(w, P36, 0.1, 0.9)
            assert c.value_at(w + 1e-9)(m) == pytest.approx(c.value_passive(w)(m), abs=1e-6)

    def test_zero_closure_differs(self):
        a = solve_value_chain(0.3, P36, 0.1, 0.9, 2)
        b = solve_value_chain(0.3, P36, 0.1, 0.9, 2, closure=ZERO)
        assert list(a) == list(b)
        assert a[P36.p11](0.0) > b[P36.p11](0.0)


class TestIndex:
    def test_zero_belief(self):
        for P in (P36, FIG1):
            assert index(0.0, P, 0.1, 0.9) == pytest.approx(0.0, abs=1e-12)

    def test_above_p11(self):
        assert index(0.8, P36, 0.1, 0.29, n=0) == pytest.approx(0.72, abs=1e-12)

    def test_closed_form_example(self):
        assert closed_form_whittle_index(0.2, P36, 0.1, 0.29) == pytest.approx(0.178303, abs=1e-5)

    def test_closed_form_top_branch(self, rng):
        for _ in range(50):
            P = random_matrix(rng)
            eps = float(rng.uniform(0.01, 0.99))
            w = float(rng.uniform(max(P.p01, P.p11), 1.0))
            assert closed_form_whittle_index(w, P, eps, 0.7) == pytest.approx((1 - eps) * w)

    @pytest.mark.parametrize("sign", [1, -1])
    def test_closed_form_matches_solver(self, rng, sign):
        for _ in range(200):
            P = random_matrix(rng, sign, min_gap=0.02)
            eps = float(rng.uniform(0.01, 0.99))
            beta = float(rng.uniform(0.01, 0.99))
            w = float(rng.uniform())
            assert index(w, P, eps, beta, n=0) == pytest.approx(
                closed_form_whittle_index(w, P, eps, beta), abs=1e-8)

    def test_figure_two_monotone(self):
        W = index_curve(np.linspace(0, 1, 101), P36, 0.1, 0.9)
        assert np.all(np.diff(W) >= -1e-9)
        assert np.max(np.abs(W - np.linspace(0, 1, 101))) > 0.05

    def test_scaling_is_exact(self, rng):
        for _ in range(20):
            P = random_matrix(rng)
            w, B = float(rng.uniform()), float(rng.uniform(0.1, 5))
            assert index(w, P, 0.2, 0.6, B=B) == B * index(w, P, 0.2, 0.6)

    def test_bounds(self):
        for arm in all_arms():
            for beta in (0.29, 0.48, 0.9):
                W = index_curve(np.linspace(0, 1, 21), arm.P, 0.1, beta)
                assert np.all(W >= -1e-12) and np.all(W <= 0.9 + 1e-12)

    def test_fallback_on_equal_slopes(self, monkeypatch):
        monkeypatch.setattr(ix, "index_equation",
                            lambda *a, **k: (AffineValue(0.3, 2.0), AffineValue(0.1, 2.0 + 1e-13)))
        assert whittle_index(IndexQuery(0.37, P36, 0.1, 0.9, B=2.0)) == 0.37 * 2.0

    def test_query_validation(self):
        for bad in (dict(beta=1.0), dict(eps=0.0), dict(n=-1), dict(w=1.5), dict(B=-1.0)):
            args = dict(w=0.5, P=P36, eps=0.1, beta=0.5) | bad
            with pytest.raises(ValueError):
                IndexQuery(**args)

    def test_monotone_below_bound_all_systems(self):
        grid = np.linspace(0, 1, 1001)
        for arm in all_arms():
            beta = threshold_beta_bound(arm.P, 0.1)
            W = index_curve(grid, arm.P, 0.1, beta)
            assert np.all(np.diff(W) >= -1e-9), arm


class TestPassiveTime:
    def test_limits(self):
        assert passive_time_at(0.4, 1.0, P36, 0.1, 0.9) == pytest.approx(10.0)
        assert passive_time_at(0.4, -0.1, P36, 0.1, 0.9) == 0.0

    def test_is_value_slope(self, rng):
        for _ in range(20):
            P = random_matrix(rng)
            thr, w = (float(x) for x in rng.uniform(size=2))
            v = ValueChain(thr, P, 0.2, 0.7).value_at(w)
            assert passive_time_at(w, thr, P, 0.2, 0.7) == pytest.approx(v.slope, abs=1e-12)

    def test_range(self, rng):
        for _ in range(50):
            P = random_matrix(rng)
            thr, w = (float(x) for x in rng.uniform(size=2))
            d = passive_time_at(w, thr, P, 0.3, 0.8)
            assert -1e-12 <= d <= 1 / 0.2 + 1e-12

    @pytest.mark.parametrize("P,thr,w", [
        (P36, 0.45, 0.5),
        (P36, 0.41, 0.2),
        (FIG1, 0.5, 0.3),
    ])
    def test_monte_carlo(self, P, thr, w):
        eps, beta, H, episodes = 0.1, 0.48, 200, 100_000
        g = np.random.default_rng(7)
        b = np.full(episodes, w)
        s = g.random(episodes) < b
        total = np.zeros(episodes)
        disc = 1.0
        for _ in range(H):
            act = b > thr
            total += disc * ~act
            ack = act & s & (g.random(episodes) < 1 - eps)
            post = np.where(act, eps * b / (eps * b + 1 - b), b)
            b = np.where(ack, P.p11, post * P.p11 + (1 - post) * P.p01)
            s = g.random(episodes) < np.where(s, P.p11, P.p01)
            disc *= beta
        se = total.std(ddof=1) / math.sqrt(episodes)
        assert abs(passive_time_at(w, thr, P, eps, beta) - total.mean()) <= 2 * se


class TestIndexability:
    @pytest.mark.parametrize("beta", [0.3, 0.5])
    def test_holds_up_to_half(self, beta, rng):
        for _ in range(30):
            P = random_matrix(rng)
            eps, thr = (float(x) for x in rng.uniform(0.01, 0.99, size=2))
            assert check_indexability(thr, P, eps, beta)

    def test_figure_one_margin(self):
        margins = [indexability_margin(t, FIG1, 0.1, 0.9) for t in np.linspace(0, 1, 51)]
        assert all(np.isfinite(margins))

    def test_beta_bounds(self):
        assert threshold_beta_bound(P36, 0.3) == 0.5
        assert threshold_beta_bound(FIG1, 0.1) == pytest.approx(1 / (4.8 * 0.7), abs=1e-12)
        assert threshold_beta_bound(FIG1, 0.1) == pytest.approx(0.297619, abs=1e-6)
        assert threshold_beta_bound(TransitionMatrix(0.5, 0.51), 0.1) == 0.5
        assert threshold_structure_beta_bound(P36, 0.3) == pytest.approx(1 / 0.81)

    def test_monitor(self):
        assert monitor_index_monotonicity([(0.3, 0.1)])
        assert monitor_index_monotonicity([(0.1, 0.0), (0.5, 0.2), (0.3, 0.1)])
        assert not monitor_index_monotonicity([(0.1, 0.2), (0.2, 0.19)])
        grid = np.linspace(0, 1, 201)
        assert monitor_index_monotonicity(list(zip(grid, index_curve(grid, FIG1, 0.1, 0.9))))

import math

import numpy as np
import pytest

from drsplit.planner import (
    Case,
    PlannerInput,
    brute_force_delta,
    classify,
    feasible_delta,
    naive_stepsize,
    optimal_delta,
    smooth_stepsize,
    _delta_of_t,
    _g,
)
from drsplit.stacks import Weights


def make_input(sigmas, weights=None, mu=1.0):
    sigmas = tuple(sigmas)
    if weights is None:
        weights = Weights.equal(len(sigmas) - 1)
    return PlannerInput(sigmas=sigmas, weights=weights, mu=mu)


def random_nonmonotone(rng, max_m=5):
    while True:
        m = int(rng.integers(2, max_m + 1))
        sig = tuple(np.round(rng.uniform(-1.0, 2.0, m), 3))
        if any(s < 0 for s in sig) and sig[-1] != 0.0 and sum(sig) > 0.05:
            raw = rng.uniform(0.1, 1.0, m - 1)
            return make_input(sig, Weights.of(tuple(raw / raw.sum())),
                              mu=float(rng.uniform(0.3, 1.7)))


class TestClassify:
    def test_all_zero_is_monotone(self):
        case, _ = classify(make_input((0.0, 0.0, 0.0)))
        assert case is Case.MONOTONE_B

    def test_experiment_profile_is_nonmonotone(self):
        case, _ = classify(make_input((0.0, 1.0, -0.1, -0.1)))
        assert case is Case.NONMONOTONE_A

    def test_negative_sum_unsupported(self):
        case, reason = classify(make_input((-1.0, 0.5)))
        assert case is Case.UNSUPPORTED
        assert "sum" in reason

    def test_zero_last_modulus_unsupported(self):
        case, reason = classify(make_input((-0.1, 1.0, 0.0)))
        assert case is Case.UNSUPPORTED
        assert "reorder" in reason


class TestFeasibleDelta:
    def test_singleton_forced(self):
        delta = feasible_delta((-1.0, 2.0), (0,))
        assert delta == {0: pytest.approx(1.0)}

    def test_three_block_closed_form(self):
        # sigma = (-1, 3, 2): delta = (1.5, -0.5)
        delta = feasible_delta((-1.0, 3.0, 2.0), (0, 1))
        assert delta[0] == pytest.approx(1.5)
        assert delta[1] == pytest.approx(-0.5)
        assert -1.0 + 2.0 * delta[0] > 0
        assert 3.0 + 2.0 * delta[1] > 0

    def test_random_profiles_satisfy_constraints(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            inp = random_nonmonotone(rng)
            delta = feasible_delta(inp.sigmas, inp.index_set)
            assert sum(delta.values()) == pytest.approx(1.0, abs=1e-10)
            for i in inp.index_set:
                assert inp.sigmas[i] + inp.sigma_m * delta[i] > 0


class TestOptimalDelta:
    def test_two_operator_closed_form(self):
        res = optimal_delta(make_input((-1.0, 2.0), Weights.of((1.0,))))
        assert res.case is Case.NONMONOTONE_A
        assert res.lambda_bar_star == pytest.approx(0.25, abs=1e-12)
        assert res.delta_star == {0: pytest.approx(1.0)}

    def test_experiment_profile_frozen_values(self):
        # frozen from the bisection root, cross-validated by the grid oracle
        res = optimal_delta(make_input((0.0, 1.0, -0.1, -0.1)))
        assert res.lambda_bar_star == pytest.approx(0.5145479649, abs=1e-6)
        assert res.t_star == pytest.approx(1.0290959298, abs=1e-6)
        assert res.delta_star[1] == pytest.approx(2.4466, abs=1e-3)
        assert res.delta_star[2] == pytest.approx(-1.4466, abs=1e-3)

    def test_monotone_profile_unbounded(self):
        res = optimal_delta(make_input((0.0, 0.5, 0.0)))
        assert res.case is Case.MONOTONE_B
        assert math.isinf(res.lambda_bar_star)
        assert res.delta_star is None

    def test_unsupported_reported(self):
        res = optimal_delta(make_input((-1.0, 0.5)))
        assert res.case is Case.UNSUPPORTED

    def test_interior_and_equalization_conditions(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            inp = random_nonmonotone(rng)
            res = optimal_delta(inp)
            assert sum(res.delta_star.values()) == pytest.approx(1.0, abs=1e-10)
            values = []
            for i in inp.index_set:
                d = res.delta_star[i]
                assert inp.sigmas[i] + inp.sigma_m * d > 0
                values.append(-inp.weights[i]
                              * (inp.sigmas[i] + inp.sigma_m * d)
                              / (inp.sigmas[i] * inp.sigma_m * d))
            for v in values:
                assert v == pytest.approx(values[0], rel=1e-9)
                assert v > 0

    def test_certificate_slacks_positive_below_max(self):
        rng = np.random.default_rng(2)
        for _ in range(50):
            inp = random_nonmonotone(rng)
            res = optimal_delta(inp)
            assert all(s > 0 for s in res.certificate.values())
            # slightly above the maximal step at least one slack goes <= 0
            lam_over = 1.01 * res.lambda_bar_star
            slacks_over = [
                1.0 + (lam_over / inp.weights[i])
                * (inp.sigmas[i] * inp.sigma_m * res.delta_star[i])
                / (inp.sigmas[i] + inp.sigma_m * res.delta_star[i])
                - inp.mu / 2.0
                for i in inp.index_set
            ]
            assert min(slacks_over) <= 0

    def test_g_strictly_monotone_with_sign_of_sigma_m(self):
        rng = np.random.default_rng(3)
        checked = 0
        while checked < 50:
            inp = random_nonmonotone(rng)
            if len(inp.index_set) < 2:
                continue
            checked += 1
            res = optimal_delta(inp)
            t_star = res.t_star
            direction = np.sign(inp.sigma_m)
            ts = np.linspace(0.2 * t_star, 0.95 * t_star, 7)
            gs = [_g(inp, t) for t in ts]
            diffs = np.diff(gs)
            assert np.all(direction * diffs > 0)

    def test_delta_inversion_consistency(self):
        inp = make_input((0.0, 1.0, -0.1, -0.1))
        res = optimal_delta(inp)
        delta = _delta_of_t(inp, res.t_star)
        for i, v in res.delta_star.items():
            assert delta[i] == pytest.approx(v, rel=1e-12)


class TestBruteForce:
    def test_two_operator_matches(self):
        inp = make_input((-1.0, 2.0), Weights.of((1.0,)))
        delta, lam = brute_force_delta(inp)
        assert lam == pytest.approx(0.25, abs=1e-10)
        assert delta == {0: pytest.approx(1.0)}

    def test_experiment_profile_single_pass_grid(self):
        inp = make_input((0.0, 1.0, -0.1, -0.1))
        _, lam = brute_force_delta(inp, grid=10_000, refine_rounds=1)
        res = optimal_delta(inp)
        assert lam == pytest.approx(res.lambda_bar_star, rel=1e-3)

    def test_oracle_agreement_random_instances(self):
        rng = np.random.default_rng(4)
        for _ in range(100):
            inp = random_nonmonotone(rng)
            res = optimal_delta(inp)
            _, lam = brute_force_delta(inp)
            assert lam == pytest.approx(res.lambda_bar_star, rel=1e-3)
            assert lam <= res.lambda_bar_star + 1e-9  # grid never beats the max

    def test_infeasible_sum_reports_empty_grid(self):
        inp = make_input((-1.0, -1.0, 0.5))
        with pytest.raises(ValueError, match="empty feasible grid"):
            brute_force_delta(inp)

    def test_monotone_profile_rejected(self):
        with pytest.raises(ValueError):
            brute_force_delta(make_input((0.5, 0.5)))


class TestNaive:
    def test_two_operator_coincides_with_optimal(self):
        assert naive_stepsize((-1.0, 2.0), 1.0) == pytest.approx(0.25)

    def test_three_operator_inapplicable_but_planner_succeeds(self):
        sig = (-1.0, 3.0, 0.5)
        assert naive_stepsize(sig, 1.0) is None
        res = optimal_delta(make_input(sig))
        assert res.case is Case.NONMONOTONE_A
        assert res.lambda_bar_star > 0

    def test_all_zero_unbounded(self):
        assert math.isinf(naive_stepsize((0.0, 0.0), 1.0))

    def test_dominance_when_applicable(self):
        rng = np.random.default_rng(5)
        seen = 0
        while seen < 50:
            m = int(rng.integers(2, 6))
            sig = tuple(np.round(rng.uniform(-1.0, 2.0, m), 3))
            if not (any(s < 0 for s in sig) and sig[-1] != 0.0
                    and sum(sig) > 0.05):
                continue
            mu = float(rng.uniform(0.3, 1.7))
            naive = naive_stepsize(sig, mu)
            if naive is None or math.isinf(naive):
                continue
            seen += 1
            res = optimal_delta(make_input(sig, mu=mu))
            assert res.lambda_bar_star >= naive - 1e-12


class TestSmooth:
    def test_branch_examples(self):
        w = Weights.of((1.0,))
        # -2*sigma >= (2-mu)*L: cap from the weakly convex branch
        plan = smooth_stepsize([1.0], [-1.0], w, mu=1.0, lam=0.2)
        assert plan.gammas_bar[0] == pytest.approx(0.5)
        # -2*sigma < (2-mu)*L: cap 1/L
        plan = smooth_stepsize([1.0], [-0.1], w, mu=1.0, lam=0.5)
        assert plan.gammas_bar[0] == pytest.approx(1.0)
        # convex smooth block
        plan = smooth_stepsize([2.0], [0.0], w, mu=1.0, lam=0.2)
        assert plan.gammas_bar[0] == pytest.approx(0.5)

    def test_lambda_max_is_min_weighted_cap(self):
        w = Weights.of((0.25, 0.75))
        plan = smooth_stepsize([1.0, 2.0], [-0.1, -1.5], w, mu=1.0)
        # caps: 1/1 = 1 (first branch) and (1-mu/2)/1.5 = 1/3 (second)
        assert plan.lambda_max == pytest.approx(min(0.25 * 1.0, 0.75 / 3.0))

    def test_coefficients_positive_below_cap(self):
        rng = np.random.default_rng(6)
        for _ in range(50):
            n = int(rng.integers(1, 4))
            lips = tuple(rng.uniform(0.5, 3.0, n))
            sigs = tuple(-rng.uniform(0.0, 1.0) * l for l in lips)
            raw = rng.uniform(0.2, 1.0, n)
            w = Weights.of(tuple(raw / raw.sum()))
            mu = float(rng.uniform(0.3, 1.7))
            plan = smooth_stepsize(lips, sigs, w, mu=mu)
            assert all(c > 0 for c in plan.c_coefficients)
            assert all(g < gb + 1e-12
                       for g, gb in zip(plan.gammas, plan.gammas_bar))

    def test_sigma_outside_band_rejected(self):
        with pytest.raises(ValueError):
            smooth_stepsize([1.0], [0.5], Weights.of((1.0,)), mu=1.0)
        with pytest.raises(ValueError):
            smooth_stepsize([1.0], [-1.5], Weights.of((1.0,)), mu=1.0)

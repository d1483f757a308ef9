import numpy as np
import pytest

import ewm
from ewm.errors import BadParamsError, TooLargeError

from conftest import random_spec


def spec_of(weights, delta):
    return ewm.make_neighborhood(ewm.make_distribution(weights), delta)


def optimal_log_scores(spec):
    return ewm.log_scores(ewm.optimal_evalue(spec))


class TestPathGain:
    def test_single_hop(self):
        spec = spec_of([0.4, 0.3, 0.3], 0.1)
        gain = ewm.path_gain(optimal_log_scores(spec), ewm.PathSpec((0, 2)))
        assert abs(gain - (-3.637586)) < 5e-7  # log(0.025 / 0.95); anchor cancels

    def test_two_hop_doubles(self):
        spec = spec_of([0.4, 0.3, 0.3], 0.1)
        m = optimal_log_scores(spec)
        one = ewm.path_gain(m, ewm.PathSpec((0, 2)))
        two = ewm.path_gain(m, ewm.PathSpec((0, 1, 2)))
        assert abs(two - 2.0 * one) < 1e-12

    def test_equal_entries_gain_zero(self):
        m = ewm.make_score_matrix([[0.3, 0.7], [0.1, 0.7]])
        assert ewm.path_gain(m, ewm.PathSpec((0, 1))) == 0.0


class TestBestPathInnerValue:
    def test_three_symbols_single_hop_optimal(self):
        spec = spec_of([0.4, 0.3, 0.3], 0.1)
        value, path = ewm.best_path_inner_value(
            optimal_log_scores(spec), spec, ewm.ExtremePair(0, 2)
        )
        assert abs(value - 0.855727) < 5e-7
        assert abs(value - ewm.jstar(spec)) < 1e-12
        assert path.vertices == (0, 2)

    def test_two_symbols(self):
        spec = spec_of([0.5, 0.5], 0.1)
        value, path = ewm.best_path_inner_value(
            optimal_log_scores(spec), spec, ewm.ExtremePair(1, 0)
        )
        assert abs(value - 0.494632) < 5e-7
        assert path.vertices == (1, 0)

    def test_constructed_bonus_forces_detour(self):
        spec = spec_of([0.4, 0.3, 0.3], 0.1)
        m = np.array(optimal_log_scores(spec).entries)
        m[0, 1] += 10.0
        m[1, 2] += 10.0
        value, path = ewm.best_path_inner_value(
            ewm.make_score_matrix(m), spec, ewm.ExtremePair(0, 2)
        )
        assert path.vertices == (0, 1, 2)

    def test_too_large(self):
        w = np.full(11, 1.0 / 11)
        spec = ewm.make_neighborhood(ewm.make_distribution(w), 0.01)
        with pytest.raises(TooLargeError):
            ewm.best_path_inner_value(
                ewm.make_score_matrix(np.zeros((11, 11))), spec, ewm.ExtremePair(0, 1)
            )

    def test_inner_value_uniform_across_pairs(self):
        rng = np.random.default_rng(30)
        for _ in range(10):
            spec = random_spec(rng, n_min=2, n_max=5)
            m = optimal_log_scores(spec)
            j = ewm.jstar(spec)
            for pair in ewm.enumerate_extremes(spec):
                value, path = ewm.best_path_inner_value(m, spec, pair)
                assert abs(value - j) < 1e-12
                assert len(path.vertices) == 2  # single hop always wins under e*

    def test_agrees_with_coupling_log_score(self):
        rng = np.random.default_rng(31)
        for _ in range(10):
            spec = random_spec(rng, n_min=2, n_max=5)
            e = ewm.optimal_evalue(spec)
            log_e = np.log(e.scores)
            m = ewm.ScoreMatrix(log_e)
            for pair in ewm.enumerate_extremes(spec):
                w = ewm.extreme_coupling(spec, pair)
                mask = w.joint > 0.0
                analytic = float(np.sum(w.joint[mask] * log_e[mask]))
                enumerated, _ = ewm.best_path_inner_value(m, spec, pair)
                assert abs(analytic - enumerated) < 1e-12


class TestCycleCondition:
    def test_optimal_scores_satisfy(self):
        rng = np.random.default_rng(32)
        for _ in range(10):
            spec = random_spec(rng, n_min=2, n_max=6)
            assert ewm.cycle_condition_check(optimal_log_scores(spec), spec.n)

    def test_zero_matrix_equalities_pass(self):
        assert ewm.cycle_condition_check(ewm.make_score_matrix(np.zeros((3, 3))), 3)

    def test_two_cycle_violation(self):
        m = ewm.make_score_matrix([[0.0, 1.0], [1.0, 0.0]])
        assert not ewm.cycle_condition_check(m, 2)

    def test_longer_cycle_violation_found(self):
        # only the 3-cycle 0 -> 1 -> 2 -> 0 violates; pairwise sums are fine
        m = np.zeros((3, 3))
        m[0, 1] = m[1, 2] = m[2, 0] = 1.0
        m[0, 2] = m[1, 0] = m[2, 1] = -5.0
        assert ewm.cycle_condition_check(ewm.make_score_matrix(m), 2)
        assert not ewm.cycle_condition_check(ewm.make_score_matrix(m), 3)

    def test_budget_guard(self):
        with pytest.raises(TooLargeError):
            ewm.cycle_condition_check(ewm.make_score_matrix(np.zeros((9, 9))), 9)


class TestTwoTokenMaxmin:
    def test_matches_closed_form(self):
        for p in (0.2, 0.5, 0.75):
            sol = ewm.two_token_maxmin(p, 0.01, 256, 4)
            j = ewm.jstar(spec_of([p, 1.0 - p], 0.01))
            assert abs(sol.value - j) <= 1e-4
            assert abs(sol.r00 - 0.995) < 1e-3
            assert abs(sol.r11 - 0.995) < 1e-3

    def test_convergence_grid(self):
        for p in (0.2, 0.5, 0.75):
            for delta in (0.01, 0.1):
                sol = ewm.two_token_maxmin(p, delta, 128, 3)
                j = ewm.jstar(spec_of([p, 1.0 - p], delta))
                assert abs(sol.value - j) <= 1e-4

    def test_trace_shape(self):
        sol = ewm.two_token_maxmin(0.5, 0.1, 64, 2)
        assert len(sol.trace) == 2
        assert sol.trace[0][0] == 0 and sol.trace[1][0] == 1
        assert sol.trace[1][3] >= sol.trace[0][3]  # refinement never worsens

    def test_bad_params(self):
        with pytest.raises(BadParamsError):
            ewm.two_token_maxmin(0.5, 0.6, 256, 4)  # delta >= min(p, 1-p)
        with pytest.raises(BadParamsError):
            ewm.two_token_maxmin(0.5, 0.01, 32, 4)
        with pytest.raises(BadParamsError):
            ewm.two_token_maxmin(0.5, 0.01, 256, 0)


class TestSaddleCheck:
    def test_no_perturbation_beats_optimum(self):
        spec = spec_of([0.5, 0.5], 0.1)
        assert ewm.saddle_check(spec, 200, 0.05, ewm.trial_rng(100))

    def test_zero_magnitude_trivially_true(self):
        spec = spec_of([0.4, 0.3, 0.3], 0.1)
        assert ewm.saddle_check(spec, 5, 0.0, ewm.trial_rng(101))

    def test_too_large(self):
        w = np.full(7, 1.0 / 7)
        spec = ewm.make_neighborhood(ewm.make_distribution(w), 0.01)
        with pytest.raises(TooLargeError):
            ewm.saddle_check(spec, 1, 0.05, ewm.trial_rng(102))

    def test_infeasible_scaling_is_not_a_counterexample(self):
        # scaling a row-stochastic kernel by 1.1 inflates the inner value past
        # the optimum, which is exactly why the audit renormalizes rows: such
        # kernels violate the unit null expectation and are out of bounds
        spec = spec_of([0.5, 0.5], 0.1)
        rstar = ewm.kernel_of(ewm.optimal_evalue(spec), spec)
        m = ewm.make_score_matrix(np.log(1.1 * rstar / spec.anchor.weights))
        worst = min(
            ewm.best_path_inner_value(m, spec, pair)[0]
            for pair in ewm.enumerate_extremes(spec)
        )
        assert worst > ewm.jstar(spec) + 1e-9

import io
import math

import numpy as np
import pytest

import ewm
from ewm.errors import BadParamsError, InvalidPairError, OutsideNeighborhoodError
from ewm.simulation import _run_trial_generic


def spec_of(weights, delta):
    return ewm.make_neighborhood(ewm.make_distribution(weights), delta)


FAIR = spec_of([0.5, 0.5], 0.1)


class TestSeeding:
    def test_mix64_is_a_permutation_sample(self):
        seen = {ewm.mix64(x) for x in range(1000)}
        assert len(seen) == 1000

    def test_trial_seed_order_independent(self):
        a = ewm.trial_seed(7, 3, 11)
        b = ewm.trial_seed(7, 3, 11)
        assert a == b
        assert ewm.trial_seed(7, 3, 12) != a
        assert ewm.trial_seed(7, 4, 11) != a


class TestPolicies:
    def test_fixed_pair_constant(self):
        pair = ewm.simulation.choose_pair(ewm.FixedPair(0, 1), 17, [], FAIR, ewm.trial_rng(0))
        assert (pair.gain, pair.loss) == (0, 1)

    def test_round_robin_third_step(self):
        # completed-step count 2 = third step; lexicographic pair list
        spec = spec_of([0.4, 0.3, 0.3], 0.1)
        pair = ewm.simulation.choose_pair(ewm.RoundRobin(), 2, [], spec, ewm.trial_rng(0))
        assert (pair.gain, pair.loss) == (1, 0)

    def test_random_pair_emits_vertices(self):
        spec = spec_of([0.4, 0.3, 0.3], 0.1)
        rng = ewm.trial_rng(1)
        valid = {(p.gain, p.loss) for p in ewm.enumerate_extremes(spec)}
        for step in range(30):
            pair = ewm.simulation.choose_pair(ewm.RandomPair(), step, [], spec, rng)
            assert (pair.gain, pair.loss) in valid

    def test_history_greedy_explores_then_exploits(self):
        spec = spec_of([0.4, 0.3, 0.3], 0.1)
        policy = ewm.HistoryGreedy(window=8)
        rng = ewm.trial_rng(2)
        first = ewm.simulation.choose_pair(policy, 0, [], spec, rng)
        assert (first.gain, first.loss) == (0, 1)
        history = [
            ewm.simulation.StepOutcome(pair_index=i, v=0, s=0, log_e=float(i))
            for i in range(6)
        ]
        chosen = ewm.simulation.choose_pair(policy, 6, history, spec, rng)
        assert (chosen.gain, chosen.loss) == (0, 1)  # smallest recent log score

    def test_step_process_returns_best_response(self):
        spec = spec_of([0.4, 0.3, 0.3], 0.1)
        e = ewm.optimal_evalue(spec)
        q, w, (v, s) = ewm.step_process(ewm.FixedPair(2, 1), [], spec, e, ewm.trial_rng(3))
        expected = ewm.extreme_coupling(spec, ewm.ExtremePair(2, 1))
        assert np.array_equal(w.joint, expected.joint)
        assert np.array_equal(q.weights, expected.target.weights)
        assert 0 <= v < 3 and 0 <= s < 3


class TestRunTrial:
    def test_deterministic(self):
        config = ewm.ExperimentConfig(
            spec=FAIR, alphas=(1e-6,), trials=5, policy=ewm.FixedPair(0, 1), base_seed=9
        )
        a = [ewm.run_trial(config, 1e-6, 0, t) for t in range(5)]
        b = [ewm.run_trial(config, 1e-6, 0, t) for t in range(5)]
        assert a == b

    def test_fast_path_matches_stepwise_loop(self):
        config = ewm.ExperimentConfig(
            spec=FAIR, alphas=(0.02, 1e-12), trials=8, policy=ewm.FixedPair(0, 1), base_seed=42
        )
        e = ewm.optimal_evalue(FAIR)
        for ai, alpha in enumerate(config.alphas):
            cap = ewm.default_horizon(FAIR, alpha)
            for t in range(config.trials):
                fast = ewm.run_trial(config, alpha, ai, t)
                slow = _run_trial_generic(
                    FAIR, e, config.policy, alpha, cap, ewm.trial_seed(42, ai, t)
                )
                assert fast == slow

    def test_loose_alpha_stops_on_first_diagonal_draw(self):
        # threshold log(1/0.9) = 0.105 < log 1.9, so any matching first draw stops
        config = ewm.ExperimentConfig(
            spec=FAIR, alphas=(0.9,), trials=10, policy=ewm.FixedPair(0, 1), base_seed=5
        )
        w = ewm.extreme_coupling(FAIR, ewm.ExtremePair(0, 1))
        for t in range(10):
            v, s = ewm.sample_pair(w, ewm.trial_rng(ewm.trial_seed(5, 0, t)))
            record = ewm.run_trial(config, 0.9, 0, t)
            if v == s:
                assert record.stop_step == 1
            else:
                assert record.stop_step != 1

    def test_horizon_cap_censors(self):
        config = ewm.ExperimentConfig(
            spec=FAIR, alphas=(1e-6,), trials=40, policy=ewm.FixedPair(0, 1),
            horizon_cap=1, base_seed=6,
        )
        w = ewm.extreme_coupling(FAIR, ewm.ExtremePair(0, 1))
        seen_censored = False
        for t in range(40):
            v, s = ewm.sample_pair(w, ewm.trial_rng(ewm.trial_seed(6, 0, t)))
            record = ewm.run_trial(config, 1e-6, 0, t)
            if v != s:
                assert record.stop_step is None and record.steps_run == 1
                seen_censored = True
        assert seen_censored

    def test_crossing_is_first_passage(self):
        config = ewm.ExperimentConfig(
            spec=FAIR, alphas=(1e-4,), trials=6, policy=ewm.FixedPair(0, 1), base_seed=7
        )
        e = ewm.optimal_evalue(FAIR)
        threshold = math.log(1e4)
        w = ewm.extreme_coupling(FAIR, ewm.ExtremePair(0, 1))
        for t in range(6):
            record = ewm.run_trial(config, 1e-4, 0, t)
            draws = ewm.sample_stream(w, record.steps_run, ewm.trial_rng(record.seed))
            wealth = np.cumsum(np.log(e.scores[draws[:, 0], draws[:, 1]]))
            assert record.stop_step == record.steps_run
            assert wealth[-1] >= threshold
            assert np.all(wealth[:-1] < threshold)
            assert abs(wealth[-1] - record.final_wealth) < 1e-9

    def test_generic_policies_run(self):
        for policy in (ewm.RoundRobin(), ewm.RandomPair(), ewm.HistoryGreedy(window=8)):
            config = ewm.ExperimentConfig(
                spec=spec_of([0.4, 0.3, 0.3], 0.1), alphas=(1e-3,), trials=3,
                policy=policy, base_seed=8,
            )
            for t in range(3):
                record = ewm.run_trial(config, 1e-3, 0, t)
                assert record.stop_step is not None

    def test_invalid_fixed_pair(self):
        with pytest.raises(InvalidPairError):
            ewm.ExperimentConfig(
                spec=FAIR, alphas=(0.1,), trials=1, policy=ewm.FixedPair(0, 3), base_seed=0
            )


class TestEstimateStopping:
    def test_thread_count_does_not_change_results(self):
        config = ewm.ExperimentConfig(
            spec=FAIR, alphas=(1e-3, 1e-8), trials=150, policy=ewm.FixedPair(0, 1), base_seed=11
        )
        assert ewm.estimate_stopping(config, threads=1) == ewm.estimate_stopping(config, threads=2)

    def test_ratio_tracks_rate(self):
        config = ewm.ExperimentConfig(
            spec=FAIR, alphas=(1e-30,), trials=400, policy=ewm.FixedPair(0, 1), base_seed=12
        )
        row = ewm.estimate_stopping(config)[0]
        assert row.censored_count == 0
        assert abs(row.ratio - 1.0 / ewm.jstar(FAIR)) / (1.0 / ewm.jstar(FAIR)) < 0.05

    def test_csv_shape(self):
        config = ewm.ExperimentConfig(
            spec=FAIR, alphas=(0.01, 0.001), trials=20, policy=ewm.FixedPair(0, 1), base_seed=13
        )
        rows = ewm.estimate_stopping(config)
        buf = io.StringIO()
        ewm.simulation.write_sweep_csv(buf, rows)
        lines = buf.getvalue().splitlines()
        assert lines[0] == "alpha,log_inv_alpha,mean_tau,std_err,ratio,censored_count"
        assert len(lines) == 3

    def test_no_policy_beats_the_rate_lower_bound(self):
        # every adversary in the suite needs at least (1 - 2%) / jstar steps
        # per nat of threshold at tiny alpha
        floor = 0.98 / ewm.jstar(FAIR)
        for policy in (ewm.FixedPair(0, 1), ewm.RoundRobin(),
                       ewm.RandomPair(), ewm.HistoryGreedy(window=8)):
            config = ewm.ExperimentConfig(
                spec=FAIR, alphas=(1e-120,), trials=500, policy=policy, base_seed=23
            )
            row = ewm.estimate_stopping(config, threads=2)[0]
            assert row.censored_count == 0
            assert row.ratio >= floor, (policy, row.ratio, floor)


class TestDriftIdentity:
    def test_fixed_pair_mean_log_score_is_rate(self):
        spec = spec_of([0.2, 0.8], 0.1)
        e = ewm.optimal_evalue(spec)
        w = ewm.extreme_coupling(spec, ewm.ExtremePair(0, 1))
        draws = ewm.sample_stream(w, 10**6, ewm.trial_rng(14))
        incs = np.log(e.scores[draws[:, 0], draws[:, 1]])
        se = incs.std(ddof=1) / math.sqrt(incs.size)
        assert abs(incs.mean() - ewm.jstar(spec)) < 4.0 * se

    def test_adaptive_policies_share_the_drift(self):
        # unreachable threshold and a fixed horizon: no stopping bias in the mean
        spec = spec_of([0.4, 0.3, 0.3], 0.1)
        e = ewm.optimal_evalue(spec)
        for policy in (ewm.RoundRobin(), ewm.HistoryGreedy(window=16)):
            record = _run_trial_generic(spec, e, policy, 1e-320, 700, 77)
            assert record.stop_step is None and record.steps_run == 700
            mean = record.final_wealth / record.steps_run
            assert abs(mean - ewm.jstar(spec)) < 0.12  # 4 sd of a 700-step average


class TestCalibrateNull:
    def test_rate_bounded_at_anchor(self):
        rate = ewm.calibrate_null(FAIR, 0.05, 4000, 31, FAIR.anchor, ewm.trial_rng(15))
        assert rate <= 0.05 + 3.0 * math.sqrt(0.05 * 0.95 / 4000)

    def test_rate_bounded_at_extreme_target(self):
        q = ewm.extreme_target(FAIR, ewm.ExtremePair(0, 1))
        rate = ewm.calibrate_null(FAIR, 0.05, 4000, 31, q, ewm.trial_rng(16))
        assert rate <= 0.05 + 3.0 * math.sqrt(0.05 * 0.95 / 4000)

    def test_outside_neighborhood_rejected(self):
        with pytest.raises(OutsideNeighborhoodError):
            ewm.calibrate_null(FAIR, 0.05, 100, 10,
                               ewm.make_distribution([0.8, 0.2]), ewm.trial_rng(17))

    def test_inflated_table_is_invalid(self):
        # doubling the scores breaks the null constraint and the rate blows up
        doubled = ewm.make_evalue_table(2.0 * ewm.optimal_evalue(FAIR).scores)
        rate = ewm.calibrate_null(FAIR, 0.05, 2000, 31, FAIR.anchor,
                                  ewm.trial_rng(18), e=doubled)
        assert rate > 0.25

    def test_bad_params(self):
        with pytest.raises(BadParamsError):
            ewm.calibrate_null(FAIR, 0.05, 0, 10, FAIR.anchor, ewm.trial_rng(19))

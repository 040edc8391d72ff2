import numpy as np
import pytest

from vrsplit import ConfigurationError, EstimatorConfig, build_schedule, make_estimator
from vrsplit.estimators import EPS_PROB, hsgd_tau_schedule

from conftest import identity_resolvent_problem
from oracles import enumerate_estimator_mean


def finite_sum_problem(n=4, dim=3, seed=0):
    return identity_resolvent_problem(
        np.eye(dim) * 0.8, offset=np.random.default_rng(seed).normal(size=dim), n_split=n
    )


class _RecordingRng:
    """Wraps a generator, logging every minibatch draw."""

    def __init__(self, seed):
        self.rng = np.random.default_rng(seed)
        self.batches = []

    def integers(self, low, high, size):
        idx = self.rng.integers(low, high, size=size)
        self.batches.append(np.array(idx))
        return idx

    def random(self):
        return self.rng.random()


class TestSvrg:
    def test_estimate_at_snapshot_is_exact(self):
        prob = finite_sum_problem()
        est = make_estimator(prob, EstimatorConfig("lsvrg", batch_size=2, prob=0.0))
        rng = np.random.default_rng(0)
        x0 = rng.normal(size=prob.dim)
        f0 = est.estimate(0, x0, x0, rng)
        assert np.array_equal(f0, prob.full_F(x0))
        # Iterate back at the snapshot: minibatch terms cancel bitwise.
        f1 = est.estimate(1, x0, x0, rng)
        assert np.array_equal(f1, prob.full_F(x0))

    def test_unbiased_by_enumeration(self):
        for n in (3, 4, 5):
            prob = finite_sum_problem(n=n, seed=n)
            est = make_estimator(prob, EstimatorConfig("lsvrg", batch_size=1, prob=0.5))
            rng = np.random.default_rng(1)
            x0 = rng.normal(size=prob.dim)
            x1 = rng.normal(size=prob.dim)
            est.estimate(0, x0, x0, rng)
            mean = enumerate_estimator_mean(est, 1, x1, x0)
            assert np.max(np.abs(mean - prob.full_F(x1))) <= 1e-12

    def test_refresh_moves_snapshot_to_previous_iterate(self):
        prob = finite_sum_problem()
        est = make_estimator(prob, EstimatorConfig("lsvrg", batch_size=1, prob=1.0))
        rng = np.random.default_rng(2)
        x0, x1 = rng.normal(size=3), rng.normal(size=3)
        est.estimate(0, x0, x0, rng)
        est.estimate(1, x1, x0, rng)
        assert np.array_equal(est.snapshot_x, x0)


class TestSaga:
    def test_unbiased_by_enumeration(self):
        prob = finite_sum_problem(n=4)
        est = make_estimator(prob, EstimatorConfig("saga", batch_size=1))
        rng = np.random.default_rng(3)
        x0, x1 = rng.normal(size=3), rng.normal(size=3)
        est.estimate(0, x0, x0, rng)
        mean = enumerate_estimator_mean(est, 1, x1, x0)
        assert np.max(np.abs(mean - prob.full_F(x1))) <= 1e-12

    def test_table_rows_track_last_sampled_iterate(self):
        prob = finite_sum_problem(n=6)
        est = make_estimator(prob, EstimatorConfig("saga", batch_size=2))
        rng = _RecordingRng(4)
        gen = np.random.default_rng(5)
        xs = [gen.normal(size=3)]
        est.estimate(0, xs[0], xs[0], rng)
        last_seen = {i: 0 for i in range(6)}
        for k in range(1, 40):
            xs.append(gen.normal(size=3))
            est.estimate(k, xs[k], xs[k - 1], rng)
            for i in rng.batches[-1]:
                last_seen[int(i)] = k
        for i in range(6):
            expected = prob.component_batch(xs[last_seen[i]], np.array([i]))[0]
            assert np.allclose(est.table[i], expected, rtol=0, atol=0)

    def test_running_mean_matches_column_mean(self):
        prob = finite_sum_problem(n=8)
        est = make_estimator(prob, EstimatorConfig("saga", batch_size=3))
        rng = np.random.default_rng(6)
        x_prev = rng.normal(size=3)
        est.estimate(0, x_prev, x_prev, rng)
        for k in range(1, 500):
            x = rng.normal(size=3)
            est.estimate(k, x, x_prev, rng)
            x_prev = x
            assert np.max(np.abs(est.table_mean - est.table.mean(axis=0))) <= 1e-10


class TestSarahAndHsgd:
    def test_full_batch_each_step_is_exact(self):
        prob = finite_sum_problem(n=5)
        est = make_estimator(prob, EstimatorConfig("lsarah", batch_size=5, prob=0.0))
        rng = np.random.default_rng(7)
        x_prev = rng.normal(size=3)
        est.estimate(0, x_prev, x_prev, rng)
        for k in range(1, 20):
            x = rng.normal(size=3)
            f = est.estimate(k, x, x_prev, rng)
            assert np.allclose(f, prob.full_F(x), rtol=1e-12, atol=1e-14)
            x_prev = x

    def test_hsgd_tau_zero_matches_sarah_bitwise(self):
        prob = finite_sum_problem(n=6)
        sarah = make_estimator(prob, EstimatorConfig("lsarah", batch_size=2, prob=0.0))
        hsgd = make_estimator(prob, EstimatorConfig("hsgd", batch_size=2, tau=0.0))
        r1, r2 = np.random.default_rng(8), np.random.default_rng(8)
        gen = np.random.default_rng(9)
        x_prev = gen.normal(size=3)
        a = sarah.estimate(0, x_prev, x_prev, r1)
        b = hsgd.estimate(0, x_prev, x_prev, r2)
        assert np.array_equal(a, b)
        for k in range(1, 30):
            x = gen.normal(size=3)
            a = sarah.estimate(k, x, x_prev, r1)
            b = hsgd.estimate(k, x, x_prev, r2)
            assert np.array_equal(a, b)
            x_prev = x

    def test_hsgd_tau_one_is_plain_minibatch(self):
        prob = finite_sum_problem(n=6)
        est = make_estimator(prob, EstimatorConfig("hsgd", batch_size=3, tau=1.0))
        rng = np.random.default_rng(10)
        check = np.random.default_rng(10)  # replays the same index stream
        gen = np.random.default_rng(11)
        x_prev = gen.normal(size=3)
        est.estimate(0, x_prev, x_prev, rng)
        x = gen.normal(size=3)
        f = est.estimate(1, x, x_prev, rng)
        idx = check.integers(0, 6, size=3)
        expect = prob.component_batch(x, idx).mean(axis=0)
        assert np.max(np.abs(f - expect)) <= 1e-15

    def test_tau_schedule_range_and_value(self):
        mu = 0.95 * 2.0 / 3.0
        r = 2.0 + 1.0 / mu
        tau = hsgd_tau_schedule(theta=1.0 / 100.0, mu=mu, r=r)
        ts = [tau(k) for k in range(1, 200)]
        assert all(0.0 <= t <= 1.0 for t in ts)
        t_prev, t_cur = mu * (4 + r), mu * (5 + r)
        expected = 1.0 - np.sqrt((1 - 0.01) * t_prev * (t_prev - 1) / (t_cur * (t_cur - 1)))
        assert tau(5) == pytest.approx(expected)


class TestSharedBehavior:
    def test_zero_variance_at_stationary_state(self):
        prob = finite_sum_problem(n=5)
        x = np.random.default_rng(12).normal(size=3)
        exact = prob.full_F(x)
        for kind in ("lsvrg", "saga", "lsarah"):
            est = make_estimator(prob, EstimatorConfig(kind, batch_size=2, prob=0.0))
            rng = np.random.default_rng(13)
            est.estimate(0, x, x, rng)
            for k in range(1, 10):
                f = est.estimate(k, x, x, rng)
                assert np.allclose(f, exact, rtol=0, atol=1e-15), kind

    def test_deterministic_replay(self):
        prob = finite_sum_problem(n=7)
        for kind in ("lsvrg", "saga", "lsarah", "hsgd"):
            cfg = EstimatorConfig(kind, batch_size=2, prob=0.3, tau=0.1 if kind == "hsgd" else None)
            outs = []
            for _ in range(2):
                est = make_estimator(prob, cfg)
                rng = np.random.default_rng(14)
                gen = np.random.default_rng(15)
                x_prev = gen.normal(size=3)
                seq = [est.estimate(0, x_prev, x_prev, rng)]
                for k in range(1, 20):
                    x = gen.normal(size=3)
                    seq.append(est.estimate(k, x, x_prev, rng))
                    x_prev = x
                outs.append(np.stack(seq))
            assert np.array_equal(outs[0], outs[1]), kind

    def test_uninitialized_use_rejected(self):
        prob = finite_sum_problem()
        for kind in ("lsvrg", "saga", "lsarah", "hsgd"):
            est = make_estimator(prob, EstimatorConfig(kind, batch_size=1, tau=0.5))
            with pytest.raises(ConfigurationError):
                est.estimate(3, np.zeros(3), np.zeros(3), np.random.default_rng(0))

    def test_oracle_accounting_exact(self):
        n, b = 10, 3
        prob = finite_sum_problem(n=n)
        gen = np.random.default_rng(16)
        xs = [gen.normal(size=3) for _ in range(6)]

        def run(kind, prob_k, tau=None, steps=5):
            est = make_estimator(prob, EstimatorConfig(kind, batch_size=b, prob=prob_k, tau=tau))
            rng = np.random.default_rng(17)
            est.estimate(0, xs[0], xs[0], rng)
            init_cost = est.oracle_calls
            for k in range(1, steps + 1):
                est.estimate(k, xs[k], xs[k - 1], rng)
            return init_cost, est.oracle_calls - init_cost

        init, steps_cost = run("saga", 0.0)
        assert init == n and steps_cost == 5 * b
        init, steps_cost = run("lsarah", 0.0)
        assert init == n and steps_cost == 5 * 2 * b
        init, steps_cost = run("hsgd", 0.0, tau=0.5)
        assert init == n and steps_cost == 5 * 2 * b
        init, steps_cost = run("lsvrg", 1.0)  # refresh every step: n + 2b
        assert init == n and steps_cost == 5 * (n + 2 * b)
        init, steps_cost = run("lsarah", 1.0)  # restart every step: n, no batch
        assert init == n and steps_cost == 5 * n

    def test_mega_batch_replaces_full_passes(self):
        prob = finite_sum_problem(n=10)
        est = make_estimator(
            prob, EstimatorConfig("lsarah", batch_size=2, prob=0.0, mega_batch=4)
        )
        rng = np.random.default_rng(18)
        x = rng.normal(size=3)
        est.estimate(0, x, x, rng)
        assert est.oracle_calls == 4

    def test_mega_batch_snapshot_refresh_accounting(self):
        # Expectation-setting snapshot estimator: init and every refresh cost
        # the mega-batch size instead of a full pass.
        n, m, b = 10, 4, 2
        prob = finite_sum_problem(n=n)
        est = make_estimator(
            prob, EstimatorConfig("lsvrg", batch_size=b, prob=1.0, mega_batch=m)
        )
        rng = np.random.default_rng(19)
        gen = np.random.default_rng(20)
        x_prev = gen.normal(size=3)
        est.estimate(0, x_prev, x_prev, rng)
        assert est.oracle_calls == m
        for k in range(1, 4):
            x = gen.normal(size=3)
            est.estimate(k, x, x_prev, rng)
            x_prev = x
        assert est.oracle_calls == m + 3 * (m + 2 * b)

    def test_saga_rejects_mega_batch(self):
        prob = finite_sum_problem(n=4)
        est = make_estimator(prob, EstimatorConfig("saga", batch_size=1, mega_batch=2))
        with pytest.raises(ConfigurationError, match="finite-sum"):
            est.estimate(0, np.zeros(3), np.zeros(3), np.random.default_rng(0))


class TestSchedules:
    def test_sarah_practical_preset_large_n(self):
        cfg = build_schedule("lsarah", 49749)
        assert cfg.batch_at(0, 49749) == 111
        assert cfg.prob_at(0) == pytest.approx(1.0 / (2.0 * np.sqrt(49749)), rel=1e-12)
        assert cfg.prob_at(0) == pytest.approx(2.2417e-3, rel=1e-4)

    def test_svrg_practical_preset(self):
        cfg = build_schedule("lsvrg", 1000)
        assert cfg.batch_at(0, 1000) == 50
        assert cfg.prob_at(0) == pytest.approx(0.05)

    def test_degenerate_single_component(self):
        cfg = build_schedule("lsarah", 1)
        assert cfg.batch_at(0, 1) == 1
        assert cfg.prob_at(0) == 1.0

    def test_probability_clamp(self):
        cfg = EstimatorConfig("lsarah", prob=1e-9)
        assert cfg.prob_at(0) == EPS_PROB
        cfg = EstimatorConfig("lsarah", prob=3.0)
        assert cfg.prob_at(0) == 1.0

    def test_theory_schedules_evaluate_cited_formulas(self):
        n, mu = 4096, 0.5
        r = 8.0 + 1.0 / mu
        cfg = build_schedule(
            "lsvrg", n, omega=1.0 / 3.0, constants={"c_p": 1.0, "c_b": 1.0, "mu": mu, "r": r},
            flavor="theory",
        )
        nw = n ** (1.0 / 3.0)
        assert cfg.batch_at(0, n) == 256  # floor(4096^(2/3)) done in exact arithmetic
        k0 = int(np.floor(4 * nw - r + 1 + 1 / mu))
        assert cfg.prob_at(k0 + 1) == pytest.approx(3.0 / nw)
        assert cfg.prob_at(0) == pytest.approx(2.0 / nw + 4 * mu / (mu * (r - 1) - 1))

        cfg = build_schedule(
            "saga", n, constants={"c_b": 1.0, "mu": mu, "r": r}, flavor="theory"
        )
        assert cfg.batch_at(10**6, n) == min(n, int(3.0 * n ** (2.0 / 3.0)))

        cfg = build_schedule(
            "lsarah", n, omega=0.5, constants={"c_p": 1.0, "c_b": 1.0, "mu": mu, "r": r},
            flavor="theory",
        )
        assert cfg.batch_at(0, n) == int(np.sqrt(n))
        k0 = int(np.floor(2 * np.sqrt(n) - r + 1 + 1 / mu))
        assert cfg.prob_at(k0 + 1) == pytest.approx(2.0 / np.sqrt(n))

    def test_theory_bound_violation_warns(self):
        with pytest.warns(UserWarning):
            build_schedule("lsvrg", 8, constants={"mu": 0.5, "r": 10.0}, flavor="theory")

    def test_scaled_halves_batch_and_probability(self):
        cfg = build_schedule("lsvrg", 1000).scaled(0.5, 0.5)
        assert cfg.batch_at(0, 1000) == 25
        assert cfg.prob_at(0) == pytest.approx(0.025)

import numpy as np
import pytest

from vrsplit import (
    AccelParams,
    BackwardForwardAccel,
    ConfigurationError,
    EstimatorConfig,
    ForwardBackwardAccel,
    compute_split_constants,
    run_solver,
    schedule_tk_etak,
)
from vrsplit.core import GeProblem
from vrsplit.problems import build_synthetic_linear

from conftest import identity_resolvent_problem

MU_DEFAULT = 0.95 * 2.0 / 3.0


def monotone_problem(p=6, seed=0):
    rng = np.random.default_rng(seed)
    return build_synthetic_linear(
        p,
        np.linspace(0.2, 1.0, p),
        np.full(p, 0.5),
        rng=rng,
        q=rng.normal(size=p),
    )


def default_params(problem, lam_scale=None, mu=MU_DEFAULT, r=None):
    L = problem.lipschitz_L
    lam = None if lam_scale is None else lam_scale / L
    sc = compute_split_constants(L, problem.cohypo_rho, zeta=0.0, lambda_override=lam)
    return AccelParams.from_constants(sc, mu=mu, r=r)


class TestAccelParams:
    def test_mu_gate(self):
        with pytest.raises(ConfigurationError, match="mu"):
            AccelParams(mu=0.7, r=10.0, beta=0.1, lam=1.0, beta_bar=0.75)

    def test_r_gate(self):
        with pytest.raises(ConfigurationError, match="r >= 2"):
            AccelParams(mu=0.5, r=3.0, beta=0.1, lam=1.0, beta_bar=0.75)

    def test_beta_gate(self):
        beta_max = (2.0 - 0.5) * 0.75 / (2.0 + 0.5)
        with pytest.raises(ConfigurationError, match="beta"):
            AccelParams(mu=0.5, r=4.0, beta=beta_max * 1.01, lam=1.0, beta_bar=0.75)

    def test_nu_is_half_mu(self):
        p = AccelParams(mu=0.5, r=4.0, beta=0.1, lam=1.0, beta_bar=0.75)
        assert p.nu == 0.25


class TestSchedule:
    def test_t0_at_benchmark_parameters(self):
        p = AccelParams(mu=19.0 / 30.0, r=5.0, beta=0.1, lam=1.0, beta_bar=0.75)
        t0, _ = schedule_tk_etak(p, 0)
        assert t0 == pytest.approx(19.0 / 6.0)

    def test_eta_limit_is_two_beta(self):
        p = AccelParams(mu=0.5, r=4.0, beta=0.3, lam=1.0, beta_bar=0.75)
        _, eta = schedule_tk_etak(p, 10**6)
        assert abs(eta - 2.0 * p.beta) <= 1e-5

    def test_hand_value(self):
        p = AccelParams(mu=0.5, r=4.0, beta=0.45, lam=1.0, beta_bar=0.75)
        t0, eta0 = schedule_tk_etak(p, 0)
        assert t0 == pytest.approx(2.0)
        assert eta0 == pytest.approx(0.45 * 8.0 / 7.0)


class TestForwardBackward:
    def test_stationary_at_solution(self):
        prob = monotone_problem()
        params = default_params(prob)
        x_star = prob.known_solution
        fb = ForwardBackwardAccel(prob, params, EstimatorConfig("full_batch"), x_star)
        rng = np.random.default_rng(0)
        for _ in range(100):
            fb.step(rng)
        assert np.linalg.norm(fb.x - x_star) <= 1e-12

    def test_scalar_hand_step(self):
        prob = identity_resolvent_problem(np.array([[1.0]]))
        beta = (2.0 - 0.5) * 0.75 / (2.0 + 0.5)
        params = AccelParams(mu=0.5, r=4.0, beta=beta, lam=1.0, beta_bar=0.75)
        fb = ForwardBackwardAccel(prob, params, EstimatorConfig("full_batch"), np.array([1.0]))
        fb.step(np.random.default_rng(0))
        assert fb.x[0] == pytest.approx(1.0 - 8.0 * beta / 7.0)
        assert fb.z[0] == pytest.approx(1.0 - 2.0 * beta / 7.0)

    def test_anchor_identity_along_trajectory(self):
        # z_k - x_k == t_k * (x_{k+1} - x_k + eta_k * Gest_k) exactly (algebra
        # of the update), checked on a stochastic run.
        prob = monotone_problem(seed=3)
        params = default_params(prob)
        fb = ForwardBackwardAccel(prob, params, EstimatorConfig("full_batch"), np.ones(prob.dim))
        rng = np.random.default_rng(1)
        for _ in range(100):
            x_before, z_before, k = fb.x.copy(), fb.z.copy(), fb.k
            fb.step(rng)
            t_k, eta_k = schedule_tk_etak(params, k)
            lhs = z_before - x_before
            rhs = t_k * (fb.x - x_before + eta_k * fb.last_residual_estimate)
            assert np.max(np.abs(lhs - rhs)) <= 1e-10

    def test_one_estimator_and_one_resolvent_call_per_step(self, logistic_small):
        prob = logistic_small
        params = default_params(prob, lam_scale=0.5)
        fb = ForwardBackwardAccel(
            prob, params, EstimatorConfig("lsarah", batch_size=3, prob=0.2), np.zeros(prob.dim)
        )
        rng = np.random.default_rng(2)
        for _ in range(25):
            fb.step(rng)
        assert fb.estimator.n_estimates == 25
        assert fb.resolvent_calls == 25


class TestBackwardForward:
    def test_reduces_to_forward_backward_when_set_part_vanishes(self):
        prob = identity_resolvent_problem(np.diag([1.0, 0.6]), offset=np.array([0.3, -0.1]), n_split=4)
        params = AccelParams(mu=0.5, r=4.0, beta=0.4, lam=1.0, beta_bar=0.75)
        cfg = EstimatorConfig("lsarah", batch_size=2, prob=0.25)
        x0 = np.array([1.0, -2.0])
        fb = ForwardBackwardAccel(prob, params, cfg, x0)
        bf = BackwardForwardAccel(prob, params, cfg, x0)
        r1, r2 = np.random.default_rng(5), np.random.default_rng(5)
        for _ in range(40):
            fb.step(r1)
            bf.step(r2)
            assert np.allclose(fb.x, bf.u, rtol=1e-12, atol=1e-12)

    def test_stationary_at_solution(self):
        prob = monotone_problem(seed=4)
        params = default_params(prob)
        x_star = prob.known_solution
        xi_star = -prob.full_F(x_star)
        bf = BackwardForwardAccel(
            prob, params, EstimatorConfig("full_batch"), x_star, xi0=xi_star
        )
        rng = np.random.default_rng(0)
        for _ in range(100):
            bf.step(rng)
        assert np.linalg.norm(bf.report_point() - x_star) <= 1e-10

    def test_reported_residual_equals_backward_forward_residual(self):
        from vrsplit import bfs_residual

        prob = monotone_problem(seed=5)
        params = default_params(prob)
        bf = BackwardForwardAccel(prob, params, EstimatorConfig("full_batch"), np.ones(prob.dim))
        rng = np.random.default_rng(1)
        for _ in range(5):
            u_before = bf.u.copy()
            bf.step(rng)
            shadow = bf.last_input_x
            xi = (u_before - shadow) / params.lam
            direct = bf.last_f_estimate + xi
            via_map = bfs_residual(prob, u_before, params.lam, shadow, bf.last_f_estimate)
            assert np.array_equal(direct, via_map)
            assert np.array_equal(bf.last_residual_estimate, via_map)


class TestRunSolver:
    def test_zero_budget_single_normalized_row(self):
        prob = monotone_problem()
        params = default_params(prob)
        fb = ForwardBackwardAccel(prob, params, EstimatorConfig("full_batch"), np.ones(prob.dim))
        trace = run_solver(prob, fb, budget_epochs=0, seed=0)
        assert trace.n_rows == 1
        assert trace.oracle_units == [0] and trace.rel_residual == [1.0]

    def test_deterministic_run_decreases_residual(self):
        prob = monotone_problem(seed=6)
        params = default_params(prob)
        fb = ForwardBackwardAccel(prob, params, EstimatorConfig("full_batch"), np.ones(prob.dim))
        trace = run_solver(prob, fb, budget_epochs=2000, seed=0)
        rel = np.array(trace.rel_residual)
        assert np.all(rel > 0.0)
        assert rel[-1] < rel[0]

    def test_loglog_slope_in_quadratic_rate_band(self):
        # Deterministic full-batch run on a monotone instance: slope of
        # log ||G||^2 against log k over k in [50, 2000].
        p = 20
        rng = np.random.default_rng(5)
        prob = build_synthetic_linear(
            p, np.logspace(-4, 0, p), np.full(p, 0.5), rng=rng, q=rng.normal(size=p)
        )
        params = default_params(prob, mu=MU_DEFAULT)
        fb = ForwardBackwardAccel(prob, params, EstimatorConfig("full_batch"), np.zeros(p))
        trace = run_solver(prob, fb, budget_epochs=2000, seed=0)
        k = np.arange(trace.n_rows)
        slope = np.polyfit(
            np.log(k[50:2001]), np.log(np.array(trace.rel_residual[50:2001]) ** 2), 1
        )[0]
        assert -3.0 <= slope <= -2.0

    def test_identical_seeds_identical_traces(self, logistic_small):
        prob = logistic_small
        params = default_params(prob, lam_scale=0.5)
        traces = []
        for _ in range(2):
            fb = ForwardBackwardAccel(
                prob, params, EstimatorConfig("lsarah", batch_size=3, prob=0.1), np.zeros(prob.dim)
            )
            traces.append(run_solver(prob, fb, budget_epochs=5, seed=42))
        assert traces[0].rows_equal(traces[1])

    def test_divergence_guard_flags_and_aborts(self):
        # Problem lies about its operator constant: the step size is ~1000x
        # too long and the iteration explodes.
        inner = monotone_problem(seed=7)
        liar = GeProblem(
            dim=inner.dim,
            n_components=inner.n_components,
            component_batch=inner.component_batch,
            resolvent=inner.resolvent,
            lipschitz_L=1e-3 * inner.lipschitz_L,
            full_operator=inner.full_operator,
        )
        params = default_params(liar)
        fb = ForwardBackwardAccel(liar, params, EstimatorConfig("full_batch"), np.ones(liar.dim))
        trace = run_solver(liar, fb, budget_epochs=10_000, seed=0)
        assert trace.metadata.get("diverged") is True
        assert trace.n_rows < 10_001

    def test_debug_records_estimator_and_residual_errors(self, logistic_small):
        prob = logistic_small
        params = default_params(prob, lam_scale=0.5)
        fb = ForwardBackwardAccel(
            prob, params, EstimatorConfig("lsarah", batch_size=3, prob=0.1), np.zeros(prob.dim)
        )
        trace = run_solver(prob, fb, budget_epochs=10, seed=1, debug=True)
        assert trace.debug and len(trace.debug["f_err"]) == trace.n_rows - 1
        for f_err, g_err in zip(trace.debug["f_err"], trace.debug["g_err"]):
            assert g_err <= f_err + 1e-12

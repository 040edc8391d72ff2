"""Accelerated variance-reduced forward-backward / backward-forward solvers.

Both methods share the parameter schedule

    t_k = mu * (k + r),    eta_k = 2 * beta * (t_k - 1) / (t_k - nu),

with ``nu = mu/2`` and admissible ranges ``0 < mu < 2/3``, ``r >= 2 + 1/mu``,
``0 < beta <= (2 - mu) * beta_bar / (2 + mu)`` enforced at construction.

The forward-backward scheme iterates, from ``z0 = x0``::

    y_k     = ((t_k - 1)/t_k) x_k + (1/t_k) z_k
    w_k     = J(x_k - lam * Fest_k, lam)
    x_{k+1} = y_k - (eta_k / lam) (x_k - w_k)
    z_{k+1} = z_k + nu (x_{k+1} - y_k)

where ``Fest_k`` is the variance-reduced estimate of ``F(x_k)``.  The
backward-forward scheme runs the same template on ``u``/``s`` with the
resolvent applied first: the shadow point ``x_k = J(u_k, lam)`` is where the
operator is estimated and where solution quality is measured.  Each step of
either method makes exactly one estimator call and one resolvent call.

Solver instances are single-threaded; the harness parallelizes across runs,
each with its own solver, estimator state and seeded generator stream.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import ConfigurationError, GeProblem, SplitConstants, fbs_residual
from .data import RunTrace
from .estimators import EstimatorConfig, make_estimator

__all__ = [
    "AccelParams",
    "schedule_tk_etak",
    "ForwardBackwardAccel",
    "BackwardForwardAccel",
    "run_solver",
    "DIVERGENCE_NORM",
]

DIVERGENCE_NORM = 1e12


@dataclass(frozen=True)
class AccelParams:
    """Validated acceleration parameters; ``nu`` is pinned to ``mu / 2``."""

    mu: float
    r: float
    beta: float
    lam: float
    beta_bar: float
    nu: float = field(init=False)

    def __post_init__(self):
        if not 0.0 < self.mu < 2.0 / 3.0:
            raise ConfigurationError(f"require 0 < mu < 2/3, got mu = {self.mu:g}")
        if self.r < 2.0 + 1.0 / self.mu:
            raise ConfigurationError(
                f"require r >= 2 + 1/mu = {2.0 + 1.0 / self.mu:g}, got r = {self.r:g}"
            )
        beta_max = (2.0 - self.mu) * self.beta_bar / (2.0 + self.mu)
        if not 0.0 < self.beta <= beta_max:
            raise ConfigurationError(
                f"require 0 < beta <= (2-mu)*beta_bar/(2+mu) = {beta_max:g}, got beta = {self.beta:g}"
            )
        if not self.lam > 0.0:
            raise ConfigurationError(f"require lam > 0, got {self.lam:g}")
        object.__setattr__(self, "nu", self.mu / 2.0)

    @classmethod
    def from_constants(
        cls,
        constants: SplitConstants,
        mu: float = 0.95 * 2.0 / 3.0,
        r: Optional[float] = None,
        beta_scale: float = 1.0,
    ) -> "AccelParams":
        """Standard parameterization: ``r = 2 + 1/mu`` and ``beta`` at
        ``beta_scale`` times its admissible maximum."""
        if r is None:
            r = 2.0 + 1.0 / mu
        beta = beta_scale * (2.0 - mu) * constants.beta_bar / (2.0 + mu)
        return cls(mu=mu, r=r, beta=beta, lam=constants.lam, beta_bar=constants.beta_bar)


def schedule_tk_etak(params: AccelParams, k: int) -> tuple:
    """Momentum/step pair ``(t_k, eta_k)`` at iteration ``k``."""
    t_k = params.mu * (k + params.r)
    eta_k = 2.0 * params.beta * (t_k - 1.0) / (t_k - params.nu)
    return t_k, eta_k


class ForwardBackwardAccel:
    """Momentum forward-backward iteration driven by an operator estimator."""

    name = "afbs"

    def __init__(
        self,
        problem: GeProblem,
        params: AccelParams,
        estimator_config: EstimatorConfig,
        x0: np.ndarray,
    ):
        problem._check_dim("x0", x0)
        self.problem = problem
        self.params = params
        self.estimator = make_estimator(problem, estimator_config)
        self.x0 = np.array(x0, dtype=float)
        self.x = self.x0.copy()
        self.z = self.x.copy()
        self.x_prev = self.x.copy()
        self.k = 0
        self.resolvent_calls = 0
        # Inputs of the most recent step, kept for the estimator-error probe.
        self.last_input_x: Optional[np.ndarray] = None
        self.last_f_estimate: Optional[np.ndarray] = None
        self.last_residual_estimate: Optional[np.ndarray] = None

    @property
    def oracle_calls(self) -> int:
        return self.estimator.oracle_calls

    def report_point(self) -> np.ndarray:
        return self.x

    def step(self, rng: np.random.Generator) -> None:
        p = self.params
        f_est = self.estimator.estimate(self.k, self.x, self.x_prev, rng)
        t_k, eta_k = schedule_tk_etak(p, self.k)
        w = self.problem.resolvent(self.x - p.lam * f_est, p.lam)
        self.resolvent_calls += 1
        g_est = (self.x - w) / p.lam
        y = ((t_k - 1.0) / t_k) * self.x + (1.0 / t_k) * self.z
        x_next = y - eta_k * g_est
        self.z = self.z + p.nu * (x_next - y)
        self.last_input_x = self.x
        self.last_f_estimate = f_est
        self.last_residual_estimate = g_est
        self.x_prev = self.x
        self.x = x_next
        self.k += 1

    def last_errors(self, f_exact: np.ndarray) -> tuple:
        """Estimator error and residual-estimate error of the latest step."""
        f_err = float(np.linalg.norm(self.last_f_estimate - f_exact))
        g_exact = fbs_residual(self.problem, self.last_input_x, self.params.lam, f_exact)
        g_err = float(np.linalg.norm(self.last_residual_estimate - g_exact))
        return f_err, g_err


class BackwardForwardAccel:
    """Momentum backward-forward iteration; the operator is estimated at the
    shadow point ``J(u_k, lam)``.

    ``u0 = x0 + lam * xi0`` for any ``xi0`` in ``T(x0)``; the default
    ``xi0 = 0`` is valid whenever ``0 in T(x0)`` (e.g. interior starts).
    """

    name = "abfs"

    def __init__(
        self,
        problem: GeProblem,
        params: AccelParams,
        estimator_config: EstimatorConfig,
        x0: np.ndarray,
        xi0: Optional[np.ndarray] = None,
    ):
        problem._check_dim("x0", x0)
        self.problem = problem
        self.params = params
        self.estimator = make_estimator(problem, estimator_config)
        self.x0 = np.array(x0, dtype=float)
        if xi0 is None:
            self.u = self.x0.copy()
        else:
            problem._check_dim("xi0", xi0)
            self.u = self.x0 + params.lam * np.asarray(xi0, dtype=float)
        self.s = self.u.copy()
        self.shadow_prev: Optional[np.ndarray] = None
        self.k = 0
        self.resolvent_calls = 0
        self.last_input_x: Optional[np.ndarray] = None
        self.last_f_estimate: Optional[np.ndarray] = None
        self.last_residual_estimate: Optional[np.ndarray] = None

    @property
    def oracle_calls(self) -> int:
        return self.estimator.oracle_calls

    def report_point(self) -> np.ndarray:
        # Shadow of the current u; measurement only, not counted.
        return self.problem.resolvent(self.u, self.params.lam)

    def step(self, rng: np.random.Generator) -> None:
        p = self.params
        shadow = self.problem.resolvent(self.u, p.lam)
        self.resolvent_calls += 1
        if self.shadow_prev is None:
            self.shadow_prev = shadow
        f_est = self.estimator.estimate(self.k, shadow, self.shadow_prev, rng)
        t_k, eta_k = schedule_tk_etak(p, self.k)
        v = ((t_k - 1.0) / t_k) * self.u + (1.0 / t_k) * self.s
        u_next = v - (eta_k / p.lam) * (self.u - shadow) - eta_k * f_est
        self.s = self.s + p.nu * (u_next - v)
        self.last_input_x = shadow
        self.last_f_estimate = f_est
        # Estimated backward-forward residual at u_k.
        self.last_residual_estimate = f_est + (self.u - shadow) / p.lam
        self.shadow_prev = shadow
        self.u = u_next
        self.k += 1

    def last_errors(self, f_exact: np.ndarray) -> tuple:
        """Both errors coincide here: the estimated and exact backward-forward
        residuals at ``u_k`` differ exactly by the estimator error."""
        f_err = float(np.linalg.norm(self.last_f_estimate - f_exact))
        return f_err, f_err


def run_solver(
    problem: GeProblem,
    solver,
    budget_epochs: float,
    seed: int,
    metric_stride: Optional[int] = None,
    metric_lambda: Optional[float] = None,
    rng: Optional[np.random.Generator] = None,
    debug: bool = False,
    metadata: Optional[dict] = None,
) -> RunTrace:
    """Drive ``solver`` for ``budget_epochs`` epochs and record a trace.

    One epoch is ``n_components`` component-oracle units.  Rows are appended
    whenever the solver's oracle counter crosses the next ``metric_stride``
    mark (default: one epoch).  The recorded metric is the relative
    forward-backward residual at the solver's report point, evaluated with
    the exact operator; these measurement evaluations are not charged to the
    oracle counter.  A non-finite or exploding iterate aborts the run and
    sets ``metadata["diverged"]``.

    With ``debug=True`` the trace carries, per measured step, the exact
    estimator error ``||Fest - F||`` and residual-estimate error
    ``||Gest - G||`` at the step's input point.
    """
    if budget_epochs < 0:
        raise ConfigurationError("budget_epochs must be nonnegative")
    n = problem.n_components
    stride = n if metric_stride is None else int(metric_stride)
    if stride < 1:
        raise ConfigurationError("metric_stride must be at least one oracle unit")
    lam_metric = metric_lambda
    if lam_metric is None:
        lam_metric = getattr(getattr(solver, "params", None), "lam", None)
    if lam_metric is None:
        lam_metric = 1.0 / problem.lipschitz_L
    if rng is None:
        rng = np.random.default_rng(np.random.SeedSequence(seed))

    trace = RunTrace(metadata={"seed": seed, "method": getattr(solver, "name", ""), **(metadata or {})})
    if debug:
        trace.debug = {"f_err": [], "g_err": [], "k": []}

    def exact_rel(point: np.ndarray, denom: float) -> float:
        g = fbs_residual(problem, point, lam_metric, problem.full_F(point))
        return float(np.linalg.norm(g)) / denom

    # The normalization point is the method's raw x0, shared across methods
    # of one experiment (for shadow-point methods the report point differs).
    point0 = getattr(solver, "x0", None)
    if point0 is None:
        point0 = solver.report_point()
    g0 = fbs_residual(problem, point0, lam_metric, problem.full_F(point0))
    denom = float(np.linalg.norm(g0))
    if denom == 0.0:
        denom = 1.0
    start = time.perf_counter()
    trace.append(0, 0.0, 1.0, 0.0)

    budget_units = budget_epochs * n
    next_mark = stride
    while solver.oracle_calls < budget_units:
        solver.step(rng)
        state = solver.x if hasattr(solver, "x") else solver.u
        if not np.all(np.isfinite(state)) or np.linalg.norm(state) > DIVERGENCE_NORM:
            trace.metadata["diverged"] = True
            break
        units = solver.oracle_calls
        if units >= next_mark:
            point = solver.report_point()
            wall = (time.perf_counter() - start) * 1e3
            trace.append(units, units / n, exact_rel(point, denom), wall)
            next_mark = (units // stride + 1) * stride
            if debug and solver.last_f_estimate is not None:
                f_exact = problem.full_F(solver.last_input_x)
                f_err, g_err = solver.last_errors(f_exact)
                trace.debug["f_err"].append(f_err)
                trace.debug["g_err"].append(g_err)
                trace.debug["k"].append(solver.k - 1)
    return trace

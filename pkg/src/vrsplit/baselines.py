"""Comparison methods run against the accelerated splitting solvers.

The benchmark cites only step sizes for these schemes, so the exact single
loop recursions implemented here are documented below; all share the solver
interface (``step``/``report_point``/``oracle_calls``) of
:mod:`vrsplit.solvers`.

``og`` — optimistic gradient (past extragradient).  Deterministic::

    x_{k+1} = J(x_k - eta * (2 F(x_k) - F(x_{k-1})), eta),   F(x_{-1}) := F(x_0)

One fresh operator evaluation per iteration; default ``eta = 1/L``.

``fkm`` — fast Krasnosel'skii-Mann: the anchored (Halpern-weight) accelerated
fixed-point iteration on the forward-backward map ``P(x) = J(x - eta*F(x), eta)``::

    x_{k+1} = (1/(k+2)) x_0 + ((k+1)/(k+2)) P(x_k)

Deterministic, ``eta = 1/L``; this anchored form attains the accelerated
O(1/k) residual rate for nonexpansive maps.

``vr_halpern`` — stochastic anchored iteration with a recursive (sarah-type)
estimator ``Fest_k``::

    w_k     = J(x_k - eta * Fest_k, eta)
    x_{k+1} = lam_k x_0 + (1 - lam_k) w_k,      lam_k = 2/(k+4)

Defaults: ``eta = 1/(2L)`` (logistic experiments) or ``1/(4L)`` (matrix
games); estimator preset ``p = 1/(2 sqrt(n))``, ``b = floor(sqrt(n)/2)``.

``vr_eg`` — extragradient with loopless snapshot variance reduction, mixing
weight ``alpha = 1 - p``::

    zbar      = alpha * z_k + (1 - alpha) * w
    z_{k+1/2} = J(zbar - eta * F(w), eta)
    z_{k+1}   = J(zbar - eta * [F(w) + F_S(z_{k+1/2}) - F_S(w)], eta)
    w        <- z_{k+1} with probability p (full refresh of F(w))

Two stochastic operator evaluations per iteration; ``eta = 0.99*sqrt(p)/L``.

``vr_frbs`` — forward-reflected-backward with the same loopless snapshot::

    zbar    = alpha * z_k + (1 - alpha) * w
    Fest_k  = F(w) + F_S(z_k) - F_S(w)
    z_{k+1} = J(zbar - eta * (2 Fest_k - Fest_{k-1}), eta)
    w      <- z_{k+1} with probability p

``eta = 0.99 * (1 - sqrt(1 - p)) / (2L)``.
"""

from __future__ import annotations

import math
from typing import Optional

import numpy as np

from .core import ConfigurationError, GeProblem
from .estimators import EstimatorConfig, make_estimator

__all__ = [
    "OptimisticGradient",
    "AnchoredKM",
    "VrHalpern",
    "VrExtragradient",
    "VrForwardReflected",
]


class _BaselineBase:
    def __init__(self, problem: GeProblem, x0: np.ndarray):
        problem._check_dim("x0", x0)
        self.problem = problem
        self.x0 = np.array(x0, dtype=float)
        self.x = self.x0.copy()
        self.k = 0
        self.oracle_calls = 0
        self.resolvent_calls = 0

    def report_point(self) -> np.ndarray:
        return self.x

    def _full(self, x: np.ndarray) -> np.ndarray:
        self.oracle_calls += self.problem.n_components
        return self.problem.full_F(x)

    def _mean_batch(self, x: np.ndarray, idx: np.ndarray) -> np.ndarray:
        self.oracle_calls += idx.size
        return self.problem.component_batch(x, idx).mean(axis=0)

    def _resolvent(self, x: np.ndarray, lam: float) -> np.ndarray:
        self.resolvent_calls += 1
        return self.problem.resolvent(x, lam)


class OptimisticGradient(_BaselineBase):
    name = "og"

    def __init__(self, problem, x0, eta: Optional[float] = None):
        super().__init__(problem, x0)
        self.eta = 1.0 / problem.lipschitz_L if eta is None else float(eta)
        if not self.eta > 0:
            raise ConfigurationError("og step size must be positive")
        self.f_prev: Optional[np.ndarray] = None

    def step(self, rng) -> None:
        fx = self._full(self.x)
        if self.f_prev is None:
            self.f_prev = fx
        self.x = self._resolvent(self.x - self.eta * (2.0 * fx - self.f_prev), self.eta)
        self.f_prev = fx
        self.k += 1


class AnchoredKM(_BaselineBase):
    name = "fkm"

    def __init__(self, problem, x0, eta: Optional[float] = None):
        super().__init__(problem, x0)
        self.eta = 1.0 / problem.lipschitz_L if eta is None else float(eta)
        if not self.eta > 0:
            raise ConfigurationError("fkm step size must be positive")
        self.anchor = self.x.copy()

    def step(self, rng) -> None:
        px = self._resolvent(self.x - self.eta * self._full(self.x), self.eta)
        beta_k = 1.0 / (self.k + 2.0)
        self.x = beta_k * self.anchor + (1.0 - beta_k) * px
        self.k += 1


class VrHalpern(_BaselineBase):
    name = "vr_halpern"

    def __init__(
        self,
        problem,
        x0,
        estimator_config: EstimatorConfig,
        eta: Optional[float] = None,
    ):
        super().__init__(problem, x0)
        self.eta = 1.0 / (2.0 * problem.lipschitz_L) if eta is None else float(eta)
        if not self.eta > 0:
            raise ConfigurationError("vr_halpern step size must be positive")
        self.anchor = self.x.copy()
        self.x_prev = self.x.copy()
        self.estimator = make_estimator(problem, estimator_config)

    def step(self, rng) -> None:
        f_est = self.estimator.estimate(self.k, self.x, self.x_prev, rng)
        w = self._resolvent(self.x - self.eta * f_est, self.eta)
        lam_k = 2.0 / (self.k + 4.0)
        self.x_prev = self.x
        self.x = lam_k * self.anchor + (1.0 - lam_k) * w
        self.oracle_calls = self.estimator.oracle_calls
        self.k += 1


class VrExtragradient(_BaselineBase):
    name = "vr_eg"

    def __init__(
        self,
        problem,
        x0,
        batch_size: int,
        prob: float,
        eta: Optional[float] = None,
    ):
        super().__init__(problem, x0)
        if not 0.0 < prob <= 1.0:
            raise ConfigurationError("vr_eg snapshot probability must lie in (0, 1]")
        self.prob = float(prob)
        self.batch_size = max(1, min(int(batch_size), problem.n_components))
        self.eta = 0.99 * math.sqrt(self.prob) / problem.lipschitz_L if eta is None else float(eta)
        if not self.eta > 0:
            raise ConfigurationError("vr_eg step size must be positive")
        self.alpha = 1.0 - self.prob
        self.snapshot = self.x.copy()
        self.f_snapshot: Optional[np.ndarray] = None

    def step(self, rng) -> None:
        if self.f_snapshot is None:
            self.f_snapshot = self._full(self.snapshot)
        zbar = self.alpha * self.x + (1.0 - self.alpha) * self.snapshot
        z_half = self._resolvent(zbar - self.eta * self.f_snapshot, self.eta)
        idx = rng.integers(0, self.problem.n_components, size=self.batch_size)
        f_est = self.f_snapshot + (
            self._mean_batch(z_half, idx) - self._mean_batch(self.snapshot, idx)
        )
        self.x = self._resolvent(zbar - self.eta * f_est, self.eta)
        if rng.random() < self.prob:
            self.snapshot = self.x.copy()
            self.f_snapshot = self._full(self.snapshot)
        self.k += 1


class VrForwardReflected(_BaselineBase):
    name = "vr_frbs"

    def __init__(
        self,
        problem,
        x0,
        batch_size: int,
        prob: float,
        eta: Optional[float] = None,
    ):
        super().__init__(problem, x0)
        if not 0.0 < prob <= 1.0:
            raise ConfigurationError("vr_frbs snapshot probability must lie in (0, 1]")
        self.prob = float(prob)
        self.batch_size = max(1, min(int(batch_size), problem.n_components))
        if eta is None:
            eta = 0.99 * (1.0 - math.sqrt(1.0 - self.prob)) / (2.0 * problem.lipschitz_L)
        self.eta = float(eta)
        if not self.eta > 0:
            raise ConfigurationError("vr_frbs step size must be positive")
        self.alpha = 1.0 - self.prob
        self.snapshot = self.x.copy()
        self.f_snapshot: Optional[np.ndarray] = None
        self.f_est_prev: Optional[np.ndarray] = None

    def step(self, rng) -> None:
        if self.f_snapshot is None:
            self.f_snapshot = self._full(self.snapshot)
            self.f_est_prev = self.f_snapshot
        zbar = self.alpha * self.x + (1.0 - self.alpha) * self.snapshot
        idx = rng.integers(0, self.problem.n_components, size=self.batch_size)
        f_est = self.f_snapshot + (
            self._mean_batch(self.x, idx) - self._mean_batch(self.snapshot, idx)
        )
        self.x = self._resolvent(zbar - self.eta * (2.0 * f_est - self.f_est_prev), self.eta)
        self.f_est_prev = f_est
        if rng.random() < self.prob:
            self.snapshot = self.x.copy()
            self.f_snapshot = self._full(self.snapshot)
        self.k += 1

"""Variance-reduced operator estimators behind one interface.

Five kinds are available, all estimating the full operator value ``F(x_k)``
from component evaluations:

* ``full_batch`` — exact average, ``n`` component calls per step;
* ``lsvrg``      — loopless snapshot estimator: snapshot mean plus a minibatch
  correction, snapshot refreshed to the previous iterate with probability
  ``p_k`` (refresh drawn before the estimate);
* ``saga``       — running table of per-component values; the estimate uses
  the pre-update table rows and rows drawn this step are overwritten with the
  freshly computed component values, so each row always holds the component
  at the iterate where it was last sampled;
* ``lsarah``     — recursive difference estimator, restarted from a full pass
  with probability ``p_k``;
* ``hsgd``       — convex combination ``(1-tau_k)*[recursive] + tau_k*[plain
  minibatch]`` sharing one sample; ``tau_k = 0`` reproduces ``lsarah`` (with
  ``p_k = 0``) bitwise under a shared RNG stream, ``tau_k = 1`` gives the
  plain minibatch average.

Minibatches are i.i.d. uniform **with replacement**.  Per step each estimator
draws, in order: the refresh/restart Bernoulli (only when ``p_k > 0``), then
the batch indices.  Oracle accounting is exact: the counter advances by one
per component evaluation (2*b for lsvrg/lsarah/hsgd steps, b for saga, plus
``n`` whenever a full pass happens).  An epoch is ``n`` counter units.

In the expectation setting set ``mega_batch``: full passes are then replaced
by averages over that many fresh component draws.

Estimator state is single-writer (one solver loop); run distinct estimator
instances for concurrent runs.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from typing import Callable, Optional, Union

import numpy as np

from .core import ConfigurationError, GeProblem

__all__ = [
    "EstimatorConfig",
    "EPS_PROB",
    "make_estimator",
    "build_schedule",
    "hsgd_tau_schedule",
    "ESTIMATOR_KINDS",
]

EPS_PROB = 1e-6

ESTIMATOR_KINDS = ("full_batch", "lsvrg", "saga", "lsarah", "hsgd")

Schedule = Union[int, float, Callable[[int], float]]


def _eval(schedule: Schedule, k: int) -> float:
    return schedule(k) if callable(schedule) else schedule


@dataclass(frozen=True)
class EstimatorConfig:
    """Parameters of one estimator; schedules may be constants or ``f(k)``."""

    kind: str
    batch_size: Schedule = 1
    prob: Schedule = 0.0
    tau: Optional[Schedule] = None
    theta: Optional[float] = None
    alpha: float = 0.5
    mega_batch: Optional[Schedule] = None
    label: str = ""

    def __post_init__(self):
        if self.kind not in ESTIMATOR_KINDS:
            raise ConfigurationError(f"unknown estimator kind {self.kind!r}")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigurationError("alpha must lie in (0, 1)")

    def batch_at(self, k: int, n: int) -> int:
        b = int(_eval(self.batch_size, k))
        return min(max(b, 1), n)

    def prob_at(self, k: int) -> float:
        p = float(_eval(self.prob, k))
        if p <= 0.0:
            return 0.0
        return min(max(p, EPS_PROB), 1.0)

    def tau_at(self, k: int) -> float:
        if self.tau is None:
            raise ConfigurationError("hsgd estimator needs a tau schedule")
        t = float(_eval(self.tau, k))
        return min(max(t, 0.0), 1.0)

    def scaled(self, b_scale: float = 1.0, p_scale: float = 1.0) -> "EstimatorConfig":
        """Return a copy with batch sizes and probabilities rescaled."""
        bs, pr = self.batch_size, self.prob
        new_b = (lambda k, _f=bs: _f(k) * b_scale) if callable(bs) else bs * b_scale
        new_p = (lambda k, _f=pr: _f(k) * p_scale) if callable(pr) else pr * p_scale
        return replace(self, batch_size=new_b, prob=new_p)


def hsgd_tau_schedule(theta: float, mu: float, r: float) -> Callable[[int], float]:
    """Mixing weights ``tau_k = 1 - sqrt((1-theta) t_{k-1}(t_{k-1}-1) / (t_k(t_k-1)))``
    for the acceleration sequence ``t_k = mu*(k + r)``."""
    if not 0.0 < theta <= 1.0:
        raise ConfigurationError("theta must lie in (0, 1]")

    def tau(k: int) -> float:
        t_prev = mu * (k - 1 + r)
        t_cur = mu * (k + r)
        return 1.0 - math.sqrt((1.0 - theta) * t_prev * (t_prev - 1.0) / (t_cur * (t_cur - 1.0)))

    return tau


class _EstimatorBase:
    """Shared bookkeeping: oracle accounting and batch/full evaluations."""

    def __init__(self, problem: GeProblem, config: EstimatorConfig):
        self.problem = problem
        self.config = config
        self.oracle_calls = 0
        self.n_estimates = 0
        self.n = problem.n_components
        self.last_estimate: Optional[np.ndarray] = None

    def _mean_batch(self, x: np.ndarray, idx: np.ndarray) -> np.ndarray:
        self.oracle_calls += idx.size
        return self.problem.component_batch(x, idx).mean(axis=0)

    def _full(self, x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
        if self.config.mega_batch is not None:
            m = max(int(_eval(self.config.mega_batch, k)), 1)
            idx = rng.integers(0, self.n, size=m)
            return self._mean_batch(x, idx)
        self.oracle_calls += self.n
        return self.problem.full_F(x)

    def _draw_batch(self, k: int, rng: np.random.Generator) -> np.ndarray:
        b = self.config.batch_at(k, self.n)
        if b >= self.n:
            # A with-replacement draw of size n is dominated by the exact full
            # batch at identical cost; also makes b = n estimates exact.
            return np.arange(self.n, dtype=np.int64)
        return rng.integers(0, self.n, size=b)

    def estimate(
        self, k: int, x: np.ndarray, x_prev: np.ndarray, rng: np.random.Generator
    ) -> np.ndarray:
        est = self._estimate(k, x, x_prev, rng)
        self.last_estimate = est
        self.n_estimates += 1
        return est

    def _estimate(self, k, x, x_prev, rng):  # pragma: no cover - abstract
        raise NotImplementedError


class _FullBatch(_EstimatorBase):
    def _estimate(self, k, x, x_prev, rng):
        self.oracle_calls += self.n
        return self.problem.full_F(x)


class _LoopslessSvrg(_EstimatorBase):
    def __init__(self, problem, config):
        super().__init__(problem, config)
        self.snapshot_x: Optional[np.ndarray] = None
        self.snapshot_mean: Optional[np.ndarray] = None

    def _estimate(self, k, x, x_prev, rng):
        if self.snapshot_mean is None:
            if k != 0:
                raise ConfigurationError("estimator used at k > 0 without initialization")
            self.snapshot_x = np.array(x, copy=True)
            self.snapshot_mean = self._full(x, k, rng)
            # Minibatch terms cancel exactly when the iterate is the snapshot.
            return self.snapshot_mean.copy()
        p = self.config.prob_at(k)
        if p > 0.0 and rng.random() < p:
            self.snapshot_x = np.array(x_prev, copy=True)
            self.snapshot_mean = self._full(self.snapshot_x, k, rng)
        idx = self._draw_batch(k, rng)
        return self.snapshot_mean + (self._mean_batch(x, idx) - self._mean_batch(self.snapshot_x, idx))


class _Saga(_EstimatorBase):
    def __init__(self, problem, config):
        super().__init__(problem, config)
        self.table: Optional[np.ndarray] = None
        self.table_mean: Optional[np.ndarray] = None

    def _estimate(self, k, x, x_prev, rng):
        if self.config.mega_batch is not None:
            raise ConfigurationError("saga is a finite-sum estimator; mega_batch unsupported")
        if self.table is None:
            if k != 0:
                raise ConfigurationError("estimator used at k > 0 without initialization")
            self.oracle_calls += self.n
            self.table = np.array(
                self.problem.component_batch(x, np.arange(self.n)), copy=True
            )
            self.table_mean = self.table.mean(axis=0)
            return self.table_mean.copy()
        idx = self._draw_batch(k, rng)
        self.oracle_calls += idx.size
        vals = self.problem.component_batch(x, idx)
        est = self.table_mean + (vals.mean(axis=0) - self.table[idx].mean(axis=0))
        # Overwrite sampled rows with the values just computed; duplicates in
        # the with-replacement draw carry identical values, so first wins.
        uniq, first = np.unique(idx, return_index=True)
        self.table_mean = self.table_mean + (vals[first] - self.table[uniq]).sum(axis=0) / self.n
        self.table[uniq] = vals[first]
        return est


class _LoopslessSarah(_EstimatorBase):
    def __init__(self, problem, config):
        super().__init__(problem, config)
        self.running: Optional[np.ndarray] = None

    def _recursive_step(self, k, x, x_prev, rng):
        idx = self._draw_batch(k, rng)
        diff = self._mean_batch(x, idx) - self._mean_batch(x_prev, idx)
        return self.running + diff

    def _estimate(self, k, x, x_prev, rng):
        if self.running is None:
            if k != 0:
                raise ConfigurationError("estimator used at k > 0 without initialization")
            self.running = self._full(x, k, rng)
            return self.running.copy()
        p = self.config.prob_at(k)
        if p > 0.0 and rng.random() < p:
            self.running = self._full(x, k, rng)
        else:
            self.running = self._recursive_step(k, x, x_prev, rng)
        return self.running.copy()


class _HybridSgd(_LoopslessSarah):
    def _estimate(self, k, x, x_prev, rng):
        if self.running is None:
            if k != 0:
                raise ConfigurationError("estimator used at k > 0 without initialization")
            self.running = self._full(x, k, rng)
            return self.running.copy()
        tau = self.config.tau_at(k)
        if tau == 0.0:
            # Exact sarah reduction, shared code path for bitwise equality.
            self.running = self._recursive_step(k, x, x_prev, rng)
            return self.running.copy()
        idx = self._draw_batch(k, rng)
        fx = self._mean_batch(x, idx)
        if tau == 1.0:
            self.running = fx
            return fx.copy()
        fprev = self._mean_batch(x_prev, idx)
        self.running = (1.0 - tau) * (self.running + (fx - fprev)) + tau * fx
        return self.running.copy()


_KIND_MAP = {
    "full_batch": _FullBatch,
    "lsvrg": _LoopslessSvrg,
    "saga": _Saga,
    "lsarah": _LoopslessSarah,
    "hsgd": _HybridSgd,
}


def make_estimator(problem: GeProblem, config: EstimatorConfig) -> _EstimatorBase:
    """Instantiate the estimator named by ``config.kind`` for ``problem``."""
    return _KIND_MAP[config.kind](problem, config)


# ---------------------------------------------------------------------------
# Schedules
# ---------------------------------------------------------------------------

_DEFAULT_MU = 0.95 * 2.0 / 3.0


def _floor(x: float) -> int:
    # Tolerant floor: n**(2/3) style powers land a few ulps under integers.
    return int(math.floor(x + 1e-9))


def build_schedule(
    kind: str,
    n: int,
    omega: Optional[float] = None,
    constants: Optional[dict] = None,
    flavor: str = "practical",
) -> EstimatorConfig:
    """Batch/probability schedules for each estimator kind.

    ``flavor="practical"`` returns the benchmark presets::

        lsvrg:  p = 1/(2 n^{1/3}),  b = floor(n^{2/3} / 2)
        saga:   b = floor(n^{2/3} / 2)
        lsarah: p = 1/(2 sqrt(n)),  b = floor(sqrt(n) / 2)
        hsgd:   theta = 1/n,        b = floor(sqrt(n) / 2)

    ``flavor="theory"`` evaluates the published piecewise formulas with
    constants ``c_p``, ``c_b``, ``r``, ``mu`` (plus ``beta``/``Lambda`` to
    derive a default ``c_b``).  Batch sizes are clamped to ``[1, n]`` and
    probabilities to ``(1e-6, 1]``; ``n = 1`` degenerates to the
    deterministic ``b = 1``, ``p = 1`` case.  Violated lower bounds on
    ``n^omega`` warn instead of failing since the practical presets ignore
    them anyway.
    """
    if n < 1:
        raise ConfigurationError("n must be a positive integer")
    if kind == "full_batch":
        return EstimatorConfig(kind="full_batch", label="full_batch")
    c = dict(constants or {})
    mu = float(c.get("mu", _DEFAULT_MU))
    r = float(c.get("r", 2.0 + 1.0 / mu))

    if flavor == "practical":
        if n == 1:
            b, p = 1, 1.0
        elif kind == "lsvrg" or kind == "saga":
            b = max(1, min(n, _floor(n ** (2.0 / 3.0) / 2.0)))
            p = min(1.0, max(EPS_PROB, 1.0 / (2.0 * n ** (1.0 / 3.0))))
        else:  # lsarah, hsgd
            b = max(1, min(n, _floor(math.sqrt(n) / 2.0)))
            p = min(1.0, max(EPS_PROB, 1.0 / (2.0 * math.sqrt(n))))
        if kind == "lsvrg":
            return EstimatorConfig(kind, batch_size=b, prob=p, label="lsvrg")
        if kind == "saga":
            return EstimatorConfig(kind, batch_size=b, label="saga")
        if kind == "lsarah":
            return EstimatorConfig(kind, batch_size=b, prob=p, label="lsarah")
        if kind == "hsgd":
            theta = float(c.get("theta", 1.0 / n))
            return EstimatorConfig(
                kind,
                batch_size=b,
                theta=theta,
                tau=hsgd_tau_schedule(theta, mu, r),
                label="hsgd",
            )
        raise ConfigurationError(f"unknown estimator kind {kind!r}")

    if flavor != "theory":
        raise ConfigurationError(f"unknown schedule flavor {flavor!r}")

    c_p = float(c.get("c_p", 1.0))
    beta = c.get("beta")
    Lam = c.get("Lambda")

    def _warn_bound(required: float, got: float, which: str):
        if got < required:
            warnings.warn(
                f"{kind} theory schedule: n^omega = {got:g} below the bound {required:g} ({which})",
                stacklevel=3,
            )

    if kind == "lsvrg":
        w = 1.0 / 3.0 if omega is None else float(omega)
        nw = n**w
        c_b = float(c.get("c_b", 5.0 * beta * c_p**2 / (mu * Lam) if beta and Lam else 1.0))
        _warn_bound(
            max((2 * mu * (r - 1) - 2) / max(mu * (r - 5) - 1, 1e-12), (mu * (r - 1) - 1) / (4 * mu)) / c_p,
            nw,
            "schedule admissibility bound",
        )
        k0 = math.floor(4.0 * c_p * nw - r + 1.0 + 1.0 / mu)
        b = max(1, min(n, _floor(c_b * n ** (2.0 * w))))

        def p_of_k(k: int) -> float:
            if k <= k0:
                return 2.0 / (c_p * nw) + 4.0 * mu / (mu * (k + r - 1.0) - 1.0)
            return 3.0 / (c_p * nw)

        return EstimatorConfig(kind, batch_size=b, prob=p_of_k, label="lsvrg_theory")

    if kind == "saga":
        c_b = float(c.get("c_b", 2.5 * math.sqrt(beta / (mu * Lam)) if beta and Lam else 1.0))
        n13 = n ** (1.0 / 3.0)
        _warn_bound(
            max(2 * c_b * (mu * (r - 1) - 1) / max(mu * (r - 5) - 1, 1e-12), (mu * (r - 1) - 1) / (4 * mu)),
            n13,
            "schedule admissibility bound",
        )
        k0 = math.floor(4.0 * n13 + 1.0 + 1.0 / mu - r)
        n23 = n ** (2.0 / 3.0)

        def b_of_k(k: int) -> float:
            if k <= k0:
                return 2.0 * c_b * n23 + 4.0 * mu * n / (mu * (k + r - 1.0) - 1.0)
            return 3.0 * c_b * n23

        return EstimatorConfig(kind, batch_size=b_of_k, label="saga_theory")

    if kind == "lsarah":
        w = 0.5 if omega is None else float(omega)
        nw = n**w
        c_b = float(c.get("c_b", 5.0 * beta * c_p / (mu * Lam) if beta and Lam else 1.0))
        _warn_bound(
            max((mu * (r - 1) - 1) / max(mu * (r - 3) - 1, 1e-12), (mu * (r - 1) - 1) / (2 * mu)) / c_p,
            nw,
            "schedule admissibility bound",
        )
        k0 = math.floor(2.0 * c_p * nw - r + 1.0 + 1.0 / mu)
        b = max(1, min(n, _floor(c_b * nw)))

        def p_of_k(k: int) -> float:
            if k <= k0:
                return 1.0 / (c_p * nw) + 2.0 * mu / (mu * (k + r - 1.0) - 1.0)
            return 2.0 / (c_p * nw)

        return EstimatorConfig(kind, batch_size=b, prob=p_of_k, label="lsarah_theory")

    if kind == "hsgd":
        theta = float(c.get("theta", 1.0 / n))
        b = max(1, min(n, _floor(float(c.get("b", math.sqrt(n) / 2.0)))))
        return EstimatorConfig(
            kind, batch_size=b, theta=theta, tau=hsgd_tau_schedule(theta, mu, r), label="hsgd_theory"
        )

    raise ConfigurationError(f"unknown estimator kind {kind!r}")

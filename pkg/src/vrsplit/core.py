"""Problem container, residual maps, step-size constants, assumption probes.

The library solves generalized equations ``0 in F(x) + T(x)`` where ``F`` is a
single-valued map given as an average of ``n`` components and ``T`` is set-valued
but accessed only through its resolvent ``J(x, lam) = (I + lam*T)^{-1}(x)``.
Two residual maps certify solutions:

* forward-backward residual ``G_lam(x) = (x - J(x - lam*F(x), lam)) / lam``,
  zero exactly at solutions;
* backward-forward residual ``S_lam(u) = F(J(u, lam)) + (u - J(u, lam)) / lam``,
  zero at ``u*`` with the solution recovered as ``x* = J(u*, lam)``.

All functions here are pure: identical inputs give bitwise-identical outputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

__all__ = [
    "ConfigurationError",
    "DimensionMismatch",
    "GeProblem",
    "SplitConstants",
    "fbs_residual",
    "bfs_residual",
    "compute_split_constants",
    "check_cocoercivity",
    "check_resolvent_nonexpansive",
    "CocoercivityReport",
    "NonexpansivenessReport",
    "sample_box",
]


class ConfigurationError(ValueError):
    """A parameter violates one of the method's admissibility conditions."""


class DimensionMismatch(ValueError):
    """Vector length does not match the problem dimension."""

    def __init__(self, what: str, expected: int, got: int):
        self.what = what
        self.expected = expected
        self.got = got
        super().__init__(f"{what}: expected length {expected}, got {got}")


@dataclass(frozen=True)
class GeProblem:
    """A generalized-equation instance ``0 in F(x) + T(x)``.

    ``component_batch(x, idx)`` returns the stacked component values
    ``F_i(x)`` for ``i`` in ``idx`` as an ``(len(idx), dim)`` array; the full
    operator is their average over all ``n_components`` indices.  The
    resolvent must be single-valued for every ``lam`` the solvers use
    (guaranteed when ``lam >= 2*cohypo_rho``).

    ``lipschitz_L`` is the constant of the averaged co-coercivity bound
    ``<F(x)-F(y), x-y> >= (1/(n L)) * sum_i ||F_i(x)-F_i(y)||^2`` and
    ``cohypo_rho`` the co-hypomonotonicity modulus of ``T`` (0 for monotone).
    Instances are immutable and safe to share across threads.
    """

    dim: int
    n_components: int
    component_batch: Callable[[np.ndarray, np.ndarray], np.ndarray]
    resolvent: Callable[[np.ndarray, float], np.ndarray]
    lipschitz_L: float
    cohypo_rho: float = 0.0
    full_operator: Optional[Callable[[np.ndarray], np.ndarray]] = None
    known_solution: Optional[np.ndarray] = None
    tag: str = ""

    def __post_init__(self):
        if self.dim < 1:
            raise ConfigurationError("dim must be a positive integer")
        if self.n_components < 1:
            raise ConfigurationError("n_components must be a positive integer")
        if not self.lipschitz_L > 0:
            raise ConfigurationError("lipschitz_L must be positive")
        if self.cohypo_rho < 0:
            raise ConfigurationError("cohypo_rho must be nonnegative")

    def full_F(self, x: np.ndarray) -> np.ndarray:
        """Exact operator value ``F(x)``, the average of all components."""
        self._check_dim("x", x)
        if self.full_operator is not None:
            return self.full_operator(x)
        idx = np.arange(self.n_components)
        return self.component_batch(x, idx).mean(axis=0)

    def _check_dim(self, what: str, x: np.ndarray) -> None:
        if x.shape != (self.dim,):
            raise DimensionMismatch(what, self.dim, int(np.size(x)))


def fbs_residual(
    problem: GeProblem, x: np.ndarray, lam: float, f_value: np.ndarray
) -> np.ndarray:
    """Forward-backward residual ``(x - J(x - lam*f_value, lam)) / lam``.

    ``f_value`` is ``F(x)`` for the exact residual or an estimate of it for
    the stochastic one; the two differ by at most ``||f_value - F(x)||`` in
    norm because the resolvent is nonexpansive.
    """
    if not lam > 0:
        raise ConfigurationError(f"lam must be positive, got {lam}")
    problem._check_dim("x", x)
    problem._check_dim("f_value", f_value)
    w = problem.resolvent(x - lam * f_value, lam)
    return (x - w) / lam


def bfs_residual(
    problem: GeProblem,
    u: np.ndarray,
    lam: float,
    shadow_x: np.ndarray,
    f_at_shadow: np.ndarray,
) -> np.ndarray:
    """Backward-forward residual ``f_at_shadow + (u - shadow_x) / lam``.

    ``shadow_x`` must be the precomputed resolvent ``J(u, lam)``; the second
    term ``(u - shadow_x)/lam`` is an element of ``T(shadow_x)``.
    """
    if not lam > 0:
        raise ConfigurationError(f"lam must be positive, got {lam}")
    problem._check_dim("u", u)
    problem._check_dim("shadow_x", shadow_x)
    problem._check_dim("f_at_shadow", f_at_shadow)
    return f_at_shadow + (u - shadow_x) / lam


@dataclass(frozen=True)
class SplitConstants:
    """Step-size constants of the splitting step.

    ``beta_bar = (lam*(4 - L_hat*lam) - 4*rho) / (4*(1 - rho*L_hat))`` is the
    co-coercivity-type modulus of the residual map ``G_lam`` and
    ``Lambda_gap = (L_hat - L)/(L*L_hat)`` the slack bought by over-estimating
    the operator constant ``L`` by ``L_hat``.
    """

    lam: float
    L_hat: float
    beta_bar: float
    Lambda_gap: float


def compute_split_constants(
    L: float,
    rho: float = 0.0,
    zeta: Optional[float] = None,
    lambda_override: Optional[float] = None,
) -> SplitConstants:
    """Derive ``(lam, L_hat, beta_bar, Lambda_gap)`` from ``L`` and ``rho``.

    ``L_hat = L + zeta`` with ``zeta`` defaulting to ``0.05*L``; ``lam``
    defaults to ``1/L_hat``.  Raises :class:`ConfigurationError` naming the
    violated inequality when ``L_hat*rho >= 1`` or ``lam`` falls outside
    ``[2*rho, 2*(1 + sqrt(1 - L_hat*rho))/L_hat)``.
    """
    if not L > 0:
        raise ConfigurationError("L must be positive")
    if rho < 0:
        raise ConfigurationError("rho must be nonnegative")
    if zeta is None:
        zeta = 0.05 * L
    if zeta < 0:
        raise ConfigurationError("zeta must be nonnegative")
    L_hat = L + zeta
    if L_hat * rho >= 1.0:
        raise ConfigurationError(
            f"require L_hat*rho < 1, got L_hat*rho = {L_hat * rho:g}"
        )
    lam = 1.0 / L_hat if lambda_override is None else float(lambda_override)
    lam_max = 2.0 * (1.0 + math.sqrt(1.0 - L_hat * rho)) / L_hat
    if lam < 2.0 * rho:
        raise ConfigurationError(f"require lam >= 2*rho, got lam = {lam:g} < {2 * rho:g}")
    if not lam < lam_max:
        raise ConfigurationError(
            f"require lam < 2*(1 + sqrt(1 - L_hat*rho))/L_hat = {lam_max:g}, got {lam:g}"
        )
    beta_bar = (lam * (4.0 - L_hat * lam) - 4.0 * rho) / (4.0 * (1.0 - rho * L_hat))
    Lambda_gap = (L_hat - L) / (L * L_hat)
    assert beta_bar >= 0.0 and Lambda_gap >= 0.0
    return SplitConstants(lam=lam, L_hat=L_hat, beta_bar=beta_bar, Lambda_gap=Lambda_gap)


def sample_box(rng: np.random.Generator, dim: int, radius: float) -> np.ndarray:
    """Componentwise-uniform sample in ``[-radius, radius]^dim``.

    The probes below sample here because benchmark iterates live near the
    origin after feature normalization.
    """
    return rng.uniform(-radius, radius, size=dim)


@dataclass(frozen=True)
class CocoercivityReport:
    min_margin: float
    pairs: int
    radius: float


@dataclass(frozen=True)
class NonexpansivenessReport:
    max_ratio: float
    pairs: int
    radius: float


def check_cocoercivity(
    problem: GeProblem,
    sample_pairs: int,
    rng_seed: int,
    radius: float = 1.0,
    feasible: bool = True,
) -> CocoercivityReport:
    """Sampled probe of averaged co-coercivity at the problem's constant ``L``.

    For random pairs ``(x, y)`` reports the minimum of
    ``<F(x)-F(y), x-y> - (1/(n L)) * sum_i ||F_i(x)-F_i(y)||^2``.
    A nonnegative minimum (up to roundoff) certifies the bound on the sample
    only; this is a report, never a hard gate.

    With ``feasible`` (the default) box samples are mapped through the
    resolvent at scale ``1/L`` before probing, confining the probe to the
    region solver iterates inhabit; saddle operators with constrained blocks
    are typically monotone only there.
    """
    rng = np.random.default_rng(rng_seed)
    n = problem.n_components
    idx = np.arange(n)
    inv_nL = 1.0 / (n * problem.lipschitz_L)
    lam = 1.0 / problem.lipschitz_L
    min_margin = math.inf
    for _ in range(sample_pairs):
        x = sample_box(rng, problem.dim, radius)
        y = sample_box(rng, problem.dim, radius)
        if feasible:
            x = problem.resolvent(x, lam)
            y = problem.resolvent(y, lam)
        cx = problem.component_batch(x, idx)
        cy = problem.component_batch(y, idx)
        lhs = float(np.dot(cx.mean(axis=0) - cy.mean(axis=0), x - y))
        rhs = inv_nL * float(np.sum((cx - cy) ** 2))
        min_margin = min(min_margin, lhs - rhs)
    return CocoercivityReport(min_margin=min_margin, pairs=sample_pairs, radius=radius)


def check_resolvent_nonexpansive(
    problem: GeProblem,
    lam: float,
    sample_pairs: int,
    rng_seed: int,
    radius: float = 1.0,
) -> NonexpansivenessReport:
    """Sampled probe of ``||J(x,lam) - J(y,lam)|| <= ||x - y||``.

    Meaningful for ``lam >= 2*cohypo_rho``; like
    :func:`check_cocoercivity` this only reports the worst sampled ratio.
    """
    if lam < 2.0 * problem.cohypo_rho:
        raise ConfigurationError(
            f"nonexpansiveness probe needs lam >= 2*rho = {2 * problem.cohypo_rho:g}"
        )
    rng = np.random.default_rng(rng_seed)
    max_ratio = 0.0
    for _ in range(sample_pairs):
        x = sample_box(rng, problem.dim, radius)
        y = sample_box(rng, problem.dim, radius)
        gap = float(np.linalg.norm(x - y))
        if gap < 1e-14:
            continue
        jx = problem.resolvent(x, lam)
        jy = problem.resolvent(y, lam)
        max_ratio = max(max_ratio, float(np.linalg.norm(jx - jy)) / gap)
    return NonexpansivenessReport(max_ratio=max_ratio, pairs=sample_pairs, radius=radius)

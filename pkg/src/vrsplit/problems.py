"""Constructors turning data into generalized-equation instances.

Three families:

* robust logistic regression with ambiguous features, a saddle problem on
  ``x = [u; v]`` with ``u`` the weights and ``v`` a simplex-constrained
  worst-case mixture over the ``p2`` feature copies;
* the policeman-vs-burglar matrix game on a pair of simplices, with payoff
  matrices sampled around a nominal wealth vector;
* synthetic linear instances ``F(x) = FF x + q``, ``T(x) = TT x + s`` with
  shared eigenbasis, used to exercise monotone and co-hypomonotone regimes
  with a directly solvable reference solution.
"""

from __future__ import annotations

import math
from typing import Optional, Sequence, Union

import numpy as np

from . import _kernels
from .core import ConfigurationError, GeProblem
from .data import SparseDataset
from .prox import Block, BlockResolvent

__all__ = [
    "build_logistic_minimax",
    "build_matrix_game",
    "build_synthetic_linear",
    "estimate_L",
    "top_singular_value_sq",
]


# ---------------------------------------------------------------------------
# Spectral norm estimation
# ---------------------------------------------------------------------------


def top_singular_value_sq(X: np.ndarray, tol: float = 1e-8, max_iter: int = 1000) -> float:
    """Largest eigenvalue of ``X^T X`` by power iteration (deterministic start)."""
    X = np.asarray(X, dtype=float)
    if X.size == 0 or not np.any(X):
        return 0.0
    p = X.shape[1]
    v = np.random.default_rng(0).normal(size=p)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(max_iter):
        w = X.T @ (X @ v)
        nrm = float(np.linalg.norm(w))
        if nrm == 0.0:
            return 0.0
        v_new = w / nrm
        lam_new = float(v_new @ (X.T @ (X @ v_new)))
        if abs(lam_new - lam) <= tol * max(abs(lam_new), 1.0):
            return lam_new
        lam, v = lam_new, v_new
    return lam


def estimate_L(source: Union[SparseDataset, np.ndarray]) -> float:
    """Smoothness proxy ``L = ||X^T X|| / 4`` of the logistic loss.

    ``source`` is the (preprocessed) dataset or a dense feature matrix.
    An all-zero matrix returns the floor ``1e-12``.
    """
    X = source.dense() if isinstance(source, SparseDataset) else np.asarray(source, dtype=float)
    lam_max = top_singular_value_sq(X)
    return max(0.25 * lam_max, 1e-12)


# ---------------------------------------------------------------------------
# Robust logistic regression with ambiguous features
# ---------------------------------------------------------------------------


def build_logistic_minimax(
    features: np.ndarray,
    labels: np.ndarray,
    reg_kind: str,
    reg_weight: float,
    lipschitz_L: Optional[float] = None,
    scad_a: float = 3.7,
    tag: str = "logistic_minimax",
) -> GeProblem:
    """Saddle operator of the worst-case logistic loss.

    ``features`` is the ``(n, p2, p1)`` ambiguous-feature tensor (build it
    with :func:`vrsplit.data.make_ambiguous`), ``labels`` in ``{0, 1}``.  The
    i-th component maps ``x = [u; v]`` to::

        [ sum_j v_j * l'(<X_ij, u>, y_i) * X_ij ;  -l(<X_i1, u>, y_i) ; ... ]

    with the numerically stable logistic loss ``l`` and its slope ``l'``.
    The set-valued part applies the regularizer's proximal map on the ``u``
    block (``l1`` at weight ``reg_weight``, or ``scad`` with the nonconvex
    modulus ``rho = scad_a - 1``) and projects the ``v`` block onto the
    simplex.
    """
    features = np.ascontiguousarray(features, dtype=float)
    labels = np.ascontiguousarray(labels, dtype=float)
    if features.ndim != 3:
        raise ConfigurationError("features must be an (n, p2, p1) tensor")
    n, p2, p1 = features.shape
    if labels.shape != (n,):
        raise ConfigurationError(f"labels must have shape ({n},)")
    dim = p1 + p2

    def component_batch(x: np.ndarray, idx: np.ndarray) -> np.ndarray:
        u = np.ascontiguousarray(x[:p1])
        v = np.ascontiguousarray(x[p1:])
        return _kernels.logistic_components(
            features, labels, u, v, np.ascontiguousarray(idx, dtype=np.int64)
        )

    def full_operator(x: np.ndarray) -> np.ndarray:
        return component_batch(x, np.arange(n, dtype=np.int64)).mean(axis=0)

    if reg_kind == "l1":
        u_block = Block(0, p1, "l1", weight=reg_weight)
    elif reg_kind == "scad":
        # SCAD is co-hypomonotone only locally (modulus scad_a - 1); runs are
        # parameterized as in the monotone case, so the problem carries rho=0
        # and no step-size gate is applied on the local modulus.
        u_block = Block(0, p1, "scad", weight=reg_weight, a=scad_a)
    else:
        raise ConfigurationError(f"unknown regularizer kind {reg_kind!r}")
    rho = 0.0
    resolvent = BlockResolvent(blocks=(u_block, Block(p1, p2, "simplex")), dim=dim)

    if lipschitz_L is None:
        lipschitz_L = estimate_L(features.reshape(n * p2, p1))
    return GeProblem(
        dim=dim,
        n_components=n,
        component_batch=component_batch,
        resolvent=resolvent,
        lipschitz_L=float(lipschitz_L),
        cohypo_rho=rho,
        full_operator=full_operator,
        tag=f"{tag}_{reg_kind}",
    )


# ---------------------------------------------------------------------------
# Matrix game (policeman vs burglar)
# ---------------------------------------------------------------------------


def build_matrix_game(
    p1: int,
    n_samples: int,
    rng: np.random.Generator,
    theta: float = 0.8,
    noise_sigma: float = math.sqrt(0.05),
    epsilon_reg: float = 1e-8,
    tag: str = "matrix_game",
) -> GeProblem:
    """Regularized saddle operator of the sampled two-person matrix game.

    Payoffs ``L_s[i, j] = w_s[i] * (1 - exp(-theta * |i - j|))`` with wealth
    draws ``w_s = |w_hat + noise_sigma * randn|`` around a nominal
    ``w_hat = |randn|``; the game matrix is their sample mean.  The operator
    is ``F(x) = [eps*u + L^T v; eps*v - L u]`` on ``x = [u; v]`` with both
    blocks simplex-constrained; components replace ``L`` by ``L_s``.  The
    tiny ``eps`` makes ``F`` strongly monotone by construction.
    """
    if p1 < 2:
        raise ConfigurationError("p1 must be at least 2")
    if n_samples < 1:
        raise ConfigurationError("n_samples must be at least 1")
    dist = np.abs(np.subtract.outer(np.arange(p1), np.arange(p1))).astype(float)
    M = 1.0 - np.exp(-theta * dist)  # zero diagonal, symmetric
    w_hat = np.abs(rng.normal(size=p1))
    W = np.abs(w_hat[None, :] + noise_sigma * rng.normal(size=(n_samples, p1)))
    w_mean = W.mean(axis=0)
    L_mean = w_mean[:, None] * M

    dim = 2 * p1
    eps = float(epsilon_reg)

    def component_batch(x: np.ndarray, idx: np.ndarray) -> np.ndarray:
        u = x[:p1]
        v = x[p1:]
        Wb = W[idx]  # (b, p1)
        out = np.empty((idx.size, dim))
        # L_s^T v = M^T (w_s * v) = (w_s * v) @ M  (M symmetric)
        out[:, :p1] = eps * u[None, :] + (Wb * v[None, :]) @ M
        out[:, p1:] = eps * v[None, :] - Wb * (M @ u)[None, :]
        return out

    def full_operator(x: np.ndarray) -> np.ndarray:
        u = x[:p1]
        v = x[p1:]
        return np.concatenate([eps * u + L_mean.T @ v, eps * v - L_mean @ u])

    resolvent = BlockResolvent(
        blocks=(Block(0, p1, "simplex"), Block(p1, p1, "simplex")), dim=dim
    )
    L = math.sqrt(top_singular_value_sq(L_mean)) + eps
    return GeProblem(
        dim=dim,
        n_components=n_samples,
        component_batch=component_batch,
        resolvent=resolvent,
        lipschitz_L=L,
        cohypo_rho=0.0,
        full_operator=full_operator,
        tag=tag,
    )


# ---------------------------------------------------------------------------
# Synthetic linear instances
# ---------------------------------------------------------------------------


def build_synthetic_linear(
    p: int,
    spectrum_F: Sequence[float],
    spectrum_T: Sequence[float],
    rho_target: Optional[float] = None,
    rng: Optional[np.random.Generator] = None,
    q: Optional[np.ndarray] = None,
    s: Optional[np.ndarray] = None,
    enforce_contraction: bool = True,
    basis: Optional[np.ndarray] = None,
    tag: str = "synthetic_linear",
) -> GeProblem:
    """Linear pair ``F(x) = FF x + q``, ``T(x) = TT x + s`` in a shared
    random eigenbasis.

    ``spectrum_F`` must be nonnegative (``FF`` symmetric PSD, so
    ``L = max(spectrum_F)``); ``spectrum_T`` is real with ``TT`` symmetric
    invertible, giving ``rho = max(0, -min(1 / t_i))``.  When ``rho_target``
    is set the ``T`` spectrum is rescaled to hit it exactly.  The reference
    solution of ``(FF + TT) x = -(q + s)`` is stored on the problem.  With
    ``enforce_contraction`` the constructor rejects ``L * rho >= 1``; disable
    it only for diagnostic instances exercising the residual identities.
    """
    f_eig = np.asarray(spectrum_F, dtype=float)
    t_eig = np.asarray(spectrum_T, dtype=float)
    if f_eig.shape != (p,) or t_eig.shape != (p,):
        raise ConfigurationError("spectra must have length p")
    if np.any(f_eig < 0):
        raise ConfigurationError("spectrum_F must be nonnegative (PSD forward part)")
    if np.any(t_eig == 0):
        raise ConfigurationError("spectrum_T must be invertible (no zero eigenvalue)")
    if rng is None:
        rng = np.random.default_rng(0)

    inv_t = 1.0 / t_eig
    rho = max(0.0, -float(inv_t.min()))
    if rho_target is not None:
        if rho_target < 0:
            raise ConfigurationError("rho_target must be nonnegative")
        if rho_target > 0 and rho == 0.0:
            raise ConfigurationError("rho_target > 0 needs a negative eigenvalue in spectrum_T")
        if rho_target == 0.0 and rho > 0.0:
            raise ConfigurationError("cannot reach rho_target = 0 with a nonmonotone spectrum_T")
        if rho > 0.0:
            t_eig = t_eig * (rho / rho_target)
            rho = rho_target

    L = float(f_eig.max())
    if L <= 0:
        raise ConfigurationError("spectrum_F must contain a positive eigenvalue")
    if enforce_contraction and L * rho >= 1.0:
        raise ConfigurationError(f"require L*rho < 1, got {L * rho:g}")

    if basis is None:
        # Random orthogonal basis via QR of a Gaussian matrix.
        Q, R = np.linalg.qr(rng.normal(size=(p, p)))
        Q = Q * np.sign(np.diag(R))[None, :]
    else:
        Q = np.asarray(basis, dtype=float)
        if Q.shape != (p, p) or not np.allclose(Q.T @ Q, np.eye(p), atol=1e-10):
            raise ConfigurationError("basis must be a p x p orthogonal matrix")
    q_vec = np.zeros(p) if q is None else np.asarray(q, dtype=float)
    s_vec = np.zeros(p) if s is None else np.asarray(s, dtype=float)

    sum_eig = f_eig + t_eig
    if np.any(sum_eig == 0):
        raise ConfigurationError("FF + TT is singular; shift a spectrum entry")
    rhs = -(q_vec + s_vec)
    x_star = Q @ ((Q.T @ rhs) / sum_eig)

    def full_operator(x: np.ndarray) -> np.ndarray:
        return Q @ (f_eig * (Q.T @ x)) + q_vec

    def component_batch(x: np.ndarray, idx: np.ndarray) -> np.ndarray:
        return np.tile(full_operator(x), (idx.size, 1))

    def resolvent(x: np.ndarray, lam: float) -> np.ndarray:
        denom = 1.0 + lam * t_eig
        if np.any(denom == 0.0):
            raise ConfigurationError(f"resolvent undefined at lam = {lam:g}")
        return Q @ ((Q.T @ (x - lam * s_vec)) / denom)

    return GeProblem(
        dim=p,
        n_components=1,
        component_batch=component_batch,
        resolvent=resolvent,
        lipschitz_L=L,
        cohypo_rho=rho,
        full_operator=full_operator,
        known_solution=x_star,
        tag=tag,
    )

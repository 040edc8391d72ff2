"""Hot numeric kernels, in numba and pure-numpy twin builds.

Selected at import by :mod:`vrsplit._backend`.  The three kernels here
dominate runtime in benchmark runs: the per-component oracle of the robust
logistic saddle problem, the piecewise SCAD proximal map, and Euclidean
projection onto the probability simplex.  Everything else in the package is
plain vectorized numpy.
"""

import numpy as np

from ._backend import USE_NUMBA

__all__ = [
    "logistic_components",
    "scad_prox_vec",
    "simplex_project_vec",
    "NUMPY_VARIANTS",
    "NUMBA_VARIANTS",
    "warm_up",
]


# ---------------------------------------------------------------------------
# numpy variants
# ---------------------------------------------------------------------------


def _logistic_components_numpy(X, labels, u, v, idx):
    # X: (n, p2, pf) feature copies, unit-norm rows plus bias column.
    # Output row b: [sum_j v_j * l'(tau_bj) * X_bj ; -l(tau_b1) ; ... ; -l(tau_bp2)]
    Xb = X[idx]
    tau = Xb @ u
    yb = labels[idx][:, None]
    e = np.exp(-np.abs(tau))
    sig = np.where(tau >= 0.0, 1.0 / (1.0 + e), e / (1.0 + e))
    loss = np.log1p(e) + np.maximum(tau, 0.0) - yb * tau
    coeff = v[None, :] * (sig - yb)
    out = np.empty((idx.size, X.shape[2] + X.shape[1]))
    out[:, : X.shape[2]] = np.einsum("bj,bjq->bq", coeff, Xb)
    out[:, X.shape[2] :] = -loss
    return out


def _scad_pen_numpy(t, w, a):
    mid = (2.0 * a * w * t - t * t - w * w) / (2.0 * (a - 1.0))
    return np.where(t <= w, w * t, np.where(t <= a * w, mid, w * w * (a + 1.0) / 2.0))


def _scad_prox_numpy(x, step, weight, a):
    # Candidate minimizers of 0.5*(t-x)^2 + step*SCAD(t) on the three pieces,
    # each clipped to its own region; ties resolved toward smaller magnitude
    # because candidates are scanned in increasing-|t| order with strict '<'.
    ax = np.abs(x)
    w = weight
    g = step
    cand_a = np.clip(ax - g * w, 0.0, w)
    cand_b = np.clip(((a - 1.0) * ax - g * a * w) / (a - 1.0 - g), w, a * w)
    cand_c = np.maximum(ax, a * w)

    def obj(t):
        d = t - ax
        return 0.5 * d * d + g * _scad_pen_numpy(t, w, a)

    best = cand_a
    best_obj = obj(cand_a)
    for cand in (cand_b, cand_c):
        o = obj(cand)
        better = o < best_obj
        best = np.where(better, cand, best)
        best_obj = np.where(better, o, best_obj)
    return np.sign(x) * best


def _simplex_project_numpy(v):
    n = v.size
    s = np.sort(v, kind="stable")[::-1]
    css = np.cumsum(s)
    cond = s * np.arange(1, n + 1) > css - 1.0
    rho = np.nonzero(cond)[0][-1]
    theta = (css[rho] - 1.0) / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


NUMPY_VARIANTS = {
    "logistic_components": _logistic_components_numpy,
    "scad_prox_vec": _scad_prox_numpy,
    "simplex_project_vec": _simplex_project_numpy,
}

# ---------------------------------------------------------------------------
# numba variants
# ---------------------------------------------------------------------------

NUMBA_VARIANTS = {}

if USE_NUMBA:
    from numba import njit

    @njit(cache=True)
    def _logistic_components_numba(X, labels, u, v, idx):
        b = idx.size
        p2 = X.shape[1]
        pf = X.shape[2]
        out = np.zeros((b, pf + p2))
        for bi in range(b):
            i = idx[bi]
            y = labels[i]
            for j in range(p2):
                tau = 0.0
                for q in range(pf):
                    tau += X[i, j, q] * u[q]
                e = np.exp(-abs(tau))
                if tau >= 0.0:
                    sig = 1.0 / (1.0 + e)
                else:
                    sig = e / (1.0 + e)
                mx = tau if tau > 0.0 else 0.0
                loss = np.log1p(e) + mx - y * tau
                c = v[j] * (sig - y)
                for q in range(pf):
                    out[bi, q] += c * X[i, j, q]
                out[bi, pf + j] = -loss
        return out

    @njit(cache=True)
    def _scad_pen_scalar(t, w, a):
        if t <= w:
            return w * t
        if t <= a * w:
            return (2.0 * a * w * t - t * t - w * w) / (2.0 * (a - 1.0))
        return w * w * (a + 1.0) / 2.0

    @njit(cache=True)
    def _scad_prox_numba(x, step, weight, a):
        w = weight
        g = step
        out = np.empty_like(x)
        for i in range(x.size):
            ax = abs(x[i])
            cand_a = min(max(ax - g * w, 0.0), w)
            cand_b = min(max(((a - 1.0) * ax - g * a * w) / (a - 1.0 - g), w), a * w)
            cand_c = max(ax, a * w)
            best = cand_a
            d = cand_a - ax
            best_obj = 0.5 * d * d + g * _scad_pen_scalar(cand_a, w, a)
            d = cand_b - ax
            o = 0.5 * d * d + g * _scad_pen_scalar(cand_b, w, a)
            if o < best_obj:
                best = cand_b
                best_obj = o
            d = cand_c - ax
            o = 0.5 * d * d + g * _scad_pen_scalar(cand_c, w, a)
            if o < best_obj:
                best = cand_c
            out[i] = best if x[i] > 0.0 else (-best if x[i] < 0.0 else 0.0)
        return out

    @njit(cache=True)
    def _simplex_project_numba(v):
        n = v.size
        s = np.sort(v)[::-1]
        css = 0.0
        theta = 0.0
        for i in range(n):
            css += s[i]
            if s[i] * (i + 1.0) > css - 1.0:
                theta = (css - 1.0) / (i + 1.0)
        out = np.empty_like(v)
        for i in range(n):
            d = v[i] - theta
            out[i] = d if d > 0.0 else 0.0
        return out

    NUMBA_VARIANTS = {
        "logistic_components": _logistic_components_numba,
        "scad_prox_vec": _scad_prox_numba,
        "simplex_project_vec": _simplex_project_numba,
    }

_ACTIVE = NUMBA_VARIANTS if USE_NUMBA else NUMPY_VARIANTS

logistic_components = _ACTIVE["logistic_components"]
scad_prox_vec = _ACTIVE["scad_prox_vec"]
simplex_project_vec = _ACTIVE["simplex_project_vec"]


def warm_up():
    """Trigger JIT compilation of the active kernels on tiny inputs."""
    X = np.ones((2, 2, 3))
    labels = np.array([0.0, 1.0])
    logistic_components(X, labels, np.ones(3), np.ones(2) / 2, np.array([0, 1]))
    scad_prox_vec(np.array([0.1, -0.4]), 0.5, 0.2, 3.7)
    simplex_project_vec(np.array([0.3, 0.9, -0.2]))

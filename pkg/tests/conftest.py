import numpy as np
import pytest

from vrsplit import _kernels, data, problems
from vrsplit.core import GeProblem


@pytest.fixture(scope="session", autouse=True)
def _warm_kernels():
    # Compile the jit kernels once up front so timed tests measure the
    # algorithms, not compilation.
    _kernels.warm_up()


@pytest.fixture(scope="session")
def logistic_desk():
    """The desk-scale robust logistic instance (n=500, p1=20, p2=5, l1)."""
    ds = data.make_synthetic_classification(500, 20, seed=2024).preprocess()
    rng = np.random.default_rng(np.random.SeedSequence([2024, 0]))
    tensor = data.make_ambiguous(ds, 5, 0.05, rng)
    return problems.build_logistic_minimax(tensor, ds.labels, "l1", 5e-3)


@pytest.fixture(scope="session")
def logistic_small():
    """A smaller logistic instance for per-iteration instrumented runs."""
    ds = data.make_synthetic_classification(200, 10, seed=7).preprocess()
    rng = np.random.default_rng(np.random.SeedSequence([7, 0]))
    tensor = data.make_ambiguous(ds, 3, 0.05, rng)
    return problems.build_logistic_minimax(tensor, ds.labels, "l1", 5e-3)


def identity_resolvent_problem(fmat, offset=None, n_split=1):
    """Finite-sum linear problem with T = 0 (identity resolvent).

    F(x) = A x + q split into components A_i x + q_i whose mean is (A, q).
    """
    fmat = np.atleast_2d(np.asarray(fmat, dtype=float))
    dim = fmat.shape[0]
    q = np.zeros(dim) if offset is None else np.asarray(offset, dtype=float)
    rng = np.random.default_rng(123)
    perturb_a = rng.normal(size=(n_split, dim, dim))
    perturb_a -= perturb_a.mean(axis=0)
    perturb_q = rng.normal(size=(n_split, dim))
    perturb_q -= perturb_q.mean(axis=0)
    mats = fmat[None] + (perturb_a if n_split > 1 else 0.0)
    offs = q[None] + (perturb_q if n_split > 1 else 0.0)

    def component_batch(x, idx):
        return np.stack([mats[i] @ x + offs[i] for i in idx])

    return GeProblem(
        dim=dim,
        n_components=n_split,
        component_batch=component_batch,
        resolvent=lambda x, lam: x,
        lipschitz_L=float(np.linalg.norm(fmat, 2)) or 1.0,
    )

"""Closed-form resolvents: soft threshold, SCAD, simplex projection, blocks.

These cover every set-valued term the benchmark problems use.  A
:class:`BlockResolvent` glues elementary resolvents over a partition of the
coordinates and is directly usable as the ``resolvent`` callable of a
:class:`~vrsplit.core.GeProblem`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from . import _kernels
from .core import ConfigurationError

__all__ = ["prox_l1", "prox_scad", "project_simplex", "Block", "BlockResolvent"]


def prox_l1(x: np.ndarray, threshold: float) -> np.ndarray:
    """Soft thresholding: ``sign(x_i) * max(|x_i| - threshold, 0)``."""
    if threshold < 0:
        raise ConfigurationError(f"l1 threshold must be nonnegative, got {threshold}")
    return np.sign(x) * np.maximum(np.abs(x) - threshold, 0.0)


def prox_scad(x: np.ndarray, step: float, weight: float, a: float = 3.7) -> np.ndarray:
    """Componentwise minimizer of ``0.5*(t - x_i)^2 + step*SCAD(t; weight, a)``.

    Evaluates the three candidate minimizers (soft-threshold, interpolation,
    identity region), each clipped to its region, and keeps the best by
    objective value; region-boundary ties resolve toward the smaller
    magnitude.  The comparison stays exact when ``step > a - 1`` turns the
    interpolation piece concave (its minimum moves to a region endpoint,
    which the clipped neighbors cover), so large resolvent scales such as
    ``step = 2*(a - 1)`` are fine.  The map is odd:
    ``prox(-x) == -prox(x)`` exactly.
    """
    if not a > 2.0:
        raise ConfigurationError(f"SCAD needs a > 2, got a = {a}")
    if not step > 0:
        raise ConfigurationError(f"SCAD prox step must be positive, got {step}")
    if weight < 0:
        raise ConfigurationError(f"SCAD weight must be nonnegative, got {weight}")
    if step == a - 1.0:
        # Exactly flat interpolation piece; nudge keeps the candidate finite
        # without moving the argmin (endpoints are covered by the neighbors).
        step = step * (1.0 + 1e-12)
    if weight == 0.0:
        return np.array(x, dtype=float, copy=True)
    return _kernels.scad_prox_vec(np.asarray(x, dtype=float), float(step), float(weight), float(a))


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto ``{w : w_i >= 0, sum w_i = 1}``.

    Sorted-cumulative-threshold method, O(p log p), stable sort for
    reproducibility.
    """
    v = np.asarray(v, dtype=float)
    if v.size == 0:
        raise ConfigurationError("cannot project an empty vector onto the simplex")
    return _kernels.simplex_project_vec(v)


@dataclass(frozen=True)
class Block:
    """One elementary resolvent acting on ``[offset, offset + length)``."""

    offset: int
    length: int
    kind: str  # identity | l1 | scad | simplex
    weight: Optional[float] = None
    a: float = 3.7

    def __post_init__(self):
        if self.kind not in ("identity", "l1", "scad", "simplex"):
            raise ConfigurationError(f"unknown block resolvent kind {self.kind!r}")
        if self.kind in ("l1", "scad") and self.weight is None:
            raise ConfigurationError(f"{self.kind} block needs a weight")
        if self.length < 1 or self.offset < 0:
            raise ConfigurationError("block offset/length out of range")


@dataclass(frozen=True)
class BlockResolvent:
    """Blockwise resolvent over a partition of the coordinates.

    For scale ``lam`` the l1 block soft-thresholds at ``lam * weight``, the
    SCAD block applies :func:`prox_scad` with step ``lam``, and the simplex
    block projects (indicator resolvents ignore ``lam``).
    """

    blocks: Tuple[Block, ...]
    dim: int

    def __post_init__(self):
        covered = np.zeros(self.dim, dtype=bool)
        for b in self.blocks:
            if b.offset + b.length > self.dim:
                raise ConfigurationError(
                    f"block [{b.offset}, {b.offset + b.length}) exceeds dim {self.dim}"
                )
            span = covered[b.offset : b.offset + b.length]
            if span.any():
                raise ConfigurationError("blocks overlap")
            covered[b.offset : b.offset + b.length] = True
        if not covered.all():
            raise ConfigurationError("blocks leave a gap: must partition [0, dim)")

    def __call__(self, x: np.ndarray, lam: float) -> np.ndarray:
        if not lam > 0:
            raise ConfigurationError(f"resolvent scale must be positive, got {lam}")
        out = np.empty_like(x, dtype=float)
        for b in self.blocks:
            seg = x[b.offset : b.offset + b.length]
            if b.kind == "identity":
                res = seg
            elif b.kind == "l1":
                res = prox_l1(seg, lam * b.weight)
            elif b.kind == "scad":
                res = prox_scad(seg, lam, b.weight, b.a)
            else:
                res = project_simplex(seg)
            out[b.offset : b.offset + b.length] = res
        return out

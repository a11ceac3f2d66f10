"""Binomial-weighted mean ergodic averaging.

Two settings share the dyadic weights C(n,k)/2^n.  For a Hilbert-space
contraction T, the weighted power average of a vector converges to its
projection onto the fixed space ker(T - I).  For a finite
measure-preserving permutation system, the weighted translate average of
a function converges to its orbit-wise conditional expectation; -inf
values (logarithms of zero weights) are absorbing.

The vector average is evaluated as n applications of (I + T)/2, which the
binomial theorem identifies with the weighted power sum.  The factored
form needs no weight table, contracts at every single step (so residuals
are non-increasing by construction), and vanishes identically for T = -I
at every n >= 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .binomial import (
    binomial_discrepancy,
    binomial_discrepancy_exact,
    binomial_weights,
    binomial_weights_exact,
    uniform_residue_sums,
)
from .crossed import (
    PermutationWeightOperator,
    as_log_weights,
    binomial_orbit_transform,
    conditional_expectation,
    orbit_residue_transform,
)
from .operators import InvalidOperatorError, as_operator, default_rank_tol, op_norm

__all__ = [
    "AveragingReport",
    "ContractionViolation",
    "binomial_average",
    "binomial_discrepancy",
    "binomial_discrepancy_exact",
    "binomial_weights",
    "binomial_weights_exact",
    "cesaro_average",
    "fixed_space_projection",
    "functional_binomial_average",
]

# How far above 1 the operator norm may sit before the contraction
# precondition is considered violated.
CONTRACTION_SLACK = 1e-10
# Deviation threshold used for the measure-of-error residual when the
# averaged function takes -inf values.
DEFAULT_DEVIATION_EPS = 1e-6


class ContractionViolation(InvalidOperatorError):
    """The averaging theorems require an operator of norm at most 1."""


@dataclass(frozen=True)
class AveragingReport:
    """Result of one averaging evaluation.

    ``value`` is the averaged vector (or function values); ``residual`` is
    its distance to the limiting object: the fixed-space projection of the
    input in the vector setting, the conditional expectation in the
    functional setting.
    """

    n: int
    value: np.ndarray
    residual: float


def _require_contraction(t: np.ndarray) -> None:
    norm = op_norm(t)
    if norm > 1.0 + CONTRACTION_SLACK:
        raise ContractionViolation(
            f"operator norm {norm:.6g} exceeds 1; the mean ergodic averaging "
            "applies to contractions only"
        )


def fixed_space_projection(t, rank_tol: float | None = None) -> np.ndarray:
    """Orthogonal projector onto the fixed space ker(T - I) of a contraction.

    Computed from a singular decomposition of T - I; directions with
    singular value at or below the rank tolerance span the fixed space.
    For a contraction the fixed spaces of T and T* coincide, so the same
    projector serves both sides.
    """
    t = as_operator(t)
    _require_contraction(t)
    shifted = t - np.eye(t.shape[0], dtype=complex)
    if rank_tol is None:
        # relative to the scale of T - I, floored at machine epsilon for
        # the T = I corner where the difference vanishes entirely
        rank_tol = max(default_rank_tol(shifted), np.finfo(float).eps)
    _, s, vh = np.linalg.svd(shifted)
    null = s <= rank_tol
    basis = vh[null].conj().T
    proj = basis @ basis.conj().T
    return 0.5 * (proj + proj.conj().T)


def binomial_average(t, v, n: int, projection=None) -> AveragingReport:
    """Dyadic-weighted power average of v under the contraction t.

    Evaluates sum_k C(n,k)/2^n t^k v through n applications of (I + t)/2;
    the two forms agree by the binomial theorem, and the factored one is a
    composition of contractions, so the distance to the fixed-space
    projection of v can only shrink as n grows.  For t = -I the averaging
    map is the zero matrix and the value is exactly zero for every n >= 1.

    Pass ``projection`` to reuse a precomputed fixed-space projector
    across a sweep over n.
    """
    t = as_operator(t)
    _require_contraction(t)
    if n < 0:
        raise ValueError("n must be nonnegative")
    v = np.asarray(v, dtype=complex)
    if v.shape != (t.shape[0],):
        raise InvalidOperatorError("v must be a vector matching the operator size")
    if projection is None:
        projection = fixed_space_projection(t)
    else:
        projection = as_operator(projection)
    half = 0.5 * (t + np.eye(t.shape[0], dtype=complex))
    x = v.copy()
    for _ in range(n):
        x = half @ x
    target = projection @ v
    return AveragingReport(n=n, value=x, residual=float(np.linalg.norm(x - target)))


def _residual_to_expectation(op: PermutationWeightOperator, value: np.ndarray,
                             target: np.ndarray, deviation_eps: float) -> float:
    """L2(mu) distance when both sides are finite; otherwise the
    mu-measure of the set deviating by more than deviation_eps, with -inf
    agreeing with -inf counted as no deviation."""
    neg_v = np.isneginf(value)
    neg_t = np.isneginf(target)
    if np.any(neg_v) or np.any(neg_t):
        finite = ~neg_v & ~neg_t
        deviating = neg_v ^ neg_t
        deviating[finite] = np.abs(value[finite] - target[finite]) > deviation_eps
        return float(np.sum(op.mu[deviating]))
    return float(np.sqrt(np.sum(op.mu * np.abs(value - target) ** 2)))


def functional_binomial_average(b, op: PermutationWeightOperator, n: int,
                                deviation_eps: float = DEFAULT_DEVIATION_EPS) -> AveragingReport:
    """Dyadic-weighted forward-translate average of b over the system.

    value(x) = sum_k C(n,k)/2^n b(alpha^k x), with -inf absorbing.  The
    residual measures the distance to the conditional expectation of b:
    the L2(mu) norm when b is finite, and the mu-measure of the points
    deviating by more than ``deviation_eps`` when b takes -inf values
    (-inf agreeing with -inf counts as no deviation).
    """
    b = as_log_weights(b, op.size)
    if n < 0:
        raise ValueError("n must be nonnegative")
    value = binomial_orbit_transform(b, op, n, forward=True)
    target = conditional_expectation(b, op)
    residual = _residual_to_expectation(op, value, target, deviation_eps)
    return AveragingReport(n=n, value=value, residual=residual)


def cesaro_average(b, op: PermutationWeightOperator, n: int,
                   deviation_eps: float = DEFAULT_DEVIATION_EPS) -> AveragingReport:
    """Uniform forward-translate average (1/n) sum_{k=0}^{n-1} b(alpha^k x).

    Exactly reproduces the conditional expectation whenever every orbit
    length divides n.  Residual conventions match
    functional_binomial_average.
    """
    b = as_log_weights(b, op.size)
    if n < 1:
        raise ValueError("n must be at least 1")
    value = orbit_residue_transform(
        b, op, lambda ln: uniform_residue_sums(n, ln), n - 1, forward=True
    )
    target = conditional_expectation(b, op)
    residual = _residual_to_expectation(op, value, target, deviation_eps)
    return AveragingReport(n=n, value=value, residual=residual)

"""Binomial weight vectors C(n, k) / 2^n and related sums.

Two evaluation regimes: exact integer binomials scaled by the dyadic
denominator while the integers stay cheap, and a log-space recursion once
2^-n leaves the double range (n = 1074 is the last power with a subnormal
representation, and the tail weights vanish well before that matters).
"""

from __future__ import annotations

from fractions import Fraction
import math

import numpy as np

# Largest n handled on the exact integer path.
_EXACT_LIMIT = 1024


def binomial_weights_exact(n: int) -> list[Fraction]:
    """Exact weights C(n, k) / 2^n as Fractions.  Oracle path."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    denom = 1 << n
    c = 1
    out = []
    for k in range(n + 1):
        out.append(Fraction(c, denom))
        c = c * (n - k) // (k + 1)
    return out


def binomial_weights(n: int) -> np.ndarray:
    """Weights C(n, k) / 2^n as floats, k = 0..n.

    Multiplicative recursion, mirror-symmetrized so w[k] == w[n-k] exactly.
    Below _EXACT_LIMIT each weight is the correctly rounded value of the
    exact dyadic rational; beyond that the recursion runs on logarithms and
    the result is renormalized to unit sum.
    """
    if n < 0:
        raise ValueError("n must be nonnegative")
    half = n // 2
    w = np.empty(n + 1)
    if n <= _EXACT_LIMIT:
        denom = 1 << n
        c = 1
        for k in range(half + 1):
            w[k] = float(Fraction(c, denom))
            c = c * (n - k) // (k + 1)
    else:
        log_c = -n * math.log(2.0)
        for k in range(half + 1):
            w[k] = log_c
            log_c += math.log(n - k) - math.log(k + 1)
        np.exp(w[: half + 1], out=w[: half + 1])
    w[half + 1 :] = w[n - half - 1 :: -1]
    if n > _EXACT_LIMIT:
        w /= math.fsum(w)
    return w


def binomial_discrepancy(n: int) -> float:
    """The weighted deviation sum 2^-n * sum_{k=1}^{n} |2k - n + 1| / k * C(n, k).

    Controls how far the binomial average of a contraction orbit can sit
    from its ergodic limit; decays like O(1 / sqrt(n)).  Evaluated in log
    space so large n neither overflows nor underflows.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    k = np.arange(1, n + 1, dtype=float)
    m = np.abs(2.0 * k - n + 1.0)
    log_binom = (
        math.lgamma(n + 1)
        - np.array([math.lgamma(x + 1) + math.lgamma(n - x + 1) for x in k])
    )
    terms = np.zeros(n)
    pos = m > 0
    terms[pos] = np.exp(
        log_binom[pos] - n * math.log(2.0) + np.log(m[pos]) - np.log(k[pos])
    )
    return float(math.fsum(terms))


def binomial_discrepancy_exact(n: int) -> Fraction:
    """Exact rational value of the deviation sum.  Oracle path."""
    if n < 1:
        raise ValueError("n must be at least 1")
    denom = 1 << n
    c = 1  # C(n, 0)
    total = Fraction(0)
    for k in range(1, n + 1):
        c = c * (n - k + 1) // k
        total += Fraction(c * abs(2 * k - n + 1), k)
    return total / denom


def residue_weight_sums(weights: np.ndarray, period: int) -> np.ndarray:
    """Collapse a weight vector over k = 0..n onto residues k mod period.

    On a periodic orbit the k-th translate only depends on k mod period, so
    averages reduce to one pass over these collapsed weights.
    """
    if period < 1:
        raise ValueError("period must be positive")
    idx = np.arange(len(weights)) % period
    return np.bincount(idx, weights=weights, minlength=period)


def uniform_residue_sums(n: int, period: int) -> np.ndarray:
    """Residue collapse of the uniform weights 1/n over k = 0..n-1,
    computed without materializing the k range."""
    if n < 1:
        raise ValueError("n must be at least 1")
    if period < 1:
        raise ValueError("period must be positive")
    r = np.arange(period)
    counts = np.where(r <= n - 1, (n - 1 - r) // period + 1, 0)
    return counts / float(n)

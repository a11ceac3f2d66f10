"""Seeded random matrix and weight ensembles used by probes, experiments,
and tests.  All draws go through numpy Generator objects so that a fixed
seed reproduces every byte of downstream output."""

from __future__ import annotations

import numpy as np


def ginibre(size: int, rng: np.random.Generator) -> np.ndarray:
    """Complex Ginibre matrix: i.i.d. standard complex Gaussian entries
    scaled by 1/sqrt(size)."""
    g = rng.standard_normal((size, size)) + 1j * rng.standard_normal((size, size))
    return g / np.sqrt(2.0 * size)


def random_contraction(size: int, rng: np.random.Generator) -> np.ndarray:
    """Ginibre matrix rescaled to unit operator norm."""
    g = ginibre(size, rng)
    return g / np.linalg.norm(g, 2)


def haar_unitary(size: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed unitary via QR of a Ginibre matrix with the
    standard diagonal phase correction."""
    q, r = np.linalg.qr(ginibre(size, rng))
    d = np.diagonal(r)
    return q * (d / np.abs(d))


def random_normal_matrix(size: int, rng: np.random.Generator) -> np.ndarray:
    """Random normal matrix: Haar unitary conjugation of a random complex
    diagonal."""
    u = haar_unitary(size, rng)
    d = (rng.standard_normal(size) + 1j * rng.standard_normal(size)) / np.sqrt(2.0)
    return (u * d) @ u.conj().T


def random_log_uniform_weights(
    size: int, rng: np.random.Generator, zero_weight_prob: float = 0.0
) -> np.ndarray:
    """Weights drawn log-uniformly from [e^-2, e^2], with optional
    independent zeroing of each entry."""
    w = np.exp(rng.uniform(-2.0, 2.0, size))
    if zero_weight_prob > 0.0:
        w[rng.random(size) < zero_weight_prob] = 0.0
    return w

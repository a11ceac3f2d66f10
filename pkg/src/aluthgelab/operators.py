"""Core finite-dimensional operator routines.

Operators are square complex numpy arrays.  The normalized trace
``tau(x) = trace(x) / N`` fixes the two-norm used throughout the package:
``norm2(x) = sqrt(tau(x* x))``, so the identity has two-norm 1 at every
matrix size.  The operator norm is the largest singular value.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Relative slack used when validating Hermitian inputs.
HERMITIAN_RTOL = 1e-10
# Eigenvalues of a nominal positive matrix may dip this far (relative to the
# operator norm) below zero before we refuse to clamp them.
PSD_CLAMP_RTOL = 1e-12


class DimensionError(ValueError):
    """Input is not a square matrix, or shapes are incompatible."""


class InvalidOperatorError(ValueError):
    """Input entries are not finite complex numbers, or a structural
    precondition (Hermitian, positive, probability weights) fails."""


class SpectralDomainError(ValueError):
    """A scalar function was applied to a Hermitian matrix whose spectrum
    leaves the function's domain."""


class EigensolverError(RuntimeError):
    """The underlying eigenvalue or singular value iteration failed."""


def as_operator(a) -> np.ndarray:
    """Validate and return ``a`` as a square complex matrix.

    Raises DimensionError for non-square input and InvalidOperatorError
    for NaN or infinite entries.  The returned array is a complex view or
    copy; callers never mutate it.
    """
    arr = np.asarray(a)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {arr.shape}")
    if arr.shape[0] == 0:
        raise DimensionError("empty matrix")
    arr = arr.astype(complex, copy=False)
    if not np.all(np.isfinite(arr.real)) or not np.all(np.isfinite(arr.imag)):
        raise InvalidOperatorError("matrix entries must be finite")
    return arr


def op_norm(t) -> float:
    """Operator norm (largest singular value)."""
    t = as_operator(t)
    return float(np.linalg.norm(t, 2))


def trace_norm2(t) -> float:
    """Normalized trace two-norm sqrt(trace(t* t) / N).

    Satisfies trace_norm2(I) = 1 and trace_norm2 <= op_norm.
    """
    t = as_operator(t)
    n = t.shape[0]
    return float(np.linalg.norm(t, "fro") / np.sqrt(n))


def normality_defect(t) -> float:
    """Two-norm of the self-commutator, trace_norm2(t* t - t t*).

    Zero exactly when t is normal; used as the convergence diagnostic for
    Aluthge iteration, whose fixed points are the normal operators.
    """
    t = as_operator(t)
    comm = t.conj().T @ t - t @ t.conj().T
    return float(np.linalg.norm(comm, "fro") / np.sqrt(t.shape[0]))


def spectral_radius(t) -> float:
    """Largest eigenvalue modulus."""
    t = as_operator(t)
    try:
        ev = np.linalg.eigvals(t)
    except np.linalg.LinAlgError as exc:
        raise EigensolverError(f"eigenvalue iteration failed: {exc}") from exc
    return float(np.max(np.abs(ev))) if ev.size else 0.0


def default_rank_tol(t: np.ndarray, norm: float | None = None) -> float:
    """Default kernel threshold: machine epsilon times N times op_norm.

    Pass ``norm`` to reuse an already-computed operator norm (typically the
    leading singular value) and skip the extra factorization.
    """
    t = as_operator(t)
    if norm is None:
        norm = float(np.linalg.norm(t, 2))
    return float(np.finfo(float).eps * t.shape[0] * norm)


@dataclass(frozen=True)
class PolarDecomposition:
    """Polar data t = unitary @ modulus.

    ``unitary`` is the full unitary extension of the polar partial isometry
    (the SVD product W V*), ``modulus`` is the positive square root of t* t,
    and ``kernel_projection`` is the orthogonal projection onto the kernel
    of t, spanned by right singular vectors whose singular value falls
    below the rank threshold.  ``singular_values`` carries the descending
    singular values, which are also the eigenvalues of ``modulus``.
    """

    unitary: np.ndarray
    modulus: np.ndarray
    kernel_projection: np.ndarray
    singular_values: np.ndarray


def polar(t, rank_tol: float | None = None) -> PolarDecomposition:
    """Polar decomposition through the SVD.

    With t = W diag(s) V*, returns unitary = W V*, modulus = V diag(s) V*,
    and the kernel projection from the right singular vectors with s below
    ``rank_tol`` (default ``eps * N * op_norm(t)``).

    The unitary factor is one unitary extension of the polar partial
    isometry.  Quantities of the form modulus^(1/2) @ unitary @
    modulus^(1/2) do not depend on the choice of extension because the
    ambiguity lives on the kernel of the modulus.
    """
    t = as_operator(t)
    try:
        w, s, vh = np.linalg.svd(t)
    except np.linalg.LinAlgError as exc:
        raise EigensolverError(f"singular value iteration failed: {exc}") from exc
    if rank_tol is None:
        rank_tol = float(np.finfo(float).eps * t.shape[0] * (s[0] if s.size else 0.0))
    elif rank_tol < 0:
        raise InvalidOperatorError("rank_tol must be nonnegative")
    unitary = w @ vh
    v = vh.conj().T
    modulus = (v * s) @ vh
    modulus = 0.5 * (modulus + modulus.conj().T)
    null_cols = v[:, s < rank_tol]
    kernel_projection = null_cols @ null_cols.conj().T
    return PolarDecomposition(unitary, modulus, kernel_projection, s.copy())


def hermitian_function(a, f, clamp_rtol: float = PSD_CLAMP_RTOL) -> np.ndarray:
    """Apply a scalar function to a Hermitian matrix through its
    eigendecomposition.

    ``a`` must be Hermitian within HERMITIAN_RTOL * op_norm(a).  Eigenvalues
    in [-clamp_rtol * op_norm(a), 0) are clamped to 0 so that nominally
    positive matrices stay inside the domain of fractional powers; the
    conventions 0**p = 0 (p > 0) and exp(-inf) = 0 then hold automatically.
    ``f`` is applied to the full eigenvalue vector, so numpy ufuncs and
    vectorized callables both work.

    Raises SpectralDomainError when f produces a non-finite value on the
    clamped spectrum.
    """
    a = as_operator(a)
    scale = float(np.max(np.abs(a))) if a.size else 0.0
    herm_gap = float(np.max(np.abs(a - a.conj().T)))
    if herm_gap > HERMITIAN_RTOL * max(scale, 1e-300):
        raise InvalidOperatorError(
            f"matrix is not Hermitian: max asymmetry {herm_gap:.3e} "
            f"exceeds {HERMITIAN_RTOL:.0e} * scale"
        )
    a = 0.5 * (a + a.conj().T)
    try:
        evals, evecs = np.linalg.eigh(a)
    except np.linalg.LinAlgError as exc:
        raise EigensolverError(f"eigenvalue iteration failed: {exc}") from exc
    norm = float(np.max(np.abs(evals))) if evals.size else 0.0
    clamp = clamp_rtol * norm
    evals = np.where((evals < 0.0) & (evals >= -clamp), 0.0, evals)
    with np.errstate(invalid="ignore", divide="ignore"):
        fv = np.asarray(f(evals))
    if fv.shape != evals.shape:
        raise SpectralDomainError("f must map the eigenvalue vector elementwise")
    if np.iscomplexobj(fv):
        if not np.all(np.isfinite(fv)):
            raise SpectralDomainError("f is undefined (non-finite) on the spectrum")
        fv = fv.astype(complex)
    else:
        fv = fv.astype(float)
        if not np.all(np.isfinite(fv)):
            bad = evals[~np.isfinite(fv)]
            raise SpectralDomainError(
                f"f is undefined (non-finite) at eigenvalues {bad[:4]}"
            )
    out = (evecs * fv) @ evecs.conj().T
    if not np.iscomplexobj(fv):
        out = 0.5 * (out + out.conj().T)
    return out

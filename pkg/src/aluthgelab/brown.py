"""Empirical spectral measures and the normalized-trace determinant.

The spectral measure of an N by N matrix is the counting measure of its
eigenvalues with mass 1/N each.  For permutation-weight operators the
measure is also available in closed form from the cycle structure: an
orbit of length L with weight product rho contributes the L-th roots of
rho, each carrying 1/L of the orbit's mass, which is how non-uniform
point masses enter.  Measures are compared in exact 1-Wasserstein
distance by minimum-cost assignment after splitting atoms to a common
mass granularity.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
import math

import numpy as np
from scipy.optimize import linear_sum_assignment

from .crossed import PermutationWeightOperator, orbits
from .operators import (
    EigensolverError,
    InvalidOperatorError,
    as_operator,
    default_rank_tol,
)

# Atoms closer than this are merged into one.
ATOM_MERGE_TOL = 1e-9
# Masses must sum to 1 within this.
MASS_SUM_TOL = 1e-12
# Masses must be rational multiples of a common granularity within this.
GRANULARITY_TOL = 1e-9
# Largest number of unit atoms a measure may be split into for transport.
MAX_TRANSPORT_UNITS = 4096


@dataclass(frozen=True)
class SpectralMeasure:
    """Finite atomic probability measure in the complex plane.

    Atoms are kept sorted by (real, imaginary) part; masses are positive
    and sum to 1 within 1e-12.  Construct via from_atoms to merge
    near-coincident atoms.
    """

    atoms: np.ndarray
    masses: np.ndarray

    def __post_init__(self):
        atoms = np.asarray(self.atoms, dtype=complex)
        masses = np.asarray(self.masses, dtype=float)
        if atoms.ndim != 1 or masses.shape != atoms.shape:
            raise InvalidOperatorError("atoms and masses must be matching vectors")
        if len(atoms) == 0:
            raise InvalidOperatorError("a measure needs at least one atom")
        if np.any(~np.isfinite(atoms)):
            raise InvalidOperatorError("atoms must be finite")
        if np.any(~np.isfinite(masses)) or np.any(masses <= 0.0):
            raise InvalidOperatorError("masses must be finite and positive")
        if abs(float(masses.sum()) - 1.0) > MASS_SUM_TOL:
            raise InvalidOperatorError("masses must sum to 1")
        order = np.lexsort((atoms.imag, atoms.real))
        object.__setattr__(self, "atoms", atoms[order])
        object.__setattr__(self, "masses", masses[order])

    @classmethod
    def from_atoms(cls, atoms, masses, merge_tol: float = ATOM_MERGE_TOL) -> "SpectralMeasure":
        """Build a measure, merging atoms closer than merge_tol.

        Merging adds the masses and keeps the mass-weighted centroid, so
        total mass is preserved exactly.
        """
        atoms = np.asarray(atoms, dtype=complex)
        masses = np.asarray(masses, dtype=float)
        if atoms.ndim != 1 or masses.shape != atoms.shape or len(atoms) == 0:
            raise InvalidOperatorError("atoms and masses must be matching nonempty vectors")
        order = np.lexsort((atoms.imag, atoms.real))
        atoms = atoms[order]
        masses = masses[order]
        out_atoms: list[complex] = []
        out_masses: list[float] = []
        for a, m in zip(atoms, masses):
            if out_atoms and abs(a - out_atoms[-1]) <= merge_tol:
                total = out_masses[-1] + m
                out_atoms[-1] = (out_atoms[-1] * out_masses[-1] + a * m) / total
                out_masses[-1] = total
            else:
                out_atoms.append(complex(a))
                out_masses.append(float(m))
        return cls(np.array(out_atoms), np.array(out_masses))

    def __len__(self) -> int:
        return len(self.atoms)


def _eigvals(t: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.eigvals(t)
    except np.linalg.LinAlgError as exc:
        raise EigensolverError(
            f"eigenvalue iteration failed on a {t.shape[0]}x{t.shape[0]} matrix "
            f"with norm {np.linalg.norm(t, 2):.3e}: {exc}"
        ) from exc


def _crossed_spectral_atoms(op: PermutationWeightOperator):
    """Closed-form eigenvalues of u @ diag(w): per orbit of length L the
    L-th roots of the weight product, carrying the orbit's mu mass split
    evenly; a zero weight collapses the orbit's spectrum to 0."""
    atoms: list[complex] = []
    masses: list[float] = []
    for cycle in orbits(op):
        length = len(cycle)
        w = op.weights[cycle]
        orbit_mass = float(np.sum(op.mu[cycle]))
        if np.any(w == 0.0):
            atoms.append(0.0 + 0.0j)
            masses.append(orbit_mass)
            continue
        radius = float(np.exp(np.mean(np.log(w))))
        for j in range(length):
            atoms.append(radius * np.exp(2j * np.pi * j / length))
            masses.append(orbit_mass / length)
    return np.array(atoms), np.array(masses)


def brown_measure(t, mu=None, merge_tol: float = ATOM_MERGE_TOL) -> SpectralMeasure:
    """Spectral measure of an operator.

    Dense matrices get the eigenvalue counting measure with mass 1/N per
    eigenvalue.  A PermutationWeightOperator gets the closed-form cycle
    spectrum weighted by its own mu, which is the only supported route to
    non-uniformly weighted masses; passing a separate non-uniform ``mu``
    next to a dense matrix is rejected because the block structure needed
    to distribute it is not recoverable from the raw matrix.
    """
    if isinstance(t, PermutationWeightOperator):
        if mu is not None:
            raise InvalidOperatorError(
                "the structured operator carries its own mu; do not pass one"
            )
        atoms, masses = _crossed_spectral_atoms(t)
        return SpectralMeasure.from_atoms(atoms, masses, merge_tol)
    t = as_operator(t)
    n = t.shape[0]
    if mu is not None:
        mu = np.asarray(mu, dtype=float)
        if mu.shape != (n,):
            raise InvalidOperatorError("mu must have one entry per dimension")
        if np.max(np.abs(mu - 1.0 / n)) > MASS_SUM_TOL:
            raise InvalidOperatorError(
                "non-uniform mass weighting requires the structured "
                "permutation-weight form of the operator"
            )
    ev = _eigvals(t)
    return SpectralMeasure.from_atoms(ev, np.full(n, 1.0 / n), merge_tol)


def fk_determinant(t, rank_tol: float | None = None) -> float:
    """Normalized-trace determinant exp(tau(log|t|)).

    Equals the geometric mean of the singular values, and 0 when any of
    them sits at or below the rank tolerance.  For the structured
    permutation-weight operator the trace is its mu-weighted one, so the
    value is exp(sum mu(x) log w(x)), consistent with its spectral
    measure.
    """
    if isinstance(t, PermutationWeightOperator):
        if np.any(t.weights == 0.0):
            return 0.0
        return float(np.exp(np.sum(t.mu * np.log(t.weights))))
    t = as_operator(t)
    s = np.linalg.svd(t, compute_uv=False)
    if rank_tol is None:
        rank_tol = default_rank_tol(t, s[0] if len(s) else 0.0)
    if np.any(s <= rank_tol):
        return 0.0
    return float(np.exp(np.mean(np.log(s))))


def disk_mass(m: SpectralMeasure, r: float) -> float:
    """Total mass on the closed disk of radius r about the origin, with a
    1e-12 absolute cushion on the boundary."""
    if r < 0:
        raise ValueError("radius must be nonnegative")
    return float(np.sum(m.masses[np.abs(m.atoms) <= r + 1e-12]))


def rotate_measure(m: SpectralMeasure, theta: float) -> SpectralMeasure:
    """Push the measure forward under multiplication by e^(i theta)."""
    phase = complex(np.exp(1j * theta))
    return SpectralMeasure.from_atoms(m.atoms * phase, m.masses.copy())


def _granularity(m: SpectralMeasure) -> int:
    """Smallest common denominator of the masses, or invalid-input when
    they are not near-rational with a bounded denominator."""
    den = 1
    for mass in m.masses:
        frac = Fraction(float(mass)).limit_denominator(MAX_TRANSPORT_UNITS)
        if abs(float(frac) - float(mass)) > GRANULARITY_TOL:
            raise InvalidOperatorError(
                f"mass {mass!r} is not a rational multiple of a common "
                f"granularity within {GRANULARITY_TOL:g}"
            )
        den = math.lcm(den, frac.denominator)
        if den > MAX_TRANSPORT_UNITS:
            raise InvalidOperatorError(
                "mass granularities are incompatible: common denominator "
                f"exceeds {MAX_TRANSPORT_UNITS}"
            )
    return den


def measure_distance(a: SpectralMeasure, b: SpectralMeasure) -> float:
    """Exact 1-Wasserstein distance between two atomic measures.

    Both mass vectors are split into unit atoms at their common
    granularity and matched by a minimum-cost assignment, which is exact
    for rational masses.  Symmetric; zero exactly when the measures agree
    atom for atom.
    """
    units = math.lcm(_granularity(a), _granularity(b))
    if units > MAX_TRANSPORT_UNITS:
        raise InvalidOperatorError(
            f"common mass granularity needs {units} units, beyond the "
            f"{MAX_TRANSPORT_UNITS} supported"
        )

    def expand(m: SpectralMeasure) -> np.ndarray:
        counts = np.rint(m.masses * units).astype(np.int64)
        if np.max(np.abs(counts - m.masses * units)) > GRANULARITY_TOL * units:
            raise InvalidOperatorError("masses do not align with the common granularity")
        if int(counts.sum()) != units:
            raise InvalidOperatorError("unit split does not add up to total mass")
        return np.repeat(m.atoms, counts)

    pa = expand(a)
    pb = expand(b)
    cost = np.abs(pa[:, np.newaxis] - pb[np.newaxis, :])
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].sum() / units)


def measure_to_csv(m: SpectralMeasure) -> str:
    """CSV rows re,im,mass with 17 significant digits."""
    lines = ["re,im,mass"]
    for a, mass in zip(m.atoms, m.masses):
        lines.append(f"{a.real:.17g},{a.imag:.17g},{mass:.17g}")
    return "\n".join(lines) + "\n"


def measure_from_csv(text: str) -> SpectralMeasure:
    """Parse the serialization produced by measure_to_csv."""
    rows = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not rows or rows[0] != "re,im,mass":
        raise InvalidOperatorError("expected a header row 're,im,mass'")
    atoms = []
    masses = []
    for ln in rows[1:]:
        parts = ln.split(",")
        if len(parts) != 3:
            raise InvalidOperatorError(f"expected 3 comma-separated fields, got {ln!r}")
        try:
            re, im, mass = (float(p) for p in parts)
        except ValueError as exc:
            raise InvalidOperatorError(f"bad numeric field in {ln!r}") from exc
        atoms.append(complex(re, im))
        masses.append(mass)
    # already merged when written; merge_tol=0 keeps the file's atoms as-is
    return SpectralMeasure(np.array(atoms), np.array(masses))

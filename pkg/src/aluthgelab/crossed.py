"""Permutation-weight operators and their closed-form Aluthge dynamics.

The model is a finite measure-preserving system: points 0..N-1, a
permutation ``alpha``, an alpha-invariant probability vector ``mu``, and a
nonnegative weight vector ``w``.  The operator is u @ diag(w) where u is
the permutation unitary acting by (u f)(x) = f(alpha(x)), equivalently
u e_j = e_{alpha^-1(j)}.  Conjugation satisfies u diag(f) u* =
diag(f o alpha).

All the transform dynamics of such an operator stay inside the class: the
n-th Aluthge iterate is again u @ diag(w_n) where w_n is a binomially
weighted geometric average of w along backward orbits.  Everything here
works in log space with -inf marking zero weights; +inf never occurs.
"""

from __future__ import annotations

from dataclasses import dataclass
import math
import warnings

import numpy as np

from .aluthge import IterationStep, IterationTrace
from .binomial import binomial_weights, residue_weight_sums
from .operators import InvalidOperatorError

# Tolerance for checking that mu is a probability vector.
_MU_SUM_TOL = 1e-12
# Iterate orders beyond this emit a precision warning: the dyadic exponent
# tails shrink toward the subnormal range and the accumulated averages lose
# relative accuracy.
DEFAULT_ITERATE_CAP = 64


class PrecisionWarning(UserWarning):
    """Requested order is beyond the comfortable precision range."""


def _as_permutation(alpha, size: int | None = None) -> np.ndarray:
    a = np.asarray(alpha)
    if a.ndim != 1:
        raise InvalidOperatorError("alpha must be a one-dimensional index vector")
    if size is not None and len(a) != size:
        raise InvalidOperatorError("alpha length does not match size")
    n = len(a)
    if n == 0:
        raise InvalidOperatorError("alpha must be nonempty")
    if not np.issubdtype(a.dtype, np.integer):
        if not np.all(a == np.floor(a)):
            raise InvalidOperatorError("alpha entries must be integers")
        a = a.astype(np.int64)
    else:
        a = a.astype(np.int64)
    counts = np.zeros(n, dtype=np.int64)
    if np.any(a < 0) or np.any(a >= n):
        raise InvalidOperatorError("alpha entries must lie in 0..N-1")
    np.add.at(counts, a, 1)
    if np.any(counts != 1):
        raise InvalidOperatorError("alpha must be a bijection")
    return a


def as_log_weights(values, size: int | None = None) -> np.ndarray:
    """Validate a vector of extended-real values in [-inf, finite).

    -inf encodes a zero weight and is absorbing under the averaging
    operations; +inf and NaN are rejected.
    """
    b = np.asarray(values, dtype=float)
    if b.ndim != 1:
        raise InvalidOperatorError("expected a one-dimensional value vector")
    if size is not None and len(b) != size:
        raise InvalidOperatorError("value vector length does not match size")
    if np.any(np.isnan(b)) or np.any(b == np.inf):
        raise InvalidOperatorError("values must be in [-inf, finite); no NaN or +inf")
    return b


@dataclass(frozen=True)
class PermutationWeightOperator:
    """The operator u @ diag(weights) over the system (alpha, mu).

    alpha[x] is the image of point x, mu is an alpha-invariant probability
    vector (automatically constant on orbits), and weights are nonnegative
    with zeros allowed.  Instances are immutable.
    """

    alpha: np.ndarray
    mu: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        a = _as_permutation(self.alpha)
        mu = np.asarray(self.mu, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        n = len(a)
        if mu.shape != (n,) or w.shape != (n,):
            raise InvalidOperatorError("alpha, mu, weights must share one length")
        if np.any(~np.isfinite(mu)) or np.any(mu <= 0.0):
            raise InvalidOperatorError("mu entries must be finite and positive")
        if abs(float(mu.sum()) - 1.0) > _MU_SUM_TOL:
            raise InvalidOperatorError("mu must sum to 1")
        if np.max(np.abs(mu[a] - mu)) > _MU_SUM_TOL:
            raise InvalidOperatorError("mu must be alpha-invariant")
        if np.any(~np.isfinite(w)) or np.any(w < 0.0):
            raise InvalidOperatorError("weights must be finite and nonnegative")
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "weights", w)

    @property
    def size(self) -> int:
        return len(self.alpha)

    def with_weights(self, weights) -> "PermutationWeightOperator":
        return PermutationWeightOperator(self.alpha, self.mu, weights)

    def log_weights(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(self.weights)


def uniform_mu(size: int) -> np.ndarray:
    """The uniform probability vector, invariant under every permutation."""
    return np.full(size, 1.0 / size)


def permutation_matrix(alpha) -> np.ndarray:
    """Dense unitary with u e_j = e_{alpha^-1(j)}; row x has its 1 in
    column alpha(x)."""
    a = _as_permutation(alpha)
    n = len(a)
    u = np.zeros((n, n), dtype=complex)
    u[np.arange(n), a] = 1.0
    return u


def densify(op: PermutationWeightOperator) -> np.ndarray:
    """Dense matrix of the operator: entry weights[j] at row alpha^-1(j),
    column j."""
    return permutation_matrix(op.alpha) * op.weights[np.newaxis, :]


def orbits(op: PermutationWeightOperator | np.ndarray) -> list[np.ndarray]:
    """Orbit (cycle) decomposition of alpha, each orbit listed in orbit
    order starting from its smallest unvisited point."""
    a = op.alpha if isinstance(op, PermutationWeightOperator) else _as_permutation(op)
    n = len(a)
    seen = np.zeros(n, dtype=bool)
    out = []
    for start in range(n):
        if seen[start]:
            continue
        cycle = [start]
        seen[start] = True
        x = int(a[start])
        while x != start:
            cycle.append(x)
            seen[x] = True
            x = int(a[x])
        out.append(np.array(cycle, dtype=np.int64))
    return out


def conditional_expectation(b, op: PermutationWeightOperator) -> np.ndarray:
    """Orbit-wise mu-weighted average of b, constant on each orbit.

    A -inf anywhere on an orbit forces the whole orbit to -inf, matching
    the absorbing convention for zero weights under geometric averaging.
    """
    b = as_log_weights(b, op.size)
    out = np.empty(op.size)
    for cycle in orbits(op):
        vals = b[cycle]
        if np.any(np.isneginf(vals)):
            out[cycle] = -np.inf
        else:
            out[cycle] = np.average(vals, weights=op.mu[cycle])
    return out


def limit_h(op: PermutationWeightOperator) -> np.ndarray:
    """Pointwise limit modulus: exp of the conditional expectation of
    log(weights).  Zero exactly on orbits carrying a zero weight."""
    return np.exp(conditional_expectation(op.log_weights(), op))


def _orbit_binomial_average(values: np.ndarray, collapsed: np.ndarray,
                            reach: int, forward: bool) -> np.ndarray:
    """Weighted average of translates along one orbit.

    values are the b-values on the cycle in orbit order; collapsed[r] is
    the total weight of translate step r mod L.  forward=True averages
    b(alpha^k x); forward=False averages b(alpha^-k x).  reach is the
    largest translate index actually applied (min(n, L-1)); any -inf
    within reach of a point forces that point's average to -inf.
    """
    ln = len(values)
    neg = np.isneginf(values)
    acc = np.zeros(ln)
    forced = np.zeros(ln, dtype=bool)
    clean = np.where(neg, 0.0, values)
    for r in range(ln):
        shifted = np.roll(clean, -r) if forward else np.roll(clean, r)
        acc += collapsed[r] * shifted
        if r <= reach:
            forced |= np.roll(neg, -r) if forward else np.roll(neg, r)
    return np.where(forced, -np.inf, acc)


def orbit_residue_transform(b, op: PermutationWeightOperator, fractions_for_length,
                            k_max: int, forward: bool = True) -> np.ndarray:
    """Weighted translate average sum_k c_k b(alpha^(+-k) x) with translate
    indices k = 0..k_max, evaluated orbit by orbit.

    Translates repeat with the orbit length, so the caller supplies
    ``fractions_for_length(L)``, the weight mass collapsed onto residues
    mod L; each orbit then costs O(L^2) regardless of k_max.  The -inf
    convention is absorbing over the reached residues {0..min(k_max, L-1)},
    which is exact whenever every c_k is strictly positive.
    """
    b = as_log_weights(b, op.size)
    if k_max < 0:
        raise ValueError("translate range must be nonnegative")
    out = np.empty(op.size)
    collapsed_cache: dict[int, np.ndarray] = {}
    for cycle in orbits(op):
        ln = len(cycle)
        if ln not in collapsed_cache:
            collapsed_cache[ln] = np.asarray(fractions_for_length(ln), dtype=float)
        reach = min(k_max, ln - 1)
        out[cycle] = _orbit_binomial_average(
            b[cycle], collapsed_cache[ln], reach, forward
        )
    return out


def binomial_orbit_transform(b, op: PermutationWeightOperator, n: int,
                             forward: bool = True) -> np.ndarray:
    """The binomially weighted translate average
    sum_k C(n,k)/2^n * b(alpha^(+-k) x), evaluated orbit by orbit.

    The dyadic weights are collapsed onto residues once per orbit length;
    all of them are strictly positive, so the -inf absorption over the
    reach window is exact.
    """
    if n < 0:
        raise ValueError("n must be nonnegative")
    weights = binomial_weights(n)
    return orbit_residue_transform(
        b, op, lambda ln: residue_weight_sums(weights, ln), n, forward
    )


def closed_form_iterate(op: PermutationWeightOperator, n: int,
                        order_cap: int = DEFAULT_ITERATE_CAP) -> PermutationWeightOperator:
    """The n-th Aluthge iterate of the operator, computed in closed form.

    The iterate is again a permutation-weight operator with the same alpha
    and weights w_n(x) = prod_k w(alpha^-k x)^(C(n,k)/2^n), accumulated in
    log space over backward translates.  Orders beyond ``order_cap`` emit a
    PrecisionWarning: the exponent tails head toward the subnormal range.
    """
    if n < 0:
        raise ValueError("n must be nonnegative")
    if n > order_cap:
        warnings.warn(
            f"iterate order {n} exceeds the precision cap {order_cap}; "
            "dyadic exponent tails may underflow",
            PrecisionWarning,
            stacklevel=2,
        )
    new_log = binomial_orbit_transform(op.log_weights(), op, n, forward=False)
    return op.with_weights(np.exp(new_log))


def power_limit_step(op: PermutationWeightOperator, m: int, side: str = "right") -> np.ndarray:
    """The m-th root modulus along the power sequence.

    side="right" returns (prod_{k=0}^{m-1} w(alpha^-k x))^(1/m), the
    spectral-scale modulus of the m-th power read through backward
    translates; side="left" uses forward translates alpha^(+k), k=1..m,
    matching the power's left modulus.  Both sides converge to limit_h and
    agree with it exactly whenever every orbit length divides m.
    """
    if m < 1:
        raise ValueError("m must be at least 1")
    if side not in ("right", "left"):
        raise ValueError("side must be 'right' or 'left'")
    lw = op.log_weights()
    out = np.empty(op.size)
    for cycle in orbits(op):
        ln = len(cycle)
        vals = lw[cycle]
        neg = np.isneginf(vals)
        r = np.arange(ln)
        counts = np.where(r <= m - 1, (m - 1 - r) // ln + 1, 0).astype(float)
        frac = counts / float(m)
        reach = min(m - 1, ln - 1)
        clean = np.where(neg, 0.0, vals)
        acc = np.zeros(ln)
        forced = np.zeros(ln, dtype=bool)
        for rr in range(ln):
            if side == "right":
                shifted = np.roll(clean, rr)
                neg_sh = np.roll(neg, rr)
            else:
                # forward translates start at alpha^1
                shifted = np.roll(clean, -(rr + 1))
                neg_sh = np.roll(neg, -(rr + 1))
            acc += frac[rr] * shifted
            if rr <= reach:
                forced |= neg_sh
        out[cycle] = np.where(forced, -np.inf, acc)
    return np.exp(out)


def trace_model_check(op: PermutationWeightOperator, k: int, f) -> complex:
    """Defect of the model trace identity for u^k diag(f).

    The mu-weighted trace of the dense u^k diag(f) is compared with the
    fixed-point sum over {x : alpha^k(x) = x} of mu(x) f(x).  On points
    where the k-th translate acts freely the trace contributes nothing,
    matching the vanishing of off-diagonal moments; orbits whose length
    divides k re-enter and fall back to the k = 0 value.  The returned
    difference is a pure floating-point residue.
    """
    f = np.asarray(f, dtype=complex)
    n = op.size
    if f.shape != (n,):
        raise InvalidOperatorError("f must be a vector of the system size")
    if abs(k) > n:
        raise InvalidOperatorError("|k| must not exceed the system size")
    u = permutation_matrix(op.alpha)
    uk = np.linalg.matrix_power(u if k >= 0 else u.conj().T, abs(k))
    dense_trace = complex(np.sum(op.mu * np.diagonal(uk @ np.diag(f))))
    idx = np.arange(n)
    power = idx.copy()
    for _ in range(abs(k)):
        power = op.alpha[power]
    fixed = power == idx
    model = complex(np.sum(op.mu[fixed] * f[fixed]))
    return dense_trace - model


def fixed_polar_unitary(op: PermutationWeightOperator) -> np.ndarray:
    """The permutation unitary itself, used as the polar factor for every
    iterate of the class (the modulus is diagonal, so u @ diag(w) is
    already a polar factorization with a fixed unitary extension)."""
    return permutation_matrix(op.alpha)


def aluthge_limit(op: PermutationWeightOperator, max_steps: int = 200,
                  tol: float = 1e-10) -> tuple[np.ndarray, IterationTrace]:
    """Dense limit operator u @ diag(limit_h) together with the iteration
    trace of two-norm distances from the closed-form iterates.

    Iterates are generated in closed form, so each step costs vector work
    plus the diagnostic norms.  The trace records, per order n, the
    iterate's norms and its distance to the limit; convergence is declared
    when that distance falls below tol.
    """
    if max_steps < 0:
        raise ValueError("max_steps must be nonnegative")
    if tol <= 0:
        raise ValueError("tol must be positive")
    h = limit_h(op)
    n_pts = op.size
    sqrt_n = math.sqrt(n_pts)

    def vec_norm2(v: np.ndarray) -> float:
        return float(np.linalg.norm(v) / sqrt_n)

    alpha = op.alpha
    trace = IterationTrace()
    converged_at = None
    for n in range(max_steps + 1):
        w_n = closed_form_iterate(op, n, order_cap=max(max_steps, DEFAULT_ITERATE_CAP)).weights
        w_sq = w_n * w_n
        step = IterationStep(
            index=n,
            trace_norm2=vec_norm2(w_n),
            op_norm=float(np.max(w_n)),
            normality_defect=vec_norm2(w_sq - w_sq[alpha]),
            dist_to_limit=vec_norm2(w_n - h),
        )
        trace.steps.append(step)
        if step.dist_to_limit < tol:
            converged_at = n
            break
    limit = permutation_matrix(alpha) * h[np.newaxis, :]
    if converged_at is not None:
        trace.converged = True
        trace.limit = limit
    return limit, trace


def to_text(op: PermutationWeightOperator) -> str:
    """Serialize as four lines: size, alpha, mu, weights.

    Floats are written with repr, which round-trips every double exactly,
    so decimal inputs of up to 17 significant digits survive a save/load
    cycle bit for bit.
    """
    lines = [
        str(op.size),
        " ".join(str(int(x)) for x in op.alpha),
        " ".join(repr(float(x)) for x in op.mu),
        " ".join(repr(float(x)) for x in op.weights),
    ]
    return "\n".join(lines) + "\n"


def from_text(text: str) -> PermutationWeightOperator:
    """Parse the four-line serialization produced by to_text."""
    raw = [ln for ln in text.splitlines() if ln.strip() != ""]
    if len(raw) != 4:
        raise InvalidOperatorError(
            f"expected 4 nonempty lines (size, alpha, mu, weights), got {len(raw)}"
        )
    try:
        n = int(raw[0].strip())
    except ValueError as exc:
        raise InvalidOperatorError(f"bad size line: {raw[0]!r}") from exc
    def parse_floats(line: str, name: str) -> np.ndarray:
        try:
            vals = np.array([float(tok) for tok in line.split()])
        except ValueError as exc:
            raise InvalidOperatorError(f"bad {name} line") from exc
        if len(vals) != n:
            raise InvalidOperatorError(f"{name} line must have {n} entries")
        return vals
    try:
        alpha = np.array([int(tok) for tok in raw[1].split()], dtype=np.int64)
    except ValueError as exc:
        raise InvalidOperatorError("bad alpha line") from exc
    if len(alpha) != n:
        raise InvalidOperatorError(f"alpha line must have {n} entries")
    mu = parse_floats(raw[2], "mu")
    w = parse_floats(raw[3], "weights")
    return PermutationWeightOperator(alpha, mu, w)


def save(op: PermutationWeightOperator, path) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(to_text(op))


def load(path) -> PermutationWeightOperator:
    with open(path, "r") as fh:
        return from_text(fh.read())

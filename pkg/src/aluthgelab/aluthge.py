"""Aluthge transform, its iteration, and approximation machinery.

The transform maps t = u |t| to |t|^(1/2) u |t|^(1/2).  It preserves the
spectrum, contracts both the operator norm and the normalized trace
two-norm, and its fixed points are exactly the normal matrices, which
makes the iteration a smoothing flow toward normality.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import Chebyshev

from .ensembles import random_contraction
from .operators import (
    EigensolverError,
    InvalidOperatorError,
    PolarDecomposition,
    as_operator,
    default_rank_tol,
    normality_defect,
    op_norm,
    polar,
    trace_norm2,
)

# Multiplicative cushion for floating-point comparison of bounds that the
# exact theory can meet with equality.
_BOUND_SLACK = 8.0 * np.finfo(float).eps

_DEFAULT_DEGREES = (16, 32, 64, 128, 256, 512)


class ApproximationFailure(RuntimeError):
    """Polynomial construction hit the degree cap before reaching its
    uniform error target.  Carries the best errors achieved."""

    def __init__(self, message: str, achieved_p: float, achieved_q: float, target: float):
        super().__init__(message)
        self.achieved_p = achieved_p
        self.achieved_q = achieved_q
        self.target = target


def _svd(t: np.ndarray):
    try:
        return np.linalg.svd(t)
    except np.linalg.LinAlgError as exc:
        raise EigensolverError(f"singular value iteration failed: {exc}") from exc


def aluthge(t, rank_tol: float | None = None) -> np.ndarray:
    """Aluthge transform |t|^(1/2) u |t|^(1/2) from the polar factors.

    The unitary SVD extension is used for u; the square roots annihilate
    the kernel of |t|, so the result does not depend on that choice.

    Singular values below ``rank_tol`` (default: machine precision scaled
    by dimension and norm) are treated as exact kernel and zeroed.  Without
    this, iterating the transform on a singular matrix amplifies kernel
    roundoff geometrically: a spurious singular value eps becomes eps^(1/2)
    after one step, eps^(1/4) after two, and soon pollutes the iterate.
    """
    t = as_operator(t)
    w, s, vh = _svd(t)
    if rank_tol is None:
        rank_tol = default_rank_tol(t, s[0] if len(s) else 0.0)
    s = np.where(s <= rank_tol, 0.0, s)
    v = vh.conj().T
    sq = (v * np.sqrt(s)) @ vh
    return sq @ (w @ vh) @ sq


@dataclass(frozen=True)
class IterationStep:
    """Diagnostics for one Aluthge iterate."""

    index: int
    trace_norm2: float
    op_norm: float
    normality_defect: float
    dist_to_limit: float | None = None


@dataclass
class IterationTrace:
    """Record of an Aluthge iteration run.

    steps[k] describes the k-th iterate (step 0 is the input itself).
    ``converged`` reports whether successive iterates came within the
    tolerance before the step budget ran out; running out is a normal
    outcome, not an error.  ``limit`` holds the final iterate when
    converged.
    """

    steps: list[IterationStep] = field(default_factory=list)
    converged: bool = False
    limit: np.ndarray | None = None

    def trace_norms(self) -> np.ndarray:
        return np.array([s.trace_norm2 for s in self.steps])

    def op_norms(self) -> np.ndarray:
        return np.array([s.op_norm for s in self.steps])

    def defects(self) -> np.ndarray:
        return np.array([s.normality_defect for s in self.steps])

    def monotone_within(self, slack: float = 1e-9) -> bool:
        """Both norm sequences non-increasing up to the given slack."""
        tn = self.trace_norms()
        on = self.op_norms()
        return bool(
            np.all(np.diff(tn) <= slack) and np.all(np.diff(on) <= slack)
        )


def _step_record(k: int, x: np.ndarray, candidate: np.ndarray | None) -> IterationStep:
    dist = None if candidate is None else trace_norm2(x - candidate)
    return IterationStep(k, trace_norm2(x), op_norm(x), normality_defect(x), dist)


def iterate(
    t,
    max_steps: int = 100,
    tol: float = 1e-10,
    candidate_limit=None,
) -> IterationTrace:
    """Run the Aluthge iteration until successive iterates differ by less
    than ``tol`` in the two-norm, or until ``max_steps`` transforms have
    been applied.

    When a candidate limit is supplied every step also records its
    two-norm distance to it.
    """
    x = as_operator(t)
    if max_steps < 0:
        raise ValueError("max_steps must be nonnegative")
    if tol <= 0:
        raise ValueError("tol must be positive")
    candidate = None if candidate_limit is None else as_operator(candidate_limit)
    trace = IterationTrace()
    trace.steps.append(_step_record(0, x, candidate))
    for k in range(1, max_steps + 1):
        x_next = aluthge(x)
        trace.steps.append(_step_record(k, x_next, candidate))
        if trace_norm2(x_next - x) < tol:
            trace.converged = True
            trace.limit = x_next
            return trace
        x = x_next
    return trace


def regularizer(t, n: int) -> np.ndarray:
    """The invertible Hermitian floor sqrt(max(1/n, .)) applied to |t|.

    Conjugation by this matrix approximates the Aluthge transform while
    staying a similarity, which is what makes spectra comparable along the
    way; see regularizer_bounds for the quantitative error budget.
    """
    t = as_operator(t)
    if n < 1:
        raise ValueError("n must be at least 1")
    _, s, vh = _svd(t)
    v = vh.conj().T
    fs = np.sqrt(np.maximum(1.0 / n, s))
    a = (v * fs) @ vh
    return 0.5 * (a + a.conj().T)


@dataclass(frozen=True)
class BoundCheck:
    """One measured inequality: holds means lhs <= rhs up to float cushion."""

    name: str
    lhs: float
    rhs: float

    @property
    def margin(self) -> float:
        return self.rhs - self.lhs

    @property
    def holds(self) -> bool:
        return self.lhs <= self.rhs + _BOUND_SLACK * max(1.0, abs(self.rhs))


def regularizer_bounds(t, n: int) -> list[BoundCheck]:
    """Measure the five norm bounds tying the floored modulus to the
    Aluthge transform.

    With a = sqrt(max(1/n, .))(|t|) and r = op_norm(t):
      regularizer-norm:            |a|         <= max(n^-1/2, r^1/2)
      modulus-over-regularizer:    | |t| a^-1 | <= r^1/2
      regularizer-vs-sqrt:         |a - |t|^1/2| <= n^-1/2
      modulus-ratio-vs-sqrt:       | |t| a^-1 - |t|^1/2 | <= 1/(4 n^1/2)
      similarity-vs-transform:     | a t a^-1 - aluthge(t) | <= 5/(4 n^1/2) r^1/2

    The first four are exact spectral calculations on the singular values;
    the last is a dense matrix evaluation.
    """
    t = as_operator(t)
    if n < 1:
        raise ValueError("n must be at least 1")
    w, s, vh = _svd(t)
    v = vh.conj().T
    sqrt_n = np.sqrt(float(n))
    fs = np.sqrt(np.maximum(1.0 / n, s))
    sqrt_s = np.sqrt(s)
    r_half = sqrt_s[0] if s.size else 0.0

    lhs1 = float(np.max(fs))
    lhs2 = float(np.max(s / fs))
    lhs3 = float(np.max(np.abs(fs - sqrt_s)))
    lhs4 = float(np.max(np.abs(s / fs - sqrt_s)))

    a = (v * fs) @ vh
    a_inv = (v * (1.0 / fs)) @ vh
    sq = (v * sqrt_s) @ vh
    u = w @ vh
    transform = sq @ u @ sq
    lhs5 = float(np.linalg.norm(a @ t @ a_inv - transform, 2))

    return [
        BoundCheck("regularizer-norm", lhs1, max(1.0 / sqrt_n, r_half)),
        BoundCheck("modulus-over-regularizer", lhs2, r_half),
        BoundCheck("regularizer-vs-sqrt", lhs3, 1.0 / sqrt_n),
        BoundCheck("modulus-ratio-vs-sqrt", lhs4, 1.0 / (4.0 * sqrt_n)),
        BoundCheck("similarity-vs-transform", lhs5, 5.0 / (4.0 * sqrt_n) * r_half),
    ]


def kernel_regularizer_gap(t, n: int, rank_tol: float | None = None) -> float:
    """Two-norm gap between a^-1 |t|^(1/2) and the projection onto the
    orthogonal complement of ker t.

    The product equals min(1, sqrt(n s)) on each singular direction, so the
    gap vanishes as soon as 1/n falls below the smallest nonzero singular
    value and the kernel singular values are exact zeros.
    """
    t = as_operator(t)
    if n < 1:
        raise ValueError("n must be at least 1")
    _, s, _ = _svd(t)
    if rank_tol is None:
        rank_tol = float(np.finfo(float).eps * t.shape[0] * (s[0] if s.size else 0.0))
    h = np.where(s >= 1.0 / n, 1.0, np.sqrt(n * s))
    indicator = (s >= rank_tol).astype(float)
    return float(np.sqrt(np.mean((h - indicator) ** 2)))


def _error_grid(hi: float, kink: float) -> np.ndarray:
    pieces = [np.linspace(0.0, hi, 8001)]
    lo = max(kink * 1e-3, 1e-18)
    if lo < hi:
        pieces.append(np.geomspace(lo, hi, 4001))
    pieces.append(np.array([0.0, min(kink, hi), hi]))
    return np.unique(np.concatenate(pieces))


@dataclass(frozen=True)
class SurrogatePolynomials:
    """Polynomial pair approximating the Aluthge transform of any t with
    op_norm(t) <= radius via p(t* t) @ t @ q(t* t).

    p and q are Chebyshev series on [0, radius^2] approximating the floored
    root sqrt(max(1/level, sqrt(s))) and its reciprocal.  error_p is the
    plain uniform interpolation error; error_q_weighted measures the q
    error in the sqrt(s)-weighted norm, which is the weight the operator
    product applies through the modulus.  certified_bound is the proven
    worst-case transform error over the whole radius ball.
    """

    p: Chebyshev
    q: Chebyshev
    level: int
    degree_p: int
    degree_q: int
    error_p: float
    error_q_weighted: float
    poly_target: float
    similarity_bound: float
    certified_bound: float
    radius: float
    eps: float

    def __iter__(self):
        return iter((self.p, self.q))


def _certified_bound(radius: float, level: int, err_p: float, err_q_w: float) -> float:
    # With dp = sup |p(z^2) - sqrt(z)| <= err_p + 1/sqrt(level) and
    # dw = sup |z q(z^2) - sqrt(z)| <= err_q_w + 1/(4 sqrt(level)),
    # splitting M - transform = (p - sqrt) u |t| q + |t|^(1/2) u (|t| q - sqrt)
    # gives |M - transform| <= dp (sqrt(radius) + dw) + sqrt(radius) dw.
    root_r = np.sqrt(radius)
    dp = err_p + 1.0 / np.sqrt(level)
    dw = err_q_w + 1.0 / (4.0 * np.sqrt(level))
    return float(dp * (root_r + dw) + root_r * dw)


def polynomial_surrogate(radius: float, eps: float, degree_cap: int = 512) -> SurrogatePolynomials:
    """Construct real polynomials (p, q) so that p(t* t) t q(t* t)
    approximates the Aluthge transform of every t with op_norm(t) <= radius
    to within eps in operator norm.

    Both polynomials are Chebyshev interpolants of the floored root
    sqrt(max(1/level, sqrt(s))) and its reciprocal on [0, radius^2], with
    the degree doubled until the fit succeeds or hits ``degree_cap``.  The
    floor level starts where the similarity error 5/(4 sqrt(level)) *
    sqrt(radius) alone drops below the per-polynomial budget
    eps / (3 radius^(3/2)) and backs off geometrically if the cap cannot
    support so sharp a floor.  A fit at a given level is accepted when
    either each interpolant meets the budget in the uniform norm, or the
    assembled end-to-end certificate (see certified_bound) lands under
    eps; the reciprocal's error only ever enters the transform multiplied
    by the modulus, so its certificate weight is sqrt(s).

    Raises ApproximationFailure when no level certifies under the cap.
    """
    if radius < 1.0:
        raise InvalidOperatorError("radius must be at least 1")
    if eps <= 0.0:
        raise InvalidOperatorError("eps must be positive")
    if degree_cap < 1:
        raise ValueError("degree_cap must be positive")
    target = eps / (3.0 * radius ** 1.5)
    hi = radius * radius

    wanted = max(1, int(np.ceil((5.0 * np.sqrt(radius) / (4.0 * target)) ** 2)))
    degrees = [d for d in _DEFAULT_DEGREES if d < degree_cap] + [degree_cap]

    def fit_level(level: int):
        def fun_p(sv):
            sv = np.asarray(sv, dtype=float)
            return np.sqrt(np.maximum(1.0 / level, np.sqrt(np.maximum(sv, 0.0))))

        def fun_q(sv):
            return 1.0 / fun_p(sv)

        grid = _error_grid(hi, 1.0 / (level * level))
        weight = np.sqrt(grid)
        ref_p = fun_p(grid)
        ref_q = fun_q(grid)
        # The per-polynomial budget only proves the transform bound when the
        # floor level also satisfies the similarity formula, which is how
        # ``wanted`` was chosen.
        sim_ok = 5.0 / (4.0 * np.sqrt(level)) * np.sqrt(radius) < target
        best = None
        for deg in degrees:
            p = Chebyshev.interpolate(fun_p, deg, domain=[0.0, hi])
            q = Chebyshev.interpolate(fun_q, deg, domain=[0.0, hi])
            err_p = float(np.max(np.abs(p(grid) - ref_p)))
            err_q = float(np.max(np.abs(q(grid) - ref_q)))
            err_q_w = float(np.max(weight * np.abs(q(grid) - ref_q)))
            cert = _certified_bound(radius, level, err_p, err_q_w)
            cand = (p, q, deg, err_p, err_q_w, cert)
            if best is None or cert < best[5]:
                best = cand
            if sim_ok and err_p <= target and err_q <= target:
                return cand, True
            if cert < eps:
                return cand, True
        return best, False

    level = wanted
    ladder = []
    while level >= 1:
        ladder.append(level)
        if level == 1:
            break
        level //= 16
        level = max(level, 1)

    best_overall = None
    for level in ladder:
        cand, ok = fit_level(level)
        if ok:
            p, q, deg, err_p, err_q_w, cert = cand
            sim = 5.0 / (4.0 * np.sqrt(level)) * np.sqrt(radius)
            return SurrogatePolynomials(
                p, q, level, deg, deg, err_p, err_q_w, target, sim, cert, radius, eps
            )
        if best_overall is None or cand[5] < best_overall[1][5]:
            best_overall = (level, cand)
    level, (p, q, deg, err_p, err_q_w, cert) = best_overall
    raise ApproximationFailure(
        f"degree cap {degree_cap} cannot certify transform error below "
        f"{eps:.3e} on the radius-{radius:g} ball (best certificate "
        f"{cert:.3e} at floor level {level})",
        err_p,
        err_q_w,
        target,
    )


def matrix_chebval(a, series: Chebyshev) -> np.ndarray:
    """Evaluate a Chebyshev series at a matrix argument by the Clenshaw
    recurrence.  The matrix spectrum is expected inside series.domain."""
    a = as_operator(a)
    lo, hi = map(float, series.domain)
    coef = series.coef
    n = a.shape[0]
    eye = np.eye(n, dtype=complex)
    x = (2.0 * a - (lo + hi) * eye) * (1.0 / (hi - lo))
    b_next = np.zeros_like(eye)
    b_cur = np.zeros_like(eye)
    for c in coef[:0:-1]:
        b_cur, b_next = c * eye + 2.0 * (x @ b_cur) - b_next, b_cur
    return coef[0] * eye + x @ b_cur - b_next


def surrogate_apply(surrogate: SurrogatePolynomials, t) -> np.ndarray:
    """Evaluate p(t* t) @ t @ q(t* t) for the given surrogate pair."""
    t = as_operator(t)
    gram = t.conj().T @ t
    gram = 0.5 * (gram + gram.conj().T)
    return matrix_chebval(gram, surrogate.p) @ t @ matrix_chebval(gram, surrogate.q)


def continuity_probe(t, delta: float, trials: int, seed: int) -> float:
    """Largest operator-norm movement of the Aluthge transform over seeded
    random perturbations t + delta * contraction.

    The contractions are complex Ginibre matrices normalized to unit
    operator norm.  Returns the max over trials of
    op_norm(aluthge(t) - aluthge(t + delta * c)).
    """
    t = as_operator(t)
    if delta < 0:
        raise InvalidOperatorError("delta must be nonnegative")
    if trials < 1:
        raise ValueError("trials must be positive")
    rng = np.random.default_rng(seed)
    base = aluthge(t)
    worst = 0.0
    for _ in range(trials):
        c = random_contraction(t.shape[0], rng)
        moved = aluthge(t + delta * c)
        worst = max(worst, float(np.linalg.norm(base - moved, 2)))
    return worst

"""Pointwise trace minimization over the positive operator cone.

Minimize ``Tr(q A)`` over positive operators ``A`` subject to
``Tr(A) = a`` and ``Tr(S A) = b``, for a Krein-symmetric coefficient ``q``.
Substituting ``H = A S / b`` turns the problem into minimizing
``b Tr(qhat H)`` over ordinary psd matrices ``H`` with ``Tr H = 1`` and
``Tr(S H) = a/b``, where ``qhat = S q`` is Hermitian.  The minimizer for a
multiplier ``alpha`` is the projector onto the lowest eigenspace of
``qhat - alpha S``; the scalar map ``alpha -> a(alpha) = Tr(S F1)`` is
nondecreasing, so the constraint is met by bisection, with exact mixing
inside degenerate lowest eigenspaces on plateaus.  The attained multipliers
satisfy ``A (q - alpha - beta S) = 0`` with ``q - alpha - beta S`` positive.

The boundary ``|a| = b`` forces ``H`` into one definite eigenspace of ``S``;
multipliers then exist only when the compressed minimizing eigenvector
extends to an eigenvector of the full ``qhat``, in which case a whole line
segment/ray of admissible ``(alpha, beta)`` exists and is reported as a
:class:`MultiplierFamily`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.optimize

from . import tolerances
from .errors import (
    InfeasibleProblemError,
    NonUniqueMultipliersError,
    NumericalError,
    ValidationError,
)
from .krein import SignatureSpace, is_positive, is_symmetric

__all__ = [
    "PointwiseProblem",
    "PointwiseSolution",
    "MultiplierFamily",
    "AlphaValue",
    "beta_of_alpha",
    "a_of_alpha",
    "solve",
    "brute_force",
    "lagrange_from_point",
    "admissible_alpha_interval",
]

_DEGENERACY_REL = 1e-8
_BISECT_MAX = 300


def _hermitian_coefficient(q: np.ndarray, space: SignatureSpace) -> np.ndarray:
    q = space.check_operator(q)
    if not is_symmetric(q, space):
        raise ValidationError("coefficient operator must be Krein symmetric")
    qhat = space.signature[:, None] * q
    return 0.5 * (qhat + qhat.conj().T)


@dataclass(frozen=True)
class PointwiseProblem:
    """Data ``(q, a, b)`` of the pointwise trace-minimization problem."""

    space: SignatureSpace
    q: np.ndarray
    a: float
    b: float

    def __post_init__(self):
        q = self.space.check_operator(self.q)
        if not is_symmetric(q, self.space):
            raise ValidationError("coefficient operator must be Krein symmetric")
        a = float(self.a)
        b = float(self.b)
        if b < 0:
            raise InfeasibleProblemError(f"signed-trace target must be >= 0, got {b}")
        if abs(a) > b + tolerances.FEASIBILITY * max(b, 1.0):
            raise InfeasibleProblemError(
                f"targets require |a| <= b, got a={a}, b={b}"
            )
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "a", min(max(a, -b), b))
        object.__setattr__(self, "b", b)


@dataclass(frozen=True)
class MultiplierFamily:
    """Admissible multipliers ``{(alpha, offset - slope*alpha)}`` on an alpha interval.

    ``slope`` is +1 on the particle boundary (a = +b), -1 on the sea
    boundary (a = -b), and 0 for a unique interior pair.  Infinite interval
    ends encode rays.
    """

    slope: int
    offset: float
    alpha_min: float
    alpha_max: float
    canonical_alpha: float
    canonical_beta: float

    def beta(self, alpha: float) -> float:
        return self.offset - self.slope * alpha

    def contains(self, alpha: float, beta: float, tol: float = 1e-9) -> bool:
        span = max(abs(self.offset), 1.0)
        return (
            self.alpha_min - tol * span <= alpha <= self.alpha_max + tol * span
            and abs(beta - self.beta(alpha)) <= tol * span
        )


@dataclass(frozen=True)
class PointwiseSolution:
    """Minimizer with multipliers; ``tag`` records the structural case."""

    A: np.ndarray
    alpha: float
    beta: float
    objective: float
    tag: str
    multipliers_valid: bool
    family: MultiplierFamily | None


@dataclass(frozen=True)
class AlphaValue:
    """Value (or reachable interval, when degenerate) of a(alpha) with projector."""

    a_min: float
    a_max: float
    projector: np.ndarray
    degenerate: bool

    @property
    def a(self) -> float:
        return 0.5 * (self.a_min + self.a_max)


def beta_of_alpha(q: np.ndarray, space: SignatureSpace, alpha: float) -> float:
    """Smallest eigenvalue of the Hermitian matrix ``S q - alpha S``."""
    qhat = _hermitian_coefficient(q, space)
    shifted = qhat - alpha * np.diag(space.signature).astype(complex)
    return float(np.linalg.eigvalsh(shifted)[0])


def _lowest_cluster(H: np.ndarray, rel_tol: float):
    w, V = np.linalg.eigh(H)
    scale = max(abs(w[0]), abs(w[-1]), 1.0)
    k = int(np.sum(w <= w[0] + rel_tol * scale))
    return w, V[:, :k]


def a_of_alpha(
    q: np.ndarray,
    space: SignatureSpace,
    alpha: float,
    degeneracy_tol: float = _DEGENERACY_REL,
) -> AlphaValue:
    """Signed trace of the lowest eigenprojector of ``S q - alpha S``.

    When the lowest eigenvalue is degenerate, the reachable values of
    ``Tr(S H)`` over normalized psd ``H`` inside the eigenspace form the
    interval spanned by the spectrum of the compressed signature
    ``V^H S V``; both endpoints are reported.
    """
    qhat = _hermitian_coefficient(q, space)
    sig = space.signature
    shifted = qhat - alpha * np.diag(sig).astype(complex)
    _, V = _lowest_cluster(shifted, degeneracy_tol)
    F1 = V @ V.conj().T
    if V.shape[1] == 1:
        val = float(np.real(np.vdot(V[:, 0], sig * V[:, 0])))
        return AlphaValue(a_min=val, a_max=val, projector=F1, degenerate=False)
    B = V.conj().T @ (sig[:, None] * V)
    s = np.linalg.eigvalsh(0.5 * (B + B.conj().T))
    return AlphaValue(a_min=float(s[0]), a_max=float(s[-1]), projector=F1, degenerate=True)


def _mixed_density(qhat: np.ndarray, sig: np.ndarray, alpha: float, target: float, rel_tol: float):
    """Psd ``H`` in the lowest eigenspace of ``qhat - alpha S`` with
    ``Tr H = 1`` and ``Tr(S H) = target`` hit exactly; None if unreachable."""
    shifted = qhat - alpha * np.diag(sig).astype(complex)
    w, V = _lowest_cluster(shifted, rel_tol)
    B = V.conj().T @ (sig[:, None] * V)
    s, W = np.linalg.eigh(0.5 * (B + B.conj().T))
    atol = 1e-13 * max(1.0, abs(s[0]), abs(s[-1]))
    if target < s[0] - atol or target > s[-1] + atol:
        return None
    vecs = V @ W
    lo = vecs[:, 0]
    hi = vecs[:, -1]
    if s[-1] - s[0] <= atol:
        H = np.outer(lo, lo.conj())
    else:
        c = (s[-1] - target) / (s[-1] - s[0])
        c = min(max(c, 0.0), 1.0)
        H = c * np.outer(lo, lo.conj()) + (1.0 - c) * np.outer(hi, hi.conj())
    return H


def _gershgorin_radius(qhat: np.ndarray) -> float:
    return float(np.max(np.sum(np.abs(qhat), axis=1)))


def _boundary_solution(problem: PointwiseProblem, t: int) -> PointwiseSolution:
    """Minimizer on the boundary a = t*b: density confined to the S = t eigenspace."""
    space = problem.space
    qhat = _hermitian_coefficient(problem.q, space)
    sig = space.signature
    n, d = space.n, space.dim
    idx = np.arange(0, n) if t > 0 else np.arange(n, d)
    block = qhat[np.ix_(idx, idx)]
    w, W = np.linalg.eigh(0.5 * (block + block.conj().T))
    m = float(w[0])
    v = np.zeros(d, complex)
    v[idx] = W[:, 0]
    H = np.outer(v, v.conj())
    A = problem.b * H * sig[None, :]
    objective = float(np.real(np.trace(problem.q @ A)))

    scale = max(float(np.linalg.norm(qhat, 2)), 1.0)
    extension_residual = float(np.linalg.norm(qhat @ v - m * v))
    tag = "boundary-particle" if t > 0 else "boundary-sea"
    if extension_residual > 1e-10 * scale:
        return PointwiseSolution(
            A=A,
            alpha=0.0,
            beta=m,
            objective=objective,
            tag=tag + "-no-multipliers",
            multipliers_valid=False,
            family=None,
        )

    # beta = m - t*alpha keeps (qhat - alpha S - beta) v = 0; the psd set
    # F(alpha) = (qhat - m) + alpha (t - S) is monotone in t*alpha, so the
    # admissible alphas form a ray whose endpoint we bisect.
    def feasible(alpha: float) -> bool:
        F = qhat - m * np.eye(d) + alpha * (t * np.eye(d) - np.diag(sig))
        return float(np.linalg.eigvalsh(0.5 * (F + F.conj().T))[0]) >= -tolerances.PSD * scale

    far = 4.0 * scale + 4.0
    if not feasible(t * far):
        return PointwiseSolution(
            A=A,
            alpha=0.0,
            beta=m,
            objective=objective,
            tag=tag + "-no-multipliers",
            multipliers_valid=False,
            family=None,
        )
    # Endpoint of the ray: last infeasible point toward -t*infinity.
    good = t * far
    bad = -t * far
    if feasible(bad):
        endpoint = bad
    else:
        for _ in range(200):
            mid = 0.5 * (good + bad)
            if feasible(mid):
                good = mid
            else:
                bad = mid
        endpoint = good
    if t > 0:
        alpha_min, alpha_max = endpoint, np.inf
    else:
        alpha_min, alpha_max = -np.inf, endpoint
    canonical_alpha = 0.0 if alpha_min <= 0.0 <= alpha_max else endpoint
    family = MultiplierFamily(
        slope=t,
        offset=m,
        alpha_min=alpha_min,
        alpha_max=alpha_max,
        canonical_alpha=canonical_alpha,
        canonical_beta=m - t * canonical_alpha,
    )
    return PointwiseSolution(
        A=A,
        alpha=family.canonical_alpha,
        beta=family.canonical_beta,
        objective=objective,
        tag=tag,
        multipliers_valid=True,
        family=family,
    )


def solve(problem: PointwiseProblem, degeneracy_tol: float = _DEGENERACY_REL) -> PointwiseSolution:
    """Solve the pointwise minimization; see the module docstring.

    Interior targets (|a| < b) give unique multipliers; boundary targets
    are tagged and may carry a :class:`MultiplierFamily` (or none at all,
    when no multiplier pair exists).  ``a = b = 0`` returns the trivial
    minimizer ``A = 0``.
    """
    space = problem.space
    a, b = problem.a, problem.b
    d = space.dim
    if b == 0.0:
        return PointwiseSolution(
            A=np.zeros((d, d), complex),
            alpha=0.0,
            beta=beta_of_alpha(problem.q, space, 0.0),
            objective=0.0,
            tag="trivial",
            multipliers_valid=True,
            family=None,
        )
    t = a / b
    feas_tol = tolerances.FEASIBILITY
    if t >= 1.0 - feas_tol:
        return _boundary_solution(problem, +1)
    if t <= -1.0 + feas_tol:
        return _boundary_solution(problem, -1)

    qhat = _hermitian_coefficient(problem.q, space)
    sig = space.signature

    def value(alpha: float) -> AlphaValue:
        return a_of_alpha(problem.q, space, alpha, degeneracy_tol)

    radius = _gershgorin_radius(qhat) + 1.0
    lo, hi = -radius, radius
    for _ in range(80):
        if value(lo).a_min <= t:
            break
        lo *= 2.0
    for _ in range(80):
        if value(hi).a_max >= t:
            break
        hi *= 2.0

    alpha_star = None
    H = None
    for _ in range(_BISECT_MAX):
        mid = 0.5 * (lo + hi)
        av = value(mid)
        if av.a_min - 1e-13 <= t <= av.a_max + 1e-13:
            H = _mixed_density(qhat, sig, mid, t, degeneracy_tol)
            if H is not None:
                alpha_star = mid
                break
        if av.a_max < t:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-16 * max(abs(lo), abs(hi), 1.0):
            break
    if H is None:
        # Bracket collapsed onto a jump whose degeneracy is only resolved
        # with a wider clustering tolerance.
        mid = 0.5 * (lo + hi)
        for widened in (1e-7, 1e-6, 1e-5):
            H = _mixed_density(qhat, sig, mid, t, widened)
            if H is not None:
                alpha_star = mid
                break
    if H is None:
        raise NumericalError("bisection failed to reach the signed-trace target")

    A = b * H * sig[None, :]
    beta = float(np.linalg.eigvalsh(qhat - alpha_star * np.diag(sig).astype(complex))[0])
    objective = float(np.real(np.trace(problem.q @ A)))
    return PointwiseSolution(
        A=A,
        alpha=float(alpha_star),
        beta=beta,
        objective=objective,
        tag="interior",
        multipliers_valid=True,
        family=None,
    )


# ---------------------------------------------------------------------------
# Independent oracle: direct minimization in the factorized parametrization
# ---------------------------------------------------------------------------

def _project_columns(M: np.ndarray, n: int, a: float, b: float, rng) -> np.ndarray:
    """Scale the two column groups of M so A = S M^H M meets both constraints.

    Column group norms satisfy Tr(A) = s_+ - s_- and Tr(SA) = s_+ + s_-
    with s_± the squared norms of the first/last n columns, so the targets
    pin them to (b+a)/2 and (b-a)/2 exactly.
    """
    M = M.copy()
    targets = (0.5 * (b + a), 0.5 * (b - a))
    for group, target in zip((slice(0, n), slice(n, 2 * n)), targets):
        cur = float(np.sum(np.abs(M[:, group]) ** 2))
        if cur <= 1e-300:
            if target <= 0.0:
                M[:, group] = 0.0
                continue
            fill = rng.standard_normal(M[:, group].shape) + 1j * rng.standard_normal(
                M[:, group].shape
            )
            M[:, group] = fill
            cur = float(np.sum(np.abs(M[:, group]) ** 2))
        M[:, group] *= np.sqrt(max(target, 0.0) / cur)
    return M


def brute_force(
    problem: PointwiseProblem,
    samples: int = 400,
    refinements: int = 6,
    seed: int = 0,
) -> float:
    """Best objective found by random search plus local refinement.

    Works in the parametrization ``A = S M^H M`` (positivity for free) with
    exact constraint projection by column-group scaling, and refines the
    best random starts with a quasi-Newton local search on the projected
    objective.  Serves as an independent cross-check of :func:`solve`.
    """
    space = problem.space
    if space.n > 2:
        raise ValidationError("the brute-force oracle is limited to n <= 2")
    a, b = problem.a, problem.b
    n, d = space.n, space.dim
    if b == 0.0:
        return 0.0
    sig = space.signature
    qS = problem.q * sig[None, :]
    rng = np.random.default_rng(seed)

    def objective_of(M: np.ndarray) -> float:
        return float(np.real(np.trace(qS @ M.conj().T @ M)))

    def unpack(x: np.ndarray) -> np.ndarray:
        half = d * d
        return (x[:half] + 1j * x[half:]).reshape(d, d)

    def pack(M: np.ndarray) -> np.ndarray:
        return np.concatenate([M.real.ravel(), M.imag.ravel()])

    def projected_objective(x: np.ndarray) -> float:
        return objective_of(_project_columns(unpack(x), n, a, b, rng))

    best: list = []
    for _ in range(samples):
        M = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        M = _project_columns(M, n, a, b, rng)
        best.append((objective_of(M), M))
    best.sort(key=lambda pair: pair[0])

    best_val = best[0][0]
    for _, M0 in best[:refinements]:
        res = scipy.optimize.minimize(
            projected_objective,
            pack(M0),
            method="L-BFGS-B",
            options={"maxiter": 300},
        )
        candidate = objective_of(_project_columns(unpack(res.x), n, a, b, rng))
        best_val = min(best_val, candidate)
    return best_val


def lagrange_from_point(
    q: np.ndarray,
    A: np.ndarray,
    space: SignatureSpace,
    strict: bool = True,
    tol: float = tolerances.EL_RESIDUAL,
):
    """Recover the multipliers certifying stationarity of ``A``.

    With ``strict=True`` the point must satisfy ``|Tr A| < Tr(S A)``;
    then ``(alpha, beta)`` is unique and returned as a pair.  On the
    boundary the admissible multipliers form a family; ``strict=True``
    raises :class:`~kreinact.errors.NonUniqueMultipliersError` carrying it,
    ``strict=False`` returns a :class:`MultiplierFamily` (degenerate to a
    single point at interior inputs).  Points that are not stationary for
    any multipliers raise :class:`~kreinact.errors.ValidationError`.
    """
    q = space.check_operator(q)
    A = space.check_operator(A)
    if not is_positive(A, space):
        raise ValidationError("the candidate operator must be positive")
    qhat = _hermitian_coefficient(q, space)
    sig = space.signature
    a = float(np.real(np.trace(A)))
    b = float(np.real(np.trace(sig[:, None] * A)))
    scale = max(float(np.linalg.norm(qhat, 2)), 1.0)
    bscale = max(b, 1e-300)

    if abs(a) >= b - tolerances.FEASIBILITY * max(b, 1.0):
        t = +1 if a >= 0 else -1
        problem = PointwiseProblem(space=space, q=q, a=float(t * b), b=b)
        sol = _boundary_solution(problem, t)
        if sol.family is None:
            raise ValidationError(
                "boundary point admits no Lagrange multipliers (compressed "
                "minimizer does not extend to an eigenvector)"
            )
        if strict:
            raise NonUniqueMultipliersError(
                "|trace| = signed trace: multipliers are not unique",
                family=sol.family,
            )
        return sol.family

    # Interior: H = A S / b is psd; its range vectors v must satisfy
    # (qhat - alpha S - beta) v = 0, a full-rank least-squares system.
    H = (A * sig[None, :]) / bscale
    H = 0.5 * (H + H.conj().T)
    w, V = np.linalg.eigh(H)
    keep = w > 1e-12 * max(w[-1], 1e-300)
    vecs = V[:, keep]
    if vecs.shape[1] == 0:
        raise ValidationError("candidate operator has numerically empty range")
    rows_a = (sig[:, None] * vecs).T.reshape(-1, 1)
    rows_b = vecs.T.reshape(-1, 1)
    rhs = (qhat @ vecs).T.ravel()
    system = np.hstack([rows_a, rows_b])
    system_real = np.vstack([system.real, system.imag])
    rhs_real = np.concatenate([rhs.real, rhs.imag])
    sol_vec, _, rank, _ = np.linalg.lstsq(system_real, rhs_real, rcond=None)
    if rank < 2:
        raise NonUniqueMultipliersError(
            "stationarity system is rank deficient; multipliers not unique"
        )
    alpha, beta = float(sol_vec[0]), float(sol_vec[1])

    shifted = qhat - alpha * np.diag(sig).astype(complex) - beta * np.eye(space.dim)
    residual = float(np.linalg.norm(A @ (q - alpha * np.eye(space.dim) - beta * np.diag(sig)), 2))
    min_eig = float(np.linalg.eigvalsh(0.5 * (shifted + shifted.conj().T))[0])
    norm_A = max(float(np.linalg.norm(A, 2)), 1e-300)
    if residual > tol * scale * norm_A or min_eig < -tolerances.PSD * scale:
        raise ValidationError(
            "candidate operator is not stationary: annihilation residual "
            f"{residual:.2e}, positivity margin {min_eig:.2e}"
        )
    if strict:
        return alpha, beta
    return MultiplierFamily(
        slope=0,
        offset=beta,
        alpha_min=alpha,
        alpha_max=alpha,
        canonical_alpha=alpha,
        canonical_beta=beta,
    )


def admissible_alpha_interval(
    q: np.ndarray,
    space: SignatureSpace,
    beta: float,
    alpha_feasible: float,
    tol: float = 1e-12,
):
    """Interval of alphas keeping ``S q - alpha S - beta`` psd (at fixed beta).

    The psd condition is linear in alpha, so the admissible set is a closed
    interval; both endpoints are found by expanding from the supplied
    feasible alpha and bisecting.
    """
    qhat = _hermitian_coefficient(q, space)
    sig = np.diag(space.signature).astype(complex)
    scale = max(float(np.linalg.norm(qhat, 2)), 1.0)

    def feasible(alpha: float) -> bool:
        F = qhat - alpha * sig - beta * np.eye(space.dim)
        return float(np.linalg.eigvalsh(0.5 * (F + F.conj().T))[0]) >= -tolerances.PSD * scale

    if not feasible(alpha_feasible):
        raise ValidationError("the supplied alpha is not feasible at this beta")

    def endpoint(direction: float) -> float:
        step = max(1.0, abs(alpha_feasible))
        inner = alpha_feasible
        outer = alpha_feasible + direction * step
        grow = 0
        while feasible(outer):
            inner = outer
            outer += direction * step
            step *= 2.0
            grow += 1
            if grow > 80:
                return direction * np.inf
        for _ in range(200):
            mid = 0.5 * (inner + outer)
            if feasible(mid):
                inner = mid
            else:
                outer = mid
            if abs(outer - inner) <= tol * max(1.0, abs(inner)):
                break
        return inner

    return endpoint(-1.0), endpoint(+1.0)

"""Linear algebra on a finite-dimensional indefinite inner product space.

The space is ``V = C^(2n)`` equipped with the inner product
``<<u|v>> = u^H S v``, where the signature operator ``S`` is diagonal with
``n`` entries ``+1`` followed by ``n`` entries ``-1``.  An operator ``A`` is

* *symmetric*  iff ``S @ A`` is Hermitian,
* *positive*   iff ``S @ A`` is Hermitian positive semi-definite.

Positive operators have real spectrum, at most ``n`` positive and at most
``n`` negative eigenvalues, and definite invariant subspaces for the
nonzero spectrum; nontrivial Jordan structure can hide only in the zero
spectral point.  All routines here exploit the congruence trick: with
``H = S @ A >= 0`` and ``R = sqrt(H)``, the Hermitian matrix
``Y = R @ S @ R`` has the same spectrum as ``A`` (including multiplicities)
and its eigenprojectors map to the spectral projectors of ``A`` via
``P = S @ R @ Pi @ R``.  This avoids non-normal eigenproblems entirely for
positive operands.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.linalg as sla

from . import tolerances
from .errors import DefectivePencilError, ValidationError

__all__ = [
    "SignatureSpace",
    "SpectralSplit",
    "krein_adjoint",
    "is_symmetric",
    "is_positive",
    "symmetric_part",
    "positive_spectrum",
    "spectral_split",
    "psd_factorize",
    "epsilon_diagonalize",
    "product_annihilates",
    "classified_spectrum",
]


@dataclass(frozen=True)
class SignatureSpace:
    """The inner product space ``C^(2n)`` with signature ``(n, n)``.

    Parameters
    ----------
    n : int
        Spin dimension; the space has dimension ``2n``.
    """

    n: int

    def __post_init__(self):
        if not isinstance(self.n, (int, np.integer)) or self.n < 1:
            raise ValidationError(f"spin dimension must be a positive integer, got {self.n!r}")

    @property
    def dim(self) -> int:
        return 2 * self.n

    @cached_property
    def signature(self) -> np.ndarray:
        """Diagonal of ``S`` as a 1-d array ``(+1, ..., +1, -1, ..., -1)``."""
        sig = np.concatenate([np.ones(self.n), -np.ones(self.n)])
        sig.flags.writeable = False
        return sig

    @cached_property
    def signature_matrix(self) -> np.ndarray:
        """The signature operator ``S`` as a dense matrix."""
        mat = np.diag(self.signature).astype(complex)
        mat.flags.writeable = False
        return mat

    def inner(self, u: np.ndarray, v: np.ndarray) -> complex:
        """Indefinite inner product ``<<u|v>> = u^H S v``."""
        u = np.asarray(u)
        v = np.asarray(v)
        return complex(np.vdot(u, self.signature * v))

    def check_operator(self, A: np.ndarray) -> np.ndarray:
        """Validate shape/dtype of an operator on this space; return as complex array."""
        A = np.asarray(A, dtype=complex)
        if A.shape != (self.dim, self.dim):
            raise ValidationError(
                f"operator shape {A.shape} does not match space dimension {self.dim}"
            )
        if not np.all(np.isfinite(A)):
            raise ValidationError("operator contains non-finite entries")
        return A


def _hermitize(H: np.ndarray) -> np.ndarray:
    return 0.5 * (H + H.conj().T)


def _hermitian_sqrt(H: np.ndarray) -> np.ndarray:
    """Principal square root of a Hermitian psd matrix (eigenvalues clipped at 0)."""
    w, V = np.linalg.eigh(_hermitize(H))
    w = np.clip(w, 0.0, None)
    return (V * np.sqrt(w)) @ V.conj().T


def _scale(A: np.ndarray) -> float:
    """Robust magnitude used to make tolerances relative."""
    nrm = np.linalg.norm(A, 2) if A.size else 0.0
    return max(float(nrm), 1.0)


def krein_adjoint(A: np.ndarray, space: SignatureSpace) -> np.ndarray:
    """Adjoint with respect to the indefinite inner product: ``A* = S A^H S``."""
    A = space.check_operator(A)
    s = space.signature
    return s[:, None] * A.conj().T * s[None, :]


def is_symmetric(A: np.ndarray, space: SignatureSpace, tol: float = tolerances.HERMITICITY) -> bool:
    """True iff ``S @ A`` is Hermitian within ``tol`` (relative)."""
    A = space.check_operator(A)
    H = space.signature[:, None] * A
    defect = np.linalg.norm(H - H.conj().T, 2)
    return bool(defect <= tol * _scale(A))


def is_positive(A: np.ndarray, space: SignatureSpace, tol: float = tolerances.PSD) -> bool:
    """True iff ``A`` is positive: ``S @ A`` Hermitian with spectrum >= ``-tol`` (relative)."""
    A = space.check_operator(A)
    if not is_symmetric(A, space, tol=max(tol, tolerances.HERMITICITY)):
        return False
    H = _hermitize(space.signature[:, None] * A)
    w_min = float(np.linalg.eigvalsh(H)[0])
    return w_min >= -tol * _scale(A)


def symmetric_part(A: np.ndarray, space: SignatureSpace) -> np.ndarray:
    """Projection of ``A`` onto the symmetric operators: ``(A + A*)/2``."""
    return 0.5 * (space.check_operator(A) + krein_adjoint(A, space))


def _require_positive(A: np.ndarray, space: SignatureSpace, tol: float, who: str) -> np.ndarray:
    A = space.check_operator(A)
    if not is_positive(A, space, tol=tol):
        raise ValidationError(f"{who} requires a positive operator")
    return A


def positive_spectrum(A: np.ndarray, space: SignatureSpace) -> np.ndarray:
    """Real spectrum of a positive operator, ascending, with multiplicities.

    Computed from the Hermitian congruence ``Y = sqrt(S A) S sqrt(S A)``,
    which shares the spectrum of ``A``; no non-normal solve is involved.
    """
    A = _require_positive(A, space, tolerances.PSD, "positive_spectrum")
    R = _hermitian_sqrt(space.signature[:, None] * A)
    Y = _hermitize(R @ space.signature_matrix @ R)
    return np.linalg.eigvalsh(Y)


@dataclass(frozen=True)
class SpectralSplit:
    """Decomposition of a positive operator into spectral components.

    ``plus``/``minus`` collect the strictly positive/negative spectrum (with
    definite invariant subspaces); ``zero`` carries the zero spectral point,
    the only place where nontrivial Jordan structure may live.  The parts
    commute with the input and sum back to it.
    """

    plus: np.ndarray
    zero: np.ndarray
    minus: np.ndarray
    eigenvalues: np.ndarray

    @property
    def total(self) -> np.ndarray:
        return self.plus + self.zero + self.minus


def spectral_split(
    A: np.ndarray,
    space: SignatureSpace,
    zero_tol: float = tolerances.ZERO_EIGENVALUE,
) -> SpectralSplit:
    """Split a positive operator into plus/zero/minus spectral parts.

    Eigenvalues with ``|lambda| <= zero_tol * ||A||`` are grouped into the
    zero component.  The plus part ``S R Pi+ R`` (with ``R = sqrt(S A)`` and
    ``Pi+`` the positive eigenprojector of ``R S R``) is itself positive with
    positive definite image; symmetrically for the minus part.
    """
    A = _require_positive(A, space, tolerances.PSD, "spectral_split")
    S = space.signature_matrix
    R = _hermitian_sqrt(space.signature[:, None] * A)
    Y = _hermitize(R @ S @ R)
    w, V = np.linalg.eigh(Y)
    thresh = zero_tol * max(float(np.linalg.norm(A, 2)), 1e-300)

    def component(mask: np.ndarray) -> np.ndarray:
        if not mask.any():
            return np.zeros_like(A)
        Vc = V[:, mask]
        return S @ R @ (Vc @ Vc.conj().T) @ R

    plus = component(w > thresh)
    minus = component(w < -thresh)
    zero = A - plus - minus
    return SpectralSplit(plus=plus, zero=zero, minus=minus, eigenvalues=w)


def psd_factorize(A: np.ndarray, space: SignatureSpace) -> np.ndarray:
    """Factor a positive operator as ``A = S @ M^H @ M``.

    Returns the principal Hermitian square root ``M = sqrt(S A)``, so that
    ``M^H M = M @ M = S A``.
    """
    A = _require_positive(A, space, tolerances.PSD, "psd_factorize")
    return _hermitian_sqrt(space.signature[:, None] * A)


def _normalize_krein_columns(
    lam: np.ndarray,
    X: np.ndarray,
    space: SignatureSpace,
    eps: float,
    cluster_tol: float,
):
    """Krein-normalize an eigenbasis so that ``X^H S X = S`` exactly in pattern.

    Eigenvalues are sorted ascending and grouped into clusters of width
    ``cluster_tol``; within each cluster the indefinite Gram matrix is
    re-diagonalized.  Raises :class:`DefectivePencilError` when a (nearly)
    neutral eigenvector shows up or the signature does not come out (n, n).
    """
    order = np.argsort(lam)
    lam = lam[order]
    X = X[:, order]
    sig = space.signature
    d = space.dim

    cols = []
    signs = []
    vals = []
    i = 0
    while i < d:
        j = i + 1
        while j < d and lam[j] - lam[j - 1] <= cluster_tol:
            j += 1
        Xc = X[:, i:j]
        gram = _hermitize(Xc.conj().T @ (sig[:, None] * Xc))
        gw, gV = np.linalg.eigh(gram)
        if np.min(np.abs(gw)) < 1e-10 * max(np.max(np.abs(gw)), 1e-300):
            raise DefectivePencilError(
                "eigenbasis has a nearly neutral direction; retry with a different shift",
                suggested_epsilon=eps * 1.6180339887498949,
            )
        Xc = Xc @ (gV / np.sqrt(np.abs(gw))[None, :])
        for k in range(j - i):
            cols.append(Xc[:, k])
            signs.append(1.0 if gw[k] > 0 else -1.0)
            vals.append(np.mean(lam[i:j]) if j - i > 1 else lam[i])
        i = j

    signs = np.asarray(signs)
    if int(np.sum(signs > 0)) != space.n:
        raise DefectivePencilError(
            "eigenbasis signature does not match (n, n); retry with a different shift",
            suggested_epsilon=eps * 1.6180339887498949,
        )
    # Positive-signature columns first, then negative, eigenvalues ascending
    # within each group: X^H S X = S in the standard pattern.
    idx = np.concatenate([np.where(signs > 0)[0], np.where(signs < 0)[0]])
    X_out = np.stack([cols[k] for k in idx], axis=1)
    lam_out = np.asarray([vals[k] for k in idx])
    return lam_out, X_out


def epsilon_diagonalize(H: np.ndarray, space: SignatureSpace, eps: float):
    """Approximately diagonalize a symmetric operator by a pseudo-unitary basis.

    Diagonalizes the shifted operator ``H + eps*S`` exactly in a basis that is
    pseudo-unitary (``U* = S U^H S = U^{-1}``), so that

        ``U @ H @ U* = D + Delta``,   ``||Delta|| -> 0`` as ``eps -> 0``,

    with ``D`` diagonal carrying the eigenvalues of ``H + eps*S``.  For a
    diagonalizable ``H`` the remainder is exactly ``-eps * U S U^{-1}`` and
    decays linearly in ``eps``; a Jordan block at zero degrades the rate to
    ``sqrt(eps)``.

    Parameters
    ----------
    H : array
        Symmetric operator (``S @ H`` Hermitian).
    eps : float
        Positive shift; the pencil must be diagonalizable at this shift.

    Returns
    -------
    (U, D, Delta) : arrays
        ``U`` pseudo-unitary, ``D`` diagonal matrix, ``Delta = U H U* - D``.

    Raises
    ------
    DefectivePencilError
        If the shifted operator is (nearly) defective; the error carries a
        suggested replacement shift and the call may be retried.
    """
    H = space.check_operator(H)
    if eps <= 0:
        raise ValidationError(f"shift must be positive, got {eps}")
    if not is_symmetric(H, space):
        raise ValidationError("epsilon_diagonalize requires a symmetric operator")

    S = space.signature_matrix
    sig = space.signature
    scale = _scale(H)
    K = _hermitize(sig[:, None] * H) + eps * np.eye(space.dim)
    kw, kV = np.linalg.eigh(K)

    if kw[0] > 1e-14 * max(kw[-1], 1e-300):
        # Positive-definite K = S H + eps: use the stable Hermitian congruence.
        K_half = (kV * np.sqrt(kw)) @ kV.conj().T
        K_inv_half = (kV / np.sqrt(kw)) @ kV.conj().T
        Y = _hermitize(K_half @ S @ K_half)
        lam, V = np.linalg.eigh(Y)
        X = K_inv_half @ V
    else:
        # Indefinite or singular pencil: generic dense eigensolve.
        lam, X = sla.eig(H + eps * S)
        if np.max(np.abs(lam.imag)) > 1e-9 * scale:
            raise DefectivePencilError(
                "shifted operator has non-real spectrum; retry with a different shift",
                suggested_epsilon=eps * 1.6180339887498949,
            )
        lam = lam.real

    cluster_tol = 1e-9 * scale
    lam, X = _normalize_krein_columns(lam, X, space, eps, cluster_tol)

    U = sig[:, None] * X.conj().T * sig[None, :]  # = S X^H S = X^{-1}
    D = np.diag(lam).astype(complex)
    Delta = U @ H @ X - D
    return U, D, Delta


def product_annihilates(
    A: np.ndarray,
    B: np.ndarray,
    space: SignatureSpace,
    tol: float = 1e-10,
) -> bool:
    """Whether the positive pair has vanishing trace pairing, hence zero product.

    For positive ``A``, ``B`` the pairing ``Tr(A B)`` is real and nonnegative,
    and ``Tr(A B) = 0`` forces ``A B = 0``.  Returns ``True`` iff
    ``|Tr(A B)| <= tol``; in that case the implication is asserted by checking
    ``||A B|| <= sqrt(tol * ||A|| * ||B||) + 10 tol`` and a
    :class:`ValidationError` is raised if the input operators were not
    actually positive enough for the implication to hold.
    """
    A = _require_positive(A, space, tolerances.PSD, "product_annihilates")
    B = _require_positive(B, space, tolerances.PSD, "product_annihilates")
    t = np.trace(A @ B)
    if abs(t.imag) > 1e-9 * _scale(A) * _scale(B):
        raise ValidationError("trace pairing of positive operators must be real")
    if abs(t.real) > tol:
        return False
    bound = np.sqrt(max(tol, 0.0) * np.linalg.norm(A, 2) * np.linalg.norm(B, 2)) + 10.0 * tol
    prod_norm = float(np.linalg.norm(A @ B, 2))
    if prod_norm > bound:
        raise ValidationError(
            f"trace pairing vanished but ||A B|| = {prod_norm:.3e} exceeds {bound:.3e}; "
            "inputs are not positive to working precision"
        )
    return True


def classified_spectrum(T: np.ndarray, space: SignatureSpace, zero_tol: float = tolerances.ZERO_EIGENVALUE):
    """Spectrum of a symmetric operator with eigenspace definiteness labels.

    Returns a list of ``(eigenvalue, multiplicity, definiteness)`` with
    definiteness ``+1`` (positive definite eigenspace under the indefinite
    inner product), ``-1`` (negative definite), or ``0`` (indefinite,
    degenerate, or non-real pair).  Used for spectral-interval diagnostics.
    """
    T = space.check_operator(T)
    if not is_symmetric(T, space):
        raise ValidationError("classified_spectrum requires a symmetric operator")
    lam, X = sla.eig(T)
    scale = _scale(T)
    out = []
    used = np.zeros(len(lam), bool)
    for i in range(len(lam)):
        if used[i]:
            continue
        close = np.abs(lam - lam[i]) <= max(zero_tol * scale, 1e-12)
        close &= ~used
        used |= close
        if abs(lam[i].imag) > zero_tol * scale:
            out.append((complex(lam[i]), int(close.sum()), 0))
            continue
        Xc = X[:, close]
        gram = _hermitize(Xc.conj().T @ (space.signature[:, None] * Xc))
        gw = np.linalg.eigvalsh(gram)
        gscale = max(np.max(np.abs(gw)), 1e-300)
        if gw[0] > 1e-10 * gscale:
            label = 1
        elif gw[-1] < -1e-10 * gscale:
            label = -1
        else:
            label = 0
        out.append((float(lam[i].real), int(close.sum()), label))
    out.sort(key=lambda item: (item[0].real if isinstance(item[0], complex) else item[0]))
    return out

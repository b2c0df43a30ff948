"""Shared generators and independent oracles for the test suite.

Oracles here deliberately use different numerical routes than the library
(dense general eigensolvers, bisection on semidefiniteness, partition
enumeration, finite differences) so agreement is evidence, not tautology.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg as sla

from kreinact import MomentumBox, OperatorMeasure, SignatureSpace, krein_adjoint

UNIT_BOX = ((-1.0, -0.5, -0.5, -0.5), (1.0, 0.5, 0.5, 0.5))


def make_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(seed)


def random_matrix(space: SignatureSpace, rng: np.random.Generator, scale: float = 1.0):
    d = space.dim
    return scale * (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d)))


def random_symmetric(space: SignatureSpace, rng: np.random.Generator, scale: float = 1.0):
    M = random_matrix(space, rng, scale)
    return 0.5 * (M + krein_adjoint(M, space))


def random_positive(space: SignatureSpace, rng: np.random.Generator, scale: float = 1.0,
                    rank: int | None = None):
    d = space.dim
    r = d if rank is None else rank
    M = scale * (rng.standard_normal((r, d)) + 1j * rng.standard_normal((r, d)))
    return space.signature[:, None] * (M.conj().T @ M)


def unit_momentum_box(shape=(2, 1, 1, 1)) -> MomentumBox:
    return MomentumBox(UNIT_BOX[0], UNIT_BOX[1], shape)


def random_measure_for(space: SignatureSpace, rng: np.random.Generator, n_atoms: int = 2,
                       shape=(2, 1, 1, 2), scale: float = 1.0) -> OperatorMeasure:
    box = MomentumBox(UNIT_BOX[0], UNIT_BOX[1], shape)
    pts = box.grid_points()
    idx = rng.choice(len(pts), size=n_atoms, replace=False)
    ops = [random_positive(space, rng, scale) for _ in range(n_atoms)]
    return OperatorMeasure(space, box, pts[np.sort(idx)], ops)


# ---------------------------------------------------------------------------
# Independent oracles
# ---------------------------------------------------------------------------

def oracle_eigenvalues(A: np.ndarray) -> np.ndarray:
    """Eigenvalues via the dense general solver, sorted by (real, imag)."""
    lam = sla.eig(np.asarray(A, dtype=complex))[0]
    order = np.lexsort((lam.imag, lam.real))
    return lam[order]


def oracle_positive_eigenvalues(A: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """Real sorted spectrum of a positive operator, via the general solver."""
    lam = oracle_eigenvalues(A)
    scale = max(float(np.abs(lam).max(initial=0.0)), 1.0)
    assert np.abs(lam.imag).max(initial=0.0) <= tol * scale
    return np.sort(lam.real)


def _is_psd(H: np.ndarray, tol: float) -> bool:
    w = np.linalg.eigvalsh(0.5 * (H + H.conj().T))
    return bool(w[0] >= -tol)


def oracle_gap_bisection(T: np.ndarray, space: SignatureSpace, iters: int = 200) -> float:
    """Support gap by bisection: largest g with S·T - g·S and S·T + g·S psd.

    Independent of the spectral route used by the library.
    """
    S = np.diag(space.signature).astype(complex)
    That = space.signature[:, None] * np.asarray(T, dtype=complex)
    That = 0.5 * (That + That.conj().T)
    scale = max(float(np.linalg.norm(That, 2)), 1.0)
    tol = 1e-12 * scale
    if not _is_psd(That, tol):
        return 0.0

    def feasible(g: float) -> bool:
        return _is_psd(That - g * S, tol) and _is_psd(That + g * S, tol)

    hi = scale
    while feasible(hi) and hi < 1e6 * scale:
        hi *= 2.0
    lo = 0.0
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if feasible(mid):
            lo = mid
        else:
            hi = mid
    return lo


def central_difference(fn, x0: float, h: float) -> float:
    return (fn(x0 + h) - fn(x0 - h)) / (2.0 * h)


def richardson_derivative(fn, x0: float, h: float) -> float:
    c1 = central_difference(fn, x0, h)
    c2 = central_difference(fn, x0, h / 2.0)
    return (4.0 * c2 - c1) / 3.0

"""Finitely supported positive operator-valued measures on a momentum box.

A measure is a finite family of atoms ``(p_j, A_j)`` with momenta inside a
compact box ``K`` and positive operators ``A_j`` on a
:class:`~kreinact.krein.SignatureSpace`.  The module provides the constraint
functionals (trace, eigenvalue-modulus sum, signed trace), the variation
measure, the particle/neutral/sea decomposition, symmetry transformations,
the Dirac-sea and massless fixtures, and a versioned JSON serialization with
bit-exact float round trips.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from typing import Iterable, Iterator, Sequence

import numpy as np

from . import tolerances
from .errors import DefectivePencilError, ValidationError
from .krein import (
    SignatureSpace,
    epsilon_diagonalize,
    is_positive,
    spectral_split,
)

__all__ = [
    "MomentumBox",
    "OperatorMeasure",
    "MeasureDecomposition",
    "ConstraintValues",
    "total_operator",
    "constraint_values",
    "decompose",
    "variation_measure",
    "transform",
    "translate",
    "apply_linear",
    "scale",
    "dirac_sea_fixture",
    "massless_fixture",
    "random_measure",
    "gamma_matrices",
    "feynman_slash",
    "measure_to_dict",
    "measure_from_dict",
    "save_measure",
    "load_measure",
    "save_operator",
    "load_operator",
]

MEASURE_FORMAT = "kreinact-measure"
OPERATOR_FORMAT = "kreinact-operator"
FORMAT_VERSION = 1

_CONTAINMENT_TOL = 1e-9


@dataclass(frozen=True)
class MomentumBox:
    """Axis-aligned compact box in 4-dimensional momentum space.

    ``grid_shape`` fixes a regular grid: per axis, ``k`` evenly spaced points
    spanning ``[lower, upper]`` (the midpoint when ``k == 1``).
    """

    lower: tuple
    upper: tuple
    grid_shape: tuple

    def __post_init__(self):
        lower = tuple(float(x) for x in self.lower)
        upper = tuple(float(x) for x in self.upper)
        shape = tuple(int(k) for k in self.grid_shape)
        if len(lower) != 4 or len(upper) != 4 or len(shape) != 4:
            raise ValidationError("momentum box requires 4-dimensional bounds and grid shape")
        if any(u <= l for l, u in zip(lower, upper)):
            raise ValidationError("box upper bounds must exceed lower bounds componentwise")
        if any(k < 1 for k in shape):
            raise ValidationError("grid shape entries must be >= 1")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        object.__setattr__(self, "grid_shape", shape)

    def axis_points(self, axis: int) -> np.ndarray:
        k = self.grid_shape[axis]
        lo, hi = self.lower[axis], self.upper[axis]
        if k == 1:
            return np.array([0.5 * (lo + hi)])
        return np.linspace(lo, hi, k)

    def grid_points(self) -> np.ndarray:
        """All grid points as an ``(N, 4)`` array in row-major axis order."""
        axes = [self.axis_points(i) for i in range(4)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def contains(self, p: np.ndarray, tol: float = _CONTAINMENT_TOL) -> bool:
        p = np.asarray(p, float)
        span = np.asarray(self.upper) - np.asarray(self.lower)
        pad = tol * np.maximum(span, 1.0)
        return bool(
            np.all(p >= np.asarray(self.lower) - pad) and np.all(p <= np.asarray(self.upper) + pad)
        )


class OperatorMeasure:
    """Finitely supported positive operator-valued measure on a momentum box.

    Parameters
    ----------
    space : SignatureSpace
    box : MomentumBox
    momenta : array, shape (k, 4)
        Pairwise distinct atom locations inside the box.
    operators : array, shape (k, 2n, 2n)
        Positive operators attached to the atoms.
    """

    def __init__(
        self,
        space: SignatureSpace,
        box: MomentumBox,
        momenta: np.ndarray,
        operators: np.ndarray,
        *,
        validate: bool = True,
    ):
        momenta = np.atleast_2d(np.asarray(momenta, float))
        operators = np.asarray(operators, complex)
        if momenta.size == 0:
            momenta = momenta.reshape(0, 4)
            operators = operators.reshape(0, space.dim, space.dim)
        if operators.ndim == 2:
            operators = operators[None]
        if momenta.shape[0] != operators.shape[0]:
            raise ValidationError("number of momenta and operators must agree")
        if momenta.shape[1:] != (4,):
            raise ValidationError("atom momenta must be 4-vectors")
        if operators.shape[1:] != (space.dim, space.dim):
            raise ValidationError(
                f"operators must have shape ({space.dim}, {space.dim}) for this space"
            )
        self.space = space
        self.box = box
        self.momenta = momenta
        self.operators = operators
        if validate:
            self._validate()

    def _validate(self):
        for j, p in enumerate(self.momenta):
            if not self.box.contains(p):
                raise ValidationError(f"atom {j} at {p} lies outside the momentum box")
        for j, A in enumerate(self.operators):
            if not is_positive(A, self.space):
                raise ValidationError(f"atom {j} carries a non-positive operator")
        if len(self.momenta) > 1:
            span = np.linalg.norm(np.asarray(self.box.upper) - np.asarray(self.box.lower))
            d = self.momenta[:, None, :] - self.momenta[None, :, :]
            dist = np.linalg.norm(d, axis=2)
            np.fill_diagonal(dist, np.inf)
            if dist.min() <= 1e-12 * max(span, 1.0):
                raise ValidationError("atom momenta must be pairwise distinct")

    @property
    def n_atoms(self) -> int:
        return len(self.momenta)

    def atoms(self) -> Iterator[tuple]:
        return zip(self.momenta, self.operators)

    def total(self) -> np.ndarray:
        if self.n_atoms == 0:
            return np.zeros((self.space.dim, self.space.dim), complex)
        return self.operators.sum(axis=0)

    def with_operators(self, operators: np.ndarray, *, validate: bool = True) -> "OperatorMeasure":
        return OperatorMeasure(self.space, self.box, self.momenta.copy(), operators, validate=validate)

    def __repr__(self):
        return (
            f"OperatorMeasure(n={self.space.n}, atoms={self.n_atoms}, "
            f"box=[{self.box.lower}, {self.box.upper}])"
        )


@dataclass(frozen=True)
class MeasureDecomposition:
    """Particle/neutral/sea components of a measure (atomwise spectral split)."""

    particle: OperatorMeasure
    neutral: OperatorMeasure
    sea: OperatorMeasure


@dataclass(frozen=True)
class ConstraintValues:
    """Values of the three constraint functionals of a measure."""

    trace: float
    dim_sum: float
    mod_dim: float


def total_operator(measure: OperatorMeasure) -> np.ndarray:
    """Total operator ``sum_j A_j`` of the measure (positive)."""
    return measure.total()


def _dim_sum_at(total: np.ndarray, space: SignatureSpace, eps: float) -> float:
    retries = 0
    while True:
        try:
            _, D, _ = epsilon_diagonalize(total, space, eps)
            return float(np.sum(np.abs(np.diag(D).real)))
        except DefectivePencilError as err:
            retries += 1
            if retries > 5:
                raise
            eps = err.suggested_epsilon


def constraint_values(measure: OperatorMeasure, eps: float | None = None) -> ConstraintValues:
    """Trace, eigenvalue-modulus sum, and signed trace of the total operator.

    The modulus sum uses the shifted diagonalization at ``eps`` and ``eps/2``
    with Richardson extrapolation to ``eps -> 0``.  The bound
    ``dim_sum <= mod_dim`` holds up to extrapolation error: the eigenvalue
    moduli are dominated by the signed trace because pseudo-unitarily
    normalized eigenvectors have Euclidean norm >= 1.
    """
    total = measure.total()
    space = measure.space
    tr = np.trace(total)
    mod_dim = np.trace(space.signature[:, None] * total)
    scale = max(float(np.linalg.norm(total, 2)), 1.0)
    if abs(tr.imag) > 1e-9 * scale or abs(mod_dim.imag) > 1e-9 * scale:
        raise ValidationError("constraint functionals of a positive measure must be real")
    if measure.n_atoms == 0 or np.linalg.norm(total, 2) == 0.0:
        return ConstraintValues(trace=float(tr.real), dim_sum=0.0, mod_dim=float(mod_dim.real))
    if eps is None:
        eps = 1e-6 * scale
    d1 = _dim_sum_at(total, space, eps)
    d2 = _dim_sum_at(total, space, eps / 2.0)
    dim_sum = 2.0 * d2 - d1
    return ConstraintValues(trace=float(tr.real), dim_sum=float(dim_sum), mod_dim=float(mod_dim.real))


_NORMS = {
    "spectral": lambda H: float(np.linalg.norm(H, 2)),
    "frobenius": lambda H: float(np.linalg.norm(H, "fro")),
}


def variation_measure(measure: OperatorMeasure, norm: str = "spectral") -> list:
    """The scalar variation measure: ``[(p_j, ||A_j||), ...]``.

    For a finitely supported measure the supremum over partitions is attained
    atomwise.  The default norm is the operator 2-norm of ``S @ A`` (sharp
    for the Hermitian representative).
    """
    if norm not in _NORMS:
        raise ValidationError(f"unknown norm {norm!r}; choose from {sorted(_NORMS)}")
    norm_fn = _NORMS[norm]
    sig = measure.space.signature
    return [(p.copy(), norm_fn(sig[:, None] * A)) for p, A in measure.atoms()]


def decompose(measure: OperatorMeasure, norm: str = "spectral") -> MeasureDecomposition:
    """Split a measure into particle, neutral, and sea components.

    Each density ``A_j / ||A_j||`` is spectrally split; the plus part
    (positive definite image) goes into the particle component, the minus
    part into the sea, and the zero spectral part into the neutral
    component.  The normalization cancels exactly, so the result does not
    depend on the chosen norm; all three components keep the full atom
    support (with zero operators where a component vanishes) so that the
    atomwise reconstruction is literal.
    """
    if norm not in _NORMS:
        raise ValidationError(f"unknown norm {norm!r}; choose from {sorted(_NORMS)}")
    norm_fn = _NORMS[norm]
    sig = measure.space.signature
    plus, zero, minus = [], [], []
    for _, A in measure.atoms():
        w = norm_fn(sig[:, None] * A)
        if w == 0.0:
            Z = np.zeros_like(A)
            plus.append(Z)
            zero.append(Z)
            minus.append(Z)
            continue
        split = spectral_split(A / w, measure.space)
        plus.append(w * split.plus)
        zero.append(w * split.zero)
        minus.append(w * split.minus)

    def build(ops: list) -> OperatorMeasure:
        arr = np.asarray(ops) if ops else np.zeros((0, measure.space.dim, measure.space.dim))
        return measure.with_operators(arr)

    return MeasureDecomposition(particle=build(plus), neutral=build(zero), sea=build(minus))


def translate(measure: OperatorMeasure, shift: Sequence[float]) -> OperatorMeasure:
    """Shift all atom momenta (and the box) by a fixed 4-vector."""
    shift = np.asarray(shift, float)
    if shift.shape != (4,):
        raise ValidationError("translation requires a 4-vector")
    box = MomentumBox(
        lower=tuple(np.asarray(measure.box.lower) + shift),
        upper=tuple(np.asarray(measure.box.upper) + shift),
        grid_shape=measure.box.grid_shape,
    )
    return OperatorMeasure(measure.space, box, measure.momenta + shift[None, :], measure.operators.copy())


def apply_linear(measure: OperatorMeasure, matrix: np.ndarray) -> OperatorMeasure:
    """Map atom momenta through an invertible linear map of momentum space."""
    B = np.asarray(matrix, float)
    if B.shape != (4, 4):
        raise ValidationError("linear momentum map requires a 4x4 matrix")
    if abs(np.linalg.det(B)) < 1e-12:
        raise ValidationError("linear momentum map must be invertible")
    corners = np.array(
        [
            [lo if bit else hi for lo, hi, bit in zip(measure.box.lower, measure.box.upper, bits)]
            for bits in np.ndindex(2, 2, 2, 2)
        ]
    )
    mapped = corners @ B.T
    new_momenta = measure.momenta @ B.T
    lower = np.minimum(mapped.min(axis=0), new_momenta.min(axis=0) if len(new_momenta) else np.inf)
    upper = np.maximum(mapped.max(axis=0), new_momenta.max(axis=0) if len(new_momenta) else -np.inf)
    span = np.maximum(upper - lower, 1e-6)
    box = MomentumBox(tuple(lower - 1e-12 * span), tuple(upper + 1e-12 * span), measure.box.grid_shape)
    return OperatorMeasure(measure.space, box, new_momenta, measure.operators.copy())


def scale(measure: OperatorMeasure, factor: float) -> OperatorMeasure:
    """Rescale all atom operators by a positive factor."""
    if factor <= 0:
        raise ValidationError(f"scale factor must be positive, got {factor}")
    return measure.with_operators(measure.operators * factor)


def transform(measure: OperatorMeasure, kind: str, value) -> OperatorMeasure:
    """Dispatch to :func:`translate`, :func:`apply_linear`, or :func:`scale`."""
    if kind == "translate":
        return translate(measure, value)
    if kind == "linear":
        return apply_linear(measure, value)
    if kind == "scale":
        return scale(measure, float(value))
    raise ValidationError(f"unknown transform kind {kind!r}")


def gamma_matrices() -> dict:
    """The four gamma matrices in the standard (Dirac) representation."""
    I2 = np.eye(2)
    Z2 = np.zeros((2, 2))
    sx = np.array([[0, 1], [1, 0]], complex)
    sy = np.array([[0, -1j], [1j, 0]], complex)
    sz = np.array([[1, 0], [0, -1]], complex)
    g0 = np.block([[I2, Z2], [Z2, -I2]]).astype(complex)
    gs = [np.block([[Z2, s], [-s, Z2]]).astype(complex) for s in (sx, sy, sz)]
    return {0: g0, 1: gs[0], 2: gs[1], 3: gs[2]}


def feynman_slash(p: np.ndarray) -> np.ndarray:
    """Contraction ``p_mu gamma^mu`` with metric signature (+,-,-,-)."""
    g = gamma_matrices()
    p = np.asarray(p, float)
    return p[0] * g[0] - p[1] * g[1] - p[2] * g[2] - p[3] * g[3]


_SHELL_TOL = 1e-8


def _shell_box(momenta: np.ndarray, grid_shape=(2, 2, 2, 2)) -> MomentumBox:
    lower = momenta.min(axis=0)
    upper = momenta.max(axis=0)
    span = np.maximum(upper - lower, 1.0)
    return MomentumBox(tuple(lower - 0.05 * span), tuple(upper + 0.05 * span), grid_shape)


def dirac_sea_fixture(mass: float, shell_points: Iterable[Sequence[float]]) -> OperatorMeasure:
    """Measure with atoms ``A = -(pslash + m)`` on the lower mass shell.

    Each momentum must satisfy ``p^2 = m^2`` (Minkowski square) with
    ``p^0 < 0`` within a relative shell tolerance.  The resulting atoms are
    positive with eigenvalues in ``{0, -2m}`` — a sea measure.
    """
    if mass <= 0:
        raise ValidationError(f"mass must be positive, got {mass}")
    momenta = np.atleast_2d(np.asarray(list(shell_points), float))
    if momenta.shape[1:] != (4,):
        raise ValidationError("shell points must be 4-vectors")
    ops = []
    for p in momenta:
        msq = p[0] ** 2 - p[1] ** 2 - p[2] ** 2 - p[3] ** 2
        if abs(msq - mass**2) > _SHELL_TOL * max(mass**2, 1.0) or p[0] >= 0:
            raise ValidationError(
                f"momentum {p} is not on the lower mass shell for mass {mass}"
            )
        ops.append(-(feynman_slash(p) + mass * np.eye(4)))
    space = SignatureSpace(2)
    return OperatorMeasure(space, _shell_box(momenta), momenta, np.asarray(ops))


def massless_fixture(wave_vectors: Iterable[Sequence[float]]) -> OperatorMeasure:
    """Measure with nilpotent atoms ``A = -pslash`` on the lower light cone."""
    ks = np.atleast_2d(np.asarray(list(wave_vectors), float))
    if ks.shape[1:] != (3,):
        raise ValidationError("wave vectors must be spatial 3-vectors")
    momenta = []
    ops = []
    for k in ks:
        E = float(np.linalg.norm(k))
        if E == 0.0:
            raise ValidationError("wave vectors must be nonzero")
        p = np.array([-E, k[0], k[1], k[2]])
        momenta.append(p)
        ops.append(-feynman_slash(p))
    momenta = np.asarray(momenta)
    space = SignatureSpace(2)
    return OperatorMeasure(space, _shell_box(momenta), momenta, np.asarray(ops))


def random_measure(
    space: SignatureSpace,
    box: MomentumBox,
    n_atoms: int,
    rng: np.random.Generator,
    magnitude: float = 1.0,
) -> OperatorMeasure:
    """Random measure: atoms at distinct uniform momenta with ``A = S M^H M``."""
    lower = np.asarray(box.lower)
    upper = np.asarray(box.upper)
    momenta = lower + (upper - lower) * rng.random((n_atoms, 4))
    d = space.dim
    ops = []
    for _ in range(n_atoms):
        M = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        M *= np.sqrt(magnitude / d)
        ops.append(space.signature[:, None] * (M.conj().T @ M))
    return OperatorMeasure(space, box, momenta, np.asarray(ops))


# ---------------------------------------------------------------------------
# Serialization (versioned JSON; floats round-trip bit-exactly via repr)
# ---------------------------------------------------------------------------

def _matrix_to_lists(A: np.ndarray) -> dict:
    return {
        "re": [[float(x) for x in row] for row in A.real],
        "im": [[float(x) for x in row] for row in A.imag],
    }


def _matrix_from_lists(d: dict) -> np.ndarray:
    return np.asarray(d["re"], float) + 1j * np.asarray(d["im"], float)


def measure_to_dict(measure: OperatorMeasure) -> dict:
    return {
        "format": MEASURE_FORMAT,
        "version": FORMAT_VERSION,
        "n": measure.space.n,
        "box": {
            "lower": list(measure.box.lower),
            "upper": list(measure.box.upper),
            "grid_shape": list(measure.box.grid_shape),
        },
        "atoms": [
            {"p": [float(x) for x in p], "A": _matrix_to_lists(A)}
            for p, A in measure.atoms()
        ],
    }


def measure_from_dict(data: dict) -> OperatorMeasure:
    if data.get("format") != MEASURE_FORMAT:
        raise ValidationError(f"not a measure document: format={data.get('format')!r}")
    if data.get("version") != FORMAT_VERSION:
        raise ValidationError(f"unsupported measure format version {data.get('version')!r}")
    space = SignatureSpace(int(data["n"]))
    boxd = data["box"]
    box = MomentumBox(tuple(boxd["lower"]), tuple(boxd["upper"]), tuple(boxd["grid_shape"]))
    atoms = data.get("atoms", [])
    momenta = np.asarray([a["p"] for a in atoms], float).reshape(len(atoms), 4)
    ops = np.asarray([_matrix_from_lists(a["A"]) for a in atoms], complex).reshape(
        len(atoms), space.dim, space.dim
    )
    return OperatorMeasure(space, box, momenta, ops)


def save_measure(measure: OperatorMeasure, path) -> None:
    """Write a measure as a versioned JSON document (bit-exact round trip)."""
    with open(path, "w") as fh:
        json.dump(measure_to_dict(measure), fh, indent=1)
        fh.write("\n")


def load_measure(path) -> OperatorMeasure:
    """Read a measure written by :func:`save_measure`."""
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as err:
            raise ValidationError(f"measure file {path} is not valid JSON: {err}") from err
    return measure_from_dict(data)


def save_operator(A: np.ndarray, space: SignatureSpace, path) -> None:
    """Write a single operator as a versioned JSON document."""
    doc = {
        "format": OPERATOR_FORMAT,
        "version": FORMAT_VERSION,
        "n": space.n,
        "matrix": _matrix_to_lists(np.asarray(A, complex)),
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_operator(path) -> tuple:
    """Read an operator document; returns ``(matrix, space)``."""
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as err:
            raise ValidationError(f"operator file {path} is not valid JSON: {err}") from err
    if data.get("format") != OPERATOR_FORMAT:
        raise ValidationError(f"not an operator document: format={data.get('format')!r}")
    if data.get("version") != FORMAT_VERSION:
        raise ValidationError(f"unsupported operator format version {data.get('version')!r}")
    space = SignatureSpace(int(data["n"]))
    A = _matrix_from_lists(data["matrix"])
    return space.check_operator(A), space

"""Points on real and complex Grassmann manifolds and the chordal metric.

A point of G(n, p) is stored as an ``n x p`` matrix with orthonormal columns.
Two bases that differ by a right unitary factor describe the same point, and
nothing in this package depends on which representative is held.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field as dc_field

import numpy as np

from ._random import RandomLike, as_generator

ORTHONORMAL_TOL = 1e-10


class GrassmannError(ValueError):
    """Base class for invalid manifold arguments."""


class DimensionError(GrassmannError):
    """Raised when (n, p) does not describe a Grassmann manifold."""


class ShapeError(GrassmannError):
    """Raised when two points do not live on the same manifold."""


class ArgumentError(GrassmannError):
    """Raised for out-of-range scalar or matrix arguments."""


class FieldTag(enum.Enum):
    REAL = "R"
    COMPLEX = "C"

    @property
    def beta(self) -> int:
        """Real dimensions per scalar: 1 over the reals, 2 over the complexes."""
        return 1 if self is FieldTag.REAL else 2

    @property
    def dtype(self) -> type:
        return np.float64 if self is FieldTag.REAL else np.complex128

    @classmethod
    def parse(cls, value: "FieldTag | str") -> "FieldTag":
        if isinstance(value, FieldTag):
            return value
        key = str(value).strip().lower()
        if key in ("r", "real"):
            return cls.REAL
        if key in ("c", "complex"):
            return cls.COMPLEX
        raise ArgumentError(f"unknown field {value!r}; expected R or C")


def check_dimensions(n: int, p: int) -> None:
    if int(n) != n or int(p) != p:
        raise DimensionError(f"dimensions must be integers, got n={n}, p={p}")
    if n < 1:
        raise DimensionError(f"ambient dimension must be >= 1, got n={n}")
    if not 1 <= p <= n:
        raise DimensionError(f"plane dimension must satisfy 1 <= p <= n, got n={n}, p={p}")


def real_dimension(n: int, p: int, field: FieldTag | str) -> int:
    """Real dimension of G(n, p): beta * p * (n - p)."""
    check_dimensions(n, p)
    return FieldTag.parse(field).beta * p * (n - p)


def orthonormality_defect(basis: np.ndarray) -> float:
    p = basis.shape[-1]
    gram = np.swapaxes(basis.conj(), -1, -2) @ basis
    return float(np.max(np.abs(gram - np.eye(p)))) if gram.size else 0.0


@dataclass(frozen=True, eq=False)
class Subspace:
    """A p-plane in L^n held through an orthonormal basis."""

    basis: np.ndarray
    field: FieldTag = dc_field(default=FieldTag.COMPLEX)

    def __post_init__(self):
        f = FieldTag.parse(self.field)
        b = np.array(self.basis, dtype=f.dtype if f is FieldTag.COMPLEX else None, copy=True)
        if b.ndim != 2:
            raise ShapeError(f"basis must be a matrix, got shape {b.shape}")
        if f is FieldTag.REAL:
            if np.iscomplexobj(b):
                if np.any(b.imag != 0):
                    raise ArgumentError("complex entries in a real subspace basis")
                b = b.real
            b = b.astype(np.float64)
        check_dimensions(*b.shape)
        defect = orthonormality_defect(b)
        if defect > ORTHONORMAL_TOL:
            raise ArgumentError(f"basis columns are not orthonormal (defect {defect:.3g})")
        b.setflags(write=False)
        object.__setattr__(self, "basis", b)
        object.__setattr__(self, "field", f)

    @classmethod
    def span(cls, matrix, field: FieldTag | str | None = None) -> "Subspace":
        """Column span of an arbitrary full-rank matrix (orthonormalized by QR)."""
        m = np.asarray(matrix)
        if field is None:
            field = FieldTag.COMPLEX if np.iscomplexobj(m) else FieldTag.REAL
        return cls(orthonormalize(m), FieldTag.parse(field))

    @property
    def n(self) -> int:
        return self.basis.shape[0]

    @property
    def p(self) -> int:
        return self.basis.shape[1]

    @property
    def shape_key(self) -> tuple[int, int, FieldTag]:
        return (self.n, self.p, self.field)

    def projector(self) -> np.ndarray:
        return self.basis @ self.basis.conj().T

    def __repr__(self) -> str:
        return f"Subspace(n={self.n}, p={self.p}, field={self.field.value})"


@dataclass(frozen=True)
class PrincipalAngles:
    """Principal angles, sorted descending, each in [0, pi/2]."""

    angles: np.ndarray

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.angles, dtype=dtype)

    def __len__(self) -> int:
        return len(self.angles)

    def __iter__(self):
        return iter(self.angles)


def orthonormalize(matrix: np.ndarray) -> np.ndarray:
    """QR with the diagonal of R rotated onto the positive reals.

    Works on stacks of matrices. With Gaussian input this produces bases whose
    span is distributed by the invariant measure.
    """
    q, r = np.linalg.qr(matrix)
    d = np.diagonal(r, axis1=-2, axis2=-1)
    mag = np.abs(d)
    phase = np.where(mag > 0, d / np.where(mag > 0, mag, 1), 1)
    return q * phase[..., None, :]


def _gaussian(shape, field: FieldTag, gen: np.random.Generator) -> np.ndarray:
    if field is FieldTag.REAL:
        return gen.standard_normal(shape)
    return gen.standard_normal(shape) + 1j * gen.standard_normal(shape)


def haar_bases(n: int, p: int, field: FieldTag | str, size: int, rng: RandomLike) -> np.ndarray:
    """Stack of ``size`` orthonormal bases whose spans are Haar-uniform on G(n, p)."""
    check_dimensions(n, p)
    f = FieldTag.parse(field)
    return orthonormalize(_gaussian((size, n, p), f, as_generator(rng)))


def haar_sample(n: int, p: int, field: FieldTag | str, rng: RandomLike) -> Subspace:
    """One Haar-uniform point of G(n, p)."""
    f = FieldTag.parse(field)
    return Subspace(haar_bases(n, p, f, 1, rng)[0], f)


def haar_unitary(n: int, field: FieldTag | str, rng: RandomLike) -> np.ndarray:
    """Haar-distributed orthogonal (real) or unitary (complex) n x n matrix."""
    f = FieldTag.parse(field)
    return orthonormalize(_gaussian((n, n), f, as_generator(rng)))


def reference_subspace(n: int, p: int, field: FieldTag | str = FieldTag.COMPLEX) -> Subspace:
    """span(e_1, ..., e_p)."""
    check_dimensions(n, p)
    f = FieldTag.parse(field)
    return Subspace(np.eye(n, p, dtype=f.dtype), f)


def _check_same(P: Subspace, Q: Subspace) -> None:
    if P.shape_key != Q.shape_key:
        raise ShapeError(
            f"subspaces live on different manifolds: (n, p, field) = "
            f"{(P.n, P.p, P.field.value)} vs {(Q.n, Q.p, Q.field.value)}"
        )


def principal_angles(P: Subspace, Q: Subspace) -> PrincipalAngles:
    """Principal angles between two p-planes, largest first.

    Cosines come from the singular values of U_P^H U_Q and sines from those of
    (I - U_P U_P^H) U_Q. Each angle is taken from whichever of the two is
    better conditioned, so angles near zero are resolved to ~1e-16 instead of
    the ~1e-8 floor that arccos alone would leave.
    """
    _check_same(P, Q)
    U, V = P.basis, Q.basis
    cross = U.conj().T @ V
    cos = np.clip(np.linalg.svd(cross, compute_uv=False), 0.0, 1.0)  # descending
    sin = np.linalg.svd(V - U @ cross, compute_uv=False)  # descending
    sin = np.clip(sin[::-1], 0.0, 1.0)  # ascending; pairs with descending cos
    theta = np.where(cos**2 >= 0.5, np.arcsin(sin), np.arccos(cos))
    return PrincipalAngles(np.sort(theta)[::-1])


def chordal_distance(P: Subspace, Q: Subspace) -> float:
    """sqrt(sum_i sin^2 theta_i), evaluated as ||(I - U_P U_P^H) U_Q||_F."""
    _check_same(P, Q)
    U, V = P.basis, Q.basis
    return float(np.linalg.norm(V - U @ (U.conj().T @ V)))


def chordal_distance_sq(P: Subspace, Q: Subspace) -> float:
    return chordal_distance(P, Q) ** 2


def max_chordal_distance(n: int, p: int) -> float:
    """Diameter of G(n, p) under the chordal metric: sqrt(min(p, n - p))."""
    check_dimensions(n, p)
    return float(np.sqrt(min(p, n - p)))


def apply_isometry(A: np.ndarray, P: Subspace) -> Subspace:
    """Image span(A U_P) of P under an orthogonal/unitary map A."""
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ArgumentError(f"isometry must be square, got shape {A.shape}")
    if A.shape[0] != P.n:
        raise ArgumentError(f"isometry is {A.shape[0]}x{A.shape[0]} but subspace has n={P.n}")
    if P.field is FieldTag.REAL and np.iscomplexobj(A) and np.any(A.imag != 0):
        raise ArgumentError("complex isometry applied to a real subspace")
    defect = orthonormality_defect(A)
    if defect > ORTHONORMAL_TOL:
        raise ArgumentError(f"matrix is not unitary (defect {defect:.3g})")
    image = A @ P.basis
    if P.field is FieldTag.REAL:
        image = np.real(image)
    # A U is orthonormal up to rounding; one QR pass restores the tolerance.
    return Subspace(orthonormalize(image), P.field)


def squared_distances(basis: np.ndarray, bases: np.ndarray) -> np.ndarray:
    """d_c^2 between one basis and each basis of a stack, via p - ||U^H V||_F^2."""
    p = basis.shape[-1]
    cross = basis.conj().T @ bases
    return np.maximum(p - np.sum(np.abs(cross) ** 2, axis=(1, 2)), 0.0)


def squared_distance_table(queries: np.ndarray, codewords: np.ndarray) -> np.ndarray:
    """(S, K) table of d_c^2 between S query bases and K codewords, each n x p."""
    S, n, p = queries.shape
    K = codewords.shape[0]
    flat = np.transpose(codewords, (1, 0, 2)).reshape(n, K * p)
    cross = np.swapaxes(queries.conj(), 1, 2) @ flat  # (S, p, K*p)
    power = np.abs(cross) ** 2
    gram = power.reshape(S, p, K, p).sum(axis=(1, 3))
    return np.maximum(p - gram, 0.0)


def distances_to_reference(bases: np.ndarray) -> np.ndarray:
    """d_c^2 from each basis to span(e_1..e_p): the energy outside the first p rows.

    No cancellation, so tiny distances are exact to rounding.
    """
    p = bases.shape[-1]
    return np.sum(np.abs(bases[:, p:, :]) ** 2, axis=(1, 2))

"""Projective geometry for invertible matrices acting on lines.

The objects here are the primitives everything else is built from: lines
x = R v in V = R^d, covectors y = R phi in the dual, the action of an
invertible g on both, and three scalar quantities

    sigma(g, x)  = log(|g v| / |v|)          norm cocycle on P(V)
    sigma*(g, y) = log(|g phi| / |phi|)      dual cocycle, g phi = phi o g^{-1}
    delta(x, y)  = -log(|phi(v)| / (|phi| |v|))   >= 0, finite off phi(v) = 0

with the Euclidean norm throughout.  In coordinates the dual action of g
is the inverse transpose, so sigma* is the norm cocycle of the
inverse-transpose matrices.  The three satisfy the cohomological equation

    delta(g x, g y) = delta(x, y) + sigma(g, x) + sigma*(g, y)

whose restated form sigma(g,x) - delta(gx, y) = sigma*(g^{-1}, y) -
delta(x, g^{-1} y) is what time reversal runs on.

All types are immutable; operations return fresh objects.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NotInGeneralPosition

# |phi(v)| at or below this (for unit phi, v) counts as orthogonal
PAIRING_FLOOR = 1e-14

# relative determinant floor for accepting a matrix as invertible
DET_RTOL = 1e-12


def _canonical_unit(vec: np.ndarray) -> np.ndarray:
    """Unit representative with the first nonzero coordinate positive."""
    v = np.asarray(vec, dtype=np.float64).reshape(-1)
    nrm = np.linalg.norm(v)
    if nrm == 0.0 or not np.isfinite(nrm):
        raise ValueError("cannot project the zero (or non-finite) vector")
    v = v / nrm
    for c in v:
        if c != 0.0:
            if c < 0.0:
                v = -v
            break
    v.setflags(write=False)
    return v


def _adjugate(a: np.ndarray) -> np.ndarray:
    d = a.shape[0]
    if d == 2:
        return np.array([[a[1, 1], -a[0, 1]], [-a[1, 0], a[0, 0]]])
    # d == 3: cofactor transpose written out
    c = np.empty((3, 3))
    for i in range(3):
        for j in range(3):
            m = np.delete(np.delete(a, i, axis=0), j, axis=1)
            c[j, i] = (-1) ** (i + j) * (m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0])
    return c


@dataclass(frozen=True, eq=False)
class SquareMatrix:
    """Invertible real d x d matrix, d >= 2.

    Entries are frozen at construction.  Matrices whose determinant is
    smaller than DET_RTOL relative to the dim-scaled Frobenius norm are
    rejected: the projective action and the cocycles need the inverse.
    """

    entries: np.ndarray

    def __init__(self, entries) -> None:
        a = np.array(entries, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {a.shape}")
        d = a.shape[0]
        if d < 2:
            raise ValueError("dimension must be at least 2")
        if not np.all(np.isfinite(a)):
            raise ValueError("matrix entries must be finite")
        det = np.linalg.det(a)
        scale = (np.linalg.norm(a) / np.sqrt(d)) ** d
        if abs(det) <= DET_RTOL * scale:
            raise ValueError(f"matrix is singular to working precision (|det|={abs(det):.3e})")
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def inverse(self) -> "SquareMatrix":
        """Adjugate route for d <= 3, LU for larger d."""
        a = self.entries
        if self.dim <= 3:
            inv = _adjugate(a) / np.linalg.det(a)
        else:
            inv = np.linalg.inv(a)
        return SquareMatrix(inv)

    def transpose(self) -> "SquareMatrix":
        return SquareMatrix(self.entries.T)

    def matmul(self, other: "SquareMatrix") -> "SquareMatrix":
        return SquareMatrix(self.entries @ other.entries)

    def scaled(self, factor: float) -> "SquareMatrix":
        return SquareMatrix(self.entries * float(factor))

    def operator_norm(self) -> float:
        return float(np.linalg.norm(self.entries, 2))

    def __repr__(self) -> str:  # short, matrices can be big
        return f"SquareMatrix(dim={self.dim})"


@dataclass(frozen=True)
class ProjectivePoint:
    """Line in R^d stored as its canonical unit representative."""

    vec: np.ndarray

    def __init__(self, vec) -> None:
        object.__setattr__(self, "vec", _canonical_unit(vec))

    @property
    def dim(self) -> int:
        return self.vec.shape[0]

    def __eq__(self, other) -> bool:
        return isinstance(other, ProjectivePoint) and np.array_equal(self.vec, other.vec)

    def __hash__(self) -> int:
        return hash(self.vec.tobytes())


@dataclass(frozen=True)
class DualProjectivePoint:
    """Line of covectors, same canonicalization applied to the coordinates."""

    vec: np.ndarray

    def __init__(self, vec) -> None:
        object.__setattr__(self, "vec", _canonical_unit(vec))

    @property
    def dim(self) -> int:
        return self.vec.shape[0]

    def __eq__(self, other) -> bool:
        return isinstance(other, DualProjectivePoint) and np.array_equal(self.vec, other.vec)

    def __hash__(self) -> int:
        return hash(self.vec.tobytes())


def act(g: SquareMatrix, x: ProjectivePoint) -> ProjectivePoint:
    """g . x = R(g v)."""
    return ProjectivePoint(g.entries @ x.vec)


def cocycle_sigma(g: SquareMatrix, x: ProjectivePoint) -> float:
    """sigma(g, x) = log |g v| for the unit representative v of x."""
    return float(np.log(np.linalg.norm(g.entries @ x.vec)))


def dual_act(g: SquareMatrix, y: DualProjectivePoint) -> DualProjectivePoint:
    """g . y in the dual: coordinates move by the inverse transpose."""
    return DualProjectivePoint(g.inverse().entries.T @ y.vec)


def cocycle_sigma_star(g: SquareMatrix, y: DualProjectivePoint) -> float:
    """sigma*(g, y) = log |(g^{-1})^T phi| for the unit covector phi of y."""
    return float(np.log(np.linalg.norm(g.inverse().entries.T @ y.vec)))


def proj_distance(x: ProjectivePoint, y: ProjectivePoint) -> float:
    """d(x, y) = |v ^ w| / (|v| |w|) via the Gram identity, clamped at 0.

    For unit representatives this is sqrt(1 - <v,w>^2), the sine of the
    angle between the lines.
    """
    dot = float(np.dot(x.vec, y.vec))
    gram = max(1.0 - dot * dot, 0.0)
    return float(np.sqrt(gram))


def holder_distance(x: ProjectivePoint, y: ProjectivePoint, gamma: float = 0.5) -> float:
    """Diagnostic d(x,y)^gamma; gamma is the caller's regularity exponent."""
    if not 0.0 < gamma <= 1.0:
        raise ValueError("gamma must lie in (0, 1]")
    return proj_distance(x, y) ** gamma


def pairing(x: ProjectivePoint, y: DualProjectivePoint) -> float:
    """|phi(v)| for the unit representatives; in coordinates |<y, x>|."""
    return abs(float(np.dot(y.vec, x.vec)))


def delta(x: ProjectivePoint, y: DualProjectivePoint) -> float:
    """delta(x, y) = -log |phi(v)| >= 0; raises off general position."""
    p = pairing(x, y)
    if p <= PAIRING_FLOOR:
        raise NotInGeneralPosition(f"pairing |phi(v)| = {p:.3e} at or below {PAIRING_FLOOR}")
    return float(-np.log(p))


def in_general_position(x: ProjectivePoint, y: DualProjectivePoint) -> bool:
    return pairing(x, y) > PAIRING_FLOOR


def sigma_bound(g: SquareMatrix) -> float:
    """Uniform bound: |sigma(g, .)| <= log max(|g|, |g^{-1}|)."""
    return float(np.log(max(g.operator_norm(), g.inverse().operator_norm())))

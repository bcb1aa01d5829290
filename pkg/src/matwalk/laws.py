"""Finitely supported laws on invertible matrices.

A MatrixLaw is a list of support matrices with probabilities and a global
scalar log_shift: sampling returns e^{log_shift} * support[i].  The shift
is how laws get recentered to zero Lyapunov exponent, since scaling every
matrix by e^{-a} subtracts a from each cocycle increment exactly and
leaves the projective dynamics untouched.

Support is finite on purpose: it is what makes exact enumeration over
words possible, which the whole test strategy leans on.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import LawFileError
from .geometry import ProjectivePoint, SquareMatrix, act, proj_distance
from .rng import SamplerState, index_from_raw, prob_thresholds, raw64

PROB_SUM_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class MatrixLaw:
    """Immutable finitely-supported matrix law."""

    dim: int
    support: tuple
    probs: tuple
    log_shift: float = 0.0

    def __init__(self, support: Sequence[SquareMatrix], probs: Sequence[float], log_shift: float = 0.0) -> None:
        support = tuple(
            m if isinstance(m, SquareMatrix) else SquareMatrix(m) for m in support
        )
        if not support:
            raise ValueError("support must be non-empty")
        d = support[0].dim
        if any(m.dim != d for m in support):
            raise ValueError("support matrices must share one dimension")
        probs = tuple(float(p) for p in probs)
        if len(probs) != len(support):
            raise ValueError("probs and support lengths differ")
        if any(p <= 0.0 for p in probs):
            raise ValueError("probabilities must be positive")
        if abs(math.fsum(probs) - 1.0) > PROB_SUM_TOL:
            raise ValueError(f"probabilities sum to {math.fsum(probs)!r}, not 1")
        object.__setattr__(self, "dim", d)
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "log_shift", float(log_shift))

    # ---- derived arrays, computed once ----

    @property
    def n_atoms(self) -> int:
        return len(self.support)

    def support_array(self) -> np.ndarray:
        """(m, d, d) stack of the raw (unshifted) support matrices."""
        return np.stack([m.entries for m in self.support])

    def inverse_array(self) -> np.ndarray:
        return np.stack([m.inverse().entries for m in self.support])

    def thresholds(self) -> np.ndarray:
        return prob_thresholds(self.probs)

    def shifted_matrix(self, i: int) -> SquareMatrix:
        return self.support[i].scaled(math.exp(self.log_shift))

    def max_abs_log_norm(self) -> float:
        """max_i max(log|g_i|, log|g_i^{-1}|) including the shift; bounds |increments|."""
        worst = 0.0
        for m in self.support:
            worst = max(
                worst,
                abs(math.log(m.operator_norm()) + self.log_shift),
                abs(math.log(m.inverse().operator_norm()) - self.log_shift),
            )
        return worst

    def inverse_law(self) -> "MatrixLaw":
        """Pushforward under g -> g^{-1}: inverted support, same probs, negated shift."""
        return MatrixLaw([m.inverse() for m in self.support], self.probs, -self.log_shift)

    def content_hash(self) -> str:
        blob = json.dumps(law_to_jsonable(self), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


def sample(law: MatrixLaw, s: SamplerState) -> SquareMatrix:
    """One draw: e^{log_shift} * support[i], i by inverse CDF over probs."""
    u = raw64(s.seed, s.stream_id, s.next_index())
    i = index_from_raw(u, law.thresholds())
    return law.shifted_matrix(i)


def sample_indices(law: MatrixLaw, seed: int, stream_id: int, start_index: int, count: int) -> np.ndarray:
    """Vector of atom indices for draws [start_index, start_index + count)."""
    u = raw64(seed, stream_id, np.arange(start_index, start_index + count, dtype=np.uint64))
    thr = law.thresholds()
    idx = np.zeros(count, dtype=np.int64)
    for t in thr:
        idx += (u >= t)
    return idx


def exp_moment(law: MatrixLaw, alpha: float = 0.5) -> float:
    """sum_i p_i max(|g_i|, |g_i^{-1}|)^alpha with the shift folded in.

    Finite support makes this an exact finite sum; the default alpha = 0.5
    is the package's diagnostic exponent, nothing more.
    """
    if alpha <= 0.0:
        raise ValueError("alpha must be positive")
    es = math.exp(law.log_shift)
    total = 0.0
    for p, m in zip(law.probs, law.support):
        big = max(es * m.operator_norm(), m.inverse().operator_norm() / es)
        total += p * big**alpha
    return total


def recenter(law: MatrixLaw, lambda_hat: float) -> MatrixLaw:
    """Subtract lambda_hat from every cocycle increment via the scalar shift."""
    if not math.isfinite(lambda_hat):
        raise ValueError("lambda_hat must be finite")
    return MatrixLaw(law.support, law.probs, law.log_shift - lambda_hat)


# ---------------------------------------------------------------------------
# heuristic proximality / irreducibility diagnostic


@dataclass(frozen=True)
class DiagnosticReport:
    proximal_witness: bool
    witness_length: int | None
    attractor_clusters: int
    verdict: str  # "pass" | "suspect"
    detail: dict = field(default_factory=dict)


def _has_simple_dominant_eigenvalue(mat: np.ndarray, rel_gap: float = 1e-6) -> bool:
    ev = np.linalg.eigvals(mat)
    mod = np.sort(np.abs(ev))[::-1]
    if mod[0] == 0.0:
        return False
    return (mod[0] - mod[1]) / mod[0] > rel_gap


def irreducibility_diagnostic(
    law: MatrixLaw,
    s: SamplerState | None = None,
    max_word_length: int = 6,
    n_orbits: int = 64,
    orbit_length: int = 30,
    cluster_tol: float = 1e-3,
) -> DiagnosticReport:
    """Heuristic screen for proximality and strong irreducibility.

    (i) look for a short product with a simple dominant eigenvalue (a
    proximality witness); exhaustive over words up to max_word_length
    while the word count stays small, random words beyond that.
    (ii) push many starting lines (the standard basis among them: invariant
    lines of reducible laws are often coordinate-aligned) through
    independent words and count direction clusters at the end; an
    attractor carried by only a few lines flags reducibility.

    A "pass" verdict is evidence, not proof.
    """
    if s is None:
        s = SamplerState(0x5EED, stream_id=0)

    witness = False
    witness_len: int | None = None
    mats = [m.entries * math.exp(law.log_shift) for m in law.support]
    words: list[np.ndarray] = [np.eye(law.dim)]
    for length in range(1, max_word_length + 1):
        if len(words) * law.n_atoms <= 4096:
            words = [m @ w for w in words for m in mats]
            candidates = words
        else:
            candidates = []
            for _ in range(256):
                w = np.eye(law.dim)
                for _ in range(length):
                    u = raw64(s.seed, s.stream_id, s.next_index())
                    w = mats[index_from_raw(u, law.thresholds())] @ w
                candidates.append(w)
        if any(_has_simple_dominant_eigenvalue(w) for w in candidates):
            witness = True
            witness_len = length
            break

    # attractor spread: end directions of independent orbits
    ends: list[ProjectivePoint] = []
    basis_starts = [np.eye(law.dim)[k] for k in range(law.dim)]
    for j in range(n_orbits):
        if j < len(basis_starts):
            start = basis_starts[j]
        else:
            start = np.array(
                [raw64(s.seed, 1 + j, k) / 2**64 - 0.5 for k in range(law.dim)]
            )
            if np.linalg.norm(start) == 0.0:
                start = basis_starts[0]
        x = ProjectivePoint(start)
        for k in range(orbit_length):
            u = raw64(s.seed, 1_000_000 + j, k)
            x = act(law.support[index_from_raw(u, law.thresholds())], x)
        ends.append(x)

    clusters: list[ProjectivePoint] = []
    for x in ends:
        if all(proj_distance(x, c) > cluster_tol for c in clusters):
            clusters.append(x)
    n_clusters = len(clusters)

    spread_ok = n_clusters > 2 * law.dim
    verdict = "pass" if (witness and spread_ok) else "suspect"
    return DiagnosticReport(
        proximal_witness=witness,
        witness_length=witness_len,
        attractor_clusters=n_clusters,
        verdict=verdict,
        detail={"n_orbits": n_orbits, "orbit_length": orbit_length, "cluster_tol": cluster_tol},
    )


# ---------------------------------------------------------------------------
# canonical test law

_A = [[2.0, 1.0], [1.0, 1.0]]
_B = [[1.0, 1.0], [1.0, 2.0]]


def canonical_law(log_shift: float = 0.0) -> MatrixLaw:
    """The package's reference law: d=2, {A, A^{-1}, B, B^{-1}} uniform.

    A = [[2,1],[1,1]], B = [[1,1],[1,2]].  The four atoms generate a large
    subgroup of SL(2,R): proximal, strongly irreducible, with positive
    Lyapunov exponent that a scalar shift removes.  Expected values for it
    are always measured, never asserted a priori.
    """
    a = SquareMatrix(_A)
    b = SquareMatrix(_B)
    return MatrixLaw([a, a.inverse(), b, b.inverse()], [0.25] * 4, log_shift)


# ---------------------------------------------------------------------------
# law files


def law_to_jsonable(law: MatrixLaw) -> dict:
    return {
        "dim": law.dim,
        "matrices": [[float(v) for v in m.entries.reshape(-1)] for m in law.support],
        "probs": [float(p) for p in law.probs],
        "log_shift": law.log_shift,
    }


def save_law(law: MatrixLaw, path: str) -> None:
    with open(path, "w") as f:
        json.dump(law_to_jsonable(law), f, indent=2)
        f.write("\n")


def law_from_jsonable(obj: dict, where: str = "law") -> MatrixLaw:
    if not isinstance(obj, dict):
        raise LawFileError(f"{where}: expected a JSON object, got {type(obj).__name__}")
    required = {"dim", "matrices", "probs"}
    missing = required - obj.keys()
    if missing:
        raise LawFileError(f"{where}: missing keys {sorted(missing)}")
    unknown = obj.keys() - (required | {"log_shift"})
    if unknown:
        raise LawFileError(f"{where}: unknown keys {sorted(unknown)}")
    dim = obj["dim"]
    if not isinstance(dim, int) or dim < 2:
        raise LawFileError(f"{where}.dim: expected an integer >= 2, got {dim!r}")
    mats = obj["matrices"]
    probs = obj["probs"]
    if not isinstance(mats, list) or not mats:
        raise LawFileError(f"{where}.matrices: expected a non-empty list")
    if not isinstance(probs, list) or len(probs) != len(mats):
        raise LawFileError(
            f"{where}.probs: expected a list of {len(mats)} probabilities, got {len(probs) if isinstance(probs, list) else probs!r}"
        )
    support = []
    for k, flat in enumerate(mats):
        if not isinstance(flat, list) or len(flat) != dim * dim:
            raise LawFileError(
                f"{where}.matrices[{k}]: expected {dim * dim} row-major entries, got {len(flat) if isinstance(flat, list) else flat!r}"
            )
        if not all(isinstance(v, (int, float)) and math.isfinite(v) for v in flat):
            raise LawFileError(f"{where}.matrices[{k}]: entries must be finite numbers")
        try:
            support.append(SquareMatrix(np.array(flat, dtype=np.float64).reshape(dim, dim)))
        except ValueError as e:
            raise LawFileError(f"{where}.matrices[{k}]: {e}") from e
    for k, p in enumerate(probs):
        if not isinstance(p, (int, float)) or not math.isfinite(p) or p <= 0:
            raise LawFileError(f"{where}.probs[{k}]: expected a positive number, got {p!r}")
    shift = obj.get("log_shift", 0.0)
    if not isinstance(shift, (int, float)) or not math.isfinite(shift):
        raise LawFileError(f"{where}.log_shift: expected a finite number, got {shift!r}")
    try:
        return MatrixLaw(support, probs, float(shift))
    except ValueError as e:
        raise LawFileError(f"{where}: {e}") from e


def load_law(path: str) -> MatrixLaw:
    """Parse and validate a law file; errors carry line/column or key path."""
    try:
        with open(path) as f:
            text = f.read()
    except OSError as e:
        raise LawFileError(f"{path}: {e}") from e
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as e:
        raise LawFileError(f"{path}:{e.lineno}:{e.colno}: {e.msg}") from e
    return law_from_jsonable(obj, where=path)

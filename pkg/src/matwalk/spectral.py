"""Transfer-operator spectral quantities on the projective circle.

For a 2-dimensional law the projective line is a circle of circumference
pi; discretizing the weighted transfer operator

    (P_z phi)(x) = sum_i p_i exp(z * sigma(g_i, x)) phi(g_i . x)

on N equispaced angles (linear interpolation of phi at the image angle,
wrapping at pi) gives an N x N matrix whose Perron root lambda(z)
approximates the spectral radius of P_z.  The first two log-derivatives
of lambda at z = 0 are the drift and the diffusion constant of the
cocycle; both come out of symmetric finite differences.

A scalar recentering shift a multiplies every weight by exp(-a z), so
the discretized operator of the shifted law is exactly exp(-a z) M_z on
the same grid: recentering commutes with discretization to rounding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NoGap, UnsupportedDim
from .laws import MatrixLaw

__all__ = [
    "CircleGrid",
    "SpectralModel",
    "build_operator",
    "leading_eig",
    "nu_weights",
    "lyapunov_and_variance",
    "imaginary_spectral_radius",
    "w1_to_weights",
]

DEFAULT_GRID_N = 512
POWER_TOL = 1e-12
POWER_MAX_ITERS = 10_000


@dataclass(frozen=True)
class CircleGrid:
    """N equispaced angles theta_j = j*pi/N on the projective circle."""

    n: int

    def __post_init__(self):
        if self.n < 16:
            raise ValueError("grid needs at least 16 points")

    @property
    def spacing(self) -> float:
        return math.pi / self.n

    def angles(self) -> np.ndarray:
        return np.arange(self.n) * self.spacing

    def points(self) -> np.ndarray:
        """(2, N) unit representatives of the grid lines."""
        a = self.angles()
        return np.vstack([np.cos(a), np.sin(a)])


@dataclass(frozen=True)
class SpectralModel:
    """Assembled operator matrix at one z.  Perron data comes separately
    from leading_eig; keeping assembly and eigensolve apart lets callers
    reuse one matrix for several spectral questions."""

    grid: CircleGrid
    z: complex
    matrix: np.ndarray
    method: str


def build_operator(
    law: MatrixLaw,
    grid: CircleGrid,
    z: complex,
    *,
    method: str = "interp",
) -> SpectralModel:
    """Discretized weighted transfer operator M_z for a 2-d law.

    method "interp": phi at the image angle is linearly interpolated
    between its two neighboring grid angles (the default; row sums at
    z=0 are exactly 1 up to rounding).  method "ulam": each cell is
    subdivided and its images binned into cells, the classical set-based
    discretization; coarser, kept as a cross-check.
    """
    if law.dim != 2:
        raise UnsupportedDim(f"spectral grid is for 2-d laws, got dim {law.dim}")
    if method not in ("interp", "ulam"):
        raise ValueError(f"unknown method {method!r}")
    n = grid.n
    h = grid.spacing
    z = complex(z)
    real = z.imag == 0.0
    dtype = np.float64 if real else np.complex128
    zz = z.real if real else z
    mats = law.support_array()
    shift = law.log_shift
    out = np.zeros((n, n), dtype=dtype)
    if method == "interp":
        pts = grid.points()
        for i in range(law.n_atoms):
            w = mats[i] @ pts
            nrm = np.hypot(w[0], w[1])
            sig = np.log(nrm) + shift
            ang = np.mod(np.arctan2(w[1], w[0]), math.pi)
            pos = ang / h
            j0 = np.floor(pos).astype(np.int64)
            frac = pos - j0
            # the cell above theta_{N-1} wraps to theta_0 (same line)
            j0 = np.mod(j0, n)
            j1 = np.mod(j0 + 1, n)
            amp = law.probs[i] * np.exp(zz * sig)
            rows = np.arange(n)
            np.add.at(out, (rows, j0), amp * (1.0 - frac))
            np.add.at(out, (rows, j1), amp * frac)
    else:
        sub = 8
        offs = (np.arange(sub) + 0.5) / sub
        for i in range(law.n_atoms):
            for q in offs:
                a = (np.arange(n) + q) * h
                pts = np.vstack([np.cos(a), np.sin(a)])
                w = mats[i] @ pts
                nrm = np.hypot(w[0], w[1])
                sig = np.log(nrm) + shift
                ang = np.mod(np.arctan2(w[1], w[0]), math.pi)
                j = np.mod(np.floor(ang / h).astype(np.int64), n)
                amp = law.probs[i] * np.exp(zz * sig) / sub
                np.add.at(out, (np.arange(n), j), amp)
    return SpectralModel(grid=grid, z=z, matrix=out, method=method)


def leading_eig(model: SpectralModel) -> tuple[float, np.ndarray, np.ndarray]:
    """Perron data of the assembled operator: (eigenvalue, right vector,
    left vector), right normalized to mean 1, left to sum 1.

    Power iteration locates the root; two rounds of shifted inverse
    iteration then push both eigenvectors to rounding-level residuals
    (the left vector at z=0 is a stationary measure and is held to an
    l1 residual near machine precision).  Raises NoGap when the power
    stage fails to settle, which for these operators signals a
    degenerate peripheral spectrum (e.g. pure rotations)."""
    mat = model.matrix
    if np.iscomplexobj(mat):
        raise ValueError("leading_eig expects a real-weighted operator (z real)")
    lam, right = _power(mat)
    lam_l, left = _power(mat.T)
    # both iterations see the same spectrum; they must agree
    if abs(lam - lam_l) > 1e-9 * max(abs(lam), 1.0):
        raise NoGap(f"left/right eigenvalues disagree: {lam} vs {lam_l}")
    lam, right = _polish(mat, lam, right)
    _, left = _polish(mat.T, lam_l, left)
    right = right / np.mean(right)
    left = left / np.sum(left)
    return lam, right, left


def _power(mat: np.ndarray) -> tuple[float, np.ndarray]:
    n = mat.shape[0]
    v = np.full(n, 1.0 / n)
    lam = 1.0
    for _ in range(POWER_MAX_ITERS):
        w = mat @ v
        s = float(np.sum(np.abs(w)))
        if s == 0.0:
            raise NoGap("operator annihilated the positive cone")
        lam_new = float(np.sum(w) / np.sum(v))
        w = w / s
        if abs(lam_new - lam) <= POWER_TOL * max(abs(lam_new), 1.0) and np.max(
            np.abs(w - v)
        ) <= 1e3 * POWER_TOL:
            return lam_new, w
        v = w
        lam = lam_new
    raise NoGap(f"power iteration did not converge in {POWER_MAX_ITERS} steps")


def _polish(mat: np.ndarray, lam: float, v: np.ndarray, rounds: int = 2):
    """Shifted inverse iteration from a converged power-iteration pair.

    The shift sits just outside the Perron root so the solve is well
    posed; each round multiplies the error in the eigenvector by the
    ratio of (shift - lam) to the spectral gap.
    """
    n = mat.shape[0]
    shifted = mat - (lam * (1.0 + 1e-8) + 1e-14) * np.eye(n)
    for _ in range(rounds):
        try:
            w = np.linalg.solve(shifted, v)
        except np.linalg.LinAlgError:
            return lam, v
        nrm = float(np.linalg.norm(w))
        if nrm == 0.0 or not np.isfinite(nrm):
            return lam, v
        w = w / nrm
        if float(np.sum(w)) < 0.0:
            w = -w
        v = w
    denom = float(np.sum(v))
    if denom != 0.0:
        lam = float(np.sum(mat @ v) / denom)
    return lam, v


def nu_weights(law: MatrixLaw, grid: CircleGrid) -> np.ndarray:
    """Stationary boundary weights: the left Perron vector at z=0,
    clipped of rounding dust and renormalized to sum 1."""
    _, _, left = leading_eig(build_operator(law, grid, 0.0))
    if np.min(left) < -1e-12:
        raise NoGap(f"left eigenvector has a negative weight {np.min(left):.3e}")
    w = np.maximum(left, 0.0)
    return w / np.sum(w)


def lyapunov_and_variance(
    law: MatrixLaw,
    grid: CircleGrid | None = None,
    h: float = 1e-3,
) -> tuple[float, float, dict]:
    """(drift, diffusion constant, diagnostics) of the norm cocycle from
    the Perron root: lambda_mu = d/dz log lambda(z) at 0 and
    upsilon^2 = d^2/dz^2 log lambda(z) at 0, symmetric differences with
    step h in [1e-4, 1e-2]."""
    if not 1e-4 <= h <= 1e-2:
        raise ValueError("finite-difference step h must be in [1e-4, 1e-2]")
    if grid is None:
        grid = CircleGrid(DEFAULT_GRID_N)

    def _log_lam(z: float) -> float:
        lam, _, _ = leading_eig(build_operator(law, grid, z))
        return math.log(lam)

    lp = _log_lam(+h)
    l0 = _log_lam(0.0)
    lm = _log_lam(-h)
    lam_mu = (lp - lm) / (2.0 * h)
    ups2 = (lp - 2.0 * l0 + lm) / (h * h)
    diag = {"grid_n": grid.n, "h": h, "log_lam_0": l0}
    return lam_mu, ups2, diag


def imaginary_spectral_radius(
    law: MatrixLaw, grid: CircleGrid, t_values
) -> list[float]:
    """norm(M_{it}^64)^{1/64} for each t, a proxy for the spectral radius
    of the Fourier-twisted operator; strictly below 1 away from t=0 when
    the cocycle is non-arithmetic, equal to 1 at degenerate frequencies.

    Row abs-sums of M_{it} are 1, so its powers never overflow and the
    64th power can be formed by six plain squarings.
    """
    out = []
    for t in t_values:
        mat = build_operator(law, grid, 1j * float(t)).matrix
        for _ in range(6):
            mat = mat @ mat
        out.append(float(np.linalg.norm(mat, 2)) ** (1.0 / 64.0))
    return out


def w1_to_weights(samples: np.ndarray, grid: CircleGrid, weights: np.ndarray) -> float:
    """Interval-W1 distance between an empirical angle sample on [0, pi)
    and a discrete measure sitting on the grid angles."""
    s = np.sort(np.asarray(samples, dtype=float))
    knots = np.union1d(s, grid.angles())
    f_emp = np.searchsorted(s, knots, side="right") / s.size
    cw = np.concatenate([[0.0], np.cumsum(weights)])
    f_nu = cw[np.searchsorted(grid.angles(), knots, side="right")]
    gaps = np.diff(np.concatenate([knots, [math.pi]]))
    return float(np.sum(np.abs(f_emp - f_nu) * gaps))

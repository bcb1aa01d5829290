"""Transfer-operator route: assembly, Perron data, derived constants.

The discretization has two independent methods (interp / ulam) that are
held against each other, and every derived constant is checked against
either an exact model (scalar matrices) or the Monte Carlo route.
"""

import math

import numpy as np
import pytest

from matwalk import (
    CircleGrid,
    MatrixLaw,
    NoGap,
    SquareMatrix,
    UnsupportedDim,
    build_operator,
    imaginary_spectral_radius,
    law_moments,
    leading_eig,
    lyapunov_and_variance,
    nu_weights,
    recenter,
    w1_to_weights,
)


def test_circle_grid():
    g = CircleGrid(64)
    assert g.spacing == math.pi / 64
    a = g.angles()
    assert a.shape == (64,) and a[0] == 0.0
    assert np.all(np.diff(a) > 0) and a[-1] < math.pi
    p = g.points()
    assert p.shape == (2, 64)
    assert np.allclose(np.hypot(p[0], p[1]), 1.0, atol=1e-15)
    with pytest.raises(ValueError):
        CircleGrid(8)


def test_operator_is_stochastic_at_zero(law_centered):
    grid = CircleGrid(128)
    model = build_operator(law_centered, grid, 0.0)
    assert model.method == "interp" and model.z == 0.0
    assert model.matrix.dtype == np.float64
    rows = model.matrix.sum(axis=1)
    assert np.allclose(rows, 1.0, atol=1e-12)
    assert np.min(model.matrix) >= 0.0


def test_leading_eig_at_zero(law_centered):
    grid = CircleGrid(128)
    model = build_operator(law_centered, grid, 0.0)
    lam, right, left = leading_eig(model)
    assert abs(lam - 1.0) < 1e-10
    # right vector of a stochastic matrix is the constant function
    assert np.allclose(right, 1.0, atol=1e-8)
    # left vector is a stationary probability with tiny residual
    assert abs(np.sum(left) - 1.0) < 1e-12
    assert np.min(left) > -1e-13
    residual = left @ model.matrix - lam * left
    assert np.sum(np.abs(residual)) < 1e-10


def test_methods_agree(law_centered):
    grid = CircleGrid(256)
    z = 0.4
    lam_i, _, _ = leading_eig(build_operator(law_centered, grid, z))
    lam_u, _, _ = leading_eig(build_operator(law_centered, grid, z, method="ulam"))
    assert lam_i > 0 and lam_u > 0
    assert abs(lam_i / lam_u - 1.0) < 2e-3
    with pytest.raises(ValueError):
        build_operator(law_centered, grid, z, method="fft")


def test_complex_weights_rejected(law_centered):
    grid = CircleGrid(32)
    model = build_operator(law_centered, grid, 0.5j)
    assert model.matrix.dtype == np.complex128
    with pytest.raises(ValueError):
        leading_eig(model)


def test_dim3_rejected():
    m = SquareMatrix(np.eye(3) + 0.2)
    law3 = MatrixLaw([m, m.inverse()], [0.5, 0.5])
    with pytest.raises(UnsupportedDim):
        build_operator(law3, CircleGrid(32), 0.0)


def test_lyapunov_matches_walk_moments(law_raw):
    grid = CircleGrid(256)
    lam, ups2, diag = lyapunov_and_variance(law_raw, grid)
    drift_mc, var_mc = law_moments(law_raw)
    assert abs(lam - drift_mc) < 5e-3          # grid bias + MC error
    assert abs(ups2 / var_mc - 1.0) < 0.15
    assert diag["grid_n"] == 256
    assert abs(diag["log_lam_0"]) < 1e-10      # probabilities sum to 1
    with pytest.raises(ValueError):
        lyapunov_and_variance(law_raw, grid, h=0.5)


def test_recentering_moves_drift_linearly(law_raw):
    # log lam(z) picks up exactly -a*z under a scalar shift by a, so the
    # measured drift moves by -a and the curvature stays put
    grid = CircleGrid(64)
    lam1, ups1, _ = lyapunov_and_variance(law_raw, grid)
    a = 0.2719
    lam2, ups2, _ = lyapunov_and_variance(recenter(law_raw, a), grid)
    assert abs((lam1 - lam2) - a) < 1e-9
    assert abs(ups1 - ups2) < 1e-7
    # recentering by the measured drift zeroes it on the same grid
    lam3, _, _ = lyapunov_and_variance(recenter(law_raw, lam1), grid)
    assert abs(lam3) < 1e-9


def test_nu_weights(law_centered):
    grid = CircleGrid(128)
    w = nu_weights(law_centered, grid)
    assert w.shape == (128,)
    assert abs(np.sum(w) - 1.0) < 1e-12
    assert np.min(w) >= 0.0
    assert np.max(w) < 0.1                     # spread out, no atom dominates
    # insensitive to the scalar shift: the z=0 operator ignores log_shift
    w_raw = nu_weights(recenter(law_centered, -0.5), grid)
    assert np.allclose(w, w_raw, atol=1e-12)


def test_imaginary_radius_scalar_law_oracle():
    # scalar atoms 2I and I/2: sigma = +/- log2 on every line, so the
    # twisted weight is the characteristic function cos(t*log2) exactly
    two = SquareMatrix([[2.0, 0.0], [0.0, 2.0]])
    law = MatrixLaw([two, two.inverse()], [0.5, 0.5])
    grid = CircleGrid(32)
    ts = [0.0, math.pi / (2 * math.log(2.0)), math.pi / math.log(2.0)]
    got = imaginary_spectral_radius(law, grid, ts)
    want = [abs(math.cos(t * math.log(2.0))) for t in ts]
    for g, w in zip(got, want):
        assert abs(g - w) < 1e-6
    assert got[1] < 1e-6                       # extinction frequency
    assert abs(got[2] - 1.0) < 1e-9            # lattice degeneracy


def test_imaginary_radius_nonarithmetic(law_centered):
    grid = CircleGrid(128)
    vals = imaginary_spectral_radius(law_centered, grid, [0.7, 1.3, 2.9])
    for v in vals:
        assert v < 0.999
    (at_zero,) = imaginary_spectral_radius(law_centered, grid, [0.0])
    assert at_zero > 0.999


def test_w1_to_weights_oracles():
    grid = CircleGrid(16)
    ang = grid.angles()
    # empirical sample = the grid measure itself
    uniform = np.full(16, 1.0 / 16)
    samples = np.repeat(ang, 10)
    assert w1_to_weights(samples, grid, uniform) < 1e-12
    # point mass vs point mass: distance is the angle gap
    w = np.zeros(16)
    w[3] = 1.0
    a = ang[3] + 0.21
    got = w1_to_weights(np.full(50, a), grid, w)
    assert abs(got - 0.21) < 1e-12
    # uniform empirical shift by eps moves W1 by about eps
    eps = 0.004
    got = w1_to_weights(ang + eps, grid, uniform)
    assert abs(got - eps) < eps * 0.2

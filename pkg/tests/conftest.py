import numpy as np
import pytest

from matwalk import MatrixLaw, ProjectivePoint, canonical_law, recenter

# Drift of the four-letter integer law, measured once at high precision;
# recentering by this constant leaves a residual drift ~2e-5, far below
# the 1e-3 the estimators require.  Tests that need an exactly
# self-consistent shift use recenter_two_stage instead.
LAM_REF = 0.3362986


@pytest.fixture(scope="session")
def law_raw():
    return canonical_law()


@pytest.fixture(scope="session")
def law_centered():
    return recenter(canonical_law(), LAM_REF)


@pytest.fixture(scope="session")
def x_e1():
    return ProjectivePoint(np.array([1.0, 0.0]))


@pytest.fixture(scope="session", autouse=True)
def _warm_kernels(law_centered, x_e1):
    """Compile the numba kernels once so per-test timings are honest."""
    from matwalk import snapshot_stats, summary_ensemble
    from matwalk.reversal import reversed_ensemble

    snapshot_stats(law_centered, x_e1, 1.0, [4], 2048, 1, interval=(0.0, 1.0),
                   collect_top=True, want_end=True)
    summary_ensemble(law_centered, x_e1, 4, 2048, 1)
    reversed_ensemble(law_centered, 1.0, 4, 2048, seed=1)
    yield


def two_atom_sublaw():
    """{A, A^-1} with even weights: drift-free by symmetry, two atoms."""
    full = canonical_law()
    return MatrixLaw((full.support[0], full.support[1]), (0.5, 0.5))

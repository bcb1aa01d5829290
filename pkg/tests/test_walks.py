"""Walk engine: path simulation, snapshot reductions, exact enumeration.

Two independent routes are held against each other throughout:

  * the compiled ensemble kernels vs the scalar simulate_path reference
    (bit-level agreement on shared streams),
  * Monte Carlo frequencies vs enumerate_exact, itself checked against a
    from-scratch itertools walk over all words.
"""

import itertools
import math

import numpy as np
import pytest

from matwalk import (
    EstimateWithCI,
    GridTooShort,
    HatFunction,
    NotCentered,
    ProjectivePoint,
    SamplerState,
    SeparableTarget,
    StepFunction,
    SURVIVED,
    TooLarge,
    WalkPath,
    build_t_grid,
    cocycle_sigma,
    act,
    enumerate_exact,
    estimate_exit_local,
    estimate_local_prob,
    estimate_persistence,
    estimate_rho_integral,
    estimate_V,
    first_exit_time,
    fn_exit_local,
    fn_interval,
    fn_local_prob,
    fn_persistence,
    fn_rho_inner,
    fn_V,
    law_moments,
    simulate_path,
    snapshot_stats,
    summary_ensemble,
)
from matwalk.laws import sample_indices


# ---------------------------------------------------------------------------
# scalar path reference


def test_simulate_path_matches_geometry(law_centered, x_e1):
    n, seed, stream = 40, 31, 2
    path = simulate_path(law_centered, x_e1, n, SamplerState(seed, stream_id=stream))
    idx = sample_indices(law_centered, seed, stream, 0, n)
    assert np.array_equal(path.indices, idx)
    x = x_e1
    s = 0.0
    for k in range(n):
        g = law_centered.shifted_matrix(int(idx[k]))
        inc = cocycle_sigma(g, x)
        assert abs(path.increments[k] - inc) < 1e-12
        s += inc
        assert abs(path.prefix_sums[k + 1] - s) < 1e-10
        x = act(g, x)
    assert abs(abs(float(path.end_point.vec @ x.vec)) - 1.0) < 1e-12
    assert path.prefix_sums[0] == 0.0
    assert path.running_min == np.min(path.prefix_sums[1:])
    with pytest.raises(ValueError):
        simulate_path(law_centered, x_e1, 0, SamplerState(0))


def test_first_exit_time_cases(x_e1):
    mk = lambda pref: WalkPath(
        start=x_e1,
        increments=np.diff(pref),
        prefix_sums=np.asarray(pref, dtype=float),
        running_min=float(np.min(pref[1:])),
        end_point=x_e1,
        indices=np.zeros(len(pref) - 1, dtype=np.int64),
    )
    p = mk([0.0, -1.0, -2.0, 1.0])
    assert first_exit_time(p, 1.0) == 2            # t+S: 0, -1, 2
    assert first_exit_time(p, 1.0, strict=False) == 1
    assert first_exit_time(p, 5.0) is SURVIVED
    assert not SURVIVED                            # falsy sentinel
    assert first_exit_time(p, 0.5, sign=-1) == 3   # t-S: 1.5, 2.5, -0.5
    with pytest.raises(ValueError):
        first_exit_time(p, 1.0, sign=0)


# ---------------------------------------------------------------------------
# enumeration oracle, itself vs a from-scratch word walk


def _brute_force(law, x, t, n, *, sign=1, strict=True):
    """Everything enumerate_exact reports, via itertools + geometry ops."""
    rows = []
    for word in itertools.product(range(law.n_atoms), repeat=n):
        p = 1.0
        xx = x
        s = 0.0
        path = []
        for i in word:
            p *= law.probs[i]
            g = law.shifted_matrix(i)
            s += cocycle_sigma(g, xx)
            xx = act(g, xx)
            path.append(s)
        vals = t + sign * np.asarray(path)
        ok = (vals >= 0.0) if strict else (vals > 0.0)
        rows.append({
            "prob": p,
            "surv_full": bool(np.all(ok)),
            "surv_prev": bool(np.all(ok[:-1])),
            "val": float(vals[-1]),
            "end": xx,
        })
    return rows


def test_enumerate_against_brute_force(law_centered, x_e1):
    t, n = 0.8, 4
    rows = _brute_force(law_centered, x_e1, t, n)

    want_pers = math.fsum(r["prob"] * r["surv_full"] for r in rows)
    got = enumerate_exact(law_centered, x_e1, t, n, fn_persistence)
    assert abs(got - want_pers) < 1e-12

    want_v = math.fsum(r["prob"] * r["val"] * r["surv_full"] for r in rows)
    assert abs(enumerate_exact(law_centered, x_e1, t, n, fn_V) - want_v) < 1e-12

    a, b = 0.25, 1.5
    want_loc = math.fsum(
        r["prob"] * (r["surv_prev"] and a <= r["val"] <= b) for r in rows)
    got = enumerate_exact(law_centered, x_e1, t, n, fn_local_prob(a, b))
    assert abs(got - want_loc) < 1e-12

    want_int = math.fsum(r["prob"] * (a <= r["val"] <= b) for r in rows)
    got = enumerate_exact(law_centered, x_e1, t, n, fn_interval(a, b))
    assert abs(got - want_int) < 1e-12

    want_exit = math.fsum(
        r["prob"] * (r["surv_prev"] and r["val"] < 0.0) for r in rows)
    got = enumerate_exact(law_centered, x_e1, t, n, fn_exit_local)
    assert abs(got - want_exit) < 1e-12

    h = SeparableTarget(StepFunction.indicator(0.0, 1.0),
                        HatFunction.bump(1.0, 0.9))
    want_rho = math.fsum(
        r["prob"] * r["surv_prev"]
        * h.angular_values(r["end"].vec.reshape(2, 1))[0]
        * h.profile_values(np.array([r["val"]]))[0]
        for r in rows)
    got = enumerate_exact(law_centered, x_e1, t, n, fn_rho_inner(h))
    assert abs(got - want_rho) < 1e-12


def test_enumerate_sign_and_strictness(law_centered, x_e1):
    t, n = 0.4, 3
    for sign in (1, -1):
        for strict in (True, False):
            rows = _brute_force(law_centered, x_e1, t, n, sign=sign, strict=strict)
            want = math.fsum(r["prob"] * r["surv_full"] for r in rows)
            got = enumerate_exact(law_centered, x_e1, t, n, fn_persistence,
                                  sign=sign, strict=strict)
            assert abs(got - want) < 1e-12


def test_enumerate_cap():
    from matwalk import canonical_law
    with pytest.raises(TooLarge):
        enumerate_exact(canonical_law(), ProjectivePoint([1.0, 0.0]), 1.0, 13,
                        fn_persistence)


# ---------------------------------------------------------------------------
# compiled kernels vs the scalar reference on shared streams


def test_snapshot_matches_scalar_paths(law_centered, x_e1):
    t, n_paths = 1.0, 300
    sched = [3, 7, 12]
    st = snapshot_stats(law_centered, x_e1, t, sched, n_paths, seed=99)
    taus = []
    finals = []
    for j in range(n_paths):
        p = simulate_path(law_centered, x_e1, 12, SamplerState(99, stream_id=j))
        tau = first_exit_time(p, t)
        taus.append(math.inf if tau is SURVIVED else tau)
        finals.append(p.prefix_sums[np.asarray(sched)])
    taus = np.asarray(taus)
    finals = np.stack(finals, axis=1)
    for j, nj in enumerate(sched):
        alive = taus > nj
        assert st.n_alive[j] == np.count_nonzero(alive)
        assert st.n_reach[j] == np.count_nonzero(taus >= nj)
        assert st.n_exit[j] == np.count_nonzero(taus == nj)
        vals = t + finals[j][alive]
        assert abs(st.sum_val[j] - math.fsum(vals)) < 1e-9
        assert abs(st.sumsq_val[j] - math.fsum(vals * vals)) < 1e-9


def test_snapshot_local_and_top_collection(law_centered, x_e1):
    t, n, n_paths = 1.0, 10, 400
    a, b = 0.5, 2.0
    st = snapshot_stats(law_centered, x_e1, t, [n], n_paths, seed=17,
                        interval=(a, b), collect_top=True, want_end=True)
    n_loc = 0
    samples = []
    alive_fl = []
    ends = []
    for j in range(n_paths):
        p = simulate_path(law_centered, x_e1, n, SamplerState(17, stream_id=j))
        tau = first_exit_time(p, t)
        reach = (tau is SURVIVED) or tau >= n
        alive = (tau is SURVIVED) or tau > n
        val = t + p.prefix_sums[n]
        if reach and a <= val <= b:
            n_loc += 1
        if reach:
            samples.append(val)
            alive_fl.append(alive)
            if alive:
                ends.append(p.end_point.vec)
    assert st.n_local[0] == n_loc
    assert np.allclose(np.sort(st.samples_top), np.sort(samples), atol=1e-10)
    assert np.array_equal(st.alive_top, alive_fl)
    got_ends = np.sort(np.abs(st.end_top[0]))
    want_ends = np.sort(np.abs([e[0] for e in ends]))
    assert np.allclose(got_ends, want_ends, atol=1e-10)


def test_summary_matches_scalar_paths(law_centered, x_e1):
    n, n_paths = 15, 200
    mins, sns, ends = summary_ensemble(law_centered, x_e1, n, n_paths, seed=5)
    for j in range(n_paths):
        p = simulate_path(law_centered, x_e1, n, SamplerState(5, stream_id=j))
        assert abs(mins[j] - np.min(p.prefix_sums[1:n])) < 1e-10
        assert abs(sns[j] - p.prefix_sums[n]) < 1e-10
        assert abs(abs(float(ends[:, j] @ p.end_point.vec)) - 1.0) < 1e-10


def test_snapshot_monotonicity_and_conservation(law_centered, x_e1):
    st = snapshot_stats(law_centered, x_e1, 1.0, [2, 4, 8, 16], 5000, seed=3)
    assert np.all(np.diff(st.n_alive) <= 0)
    assert np.all(np.diff(st.n_reach) <= 0)
    assert np.all(st.n_reach >= st.n_alive)
    # reach - alive at n is exactly the paths exiting at n
    assert np.array_equal(st.n_reach - st.n_alive, st.n_exit)


def test_snapshot_infinite_t(law_centered, x_e1):
    # t = inf disables the barrier: everyone survives, val = S_n
    n, n_paths = 12, 300
    st = snapshot_stats(law_centered, x_e1, math.inf, [n], n_paths, seed=8)
    assert st.n_alive[0] == n_paths and st.n_exit[0] == 0
    _, sns, _ = summary_ensemble(law_centered, x_e1, n, n_paths, seed=8)
    assert abs(st.sum_val[0] - math.fsum(sns)) < 1e-9


# ---------------------------------------------------------------------------
# estimators vs enumeration (4 sigma at modest path counts)


def _close(est: EstimateWithCI, exact: float, z: float = 4.0):
    return abs(est.value - exact) <= z * max(est.stderr, 1e-12)


def test_estimators_against_enumeration(law_centered, x_e1):
    t, n, paths = 1.2, 6, 60_000
    s = lambda k: SamplerState(1000 + k)
    exact_p = enumerate_exact(law_centered, x_e1, t, n, fn_persistence)
    assert _close(estimate_persistence(law_centered, x_e1, t, n, paths, s(0)), exact_p)
    exact_v = enumerate_exact(law_centered, x_e1, t, n, fn_V)
    assert _close(estimate_V(law_centered, x_e1, t, n, paths, s(1),
                             check_centering=False), exact_v)
    a, b = 0.5, 2.5
    exact_l = enumerate_exact(law_centered, x_e1, t, n, fn_local_prob(a, b))
    assert _close(estimate_local_prob(law_centered, x_e1, t, a, b, n, paths, s(2)), exact_l)
    exact_e = enumerate_exact(law_centered, x_e1, t, n, fn_exit_local)
    assert _close(estimate_exit_local(law_centered, x_e1, t, n, paths, s(3)), exact_e)


def test_local_prob_validation(law_centered, x_e1):
    with pytest.raises(ValueError):
        estimate_local_prob(law_centered, x_e1, 1.0, 2.0, 1.0, 4, 1000,
                            SamplerState(0))


def test_estimate_v_centering_guard(law_raw, x_e1):
    with pytest.raises(NotCentered):
        estimate_V(law_raw, x_e1, 1.0, 8, 2000, SamplerState(0))
    # explicit bypass works on the same law
    est = estimate_V(law_raw, x_e1, 1.0, 8, 2000, SamplerState(0),
                     check_centering=False)
    assert est.value >= 0.0


# ---------------------------------------------------------------------------
# law moments


def test_law_moments(law_raw, law_centered):
    drift_raw, var_raw = law_moments(law_raw)
    drift_c, var_c = law_moments(law_centered)
    assert 0.2 < drift_raw < 0.5
    assert abs(drift_c) < 2e-3
    assert 0.1 < var_c < 1.0
    # cache: same tuple object comes back
    assert law_moments(law_raw) is law_moments(law_raw)


# ---------------------------------------------------------------------------
# harmonic-measure integral


def test_rho_integral_against_enumeration(law_centered, x_e1):
    h = SeparableTarget(StepFunction.indicator(0.0, 1.0))
    n = 5
    grid = np.linspace(0.0, 6.0, 1201)
    est = estimate_rho_integral(law_centered, h, n, grid, 150_000, SamplerState(77))
    # exact route: quadrature of t * E[h(...); tau > n-1] over the grid
    inner = np.array([
        enumerate_exact(law_centered, x_e1, float(t), n, fn_rho_inner(h))
        for t in grid
    ])
    exact = float(np.trapezoid(grid * inner, grid))
    assert abs(est.value - exact) <= 4.0 * est.stderr + 1e-9
    assert est.meta["integrand"].shape == grid.shape


def test_rho_integral_grid_guard(law_centered):
    h = SeparableTarget(StepFunction.indicator(0.0, 1.0))
    short = np.linspace(0.0, 0.75, 76)
    with pytest.raises(GridTooShort):
        estimate_rho_integral(law_centered, h, 8, short, 20_000, SamplerState(1))
    with pytest.raises(ValueError):
        estimate_rho_integral(law_centered, h, 8, np.array([0.0]), 1000,
                              SamplerState(1))


def test_build_t_grid():
    g = build_t_grid(2.0, 0.6, 100)
    assert g[0] == 0.0
    assert np.all(np.diff(g) > 0)
    assert g[-1] >= 2.0 + 10.0 * 0.6 * 10.0
    assert np.max(np.diff(g)) <= 0.1 + 1e-12


# ---------------------------------------------------------------------------
# determinism contracts


def test_worker_and_rerun_determinism(law_centered, x_e1):
    kw = dict(interval=(0.0, 1.0), collect_top=True)
    a = snapshot_stats(law_centered, x_e1, 1.0, [4, 9], 40_000, 11, **kw)
    b = snapshot_stats(law_centered, x_e1, 1.0, [4, 9], 40_000, 11, workers=3, **kw)
    for f in ("n_alive", "n_reach", "n_exit", "n_local"):
        assert np.array_equal(getattr(a, f), getattr(b, f))
    # fsum over ordered chunk partials: bit-identical, not just close
    assert a.sum_val.tolist() == b.sum_val.tolist()
    assert a.sumsq_val.tolist() == b.sumsq_val.tolist()
    assert np.array_equal(a.samples_top, b.samples_top)

    h = SeparableTarget(StepFunction.indicator(0.0, 1.0))
    grid = build_t_grid(1.0, 0.6, 16)
    r1 = estimate_rho_integral(law_centered, h, 16, grid, 50_000, SamplerState(7))
    r2 = estimate_rho_integral(law_centered, h, 16, grid, 50_000, SamplerState(7),
                               workers=4)
    assert r1.value == r2.value and r1.stderr == r2.stderr


def test_stream_base_slicing(law_centered, x_e1):
    # paths are indexed by stream id, so a shifted base is a slice
    m1, s1, e1 = summary_ensemble(law_centered, x_e1, 10, 150, seed=21)
    m2, s2, e2 = summary_ensemble(law_centered, x_e1, 10, 100, seed=21,
                                  stream_base=50)
    assert np.array_equal(m2, m1[50:150])
    assert np.array_equal(s2, s1[50:150])
    assert np.array_equal(e2, e1[:, 50:150])


def test_snapshot_validation(law_centered, x_e1):
    with pytest.raises(ValueError):
        snapshot_stats(law_centered, x_e1, 1.0, [], 100, 0)
    with pytest.raises(ValueError):
        snapshot_stats(law_centered, x_e1, 1.0, [0, 4], 100, 0)
    with pytest.raises(ValueError):
        snapshot_stats(law_centered, x_e1, 1.0, [4], 100, 0, sign=2)
    x3 = ProjectivePoint([1.0, 0.0, 0.0])
    with pytest.raises(ValueError):
        snapshot_stats(law_centered, x3, 1.0, [4], 100, 0)

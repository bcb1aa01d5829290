"""Forward walk simulation, exit times, and Monte Carlo estimators.

Engine layout: paths are split into fixed chunks of 16384; each chunk is
simulated by a compiled kernel (path index = RNG stream, step index =
draw index) and reduced to a handful of sums with numpy's pairwise
summation; chunk partials are then combined with math.fsum in chunk
order.  Worker threads only pick up chunks, so every statistic is a
pure function of (law, config, seed): bit-identical for any worker
count.

Estimators condition on the exit time tau = min{k >= 1: t + sign*S_k < 0}
(strict inequality; a flag switches to the weak one).  Paths stop
consuming steps once they exit, which keeps survival studies at n in the
thousands cheap: the expected alive-length grows like sqrt(n).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import NotCentered, TooLarge, GridTooShort
from .geometry import ProjectivePoint
from .laws import MatrixLaw
from .rng import SamplerState, index_from_raw, raw64
from .targets import SeparableTarget

__all__ = [
    "SURVIVED",
    "WalkPath",
    "EstimateWithCI",
    "simulate_path",
    "first_exit_time",
    "estimate_V",
    "estimate_persistence",
    "estimate_local_prob",
    "estimate_exit_local",
    "estimate_rho_integral",
    "enumerate_exact",
    "EnumerationLeaves",
    "fn_persistence",
    "fn_V",
    "fn_local_prob",
    "fn_interval",
    "fn_exit_local",
    "fn_rho_inner",
    "snapshot_stats",
    "SnapshotStats",
    "summary_ensemble",
    "build_t_grid",
    "law_moments",
]

CHUNK = 16384
ENUM_CAP = 10_000_000


class _Survived:
    """Sentinel for walks that never exit within their horizon."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "Survived"

    def __bool__(self):
        return False


SURVIVED = _Survived()


# ---------------------------------------------------------------------------
# paths


@dataclass(frozen=True)
class WalkPath:
    """One realized walk: per-step cocycle increments, compensated prefix
    sums (prefix_sums[0] = 0), their running minimum over 1..n, and the
    end point G_n x."""

    start: ProjectivePoint
    increments: np.ndarray
    prefix_sums: np.ndarray
    running_min: float
    end_point: ProjectivePoint
    indices: np.ndarray

    def __len__(self) -> int:
        return len(self.increments)


def simulate_path(law: MatrixLaw, x: ProjectivePoint, n: int, s: SamplerState) -> WalkPath:
    """Simulate n steps of x_k = g_k . x_{k-1}, S_k = S_{k-1} + sigma(g_k, x_{k-1}).

    The direction vector is renormalized every step and the log-norm
    accumulated (compensated), so any n fits in float range.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if law.dim != x.dim:
        raise ValueError("law and start point dimension mismatch")
    v = x.vec.copy()
    inc = np.empty(n)
    pref = np.empty(n + 1)
    pref[0] = 0.0
    idx = np.empty(n, dtype=np.int64)
    thresholds = law.thresholds()
    acc = 0.0
    comp = 0.0
    for k in range(n):
        u = raw64(s.seed, s.stream_id, s.next_index())
        i = index_from_raw(u, thresholds)
        idx[k] = i
        g = law.shifted_matrix(i)
        w = g.entries @ v
        nrm = float(np.linalg.norm(w))
        v = w / nrm
        inc[k] = math.log(nrm)
        y = inc[k] - comp
        t = acc + y
        comp = (t - acc) - y
        acc = t
        pref[k + 1] = acc
    for a in (inc, pref, idx):
        a.setflags(write=False)
    return WalkPath(
        start=x,
        increments=inc,
        prefix_sums=pref,
        running_min=float(np.min(pref[1:])),
        end_point=ProjectivePoint(v),
        indices=idx,
    )


def first_exit_time(path: WalkPath, t: float, sign: int = 1, strict: bool = True):
    """Smallest k >= 1 with t + sign*S_k < 0 (or <= 0 if strict=False),
    else the SURVIVED sentinel."""
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    vals = t + sign * path.prefix_sums[1:]
    hits = (vals < 0.0) if strict else (vals <= 0.0)
    where = np.nonzero(hits)[0]
    if where.size == 0:
        return SURVIVED
    return int(where[0]) + 1


# ---------------------------------------------------------------------------
# estimates


@dataclass(frozen=True)
class EstimateWithCI:
    value: float
    stderr: float
    n_samples: int
    seed: int
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.stderr < 0 or self.n_samples < 1:
            raise ValueError("stderr must be >= 0 and n_samples >= 1")


def _mean_se_from_sums(total: float, total_sq: float, n: int) -> tuple[float, float]:
    mean = total / n
    var = max(total_sq / n - mean * mean, 0.0)
    return mean, math.sqrt(var / n)


def _bernoulli_se(count: int, n: int) -> tuple[float, float]:
    p = count / n
    return p, math.sqrt(max(p * (1.0 - p), 0.0) / n)


# ---------------------------------------------------------------------------
# chunked engine


def _block_for(law: MatrixLaw) -> int:
    """Largest safe block length for the renormalize-every-block kernels:
    the squared norm and the exit threshold must stay inside float range
    over one block."""
    sup = law.support_array()
    inv = law.inverse_array()
    per_step = 1e-9
    for i in range(law.n_atoms):
        up = math.log(np.linalg.norm(sup[i], 2))
        dn = math.log(np.linalg.norm(inv[i], 2))
        per_step = max(per_step, abs(up), abs(dn))
    per_step += abs(law.log_shift)
    return max(1, min(32, int(300.0 / per_step)))


def _chunk_ranges(n_paths: int):
    start = 0
    while start < n_paths:
        yield start, min(CHUNK, n_paths - start)
        start += CHUNK


def _run_chunks(chunk_fn, n_paths: int, workers: int) -> list:
    ranges = list(_chunk_ranges(n_paths))
    if workers <= 1 or len(ranges) <= 1:
        return [chunk_fn(a, c) for a, c in ranges]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda rc: chunk_fn(*rc), ranges))


@dataclass(frozen=True)
class SnapshotStats:
    """Reduced statistics of one conditioned ensemble, recorded at every
    step in `schedule`.  val means t + sign*S (or sign*S when t is
    infinite, i.e. the walk is unconditioned)."""

    schedule: np.ndarray
    n_paths: int
    t: float
    sign: int
    n_alive: np.ndarray        # paths with tau > n_j
    n_reach: np.ndarray        # paths with tau >= n_j
    n_exit: np.ndarray         # paths with tau == n_j
    n_local: np.ndarray        # tau >= n_j and val in [a, b]
    sum_val: np.ndarray        # sum of val over tau > n_j
    sumsq_val: np.ndarray
    samples_top: np.ndarray    # val at schedule[-1] over tau >= top
    alive_top: np.ndarray      # tau > top flag aligned with samples_top
    end_top: np.ndarray | None # unit directions aligned, tau > top only


def snapshot_stats(
    law: MatrixLaw,
    x: ProjectivePoint,
    t: float,
    schedule,
    n_paths: int,
    seed: int,
    *,
    sign: int = 1,
    strict: bool = True,
    interval: tuple[float, float] | None = None,
    want_end: bool = False,
    collect_top: bool = False,
    workers: int = 1,
    stream_base: int = 0,
) -> SnapshotStats:
    """Run one ensemble to schedule[-1] steps and reduce it at every
    scheduled step.  All estimators below are thin wrappers over this."""
    sched = np.asarray(sorted(set(int(v) for v in schedule)), dtype=np.int64)
    if sched.size == 0 or sched[0] < 1:
        raise ValueError("schedule must contain steps >= 1")
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    if law.dim != x.dim:
        raise ValueError("law and start point dimension mismatch")
    mats = law.support_array()
    thresholds = law.thresholds()
    shift = law.log_shift
    block = _block_for(law)
    x0 = x.vec
    d = law.dim
    n_sched = sched.size
    a, b = interval if interval is not None else (0.0, -1.0)
    t_finite = math.isfinite(t)
    top = int(sched[-1])

    def chunk_fn(start, count):
        out_tau = np.empty(count, dtype=np.int64)
        out_s = np.empty((n_sched, count))
        out_end = np.empty((d, count)) if want_end else np.empty((d, 0))
        if d == 2:
            _kernels.walk_snapshots_d2(
                np.uint64(seed), stream_base + start, count, mats, thresholds,
                shift, x0, t, sign, strict, block, sched, want_end,
                out_tau, out_s, out_end,
            )
        else:
            _kernels.walk_snapshots_dgen(
                np.uint64(seed), stream_base + start, count, mats, thresholds,
                shift, x0, t, sign, strict, sched, want_end,
                out_tau, out_s, out_end,
            )
        alive_c = np.empty(n_sched, dtype=np.int64)
        reach_c = np.empty(n_sched, dtype=np.int64)
        exit_c = np.empty(n_sched, dtype=np.int64)
        local_c = np.empty(n_sched, dtype=np.int64)
        sv = np.empty(n_sched)
        svq = np.empty(n_sched)
        for j in range(n_sched):
            nj = sched[j]
            alive = out_tau > nj
            reach = out_tau >= nj
            sj = out_s[j]
            val = (t + sign * sj) if t_finite else (sign * sj)
            alive_c[j] = np.count_nonzero(alive)
            reach_c[j] = np.count_nonzero(reach)
            exit_c[j] = np.count_nonzero(out_tau == nj)
            if interval is not None:
                local_c[j] = np.count_nonzero(reach & (val >= a) & (val <= b))
            else:
                local_c[j] = 0
            va = val[alive]
            sv[j] = np.sum(va)
            svq[j] = np.sum(va * va)
        samples = alive_flags = ends = None
        if collect_top:
            reach_t = out_tau >= top
            sj = out_s[-1]
            val = (t + sign * sj) if t_finite else (sign * sj)
            samples = val[reach_t]
            alive_flags = out_tau[reach_t] > top
            if want_end:
                ends = out_end[:, reach_t & (out_tau > top)]
        return alive_c, reach_c, exit_c, local_c, sv, svq, samples, alive_flags, ends

    parts = _run_chunks(chunk_fn, n_paths, workers)
    n_alive = np.sum([p[0] for p in parts], axis=0)
    n_reach = np.sum([p[1] for p in parts], axis=0)
    n_exit = np.sum([p[2] for p in parts], axis=0)
    n_local = np.sum([p[3] for p in parts], axis=0)
    sum_val = np.array([math.fsum(p[4][j] for p in parts) for j in range(n_sched)])
    sumsq_val = np.array([math.fsum(p[5][j] for p in parts) for j in range(n_sched)])
    if collect_top:
        samples_top = np.concatenate([p[6] for p in parts])
        alive_top = np.concatenate([p[7] for p in parts])
        end_top = np.concatenate([p[8] for p in parts], axis=1) if want_end else None
    else:
        samples_top = np.empty(0)
        alive_top = np.empty(0, dtype=bool)
        end_top = None
    return SnapshotStats(
        schedule=sched, n_paths=n_paths, t=t, sign=sign,
        n_alive=n_alive, n_reach=n_reach, n_exit=n_exit, n_local=n_local,
        sum_val=sum_val, sumsq_val=sumsq_val,
        samples_top=samples_top, alive_top=alive_top, end_top=end_top,
    )


def summary_ensemble(
    law: MatrixLaw,
    x: ProjectivePoint,
    n: int,
    n_paths: int,
    seed: int,
    *,
    workers: int = 1,
    stream_base: int = 0,
):
    """Unconditioned ensemble reduced per path to (min_{k<=n-1} S_k, S_n,
    end direction); the shared input of every multi-t estimator.  Returns
    (mins, sns, ends) with paths in stream order."""
    mats = law.support_array()
    thresholds = law.thresholds()
    shift = law.log_shift
    block = _block_for(law)
    x0 = x.vec
    d = law.dim

    def chunk_fn(start, count):
        out_min = np.empty(count)
        out_sn = np.empty(count)
        out_end = np.empty((d, count))
        if d == 2:
            _kernels.walk_summary_d2(
                np.uint64(seed), stream_base + start, count, mats, thresholds,
                shift, x0, n, block, out_min, out_sn, out_end,
            )
        else:
            _kernels.walk_summary_dgen(
                np.uint64(seed), stream_base + start, count, mats, thresholds,
                shift, x0, n, out_min, out_sn, out_end,
            )
        return out_min, out_sn, out_end

    parts = _run_chunks(chunk_fn, n_paths, workers)
    mins = np.concatenate([p[0] for p in parts])
    sns = np.concatenate([p[1] for p in parts])
    ends = np.concatenate([p[2] for p in parts], axis=1)
    return mins, sns, ends


# ---------------------------------------------------------------------------
# law moments (drift and diffusion constants, cached per law)

_MOMENT_CACHE: dict[str, tuple[float, float]] = {}
_MOMENT_SEED = 0x6D6F6D32


def law_moments(law: MatrixLaw, *, n: int = 512, n_paths: int = 200_000) -> tuple[float, float]:
    """(drift, variance-rate) of the cocycle sums for this law, Monte
    Carlo with a fixed internal seed, cached by law content.

    The drift is the two-point slope (E S_{2n} - E S_n)/n rather than
    E S_n/n: the mean carries an O(1) transient from the projective
    chain's relaxation, and the slope cancels it (bias falls from ~1/n
    to the mixing tail, well under the estimator's own stderr)."""
    key = law.content_hash()
    hit = _MOMENT_CACHE.get(key)
    if hit is not None:
        return hit
    stats = snapshot_stats(
        law, _e1(law.dim), math.inf, [n, 2 * n], n_paths, _MOMENT_SEED,
    )
    m1 = stats.sum_val[0] / n_paths
    m2 = stats.sum_val[1] / n_paths
    var = max(stats.sumsq_val[1] / n_paths - m2 * m2, 0.0)
    out = ((m2 - m1) / n, var / (2 * n))
    _MOMENT_CACHE[key] = out
    return out


def _e1(d: int) -> ProjectivePoint:
    v = np.zeros(d)
    v[0] = 1.0
    return ProjectivePoint(v)


def _require_centered(law: MatrixLaw):
    drift, _ = law_moments(law)
    if abs(drift) >= 1e-3:
        raise NotCentered(
            f"law has estimated drift {drift:.6f}; recenter it first "
            "(|drift| must be < 1e-3)"
        )


# ---------------------------------------------------------------------------
# scalar estimators


def estimate_V(
    law: MatrixLaw,
    x: ProjectivePoint,
    t: float,
    n: int,
    n_paths: int,
    s: SamplerState,
    *,
    sign: int = 1,
    strict: bool = True,
    check_centering: bool = True,
    workers: int = 1,
) -> EstimateWithCI:
    """Mean of (t + sign*S_n) over walks that survive n steps; the n-th
    stage of the harmonic function at (x, t)."""
    if check_centering:
        _require_centered(law)
    st = snapshot_stats(
        law, x, t, [n], n_paths, s.seed,
        sign=sign, strict=strict, workers=workers, stream_base=s.stream_id,
    )
    value, se = _mean_se_from_sums(st.sum_val[0], st.sumsq_val[0], n_paths)
    return EstimateWithCI(value, se, n_paths, s.seed,
                          meta={"estimator": "V", "n": n, "t": t, "sign": sign,
                                "n_survivors": int(st.n_alive[0])})


def estimate_persistence(
    law: MatrixLaw,
    x: ProjectivePoint,
    t: float,
    n: int,
    n_paths: int,
    s: SamplerState,
    *,
    sign: int = 1,
    strict: bool = True,
    workers: int = 1,
) -> EstimateWithCI:
    """P(tau_{x,t} > n)."""
    st = snapshot_stats(
        law, x, t, [n], n_paths, s.seed,
        sign=sign, strict=strict, workers=workers, stream_base=s.stream_id,
    )
    value, se = _bernoulli_se(int(st.n_alive[0]), n_paths)
    return EstimateWithCI(value, se, n_paths, s.seed,
                          meta={"estimator": "persistence", "n": n, "t": t, "sign": sign})


def estimate_local_prob(
    law: MatrixLaw,
    x: ProjectivePoint,
    t: float,
    a: float,
    b: float,
    n: int,
    n_paths: int,
    s: SamplerState,
    *,
    sign: int = 1,
    strict: bool = True,
    workers: int = 1,
) -> EstimateWithCI:
    """P(t + sign*S_n in [a, b], tau > n-1), plus the companion samples of
    t + sign*S_n conditioned on tau > n-1 (meta["conditioned_samples"])."""
    if not a < b:
        raise ValueError("need a < b")
    st = snapshot_stats(
        law, x, t, [n], n_paths, s.seed,
        sign=sign, strict=strict, interval=(a, b), collect_top=True,
        workers=workers, stream_base=s.stream_id,
    )
    value, se = _bernoulli_se(int(st.n_local[0]), n_paths)
    return EstimateWithCI(value, se, n_paths, s.seed,
                          meta={"estimator": "local_prob", "n": n, "t": t,
                                "a": a, "b": b, "sign": sign,
                                "conditioned_samples": st.samples_top,
                                "survivor_flags": st.alive_top})


def estimate_exit_local(
    law: MatrixLaw,
    x: ProjectivePoint,
    t: float,
    n: int,
    n_paths: int,
    s: SamplerState,
    *,
    sign: int = 1,
    strict: bool = True,
    workers: int = 1,
) -> EstimateWithCI:
    """P(tau_{x,t} = n)."""
    st = snapshot_stats(
        law, x, t, [n], n_paths, s.seed,
        sign=sign, strict=strict, workers=workers, stream_base=s.stream_id,
    )
    value, se = _bernoulli_se(int(st.n_exit[0]), n_paths)
    return EstimateWithCI(value, se, n_paths, s.seed,
                          meta={"estimator": "exit_local", "n": n, "t": t, "sign": sign})


def build_t_grid(support_max: float, upsilon_hat: float, n: int) -> np.ndarray:
    """Default quadrature grid for the harmonic-measure integral: covers
    [0, T_h + 10*upsilon*sqrt(n)] with step min(0.1, upsilon*sqrt(n)/200);
    the integrand decays like the conditioned Gaussian tail, so ten
    standard deviations of headroom make the truncation error invisible
    next to MC noise."""
    scale = upsilon_hat * math.sqrt(n)
    upper = max(support_max, 0.0) + 10.0 * scale
    step = min(0.1, scale / 200.0)
    m = int(math.ceil(upper / step)) + 1
    return np.linspace(0.0, m * step, m + 1)


def estimate_rho_integral(
    law: MatrixLaw,
    h: SeparableTarget,
    n: int,
    t_grid,
    n_paths: int,
    s: SamplerState,
    *,
    x: ProjectivePoint | None = None,
    strict: bool = True,
    workers: int = 1,
) -> EstimateWithCI:
    """Quadrature of t -> t * E[h(G_n x, t + S_n); tau_{x,t} > n-1] over
    t_grid (trapezoid), one path ensemble shared by every grid point.

    The inner expectation at t uses the same paths for all t: a path
    contributes iff t >= -min_{k<=n-1} S_k, and h's compact t-support
    makes each path hit only a narrow window of grid points.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or t_grid.size < 2 or not np.all(np.diff(t_grid) > 0):
        raise ValueError("t_grid must be strictly increasing with >= 2 points")
    if x is None:
        x = _e1(law.dim)
    prof = h.profile
    lo_p, hi_p = prof.support_min, prof.support_max
    diffs = np.diff(t_grid)
    wts = np.zeros_like(t_grid)
    wts[:-1] += diffs / 2.0
    wts[1:] += diffs / 2.0
    max_step = float(np.max(diffs))
    # widest per-path window of grid indices with a nonzero integrand
    span = int(math.ceil((hi_p - lo_p) / max_step)) + 2
    mats = law.support_array()
    thresholds = law.thresholds()
    block = _block_for(law)

    def chunk_fn(start, count):
        out_min = np.empty(count)
        out_sn = np.empty(count)
        out_end = np.empty((law.dim, count))
        if law.dim == 2:
            _kernels.walk_summary_d2(
                np.uint64(s.seed), s.stream_id + start, count, mats,
                thresholds, law.log_shift, x.vec, n, block,
                out_min, out_sn, out_end,
            )
        else:
            _kernels.walk_summary_dgen(
                np.uint64(s.seed), s.stream_id + start, count, mats,
                thresholds, law.log_shift, x.vec, n,
                out_min, out_sn, out_end,
            )
        ang = h.angular_values(out_end)
        # survival tau > n-1 at start value t means t >= -min_{k<=n-1} S_k
        # (strict tau; the weak variant differs on a zero-weight boundary set)
        tmin = np.maximum(-out_min, 0.0)
        lo = np.maximum(lo_p - out_sn, tmin)
        hi = hi_p - out_sn
        ia = np.searchsorted(t_grid, lo, side="left")
        per_path = np.zeros(count)
        g_sums = np.zeros(t_grid.size)
        for off in range(span):
            idx = ia + off
            ok = (idx < t_grid.size)
            idxc = np.where(ok, idx, 0)
            tv = t_grid[idxc]
            ok &= (tv <= hi) & (tv >= lo)
            if not np.any(ok):
                continue
            term = np.where(ok, ang * prof(tv + out_sn), 0.0)
            per_path += wts[idxc] * tv * term
            np.add.at(g_sums, idxc[ok], term[ok])
        return float(np.sum(per_path)), float(np.sum(per_path * per_path)), g_sums

    parts = _run_chunks(chunk_fn, n_paths, workers)
    total = math.fsum(p[0] for p in parts)
    total_sq = math.fsum(p[1] for p in parts)
    g = np.zeros(t_grid.size)
    for p in parts:
        g += p[2]
    integrand = t_grid * (g / n_paths)
    peak = float(np.max(np.abs(integrand))) if integrand.size else 0.0
    if abs(integrand[-1]) > 1e-3 * peak:
        raise GridTooShort(
            f"integrand at t_grid[-1]={t_grid[-1]:.3f} is "
            f"{integrand[-1]:.3e} > 1e-3 of peak {peak:.3e}"
        )
    value, se = _mean_se_from_sums(total, total_sq, n_paths)
    return EstimateWithCI(value, se, n_paths, s.seed,
                          meta={"estimator": "rho_integral", "n": n,
                                "t_grid_max": float(t_grid[-1]),
                                "integrand": integrand})


# ---------------------------------------------------------------------------
# exact enumeration oracle


@dataclass(frozen=True)
class EnumerationLeaves:
    """All length-n words with their probabilities and path statistics.
    min/max prefixes are over 1..n ("full") and 1..n-1 ("prev"); the
    n = 1 "prev" arrays are +/-inf (empty range)."""

    probs: np.ndarray
    s_n: np.ndarray
    min_full: np.ndarray
    max_full: np.ndarray
    min_prev: np.ndarray
    max_prev: np.ndarray
    ends: np.ndarray          # (M, d) unit rows
    t: float
    sign: int
    strict: bool

    def _survive(self, mins, maxs):
        # t + sign*S_k >= 0 for all k in range <=> t + m >= 0 where
        # m = min_k sign*S_k, i.e. min S (sign>0) or -max S (sign<0)
        m = mins if self.sign > 0 else -maxs
        ok = self.t + m
        return (ok >= 0.0) if self.strict else (ok > 0.0)

    def survive_full(self):
        return self._survive(self.min_full, self.max_full)

    def survive_prev(self):
        return self._survive(self.min_prev, self.max_prev)

    def val_n(self):
        return self.t + self.sign * self.s_n


def enumerate_exact(
    law: MatrixLaw,
    x: ProjectivePoint,
    t: float,
    n: int,
    functional,
    *,
    sign: int = 1,
    strict: bool = True,
) -> float:
    """Exact expectation of a path functional by summing over all
    |support|^n words with their product probabilities.  `functional`
    maps EnumerationLeaves to per-word values; see fn_* helpers."""
    m = law.n_atoms
    if m ** n > ENUM_CAP:
        raise TooLarge(f"{m}^{n} words exceed the {ENUM_CAP} cap")
    if n < 1:
        raise ValueError("n must be >= 1")
    d = law.dim
    mats = law.support_array() * math.exp(law.log_shift)
    X = x.vec[None, :].copy()
    S = np.zeros(1)
    probs = np.ones(1)
    mn = np.full(1, math.inf)
    mx = np.full(1, -math.inf)
    mn_prev = mn.copy()
    mx_prev = mx.copy()
    p_atoms = law.probs
    for k in range(1, n + 1):
        if k == n:
            mn_prev = mn.copy()
            mx_prev = mx.copy()
        M = X.shape[0]
        X2 = np.stack([X @ mats[i].T for i in range(m)], axis=1).reshape(M * m, d)
        nrm = np.linalg.norm(X2, axis=1)
        S = np.repeat(S, m) + np.log(nrm)
        X2 /= nrm[:, None]
        X = X2
        probs = np.repeat(probs, m) * np.tile(p_atoms, M)
        mn = np.minimum(np.repeat(mn, m), S)
        mx = np.maximum(np.repeat(mx, m), S)
    # the prev arrays were stashed before the final expansion; align them
    # with the leaves (a child's 1..n-1 prefix is its parent's 1..n-1)
    mn_prev = np.repeat(mn_prev, m)
    mx_prev = np.repeat(mx_prev, m)
    leaves = EnumerationLeaves(
        probs=probs, s_n=S, min_full=mn, max_full=mx,
        min_prev=mn_prev, max_prev=mx_prev, ends=X,
        t=t, sign=sign, strict=strict,
    )
    vals = np.asarray(functional(leaves), dtype=float)
    return math.fsum(probs * vals)


def fn_persistence(leaves: EnumerationLeaves):
    """Indicator of tau > n."""
    return leaves.survive_full().astype(float)


def fn_V(leaves: EnumerationLeaves):
    """(t + sign*S_n) * 1{tau > n}."""
    return leaves.val_n() * leaves.survive_full()


def fn_local_prob(a: float, b: float):
    """1{tau > n-1, t + sign*S_n in [a, b]}."""

    def fn(leaves: EnumerationLeaves):
        v = leaves.val_n()
        return (leaves.survive_prev() & (v >= a) & (v <= b)).astype(float)

    return fn


def fn_interval(a: float, b: float):
    """1{t + sign*S_n in [a, b]}, no barrier."""

    def fn(leaves: EnumerationLeaves):
        v = leaves.val_n()
        return ((v >= a) & (v <= b)).astype(float)

    return fn


def fn_exit_local(leaves: EnumerationLeaves):
    """Indicator of tau = n exactly."""
    v = leaves.val_n()
    exit_now = (v < 0.0) if leaves.strict else (v <= 0.0)
    return (leaves.survive_prev() & exit_now).astype(float)


def fn_rho_inner(h: SeparableTarget):
    """E[h(G_n x, t + S_n); tau > n-1] integrand for one t."""

    def fn(leaves: EnumerationLeaves):
        ang = h.angular_values(leaves.ends.T)
        return leaves.survive_prev() * ang * h.profile_values(leaves.val_n())

    return fn

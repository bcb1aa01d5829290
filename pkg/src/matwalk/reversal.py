"""Time reversal of the conditioned walk.

The forward quantity E[h(G_n x, t+S_n); tau_{x,t} > n-1], integrated
against psi(t) dt, equals an expectation for the walk read backwards:
the word acts in the opposite order, the norm cocycle is replaced by the
dual cocycle along inverse elements, and the positivity constraints levy
a perturbation built from the delta bracket against a dual line y.  The
reversed array

    S~^{x,m}_k = -sigma*(g_k^{-1}..g_1^{-1}, y)
                 + delta(g_{k+1}..g_m x, g_k^{-1}..g_1^{-1} y)
                 - delta(g_1..g_m x, y)

telescopes, through the cohomological equation, to the y-free form
-sigma(g_1..g_k, g_{k+1}..g_m x); both routes are implemented and their
agreement is one of the package's exact test surfaces.

Everything here that is Monte Carlo follows the walk engine's
conventions: counter-based draws, fixed chunking, order-independent
reductions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import DegeneratePath, NotInGeneralPosition, TooLarge
from .geometry import PAIRING_FLOOR, DualProjectivePoint, ProjectivePoint
from .laws import MatrixLaw
from .rng import SamplerState, derive_seed, index_from_raw, raw64
from .targets import SeparableTarget, StepFunction, angle_of
from .walks import SURVIVED, _run_chunks

__all__ = [
    "ReversedPath",
    "PerturbationTriple",
    "reversed_array",
    "reversed_array_via_cocycle",
    "boundary_sample",
    "dual_boundary_sample",
    "perturbed_exit_time",
    "ReversalResult",
    "reversal_check",
    "reversed_ensemble",
    "ENUM_CAP",
]

ENUM_CAP = 10_000_000
DEFAULT_BOUNDARY_DEPTH = 100


@dataclass(frozen=True)
class ReversedPath:
    """One reversed array over a fixed word, with its perturbation parts.

    values[k] = S~^{x,m}_k for 0 <= k <= m.  neg_sigma_star and
    delta_mid are the first two terms of the defining formula at each k;
    delta_base is the constant third term delta(g_1..g_m x, y).
    """

    x: ProjectivePoint
    y: DualProjectivePoint
    m: int
    values: np.ndarray
    neg_sigma_star: np.ndarray
    delta_mid: np.ndarray
    delta_base: float
    general_position_ok: bool


@dataclass(frozen=True)
class PerturbationTriple:
    neg_sigma_star: float
    delta_mid: float
    delta_base: float


def perturbation_triple(rp: ReversedPath, n: int) -> PerturbationTriple:
    """The three terms composing rp.values[n]."""
    if not rp.general_position_ok:
        raise DegeneratePath("reversed path lost general position")
    return PerturbationTriple(
        neg_sigma_star=float(rp.neg_sigma_star[n]),
        delta_mid=float(rp.delta_mid[n]),
        delta_base=rp.delta_base,
    )


def reversed_array(x: ProjectivePoint, y: DualProjectivePoint, gs) -> ReversedPath:
    """Build the reversed array for the word (g_1, ..., g_m) acting on
    (x, y), by the defining dual-cocycle formula.

    A pairing below the general-position floor marks the whole path
    not-ok (values are filled with nan from that index on) instead of
    raising: callers drop and count such paths.
    """
    gs = list(gs)
    m = len(gs)
    if m < 1:
        raise ValueError("need at least one group element")
    d = x.dim
    if y.dim != d or any(g.dim != d for g in gs):
        raise ValueError("dimension mismatch")
    # suffix lines xs[k] = g_{k+1} .. g_m x  (xs[m] = x)
    xs = np.empty((m + 1, d))
    xs[m] = x.vec
    for k in range(m, 0, -1):
        w = gs[k - 1].entries @ xs[k]
        xs[k - 1] = w / np.linalg.norm(w)
    values = np.full(m + 1, np.nan)
    nss = np.full(m + 1, np.nan)
    dmid = np.full(m + 1, np.nan)
    ok = True
    pair0 = abs(float(y.vec @ xs[0]))
    if pair0 <= PAIRING_FLOOR:
        ok = False
        delta_base = math.nan
    else:
        delta_base = -math.log(pair0)
        values[0] = 0.0
        nss[0] = 0.0
        dmid[0] = delta_base
        yv = y.vec.copy()
        sstar = 0.0
        for k in range(1, m + 1):
            w = gs[k - 1].entries.T @ yv
            nrm = float(np.linalg.norm(w))
            sstar += math.log(nrm)
            yv = w / nrm
            pair = abs(float(yv @ xs[k]))
            if pair <= PAIRING_FLOOR:
                ok = False
                break
            nss[k] = -sstar
            dmid[k] = -math.log(pair)
            values[k] = -sstar + dmid[k] - delta_base
    for a in (values, nss, dmid):
        a.setflags(write=False)
    return ReversedPath(x=x, y=y, m=m, values=values, neg_sigma_star=nss,
                        delta_mid=dmid, delta_base=delta_base,
                        general_position_ok=ok)


def reversed_array_via_cocycle(x: ProjectivePoint, gs) -> np.ndarray:
    """The same array through the cohomological collapse:
    S~^{x,m}_k = -sigma(g_1..g_k, g_{k+1}..g_m x), no dual line involved.
    Used as the independent cross-check of reversed_array."""
    gs = list(gs)
    m = len(gs)
    d = x.dim
    xs = np.empty((m + 1, d))
    xs[m] = x.vec
    for k in range(m, 0, -1):
        w = gs[k - 1].entries @ xs[k]
        xs[k - 1] = w / np.linalg.norm(w)
    out = np.zeros(m + 1)
    # sigma(g_1..g_k, xs[k]) accumulated left to right: apply g_k to xs[k],
    # then g_{k-1}, ...; increments occur in the order g_k first, so build
    # the sums by adding sigma(g_j, xs[j]) for j = 1..k
    acc = 0.0
    for j in range(1, m + 1):
        w = gs[j - 1].entries @ xs[j]
        acc += math.log(float(np.linalg.norm(w)))
        out[j] = -acc
    out.setflags(write=False)
    return out


def boundary_sample(law: MatrixLaw, s: SamplerState, depth: int,
                    x0: ProjectivePoint) -> ProjectivePoint:
    """g_1 g_2 ... g_p x0: a depth-p approximation of the boundary point.

    The word is applied deepest element first (g_p innermost), so
    extending the depth refines the same point; comparing depths p and
    2p on a shared stream diagnoses the approximation error.
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    thresholds = law.thresholds()
    idx = [
        index_from_raw(raw64(s.seed, s.stream_id, s.next_index()), thresholds)
        for _ in range(depth)
    ]
    v = x0.vec.copy()
    for k in range(depth - 1, -1, -1):
        w = law.support[idx[k]].entries @ v
        v = w / np.linalg.norm(w)
    return ProjectivePoint(v)


def dual_boundary_sample(law: MatrixLaw, s: SamplerState, depth: int,
                         y0: DualProjectivePoint) -> DualProjectivePoint:
    """Boundary point of the inverse law acting on the dual space:
    g_1^{-1} ... g_p^{-1} y0 with g_i drawn from the law (the dual action
    of g^{-1} is multiplication by g^T in coordinates)."""
    if depth < 1:
        raise ValueError("depth must be >= 1")
    thresholds = law.thresholds()
    idx = [
        index_from_raw(raw64(s.seed, s.stream_id, s.next_index()), thresholds)
        for _ in range(depth)
    ]
    v = y0.vec.copy()
    for k in range(depth - 1, -1, -1):
        w = law.support[idx[k]].entries.T @ v
        v = w / np.linalg.norm(w)
    return DualProjectivePoint(v)


def perturbed_exit_time(rp: ReversedPath, t: float):
    """Smallest k <= m-1 with t + S~_k < 0, else SURVIVED."""
    if not rp.general_position_ok:
        raise DegeneratePath("reversed path lost general position")
    vals = t + rp.values[1:rp.m]
    hits = np.nonzero(vals < 0.0)[0]
    if hits.size == 0:
        return SURVIVED
    return int(hits[0]) + 1


# ---------------------------------------------------------------------------
# the reversal identity, both displays


@dataclass(frozen=True)
class ReversalResult:
    """Both sides of one reversal identity; iterates as (lhs, rhs, gap)."""

    lhs: float
    rhs: float
    gap: float
    mode: str
    variant: str
    n: int
    n_words: int
    n_dropped: int = 0
    se_lhs: float = 0.0
    se_rhs: float = 0.0
    meta: dict = field(default_factory=dict)

    def __iter__(self):
        return iter((self.lhs, self.rhs, self.gap))


def _angular_factor(target: SeparableTarget | None, vec: np.ndarray) -> float:
    if target is None or target.angular is None:
        return 1.0
    return float(target.angular(float(angle_of(vec))))


def _word_sides(mats, word, xvec, yvec, prof, psi, ang, variant):
    """(lhs_w, rhs_w) for one word; mats are the shifted atom matrices.

    lhs walks the word in the order g_1 first (S_k = sigma(g_k..g_1, x),
    end point g_n..g_1 x); rhs reads the same word through the reversed
    array (end point g_1..g_n x).  Raises NotInGeneralPosition on a
    degenerate pairing.
    """
    n = len(word)
    d = xvec.size
    # forward side
    z = xvec
    s_val = 0.0
    min_prev = math.inf
    min_full = math.inf
    for j, i in enumerate(word):
        w = mats[i] @ z
        nrm = float(np.linalg.norm(w))
        s_val += math.log(nrm)
        z = w / nrm
        if j < n - 1:
            min_prev = min(min_prev, s_val)
        min_full = min(min_full, s_val)
    lo = -min_prev if variant == "tau_gt_n_minus_1" else -min_full
    lhs_w = _angular_factor(ang, z) * prof.product_integral(
        psi, self_shift=s_val, lo=lo
    )
    # reversed side: suffix lines then the dual chain
    xs = np.empty((n + 1, d))
    xs[n] = xvec
    for k in range(n, 0, -1):
        w = mats[word[k - 1]] @ xs[k]
        xs[k - 1] = w / np.linalg.norm(w)
    pair0 = abs(float(yvec @ xs[0]))
    if pair0 <= PAIRING_FLOOR:
        raise NotInGeneralPosition("degenerate pairing at the word base")
    delta_base = -math.log(pair0)
    yv = yvec
    sstar = 0.0
    min_tilde = math.inf
    stilde = 0.0
    for k in range(1, n + 1):
        w = mats[word[k - 1]].T @ yv
        nrm = float(np.linalg.norm(w))
        sstar += math.log(nrm)
        yv = w / nrm
        pair = abs(float(yv @ xs[k]))
        if pair <= PAIRING_FLOOR:
            raise NotInGeneralPosition(f"degenerate pairing at step {k}")
        stilde = -sstar - math.log(pair) - delta_base
        if k <= n - 1:
            min_tilde = min(min_tilde, stilde)
    lo_r = -min_tilde
    if variant == "tau_gt_n":
        lo_r = max(lo_r, 0.0)
    rhs_w = _angular_factor(ang, xs[0]) * prof.product_integral(
        psi, other_shift=stilde, lo=lo_r
    )
    return lhs_w, rhs_w


def reversal_check(
    law: MatrixLaw,
    x: ProjectivePoint,
    y: DualProjectivePoint,
    h: StepFunction | SeparableTarget,
    psi: StepFunction,
    n: int,
    mode: str = "enumerate",
    *,
    variant: str = "tau_gt_n_minus_1",
    s: SamplerState | None = None,
    n_words: int = 20_000,
) -> ReversalResult:
    """Both sides of the reversal identity at horizon n.

    variant "tau_gt_n_minus_1": lhs conditions on tau > n-1 and the
    reversed side integrates t over all of R.  variant "tau_gt_n": lhs
    conditions on tau > n and the reversed side integrates over t >= 0.
    h may carry an angular factor (SeparableTarget with a StepFunction
    profile); it is evaluated at g_n..g_1 x on the forward side and at
    g_1..g_n x on the reversed side.  In enumerate mode both sides are
    exact sums over |support|^n words with exact piecewise t-integrals
    per word, so the gap is pure floating-point noise.  In mc mode both
    sides are sample means over the same sampled words (shared draws),
    and the gap carries the quoted standard errors.
    """
    if variant not in ("tau_gt_n_minus_1", "tau_gt_n"):
        raise ValueError(f"unknown variant {variant!r}")
    if n < 1:
        raise ValueError("n must be >= 1")
    if isinstance(h, SeparableTarget):
        prof, ang = h.profile, h
        if not isinstance(prof, StepFunction):
            raise ValueError("exact reversal checks need a StepFunction profile")
        if ang.angular is not None and law.dim != 2:
            raise ValueError("angular factors are implemented for 2-d laws")
    else:
        prof, ang = h, None
    m = law.n_atoms
    es = math.exp(law.log_shift)
    mats = [es * a for a in law.support_array()]
    if mode == "enumerate":
        if m ** n > ENUM_CAP:
            raise TooLarge(f"{m}^{n} words exceed the {ENUM_CAP} cap")
        lhs_terms = []
        rhs_terms = []
        word = [0] * n
        total = m ** n
        for widx in range(total):
            v = widx
            for j in range(n - 1, -1, -1):
                word[j] = v % m
                v //= m
            p_w = math.prod(law.probs[i] for i in word)
            lhs_w, rhs_w = _word_sides(mats, word, x.vec, y.vec, prof, psi,
                                       ang, variant)
            lhs_terms.append(p_w * lhs_w)
            rhs_terms.append(p_w * rhs_w)
        lhs = math.fsum(lhs_terms)
        rhs = math.fsum(rhs_terms)
        return ReversalResult(lhs=lhs, rhs=rhs, gap=abs(lhs - rhs),
                              mode=mode, variant=variant, n=n, n_words=total)
    if mode != "mc":
        raise ValueError(f"unknown mode {mode!r}")
    if s is None:
        s = SamplerState(seed=0)
    lhs_terms = []
    rhs_terms = []
    dropped = 0
    thresholds = law.thresholds()
    for w_i in range(n_words):
        u = raw64(s.seed, s.stream_id + w_i, np.arange(n))
        word = [index_from_raw(uu, thresholds) for uu in u]
        try:
            lhs_w, rhs_w = _word_sides(mats, word, x.vec, y.vec, prof, psi,
                                       ang, variant)
        except NotInGeneralPosition:
            dropped += 1
            continue
        lhs_terms.append(lhs_w)
        rhs_terms.append(rhs_w)
    kept = len(lhs_terms)
    if kept == 0:
        raise NotInGeneralPosition("every sampled word was degenerate")
    if dropped > max(1e-6 * n_words, 0.0):
        raise NotInGeneralPosition(
            f"{dropped}/{n_words} degenerate words exceeds the 1e-6 budget"
        )
    la = np.asarray(lhs_terms)
    ra = np.asarray(rhs_terms)
    lhs = math.fsum(lhs_terms) / kept
    rhs = math.fsum(rhs_terms) / kept
    return ReversalResult(
        lhs=lhs, rhs=rhs, gap=abs(lhs - rhs), mode=mode, variant=variant,
        n=n, n_words=kept, n_dropped=dropped,
        se_lhs=float(np.std(la) / math.sqrt(kept)),
        se_rhs=float(np.std(ra) / math.sqrt(kept)),
    )


# ---------------------------------------------------------------------------
# reversed-walk ensembles (appendix-scale studies)


def reversed_ensemble(
    law: MatrixLaw,
    t: float,
    n: int,
    n_paths: int,
    seed: int,
    *,
    depth: int = DEFAULT_BOUNDARY_DEPTH,
    workers: int = 1,
) -> tuple[int, int, np.ndarray]:
    """Per-path reversed-walk survival at horizon n with boundary starts:
    x from the forward boundary walk, y from the dual (inverse-law)
    boundary walk, fresh per path.  Returns (n_kept, n_survived,
    samples of t + S~_n over survivors).  Paths that lose general
    position are dropped; a drop rate above 1e-6 aborts."""
    if law.dim != 2:
        raise TooLarge("reversed ensembles are implemented for 2-d laws")
    mats = law.support_array()
    thresholds = law.thresholds()
    shift = law.log_shift
    seed_x = derive_seed(seed, "reversed-start-x")
    seed_y = derive_seed(seed, "reversed-start-y")

    def chunk_fn(start, count):
        xs_buf = np.empty((n + 1, 2))
        out_ok = np.empty(count, dtype=np.bool_)
        out_surv = np.empty(count, dtype=np.bool_)
        out_send = np.empty(count)
        _kernels.reversed_walk_d2(
            np.uint64(seed), np.uint64(seed_x), np.uint64(seed_y),
            start, count, mats, thresholds, shift, depth, n, t,
            PAIRING_FLOOR, xs_buf, out_ok, out_surv, out_send,
        )
        surv = out_surv & out_ok
        return (
            int(np.count_nonzero(out_ok)),
            int(np.count_nonzero(surv)),
            out_send[surv],
        )

    parts = _run_chunks(chunk_fn, n_paths, workers)
    n_kept = sum(p[0] for p in parts)
    n_surv = sum(p[1] for p in parts)
    samples = np.concatenate([p[2] for p in parts])
    n_dropped = n_paths - n_kept
    if n_dropped > max(1e-6 * n_paths, 0.0):
        raise NotInGeneralPosition(
            f"{n_dropped}/{n_paths} reversed paths lost general position"
        )
    return n_kept, n_surv, samples

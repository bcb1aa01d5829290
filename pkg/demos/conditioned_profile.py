"""Endpoint law and local profile of the conditioned walk.

Survivor endpoints scaled by upsilon sqrt(n) must look Rayleigh, and
the n-scaled expectation of a localized target swept across offsets
u = m * upsilon sqrt(n) must trace the Rayleigh density itself.  Sizes
here are a tenth of the acceptance run; roughly ten seconds.
"""

import math

import numpy as np

from matwalk import (
    HatFunction,
    ProjectivePoint,
    SamplerState,
    SeparableTarget,
    canonical_law,
    estimate_V,
    law_moments,
    parse_step_spec,
    recenter,
    snapshot_stats,
)

LAM = 0.3362986

law = recenter(canonical_law(), LAM)
x = ProjectivePoint(np.array([1.0, 0.0]))
t, n, n_paths = 1.0, 1024, 4_000_000

ups2 = law_moments(law)[1]
ups = math.sqrt(ups2)

st = snapshot_stats(law, x, t, [n], n_paths, seed=31, collect_top=True,
                    want_end=True)
vals = st.samples_top[st.alive_top]
print(f"{vals.size} survivors of {n_paths} paths at n = {n}")

# sup distance of (t + S_n)/(ups sqrt n) to the Rayleigh CDF
z = np.sort(vals) / (ups * math.sqrt(n))
cdf = 1.0 - np.exp(-0.5 * z * z)
i = np.arange(1, z.size + 1)
kdist = max(float(np.max(cdf - (i - 1) / z.size)),
            float(np.max(i / z.size - cdf)))
print(f"sup-distance of scaled endpoints to Rayleigh: {kdist:.4f}")

# localized target: unit profile on [0,1), angular bump around 1.2
h = SeparableTarget(profile=parse_step_spec("0:1:1"),
                    angular=HatFunction.bump(1.2, 1.0))
angv = h.angular_values(st.end_top)

v = estimate_V(law, x, t, n // 4, 1_000_000, SamplerState(32))
print(f"\nV(x, {t}) = {v.value:.4f};  n * E[h; tau > n] across offsets:")
print("   u/(ups sqrt n)   measured   Rayleigh reference")
for mult in (0.0, 0.5, 1.0, 1.5, 2.0, 3.0):
    u = mult * ups * math.sqrt(n)
    c = angv * h.profile_values(vals - u)
    emp = n * float(np.sum(c)) / n_paths
    # reference: 2V/(ups^2 sqrt(2 pi)) * s exp(-s^2/2) * (target mass)
    # with the boundary-weight factor folded into a single fitted scale
    ray = mult * math.exp(-0.5 * mult * mult)
    print(f"   {mult:10.1f}    {emp:9.5f}   {ray:9.5f} * const")

"""First contact: one law, a few paths, and the persistence prefactor.

Simulates the norm cocycle walk started at the first coordinate axis,
prints a handful of killed paths, then checks that sqrt(n) * P(tau > n)
stabilizes near 2 V(x,t) / (sqrt(2 pi) upsilon).  With the sizes below
this runs in about fifteen seconds on one core.
"""

import math

import numpy as np

from matwalk import (
    ProjectivePoint,
    SamplerState,
    canonical_law,
    estimate_V,
    estimate_persistence,
    first_exit_time,
    law_moments,
    recenter,
    simulate_path,
    snapshot_stats,
)

# measured drift of the four-letter integer law; see demos/spectral_recentering.py
# for where this number comes from
LAM = 0.3362986

law = recenter(canonical_law(), LAM)
x = ProjectivePoint(np.array([1.0, 0.0]))
t = 1.0

print(f"law: {law.n_atoms} atoms, dim {law.dim}, log-shift {law.log_shift:+.6f}")
drift, ups2 = law_moments(law)
print(f"moments: drift {drift:+.2e}, variance rate {ups2:.6f}\n")

print("five paths, horizon 40 (showing t + S_k):")
for seed in range(5):
    path = simulate_path(law, x, 40, SamplerState(seed))
    tau = first_exit_time(path, t)
    shown = ", ".join(f"{t + v:+.2f}" for v in path.prefix_sums[1:8])
    print(f"  seed {seed}: [{shown}, ...]  "
          + (f"killed at step {tau}" if tau else "alive at 40"))

# sqrt(n) P(tau > n) along a dyadic schedule, one ensemble
sched = [256, 512, 1024, 2048]
st = snapshot_stats(law, x, t, sched, 400_000, seed=7)
print(f"\nsqrt(n) * P(tau > n) at t = {t}:")
for j, n in enumerate(sched):
    p = st.n_alive[j] / 400_000
    print(f"  n = {n:5d}: {math.sqrt(n) * p:.4f}")

v = estimate_V(law, x, t, 512, 400_000, SamplerState(11))
pref = 2.0 * v.value / (math.sqrt(2.0 * math.pi) * math.sqrt(ups2))
print(f"\nV(x, {t}) = {v.value:.4f} +- {v.stderr:.4f}")
print(f"prefactor 2V / (sqrt(2 pi) upsilon) = {pref:.4f}")

p = estimate_persistence(law, x, t, 2048, 400_000, SamplerState(12))
print(f"direct sqrt(2048) * P(tau > 2048)   = {math.sqrt(2048) * p.value:.4f}"
      f" +- {math.sqrt(2048) * p.stderr:.4f}")

"""The verification harness end to end, at smoke sizes.

Builds a config, runs every check, prints the report table, and shows
that the CSV is byte-identical when the same run is sliced across
different worker counts.  The acceptance suite runs the same harness at
full sizes; this version takes a few seconds.
"""

import tempfile
from dataclasses import replace

from matwalk import ExperimentConfig, run_suite

cfg = ExperimentConfig(
    schedule=(8, 16, 32),
    paths_per_n=40_000,
    llt_paths=40_000,
    clt_n=128,
    clt_paths=60_000,
    caravenna_n=64,
    caravenna_paths=60_000,
    rho_n=16,
    rho_paths=40_000,
    vref_paths=40_000,
    grid_n=64,
    seed=20240801,
)

rep = run_suite(cfg)
print(f"stamp: law {rep.stamp['law_hash_input'][:12]}..., "
      f"drift residual {rep.stamp['drift_residual']:+.2e}, "
      f"seed {rep.stamp['seed']}")
print(f"{'check':18s} {'row':34s} {'n':>6s} {'value':>12s} {'ref':>12s} pass")
for r in rep.rows:
    n = "" if r.n is None else str(r.n)
    print(f"{r.check:18s} {r.name:34s} {n:>6s} {r.empirical:12.5g} "
          f"{r.reference:12.5g} {str(r.passed).lower()}")
print(f"\nexit code: {rep.exit_code()} "
      "(smoke sizes; some asymptotic rows legitimately fail this small)")

with tempfile.TemporaryDirectory() as d:
    csv_path, json_path = rep.write(d)
    print(f"wrote {csv_path} and {json_path}")

# chunked reductions make the report a pure function of (config, seed)
texts = {w: run_suite(replace(cfg, workers=w)).to_csv_text() for w in (1, 4)}
print(f"worker counts 1 vs 4 byte-identical: {texts[1] == texts[4]}")

"""Counter-based splittable random streams.

Every random draw in this package is a pure function of a triple
(seed, stream_id, draw_index).  There is no mutable generator state to
share between workers: a path owns the stream whose id equals its path
index, and replaying any (seed, stream, index) triple reproduces the
draw bit for bit no matter how work was scheduled.

The construction is the splitmix64 output function: a per-stream key is
derived by two finalizer rounds from (seed, stream_id), and draw k reads
finalize(key + (k+1) * GOLDEN).  The finalizer is the standard
xor-shift/multiply avalanche; the sequence it generates passes the usual
statistical batteries and is cheap enough to inline in compiled kernels.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)

# uint64 arithmetic wraps mod 2^64 by design; numpy's overflow warning is
# noise here, so every wrapping block runs under a fresh errstate


def mix64(z: np.uint64) -> np.uint64:
    """splitmix64 finalizer; accepts scalars or uint64 arrays."""
    z = np.uint64(z) if np.isscalar(z) else z
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * _M1
        z = (z ^ (z >> np.uint64(27))) * _M2
        return z ^ (z >> np.uint64(31))


def stream_key(seed: int, stream_id: int) -> np.uint64:
    """Per-stream key: decorrelates streams before the counter is mixed in."""
    with np.errstate(over="ignore"):
        return mix64(np.uint64(seed & 0xFFFFFFFFFFFFFFFF) ^ mix64(np.uint64(stream_id & 0xFFFFFFFFFFFFFFFF)))


def raw64(seed: int, stream_id: int, index) -> np.uint64:
    """The uint64 draw at (seed, stream_id, index); index may be an array."""
    key = stream_key(seed, stream_id)
    with np.errstate(over="ignore"):
        idx = np.asarray(index, dtype=np.uint64) + np.uint64(1)
        return mix64(key + idx * GOLDEN)


def uniform01(seed: int, stream_id: int, index) -> np.ndarray:
    """Uniform double in [0,1) built from the top 53 bits of the draw."""
    u = raw64(seed, stream_id, index)
    return (u >> np.uint64(11)) * (1.0 / 9007199254740992.0)


def derive_seed(seed: int, tag: str) -> int:
    """Independent seed for a named sub-purpose (boundary draws, starts, ...).

    Tagging the seed rather than the stream keeps the stream space free
    for path indices.
    """
    h = np.uint64(seed & 0xFFFFFFFFFFFFFFFF)
    for ch in tag:
        with np.errstate(over="ignore"):
            h = mix64(h ^ np.uint64(ord(ch)))
    return int(h)


@dataclass
class SamplerState:
    """Position in one stream: (seed, stream_id) plus a running draw index.

    Mutable on purpose; a state object belongs to exactly one worker.
    The draw at a given index never depends on how many draws preceded it.
    """

    seed: int
    stream_id: int = 0
    draw_index: int = field(default=0)

    def next_index(self) -> int:
        k = self.draw_index
        self.draw_index = k + 1
        return k

    def uniform(self) -> float:
        return float(uniform01(self.seed, self.stream_id, self.next_index()))

    def split(self, stream_id: int) -> "SamplerState":
        """Fresh state on another stream of the same seed."""
        return SamplerState(self.seed, stream_id)


def prob_thresholds(probs) -> np.ndarray:
    """Interior cumulative probabilities as uint64 thresholds.

    For m atoms this returns the m-1 cut points floor(cum_i * 2^64); the
    sampled index is the number of cut points at or below the raw draw.
    Inverse-CDF sampling on the uint64 lattice keeps compiled kernels and
    Python-level sampling bit-identical (quantization error <= 2^-64).
    """
    p = np.asarray(probs, dtype=np.float64)
    cum = np.cumsum(p)
    if abs(cum[-1] - 1.0) > 1e-12:
        raise ValueError("probabilities do not sum to 1")
    scaled = np.floor(cum[:-1] * float(2**64))
    return np.minimum(scaled, float(2**64 - 1)).astype(np.uint64)


def index_from_raw(u, thresholds: np.ndarray) -> int:
    """Number of thresholds <= u: the inverse-CDF atom index."""
    return int(np.count_nonzero(np.uint64(u) >= thresholds))

"""Test functions on the line and on the projective circle.

Two families cover every estimator in the package: step functions
(exact products and integrals, used where identities must hold to
1e-9) and piecewise-linear hats (continuous compactly supported
targets, required by the harmonic-measure and local-limit estimators).
Both evaluate to 0 outside their support.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "StepFunction",
    "HatFunction",
    "SeparableTarget",
    "angle_of",
    "parse_step_spec",
]


def angle_of(vec: np.ndarray) -> np.ndarray:
    """Angle in [0, pi) of a projective line in the plane, from any
    representative vector.  Vectorized over the last-but-one axis being
    the coordinate axis of shape (2, ...)."""
    a = np.arctan2(vec[1], vec[0])
    return np.mod(a, math.pi)


@dataclass(frozen=True)
class StepFunction:
    """Right-open step function sum_j vals[j] * 1_[knots[j], knots[j+1]).

    Stored on the union cover of the given pieces; cells not covered by
    any piece carry value 0, and the function is 0 outside
    [knots[0], knots[-1]).
    """

    knots: np.ndarray
    vals: np.ndarray

    def __init__(self, pieces):
        pieces = [(float(a), float(b), float(v)) for a, b, v in pieces]
        for a, b, _ in pieces:
            if not (math.isfinite(a) and math.isfinite(b) and a < b):
                raise ValueError(f"bad step piece [{a}, {b})")
        pieces.sort()
        for (_, b0, _), (a1, _, _) in zip(pieces, pieces[1:]):
            if a1 < b0:
                raise ValueError("overlapping step pieces")
        ends = sorted({e for a, b, _ in pieces for e in (a, b)})
        if not ends:
            ends = [0.0, 1.0]
        knots = np.asarray(ends, dtype=float)
        vals = np.zeros(len(knots) - 1)
        for a, b, v in pieces:
            i = int(np.searchsorted(knots, a))
            while knots[i] < b:
                vals[i] += v
                i += 1
        knots.setflags(write=False)
        vals.setflags(write=False)
        object.__setattr__(self, "knots", knots)
        object.__setattr__(self, "vals", vals)

    @classmethod
    def indicator(cls, a: float, b: float, v: float = 1.0) -> "StepFunction":
        return cls([(a, b, v)])

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        idx = np.searchsorted(self.knots, t, side="right") - 1
        inside = (idx >= 0) & (idx < len(self.vals))
        out = np.zeros(t.shape)
        out[inside] = self.vals[idx[inside]]
        return out if out.ndim else float(out)

    def integral(self) -> float:
        return float(np.dot(self.vals, np.diff(self.knots)))

    @property
    def support_max(self) -> float:
        nz = np.nonzero(self.vals)[0]
        return float(self.knots[nz[-1] + 1]) if nz.size else 0.0

    @property
    def support_min(self) -> float:
        nz = np.nonzero(self.vals)[0]
        return float(self.knots[nz[0]]) if nz.size else 0.0

    def product_integral(
        self,
        other: "StepFunction",
        self_shift: float = 0.0,
        other_shift: float = 0.0,
        lo: float = -math.inf,
    ) -> float:
        """Exact integral over t >= lo of self(t + self_shift) *
        other(t + other_shift).

        The integrand is again a step function; its cells are cut by the
        shifted knots of both factors, so the sum below is exact up to
        float rounding.
        """
        k = np.concatenate([self.knots - self_shift, other.knots - other_shift])
        k = np.unique(k)
        if math.isfinite(lo):
            k = k[k > lo]
            k = np.concatenate([[lo], k])
        if len(k) < 2:
            return 0.0
        mid = 0.5 * (k[:-1] + k[1:])
        prod = self(mid + self_shift) * other(mid + other_shift)
        return float(np.dot(prod, np.diff(k)))

    def restricted_integral(self, lo: float) -> float:
        """Integral over t >= lo."""
        one = StepFunction.indicator(self.knots[0] - 1.0, self.knots[-1] + 1.0)
        return self.product_integral(one, lo=lo)


@dataclass(frozen=True)
class HatFunction:
    """Continuous piecewise-linear function, 0 outside [nodes[0], nodes[-1]].

    End values must vanish so that the extension by zero is continuous.
    """

    nodes: np.ndarray
    values: np.ndarray

    def __init__(self, nodes, values):
        nodes = np.asarray(nodes, dtype=float)
        values = np.asarray(values, dtype=float)
        if nodes.ndim != 1 or nodes.shape != values.shape or len(nodes) < 2:
            raise ValueError("nodes/values must be equal-length 1-d arrays")
        if not np.all(np.diff(nodes) > 0):
            raise ValueError("nodes must be strictly increasing")
        if values[0] != 0.0 or values[-1] != 0.0:
            raise ValueError("end values must be 0 for a continuous extension")
        if not (np.all(np.isfinite(nodes)) and np.all(np.isfinite(values))):
            raise ValueError("nodes/values must be finite")
        nodes.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "values", values)

    @classmethod
    def bump(cls, center: float, halfwidth: float, height: float = 1.0) -> "HatFunction":
        """Triangle of the given height supported on [c - w, c + w]."""
        return cls(
            [center - halfwidth, center, center + halfwidth],
            [0.0, height, 0.0],
        )

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = np.interp(t, self.nodes, self.values, left=0.0, right=0.0)
        return out if out.ndim else float(out)

    def integral(self) -> float:
        return float(np.trapezoid(self.values, self.nodes))

    @property
    def support_max(self) -> float:
        return float(self.nodes[-1])

    @property
    def support_min(self) -> float:
        return float(self.nodes[0])


@dataclass(frozen=True)
class SeparableTarget:
    """Product target h(x, t) = angular(theta(x)) * profile(t) on the
    projective line times the real line.  angular=None means the
    constant 1 (profile-only target)."""

    profile: HatFunction | StepFunction
    angular: HatFunction | None = None

    def angular_values(self, end_vecs: np.ndarray) -> np.ndarray:
        """Evaluate the angular factor on unit direction columns (2, N)."""
        if self.angular is None:
            return np.ones(end_vecs.shape[-1])
        return self.angular(angle_of(end_vecs))

    def profile_values(self, t):
        return self.profile(t)


def parse_step_spec(spec: str) -> StepFunction:
    """Parse "a1:b1:v1,a2:b2:v2,..." into a step function."""
    pieces = []
    for item in spec.split(","):
        item = item.strip()
        if not item:
            continue
        parts = item.split(":")
        if len(parts) != 3:
            raise ValueError(f"bad step spec item {item!r}, want a:b:v")
        try:
            a, b, v = (float(p) for p in parts)
        except ValueError as exc:
            raise ValueError(f"bad number in step spec item {item!r}") from exc
        pieces.append((a, b, v))
    if not pieces:
        raise ValueError("empty step spec")
    return StepFunction(pieces)

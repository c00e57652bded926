"""Feasible-set descriptions with exact Euclidean projection.

Every set is nonempty, closed and convex by construction.  ``project`` is
the nearest-point map; ``min_norm_point`` projects the origin, which is the
starting-point convention of the relative-accuracy solvers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import DimensionMismatchError, Vector, frozen_vector

#: Inner-loop limits for projections without a closed form.
INTERSECTION_MAX_ITER = 10_000
INTERSECTION_TOL = 1e-12


class ProjectionIterationError(RuntimeError):
    """Intersection projection failed to settle within the iteration cap.

    The last inner iterate is attached as ``last_iterate``.
    """

    def __init__(self, message, last_iterate=None):
        super().__init__(message)
        self.last_iterate = last_iterate


class SetSpec:
    """Base class: a closed convex subset of R^n with a projection."""

    dimension: int

    def project(self, x: Vector) -> Vector:
        raise NotImplementedError

    def _check(self, x) -> Vector:
        arr = np.asarray(x, dtype=float)
        if arr.shape != (self.dimension,):
            raise DimensionMismatchError(
                f"point of shape {arr.shape} vs set dimension {self.dimension}")
        return arr


@dataclass(frozen=True)
class WholeSpace(SetSpec):
    dimension: int

    def project(self, x):
        return self._check(x)


@dataclass(frozen=True)
class Ball(SetSpec):
    center: Vector
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", frozen_vector(self.center))
        if self.radius <= 0:
            raise ValueError("ball radius must be positive")

    @property
    def dimension(self):
        return self.center.size

    def project(self, x):
        x = self._check(x)
        d = x - self.center
        dist = float(np.linalg.norm(d))
        if dist <= self.radius:
            return x
        return self.center + (self.radius / dist) * d


@dataclass(frozen=True)
class Box(SetSpec):
    lower: Vector
    upper: Vector

    def __post_init__(self):
        lower = frozen_vector(self.lower)
        upper = frozen_vector(self.upper, lower.size)
        if np.any(lower > upper):
            raise ValueError("box requires lower <= upper coordinatewise")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @property
    def dimension(self):
        return self.lower.size

    def project(self, x):
        return np.clip(self._check(x), self.lower, self.upper)


@dataclass(frozen=True)
class Halfspace(SetSpec):
    """{x : <normal, x> >= offset}."""

    normal: Vector
    offset: float

    def __post_init__(self):
        normal = frozen_vector(self.normal)
        if not np.any(normal != 0):
            raise ValueError("halfspace normal must be nonzero")
        object.__setattr__(self, "normal", normal)

    @property
    def dimension(self):
        return self.normal.size

    def project(self, x):
        x = self._check(x)
        violation = self.offset - float(np.dot(self.normal, x))
        if violation <= 0:
            return x
        return x + (violation / float(np.dot(self.normal, self.normal))) * self.normal


@dataclass(frozen=True)
class Intersection(SetSpec):
    """Intersection of two sets, projected with Dykstra's alternating scheme.

    Closed forms are used whenever one factor's projection already lands in
    the other factor.  Plain alternation only finds *a* feasible point, so
    the Dykstra correction is required for the nearest one.
    """

    first: SetSpec
    second: SetSpec

    def __post_init__(self):
        if self.first.dimension != self.second.dimension:
            raise DimensionMismatchError("intersection factors disagree in dimension")
        if isinstance(self.first, Ball) and isinstance(self.second, Box):
            gap = np.linalg.norm(self.first.center - self.second.project(self.first.center))
            if gap > self.first.radius:
                raise ValueError("empty intersection: ball does not reach the box")

    @property
    def dimension(self):
        return self.first.dimension

    def project(self, x):
        x = self._check(x)
        p = self.first.project(x)
        if distance(self.second, p) <= INTERSECTION_TOL:
            return p
        q = self.second.project(x)
        if distance(self.first, q) <= INTERSECTION_TOL:
            return q

        # Dykstra: alternate projections with increment corrections.
        u = x.copy()
        inc_first = np.zeros_like(x)
        inc_second = np.zeros_like(x)
        prev = None
        for _ in range(INTERSECTION_MAX_ITER):
            y = self.first.project(u + inc_first)
            inc_first = u + inc_first - y
            u = self.second.project(y + inc_second)
            inc_second = y + inc_second - u
            if prev is not None and np.linalg.norm(u - prev) <= INTERSECTION_TOL:
                return u
            prev = u.copy()
        raise ProjectionIterationError(
            f"intersection projection did not settle in {INTERSECTION_MAX_ITER} iterations",
            last_iterate=u)


def project(spec: SetSpec, x: Vector) -> Vector:
    """Nearest point of the set (functional form of ``spec.project``)."""
    return spec.project(x)


def min_norm_point(spec: SetSpec) -> Vector:
    """The feasible point of smallest Euclidean norm."""
    return spec.project(np.zeros(spec.dimension))


def distance(spec: SetSpec, x: Vector) -> float:
    """Euclidean distance from ``x`` to the set."""
    x = np.asarray(x, dtype=float)
    return float(np.linalg.norm(x - spec.project(x)))


def contains(spec: SetSpec, x: Vector, tol: float = 0.0) -> bool:
    """True iff ``x`` is within ``tol`` of the set."""
    return distance(spec, x) <= tol


def localize(spec: SetSpec, anchor: Vector, radius: float) -> SetSpec:
    """Restrict a feasible set to a ball around ``anchor``.

    Used when declared growth constants bound the distance from any
    feasible point to the solution set; ``anchor`` must be feasible so the
    result is nonempty.
    """
    ball = Ball(center=np.asarray(anchor, dtype=float), radius=float(radius))
    if isinstance(spec, WholeSpace):
        return ball
    return Intersection(first=spec, second=ball)


# --- JSON-facing descriptions (schema used by the experiment configs) ---

def set_to_config(spec: SetSpec) -> dict:
    if isinstance(spec, WholeSpace):
        return {"type": "whole-space", "dimension": spec.dimension}
    if isinstance(spec, Ball):
        return {"type": "ball", "center": list(spec.center), "radius": spec.radius}
    if isinstance(spec, Box):
        return {"type": "box", "lower": list(spec.lower), "upper": list(spec.upper)}
    if isinstance(spec, Halfspace):
        return {"type": "halfspace", "normal": list(spec.normal), "offset": spec.offset}
    if isinstance(spec, Intersection):
        return {"type": "intersection", "first": set_to_config(spec.first),
                "second": set_to_config(spec.second)}
    raise TypeError(f"unknown set spec {type(spec).__name__}")


def set_from_config(cfg: dict) -> SetSpec:
    kind = cfg.get("type")
    known = {
        "whole-space": {"dimension"},
        "ball": {"center", "radius"},
        "box": {"lower", "upper"},
        "halfspace": {"normal", "offset"},
        "intersection": {"first", "second"},
    }
    if kind not in known:
        raise ValueError(f"set.type: unknown value {kind!r}")
    extra = set(cfg) - known[kind] - {"type"}
    if extra:
        raise ValueError(f"set: unknown fields {sorted(extra)}")
    missing = known[kind] - set(cfg)
    if missing:
        raise ValueError(f"set: missing fields {sorted(missing)}")
    if kind == "whole-space":
        return WholeSpace(int(cfg["dimension"]))
    if kind == "ball":
        return Ball(center=cfg["center"], radius=float(cfg["radius"]))
    if kind == "box":
        return Box(lower=cfg["lower"], upper=cfg["upper"])
    if kind == "halfspace":
        return Halfspace(normal=cfg["normal"], offset=float(cfg["offset"]))
    return Intersection(first=set_from_config(cfg["first"]),
                        second=set_from_config(cfg["second"]))

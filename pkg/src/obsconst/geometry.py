"""Model manifolds, regions, unit-speed geodesics and exact dwell times.

Three model geometries are supported: the circle R/2piZ, the flat 2-torus
R^2/(L1 Z x L2 Z) and the round unit sphere S^2. Points are represented as

* circle: an angle (float),
* torus: an ``(x, y)`` pair,
* sphere: a unit 3-vector.

Regions are finite unions of analytic primitives (arcs, convex polygons,
spherical caps and bands). Every dwell-time computation is done by solving
for entry/exit times in closed form, never by sampling in time.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

TWO_PI = 2.0 * math.pi

# Geometric tolerance for boundary membership and grazing classification.
EPS = 1e-12
# Offset of the probe point used to decide whether a grazed edge is internal.
GRAZE_PROBE = 1e-7

CIRCLE = "circle"
TORUS = "torus"
SPHERE = "sphere"

INTERIOR = "interior"
CLOSURE = "closure"


class GeometryError(ValueError):
    pass


@dataclass(frozen=True)
class ManifoldSpec:
    """Which model geometry, plus its periods (torus only)."""

    kind: str
    periods: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind == CIRCLE:
            if not self.periods:
                object.__setattr__(self, "periods", (TWO_PI,))
            if len(self.periods) != 1 or not math.isclose(self.periods[0], TWO_PI):
                raise GeometryError("the circle has the single period 2*pi")
        elif self.kind == TORUS:
            if not self.periods:
                object.__setattr__(self, "periods", (1.0, 1.0))
            if len(self.periods) != 2:
                raise GeometryError("the flat torus needs two periods")
        elif self.kind == SPHERE:
            if self.periods:
                raise GeometryError("the unit sphere has no periods")
        else:
            raise GeometryError(f"unknown manifold kind {self.kind!r}")
        object.__setattr__(self, "periods", tuple(float(p) for p in self.periods))
        if any(p <= 0 for p in self.periods):
            raise GeometryError("periods must be strictly positive")

    @classmethod
    def circle(cls) -> "ManifoldSpec":
        return cls(CIRCLE)

    @classmethod
    def torus(cls, l1: float = 1.0, l2: float = 1.0) -> "ManifoldSpec":
        return cls(TORUS, (l1, l2))

    @classmethod
    def sphere(cls) -> "ManifoldSpec":
        return cls(SPHERE)

    @property
    def volume(self) -> float:
        if self.kind == CIRCLE:
            return TWO_PI
        if self.kind == TORUS:
            return self.periods[0] * self.periods[1]
        return 4.0 * math.pi

    @property
    def dim(self) -> int:
        return 1 if self.kind == CIRCLE else 2


# ---------------------------------------------------------------------------
# interval helpers (closed intervals on the time axis)


def _clip(intervals: Iterable[tuple[float, float]], lo: float, hi: float):
    out = []
    for a, b in intervals:
        a, b = max(a, lo), min(b, hi)
        if b > a:
            out.append((a, b))
    return out


def merge_intervals(intervals: Iterable[tuple[float, float]]) -> list[tuple[float, float]]:
    out: list[list[float]] = []
    for a, b in sorted(intervals):
        if out and a <= out[-1][1]:
            out[-1][1] = max(out[-1][1], b)
        else:
            out.append([a, b])
    return [(a, b) for a, b in out]


def _complement(intervals, lo, hi):
    out, cur = [], lo
    for a, b in merge_intervals(intervals):
        if a > cur:
            out.append((cur, a))
        cur = max(cur, b)
    if hi > cur:
        out.append((cur, hi))
    return out


def _intersect(xs, ys):
    out = []
    for a, b in xs:
        for c, d in ys:
            lo, hi = max(a, c), min(b, d)
            if hi > lo:
                out.append((lo, hi))
    return merge_intervals(out)


def total_length(intervals) -> float:
    return float(sum(b - a for a, b in intervals))


# ---------------------------------------------------------------------------
# primitives


@dataclass(frozen=True)
class Arc:
    """Circle arc ``[start, start + length)`` taken mod 2*pi."""

    start: float
    length: float

    def __post_init__(self):
        if not 0.0 < self.length <= TWO_PI + EPS:
            raise GeometryError("arc length must lie in (0, 2*pi]")

    @classmethod
    def between(cls, a: float, b: float) -> "Arc":
        return cls(a, b - a)

    @property
    def full(self) -> bool:
        return self.length >= TWO_PI - EPS

    def measure(self) -> float:
        return min(self.length, TWO_PI)

    def contains(self, x: float, closed: bool) -> bool:
        if self.full:
            return True
        s = (x - self.start) % TWO_PI
        if closed:
            return s <= self.length + EPS or s >= TWO_PI - EPS
        return EPS < s < self.length - EPS

    def intervals(self, ray: "Ray", T: float):
        if self.full:
            return [(0.0, T)], []
        if ray.sigma > 0:
            base = (self.start - ray.x0) % TWO_PI - TWO_PI
        else:
            base = (ray.x0 - self.start - self.length) % TWO_PI - TWO_PI
        out = []
        k = 0
        while base + k * TWO_PI < T:
            a = base + k * TWO_PI
            out.append((a, a + self.length))
            k += 1
        return _clip(out, 0.0, T), []

    def to_dict(self):
        return {"type": "arc", "start": self.start, "length": self.length}


@dataclass(frozen=True)
class Polygon:
    """Convex polygon in the covering plane of the torus, vertices CCW.

    The polygon is projected to the torus; its extent along each axis must
    not exceed the period so distinct lattice copies only meet on edges.
    """

    vertices: tuple[tuple[float, float], ...]
    normals: np.ndarray = field(init=False, repr=False, compare=False)
    offsets: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or len(v) < 3:
            raise GeometryError("a polygon needs at least three 2D vertices")
        area2 = np.sum(v[:, 0] * np.roll(v[:, 1], -1) - np.roll(v[:, 0], -1) * v[:, 1])
        if area2 < 0:
            v = v[::-1]
        elif area2 == 0:
            raise GeometryError("degenerate polygon")
        e = np.roll(v, -1, axis=0) - v
        cross = e[:, 0] * np.roll(e[:, 1], -1) - e[:, 1] * np.roll(e[:, 0], -1)
        if np.any(cross < -1e-12):
            raise GeometryError("polygon must be convex")
        n = np.stack([e[:, 1], -e[:, 0]], axis=1)
        n /= np.linalg.norm(n, axis=1, keepdims=True)
        object.__setattr__(self, "vertices", tuple(map(tuple, v.tolist())))
        object.__setattr__(self, "normals", n)
        object.__setattr__(self, "offsets", np.einsum("ij,ij->i", n, v))

    @classmethod
    def rectangle(cls, x0, y0, x1, y1) -> "Polygon":
        return cls(((x0, y0), (x1, y0), (x1, y1), (x0, y1)))

    @classmethod
    def triangle(cls, p, q, r) -> "Polygon":
        return cls((tuple(p), tuple(q), tuple(r)))

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.vertices)

    @property
    def bbox(self):
        v = self.array
        return v.min(axis=0), v.max(axis=0)

    def measure(self) -> float:
        v = self.array
        return 0.5 * float(np.sum(v[:, 0] * np.roll(v[:, 1], -1) - np.roll(v[:, 0], -1) * v[:, 1]))

    def _copies(self, periods, lo, hi):
        """Lattice shifts whose copy bbox meets the box ``[lo, hi]``."""
        bmin, bmax = self.bbox
        ranges = []
        for ax in range(2):
            L = periods[ax]
            i0 = math.floor((lo[ax] - bmax[ax]) / L) - 1
            i1 = math.ceil((hi[ax] - bmin[ax]) / L) + 1
            ranges.append(np.arange(i0, i1 + 1) * L)
        sx, sy = np.meshgrid(*ranges, indexing="ij")
        return np.stack([sx.ravel(), sy.ravel()], axis=1)

    def contains(self, p, closed: bool, periods) -> bool:
        p = np.asarray(p, dtype=float)
        shifts = self._copies(periods, p, p)
        s = self.offsets[None, :] + shifts @ self.normals.T - (self.normals @ p)[None, :]
        # s >= 0 on every edge means inside the shifted copy
        if closed:
            return bool(np.any(np.all(s >= -EPS, axis=1)))
        return bool(np.any(np.all(s > EPS, axis=1)))

    def contains_many(self, pts, closed: bool, periods) -> np.ndarray:
        """Vectorized :meth:`contains` for points reduced to the fundamental domain."""
        L = np.asarray(periods, float)
        pts = np.mod(np.asarray(pts, float).reshape(-1, 2), L)
        shifts = self._copies(periods, np.zeros(2), L)
        base = self.offsets[None, :] + shifts @ self.normals.T
        s = base[None, :, :] - (pts @ self.normals.T)[:, None, :]
        inside = np.all(s >= -EPS, axis=2) if closed else np.all(s > EPS, axis=2)
        return np.any(inside, axis=1)

    def intervals(self, ray: "Ray", T: float, periods):
        """Entry/exit intervals over ``[0, T]`` across all lattice copies.

        Returns ``(intervals, grazes)``; grazes are ``(lo, hi, probe)`` pieces
        where the ray runs along an edge, with ``probe`` a point just across
        that edge (outside this copy).
        """
        x0, d = np.asarray(ray.x0, float), ray.direction
        end = x0 + T * d
        shifts = self._copies(periods, np.minimum(x0, end), np.maximum(x0, end))
        nd = self.normals @ d
        # constraint per edge and copy: t * nd <= r
        r = self.offsets[None, :] + shifts @ self.normals.T - (self.normals @ x0)[None, :]
        lo = np.zeros(len(shifts))
        hi = np.full(len(shifts), T)
        edge = np.full(len(shifts), -1)
        for k, ndk in enumerate(nd):
            rk = r[:, k]
            if ndk > EPS:
                hi = np.minimum(hi, rk / ndk)
            elif ndk < -EPS:
                lo = np.maximum(lo, rk / ndk)
            else:
                hi = np.where(rk < -EPS, -np.inf, hi)
                edge = np.where(np.abs(rk) <= EPS, k, edge)
        keep = hi > lo
        plain = keep & (edge < 0)
        out = list(zip(lo[plain].tolist(), hi[plain].tolist()))
        grazes = []
        for i in np.flatnonzero(keep & (edge >= 0)):
            mid = 0.5 * (lo[i] + hi[i])
            probe = x0 + mid * d + GRAZE_PROBE * self.normals[edge[i]]
            grazes.append((float(lo[i]), float(hi[i]), tuple(probe)))
        return out, grazes

    def to_dict(self):
        return {"type": "polygon", "vertices": [list(v) for v in self.vertices]}


def _unit(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    n = np.linalg.norm(v)
    if n == 0:
        raise GeometryError("zero vector")
    return v / n


@dataclass(frozen=True)
class Band:
    """Spherical band ``theta_min <= colatitude <= theta_max`` about ``axis``.

    A cap is the band with ``theta_min = 0``.
    """

    theta_min: float
    theta_max: float
    axis: tuple[float, float, float] = (0.0, 0.0, 1.0)

    def __post_init__(self):
        if not 0.0 <= self.theta_min < self.theta_max <= math.pi + EPS:
            raise GeometryError("need 0 <= theta_min < theta_max <= pi")
        axis = np.asarray(self.axis, dtype=float)
        if abs(float(np.linalg.norm(axis)) - 1.0) > 4e-16:
            axis = _unit(axis)  # already-unit axes are kept bit-exact for round trips
        object.__setattr__(self, "axis", tuple(float(a) for a in axis))

    @classmethod
    def cap(cls, theta0: float, axis=(0.0, 0.0, 1.0)) -> "Band":
        return cls(0.0, theta0, axis)

    @property
    def is_cap(self) -> bool:
        return self.theta_min == 0.0

    @property
    def levels(self) -> tuple[float, float]:
        """(lower, upper) bounds on ``x . axis``; snapped to exact zero on the equator."""
        return _cos(self.theta_max), _cos(self.theta_min)

    def measure(self) -> float:
        lo, hi = self.levels
        return TWO_PI * (hi - lo)

    def contains(self, p, closed: bool) -> bool:
        z = float(np.dot(np.asarray(p, float), self.axis))
        lo, hi = self.levels
        if closed:
            return lo - EPS <= z <= hi + EPS
        above = z > lo + EPS if self.theta_max < math.pi else True
        below = z < hi - EPS if self.theta_min > 0 else True
        return above and below

    def intervals(self, ray: "Ray", T: float):
        a = np.asarray(self.axis)
        A, B = float(ray.x0 @ a), float(ray.xi0 @ a)
        lo, hi = self.levels
        if math.hypot(A, B) <= EPS:
            # the great circle sits on the level set z = 0
            if (lo == 0.0 or hi == 0.0) and abs(A) <= EPS:
                side = -1.0 if lo == 0.0 else 1.0
                probe = _unit(geodesic_at(ray, 0.5 * T) + side * GRAZE_PROBE * a)
                return [], [(0.0, T, tuple(probe))]
            return ([(0.0, T)] if lo < 0.0 < hi else []), []
        keep = [(0.0, T)]
        if lo > -1.0:
            keep = _sphere_superlevel(A, B, lo, T)
        if hi < 1.0:
            keep = _intersect(keep, _complement(_sphere_superlevel(A, B, hi, T), 0.0, T))
        return keep, []

    def to_dict(self):
        return {
            "type": "band",
            "theta_min": self.theta_min,
            "theta_max": self.theta_max,
            "axis": list(self.axis),
        }


def _cos(theta: float) -> float:
    if abs(theta - math.pi / 2) < 1e-15:
        return 0.0
    return math.cos(theta)


def _sphere_superlevel(A, B, c, T):
    """Times in [0, T] where ``A cos t + B sin t >= c``, for ``hypot(A, B) > 0``."""
    R = math.hypot(A, B)
    u = c / R
    if u >= 1.0:
        return []
    if u <= -1.0:
        return [(0.0, T)]
    beta = math.acos(u)
    phi = math.atan2(B, A)
    out = []
    k = math.floor((0.0 - phi - beta) / TWO_PI)
    while phi - beta + k * TWO_PI < T:
        out.append((phi - beta + k * TWO_PI, phi + beta + k * TWO_PI))
        k += 1
    return _clip(out, 0.0, T)


def primitive_from_dict(d: dict):
    kind = d["type"]
    if kind == "arc":
        if "end" in d:
            return Arc.between(float(d["start"]), float(d["end"]))
        return Arc(float(d["start"]), float(d["length"]))
    if kind == "polygon":
        return Polygon(tuple(tuple(map(float, v)) for v in d["vertices"]))
    if kind == "rectangle":
        return Polygon.rectangle(*map(float, d["corners"]))
    if kind == "triangle":
        return Polygon.triangle(*[tuple(map(float, v)) for v in d["vertices"]])
    if kind in ("band", "cap"):
        axis = tuple(map(float, d.get("axis", (0.0, 0.0, 1.0))))
        if kind == "cap":
            return Band.cap(float(d["theta"]), axis)
        return Band(float(d["theta_min"]), float(d["theta_max"]), axis)
    raise GeometryError(f"unknown primitive type {kind!r}")


_ALLOWED = {CIRCLE: Arc, TORUS: Polygon, SPHERE: Band}


@dataclass(frozen=True)
class Region:
    """Finite union of primitives, evaluated as interior or closure."""

    manifold: ManifoldSpec
    primitives: tuple = ()
    topology: str = INTERIOR

    def __post_init__(self):
        object.__setattr__(self, "primitives", tuple(self.primitives))
        if self.topology not in (INTERIOR, CLOSURE):
            raise GeometryError(f"unknown topology {self.topology!r}")
        kind = _ALLOWED[self.manifold.kind]
        for p in self.primitives:
            if not isinstance(p, kind):
                raise GeometryError(f"{type(p).__name__} is not a {self.manifold.kind} primitive")
            if isinstance(p, Polygon):
                lo, hi = p.bbox
                if np.any(hi - lo > np.asarray(self.manifold.periods) + EPS):
                    raise GeometryError("polygon wider than the fundamental domain")
        overlap = _pairwise_overlap(self)
        if overlap > 1e-9 * self.manifold.volume:
            raise GeometryError(f"primitives overlap (measure {overlap:.3g})")

    def with_topology(self, topology: str) -> "Region":
        if topology == self.topology:
            return self
        if topology not in (INTERIOR, CLOSURE):
            raise GeometryError(f"unknown topology {topology!r}")
        # primitives were validated once; skip the overlap check
        out = object.__new__(Region)
        object.__setattr__(out, "manifold", self.manifold)
        object.__setattr__(out, "primitives", self.primitives)
        object.__setattr__(out, "topology", topology)
        return out

    def interior(self) -> "Region":
        return self.with_topology(INTERIOR)

    def closure(self) -> "Region":
        return self.with_topology(CLOSURE)

    @property
    def closed(self) -> bool:
        return self.topology == CLOSURE

    def to_dict(self) -> dict:
        return {"topology": self.topology, "primitives": [p.to_dict() for p in self.primitives]}


def _pairwise_overlap(region: Region) -> float:
    prims = region.primitives
    total = 0.0
    for i in range(len(prims)):
        for j in range(i + 1, len(prims)):
            total += _overlap(region.manifold, prims[i], prims[j])
    return total


def _overlap(manifold, p, q) -> float:
    if isinstance(p, Arc):
        if p.full or q.full:
            return min(p.measure(), q.measure())
        s = (q.start - p.start) % TWO_PI
        xs = [(0.0, p.length)]
        ys = [(s, s + q.length), (s - TWO_PI, s - TWO_PI + q.length)]
        return total_length(_intersect(xs, ys))
    if isinstance(p, Polygon):
        from shapely.affinity import translate
        from shapely.geometry import Polygon as SPoly

        a = SPoly(p.vertices)
        total = 0.0
        for sx, sy in q._copies(manifold.periods, *p.bbox):
            total += a.intersection(translate(SPoly(q.vertices), sx, sy)).area
        return total
    # bands: exact when coaxial, otherwise a fine deterministic estimate
    if np.allclose(p.axis, q.axis):
        lo = max(p.levels[0], q.levels[0])
        hi = min(p.levels[1], q.levels[1])
        return TWO_PI * max(0.0, hi - lo)
    pts = fibonacci_sphere(20000)
    za, zb = pts @ np.asarray(p.axis), pts @ np.asarray(q.axis)
    ina = (za >= p.levels[0]) & (za <= p.levels[1])
    inb = (zb >= q.levels[0]) & (zb <= q.levels[1])
    frac = np.mean(ina & inb)
    # a single shared sample is at the resolution of the estimate
    return 4 * math.pi * frac if frac > 5.0 / len(pts) else 0.0


def fibonacci_sphere(n: int) -> np.ndarray:
    i = np.arange(n) + 0.5
    z = 1.0 - 2.0 * i / n
    phi = math.pi * (3.0 - math.sqrt(5.0)) * i
    r = np.sqrt(1.0 - z * z)
    return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)


# ---------------------------------------------------------------------------
# rays


@dataclass(frozen=True)
class Ray:
    """Unit-speed geodesic.

    circle: ``x0`` angle and ``sigma = +-1``; torus: ``x0 = (x, y)`` and
    ``angle``; sphere: orthonormal pair ``x0``, ``xi0``.
    """

    manifold: ManifoldSpec
    x0: object
    sigma: int = 1
    angle: float = 0.0
    xi0: object = None

    def __post_init__(self):
        kind = self.manifold.kind
        if kind == CIRCLE:
            if self.sigma not in (1, -1):
                raise GeometryError("circle direction must be +1 or -1")
            object.__setattr__(self, "x0", float(self.x0) % TWO_PI)
        elif kind == TORUS:
            object.__setattr__(self, "x0", tuple(float(v) for v in self.x0))
        else:
            x0 = _unit(self.x0)
            xi = np.asarray(self.xi0, dtype=float)
            xi = _unit(xi - (xi @ x0) * x0)
            object.__setattr__(self, "x0", x0)
            object.__setattr__(self, "xi0", xi)

    @classmethod
    def circle(cls, x0: float, sigma: int = 1) -> "Ray":
        return cls(ManifoldSpec.circle(), x0, sigma=sigma)

    @classmethod
    def torus(cls, manifold: ManifoldSpec, x0, angle: float) -> "Ray":
        return cls(manifold, x0, angle=angle)

    @classmethod
    def sphere(cls, x0, xi0) -> "Ray":
        return cls(ManifoldSpec.sphere(), x0, xi0=xi0)

    @property
    def direction(self) -> np.ndarray:
        return np.array([math.cos(self.angle), math.sin(self.angle)])

    @property
    def normal(self) -> np.ndarray:
        return np.cross(self.x0, self.xi0)

    def shifted(self, t: float) -> "Ray":
        """The same geodesic restarted at time ``t``."""
        kind = self.manifold.kind
        if kind == CIRCLE:
            return Ray(self.manifold, self.x0 + self.sigma * t, sigma=self.sigma)
        if kind == TORUS:
            return Ray(self.manifold, geodesic_at(self, t), angle=self.angle)
        c, s = math.cos(t), math.sin(t)
        return Ray(self.manifold, c * self.x0 + s * self.xi0, xi0=-s * self.x0 + c * self.xi0)


def geodesic_at(ray: Ray, t: float):
    kind = ray.manifold.kind
    if kind == CIRCLE:
        return (ray.x0 + ray.sigma * t) % TWO_PI
    if kind == TORUS:
        L = np.asarray(ray.manifold.periods)
        return tuple((np.asarray(ray.x0) + t * ray.direction) % L)
    return math.cos(t) * ray.x0 + math.sin(t) * ray.xi0


def measure(region: Region) -> float:
    return float(sum(p.measure() for p in region.primitives))


def indicator(region: Region, point) -> int:
    closed = region.closed
    kind = region.manifold.kind
    for p in region.primitives:
        if kind == TORUS:
            hit = p.contains(point, closed, region.manifold.periods)
        elif kind == CIRCLE:
            hit = p.contains(float(point), closed)
        else:
            hit = p.contains(point, closed)
        if hit:
            return 1
    return 0


def _probe_many(region: Region, points) -> list[bool]:
    if region.manifold.kind != TORUS:
        return [bool(indicator(region, q)) for q in points]
    hit = np.zeros(len(points), bool)
    for p in region.primitives:
        hit |= p.contains_many(points, region.closed, region.manifold.periods)
    return hit.tolist()


@dataclass(frozen=True)
class Dwell:
    """Exact dwell of a ray in a region over ``[0, T]``."""

    duration: float
    intervals: tuple[tuple[float, float], ...]
    grazing_time: float

    @property
    def grazing(self) -> bool:
        return self.grazing_time > 0.0


def dwell(ray: Ray, region: Region, T: float) -> Dwell:
    """Exact dwell intervals of ``ray`` in ``region`` over ``[0, T]``.

    Pieces where the ray runs along a primitive boundary count under the
    closure topology. Under the interior topology they count only when the
    edge is internal to the union (the far side is covered by another
    primitive or lattice copy), decided by a probe point just across it.
    """
    if T <= 0:
        raise GeometryError("horizon T must be positive")
    if ray.manifold != region.manifold:
        raise GeometryError("ray and region live on different manifolds")
    pieces: list[tuple[float, float]] = []
    grazes = []
    for p in region.primitives:
        if isinstance(p, Polygon):
            iv, gz = p.intervals(ray, T, region.manifold.periods)
        else:
            iv, gz = p.intervals(ray, T)
        pieces.extend(iv)
        grazes.extend(gz)
    graze = sum(hi - lo for lo, hi, _ in grazes)
    if grazes:
        keep = [True] * len(grazes) if region.closed else _probe_many(region.closure(), [g[2] for g in grazes])
        pieces.extend((lo, hi) for (lo, hi, _), k in zip(grazes, keep) if k)
    merged = merge_intervals(pieces)
    return Dwell(min(total_length(merged), T), tuple(merged), graze)


def time_in_region(ray: Ray, region: Region, T: float) -> float:
    """Lebesgue measure of ``{t in [0, T] : ray(t) in region}``."""
    return dwell(ray, region, T).duration


def boundary_rays(region: Region) -> list[Ray]:
    """Rays running along primitive boundaries (candidates for grazing)."""
    m = region.manifold
    out: list[Ray] = []
    for p in region.primitives:
        if isinstance(p, Polygon):
            v = p.array
            for a, b in zip(v, np.roll(v, -1, axis=0)):
                e = b - a
                ang = math.atan2(e[1], e[0])
                out.append(Ray(m, tuple(a % np.asarray(m.periods)), angle=ang))
                out.append(Ray(m, tuple(b % np.asarray(m.periods)), angle=ang + math.pi))
        elif isinstance(p, Band):
            for theta in (p.theta_min, p.theta_max):
                # only great circles (theta = pi/2) can lie in a boundary
                if abs(theta - math.pi / 2) < 1e-9:
                    x0, xi0 = _orthonormal_pair(np.asarray(p.axis))
                    out.append(Ray(m, x0, xi0=xi0))
    return out


def _orthonormal_pair(axis: np.ndarray):
    trial = np.array([1.0, 0.0, 0.0]) if abs(axis[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    u = _unit(trial - (trial @ axis) * axis)
    return u, np.cross(axis, u)


def sphere_point(theta: float, phi: float) -> np.ndarray:
    st = math.sin(theta)
    return np.array([st * math.cos(phi), st * math.sin(phi), _cos(theta)])


def full_region(manifold: ManifoldSpec, topology: str = INTERIOR) -> Region:
    if manifold.kind == CIRCLE:
        prims: Sequence = (Arc(0.0, TWO_PI),)
    elif manifold.kind == TORUS:
        prims = (Polygon.rectangle(0.0, 0.0, *manifold.periods),)
    else:
        prims = (Band.cap(math.pi),)
    return Region(manifold, prims, topology)

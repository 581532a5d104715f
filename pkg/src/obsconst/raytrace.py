"""Minimal average dwell of geodesics in a region, trapped and grazing rays.

``g2`` returns an upper bound on the infimum over rays: a phase-space grid is
scored exactly, then the best cells are refined with Nelder-Mead. The
reported value is always the exact dwell fraction of the returned ray.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np
from scipy.optimize import minimize

from .geometry import (
    CIRCLE,
    EPS,
    SPHERE,
    TORUS,
    TWO_PI,
    ManifoldSpec,
    Ray,
    Region,
    boundary_rays,
    dwell,
    sphere_point,
    time_in_region,
)

HEURISTIC_PASS = "HEURISTIC-PASS"
HEURISTIC_FAIL = "HEURISTIC-FAIL"


@dataclass(frozen=True)
class SearchConfig:
    circle_points: int = 512
    torus_positions: int = 64
    torus_angles: int = 256
    torus_max_denominator: int = 16
    sphere_colatitudes: int = 32
    sphere_azimuths: int = 64
    sphere_directions: int = 64
    refine_from: int = 16
    refine_iterations: int = 200

    @classmethod
    def coarse(cls) -> "SearchConfig":
        return cls(
            circle_points=128,
            torus_positions=32,
            torus_angles=64,
            torus_max_denominator=4,
            sphere_colatitudes=16,
            sphere_azimuths=32,
            sphere_directions=32,
            refine_from=4,
            refine_iterations=60,
        )


@dataclass(frozen=True)
class G2Result:
    """Smallest average dwell found; an upper bound on the true infimum."""

    T: float
    value: float
    ray: Ray
    params: tuple
    grid_size: int
    grid_best: float
    refinements: int
    stalled: bool
    bound_side: str = "upper"


# ---------------------------------------------------------------------------
# ray parametrizations


def _ray_from_params(manifold: ManifoldSpec, p) -> Ray:
    if manifold.kind == CIRCLE:
        return Ray(manifold, p[0], sigma=int(p[1]))
    if manifold.kind == TORUS:
        L = manifold.periods
        return Ray(manifold, (p[0] % L[0], p[1] % L[1]), angle=p[2] % TWO_PI)
    x0, xi0 = _sphere_frame(p[0], p[1], p[2])
    return Ray(manifold, x0, xi0=xi0)


def _sphere_frame(theta, phi, psi):
    x0 = sphere_point(theta, phi)
    e_theta = np.array([math.cos(theta) * math.cos(phi), math.cos(theta) * math.sin(phi), -math.sin(theta)])
    e_phi = np.array([-math.sin(phi), math.cos(phi), 0.0])
    return x0, math.cos(psi) * e_theta + math.sin(psi) * e_phi


def rational_directions(max_den: int) -> np.ndarray:
    """Angles of all directions ``(q, p)`` with coprime ``|p|, |q| <= max_den``."""
    angs = set()
    for q in range(-max_den, max_den + 1):
        for p in range(-max_den, max_den + 1):
            if (p, q) != (0, 0) and math.gcd(p, q) == 1:
                angs.add(round(math.atan2(p, q) % TWO_PI, 15))
    return np.array(sorted(angs))


def _grid(manifold: ManifoldSpec, cfg: SearchConfig) -> np.ndarray:
    if manifold.kind == CIRCLE:
        x = TWO_PI * np.arange(cfg.circle_points) / cfg.circle_points
        return np.array([(xi, s) for s in (1, -1) for xi in x])
    if manifold.kind == TORUS:
        L1, L2 = manifold.periods
        xs = L1 * np.arange(cfg.torus_positions) / cfg.torus_positions
        ys = L2 * np.arange(cfg.torus_positions) / cfg.torus_positions
        angs = TWO_PI * np.arange(cfg.torus_angles) / cfg.torus_angles
        angs = np.unique(np.round(np.concatenate([angs, rational_directions(cfg.torus_max_denominator)]), 15))
        X, Y, A = np.meshgrid(xs, ys, angs, indexing="ij")
        return np.stack([X.ravel(), Y.ravel(), A.ravel()], axis=1)
    th = math.pi * np.arange(cfg.sphere_colatitudes) / cfg.sphere_colatitudes
    ph = TWO_PI * np.arange(cfg.sphere_azimuths) / cfg.sphere_azimuths
    ps = TWO_PI * np.arange(cfg.sphere_directions) / cfg.sphere_directions
    Th, Ph, Ps = np.meshgrid(th, ph, ps, indexing="ij")
    return np.stack([Th.ravel(), Ph.ravel(), Ps.ravel()], axis=1)


def _seed_params(region: Region) -> list[tuple]:
    """Parameters of boundary-aligned rays, always scored."""
    out = []
    for ray in boundary_rays(region):
        if region.manifold.kind == TORUS:
            out.append((ray.x0[0], ray.x0[1], ray.angle % TWO_PI))
        elif region.manifold.kind == SPHERE:
            x0, xi0 = ray.x0, ray.xi0
            theta = math.acos(max(-1.0, min(1.0, x0[2])))
            phi = math.atan2(x0[1], x0[0])
            _, e_t = _sphere_frame(theta, phi, 0.0)
            _, e_p = _sphere_frame(theta, phi, math.pi / 2)
            out.append((theta, phi, math.atan2(xi0 @ e_p, xi0 @ e_t)))
    return out


# ---------------------------------------------------------------------------
# bulk scoring


@numba.njit(cache=True)
def _torus_kernel(xs, ys, angs, T, L1, L2, normals, offsets, nedges, bmin, bmax):
    n = xs.shape[0]
    total = np.zeros(n)
    graze = np.zeros(n, dtype=np.bool_)
    for r in range(n):
        x0 = xs[r]
        y0 = ys[r]
        dx = math.cos(angs[r])
        dy = math.sin(angs[r])
        acc = 0.0
        for p in range(normals.shape[0]):
            # walk the x-slabs of lattice copies the segment can meet
            xa = min(x0, x0 + T * dx)
            xb = max(x0, x0 + T * dx)
            i0 = int(math.floor((xa - bmax[p, 0]) / L1)) - 1
            i1 = int(math.ceil((xb - bmin[p, 0]) / L1)) + 1
            for i in range(i0, i1 + 1):
                sx = i * L1
                ta, tb = 0.0, T
                if abs(dx) > EPS:
                    u0 = (bmin[p, 0] + sx - x0) / dx
                    u1 = (bmax[p, 0] + sx - x0) / dx
                    ta = max(ta, min(u0, u1))
                    tb = min(tb, max(u0, u1))
                elif x0 < bmin[p, 0] + sx - EPS or x0 > bmax[p, 0] + sx + EPS:
                    continue
                if tb < ta:
                    continue
                ya = min(y0 + ta * dy, y0 + tb * dy)
                yb = max(y0 + ta * dy, y0 + tb * dy)
                j0 = int(math.floor((ya - bmax[p, 1]) / L2)) - 1
                j1 = int(math.ceil((yb - bmin[p, 1]) / L2)) + 1
                for j in range(j0, j1 + 1):
                    sy = j * L2
                    lo, hi = 0.0, T
                    on_edge = False
                    for k in range(nedges[p]):
                        nx = normals[p, k, 0]
                        ny = normals[p, k, 1]
                        nd = nx * dx + ny * dy
                        rk = offsets[p, k] + nx * sx + ny * sy - nx * x0 - ny * y0
                        if nd > EPS:
                            hi = min(hi, rk / nd)
                        elif nd < -EPS:
                            lo = max(lo, rk / nd)
                        elif rk < -EPS:
                            hi = -1.0
                        elif rk <= EPS:
                            on_edge = True
                    if hi > lo:
                        acc += hi - lo
                        if on_edge:
                            graze[r] = True
        total[r] = min(acc, T)
    return total, graze


def _torus_arrays(region: Region):
    polys = region.primitives
    E = max(len(p.vertices) for p in polys)
    normals = np.zeros((len(polys), E, 2))
    offsets = np.zeros((len(polys), E))
    nedges = np.zeros(len(polys), dtype=np.int64)
    bmin = np.zeros((len(polys), 2))
    bmax = np.zeros((len(polys), 2))
    for i, p in enumerate(polys):
        k = len(p.vertices)
        normals[i, :k] = p.normals
        offsets[i, :k] = p.offsets
        nedges[i] = k
        bmin[i], bmax[i] = p.bbox
    return normals, offsets, nedges, bmin, bmax


def _sphere_measure(A, B, c, T):
    """Time in [0, T] with ``A cos t + B sin t >= c`` (``hypot(A, B) > 0``), vectorized."""
    R = np.hypot(A, B)
    u = np.clip(c / np.where(R > 0, R, 1.0), -1.0, 1.0)
    beta = np.arccos(u)
    phi = np.arctan2(B, A)

    def G(x):
        k = np.floor(x / TWO_PI)
        r = x - k * TWO_PI
        return k * 2 * beta + np.minimum(r, beta) + np.maximum(0.0, r - (TWO_PI - beta))

    return G(T - phi) - G(-phi)


def _sphere_bulk(params, region: Region, T):
    th, ph, ps = params[:, 0], params[:, 1], params[:, 2]
    st, ct = np.sin(th), np.cos(th)
    x0 = np.stack([st * np.cos(ph), st * np.sin(ph), ct], axis=1)
    x0[np.isclose(th, math.pi / 2, atol=1e-15), 2] = 0.0
    e_t = np.stack([ct * np.cos(ph), ct * np.sin(ph), -st], axis=1)
    e_p = np.stack([-np.sin(ph), np.cos(ph), np.zeros_like(ph)], axis=1)
    xi = np.cos(ps)[:, None] * e_t + np.sin(ps)[:, None] * e_p
    total = np.zeros(len(params))
    graze = np.zeros(len(params), dtype=bool)
    for band in region.primitives:
        a = np.asarray(band.axis)
        A, B = x0 @ a, xi @ a
        lo, hi = band.levels
        flat = np.hypot(A, B) <= EPS
        m = np.full(len(params), T)
        if lo > -1.0:
            m = _sphere_measure(A, B, lo, T)
        if hi < 1.0:
            m = m - _sphere_measure(A, B, hi, T)
        m = np.where(flat, np.where(lo < 0.0 < hi, T, 0.0), m)
        graze |= flat & ((lo == 0.0) | (hi == 0.0))
        total += m
    return np.minimum(total, T), graze


def score_rays(params: np.ndarray, region: Region, T: float) -> np.ndarray:
    """Exact average dwell for many parametrized rays at once."""
    m = region.manifold
    if not region.primitives:
        return np.zeros(len(params))
    if m.kind == CIRCLE:
        return np.array([time_in_region(_ray_from_params(m, p), region, T) for p in params]) / T
    if m.kind == TORUS:
        arrays = _torus_arrays(region)
        out = np.empty(len(params))
        graze = np.empty(len(params), dtype=bool)
        step = 1 << 16
        for s in range(0, len(params), step):
            chunk = params[s : s + step]
            out[s : s + step], graze[s : s + step] = _torus_kernel(
                np.ascontiguousarray(chunk[:, 0]),
                np.ascontiguousarray(chunk[:, 1]),
                np.ascontiguousarray(chunk[:, 2]),
                float(T),
                *m.periods,
                *arrays,
            )
    else:
        out, graze = _sphere_bulk(params, region, T)
    # grazing rays (and shared edges) need the exact union/probe treatment
    for i in np.flatnonzero(graze):
        out[i] = time_in_region(_ray_from_params(m, params[i]), region, T)
    return out / T


def _objective(region, T, discrete=None):
    m = region.manifold

    def f(x):
        p = (x[0], discrete) if m.kind == CIRCLE else tuple(x)
        return time_in_region(_ray_from_params(m, p), region, T) / T

    return f


def g2(region: Region, T: float, search: SearchConfig | None = None) -> G2Result:
    """Upper bound on the smallest average time spent by a ray in ``region`` over ``[0, T]``."""
    if T <= 0:
        raise ValueError("T must be positive")
    cfg = search or SearchConfig()
    m = region.manifold
    params = _grid(m, cfg)
    seeds = _seed_params(region)
    if seeds:
        params = np.vstack([params, np.asarray(seeds, float)])
    scores = score_rays(params, region, T)
    order = np.argsort(scores, kind="stable")
    best_p = tuple(params[order[0]])
    grid_best = float(scores[order[0]])
    best = grid_best
    refinements = 0
    if best > 0.0:
        if m.kind == CIRCLE:
            h = TWO_PI / cfg.circle_points
        elif m.kind == TORUS:
            h = min(m.periods) / cfg.torus_positions
        else:
            h = math.pi / cfg.sphere_colatitudes
        for idx in order[: cfg.refine_from]:
            p0 = params[idx]
            if m.kind == CIRCLE:
                f = _objective(region, T, discrete=int(p0[1]))
                x0 = np.array([p0[0]])
            else:
                f = _objective(region, T)
                x0 = np.array(p0)
            simplex = np.vstack([x0] + [x0 + h * e for e in np.eye(len(x0))])
            res = minimize(
                f,
                x0,
                method="Nelder-Mead",
                options={"maxiter": cfg.refine_iterations, "initial_simplex": simplex, "xatol": 1e-12, "fatol": 1e-14},
            )
            refinements += 1
            if res.fun < best:
                best = float(res.fun)
                best_p = (float(res.x[0]), int(p0[1])) if m.kind == CIRCLE else tuple(map(float, res.x))
            if best <= 0.0:
                break
    ray = _ray_from_params(m, best_p)
    value = time_in_region(ray, region, T) / T
    stalled = grid_best - value <= 1e-12
    return G2Result(float(T), float(value), ray, tuple(best_p), len(params), grid_best, refinements, stalled)


@dataclass(frozen=True)
class G2Limit:
    schedule: tuple[float, ...]
    values: tuple[float, ...]
    limit: float
    superadditivity_violations: tuple[tuple[float, float, float, float], ...]
    anomalies: tuple[str, ...]


def g2_limit(region: Region, schedule, search: SearchConfig | None = None, slack: float = 1e-9) -> G2Limit:
    """``g2^T`` along an increasing schedule with a soft superadditivity check.

    The limit estimate is the value at the largest horizon.
    """
    sched = [float(t) for t in schedule]
    if any(b <= a for a, b in zip(sched, sched[1:])):
        raise ValueError("schedule must be increasing")
    vals = [g2(region, T, search).value for T in sched]
    viol = []
    for i, Ti in enumerate(sched):
        for j in range(i, len(sched)):
            S = Ti + sched[j]
            for k, Tk in enumerate(sched):
                if abs(Tk - S) <= 1e-9 * Tk:
                    lhs = Tk * vals[k]
                    rhs = Ti * vals[i] + sched[j] * vals[j]
                    if lhs < rhs - slack * Tk:
                        viol.append((Ti, sched[j], lhs, rhs))
    anomalies = []
    for (Ta, va), (Tb, vb) in zip(zip(sched, vals), zip(sched[1:], vals[1:])):
        if vb < va - 0.05:
            anomalies.append(f"g2 drops from {va:.6g} at T={Ta:.6g} to {vb:.6g} at T={Tb:.6g}")
    return G2Limit(tuple(sched), tuple(vals), vals[-1], tuple(viol), tuple(anomalies))


@dataclass(frozen=True)
class GrazingReport:
    grazing_rays: tuple[Ray, ...]
    boundary_times: tuple[float, ...]
    sampled: int
    sampled_boundary_time: float
    verdict: str

    @property
    def note(self) -> str:
        return "heuristic: no proof that no grazing ray exists" if self.verdict == HEURISTIC_PASS else (
            "heuristic: grazing ray found, assumption (H) fails"
        )


def grazing_scan(region: Region, T: float, samples: int = 1000, seed: int = 0) -> GrazingReport:
    """Look for rays spending positive time on the region boundary."""
    m = region.manifold
    rays, times = [], []
    for ray in boundary_rays(region):
        g = dwell(ray, region.closure(), T).grazing_time
        if g > EPS:
            rays.append(ray)
            times.append(g)
    rng = np.random.default_rng(seed)
    sampled_time = 0.0
    if m.kind != CIRCLE:
        for _ in range(samples):
            if m.kind == TORUS:
                ray = Ray(m, tuple(rng.random(2) * np.asarray(m.periods)), angle=rng.random() * TWO_PI)
            else:
                v = rng.normal(size=(2, 3))
                ray = Ray(m, v[0], xi0=v[1])
            sampled_time += dwell(ray, region.closure(), T).grazing_time
    verdict = HEURISTIC_PASS if not rays and sampled_time == 0.0 else HEURISTIC_FAIL
    return GrazingReport(tuple(rays), tuple(times), samples if m.kind != CIRCLE else 0, sampled_time, verdict)


@dataclass(frozen=True)
class AlphaBracket:
    lo: float
    hi: float
    collapsed: bool
    interior: G2Result
    closure: G2Result
    grazing: GrazingReport
    note: str = field(default="")

    @property
    def value(self) -> float | None:
        return self.lo if self.collapsed else None


def alpha_bracket(region: Region, T: float, search: SearchConfig | None = None, seed: int = 0) -> AlphaBracket:
    """Bracket the high-frequency constant by half the dwell infima of interior and closure.

    Both ends are search estimates, hence upper bounds on the true ``g2`` halves.
    """
    gi = g2(region.interior(), T, search)
    gc = g2(region.closure(), T, search)
    scan = grazing_scan(region, T, seed=seed)
    lo, hi = 0.5 * gi.value, 0.5 * gc.value
    collapsed = scan.verdict == HEURISTIC_PASS and abs(hi - lo) <= 1e-9
    note = "lo is an upper-bound estimate of half the interior dwell infimum"
    if scan.verdict == HEURISTIC_PASS and not collapsed:
        note += "; no grazing ray found but search estimates differ"
    if collapsed:
        hi = lo
    return AlphaBracket(lo, hi, collapsed, gi, gc, scan, note)


"""Laplace eigenbases of the model manifolds and their Gram matrices over a region.

Frequencies are square roots of Laplace eigenvalues. Constants are excluded
everywhere, so every mode has a strictly positive frequency.
"""
from __future__ import annotations

import hashlib
import json
import logging
import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .geometry import (
    CIRCLE,
    SPHERE,
    TORUS,
    TWO_PI,
    Band,
    ManifoldSpec,
    Region,
)

log = logging.getLogger(__name__)

CACHE_ENV = "OBSCONST_CACHE_DIR"
QUAD_TOL = 1e-8
MAX_QUAD_DOUBLINGS = 4


class EmptyBasisError(ValueError):
    pass


class QuadratureError(RuntimeError):
    def __init__(self, msg, coarse=None, fine=None):
        super().__init__(msg)
        self.coarse = coarse
        self.fine = fine


@dataclass(frozen=True)
class EigenMode:
    """One real eigenfunction.

    ``descriptor`` is ``(j, tag)`` on the circle (tag ``"cos"``/``"sin"``),
    ``(k1, k2, tag1, tag2)`` on the torus and ``(l, m)`` on the sphere with
    ``m < 0`` selecting the ``sin(|m| phi)`` harmonic.
    """

    index: int
    frequency: float
    descriptor: tuple
    kind: str


@dataclass(frozen=True)
class SpectralBasis:
    manifold: ManifoldSpec
    cutoff: float
    modes: tuple[EigenMode, ...]
    eigenspaces: tuple[tuple[int, ...], ...]  # 0-based mode positions

    def __len__(self):
        return len(self.modes)

    @property
    def frequencies(self) -> np.ndarray:
        return np.array([m.frequency for m in self.modes])

    @property
    def distinct_frequencies(self) -> np.ndarray:
        return np.array([self.modes[e[0]].frequency for e in self.eigenspaces])

    @property
    def gap(self) -> float:
        f = self.distinct_frequencies
        return float(np.min(np.diff(f))) if len(f) > 1 else math.inf

    def eigenspace_of(self, pos: int) -> int:
        for k, e in enumerate(self.eigenspaces):
            if pos in e:
                return k
        raise IndexError(pos)

    def truncate(self, cutoff: float) -> "SpectralBasis":
        """Sub-basis of whole eigenspaces with frequency <= cutoff."""
        return build_basis(self.manifold, cutoff)

    def modes_up_to(self, cutoff: float) -> int:
        """Number of leading modes with frequency <= cutoff (never splits an eigenspace)."""
        f = self.frequencies
        return int(np.searchsorted(f, cutoff * (1 + 1e-12), side="right"))


def _tag_order(tag: str) -> int:
    return 0 if tag == "cos" else 1


def _circle_modes(cutoff):
    out = []
    for j in range(1, int(math.floor(cutoff + 1e-12)) + 1):
        for tag in ("cos", "sin"):
            out.append((float(j), (j, tag)))
    return out


def _torus_modes(manifold, cutoff):
    L1, L2 = manifold.periods
    k1max = int(math.floor(cutoff * L1 / TWO_PI + 1e-9))
    k2max = int(math.floor(cutoff * L2 / TWO_PI + 1e-9))
    out = []
    for k1 in range(k1max + 1):
        for k2 in range(k2max + 1):
            if k1 == 0 and k2 == 0:
                continue
            lam = TWO_PI * math.hypot(k1 / L1, k2 / L2)
            if lam > cutoff * (1 + 1e-12):
                continue
            for t1 in (("cos",) if k1 == 0 else ("cos", "sin")):
                for t2 in (("cos",) if k2 == 0 else ("cos", "sin")):
                    out.append((lam, (k1, k2, t1, t2)))
    return out


def _sphere_modes(cutoff):
    out = []
    l = 1
    while l * (l + 1) <= cutoff * cutoff * (1 + 1e-12):
        lam = math.sqrt(l * (l + 1))
        for m in range(-l, l + 1):
            out.append((lam, (l, m)))
        l += 1
    return out


def _sort_key(item, kind):
    lam, d = item
    if kind == CIRCLE:
        return (lam, d[0], _tag_order(d[1]))
    if kind == TORUS:
        return (lam, d[0], d[1], _tag_order(d[2]), _tag_order(d[3]))
    return (lam, d[0], d[1])


def build_basis(manifold: ManifoldSpec, cutoff: float) -> SpectralBasis:
    """All modes with frequency <= ``cutoff``, Weyl-ordered, eigenspaces complete.

    Ties are broken lexicographically on the descriptor (cos before sin).
    """
    if manifold.kind == CIRCLE:
        raw = _circle_modes(cutoff)
    elif manifold.kind == TORUS:
        raw = _torus_modes(manifold, cutoff)
    else:
        raw = _sphere_modes(cutoff)
    if not raw:
        raise EmptyBasisError(f"frequency cutoff {cutoff} is below the first eigenfrequency")
    # group numerically equal frequencies and pin them to one value
    raw.sort(key=lambda it: _sort_key(it, manifold.kind))
    grouped, spaces, cur = [], [], []
    for lam, d in raw:
        if cur and abs(lam - grouped[cur[0]][0]) <= 1e-12 * lam:
            lam = grouped[cur[0]][0]
        elif cur:
            spaces.append(tuple(cur))
            cur = []
        cur.append(len(grouped))
        grouped.append((lam, d))
    spaces.append(tuple(cur))
    modes = tuple(
        EigenMode(i + 1, lam, d, manifold.kind) for i, (lam, d) in enumerate(grouped)
    )
    return SpectralBasis(manifold, float(cutoff), modes, tuple(spaces))


def weyl_count(manifold: ManifoldSpec, cutoff: float) -> int:
    """Closed-form count of nonconstant modes with frequency <= cutoff."""
    if manifold.kind == CIRCLE:
        return 2 * int(math.floor(cutoff + 1e-12))
    if manifold.kind == SPHERE:
        lmax = int(math.floor((-1 + math.sqrt(1 + 4 * cutoff * cutoff * (1 + 1e-12))) / 2))
        return lmax * (lmax + 2)
    L1, L2 = manifold.periods
    r1, r2 = cutoff * L1 / TWO_PI, cutoff * L2 / TWO_PI
    count = 0
    for k1 in range(-int(r1) - 1, int(r1) + 2):
        rest = 1.0 - (k1 / r1) ** 2 if r1 > 0 else -1.0
        if rest < -1e-12:
            continue
        k2max = int(math.floor(r2 * math.sqrt(max(rest, 0.0)) + 1e-9))
        count += 2 * k2max + 1
    return count - 1


# ---------------------------------------------------------------------------
# pointwise evaluation


def normalized_legendre(lmax: int, x: np.ndarray) -> np.ndarray:
    """Orthonormal associated Legendre table ``P[l, m, ...]`` for ``0 <= m <= l <= lmax``.

    Normalized so that ``2*pi * integral_{-1}^{1} P[l, m]^2 dx = 1``; built by
    the standard forward recurrences in ``l`` at fixed ``m``.
    """
    x = np.asarray(x, dtype=float)
    s = np.sqrt(np.clip(1.0 - x * x, 0.0, None))
    P = np.zeros((lmax + 1, lmax + 1) + x.shape)
    P[0, 0] = 1.0 / math.sqrt(4.0 * math.pi)
    for m in range(1, lmax + 1):
        P[m, m] = math.sqrt((2 * m + 1) / (2.0 * m)) * s * P[m - 1, m - 1]
    for m in range(0, lmax):
        P[m + 1, m] = math.sqrt(2 * m + 3.0) * x * P[m, m]
    for m in range(0, lmax + 1):
        for l in range(m + 2, lmax + 1):
            a = math.sqrt((4.0 * l * l - 1) / (l * l - m * m))
            b = math.sqrt(((l - 1.0) ** 2 - m * m) / (4.0 * (l - 1) ** 2 - 1))
            P[l, m] = a * (x * P[l - 1, m] - b * P[l - 2, m])
    return P


def _sphere_values(modes: Sequence[EigenMode], pts: np.ndarray) -> np.ndarray:
    pts = np.asarray(pts, dtype=float)
    lmax = max(m.descriptor[0] for m in modes)
    z = np.clip(pts[..., 2], -1.0, 1.0)
    phi = np.arctan2(pts[..., 1], pts[..., 0])
    P = normalized_legendre(lmax, z)
    out = np.empty((len(modes),) + z.shape)
    for i, mode in enumerate(modes):
        l, m = mode.descriptor
        if m == 0:
            out[i] = P[l, 0]
        elif m > 0:
            out[i] = math.sqrt(2.0) * P[l, m] * np.cos(m * phi)
        else:
            out[i] = math.sqrt(2.0) * P[l, -m] * np.sin(-m * phi)
    return out


def _trig(tag, arg):
    return np.cos(arg) if tag == "cos" else np.sin(arg)


def mode_values(modes: Sequence[EigenMode], pts, manifold: ManifoldSpec) -> np.ndarray:
    """Values of several modes at many points, shape ``(len(modes),) + points``."""
    if manifold.kind == SPHERE:
        return _sphere_values(modes, pts)
    pts = np.asarray(pts, dtype=float)
    if manifold.kind == CIRCLE:
        return np.stack([_trig(m.descriptor[1], m.descriptor[0] * pts) for m in modes]) / math.sqrt(math.pi)
    L1, L2 = manifold.periods
    rows = []
    for mode in modes:
        k1, k2, t1, t2 = mode.descriptor
        n1 = math.sqrt((1.0 if k1 == 0 else 2.0) / L1)
        n2 = math.sqrt((1.0 if k2 == 0 else 2.0) / L2)
        fx = _trig(t1, TWO_PI * k1 * pts[..., 0] / L1)
        fy = _trig(t2, TWO_PI * k2 * pts[..., 1] / L2)
        rows.append(n1 * n2 * fx * fy)
    return np.stack(rows)


def eval_mode(mode: EigenMode, point, manifold: ManifoldSpec | None = None):
    """Eigenfunction value at ``point`` (or an array of points)."""
    if manifold is None:
        manifold = {CIRCLE: ManifoldSpec.circle(), SPHERE: ManifoldSpec.sphere()}.get(mode.kind)
        if manifold is None:
            raise ValueError("torus modes need the manifold (periods) to evaluate")
    v = mode_values([mode], point, manifold)[0]
    return float(v) if np.ndim(v) == 0 else v


# ---------------------------------------------------------------------------
# mass matrices


@dataclass(frozen=True)
class MassMatrix:
    """Gram matrix ``M[j, l] = integral over region of phi_j phi_l``.

    ``start`` and ``stop`` are 0-based positions in the basis (half-open).
    """

    start: int
    stop: int
    entries: np.ndarray
    provenance: str
    frequencies: np.ndarray

    @property
    def size(self) -> int:
        return self.stop - self.start

    def restrict(self, start: int, stop: int) -> "MassMatrix":
        a, b = start - self.start, stop - self.start
        if a < 0 or b > self.size or a >= b:
            raise IndexError("restriction outside the stored range")
        return MassMatrix(start, stop, self.entries[a:b, a:b], self.provenance, self.frequencies[a:b])


def _circle_gram(modes, region):
    j = np.array([m.descriptor[0] for m in modes], dtype=float)
    psi = np.array([0.0 if m.descriptor[1] == "cos" else math.pi / 2 for m in modes])
    dk, dp = j[:, None] - j[None, :], psi[:, None] - psi[None, :]
    sk, sp = j[:, None] + j[None, :], psi[:, None] + psi[None, :]
    M = np.zeros((len(modes), len(modes)))
    for arc in region.primitives:
        a, b = arc.start, arc.start + arc.length
        M += 0.5 * (_int_cos(dk, dp, a, b) + _int_cos(sk, sp, a, b)) / math.pi
    return M


def _int_cos(k, psi, a, b):
    """integral_a^b cos(k x - psi) dx, elementwise in k and psi."""
    safe = np.where(k == 0, 1.0, k)
    val = (np.sin(safe * b - psi) - np.sin(safe * a - psi)) / safe
    return np.where(k == 0, (b - a) * np.cos(psi), val)


def polygon_fourier(vertices: np.ndarray, kx: np.ndarray, ky: np.ndarray) -> np.ndarray:
    """integral over the polygon of exp(i (kx x + ky y)), by the divergence theorem."""
    v = np.asarray(vertices, dtype=float)
    e = np.roll(v, -1, axis=0) - v
    k2 = kx * kx + ky * ky
    zero = k2 == 0
    k2s = np.where(zero, 1.0, k2)
    total = np.zeros(np.shape(kx), dtype=complex)
    for p, ed in zip(v, e):
        u = kx * ed[0] + ky * ed[1]
        knu = kx * ed[1] - ky * ed[0]
        small = np.abs(u) < 1e-8
        us = np.where(small, 1.0, u)
        E = np.where(small, 1.0 + 0.5j * u - u * u / 6.0, (np.exp(1j * us) - 1.0) / (1j * us))
        total += -1j * knu / k2s * np.exp(1j * (kx * p[0] + ky * p[1])) * E
    area = 0.5 * np.sum(v[:, 0] * np.roll(v[:, 1], -1) - np.roll(v[:, 0], -1) * v[:, 1])
    return np.where(zero, area, total)


def _torus_gram(modes, region):
    L1, L2 = region.manifold.periods
    n = len(modes)
    k1 = np.array([m.descriptor[0] for m in modes], float) * TWO_PI / L1
    k2 = np.array([m.descriptor[1] for m in modes], float) * TWO_PI / L2
    p1 = np.array([0.0 if m.descriptor[2] == "cos" else math.pi / 2 for m in modes])
    p2 = np.array([0.0 if m.descriptor[3] == "cos" else math.pi / 2 for m in modes])
    norm = np.array(
        [
            math.sqrt((1.0 if m.descriptor[0] == 0 else 2.0) / L1)
            * math.sqrt((1.0 if m.descriptor[1] == 0 else 2.0) / L2)
            for m in modes
        ]
    )
    M = np.zeros((n, n))
    # phi_j phi_l = prod of four cosines = (1/8) sum_{s,u,w = +-1} cos(ax + by - c)
    for s in (1.0, -1.0):
        for u in (1.0, -1.0):
            for w in (1.0, -1.0):
                ax = k1[:, None] + s * k1[None, :]
                bx = p1[:, None] + s * p1[None, :]
                ay = k2[:, None] + u * k2[None, :]
                by = p2[:, None] + u * p2[None, :]
                alpha, beta, c = ax, w * ay, bx + w * by
                for poly in region.primitives:
                    F = polygon_fourier(poly.array, alpha, beta)
                    M += np.real(np.exp(-1j * c) * F) / 8.0
    return M * norm[:, None] * norm[None, :]


def _band_nodes(band: Band, n_theta: int, n_phi: int):
    from .geometry import _orthonormal_pair

    lo, hi = band.levels
    x, w = np.polynomial.legendre.leggauss(n_theta)
    u = 0.5 * (hi - lo) * x + 0.5 * (hi + lo)
    wu = 0.5 * (hi - lo) * w
    phi = TWO_PI * np.arange(n_phi) / n_phi
    a = np.asarray(band.axis)
    e1, e2 = _orthonormal_pair(a)
    r = np.sqrt(np.clip(1 - u * u, 0, None))
    pts = (
        r[:, None, None] * (np.cos(phi)[None, :, None] * e1 + np.sin(phi)[None, :, None] * e2)
        + u[:, None, None] * a
    )
    weights = wu[:, None] * np.full(n_phi, TWO_PI / n_phi)[None, :]
    return pts.reshape(-1, 3), weights.ravel()


def sphere_quadrature_order(lmax: int) -> tuple[int, int]:
    return 2 * (lmax + 2), 4 * (lmax + 1)


def _sphere_gram_at(modes, region, order):
    M = np.zeros((len(modes), len(modes)))
    for band in region.primitives:
        pts, w = _band_nodes(band, *order)
        V = _sphere_values(modes, pts)
        M += (V * w) @ V.T
    return M


def _sphere_gram(modes, region, order=None):
    lmax = max(m.descriptor[0] for m in modes)
    order = order or sphere_quadrature_order(lmax)
    coarse = _sphere_gram_at(modes, region, order)
    for _ in range(MAX_QUAD_DOUBLINGS):
        finer = (2 * order[0], 2 * order[1])
        fine = _sphere_gram_at(modes, region, finer)
        if np.max(np.abs(fine - coarse)) < QUAD_TOL:
            return coarse, order
        order, coarse = finer, fine
    raise QuadratureError(
        f"sphere quadrature did not settle below {QUAD_TOL}", coarse=coarse, fine=fine
    )


def cache_key(basis: SpectralBasis, region: Region, start: int, stop: int, order=None) -> str:
    payload = {
        "manifold": [basis.manifold.kind, list(basis.manifold.periods)],
        "region": region.to_dict(),
        "range": [start, stop],
        "modes": [list(m.descriptor) for m in basis.modes[start:stop]],
        "order": list(order) if order else None,
    }
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()


def default_cache_dir() -> Path | None:
    d = os.environ.get(CACHE_ENV)
    return Path(d) if d else None


def _cache_path(cache_dir: Path, key: str) -> Path:
    return Path(cache_dir) / f"mass-{key[:32]}.bin"


def write_cache(path: Path, key: str, M: np.ndarray, provenance: str) -> None:
    data = np.ascontiguousarray(M, dtype="<f8").tobytes()
    digest = hashlib.sha256(data).hexdigest()
    header = f"obsconst-mass 1 {key} {digest} {M.shape[0]} {M.shape[1]} {provenance}\n"
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(".tmp")
    tmp.write_bytes(header.encode() + data)
    tmp.replace(path)


def read_cache(path: Path, key: str):
    """Return ``(matrix, provenance)`` or ``None`` when missing or unusable."""
    if not path.exists():
        return None
    raw = path.read_bytes()
    try:
        nl = raw.index(b"\n")
        magic, version, hkey, digest, rows, cols, prov = raw[:nl].decode().split(" ")
        data = raw[nl + 1 :]
        if magic != "obsconst-mass" or version != "1" or hkey != key:
            raise ValueError("header mismatch")
        if hashlib.sha256(data).hexdigest() != digest:
            raise ValueError("payload hash mismatch")
        M = np.frombuffer(data, dtype="<f8").reshape(int(rows), int(cols)).copy()
    except ValueError as exc:
        log.warning("discarding corrupt mass-matrix cache %s (%s)", path, exc)
        return None
    return M, prov


def mass_matrix(
    basis: SpectralBasis,
    region: Region,
    start: int = 0,
    stop: int | None = None,
    cache_dir: Path | str | None = None,
    order: tuple[int, int] | None = None,
) -> MassMatrix:
    """Gram matrix of modes ``basis.modes[start:stop]`` over ``region``.

    Circle and torus entries are closed-form; sphere entries use tensor
    Gauss-Legendre x uniform-azimuth quadrature in each band's own frame,
    refined by doubling until entries settle below 1e-8.
    """
    stop = len(basis) if stop is None else stop
    if not 0 <= start < stop <= len(basis):
        raise IndexError(f"mode range [{start}, {stop}) outside basis of size {len(basis)}")
    if region.manifold != basis.manifold:
        raise ValueError("region and basis live on different manifolds")
    modes = basis.modes[start:stop]
    freqs = np.array([m.frequency for m in modes])
    if not region.primitives:
        return MassMatrix(start, stop, np.zeros((len(modes),) * 2), "analytic", freqs)
    if cache_dir is None:
        cache_dir = default_cache_dir()
    key = path = None
    if cache_dir is not None:
        key = cache_key(basis, region, start, stop, order)
        path = _cache_path(Path(cache_dir), key)
        hit = read_cache(path, key)
        if hit is not None:
            return MassMatrix(start, stop, hit[0], hit[1], freqs)
    kind = basis.manifold.kind
    if kind == CIRCLE:
        M, prov = _circle_gram(modes, region), "analytic"
    elif kind == TORUS:
        M, prov = _torus_gram(modes, region), "analytic"
    else:
        M, used = _sphere_gram(modes, region, order)
        prov = f"quadrature({used[0]}x{used[1]})"
    M = 0.5 * (M + M.T)
    if path is not None:
        write_cache(path, key, M, prov)
    return MassMatrix(start, stop, M, prov, freqs)

"""Sweeps over observation time and numerical checks of the asymptotic statements.

Every verdict here is a finite-resolution consistency check: limits in ``T``
or ``N`` cannot be decided from a truncation, so PASS means the computed
numbers do not contradict the stated property at the recorded tolerance.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .geometry import CIRCLE, SPHERE, Arc, ManifoldSpec, Region
from .quadform import band_constant, assemble_form, g1 as compute_g1, offdiag_decay_bound
from .raytrace import SearchConfig, alpha_bracket
from .spectral import QUAD_TOL, SpectralBasis, build_basis, mass_matrix

PASS, FAIL, INFO = "PASS", "FAIL", "INFO"
EIG_TOL = 1e-10
POSITIVITY_FLOOR = 1e-8
POSITIVITY_TRIGGER = 0.05
TREND_TOL = 1e-12


@dataclass(frozen=True)
class Verdict:
    name: str
    status: str
    invariant: str
    slack: float
    tolerance: float
    note: str = ""

    @property
    def passed(self) -> bool:
        return self.status != FAIL


@dataclass(frozen=True)
class Level:
    """A truncation ending on a complete eigenspace."""

    n_modes: int
    frequency: float
    g1: float


@dataclass
class ObservabilityReport:
    manifold: ManifoldSpec
    region: Region
    cutoff: float
    times: tuple
    seed: int
    search: SearchConfig
    provenance: str
    levels: list
    constants: np.ndarray  # (len(times), len(levels)): C_T^{[1,N]} / T
    brackets: list  # AlphaBracket per T
    closed_form: "ClosedForm | None"
    gap: "GapCheck"
    verdicts: list = field(default_factory=list)
    tolerances: dict = field(default_factory=dict)

    @property
    def g1(self) -> float:
        return self.levels[-1].g1

    @property
    def passed(self) -> bool:
        return all(v.passed for v in self.verdicts)

    def alpha_limit(self) -> tuple[float, float, str]:
        """Bracket at the largest ``T``, with a note on its monotonicity along the grid."""
        lo = [b.lo for b in self.brackets]
        hi = [b.hi for b in self.brackets]
        mono = all(y >= x - TREND_TOL for x, y in zip(lo, lo[1:])) and all(
            y >= x - TREND_TOL for x, y in zip(hi, hi[1:])
        )
        return lo[-1], hi[-1], "nondecreasing in T" if mono else "not monotone in T"

    def predicted_limit(self, i: int = -1) -> tuple[float, float]:
        """``min(g1, g2) / 2`` with ``g2`` taken from the interior and closure searches."""
        b = self.brackets[i]
        return 0.5 * min(self.g1, b.interior.value), 0.5 * min(self.g1, b.closure.value)


def _levels(basis: SpectralBasis, per_space: np.ndarray) -> list[Level]:
    out = []
    running = math.inf
    for k, space in enumerate(basis.eigenspaces):
        running = min(running, float(per_space[k]))
        out.append(Level(space[-1] + 1, basis.modes[space[0]].frequency, running))
    return out


def _check_times(times) -> tuple:
    ts = tuple(float(t) for t in times)
    if len(ts) < 3:
        raise ValueError("a sweep needs at least 3 observation times")
    if any(t <= 0 for t in ts) or any(b <= a for a, b in zip(ts, ts[1:])):
        raise ValueError("observation times must be positive and increasing")
    return ts


def sweep(
    manifold: ManifoldSpec,
    region: Region,
    cutoff: float,
    times: Sequence[float],
    search: SearchConfig | None = None,
    seed: int = 0,
    cache_dir: str | Path | None = None,
    quadrature_order=None,
) -> ObservabilityReport:
    """Tabulate truncated constants, ``g1``, ``g2`` and the high-frequency bracket over ``times``."""
    ts = _check_times(times)
    if region.manifold != manifold:
        raise ValueError("region lives on a different manifold")
    search = search or SearchConfig()
    basis = build_basis(manifold, cutoff)
    if len(basis.eigenspaces) < 2:
        raise ValueError("cutoff must admit at least two eigenspaces")
    mass = mass_matrix(basis, region, cache_dir=cache_dir, order=quadrature_order)
    levels = _levels(basis, compute_g1(basis, mass).per_eigenspace)

    table = np.empty((len(ts), len(levels)))
    for i, T in enumerate(ts):
        for j, lev in enumerate(levels):
            table[i, j] = band_constant(assemble_form(mass.restrict(0, lev.n_modes), T)).per_time
    brackets = [alpha_bracket(region, T, search, seed=seed) for T in ts]

    closed = None
    if manifold.kind == CIRCLE:
        closed = torus_closed_form(region, int(math.floor(cutoff)))
    rep = ObservabilityReport(
        manifold=manifold,
        region=region,
        cutoff=float(cutoff),
        times=ts,
        seed=seed,
        search=search,
        provenance=mass.provenance,
        levels=levels,
        constants=table,
        brackets=brackets,
        closed_form=closed,
        gap=gap_check(basis),
    )
    rep.tolerances = {
        "eigensolver": EIG_TOL,
        "mass_quadrature": 0.0 if mass.provenance == "analytic" else QUAD_TOL,
        "long_time": offdiag_decay_bound(basis.frequencies, ts[-1]),
        "trend": TREND_TOL,
        "positivity_floor": POSITIVITY_FLOOR,
        "g2_stall": 1e-12,
    }
    rep.verdicts = _verdicts(rep)
    return rep


def _verdicts(rep: ObservabilityReport) -> list[Verdict]:
    tol = rep.tolerances
    half_g1 = 0.5 * np.array([lev.g1 for lev in rep.levels])
    out = []

    slack = float(np.min(half_g1[None, :] - rep.constants))
    out.append(
        Verdict(
            "finite_time_bound",
            PASS if slack >= -tol["eigensolver"] else FAIL,
            "C_T[1,N]/T <= g1[<=N]/2 for every T and N",
            slack,
            tol["eigensolver"],
        )
    )

    lo, hi = rep.predicted_limit()
    observed = float(rep.constants[-1, -1])
    below = lo - observed
    out.append(
        Verdict(
            "long_time_limit",
            PASS if below <= tol["long_time"] else FAIL,
            "C_T[1,N]/T at the largest T is not below min(g1, g2)/2 beyond the finite-T allowance",
            tol["long_time"] - below,
            tol["long_time"],
            f"observed {observed:.6g}, predicted [{lo:.6g}, {hi:.6g}]; "
            "excess above the prediction is allowed truncation slack",
        )
    )

    dist = []
    for i in range(len(rep.times)):
        plo, phi = rep.predicted_limit(i)
        c = rep.constants[i, -1]
        dist.append(max(plo - c, c - phi, 0.0))
    rises = [b - a for a, b in zip(dist, dist[1:])]
    worst = float(max(rises))
    out.append(
        Verdict(
            "trend_to_limit",
            PASS if worst <= tol["trend"] else FAIL,
            "distance from C_T[1,N]/T to the predicted interval does not grow with T",
            0.0 - worst,
            tol["trend"],
            "distances " + ", ".join(f"{d:.6g}" for d in dist),
        )
    )

    if rep.manifold.kind in (CIRCLE, SPHERE):
        gaps = half_g1[None, :] - rep.constants
        worst = float(np.max(np.diff(np.abs(gaps), axis=0)))
        out.append(
            Verdict(
                "uniform_gap_trend",
                PASS if worst <= tol["trend"] else FAIL,
                "|C_T[1,N]/T - g1[<=N]/2| decreases in T at fixed N (uniform spectral gap)",
                0.0 - worst,
                tol["trend"],
            )
        )
    else:
        out.append(
            Verdict(
                "uniform_gap_trend",
                INFO,
                "not applicable: frequency gaps are not uniform on this manifold",
                float("nan"),
                tol["trend"],
                f"gap check {rep.gap.verdict}",
            )
        )

    slacks = []
    for b in rep.brackets:
        slacks += [b.hi - b.lo, b.lo, 0.5 - b.hi, b.lo - 0.5 * b.interior.value]
    slack = float(min(slacks))
    out.append(
        Verdict(
            "alpha_bracket",
            PASS if slack >= -1e-12 else FAIL,
            "g2(interior)/2 <= alpha bracket <= g2(closure)/2 within [0, 1/2]",
            slack,
            1e-12,
            "both ends are one-sided search estimates",
        )
    )

    active = [i for i, b in enumerate(rep.brackets) if b.interior.value > POSITIVITY_TRIGGER]
    if active:
        m = float(np.min(rep.constants[active] * np.array(rep.times)[active, None]))
        out.append(
            Verdict(
                "positivity_witness",
                PASS if m > POSITIVITY_FLOOR else FAIL,
                f"C_T[1,N] > {POSITIVITY_FLOOR:g} whenever g2(interior) > {POSITIVITY_TRIGGER:g}",
                m - POSITIVITY_FLOOR,
                POSITIVITY_FLOOR,
            )
        )
    else:
        out.append(
            Verdict(
                "positivity_witness",
                INFO,
                f"not triggered: g2(interior) <= {POSITIVITY_TRIGGER:g} at every T",
                float("nan"),
                POSITIVITY_FLOOR,
            )
        )

    scan = rep.brackets[-1].grazing
    out.append(
        Verdict(
            "no_grazing",
            INFO,
            "heuristic search for rays spending positive time on the boundary",
            max(scan.boundary_times, default=0.0) + scan.sampled_boundary_time,
            0.0,
            f"{scan.verdict}: {scan.note}",
        )
    )
    return out


# ---------------------------------------------------------------------------
# circle closed form


@dataclass(frozen=True)
class ClosedForm:
    g1: float
    predicted_limit: float
    as_printed: float
    j: int


def torus_closed_form(region: Region, jmax: int) -> ClosedForm:
    """Closed-form ``g1`` of a finite arc union on the circle, sup over ``1 <= j <= jmax``.

    ``as_printed`` omits the factor 1/2 on the square root; it is emitted
    only so the discrepancy with the eigenspace computation stays visible.
    """
    if region.manifold.kind != CIRCLE or not all(isinstance(p, Arc) for p in region.primitives):
        raise ValueError("closed form needs a union of arcs on the circle")
    if jmax < 1:
        raise ValueError("jmax must be >= 1")
    length = sum(p.measure() for p in region.primitives)
    best, arg = 0.0, 1
    for j in range(1, jmax + 1):
        s = c = 0.0
        for p in region.primitives:
            a, b = 2 * j * p.start, 2 * j * (p.start + p.length)
            s += (math.cos(a) - math.cos(b)) / (2 * j)
            c += (math.sin(b) - math.sin(a)) / (2 * j)
        r = math.hypot(s, c)
        if r > best:
            best, arg = r, j
    value = (0.5 * length - 0.5 * best) / math.pi
    printed = (0.5 * length - best) / math.pi
    return ClosedForm(value, 0.5 * value, printed, arg)


# ---------------------------------------------------------------------------
# Montgomery-Vaughan


@dataclass(frozen=True)
class MVResult:
    holds: bool
    ratio: float  # worst over instances of the sharp (operator-norm) ratio
    sample_ratio: float  # worst over instances with the drawn coefficient vectors
    instances: int
    violations: int


def _mv_frequencies(rng, delta, n, hilbert):
    if hilbert:
        return delta * np.arange(n, dtype=float)
    extra = np.where(rng.random(n - 1) < 0.5, 0.0, rng.exponential(0.5 * delta, n - 1))
    return rng.uniform(-10, 10) + np.concatenate([[0.0], np.cumsum(delta + extra)])


def mv_check(delta: float, n: int, seed: int = 0, instances: int = 1, hilbert: bool = False) -> MVResult:
    """Test ``|sum_{j!=k} a_j conj(b_k)/(lam_j - lam_k)|^2 <= (pi/delta)^2 |a|^2 |b|^2``.

    Each instance draws frequencies with consecutive gaps ``>= delta`` and
    complex ``a, b``. Besides the drawn vectors, the ratio is also evaluated at
    the worst pair, whose value is the squared operator norm of the kernel.
    """
    if delta <= 0 or n < 2:
        raise ValueError("need delta > 0 and n >= 2")
    rng = np.random.default_rng(seed)
    rhs_scale = (math.pi / delta) ** 2
    worst = sample = 0.0
    bad = 0
    for _ in range(instances):
        lam = _mv_frequencies(rng, delta, n, hilbert)
        d = lam[:, None] - lam[None, :]
        np.fill_diagonal(d, np.inf)
        K = 1.0 / d
        a = rng.normal(size=n) + 1j * rng.normal(size=n)
        b = rng.normal(size=n) + 1j * rng.normal(size=n)
        lhs = abs(a @ K @ np.conj(b)) ** 2
        r1 = lhs / (rhs_scale * np.vdot(a, a).real * np.vdot(b, b).real)
        r2 = float(np.linalg.eigvalsh(K.T @ K)[-1]) / rhs_scale
        bad += int(r1 > 1.0 or r2 > 1.0)
        sample, worst = max(sample, r1), max(worst, r2)
    return MVResult(bad == 0, worst, sample, instances, bad)


# ---------------------------------------------------------------------------
# coherent states


@dataclass(frozen=True)
class CoherentState:
    """Gaussian packet ``(k/pi)^{1/4} exp(i k (x - x0) xi0 - k (x - x0)^2 / 2)`` on the line."""

    x0: float
    xi0: float
    k: float

    def __call__(self, x):
        u = np.asarray(x, float) - self.x0
        return (self.k / math.pi) ** 0.25 * np.exp(1j * self.k * u * self.xi0 - 0.5 * self.k * u * u)

    def tail_mass(self, half_width: float) -> float:
        return math.erfc(math.sqrt(self.k) * half_width)

    def nodes(self, half_width: float, n: int = 200):
        t, w = np.polynomial.legendre.leggauss(n)
        return self.x0 + half_width * t, half_width * w

    def norm(self, half_width: float | None = None, n: int = 200) -> float:
        x, w = self.nodes(half_width or 8.0 / math.sqrt(self.k), n)
        return math.sqrt(float(np.sum(w * np.abs(self(x)) ** 2)))


@dataclass(frozen=True)
class CoherentTable:
    ks: tuple
    values: np.ndarray
    errors: np.ndarray
    target: float
    norms: np.ndarray
    rate_constant: float
    slope: float
    verdict: str


def _expectation(state: CoherentState, symbol, half_width, n, widenings):
    w = half_width
    for _ in range(widenings + 1):
        if state.tail_mass(w) <= 1e-12:
            x, wt = state.nodes(w, n)
            dens = np.abs(state(x)) ** 2
            return float(np.sum(wt * symbol(x) * dens)), float(np.sqrt(np.sum(wt * dens)))
        w *= 2.0
    raise ValueError(f"Gaussian mass outside the quadrature window exceeds 1e-12 for k={state.k}")


def coherent_check(
    symbol: Callable,
    x0: float = 0.0,
    xi0: float = 0.0,
    ks: Sequence[float] = (10, 100, 1000),
    half_width: float | None = None,
    nodes: int = 200,
    widenings: int = 3,
) -> CoherentTable:
    """``<a u_k, u_k>`` for a multiplication symbol ``a(x)`` along a schedule of ``k``.

    PASS when ``|value - a(x0)|`` decreases and stays below ``C / sqrt(k)``
    with ``C`` calibrated at the first ``k``.
    """
    ks = tuple(ks)
    target = float(symbol(np.array([x0]))[0])
    vals, norms = [], []
    for k in ks:
        st = CoherentState(x0, xi0, k)
        v, nrm = _expectation(st, symbol, half_width or 8.0 / math.sqrt(k), nodes, widenings)
        vals.append(v)
        norms.append(nrm)
    vals = np.array(vals)
    err = np.abs(vals - target)
    sk = np.sqrt(np.array(ks, float))
    C = float(err[0] * sk[0])
    tiny = 1e-14
    decreasing = all(b < a or (a <= tiny and b <= tiny) for a, b in zip(err, err[1:]))
    within = bool(np.all(err <= C / sk * (1 + 1e-9) + tiny))
    if np.all(err > tiny) and len(ks) > 1:
        slope = float(np.polyfit(np.log(ks), np.log(err), 1)[0])
    else:
        slope = float("nan")
    return CoherentTable(ks, vals, err, target, np.array(norms), C, slope, PASS if decreasing and within else FAIL)


# ---------------------------------------------------------------------------
# spectral gap


@dataclass(frozen=True)
class GapCheck:
    gamma_min: float
    verdict: str
    note: str


def gap_check(basis: SpectralBasis) -> GapCheck:
    """Smallest distinct-frequency gap in the truncation.

    A truncation can only witness a uniform gap, never certify it; for the
    flat torus a shrinking gap under a halved cutoff is reported as a failure.
    """
    if len(basis) == 0:
        raise ValueError("empty basis")
    gamma = basis.gap if len(basis.distinct_frequencies) > 1 else math.inf
    kind = basis.manifold.kind
    if kind == CIRCLE:
        return GapCheck(gamma, "WITNESSED", "integer frequencies: gap 1 holds for the full spectrum")
    if kind == SPHERE:
        return GapCheck(gamma, "WITNESSED", "consecutive sqrt(l(l+1)) gaps decrease to 1 from above")
    half = build_basis(basis.manifold, 0.5 * basis.cutoff)
    g_half = half.gap if len(half.distinct_frequencies) > 1 else math.inf
    if gamma < g_half:
        return GapCheck(gamma, "FAIL-WITNESSED", f"gap shrinks from {g_half:.6g} at half the cutoff")
    return GapCheck(gamma, "INCONCLUSIVE", "gap did not shrink between half and full cutoff")


__all__ = [
    "ObservabilityReport",
    "Verdict",
    "Level",
    "sweep",
    "ClosedForm",
    "torus_closed_form",
    "MVResult",
    "mv_check",
    "CoherentState",
    "CoherentTable",
    "coherent_check",
    "GapCheck",
    "gap_check",
]

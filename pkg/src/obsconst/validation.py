"""Validation suites behind ``obsconst validate``.

Each check returns a :class:`Check` with the measured quantity and the bound
it was held to; a suite passes when every check does.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import config as cfg
from .analysis import coherent_check, mv_check
from .quadform import assemble_form, band_constant, g1, min_eig_hermitian
from .raytrace import g2
from .spectral import build_basis, mass_matrix

SUITES = ("mv", "coherent", "invariants")
MV_DELTAS = (0.5, 1.0, 2.0)
MV_N = 200
MV_INSTANCES = 1000
COHERENT_KS = (10, 100, 1000)
INV_TOL = 1e-10


@dataclass(frozen=True)
class Check:
    suite: str
    name: str
    passed: bool
    measured: float
    bound: float
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{self.suite}\t{self.name}\t{status}\t{float(self.measured)!r}\t{float(self.bound)!r}\t{self.detail}"


def mv_suite(seed: int = 0, instances: int = MV_INSTANCES, n: int = MV_N) -> list[Check]:
    out = []
    for k, delta in enumerate(MV_DELTAS):
        r = mv_check(delta, n, seed=seed + k, instances=instances)
        out.append(
            Check("mv", f"random_gaps[delta={delta:g}]", r.holds, r.ratio, 1.0, f"violations {r.violations}/{r.instances}; sampled max {r.sample_ratio:.6g}")
        )
    r = mv_check(1.0, n, seed=seed + len(MV_DELTAS), instances=instances, hilbert=True)
    out.append(Check("mv", "hilbert[lambda_j=j]", r.holds, r.ratio, 1.0, f"violations {r.violations}/{r.instances}"))
    return out


def coherent_oracle(k: float) -> float:
    """``int cos(x) |u_k(x)|^2 dx`` centered at 0, evaluated in closed form."""
    return math.exp(-1.0 / (4.0 * k))


def coherent_suite(seed: int = 0) -> list[Check]:
    out = []
    tab = coherent_check(np.cos, 0.0, 0.0, COHERENT_KS)
    dev = max(abs(v - coherent_oracle(k)) for v, k in zip(tab.values, tab.ks))
    out.append(Check("coherent", "cos_vs_closed_form", dev <= 1e-10, dev, 1e-10))
    out.append(
        Check(
            "coherent",
            "cos_concentration",
            tab.verdict == "PASS",
            float(tab.errors[-1]),
            tab.rate_constant / math.sqrt(tab.ks[-1]),
            f"C/sqrt(k) with C={tab.rate_constant:.6g}; log-log slope {tab.slope:.4f}",
        )
    )
    dev = float(np.max(np.abs(tab.norms - 1.0)))
    out.append(Check("coherent", "normalization", dev <= 1e-10, dev, 1e-10))
    one = coherent_check(lambda x: np.ones_like(x), 0.0, 0.0, COHERENT_KS)
    dev = float(np.max(np.abs(one.values - 1.0)))
    out.append(Check("coherent", "constant_symbol", dev <= 1e-10, dev, 1e-10))
    lin = coherent_check(lambda x: x, 0.0, 1.0, COHERENT_KS)
    dev = float(np.max(np.abs(lin.values)))
    out.append(Check("coherent", "odd_symbol", dev <= 1e-12, dev, 1e-12))
    return out


def _worst(values, default=math.inf):
    return min(values, default=default)


def invariants_for(run: cfg.RunConfig, label: str) -> list[Check]:
    """Truncation invariants over one configuration's ``(T, N)`` grid."""
    basis = build_basis(run.manifold, run.cutoff)
    mass = mass_matrix(basis, run.region, order=run.quadrature)
    res = g1(basis, mass)
    stops = [s[-1] + 1 for s in basis.eigenspaces]
    half_g1 = 0.5 * np.minimum.accumulate(res.per_eigenspace)
    s = "invariants"
    out = []

    M = mass.entries
    ev = np.linalg.eigvalsh(M)
    sym = float(np.max(np.abs(M - M.T)))
    slack = min(float(ev[0]), 1.0 - float(ev[-1]))
    out.append(Check(s, f"{label}:mass_spectrum_in_[0,1]", slack >= -INV_TOL and sym <= INV_TOL, slack, -INV_TOL))

    bound_slack, mono_slack, range_slack, band_slack, herm = [], [], [], [], []
    for T in run.times:
        consts = []
        for k, n in enumerate(stops):
            form = assemble_form(mass.restrict(0, n), T)
            herm.append(float(np.max(np.abs(form.H - form.H.conj().T))))
            c = band_constant(form).value
            consts.append(c)
            bound_slack.append(half_g1[k] - c / T)
            range_slack.append(min(c, T - c))
        mono_slack += [a - b for a, b in zip(consts, consts[1:])]
        # high band (N, M] with M the full truncation: nondecreasing as N grows
        M_stop = stops[-1]
        band = [consts[-1]]
        for n in stops[:-1]:
            band.append(band_constant(assemble_form(mass.restrict(n, M_stop), T)).value)
        band_slack += [b - a for a, b in zip(band, band[1:])]
    tol_abs = INV_TOL * max(run.times)
    out.append(Check(s, f"{label}:finite_time_bound", _worst(bound_slack) >= -INV_TOL, _worst(bound_slack), -INV_TOL, f"{len(bound_slack)} (T,N) pairs"))
    out.append(Check(s, f"{label}:monotone_in_N", _worst(mono_slack) >= -tol_abs, _worst(mono_slack), -tol_abs))
    out.append(Check(s, f"{label}:range_[0,T]", _worst(range_slack) >= -tol_abs, _worst(range_slack), -tol_abs))
    out.append(Check(s, f"{label}:high_band_monotone", _worst(band_slack) >= -tol_abs, _worst(band_slack), -tol_abs))
    out.append(Check(s, f"{label}:form_hermitian", max(herm) <= INV_TOL, max(herm), INV_TOL))
    mu, _ = min_eig_hermitian(assemble_form(mass, run.times[0], basis).H)
    out.append(Check(s, f"{label}:form_semidefinite", mu >= -INV_TOL, mu, -INV_TOL))

    if run.manifold.kind == "circle":
        for T in run.times:
            gi = g2(run.region.interior(), T, run.search).value
            if gi > 0.05:
                c = min(band_constant(assemble_form(mass.restrict(0, n), T)).value for n in stops)
                out.append(Check(s, f"{label}:positivity_witness[T={T:g}]", c > 1e-8, c, 1e-8))
    return out


def invariants_suite(seed: int = 0) -> list[Check]:
    out = []
    for name in cfg.PRESETS:
        out += invariants_for(cfg.preset(name), name)
    return out


def run(suite: str, seed: int = 0) -> list[Check]:
    if suite == "all":
        return mv_suite(seed) + coherent_suite(seed) + invariants_suite(seed)
    if suite == "mv":
        return mv_suite(seed)
    if suite == "coherent":
        return coherent_suite(seed)
    if suite == "invariants":
        return invariants_suite(seed)
    raise ValueError(f"unknown suite {suite!r}")

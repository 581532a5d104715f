import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given
from hypothesis import strategies as st

from obsconst import quadform
from obsconst.geometry import Arc, Band, ManifoldSpec, Polygon, Region, full_region
from obsconst.quadform import (
    EigenSolverError,
    NotHermitianError,
    assemble_form,
    band_constant,
    constant_band,
    constant_upto,
    form_value,
    ft,
    g1,
    min_eig_hermitian,
    offdiag_decay_bound,
    richardson,
)
from obsconst.spectral import build_basis, mass_matrix, mode_values

CIRCLE_M = ManifoldSpec.circle()
TORUS_M = ManifoldSpec.torus()
SPHERE_M = ManifoldSpec.sphere()
HALF = Region(CIRCLE_M, [Arc(0.0, math.pi)])


# --- independent oracles ----------------------------------------------------------------------


def sturm_min_eig(H, tol=1e-14):
    """Smallest eigenvalue by Sturm-count bisection on a Householder tridiagonal form."""
    Tm = scipy.linalg.hessenberg(np.asarray(H, complex))
    d = np.real(np.diag(Tm))
    e2 = np.abs(np.diag(Tm, -1)) ** 2
    n = len(d)

    def below(x):
        count, q = 0, 1.0
        for i in range(n):
            q = d[i] - x - (e2[i - 1] / q if i else 0.0)
            if q == 0.0:
                q = 1e-300
            count += q < 0
        return count

    r = float(np.max(np.sum(np.abs(H), axis=1)))
    lo, hi = -r - 1, r + 1
    while hi - lo > tol * max(1.0, r):
        mid = 0.5 * (lo + hi)
        if below(mid) >= 1:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def direct_average(basis, region, T, a, b, nt=160, nx=80):
    """(1/T) int_0^T int_omega |y(t,x)|^2 dx dt by Gauss-Legendre in t and x (circle arcs)."""
    lam = basis.frequencies
    tx, tw = np.polynomial.legendre.leggauss(nt)
    # split [0, T] into panels so each holds only a few oscillations
    panels = max(1, int(math.ceil(T * lam.max() / 20)))
    total = 0.0
    for arc in region.primitives:
        xx, xw = np.polynomial.legendre.leggauss(nx)
        x = arc.start + 0.5 * arc.length * (xx + 1)
        wx = 0.5 * arc.length * xw
        phi = mode_values(basis.modes, x, region.manifold)  # (modes, nx)
        for p in range(panels):
            t0, t1 = T * p / panels, T * (p + 1) / panels
            t = t0 + 0.5 * (t1 - t0) * (tx + 1)
            wt = 0.5 * (t1 - t0) * tw
            coef = a[:, None] * np.exp(1j * lam[:, None] * t) + b[:, None] * np.exp(-1j * lam[:, None] * t)
            y = coef.T @ phi  # (nt, nx)
            total += float(np.sum(wt[:, None] * wx[None, :] * np.abs(y) ** 2))
    return total / T


# --- f_T --------------------------------------------------------------------------------------


def test_ft_examples():
    assert ft(0.0, 3.0) == 1.0
    assert abs(ft(1.0, 2 * math.pi)) < 1e-15
    with pytest.raises(ValueError):
        ft(1.0, 0.0)


def test_ft_series_branch_is_continuous():
    T = 10.0
    for x in (0.99e-7, 1.01e-7, 3e-8):
        u = T * x
        exact = complex(np.expm1(1j * u) / (1j * u)) if u else 1.0
        assert abs(ft(x, T) - exact) < 1e-15


def test_ft_bound_random():
    rng = np.random.default_rng(0)
    x = rng.uniform(-50, 50, 10_000)
    T = rng.uniform(0.1, 200, 10_000)
    vals = np.array([abs(ft(xi, Ti)) for xi, Ti in zip(x, T)])
    assert np.all(vals <= np.minimum(1.0, 2.0 / (T * np.abs(x))) + 1e-15)


def test_ft_vectorized_matches_scalar():
    xs = np.linspace(-3, 3, 41)
    np.testing.assert_allclose(ft(xs, 7.0), [ft(float(v), 7.0) for v in xs], rtol=0, atol=1e-15)


# --- assembly ---------------------------------------------------------------------------------


def test_full_region_blocks_are_identity():
    b = build_basis(CIRCLE_M, 5)
    form = assemble_form(mass_matrix(b, full_region(CIRCLE_M)), 13.0, b)
    np.testing.assert_allclose(form.A, np.eye(len(b)), atol=1e-15)


def test_single_mode_value_is_mass_entry():
    b = build_basis(CIRCLE_M, 3)
    r = Region(CIRCLE_M, [Arc(0.2, 1.7)])
    mass = mass_matrix(b, r)
    form = assemble_form(mass, 9.0)
    for j in range(len(b)):
        a = np.zeros(len(b), complex)
        a[j] = 1.0
        v = form_value(form, a, np.zeros(len(b)))
        assert v == pytest.approx(mass.entries[j, j], abs=1e-14)
        assert direct_average(b, r, 9.0, a, np.zeros(len(b))) == pytest.approx(v, rel=1e-10)


def test_first_circle_eigenspace_on_half_arc():
    b = build_basis(CIRCLE_M, 1)
    form = assemble_form(mass_matrix(b, HALF), 2 * math.pi)
    np.testing.assert_allclose(form.A, 0.5 * np.eye(2), atol=1e-15)
    assert np.max(np.abs(form.B)) <= abs(ft(2.0, 2 * math.pi)) * 0.5 + 1e-15


def test_basis_range_mismatch_rejected():
    b = build_basis(CIRCLE_M, 4)
    mass = mass_matrix(b, HALF, 2, 6)
    with pytest.raises(ValueError):
        assemble_form(mass, 5.0, build_basis(CIRCLE_M, 2))


def test_form_value_against_direct_integration():
    b = build_basis(CIRCLE_M, 6)
    r = Region(CIRCLE_M, [Arc(0.5, 2.0), Arc(3.5, 1.0)])
    form = assemble_form(mass_matrix(b, r), 11.0)
    rng = np.random.default_rng(1)
    for _ in range(10):
        a = rng.normal(size=len(b)) + 1j * rng.normal(size=len(b))
        c = rng.normal(size=len(b)) + 1j * rng.normal(size=len(b))
        assert form_value(form, a, c) == pytest.approx(direct_average(b, r, 11.0, a, c), rel=1e-9)


def test_difference_kernel_in_cross_block_would_fail_the_oracle():
    b = build_basis(CIRCLE_M, 3)
    r = Region(CIRCLE_M, [Arc(0.5, 2.0)])
    mass = mass_matrix(b, r)
    T = 4.0
    form = assemble_form(mass, T)
    lam = b.frequencies
    m = len(b)
    wrong = form.H.copy()
    wrong[:m, m:] = ft(lam[:, None] - lam[None, :], T) * mass.entries
    wrong[m:, :m] = wrong[:m, m:].conj().T
    rng = np.random.default_rng(2)
    a = rng.normal(size=m) + 1j * rng.normal(size=m)
    c = rng.normal(size=m) + 1j * rng.normal(size=m)
    truth = direct_average(b, r, T, a, c)
    w = np.conj(np.concatenate([a, c]))
    assert abs(np.vdot(w, wrong @ w).real - truth) > 1e-3
    assert form_value(form, a, c) == pytest.approx(truth, rel=1e-10)


# --- eigen-solver -----------------------------------------------------------------------------


def test_min_eig_examples():
    mu, v = min_eig_hermitian(np.eye(4))
    assert mu == pytest.approx(1.0) and np.linalg.norm(v) == pytest.approx(1.0)
    mu, v = min_eig_hermitian(np.diag([3.0, 1.0, 2.0]))
    assert mu == pytest.approx(1.0)
    assert abs(v[1]) == pytest.approx(1.0)


@pytest.mark.parametrize("seed", range(5))
def test_min_eig_matches_sturm_bisection(seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(20, 20)) + 1j * rng.normal(size=(20, 20))
    H = X + X.conj().T
    mu, v = min_eig_hermitian(H)
    assert mu == pytest.approx(sturm_min_eig(H), abs=1e-9)
    assert np.linalg.norm(H @ v - mu * v) <= 1e-10 * np.linalg.norm(H, 2)


def test_min_eig_rejects_non_hermitian():
    with pytest.raises(NotHermitianError):
        min_eig_hermitian(np.array([[1.0, 2.0], [0.0, 1.0]]))
    with pytest.raises(NotHermitianError):
        min_eig_hermitian(np.ones((2, 3)))


def test_min_eig_solver_failure_is_reported(monkeypatch):
    def boom(_):
        raise np.linalg.LinAlgError("no convergence")

    monkeypatch.setattr(quadform.np.linalg, "eigh", boom)
    with pytest.raises(EigenSolverError):
        min_eig_hermitian(np.eye(3))


# --- band constants ---------------------------------------------------------------------------


def test_full_region_constant_near_half_T():
    b = build_basis(CIRCLE_M, 10)
    c = band_constant(assemble_form(mass_matrix(b, full_region(CIRCLE_M)), 50.0))
    assert abs(c.per_time - 0.5) < 0.02
    # the minimizer realizes the constant in the direct oracle
    val = direct_average(b, full_region(CIRCLE_M), 50.0, c.a, c.b)
    norm2 = np.vdot(c.a, c.a).real + np.vdot(c.b, c.b).real
    assert 50.0 * val / (2 * norm2) == pytest.approx(c.value, rel=1e-8)


def test_empty_region_constant_zero():
    b = build_basis(CIRCLE_M, 4)
    c = band_constant(assemble_form(mass_matrix(b, Region(CIRCLE_M, [])), 20.0))
    assert c.value == 0.0


def test_half_arc_constant_tends_to_quarter():
    b = build_basis(CIRCLE_M, 8)
    mass = mass_matrix(b, HALF)
    vals = [constant_upto(b, mass, T, 8).per_time for T in (25, 50, 100)]
    assert all(0.24 < v < 0.25 for v in vals)
    assert abs(vals[-1] - 0.25) < abs(vals[0] - 0.25)


def test_g1_examples():
    b = build_basis(CIRCLE_M, 8)
    assert g1(b, mass_matrix(b, HALF)).value == pytest.approx(0.5, abs=1e-12)
    assert g1(b, mass_matrix(b, full_region(CIRCLE_M))).value == pytest.approx(1.0, abs=1e-12)
    s = build_basis(SPHERE_M, math.sqrt(30))
    assert g1(s, mass_matrix(s, Region(SPHERE_M, [Band.cap(math.pi / 2)]))).value == pytest.approx(0.5, abs=1e-9)


def test_g1_quarter_arc_matches_two_by_two_eigenvalue():
    b = build_basis(CIRCLE_M, 6)
    r = Region(CIRCLE_M, [Arc(0.0, math.pi / 2)])
    res = g1(b, mass_matrix(b, r))
    # j = 1: the integrals of sin 2x and cos 2x over the arc are 1 and 0
    assert res.value == pytest.approx((math.pi / 4 - 0.5) / math.pi, abs=1e-14)
    assert res.frequency == 1.0


def test_g1_empty_basis_error():
    from obsconst.spectral import MassMatrix, SpectralBasis

    empty = SpectralBasis(CIRCLE_M, 0.5, (), ())
    with pytest.raises(ValueError):
        g1(empty, MassMatrix(0, 0, np.zeros((0, 0)), "analytic", np.zeros(0)))


CASES = [
    (CIRCLE_M, Region(CIRCLE_M, [Arc(0.3, 1.4), Arc(2.5, 0.8)]), 7),
    (TORUS_M, Region(TORUS_M, [Polygon.triangle((0.1, 0.1), (0.7, 0.2), (0.3, 0.6))]), 15),
    (SPHERE_M, Region(SPHERE_M, [Band(0.4, 1.3)]), math.sqrt(20)),
]


@pytest.mark.parametrize("case", range(3), ids=["circle", "torus", "sphere"])
@given(T=st.floats(0.5, 120))
def test_truncation_invariants(case, T):
    m, region, cutoff = CASES[case]
    b = build_basis(m, cutoff)
    mass = mass_matrix(b, region)
    stops = [s[-1] + 1 for s in b.eigenspaces]
    per = g1(b, mass).per_eigenspace
    lower = [band_constant(assemble_form(mass.restrict(0, n), T)).value for n in stops]
    upper = [band_constant(assemble_form(mass.restrict(n, stops[-1]), T)).value for n in [0] + stops[:-1]]
    tol = 1e-10 * max(T, 1)
    # nonincreasing in N, nondecreasing high bands, and within [0, T]
    assert all(y <= x + tol for x, y in zip(lower, lower[1:]))
    assert all(y >= x - tol for x, y in zip(upper, upper[1:]))
    assert all(-tol <= v <= T + tol for v in lower + upper)
    for k, n in enumerate(stops):
        # pure-mode and pure-eigenspace data are admissible
        assert lower[k] <= 0.5 * T * np.min(np.diag(mass.entries)[:n]) + tol
        assert lower[k] / T <= 0.5 * np.min(per[: k + 1]) + 1e-10
    H = assemble_form(mass, T).H
    assert np.max(np.abs(H - H.conj().T)) <= 1e-12
    assert sturm_min_eig(H) >= -1e-9


def test_cross_frequency_weights_decay():
    b = build_basis(CIRCLE_M, 5)
    mass = mass_matrix(b, HALF)
    v = np.random.default_rng(4).normal(size=len(b))
    lam = b.frequencies
    gaps = np.abs(lam[:, None] - lam[None, :])
    off = np.where(gaps > 0, np.abs(mass.entries) / np.where(gaps > 0, gaps, 1), 0.0)
    prev = math.inf
    for T in (10.0, 100.0, 1000.0, 10000.0):
        A = assemble_form(mass, T).A
        dev = abs(np.vdot(v, (A - np.diag(np.diag(mass.entries))) @ v))
        # same-frequency pairs carry f_T(0) = 1 exactly, so only cross-frequency terms remain
        same = np.vdot(v, np.where(gaps == 0, mass.entries, 0) @ v) - np.vdot(v, np.diag(np.diag(mass.entries)) @ v)
        dev = abs(np.vdot(v, A @ v) - np.diag(mass.entries) @ (v * v) - same)
        assert dev <= (2 / T) * np.abs(v) @ off @ np.abs(v) + 1e-14
        assert dev < prev
        prev = dev
    assert offdiag_decay_bound(lam, 100.0) == pytest.approx(0.02)


def test_constant_band_matches_restricted_assembly():
    b = build_basis(CIRCLE_M, 6)
    mass = mass_matrix(b, HALF)
    c = constant_band(mass, 30.0, 4, 12)
    assert (c.start, c.stop) == (4, 12)
    assert c.value == band_constant(assemble_form(mass.restrict(4, 12), 30.0)).value


def test_richardson_recovers_linear_tail():
    ns = np.array([4.0, 8.0])
    assert richardson(0.3 + 1.0 / ns, ns) == pytest.approx(0.3)
    assert richardson([0.7], [3]) == 0.7

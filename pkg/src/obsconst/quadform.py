"""Time-averaged observability form on band-limited wave data.

Write the solution as ``y(t) = sum_j (a_j e^{i lam_j t} + b_j e^{-i lam_j t}) phi_j``
with ``y+ = sum a_j phi_j`` and ``y- = sum b_j phi_j``. Averaging ``int_omega |y|^2``
over ``[0, T]`` gives a Hermitian form in ``(a, b)`` whose entries are mass
matrix entries weighted by ``f_T`` of frequency differences (same-sign
blocks) or sums (cross blocks). With ``||(y0, y1)||^2 = 2 (||y+||^2 + ||y-||^2)``
the band-limited observability constant is ``(T/2)`` times its smallest
eigenvalue.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spectral import MassMatrix, SpectralBasis

SERIES_CUTOFF = 1e-6


class NotHermitianError(ValueError):
    pass


class EigenSolverError(RuntimeError):
    def __init__(self, msg, residual=None):
        super().__init__(msg)
        self.residual = residual


def ft(x, T: float):
    """``(e^{iTx} - 1) / (iTx)``, the average of ``e^{itx}`` over ``[0, T]``.

    Uses ``1 + iTx/2 - (Tx)^2/6`` when ``|Tx| < 1e-6``.
    """
    if T <= 0:
        raise ValueError("T must be positive")
    x = np.asarray(x, dtype=float)
    u = T * x
    small = np.abs(u) < SERIES_CUTOFF
    us = np.where(small, 1.0, u)
    exact = np.expm1(1j * us) / (1j * us)
    out = np.where(small, 1.0 + 0.5j * u - u * u / 6.0, exact)
    return complex(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class ObservabilityForm:
    """Hermitian ``2m x 2m`` matrix ``H = [[A, B], [B*, A']]``.

    ``A[j,l] = f_T(lam_j - lam_l) M[j,l]``, ``A'[j,l] = f_T(lam_l - lam_j) M[j,l]``
    and ``B[j,l] = f_T(lam_j + lam_l) M[j,l]``. In this layout the time-averaged
    observed energy of data ``(a, b)`` is ``w^* H w`` with ``w = conj(a, b)``;
    see :func:`form_value`.
    """

    T: float
    H: np.ndarray
    frequencies: np.ndarray
    mass: MassMatrix

    @property
    def size(self) -> int:
        return len(self.frequencies)

    @property
    def A(self):
        m = self.size
        return self.H[:m, :m]

    @property
    def B(self):
        m = self.size
        return self.H[:m, m:]


def assemble_form(mass: MassMatrix, T: float, basis: SpectralBasis | None = None) -> ObservabilityForm:
    lam = np.asarray(mass.frequencies, dtype=float)
    if basis is not None:
        expected = basis.frequencies[mass.start : mass.stop]
        if not np.array_equal(expected, lam):
            raise ValueError("mass matrix range does not match the basis")
    M = mass.entries
    diff = lam[:, None] - lam[None, :]
    A = ft(diff, T) * M
    A2 = ft(-diff, T) * M
    B = ft(lam[:, None] + lam[None, :], T) * M
    H = np.block([[A, B], [B.conj().T, A2]])
    return ObservabilityForm(float(T), H, lam, mass)


def form_value(form: ObservabilityForm, a, b) -> float:
    """Time average of ``int_omega |y|^2`` for ``y+ = sum a_j phi_j``, ``y- = sum b_j phi_j``."""
    w = np.conj(np.concatenate([np.asarray(a, complex), np.asarray(b, complex)]))
    return float(np.real(np.vdot(w, form.H @ w)))


def min_eig_hermitian(H: np.ndarray, tol: float = 1e-10) -> tuple[float, np.ndarray]:
    """Smallest eigenvalue and a unit eigenvector of a Hermitian matrix (LAPACK ``heevd``)."""
    H = np.asarray(H)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise NotHermitianError("matrix must be square")
    scale = max(float(np.max(np.abs(H))), 1.0)
    skew = float(np.max(np.abs(H - H.conj().T))) if H.size else 0.0
    if skew > tol * scale:
        raise NotHermitianError(f"matrix is not Hermitian (|H - H*| = {skew:.3g})")
    Hs = 0.5 * (H + H.conj().T)
    try:
        w, V = np.linalg.eigh(Hs)
    except np.linalg.LinAlgError as exc:
        raise EigenSolverError(f"eigensolver failed: {exc}") from exc
    mu, v = float(w[0]), V[:, 0]
    res = float(np.linalg.norm(Hs @ v - mu * v))
    if res > tol * max(np.linalg.norm(Hs, 2), 1.0):
        raise EigenSolverError(f"residual {res:.3g} too large", residual=res)
    return mu, v


@dataclass(frozen=True)
class BandConstant:
    """``(T/2) lambda_min(H)`` with its minimizing coefficients."""

    value: float
    T: float
    a: np.ndarray
    b: np.ndarray
    start: int
    stop: int

    @property
    def per_time(self) -> float:
        return self.value / self.T


def band_constant(form: ObservabilityForm) -> BandConstant:
    """Infimum of the observability quotient over data supported on the form's modes.

    Over the leading modes this bounds ``C_T`` from above; over a band
    ``(N, M]`` it bounds ``C_T^{>N}`` restricted to that band.
    """
    mu, v = min_eig_hermitian(form.H)
    m = form.size
    w = np.conj(v)
    # roundoff below zero on a semidefinite form is clamped; larger negatives surface
    value = 0.5 * form.T * (max(mu, 0.0) if mu > -1e-9 else mu)
    return BandConstant(value, form.T, w[:m], w[m:], form.mass.start, form.mass.stop)


@dataclass(frozen=True)
class G1Result:
    value: float
    eigenspace: int
    frequency: float
    per_eigenspace: np.ndarray


def g1(basis: SpectralBasis, mass: MassMatrix) -> G1Result:
    """Smallest fraction of L^2 mass in the region over eigenfunctions in the truncation.

    The minimum over eigenspaces of the smallest eigenvalue of the
    eigenspace-restricted Gram matrix; an upper bound on the untruncated value.
    """
    if len(basis) == 0:
        raise ValueError("empty basis")
    vals = []
    for space in basis.eigenspaces:
        lo, hi = space[0], space[-1] + 1
        if lo < mass.start or hi > mass.stop:
            break
        block = mass.entries[lo - mass.start : hi - mass.start, lo - mass.start : hi - mass.start]
        vals.append(float(np.linalg.eigvalsh(block)[0]))
    if not vals:
        raise ValueError("mass matrix does not cover a whole eigenspace")
    vals = np.array(vals)
    k = int(np.argmin(vals))
    return G1Result(float(vals[k]), k, basis.modes[basis.eigenspaces[k][0]].frequency, vals)


def constant_upto(basis: SpectralBasis, mass: MassMatrix, T: float, cutoff: float) -> BandConstant:
    """``C_T^{[1,N]}`` with ``N`` the number of modes of frequency <= cutoff."""
    n = basis.modes_up_to(cutoff)
    return band_constant(assemble_form(mass.restrict(0, n), T))


def constant_band(mass: MassMatrix, T: float, start: int, stop: int) -> BandConstant:
    return band_constant(assemble_form(mass.restrict(start, stop), T))


def offdiag_decay_bound(frequencies, T: float) -> float:
    """``2 / (T * gap)``, the bound on cross-frequency kernel weights."""
    f = np.unique(np.asarray(frequencies))
    if len(f) < 2:
        return 0.0
    return 2.0 / (T * float(np.min(np.diff(f))))


def richardson(values, ns) -> float:
    """Extrapolate a monotone sequence ``v(N)`` assuming ``v = v_inf + c / N``."""
    v = np.asarray(values, float)
    n = np.asarray(ns, float)
    if len(v) < 2:
        return float(v[-1])
    return float((n[-1] * v[-1] - n[-2] * v[-2]) / (n[-1] - n[-2]))


__all__ = [
    "ft",
    "ObservabilityForm",
    "assemble_form",
    "form_value",
    "min_eig_hermitian",
    "band_constant",
    "BandConstant",
    "g1",
    "G1Result",
    "constant_upto",
    "constant_band",
    "offdiag_decay_bound",
    "richardson",
]

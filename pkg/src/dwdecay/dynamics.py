"""Spectral time evolution and time-domain observables.

Evolution is exact phase rotation of the expansion coefficients; every
observable is a quadratic form in the evolved coefficient vector, batched
over time samples.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .spsolver import PotentialSpec
from .twobody import SpectralDecomposition, TwoBodyEigensystem

__all__ = [
    "EvolvedState", "ReducedDensity",
    "evolve", "t_max", "region_probabilities_t", "left_probability_series",
    "reduced_density", "exp_fit", "peak_analysis", "local_level_density",
]


def t_max(spec: PotentialSpec, e_init: float) -> float:
    """Largest safe evolution time before boundary reflections matter.

    0.8 * r / (2 sqrt(e_init)): 80% of the right-well transit time at the
    fastest relevant group velocity v = 2k.
    """
    if not (e_init > 0):
        raise ValueError(f"e_init must be positive, got {e_init}")
    return 0.8 * spec.r / (2.0 * np.sqrt(e_init))


@dataclass
class EvolvedState:
    """Phase-rotated coefficient vector at time t."""
    t: float
    coeffs: np.ndarray
    decomposition: SpectralDecomposition

    @property
    def norm(self) -> float:
        return float(np.sum(np.abs(self.coeffs) ** 2))


def evolve(decomp: SpectralDecomposition, t: float,
           t_limit: float | None = None) -> EvolvedState:
    """|psi(t)> coefficients c_n exp(-i E_n t); exactly unitary."""
    if t < 0:
        raise ValueError(f"t must be nonnegative, got {t}")
    if t_limit is not None and t > t_limit:
        warnings.warn(f"t = {t:.4g} exceeds the reflection-safe limit "
                      f"{t_limit:.4g}; boundary echoes may contaminate "
                      "observables", stacklevel=2)
    c = decomp.normalized()
    return EvolvedState(t=float(t),
                        coeffs=c * np.exp(-1j * decomp.energies * t),
                        decomposition=decomp)


def _phases(decomp: SpectralDecomposition, times) -> np.ndarray:
    """(n_times, n_eig) matrix of evolved coefficients."""
    times = np.asarray(times, dtype=float)
    c = decomp.normalized()
    return c[None, :] * np.exp(-1j * np.outer(times, decomp.energies))


def left_probability_series(coeffs, energies, times, s_left) -> np.ndarray:
    """Single-particle P_ell(t) = c(t)^dag S^I c(t) for a coefficient vector."""
    c = np.asarray(coeffs) / np.linalg.norm(coeffs)
    ct = c[None, :] * np.exp(-1j * np.outer(np.asarray(times, float), energies))
    return np.einsum("ti,ij,tj->t", ct.conj(), s_left, ct).real


def region_probabilities_t(decomp: SpectralDecomposition, times,
                           s_left, s_right, chunk: int = 64) -> dict:
    """P_1, P_2, P_3, P_barrier, N_ell and P_surv on a time grid.

    N_ell = P1 + P2/2 (normalized to one; both bosons left gives 1);
    P_surv = |sum_n |c_n|^2 exp(-i E_n t)|^2.
    """
    times = np.asarray(times, dtype=float)
    eig = decomp.eigensystem
    pb = eig.pair_basis
    ct = _phases(decomp, times)
    w = np.abs(decomp.normalized()) ** 2
    p_surv = np.abs(np.exp(-1j * np.outer(times, decomp.energies)) @ w) ** 2

    p1 = np.empty(times.size)
    p2 = np.empty(times.size)
    p3 = np.empty(times.size)
    for a in range(0, times.size, chunk):
        b = min(a + chunk, times.size)
        v = ct[a:b] @ eig.vectors.T          # pair-basis coefficients
        psi = np.stack([pb.mode_matrix(v[i]) for i in range(b - a)])
        m1 = np.einsum("bmn,np->bmp", psi, s_left)
        m3 = np.einsum("bmn,np->bmp", psi, s_right)
        # P(R1,R2) = tr(Psi^dag S1 Psi S2); Psi symmetric so Psi^dag = conj(Psi)
        p1[a:b] = np.einsum("bmn,bnm->b", m1.conj(), m1).real
        p3[a:b] = np.einsum("bmn,bnm->b", m3.conj(), m3).real
        p2[a:b] = 2.0 * np.einsum("bmn,bnm->b", m1.conj(), m3).real
    return {"t": times, "p1": p1, "p2": p2, "p3": p3,
            "p_barrier": 1.0 - p1 - p2 - p3,
            "n_left": p1 + 0.5 * p2, "p_surv": p_surv}


# ---------------------------------------------------------------------------
# reduced one-body density

def local_level_density(energies, weights, window: int = 21) -> np.ndarray:
    """Per-state weight divided by the mean level spacing over a centered
    window; converts discrete occupations into a density estimate."""
    E = np.asarray(energies, dtype=float)
    w = np.asarray(weights, dtype=float)
    n = E.size
    half = window // 2
    dens = np.empty(n)
    for i in range(n):
        a, b = max(0, i - half), min(n - 1, i + half)
        spacing = (E[b] - E[a]) / max(b - a, 1)
        dens[i] = w[i] / spacing if spacing > 0 else 0.0
    return dens


@dataclass
class ReducedDensity:
    """One-body density matrix of a two-boson state in mode representation,
    with optional position diagonal and energy occupations."""
    mode_matrix: np.ndarray       # Hermitian, trace 1
    energies: np.ndarray          # double-well mode energies
    occupations: np.ndarray       # diagonal in mode space
    density_of_e: np.ndarray      # occupations / local level spacing
    x: np.ndarray | None = None
    rho_x: np.ndarray | None = None
    d_x: np.ndarray | None = None

    @property
    def trace(self) -> float:
        return float(np.trace(self.mode_matrix).real)

    def hermiticity_error(self) -> float:
        m = self.mode_matrix
        return float(np.max(np.abs(m - m.conj().T)))


def reduced_density(state: EvolvedState, x_grid=None,
                    density_window: int = 21) -> ReducedDensity:
    """rho_red from the symmetric coefficient matrix: rho = conj(Psi) Psi.

    Trace-normalized to one (truncation leakage is tracked on the
    decomposition, not here).  Requires a two-body state.
    """
    decomp = state.decomposition
    eig = decomp.eigensystem
    if not isinstance(eig, TwoBodyEigensystem):
        raise TypeError("reduced_density is defined for two-body states only")
    pb = eig.pair_basis
    v = eig.vectors @ state.coeffs
    psi = pb.mode_matrix(v)
    rho = psi.conj() @ psi
    rho /= np.trace(rho).real
    occ = np.diag(rho).real
    energies = pb.sp_basis.energies[: pb.n_cut]
    dens = local_level_density(energies, occ, density_window)

    x = rho_x = d_x = None
    if x_grid is not None:
        x = np.asarray(x_grid, dtype=float)
        M = pb.sp_basis.evaluate(x)[: pb.n_cut]
        rho_x = np.einsum("mx,mp,px->x", M, rho, M).real
        d_x = np.concatenate([[0.0], cumulative_trapezoid(rho_x, x)])
    return ReducedDensity(mode_matrix=rho, energies=energies, occupations=occ,
                          density_of_e=dens, x=x, rho_x=rho_x, d_x=d_x)


# ---------------------------------------------------------------------------
# fits and peak analysis

def exp_fit(times, values, window) -> tuple:
    """Log-linear least-squares decay rate over [t_a, t_b].

    Returns (rate, rms_log_residual).  Windows with fewer than 10 samples or
    nonpositive values are rejected.
    """
    t = np.asarray(times, dtype=float)
    y = np.asarray(values, dtype=float)
    a, b = window
    m = (t >= a) & (t <= b)
    if np.count_nonzero(m) < 10:
        raise ValueError(f"window [{a}, {b}] holds {np.count_nonzero(m)} samples; need >= 10")
    if np.any(y[m] <= 0):
        raise ValueError("values must be positive inside the fit window")
    A = np.vstack([t[m], np.ones(np.count_nonzero(m))]).T
    sol, *_ = np.linalg.lstsq(A, np.log(y[m]), rcond=None)
    resid = float(np.sqrt(np.mean((A @ sol - np.log(y[m])) ** 2)))
    return float(-sol[0]), resid


def _half_crossing(x, y, i_peak, half, direction):
    i = i_peak
    while 0 <= i + direction < y.size and y[i + direction] > half:
        i += direction
    j = i + direction
    if j < 0 or j >= y.size:
        return x[i]
    # linear interpolation across the half-maximum
    frac = (y[i] - half) / (y[i] - y[j])
    return x[i] + frac * (x[j] - x[i])


def peak_analysis(x, density) -> list:
    """Peaks of a sampled density: centers from local maxima, weights from
    integrating between midpoints of adjacent centers, widths from
    interpolated half-maximum crossings."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(density, dtype=float)
    interior = np.nonzero((y[1:-1] > y[:-2]) & (y[1:-1] >= y[2:]))[0] + 1
    if interior.size == 0:
        return []
    centers = x[interior]
    bounds = np.concatenate([[x[0]],
                             0.5 * (centers[1:] + centers[:-1]),
                             [x[-1]]])
    peaks = []
    for i, ic in enumerate(interior):
        lo, hi = bounds[i], bounds[i + 1]
        m = (x >= lo) & (x <= hi)
        weight = float(np.trapezoid(y[m], x[m]))
        half = y[ic] / 2.0
        x_lo = _half_crossing(x, y, ic, half, -1)
        x_hi = _half_crossing(x, y, ic, half, +1)
        peaks.append({"center": float(x[ic]), "weight": weight,
                      "width": float(x_hi - x_lo), "height": float(y[ic])})
    return peaks

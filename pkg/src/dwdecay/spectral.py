"""Spectral diagnostics: participation ratios, region projections of
eigenstates, resonance-width estimators, and densities of states."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq, curve_fit
from scipy.signal import find_peaks

from .spsolver import PotentialSpec, SpBasis, region_overlap_matrix, solve_double_well
from .twobody import (PairBasis, TwoBodyEigensystem, assemble_and_diagonalize,
                      expand_initial, prepare_initial_state)

__all__ = [
    "RegionProjections", "WidthEstimate",
    "participation_ratio", "weighted_pr", "region_projections",
    "width_estimators", "decay_rate_from_pr", "dos_theory", "dos_numeric",
    "staircase", "pr_sweep",
]


def _check_normalized(c, tol=1e-8):
    c = np.asarray(c)
    w = np.abs(c) ** 2
    total = w.sum()
    if abs(total - 1.0) > tol:
        raise ValueError(f"coefficients not normalized: sum |c|^2 = {total:.10f}")
    return w


def participation_ratio(c) -> float:
    """PR = 1 / sum |c_n|^4, between 1 and the basis dimension."""
    w = _check_normalized(c)
    return float(1.0 / np.sum(w ** 2))


def weighted_pr(c, w) -> float:
    """Region-weighted participation ratio.

    First factor confines the value to [1, N]; the trailing sum |c_n|^2 w_n
    suppresses the quotient when the weighted amplitudes all vanish.
    """
    cw = _check_normalized(c)
    w = np.asarray(w, dtype=float)
    if np.any((w < -1e-12) | (w > 1 + 1e-12)):
        raise ValueError("weights must lie in [0, 1]")
    s1 = np.sum(cw * w)
    if s1 <= 0.0:
        return 0.0
    quot = np.sum(cw ** 2 * w ** 2) / s1 ** 2
    return float(s1 / quot)


@dataclass
class RegionProjections:
    """Per-eigenstate probabilities of the configuration-space regions."""
    p1: np.ndarray          # both particles left
    p2: np.ndarray          # one in each well
    p3: np.ndarray          # both right
    p_barrier: np.ndarray   # remainder (any particle inside the barrier)

    def closure_error(self) -> float:
        return float(np.max(np.abs(self.p1 + self.p2 + self.p3 + self.p_barrier - 1.0)))


def region_projections(eig: TwoBodyEigensystem, s_left: np.ndarray,
                       s_right: np.ndarray, chunk: int = 256) -> RegionProjections:
    """P_i(|E_n>) from the trace formulas over region overlap matrices.

    With Psi the symmetric mode matrix of an eigenstate,
    P1 = tr(Psi S^I Psi S^I), P3 = tr(Psi S^III Psi S^III),
    P2 = 2 tr(Psi S^I Psi S^III).
    """
    pb = eig.pair_basis
    n_eig = len(eig)
    p1 = np.empty(n_eig)
    p2 = np.empty(n_eig)
    p3 = np.empty(n_eig)
    for a in range(0, n_eig, chunk):
        b = min(a + chunk, n_eig)
        psi = np.stack([pb.mode_matrix(eig.vectors[:, n]) for n in range(a, b)])
        m1 = psi @ s_left
        m3 = psi @ s_right
        p1[a:b] = np.einsum("bmn,bnm->b", m1, m1)
        p3[a:b] = np.einsum("bmn,bnm->b", m3, m3)
        p2[a:b] = 2.0 * np.einsum("bmn,bnm->b", m1, m3)
    return RegionProjections(p1=p1, p2=p2, p3=p3,
                             p_barrier=1.0 - p1 - p2 - p3)


# ---------------------------------------------------------------------------
# width estimators

@dataclass
class WidthEstimate:
    center: float
    gamma_lorentz: float
    gamma_median: float
    fit_residual: float
    ill_conditioned: bool
    iqr_width: float


def _lorentz(x, amp, x0, gamma):
    return amp / ((x - x0) ** 2 + 0.25 * gamma ** 2)


def _interp_cdf(x_sorted, w_sorted):
    """Piecewise-linear cumulative weight through the sample points."""
    cum = np.cumsum(w_sorted)

    def W(x):
        return np.interp(x, x_sorted, cum, left=0.0, right=cum[-1])

    def Winv(p):
        return float(np.interp(p, cum, x_sorted))

    return W, Winv


def width_estimators(c, positions, residual_threshold: float = 0.2) -> WidthEstimate:
    """Lorentzian least-squares width and median symmetric-interval width.

    ``positions`` may be energies or level indices.  The median width gamma
    solves int_{x0-g/2}^{x0+g/2} |c|^2 = 1/2 with x0 the weighted median,
    using linear interpolation of the cumulative weight.
    """
    w = np.abs(np.asarray(c)) ** 2
    x = np.asarray(positions, dtype=float)
    nz = w > 0
    if np.count_nonzero(nz) < 10:
        raise ValueError(f"need at least 10 nonzero coefficients, got {np.count_nonzero(nz)}")
    w = w / w.sum()
    order = np.argsort(x)
    x_s, w_s = x[order], w[order]

    # median symmetric interval
    W, Winv = _interp_cdf(x_s, w_s)
    x0 = Winv(0.5)
    span = x_s[-1] - x_s[0]

    def g(gam):
        return W(x0 + gam / 2) - W(x0 - gam / 2) - 0.5

    gamma_median = brentq(g, 0.0, 2.0 * span) if g(2.0 * span) > 0 else 2.0 * span
    iqr = Winv(0.75) - Winv(0.25)

    # Lorentzian fit
    i_pk = int(np.argmax(w_s))
    half = w_s[i_pk] / 2.0
    above = np.nonzero(w_s >= half)[0]
    gamma0 = max(x_s[above[-1]] - x_s[above[0]], span / w_s.size)
    p0 = [w_s[i_pk] * 0.25 * gamma0 ** 2, x_s[i_pk], gamma0]
    try:
        popt, _ = curve_fit(_lorentz, x_s, w_s, p0=p0, maxfev=20000)
        amp, xc, gamma_l = popt
        gamma_l = abs(gamma_l)
        resid = float(np.sqrt(np.mean((_lorentz(x_s, *popt) - w_s) ** 2)) / w_s.max())
    except RuntimeError:
        xc, gamma_l, resid = x0, gamma_median, np.inf
    return WidthEstimate(center=float(xc), gamma_lorentz=float(gamma_l),
                         gamma_median=float(gamma_median), fit_residual=resid,
                         ill_conditioned=bool(resid > residual_threshold),
                         iqr_width=float(iqr))


def decay_rate_from_pr(pr: float, e_init: float, r: float) -> float:
    """Quasi-continuum loss rate 2 PR sqrt(e_init) / r (PR / (pi rho_sp))."""
    return 2.0 * pr * np.sqrt(e_init) / r


# ---------------------------------------------------------------------------
# densities of states

def dos_theory(E, spec: PotentialSpec, sp_left_energies) -> dict:
    """Quasi-continuum DOS expressions for the right well of width r.

    rho_sp = r / (2 pi sqrt(E));
    n_sp = (r/pi) sum_m sqrt(E - eps_m) theta(E - eps_m) over left-well levels;
    rho_tp = (1/2)[(rho*rho)(E) + rho(E/2)/2]  (self-convolution plus exchange);
    n_tp = (1/2)(r^2 E / (4 pi) + r sqrt(2 E) / (2 pi)).
    """
    E = np.asarray(E, dtype=float)
    if np.any(E <= 0):
        raise ValueError("dos_theory requires E > 0")
    r = spec.r
    eps = np.asarray(sp_left_energies, dtype=float)
    rho_sp = r / (2.0 * np.pi * np.sqrt(E))
    gaps = E[..., None] - eps[None, :]
    n_sp = (r / np.pi) * np.sum(np.sqrt(np.clip(gaps, 0.0, None)), axis=-1)
    rho_tp = 0.5 * (r ** 2 / (4.0 * np.pi)
                    + 0.5 * r / (2.0 * np.pi * np.sqrt(E / 2.0)))
    n_tp = 0.5 * (r ** 2 * E / (4.0 * np.pi)
                  + r * np.sqrt(2.0 * E) / (2.0 * np.pi))
    return {"rho_sp": rho_sp, "n_sp_th": n_sp, "rho_tp": rho_tp, "n_tp_th": n_tp}


def staircase(event_energies, weights):
    """Weighted staircase n(E) = sum_m w_m theta(E - E_m) as a callable."""
    order = np.argsort(event_energies)
    E_s = np.asarray(event_energies)[order]
    c = np.concatenate([[0.0], np.cumsum(np.asarray(weights)[order])])

    def n_of_E(E):
        idx = np.searchsorted(E_s, np.asarray(E, dtype=float), side="right")
        return c[idx]

    n_of_E.events = E_s
    n_of_E.cumulative = c
    return n_of_E


def dos_numeric(projections: RegionProjections, energies) -> dict:
    """Integrated numeric DOS: P2-weighted (one escaped) and P3-weighted
    (both escaped) staircases over the computed spectrum."""
    return {
        "n_sp_num": staircase(energies, projections.p2),
        "n_tp_num": staircase(energies, projections.p3),
    }


# ---------------------------------------------------------------------------
# sweeps over the right-well width

def _sp_point(r, ell, b, v0, n_init, e_max):
    spec = PotentialSpec(ell=ell, b=b, r=r, v0=v0)
    basis = solve_double_well(spec, e_max)
    s_left = region_overlap_matrix(basis, "I")
    s_right = region_overlap_matrix(basis, "III")
    from .spsolver import left_box_overlaps
    c = left_box_overlaps(basis, n_init)[:, n_init - 1]
    c = c / np.linalg.norm(c)
    pl = np.einsum("i,ij,j->", c, s_left, c)
    w_l = np.diag(s_left).clip(0.0, 1.0)
    w_r = np.diag(s_right).clip(0.0, 1.0)
    return {"r": r, "pr": participation_ratio(c),
            "pr_l": weighted_pr(c, w_l), "pr_r": weighted_pr(c, w_r),
            "p_left0": float(pl)}


def _tb_point(r, ell, b, v0, u, e2_cut, initial, max_deficit):
    spec = PotentialSpec(ell=ell, b=b, r=r, v0=v0)
    basis = solve_double_well(spec, e2_cut)
    pb = PairBasis(basis, n_cut=len(basis), e2_cut=e2_cut)
    eig = assemble_and_diagonalize(pb, u)
    dec = expand_initial(initial, eig, max_deficit=max_deficit)
    c = dec.normalized()
    s_left = region_overlap_matrix(basis, "I")
    s_right = region_overlap_matrix(basis, "III")
    proj = region_projections(eig, s_left, s_right)
    return {"r": r, "pr": participation_ratio(c),
            "pr_1": weighted_pr(c, proj.p1.clip(0, 1)),
            "pr_2": weighted_pr(c, proj.p2.clip(0, 1)),
            "pr_3": weighted_pr(c, proj.p3.clip(0, 1)),
            "deficit": dec.norm_deficit}


def pr_sweep(r_values, ell, b, v0, *, initial="box-ground", u=0.0,
             e_max=0.04, e2_cut=0.05, max_deficit=0.05,
             fit_range=None, peak_prominence=0.1, peak_separation=2) -> dict:
    """Participation ratios against the right-well width.

    ``initial``: "box-ground" / "box-excited" (single particle, chi_1/chi_2)
    or "two-boson-ground" (interacting pair, uses ``u`` and ``e2_cut``).
    Returns the per-r table, detected resonance peaks, a linear tail fit for
    the single-particle case and a quadratic fit for the two-particle case,
    and any per-point failures (the sweep continues past them).
    """
    r_values = np.asarray(r_values, dtype=float)
    if np.any(np.diff(r_values) <= 0):
        raise ValueError("r_values must be strictly ascending")
    two_body = initial == "two-boson-ground"
    if two_body:
        init_state = prepare_initial_state(u, ell, certify=False)

    rows, failures = [], []
    for r in r_values:
        try:
            if two_body:
                rows.append(_tb_point(r, ell, b, v0, u, e2_cut, init_state,
                                      max_deficit))
            else:
                n_init = 2 if initial == "box-excited" else 1
                rows.append(_sp_point(r, ell, b, v0, n_init, e_max))
        except Exception as exc:   # per-point failure: record and continue
            failures.append((float(r), repr(exc)))

    table = {k: np.array([row[k] for row in rows]) for k in rows[0]} if rows else {}
    out = {"table": table, "failures": failures, "two_body": two_body}

    if rows:
        pr = table["pr"]
        prom = peak_prominence * pr.max()
        peaks, props = find_peaks(pr, prominence=prom, distance=peak_separation)
        out["peaks"] = {"r": table["r"][peaks], "pr": pr[peaks],
                        "prominence": props["prominences"]}
        rs = table["r"]
        if fit_range is None:
            fit_range = (rs.min(), rs.max())
        m = (rs >= fit_range[0]) & (rs <= fit_range[1])
        deg = 2 if two_body else 1
        if np.count_nonzero(m) > deg:
            coeffs = np.polyfit(rs[m], pr[m], deg)
            out["fit"] = {"degree": deg, "coefficients": coeffs,
                          "range": tuple(fit_range)}
            if not two_body:
                out["fit"]["slope"] = float(coeffs[0])
    return out

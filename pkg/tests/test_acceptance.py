"""Acceptance suite: one test per acceptance criterion, each printing a
PASS/FAIL line with the measured values at its stated tolerance.

Run with ``pytest tests/test_acceptance.py -v -rA`` (add ``-s`` for live
lines).  The expensive eigensystems are session fixtures shared across
criteria; the whole suite is sized for a desk machine (right wells up to
r = 3000 single-particle, r = 1000 two-body with ~4.4e3 pair states).
"""
import numpy as np
import pytest

from dwdecay.bethe import solve_bethe
from dwdecay.dynamics import (evolve, exp_fit, left_probability_series,
                              peak_analysis, reduced_density,
                              region_probabilities_t, t_max)
from dwdecay.scattering import find_resonances
from dwdecay.spectral import (decay_rate_from_pr, dos_numeric,
                              participation_ratio, pr_sweep,
                              region_projections, weighted_pr,
                              width_estimators)
from dwdecay.spsolver import (PotentialSpec, box_eigenpair, left_box_overlaps,
                              region_overlap_matrix, solve_double_well)
from dwdecay.twobody import (PairBasis, assemble_and_diagonalize,
                             box_ground_ladder, expand_initial,
                             prepare_initial_state)

ELL, B, V0 = 51.0, 2.0, 0.1
EPS1 = (np.pi / ELL) ** 2
EPS2 = (2.0 * np.pi / ELL) ** 2

_LINES = []


def _report(num, ok, detail):
    line = f"ACCEPTANCE {num:>4} [{'PASS' if ok else 'FAIL'}] {detail}"
    _LINES.append(line)
    print(line)
    return detail


# ---------------------------------------------------------------------------
# session fixtures

@pytest.fixture(scope="session")
def sp3000():
    """Single-particle pipeline at the broad well r = 3000."""
    spec = PotentialSpec(ELL, B, 3000.0, V0)
    basis = solve_double_well(spec, e_max=0.08)
    s_left = region_overlap_matrix(basis, "I")
    O = left_box_overlaps(basis, 2)
    out = {"spec": spec, "basis": basis, "s_left": s_left}
    for n_init in (1, 2):
        c = O[:, n_init - 1]
        c = c / np.linalg.norm(c)
        e_init = (n_init * np.pi / ELL) ** 2
        tm = t_max(spec, e_init)
        times = np.linspace(0.0, tm, 240)
        pl = left_probability_series(c, basis.energies, times, s_left)
        pr = participation_ratio(c)
        guess = decay_rate_from_pr(pr, e_init, spec.r)
        gamma, resid = exp_fit(times, pl, (0.0, min(tm, 3.0 / guess)))
        out[n_init] = {"c": c, "pr": pr, "gamma": gamma, "resid": resid,
                       "e_init": e_init}
    out["width"] = width_estimators(
        out[1]["c"], np.arange(1, len(basis) + 1, dtype=float))
    return out


@pytest.fixture(scope="session")
def sweep_tail():
    rs = np.arange(1000.0, 3001.0, 25.0)
    return pr_sweep(rs, ELL, B, V0, initial="box-ground", e_max=0.05,
                    fit_range=(1000.0, 3000.0))


@pytest.fixture(scope="session")
def desk():
    """Two-body pipeline at r = 1000, e2_cut = 0.1 (~4.4e3 pairs), with the
    single-particle reference rate at the same geometry and the probability
    series for u in {0, 0.1, 0.2, 0.6}."""
    spec = PotentialSpec(ELL, B, 1000.0, V0)
    basis = solve_double_well(spec, e_max=0.1)
    s_left = region_overlap_matrix(basis, "I")
    s_right = region_overlap_matrix(basis, "III")
    pb = PairBasis(basis, n_cut=len(basis), e2_cut=0.1)
    assert len(pb) <= 5000

    c1 = left_box_overlaps(basis, 1)[:, 0]
    c1 /= np.linalg.norm(c1)
    tm_sp = t_max(spec, EPS1)
    ts_sp = np.linspace(0.0, tm_sp, 300)
    pl = left_probability_series(c1, basis.energies, ts_sp, s_left)
    guess = decay_rate_from_pr(participation_ratio(c1), EPS1, spec.r)
    gamma1_sp, _ = exp_fit(ts_sp, pl, (0.0, min(tm_sp, 3.0 / guess)))

    out = {"spec": spec, "basis": basis, "pb": pb, "s_left": s_left,
           "s_right": s_right, "gamma1_sp": gamma1_sp}
    for u in (0.0, 0.1, 0.2, 0.6):
        eig = assemble_and_diagonalize(pb, u)
        init = prepare_initial_state(u, ELL, n_cut=192, certify=False)
        dec = expand_initial(init, eig, max_deficit=0.05)
        tm = t_max(spec, init.energy_converged)
        times = np.linspace(0.0, tm, 240)
        series = region_probabilities_t(dec, times, s_left, s_right)
        g_guess = max(-np.log(max(series["p1"][-1], 1e-300)) / tm, 1e-12)
        g_p1, _ = exp_fit(times, series["p1"], (0.0, min(tm, 3.0 / g_guess)))
        g_nl, _ = exp_fit(times, series["n_left"], (2.0 * tm / 3.0, tm))
        out[u] = {"eig": eig, "dec": dec, "times": times, "series": series,
                  "gamma_p1": g_p1, "gamma_nl_late": g_nl, "t_max": tm,
                  "e_init": init.energy_converged}
    out["proj02"] = region_projections(out[0.2]["eig"], s_left, s_right)
    return out


# ---------------------------------------------------------------------------
# criterion 1: box energies

def test_criterion_1_box_energies():
    e1 = box_eigenpair(1, ELL).energy
    e2 = box_eigenpair(2, ELL).energy
    ok = abs(e1 - EPS1) < 1e-10 and abs(e2 - EPS2) < 1e-10 \
        and abs(e1 - 3.794e-3) < 1e-6 and abs(e2 - 1.518e-2) < 1e-5
    detail = _report(1, ok, f"box energies eps1={e1:.6e}, eps2={e2:.6e} "
                            f"(exact {EPS1:.6e}, {EPS2:.6e})")
    assert ok, detail


# ---------------------------------------------------------------------------
# criterion 2: single-particle decay rates at the stated geometry

def test_criterion_2_sp_decay_rates(sp3000):
    g1, g2 = sp3000[1]["gamma"], sp3000[2]["gamma"]
    ok1 = abs(g1 - 1.16e-4) / 1.16e-4 <= 0.15
    ok2 = abs(g2 - 8.5e-4) / 8.5e-4 <= 0.15
    detail = _report(2, ok1 and ok2,
                     f"gamma1={g1:.4e} (target 1.16e-4 +-15%), "
                     f"gamma2={g2:.4e} (target 8.5e-4 +-15%)")
    assert ok1 and ok2, detail


# ---------------------------------------------------------------------------
# criterion 3: scattering poles vs dynamical fits

def test_criterion_3_poles_match_dynamics(sp3000):
    poles = find_resonances(ELL, B, V0, [1, 2])
    devs = [abs(p.rate - sp3000[n]["gamma"]) / p.rate
            for p, n in zip(poles, (1, 2))]
    ok = all(d < 0.10 for d in devs)
    detail = _report(3, ok,
                     f"pole rates {poles[0].rate:.4e}/{poles[1].rate:.4e} vs "
                     f"fits {sp3000[1]['gamma']:.4e}/{sp3000[2]['gamma']:.4e} "
                     f"(devs {devs[0]:.1%}, {devs[1]:.1%}; tol 10%)")
    assert ok, detail


# ---------------------------------------------------------------------------
# criterion 4: spectral consistency at r = 3000

def test_criterion_4_lorentzian_width(sp3000):
    gamma = sp3000["width"].gamma_lorentz
    ok = abs(gamma - 1.3) <= 0.2
    detail = _report("4a", ok, f"index-space Lorentzian width {gamma:.3f} "
                               f"(target 1.3 +- 0.2)")
    assert ok, detail


def test_criterion_4_pr_tail_slope(sweep_tail):
    a = sweep_tail["fit"]["slope"]
    ok = abs(a - 1.02e-3) / 1.02e-3 <= 0.10
    detail = _report("4b", ok, f"PR tail slope a={a:.4e} (target 1.02e-3 +-10%)")
    assert ok, detail


def test_criterion_4_rate_from_slope_consistency(sp3000, sweep_tail):
    a = sweep_tail["fit"]["slope"]
    g_slope = 2.0 * a * np.sqrt(EPS1)
    g_dyn = sp3000[1]["gamma"]
    dev = abs(g_slope - g_dyn) / g_dyn
    ok = dev <= 0.15
    detail = _report("4c", ok,
                     f"slope-based rate {g_slope:.4e} vs dynamical "
                     f"{g_dyn:.4e} (dev {dev:.2%}; tol 15%)")
    assert ok, detail


# ---------------------------------------------------------------------------
# criterion 5: symmetric-well checkpoints

def test_criterion_5_symmetric_point():
    out = pr_sweep(np.array([47.0, 51.0, 55.0]), ELL, B, V0,
                   initial="box-ground", e_max=0.05)
    i = 1
    pr = out["table"]["pr"][i]
    prl = out["table"]["pr_l"][i]
    prr = out["table"]["pr_r"][i]
    ok = abs(pr - 2.0) <= 0.05 and abs(prl - 1.0) <= 0.05 and abs(prr - 1.0) <= 0.05
    detail = _report("5a", ok,
                     f"r=51: PR={pr:.4f} (2.00+-0.05), PR_l={prl:.4f}, "
                     f"PR_r={prr:.4f} (1.00+-0.05)")
    assert ok, detail


def test_criterion_5_left_pr_asymptote():
    vals = []
    for r in (2500.0, 2750.0, 3000.0):
        basis = solve_double_well(PotentialSpec(ELL, B, r, V0), e_max=0.08)
        s_left = region_overlap_matrix(basis, "I")
        c = left_box_overlaps(basis, 1)[:, 0]
        c /= np.linalg.norm(c)
        vals.append(weighted_pr(c, np.diag(s_left).clip(0, 1)))
    mean = float(np.mean(vals))
    ok = abs(mean - 0.40) <= 0.05
    detail = _report("5b", ok, f"PR_l large-r asymptote {mean:.4f} (0.40+-0.05)")
    assert ok, detail


# ---------------------------------------------------------------------------
# criterion 6: Bethe oracle equivalence

def test_criterion_6_bethe_oracle():
    details = []
    ok = True
    for u in (0.0, 0.05, 0.2, 1.0, 5.0, 50.0):
        e_exact = solve_bethe(u, ELL).energy
        if u == 0.0:
            e_conv = prepare_initial_state(0.0, ELL, certify=False).energy
        else:
            e_conv = box_ground_ladder(u, ELL, (64, 128, 256))["extrapolated"]
        rel = abs(e_conv - e_exact) / e_exact
        ok &= rel < 1e-5
        details.append(f"u={u:g}: {rel:.1e}")
        if u == 0.2:
            ok &= abs(e_conv - 0.0139) < 2e-4
        if u == 50.0:
            ok &= abs(e_conv - 1.897e-2) / 1.897e-2 < 0.02
    detail = _report(6, ok, "diag vs exact rel devs (tol 1e-5): "
                     + ", ".join(details))
    assert ok, detail


# ---------------------------------------------------------------------------
# criterion 7: desk-scale two-body decay

def test_criterion_7_u0_rate_doubling(desk):
    g = desk[0.0]["gamma_p1"]
    ref = 2.0 * desk["gamma1_sp"]
    dev = abs(g - ref) / ref
    ok = dev <= 0.15
    detail = _report("7a", ok,
                     f"u=0: gamma(P1)={g:.4e} vs 2*gamma1_sp={ref:.4e} "
                     f"(dev {dev:.2%}; tol 15%)")
    assert ok, detail


def test_criterion_7_u02_rates(desk):
    early_faster = desk[0.2]["gamma_p1"] > desk[0.0]["gamma_p1"]
    g_late = desk[0.2]["gamma_nl_late"]
    dev = abs(g_late - desk["gamma1_sp"]) / desk["gamma1_sp"]
    ok = early_faster and dev <= 0.20
    detail = _report("7b", ok,
                     f"u=0.2: early gamma(P1)={desk[0.2]['gamma_p1']:.4e} "
                     f"(> u=0 rate {desk[0.0]['gamma_p1']:.4e}: {early_faster}), "
                     f"late N_l rate {g_late:.4e} vs gamma1_sp "
                     f"{desk['gamma1_sp']:.4e} (dev {dev:.2%}; tol 20%)")
    assert ok, detail


# ---------------------------------------------------------------------------
# criterion 8 (desk substitute): late-time two-peak energy structure

def test_criterion_8_two_peak_structure(desk):
    dec = desk[0.2]["dec"]
    tm = desk[0.2]["t_max"]
    rd = reduced_density(evolve(dec, tm))
    peaks = peak_analysis(rd.energies, rd.density_of_e)
    peaks = sorted(peaks, key=lambda p: -p["weight"])[:2]
    peaks = sorted(peaks, key=lambda p: p["center"])
    bm = solve_bethe(0.2, ELL)
    targets = (bm.k2 ** 2, bm.k1 ** 2)

    def centroid(peak):
        E, w = rd.energies, rd.occupations
        others = [p["center"] for p in peaks if p is not peak]
        lo = max([E[0]] + [0.5 * (o + peak["center"]) for o in others
                           if o < peak["center"]])
        hi = min([E[-1]] + [0.5 * (o + peak["center"]) for o in others
                            if o > peak["center"]])
        m = (E >= lo) & (E <= hi)
        return float(np.sum(E[m] * w[m]) / np.sum(w[m]))

    cents = [centroid(p) for p in peaks]
    devs = [abs(c - t) / t for c, t in zip(cents, targets)]
    two_peaks = len(peaks) == 2 and all(p["weight"] > 0.25 for p in peaks)
    ok = two_peaks and all(d <= 0.10 for d in devs)
    detail = _report(8, ok,
                     f"late-time peaks at {cents[0]:.4e}/{cents[1]:.4e} vs "
                     f"Bethe k2^2={targets[0]:.4e}, k1^2={targets[1]:.4e} "
                     f"(devs {devs[0]:.1%}, {devs[1]:.1%}; tol 10%), weights "
                     f"{peaks[0]['weight']:.2f}/{peaks[1]['weight']:.2f}")
    assert ok, detail


# ---------------------------------------------------------------------------
# criterion 9: DOS suite

def _sqrt_changepoint(stair, center, half_width):
    """Best-fit onset of an additional sqrt branch in the staircase."""
    best, best_k = np.inf, center
    for K in np.linspace(center - half_width, center + half_width, 121):
        Ew = np.linspace(center - 1.5 * half_width, center + 1.5 * half_width, 200)
        y = stair(Ew)
        X = np.vstack([np.ones_like(Ew), Ew - K,
                       np.sqrt(np.clip(Ew - K, 0.0, None))]).T
        coef, *_ = np.linalg.lstsq(X, y, rcond=None)
        sse = float(np.sum((X @ coef - y) ** 2))
        if sse < best:
            best, best_k = sse, K
    return best_k


def test_criterion_9_kink_positions(desk):
    stairs = dos_numeric(desk["proj02"], desk[0.2]["eig"].energies)
    n_sp = stairs["n_sp_num"]
    r = desk["spec"].r
    # first kink: onset of the one-escaped-boson branch
    k1 = n_sp.events[int(np.searchsorted(n_sp.cumulative[1:], 0.5))]
    d1 = 2.0 * np.pi * np.sqrt(EPS1) / r
    # second kink: sqrt-branch changepoint near the second left-well level
    d2 = 2.0 * np.pi * np.sqrt(EPS2) / r
    k2 = _sqrt_changepoint(n_sp, EPS2, 10.0 * d2)
    dev1, dev2 = abs(k1 - EPS1) / d1, abs(k2 - EPS2) / d2
    ok = dev1 <= 1.0 and dev2 <= 1.0
    detail = _report("9a", ok,
                     f"kinks at {k1:.4e}/{k2:.4e} vs eps1={EPS1:.4e}, "
                     f"eps2={EPS2:.4e}; shifts {dev1:.2f}/{dev2:.2f} level "
                     f"spacings (tol 1)")
    assert ok, detail


def test_criterion_9_tp_slope(desk):
    stairs = dos_numeric(desk["proj02"], desk[0.2]["eig"].energies)
    Eg = np.linspace(0.005, 0.02, 200)
    slope = np.polyfit(Eg, stairs["n_tp_num"](Eg), 1)[0]
    th = desk["spec"].r ** 2 / (8.0 * np.pi)
    dev = abs(slope - th) / th
    ok = dev <= 0.05
    detail = _report("9b", ok, f"n_tp slope {slope:.1f} vs r^2/(8 pi)={th:.1f} "
                               f"(dev {dev:.2%}; tol 5%)")
    assert ok, detail


def test_criterion_9_p3_plateau(desk):
    proj = desk["proj02"]
    E = desk[0.2]["eig"].energies
    i_thr = int(np.argmax(proj.p3 < 0.98))
    threshold = E[i_thr]
    below = E < 0.8 * threshold
    plateau_min = float(proj.p3[below].min())
    ok = (0.4 * EPS1 < threshold < 1.1 * EPS1) and plateau_min > 0.99
    detail = _report("9c", ok,
                     f"P3=1 plateau up to E={threshold:.4e} "
                     f"(eps1={EPS1:.4e}; quoted 3.3e-3 at full scale), "
                     f"min P3 below = {plateau_min:.4f}")
    assert ok, detail


# ---------------------------------------------------------------------------
# criterion 10: invariant suite

def test_criterion_10_unitarity_and_energy(desk):
    dec = desk[0.2]["dec"]
    E = dec.energies
    e_ref = np.sum(dec.normalized() ** 2 * E)
    ok = True
    for t in (0.0, 313.0, desk[0.2]["t_max"]):
        st = evolve(dec, t)
        ok &= abs(st.norm - 1.0) < 1e-10
        e_t = float(np.sum(np.abs(st.coeffs) ** 2 * E))
        ok &= abs(e_t - e_ref) / abs(e_ref) < 1e-10
    detail = _report("10a", ok, "unitarity and energy conservation to 1e-10")
    assert ok, detail


def test_criterion_10_region_closure(desk):
    for u in (0.0, 0.2):
        s = desk[u]["series"]
        closure = s["p1"] + s["p2"] + s["p3"] + s["p_barrier"]
        assert np.max(np.abs(closure - 1.0)) < 1e-9
    proj = desk["proj02"]
    ok = proj.closure_error() < 1e-9
    detail = _report("10b", ok, "region probabilities close to 1 within 1e-9 "
                                "(eigenstates and time series)")
    assert ok, detail


def test_criterion_10_reduced_density(desk):
    st = evolve(desk[0.2]["dec"], 0.7 * desk[0.2]["t_max"])
    rd = reduced_density(st)
    evals = np.linalg.eigvalsh(rd.mode_matrix)
    ok = (abs(rd.trace - 1.0) < 1e-9 and rd.hermiticity_error() < 1e-10
          and evals.min() > -1e-12)
    # late-time total energy equals twice the mean one-body energy
    e_two = float(np.sum(np.abs(st.coeffs) ** 2 * desk[0.2]["dec"].energies))
    e_red = 2.0 * float(np.sum(rd.occupations * rd.energies))
    ok &= abs(e_red - e_two) / e_two < 0.05
    detail = _report("10c", ok,
                     f"reduced density Hermitian/trace-1/PSD; late-time "
                     f"2 tr(h rho)={e_red:.4e} vs <H>={e_two:.4e}")
    assert ok, detail


def test_criterion_10_survival_identity(desk):
    devs = {u: float(np.max(np.abs(desk[u]["series"]["p1"]
                                   - desk[u]["series"]["p_surv"])))
            for u in (0.0, 0.2)}
    ok = all(d < 0.05 for d in devs.values())
    detail = _report("10d", ok,
                     f"max|P1 - P_surv| = {devs[0.0]:.3f} (u=0), "
                     f"{devs[0.2]:.3f} (u=0.2); tol 0.05")
    assert ok, detail


def test_criterion_10_truncation_stability():
    energies = [prepare_initial_state(0.2, ELL, n_cut=n, certify=False).energy
                for n in (32, 64, 128)]
    mono = bool(np.all(np.diff(energies) < 0))
    ladder = box_ground_ladder(0.2, ELL, (64, 128, 256))
    ok = mono and ladder["doubling_shift"] < 1e-5
    detail = _report("10e", ok,
                     f"variational monotonicity {mono}; extrapolated-energy "
                     f"ladder shift {ladder['doubling_shift']:.1e}")
    assert ok, detail


def test_criterion_10_late_slope_u_independent(desk):
    devs = {u: abs(desk[u]["gamma_nl_late"] - desk["gamma1_sp"])
            / desk["gamma1_sp"] for u in (0.0, 0.1, 0.2, 0.6)}
    ok = all(d <= 0.20 for d in devs.values())
    detail = _report("10f", ok,
                     "late N_l rates vs gamma1_sp (tol 20%): "
                     + ", ".join(f"u={u:g}: {d:.1%}" for u, d in devs.items()))
    assert ok, detail


# ---------------------------------------------------------------------------

def test_zz_recap():
    print("\n==== acceptance recap ====")
    for line in _LINES:
        print(line)
    print(f"({sum('PASS' in l for l in _LINES)} pass / "
          f"{sum('FAIL' in l for l in _LINES)} fail of {len(_LINES)})")

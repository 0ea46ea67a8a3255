"""Experiment runner: configuration, caching, sweeps, CSV emission.

Configs are YAML files with units documented in comments (see configs
emitted by ``--figure``).  All outputs are CSV tables with a one-line header
naming columns and units; each run also writes ``summary.json`` with fitted
rates, participation ratios and convergence audit results.  Outputs are
deterministic for identical config and cache state.

Exit codes: 0 success, 2 invalid configuration, 3 numerical failure,
1 unexpected error.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import cache as tbcache
from .bethe import BetheConvergenceError, bethe_energy_curve, solve_bethe
from .dynamics import (evolve, exp_fit, left_probability_series, peak_analysis,
                       reduced_density, region_probabilities_t, t_max)
from .scattering import PoleSearchError, find_resonances
from .spectral import (decay_rate_from_pr, dos_numeric, dos_theory,
                       participation_ratio, pr_sweep, region_projections,
                       weighted_pr, width_estimators)
from .spsolver import (PotentialSpec, RootCountError, left_box_overlaps,
                       region_overlap_matrix, solve_double_well)
from .twobody import (PairBasis, TruncationError, assemble_and_diagonalize,
                      expand_initial, prepare_initial_state)

KINDS = ("sp-sweep", "sp-decay", "bethe-curve", "tb-spectral", "tb-decay",
         "dos", "scattering")


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


@dataclass
class ExperimentConfig:
    kind: str
    potential: PotentialSpec
    u: float = 0.0
    initial_state: str = "box-ground"
    e_max: float = 0.05
    e2_cut: float = 0.05
    n_cut_box: int = 192
    max_deficit: float = 0.05
    n_times: int = 240
    t_max_factor: float = 1.0
    snapshots: tuple = ()
    r_values: tuple = ()
    u_values: tuple = ()
    levels: tuple = ((1, 1),)
    n_list: tuple = (1, 2)
    fit_range: tuple | None = None
    x_points: int = 1200
    out_dir: Path = Path("out")
    cache_dir: Path | None = None
    cache_policy: str = "use"
    extra: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        def need(key, section=None, src=None):
            d = src if src is not None else raw
            if key not in d:
                where = f"{section}.{key}" if section else key
                raise ConfigError(f"missing required field '{where}'")
            return d[key]

        kind = need("kind")
        if kind not in KINDS:
            raise ConfigError(f"field 'kind': unknown experiment {kind!r}, "
                              f"expected one of {', '.join(KINDS)}")
        pot_raw = need("potential")
        try:
            pot = PotentialSpec(ell=float(need("ell", "potential", pot_raw)),
                                b=float(pot_raw.get("b", 0.0)),
                                r=float(pot_raw.get("r", 0.0)),
                                v0=float(pot_raw.get("v0", 0.0)))
        except ValueError as exc:
            raise ConfigError(f"field 'potential': {exc}") from exc
        u = float(raw.get("u", 0.0))
        if u < 0:
            raise ConfigError(f"field 'u': must be nonnegative, got {u}")
        init = raw.get("initial_state", "box-ground")
        if init not in ("box-ground", "box-excited", "two-boson-ground"):
            raise ConfigError(f"field 'initial_state': unknown selector {init!r}")
        trunc = raw.get("truncation", {})
        time_cfg = raw.get("time", {})
        cache_cfg = raw.get("cache", {})
        policy = cache_cfg.get("policy", "use")
        if policy not in ("use", "off", "refresh"):
            raise ConfigError(f"field 'cache.policy': unknown policy {policy!r}")
        cfg = cls(
            kind=kind, potential=pot, u=u, initial_state=init,
            e_max=float(trunc.get("e_max", 0.05)),
            e2_cut=float(trunc.get("e2_cut", 0.05)),
            n_cut_box=int(trunc.get("n_cut_box", 192)),
            max_deficit=float(trunc.get("max_deficit", 0.05)),
            n_times=int(time_cfg.get("n_samples", 240)),
            t_max_factor=float(time_cfg.get("t_max_factor", 1.0)),
            snapshots=tuple(time_cfg.get("snapshots", ())),
            r_values=tuple(raw.get("r_values", ())),
            u_values=tuple(raw.get("u_values", ())),
            levels=tuple(tuple(lv) for lv in raw.get("levels", [(1, 1)])),
            n_list=tuple(raw.get("n_list", (1, 2))),
            fit_range=tuple(raw["fit_range"]) if "fit_range" in raw else None,
            x_points=int(raw.get("x_points", 1200)),
            out_dir=Path(raw.get("output", "out")),
            cache_dir=Path(cache_cfg["dir"]) if "dir" in cache_cfg else None,
            cache_policy=policy,
            extra=dict(raw.get("extra", {})),
        )
        for name, val in (("e_max", cfg.e_max), ("e2_cut", cfg.e2_cut),
                          ("n_cut_box", cfg.n_cut_box), ("n_samples", cfg.n_times)):
            if val <= 0:
                raise ConfigError(f"field '{name}': must be positive, got {val}")
        return cfg

    @classmethod
    def from_yaml(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            raw = yaml.safe_load(fh)
        if not isinstance(raw, dict):
            raise ConfigError("config file must hold a YAML mapping")
        return cls.from_dict(raw)


# ---------------------------------------------------------------------------
# output helpers

def _write_csv(path: Path, header: str, columns) -> None:
    cols = [np.asarray(c) for c in columns]
    with open(path, "w") as fh:
        fh.write("# " + header + "\n")
        for row in zip(*cols):
            fh.write(",".join(f"{v:.12g}" for v in row) + "\n")


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f"not serializable: {type(o)}")


def _write_summary(out_dir: Path, summary: dict) -> None:
    with open(out_dir / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


# ---------------------------------------------------------------------------
# experiment implementations

def _get_eigensystem(cfg: ExperimentConfig):
    spec = cfg.potential
    basis = solve_double_well(spec, max(cfg.e_max, cfg.e2_cut))
    pb = PairBasis(basis, n_cut=len(basis), e2_cut=cfg.e2_cut)
    prov = {
        "format": 1, "ell": spec.ell, "b": spec.b, "r": spec.r, "v0": spec.v0,
        "e_max": max(cfg.e_max, cfg.e2_cut), "u": cfg.u,
        "n_cut": int(pb.n_cut), "e2_cut": cfg.e2_cut,
        "interaction_region": cfg.extra.get("interaction_region", "full"),
    }
    if cfg.cache_dir is not None and cfg.cache_policy == "use":
        hit = tbcache.try_load(cfg.cache_dir, prov)
        if hit is not None:
            return hit, True
    eig = assemble_and_diagonalize(pb, cfg.u,
                                   prov["interaction_region"])
    if cfg.cache_dir is not None and cfg.cache_policy in ("use", "refresh"):
        tbcache.save_eigensystem(eig, cfg.cache_dir)
    return eig, False


def _sp_decay(cfg: ExperimentConfig, out: Path) -> dict:
    spec = cfg.potential
    n_init = 2 if cfg.initial_state == "box-excited" else 1
    e_init = (n_init * np.pi / spec.ell) ** 2
    basis = solve_double_well(spec, cfg.e_max)
    s_left = region_overlap_matrix(basis, "I")
    c = left_box_overlaps(basis, n_init)[:, n_init - 1]
    deficit = 1.0 - float(np.sum(c ** 2))
    c /= np.linalg.norm(c)
    tm = t_max(spec, e_init) * cfg.t_max_factor
    times = np.linspace(0.0, tm, cfg.n_times)
    pl = left_probability_series(c, basis.energies, times, s_left)
    gamma_guess = decay_rate_from_pr(participation_ratio(c), e_init, spec.r)
    early = (0.0, min(tm, 3.0 / max(gamma_guess, 1e-12)))
    rate, resid = exp_fit(times, pl, early)
    _write_csv(out / "p_left.csv", "t[L^2],P_left[1]", (times, pl))
    idx = np.arange(1, len(c) + 1)
    _write_csv(out / "coefficients.csv", "level_index[1],c_squared[1]",
               (idx, c ** 2))
    summary = {"kind": cfg.kind, "n_init": n_init, "e_init": e_init,
               "gamma_fit": rate, "fit_residual": resid,
               "fit_window": early, "pr": participation_ratio(c),
               "gamma_from_pr": gamma_guess, "norm_deficit": deficit,
               "n_states": len(basis)}
    try:
        poles = find_resonances(spec.ell, spec.b, spec.v0, [n_init])
        summary["gamma_pole"] = poles[0].rate
    except (PoleSearchError, ValueError) as exc:
        summary["gamma_pole_error"] = str(exc)
    return summary


def _sp_sweep(cfg: ExperimentConfig, out: Path) -> dict:
    if not cfg.r_values:
        raise ConfigError("field 'r_values': sp-sweep needs a list of widths")
    result = pr_sweep(cfg.r_values, cfg.potential.ell, cfg.potential.b,
                      cfg.potential.v0, initial=cfg.initial_state,
                      e_max=cfg.e_max, fit_range=cfg.fit_range)
    tab = result["table"]
    _write_csv(out / "pr_sweep.csv",
               "r[L],PR[1],PR_left[1],PR_right[1],P_left_t0[1]",
               (tab["r"], tab["pr"], tab["pr_l"], tab["pr_r"], tab["p_left0"]))
    if "peaks" in result:
        _write_csv(out / "pr_peaks.csv", "r[L],PR[1],prominence[1]",
                   (result["peaks"]["r"], result["peaks"]["pr"],
                    result["peaks"]["prominence"]))
    summary = {"kind": cfg.kind, "failures": result["failures"]}
    if "fit" in result:
        summary["fit"] = {k: v for k, v in result["fit"].items()}
        if "slope" in result["fit"]:
            e1 = (np.pi / cfg.potential.ell) ** 2
            summary["gamma_from_slope"] = 2.0 * result["fit"]["slope"] * np.sqrt(e1)
    return summary


def _bethe_curve(cfg: ExperimentConfig, out: Path) -> dict:
    u_values = np.asarray(cfg.u_values if cfg.u_values else np.linspace(0, 1, 21))
    curve = bethe_energy_curve(u_values, cfg.potential.ell, cfg.levels)
    cols = [curve["u"]] + [curve[lv] for lv in cfg.levels]
    header = "u[1/L]," + ",".join(f"E_{n1}_{n2}[1/L^2]" for (n1, n2) in cfg.levels)
    _write_csv(out / "bethe_energies.csv", header, cols)
    ground = [solve_bethe(u, cfg.potential.ell) for u in u_values]
    _write_csv(out / "bethe_momenta.csv", "u[1/L],k1[1/L],k2[1/L]",
               (u_values, [g.k1 for g in ground], [g.k2 for g in ground]))
    ell = cfg.potential.ell
    sat = (np.pi / ell) ** 2 + (2 * np.pi / ell) ** 2
    return {"kind": cfg.kind, "levels": [list(lv) for lv in cfg.levels],
            "ground_saturation_bound": sat,
            "ground_final": float(curve[cfg.levels[0]][-1])}


def _tb_spectral(cfg: ExperimentConfig, out: Path) -> dict:
    if cfg.r_values:
        result = pr_sweep(cfg.r_values, cfg.potential.ell, cfg.potential.b,
                          cfg.potential.v0, initial="two-boson-ground",
                          u=cfg.u, e2_cut=cfg.e2_cut,
                          max_deficit=cfg.max_deficit, fit_range=cfg.fit_range)
        tab = result["table"]
        _write_csv(out / "pr_sweep_tb.csv",
                   "r[L],PR[1],PR_1[1],PR_2[1],PR_3[1],norm_deficit[1]",
                   (tab["r"], tab["pr"], tab["pr_1"], tab["pr_2"], tab["pr_3"],
                    tab["deficit"]))
        summary = {"kind": cfg.kind, "mode": "sweep",
                   "failures": result["failures"]}
        if "fit" in result:
            summary["fit"] = {k: v for k, v in result["fit"].items()}
        return summary

    eig, cache_hit = _get_eigensystem(cfg)
    basis = eig.pair_basis.sp_basis
    s_left = region_overlap_matrix(basis, "I")
    s_right = region_overlap_matrix(basis, "III")
    proj = region_projections(eig, s_left, s_right)
    _write_csv(out / "projections.csv",
               "E[1/L^2],P1[1],P2[1],P3[1],P_barrier[1]",
               (eig.energies, proj.p1, proj.p2, proj.p3, proj.p_barrier))
    init = prepare_initial_state(cfg.u, cfg.potential.ell, cfg.n_cut_box,
                                 certify=False)
    dec = expand_initial(init, eig, max_deficit=cfg.max_deficit)
    c = dec.normalized()
    _write_csv(out / "expansion.csv", "E[1/L^2],c_squared[1]",
               (eig.energies, c ** 2))
    west = width_estimators(c, eig.energies)
    pr = participation_ratio(c)
    summary = {
        "kind": cfg.kind, "mode": "single", "cache_hit": cache_hit,
        "n_pairs": len(eig.pair_basis), "norm_deficit": dec.norm_deficit,
        "initial_energy": dec.initial_energy,
        "pr": pr,
        "pr_1": weighted_pr(c, proj.p1.clip(0, 1)),
        "pr_2": weighted_pr(c, proj.p2.clip(0, 1)),
        "pr_3": weighted_pr(c, proj.p3.clip(0, 1)),
        "gamma_median": west.gamma_median,
        "gamma_lorentz": west.gamma_lorentz,
        "width_fit_residual": west.fit_residual,
        "closure_error": proj.closure_error(),
    }
    return summary


def _tb_decay(cfg: ExperimentConfig, out: Path) -> dict:
    spec = cfg.potential
    eig, cache_hit = _get_eigensystem(cfg)
    basis = eig.pair_basis.sp_basis
    s_left = region_overlap_matrix(basis, "I")
    s_right = region_overlap_matrix(basis, "III")
    init = prepare_initial_state(cfg.u, spec.ell, cfg.n_cut_box, certify=False)
    dec = expand_initial(init, eig, max_deficit=cfg.max_deficit)
    tm = t_max(spec, init.energy_converged) * cfg.t_max_factor
    times = np.linspace(0.0, tm, cfg.n_times)
    series = region_probabilities_t(dec, times, s_left, s_right)
    _write_csv(out / "region_probabilities.csv",
               "t[L^2],N_left[1],P1[1],P2[1],P3[1],P_surv[1]",
               (times, series["n_left"], series["p1"], series["p2"],
                series["p3"], series["p_surv"]))

    summary = {"kind": cfg.kind, "cache_hit": cache_hit,
               "n_pairs": len(eig.pair_basis),
               "norm_deficit": dec.norm_deficit,
               "initial_energy": dec.initial_energy, "t_max": tm}
    gamma_guess = max(-np.log(max(series["p1"][-1], 1e-300)) / tm, 1e-12)
    try:
        summary["gamma_p1_early"], summary["p1_fit_residual"] = exp_fit(
            times, series["p1"], (0.0, min(tm, 3.0 / gamma_guess)))
    except ValueError as exc:
        summary["gamma_p1_error"] = str(exc)
    try:
        summary["gamma_nleft_late"], summary["nleft_fit_residual"] = exp_fit(
            times, series["n_left"], (2.0 * tm / 3.0, tm))
    except ValueError as exc:
        summary["gamma_nleft_error"] = str(exc)

    snapshots = cfg.snapshots if cfg.snapshots else (0.3, 0.6, 1.0)
    x = np.linspace(0.0, spec.ltot, cfg.x_points)
    peaks_final = None
    for frac in snapshots:
        t = frac * tm
        state = evolve(dec, t)
        rd = reduced_density(state, x_grid=x)
        tag = f"{frac:.2f}".replace(".", "p")
        _write_csv(out / f"density_x_t{tag}.csv",
                   "x[L],rho_diag[1/L],d_cumulative[1]",
                   (rd.x, rd.rho_x, rd.d_x))
        _write_csv(out / f"density_E_t{tag}.csv",
                   "E[1/L^2],occupation[1],density[L^2]",
                   (rd.energies, rd.occupations, rd.density_of_e))
        peaks_final = peak_analysis(rd.energies, rd.density_of_e)
    if peaks_final is not None:
        dominant = sorted(peaks_final, key=lambda p: -p["weight"])[:4]
        summary["final_energy_peaks"] = dominant
    return summary


def _dos(cfg: ExperimentConfig, out: Path) -> dict:
    eig, cache_hit = _get_eigensystem(cfg)
    basis = eig.pair_basis.sp_basis
    s_left = region_overlap_matrix(basis, "I")
    s_right = region_overlap_matrix(basis, "III")
    proj = region_projections(eig, s_left, s_right)
    stairs = dos_numeric(proj, eig.energies)
    left_energies = [(np.pi * n / cfg.potential.ell) ** 2
                     for n in range(1, 1 + int(np.sqrt(cfg.e2_cut) *
                                               cfg.potential.ell / np.pi) + 1)]
    E_grid = np.linspace(1e-6, eig.energies.max(), 800)
    th = dos_theory(E_grid, cfg.potential, left_energies)
    _write_csv(out / "dos.csv",
               "E[1/L^2],n_sp_num[1],n_sp_th[1],n_tp_num[1],n_tp_th[1]",
               (E_grid, stairs["n_sp_num"](E_grid), th["n_sp_th"],
                stairs["n_tp_num"](E_grid), th["n_tp_th"]))
    # least-squares slope of the numeric two-particle staircase
    m = (E_grid >= 0.005) & (E_grid <= 0.02)
    slope = np.polyfit(E_grid[m], stairs["n_tp_num"](E_grid[m]), 1)[0] \
        if np.count_nonzero(m) > 2 else float("nan")
    return {"kind": cfg.kind, "cache_hit": cache_hit,
            "n_pairs": len(eig.pair_basis),
            "n_tp_slope_numeric": float(slope),
            "n_tp_slope_theory": cfg.potential.r ** 2 / (8.0 * np.pi),
            "closure_error": proj.closure_error()}


def _scattering(cfg: ExperimentConfig, out: Path) -> dict:
    poles = find_resonances(cfg.potential.ell, cfg.potential.b,
                            cfg.potential.v0, cfg.n_list)
    _write_csv(out / "resonances.csv",
               "n[1],re_k[1/L],im_k[1/L],rate[1/L^2]",
               ([p.n for p in poles], [p.k.real for p in poles],
                [p.k.imag for p in poles], [p.rate for p in poles]))
    return {"kind": cfg.kind,
            "rates": {str(p.n): p.rate for p in poles},
            "residuals": {str(p.n): p.residual for p in poles}}


_RUNNERS = {
    "sp-decay": _sp_decay, "sp-sweep": _sp_sweep, "bethe-curve": _bethe_curve,
    "tb-spectral": _tb_spectral, "tb-decay": _tb_decay, "dos": _dos,
    "scattering": _scattering,
}


def run_experiment(cfg: ExperimentConfig) -> dict:
    """Execute one experiment; returns the summary record (also written to
    ``summary.json`` in the output directory)."""
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    summary = _RUNNERS[cfg.kind](cfg, out)
    summary["config_kind"] = cfg.kind
    _write_summary(out, summary)
    return summary


# ---------------------------------------------------------------------------
# canned figure-style configs

def figure_config(n: int, scale: str = "desk") -> dict:
    """Config dict reproducing one of the standard data tables.

    ``scale="desk"`` keeps right wells near 1000 and small bases; "full"
    uses the broad-well geometry (slow: dense diagonalizations).
    """
    full = scale == "full"
    r_big = 3000.0 if full else 1000.0
    pot = {"ell": 51.0, "b": 2.0, "r": r_big, "v0": 0.1}
    if n == 2:
        rs = list(np.arange(40.0, 155.0, 5.0)) + \
             list(np.arange(200.0, r_big + 1, 50.0 if full else 40.0))
        return {"kind": "sp-sweep", "potential": pot, "r_values": rs,
                "truncation": {"e_max": 0.04},
                "fit_range": [1000.0, r_big], "output": "fig2"}
    if n == 3:
        return {"kind": "bethe-curve", "potential": {"ell": 51.0},
                "u_values": list(np.round(np.concatenate([
                    np.linspace(0, 1, 21), [2, 5, 10, 20, 50]]), 6)),
                "levels": [[1, 1], [2, 1], [2, 2], [3, 1]], "output": "fig3"}
    if n == 4:
        rs = list(np.arange(40.0, 151.0, 2.0 if full else 5.0))
        return {"kind": "tb-spectral", "potential": pot, "u": 0.2,
                "r_values": rs,
                "truncation": {"e2_cut": 0.06, "max_deficit": 0.05},
                "output": "fig4"}
    if n == 5:
        return {"kind": "tb-spectral", "potential": pot, "u": 0.2,
                "truncation": {"e2_cut": 0.03 if full else 0.08,
                               "max_deficit": 0.08},
                "output": "fig5"}
    if n == 6:
        return {"kind": "tb-decay", "potential": pot, "u": 0.2,
                "initial_state": "two-boson-ground",
                "truncation": {"e2_cut": 0.03 if full else 0.08,
                               "max_deficit": 0.08},
                "time": {"n_samples": 240},
                "output": "fig6"}
    if n == 7:
        return {"kind": "tb-decay", "potential": pot, "u": 0.2,
                "initial_state": "two-boson-ground",
                "truncation": {"e2_cut": 0.03 if full else 0.08,
                               "max_deficit": 0.08},
                "time": {"n_samples": 240, "snapshots": [0.3, 0.6, 1.0, 1.4]},
                "output": "fig7"}
    raise ConfigError(f"field '--figure': no canned configuration for figure {n}")


def _set_threads(k: int) -> None:
    try:
        import threadpoolctl
        threadpoolctl.threadpool_limits(k)
    except ImportError:
        import os
        os.environ["OMP_NUM_THREADS"] = str(k)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(
        prog="dwdecay",
        description="Tunneling-decay experiments for one and two bosons in "
                    "an asymmetric double well")
    ap.add_argument("run", nargs="?", metavar="CONFIG",
                    help="YAML experiment configuration to execute")
    ap.add_argument("--figure", type=int, metavar="N",
                    help="run the canned configuration for figure N (2-7)")
    ap.add_argument("--scale", choices=("full", "desk"), default="desk",
                    help="size of canned runs (desk keeps r near 1000)")
    ap.add_argument("--out", metavar="DIR", help="output directory override")
    ap.add_argument("--cache", metavar="DIR", help="eigensystem cache directory")
    ap.add_argument("--threads", type=int, metavar="K",
                    help="limit dense-algebra thread pools")
    args = ap.parse_args(argv)

    if args.threads:
        _set_threads(args.threads)
    try:
        if args.figure is not None:
            raw = figure_config(args.figure, args.scale)
        elif args.run:
            with open(args.run) as fh:
                raw = yaml.safe_load(fh)
            if not isinstance(raw, dict):
                raise ConfigError("config file must hold a YAML mapping")
        else:
            ap.print_usage()
            print("error: provide a config file or --figure N", file=sys.stderr)
            return 2
        if args.out:
            raw["output"] = args.out
        if args.cache:
            raw.setdefault("cache", {})["dir"] = args.cache
        cfg = ExperimentConfig.from_dict(raw)
        summary = run_experiment(cfg)
    except (ConfigError, FileNotFoundError, yaml.YAMLError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (RootCountError, TruncationError, BetheConvergenceError,
            PoleSearchError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure [{type(exc).__name__}]: {exc}", file=sys.stderr)
        return 3
    print(json.dumps(summary, indent=2, sort_keys=True, default=_json_default))
    return 0


if __name__ == "__main__":
    sys.exit(main())

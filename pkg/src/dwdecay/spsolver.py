"""Exact single-particle eigenstates of the hard-walled double well.

Units: hbar = 1, mass = 1/2, so H = -d^2/dx^2 + V(x), E = k^2 and the group
velocity is v = 2k.  The potential is 0 on the left well [0, ell] and the
right well [ell+b, ell+b+r], V0 on the barrier, infinite outside.

Eigenvalues come from transcendental matching (value/derivative transfer
across the barrier with Dirichlet ends).  Root isolation never relies on
sign scans alone: the Sturm oscillation count of the shooting solution is
evaluated on a k-grid and bisected until every bracket holds exactly one
eigenvalue, so near-degenerate doublets cannot be missed.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import brentq

from ._piecewise import (cs_value, gauss_panels, segment_eval,
                         segment_product_integral, transfer)

__all__ = [
    "PotentialSpec", "Segment", "SpEigenpair", "SpBasis",
    "box_eigenpair", "solve_double_well", "region_overlap_matrix", "p_left",
    "left_box_overlaps", "RootCountError",
]


class RootCountError(RuntimeError):
    """Bracketing scan and node-count audit disagree on the number of roots."""


@dataclass(frozen=True)
class PotentialSpec:
    """Geometry of the double well: widths ell/b/r and barrier height v0.

    Lengths are in units of the reference length, energies in its inverse
    square.  ``b = 0`` with ``r = 0`` denotes the isolated left well.
    """
    ell: float
    b: float = 0.0
    r: float = 0.0
    v0: float = 0.0

    def __post_init__(self):
        if not (self.ell > 0):
            raise ValueError(f"ell must be positive, got {self.ell}")
        if self.b < 0 or self.r < 0:
            raise ValueError(f"b and r must be nonnegative, got b={self.b}, r={self.r}")
        if self.v0 < 0:
            raise ValueError(f"v0 must be nonnegative, got {self.v0}")
        if self.r > 0 and self.b == 0 and self.v0 != 0:
            # no barrier region: v0 is irrelevant, the wells merge into one box
            pass

    @property
    def ltot(self) -> float:
        return self.ell + self.b + self.r

    @property
    def region_bounds(self) -> tuple:
        """((x0, x1) for regions I, II, III); zero-width regions allowed."""
        return ((0.0, self.ell),
                (self.ell, self.ell + self.b),
                (self.ell + self.b, self.ltot))

    @property
    def is_box(self) -> bool:
        return self.b == 0.0 and self.r == 0.0


@dataclass(frozen=True)
class Segment:
    """psi(x) = p*cosh(kappa (x-x0)) + q*sinh(kappa (x-x0))/kappa on [x0, x0+length]."""
    x0: float
    length: float
    p: float
    q: float
    kappa: complex


@dataclass(frozen=True)
class SpEigenpair:
    """One normalized eigenstate with per-region piecewise coefficients."""
    n: int                      # 1-based energy ordering
    energy: float
    segments: tuple             # one Segment per region (length 0 if absent)
    match_residual: float       # relative value/derivative mismatch at x = ell + b

    @property
    def k(self) -> float:
        return float(np.sqrt(self.energy))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for seg in self.segments:
            if seg.length == 0.0:
                continue
            m = (x >= seg.x0) & (x <= seg.x0 + seg.length)
            out[m] = segment_eval(seg.p, seg.q, seg.kappa, x[m] - seg.x0)
        return out


@dataclass
class SpBasis:
    """Energy-ordered truncated set of eigenpairs of one PotentialSpec."""
    spec: PotentialSpec
    e_max: float
    eigenpairs: tuple
    _seg_arrays: dict = field(default_factory=dict, repr=False)

    def __len__(self):
        return len(self.eigenpairs)

    @property
    def energies(self) -> np.ndarray:
        return np.array([ep.energy for ep in self.eigenpairs])

    def segment_arrays(self, region: int):
        """(p, q, kappa) arrays of all states for one region index."""
        if region not in self._seg_arrays:
            segs = [ep.segments[region] for ep in self.eigenpairs]
            self._seg_arrays[region] = (
                np.array([s.p for s in segs]),
                np.array([s.q for s in segs]),
                np.array([s.kappa for s in segs], dtype=complex),
            )
        return self._seg_arrays[region]

    def evaluate(self, x) -> np.ndarray:
        """Matrix of state values, shape (n_states, len(x))."""
        x = np.asarray(x, dtype=float)
        out = np.zeros((len(self.eigenpairs), x.size))
        for ireg, (x0, x1) in enumerate(self.spec.region_bounds):
            if x1 <= x0:
                continue
            m = (x >= x0) & (x <= x1)
            if not np.any(m):
                continue
            p, q, kap = self.segment_arrays(ireg)
            t = (x[m] - x0)[None, :]
            out[:, m] = segment_eval(p[:, None], q[:, None], kap[:, None], t)
        return out


# ---------------------------------------------------------------------------
# construction

def box_eigenpair(n: int, width: float) -> SpEigenpair:
    """Analytic eigenstate of the hard-wall box: k = pi n / width."""
    if n < 1 or int(n) != n:
        raise ValueError(f"quantum number must be a positive integer, got {n}")
    if not (width > 0):
        raise ValueError(f"box width must be positive, got {width}")
    k = np.pi * n / width
    amp = np.sqrt(2.0 / width)
    seg = Segment(0.0, width, 0.0, amp * k, 1j * k)
    empty1 = Segment(width, 0.0, 0.0, 0.0, 1j * k)
    empty2 = Segment(width, 0.0, 0.0, 0.0, 1j * k)
    return SpEigenpair(n=int(n), energy=k * k, segments=(seg, empty1, empty2),
                       match_residual=0.0)


def _shoot(E, spec: PotentialSpec):
    """(value, derivative) of the left-anchored solution at x = ell + b."""
    k = np.sqrt(E)
    p, q = np.sin(k * spec.ell), k * np.cos(k * spec.ell)
    if spec.b > 0:
        p, q = transfer(p, q, spec.v0 - E, spec.b)
    return p, q


def _match_value(E, spec: PotentialSpec):
    """Scaled eigenvalue condition; sign changes exactly at eigenvalues."""
    k = np.sqrt(E)
    p2, q2 = _shoot(E, spec)
    if spec.r == 0:
        return p2 / (abs(p2) + abs(q2) / k + 1e-300)
    F = -p2 * k * np.cos(k * spec.r) - q2 * np.sin(k * spec.r)
    return F / (k * np.hypot(p2, q2 / k) + 1e-300)


def _count_osc_zeros(p, q, kbar, span):
    """Zeros of p*cos(kbar t) + (q/kbar) sin(kbar t) on (0, span]."""
    if span <= 0 or (p == 0.0 and q == 0.0):
        return 0
    delta = np.arctan2(q / kbar, p)
    lo = (-delta - np.pi / 2) / np.pi
    hi = (kbar * span - delta - np.pi / 2) / np.pi
    return max(0, int(np.floor(hi + 1e-12)) - int(np.floor(lo + 1e-12)))


def count_nodes(E: float, spec: PotentialSpec) -> int:
    """Sturm oscillation count: number of eigenvalues strictly below E.

    Counts interior zeros of the shooting solution; exact as long as E is
    not itself an eigenvalue (callers only evaluate at bracket midpoints).
    """
    k = np.sqrt(E)
    n1 = int(np.floor(k * spec.ell / np.pi + 1e-12))
    p, q = np.sin(k * spec.ell), k * np.cos(k * spec.ell)
    n2 = 0
    if spec.b > 0:
        z = spec.v0 - E
        p2, q2 = transfer(p, q, z, spec.b)
        if z > 1e-10:
            n2 = 1 if p * p2 < 0 else 0   # at most one zero of a*e^kt + b*e^-kt
        elif z < -1e-10:
            n2 = _count_osc_zeros(p, q, np.sqrt(-z), spec.b)
        else:
            n2 = 1 if p * p2 < 0 else 0   # near-linear solution
        p, q = p2, q2
    n3 = 0
    if spec.r > 0:
        n3 = _count_osc_zeros(p, q, k, spec.r)
    return n1 + n2 + n3


def _build_eigenpair(E, n, spec: PotentialSpec) -> SpEigenpair:
    k = np.sqrt(E)
    x1, x2 = spec.ell, spec.ell + spec.b
    seg1 = Segment(0.0, spec.ell, 0.0, k, 1j * k)
    p1, q1 = np.sin(k * spec.ell), k * np.cos(k * spec.ell)
    z = spec.v0 - E
    seg2 = Segment(x1, spec.b, p1, q1, np.sqrt(complex(z)))
    p2, q2 = transfer(p1, q1, z, spec.b) if spec.b > 0 else (p1, q1)
    scale = np.hypot(p2, q2 / k) + 1e-300
    if spec.r > 0:
        # anchor region III on the right wall so the Dirichlet end is exact
        beta = p2 * np.sin(k * spec.r) - (q2 / k) * np.cos(k * spec.r)
        pr = beta * np.sin(k * spec.r)
        qr = -beta * k * np.cos(k * spec.r)
        residual = np.hypot(p2 - pr, (q2 - qr) / k) / scale
        seg3 = Segment(x2, spec.r, pr, qr, 1j * k)
    else:
        residual = abs(p2) / scale
        seg3 = Segment(x2, 0.0, 0.0, 0.0, 1j * k)

    segs = (seg1, seg2, seg3)
    norm2 = 0.0
    for s in segs:
        if s.length > 0:
            norm2 += segment_product_integral(s.p, s.q, s.kappa,
                                              s.p, s.q, s.kappa, 0.0, s.length)
    scale = 1.0 / np.sqrt(norm2)
    segs = tuple(Segment(s.x0, s.length, s.p * scale, s.q * scale, s.kappa)
                 for s in segs)
    return SpEigenpair(n=n, energy=float(E), segments=segs,
                       match_residual=float(residual))


def solve_double_well(spec: PotentialSpec, e_max: float) -> SpBasis:
    """All eigenpairs with 0 < E <= e_max, matched and normalized.

    Raises RootCountError if the number of roots found disagrees with the
    node-count audit evaluated between consecutive eigenvalues.
    """
    if not (e_max > 0):
        raise ValueError(f"e_max must be positive, got {e_max}")
    if spec.is_box:
        n_max = int(np.floor(np.sqrt(e_max) * spec.ell / np.pi))
        pairs = tuple(box_eigenpair(n, spec.ell) for n in range(1, n_max + 1))
        return SpBasis(spec=spec, e_max=e_max, eigenpairs=pairs)
    if spec.b == 0:
        # no barrier: single box of the total length
        width = spec.ltot
        n_max = int(np.floor(np.sqrt(e_max) * width / np.pi))
        pairs = []
        for n in range(1, n_max + 1):
            bp = box_eigenpair(n, width)
            seg1 = Segment(0.0, spec.ell, bp.segments[0].p, bp.segments[0].q,
                           bp.segments[0].kappa)
            k = bp.k
            amp = np.sqrt(2.0 / width)
            seg2 = Segment(spec.ell, 0.0, 0.0, 0.0, 1j * k)
            p3 = amp * np.sin(k * spec.ell)
            q3 = amp * k * np.cos(k * spec.ell)
            seg3 = Segment(spec.ell, spec.r, p3, q3, 1j * k)
            pairs.append(SpEigenpair(n=n, energy=bp.energy,
                                     segments=(seg1, seg2, seg3),
                                     match_residual=0.0))
        return SpBasis(spec=spec, e_max=e_max, eigenpairs=tuple(pairs))

    # grid in k fine enough that box levels of the total length cannot share
    # a bracket; degenerate doublets are isolated by count bisection below
    dk = np.pi / (2.0 * spec.ltot)
    k_grid = np.arange(dk, np.sqrt(e_max) + dk, dk)
    E_grid = np.concatenate([[1e-14], k_grid ** 2])
    E_grid[-1] = min(E_grid[-1], e_max) if E_grid[-1] > e_max else E_grid[-1]
    if E_grid[-1] < e_max:
        E_grid = np.append(E_grid, e_max)
    counts = np.array([count_nodes(E, spec) for E in E_grid])

    roots = []
    stack = [(E_grid[i], E_grid[i + 1], counts[i], counts[i + 1])
             for i in range(len(E_grid) - 1) if counts[i + 1] > counts[i]]
    fn = lambda E: _match_value(E, spec)
    while stack:
        a, b, na, nb = stack.pop()
        if nb - na == 1 and fn(a) * fn(b) < 0:
            roots.append(brentq(fn, a, b, xtol=1e-300, rtol=8.9e-16, maxiter=200))
        else:
            if b - a < 1e-15 * max(b, 1.0):
                # unresolvable tangency: take the midpoint for each root
                roots.extend([0.5 * (a + b)] * (nb - na))
                continue
            m = 0.5 * (a + b)
            nm = count_nodes(m, spec)
            if nm > na:
                stack.append((a, m, na, nm))
            if nb > nm:
                stack.append((m, b, nm, nb))
    roots = np.sort(np.array(roots))

    # audit: node count at midpoints between consecutive roots must walk 1,2,3,...
    probes = np.concatenate([0.5 * (roots[:-1] + roots[1:]),
                             [min(e_max, roots[-1] * (1 + 1e-9) + 1e-12)]]) \
        if len(roots) else np.array([])
    for i, Ep in enumerate(probes):
        expected = i + 1
        got = count_nodes(Ep, spec)
        if got != expected:
            raise RootCountError(
                f"node-count audit failed near E={Ep:.6e}: counted {got}, "
                f"expected {expected} (roots found: {len(roots)})")

    pairs = tuple(_build_eigenpair(E, i + 1, spec) for i, E in enumerate(roots))
    return SpBasis(spec=spec, e_max=e_max, eigenpairs=pairs)


# ---------------------------------------------------------------------------
# overlaps

def _region_window(spec: PotentialSpec, region):
    if isinstance(region, str):
        idx = {"I": 0, "II": 1, "III": 2}
        if region not in idx:
            raise ValueError(f"unknown region {region!r}; use I, II, III or (lo, hi)")
        lo, hi = spec.region_bounds[idx[region]]
    else:
        lo, hi = float(region[0]), float(region[1])
        if not (0.0 <= lo <= hi <= spec.ltot + 1e-12):
            raise ValueError(f"region window ({lo}, {hi}) outside [0, {spec.ltot}]")
    return lo, hi


def region_overlap_matrix(basis: SpBasis, region) -> np.ndarray:
    """S_mn = int_region phi_m phi_n dx by exact per-region integration.

    ``region`` is "I", "II", "III" or an interval (lo, hi).
    """
    lo, hi = _region_window(basis.spec, region)
    n = len(basis)
    S = np.zeros((n, n))
    for ireg, (x0, x1) in enumerate(basis.spec.region_bounds):
        a, b = max(lo, x0), min(hi, x1)
        if b <= a:
            continue
        p, q, kap = basis.segment_arrays(ireg)
        S += segment_product_integral(
            p[:, None], q[:, None], kap[:, None],
            p[None, :], q[None, :], kap[None, :],
            a - x0, b - x0)
    return 0.5 * (S + S.T)


def p_left(coeffs: np.ndarray, basis: SpBasis, s_left: np.ndarray | None = None) -> float:
    """P_ell = c^dag S^I c for a normalized coefficient vector over the basis."""
    coeffs = np.asarray(coeffs)
    nrm = np.vdot(coeffs, coeffs).real
    if abs(nrm - 1.0) > 1e-8:
        raise ValueError(f"coefficient vector not normalized: |c|^2 = {nrm}")
    if s_left is None:
        s_left = region_overlap_matrix(basis, "I")
    return float(np.real(np.conj(coeffs) @ s_left @ coeffs))


def left_box_overlaps(basis: SpBasis, n_modes: int) -> np.ndarray:
    """O[m, i] = <phi_m | chi_{i+1}^ell>, chi the isolated-left-well modes.

    The chi_i vanish outside [0, ell], so only the region-I segments enter.
    """
    ell = basis.spec.ell
    ks = np.arange(1, n_modes + 1) * np.pi / ell
    amp = np.sqrt(2.0 / ell)
    p, q, kap = basis.segment_arrays(0)
    return segment_product_integral(
        p[:, None], q[:, None], kap[:, None],
        0.0, amp * ks[None, :], 1j * ks[None, :],
        0.0, ell)


def quadrature_overlap(state_a, state_b, spec: PotentialSpec, n_points=10_000):
    """Numeric-quadrature overlap oracle (tests only use this for cross-checks)."""
    x, w = gauss_panels(0.0, spec.ltot, k_max=2.0 * np.sqrt(max(
        state_a.energy, state_b.energy, 1e-12)))
    if x.size < n_points:
        x, w = gauss_panels(0.0, spec.ltot, 2.0 * np.pi * n_points / spec.ltot / 6.0)
    return float(np.sum(w * state_a(x) * state_b(x)))

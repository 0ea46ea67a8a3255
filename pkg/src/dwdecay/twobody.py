"""Symmetrized two-boson Hamiltonian in a single-particle eigenbasis.

The second-quantized interaction carries matrix elements
g_ijlm = u * int phi_i phi_j phi_l phi_m dx with no extra 1/2 prefactor, so
the pair-basis element between normalized pairs (i<=j) and (l<=m) is

    H_int[(ij),(lm)] = 4 u X_ijlm / sqrt((1+delta_ij)(1+delta_lm)).

With this convention the isolated-box ground energy reproduces the exact
two-boson quantization conditions of :mod:`dwdecay.bethe` (first-order shift
for the (1,1) pair: 3u/ell).

Truncation note: contact interactions converge like 1/n_cut in the mode
cutoff, so raw ground energies at any feasible n_cut carry O(1e-3) relative
tails.  Converged energies are therefore quoted from a Richardson fit
E(n) = E_inf + A/n + B/n^2 over an n_cut ladder; the fit residual is the
convergence certificate.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import hashlib

import numpy as np
import scipy.sparse as sparse
from scipy.sparse.linalg import lobpcg

from ._piecewise import gauss_panels
from .bethe import solve_bethe
from .spsolver import PotentialSpec, SpBasis, left_box_overlaps, solve_double_well

__all__ = [
    "PairBasis", "TwoBodyEigensystem", "SpectralDecomposition", "BoxInitialState",
    "interaction_element", "assemble_and_diagonalize", "prepare_initial_state",
    "expand_initial", "box_ground_ladder", "TruncationError",
]


class TruncationError(RuntimeError):
    """Basis too small for the requested accuracy."""


# ---------------------------------------------------------------------------
# pair basis

@dataclass
class PairBasis:
    """Ordered (i <= j) mode pairs of an SpBasis, optionally energy-windowed.

    ``e2_cut`` drops pairs with eps_i + eps_j above the cap; without it the
    dimension is n_cut (n_cut + 1) / 2.
    """
    sp_basis: SpBasis
    n_cut: int
    e2_cut: float | None = None
    i_idx: np.ndarray = field(init=False, repr=False)
    j_idx: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        n = min(self.n_cut, len(self.sp_basis))
        eps = self.sp_basis.energies[:n]
        ii, jj = np.triu_indices(n)
        if self.e2_cut is not None:
            keep = eps[ii] + eps[jj] <= self.e2_cut
            ii, jj = ii[keep], jj[keep]
        order = np.lexsort((jj, ii))
        self.i_idx, self.j_idx = ii[order], jj[order]
        self.n_cut = n

    def __len__(self):
        return self.i_idx.size

    @property
    def pair_energies(self) -> np.ndarray:
        eps = self.sp_basis.energies
        return eps[self.i_idx] + eps[self.j_idx]

    @property
    def sym_factor(self) -> np.ndarray:
        """2/sqrt(1+delta_ij) per pair; squares to the bosonic weight 4/(1+d)."""
        return 2.0 / np.sqrt(1.0 + (self.i_idx == self.j_idx))

    def mode_matrix(self, v: np.ndarray) -> np.ndarray:
        """Scatter a pair-coefficient vector into the symmetric mode matrix."""
        nm = self.n_cut
        out = np.zeros((nm, nm), dtype=v.dtype)
        off = self.i_idx != self.j_idx
        out[self.i_idx[off], self.j_idx[off]] = v[off] / np.sqrt(2.0)
        out[self.j_idx[off], self.i_idx[off]] = v[off] / np.sqrt(2.0)
        diag = ~off
        out[self.i_idx[diag], self.j_idx[diag]] = v[diag]
        return out

    def gather(self, mat: np.ndarray) -> np.ndarray:
        """Inverse of mode_matrix for symmetric matrices."""
        v = mat[self.i_idx, self.j_idx].astype(mat.dtype, copy=True)
        off = self.i_idx != self.j_idx
        v[off] *= np.sqrt(2.0)
        return v


# ---------------------------------------------------------------------------
# interaction elements

def _interaction_grid(basis: SpBasis, k_sum: float):
    x, w = gauss_panels(0.0, basis.spec.ltot, k_sum)
    return x, w


def interaction_element(i: int, j: int, l: int, m: int, basis: SpBasis,
                        u: float) -> float:
    """g_ijlm = u * int phi_i phi_j phi_l phi_m dx (0-based indices).

    Composite Gauss panels sized to the summed wavenumber of the four-fold
    product keep well over 6 nodes per beat wavelength.
    """
    ks = np.sqrt(basis.energies)
    k_sum = ks[i] + ks[j] + ks[l] + ks[m]
    x, w = _interaction_grid(basis, k_sum)
    vals = basis.evaluate(x)
    return float(u * np.sum(w * vals[i] * vals[j] * vals[l] * vals[m]))


@dataclass
class TwoBodyEigensystem:
    """Dense eigendecomposition of the two-boson Hamiltonian in a PairBasis."""
    pair_basis: PairBasis
    u: float
    energies: np.ndarray
    vectors: np.ndarray           # columns are eigenstates in the pair basis
    interaction_region: str = "full"

    def __len__(self):
        return self.energies.size

    @property
    def provenance(self) -> dict:
        spec = self.pair_basis.sp_basis.spec
        return {
            "format": 1,
            "ell": spec.ell, "b": spec.b, "r": spec.r, "v0": spec.v0,
            "e_max": self.pair_basis.sp_basis.e_max,
            "u": self.u,
            "n_cut": int(self.pair_basis.n_cut),
            "e2_cut": self.pair_basis.e2_cut,
            "interaction_region": self.interaction_region,
        }

    @property
    def content_hash(self) -> str:
        h = hashlib.sha256()
        h.update(repr(sorted(self.provenance.items())).encode())
        return h.hexdigest()

    def eigenstate_mode_matrix(self, n: int) -> np.ndarray:
        return self.pair_basis.mode_matrix(self.vectors[:, n])


def assemble_and_diagonalize(pair_basis: PairBasis, u: float,
                             interaction_region: str = "full") -> TwoBodyEigensystem:
    """Dense real-symmetric two-boson Hamiltonian and its full spectrum.

    ``interaction_region="left"`` restricts the contact term to x < ell + b
    (interaction switched off inside the broad right well), a diagnostic for
    the role of quasi-continuum interactions.
    """
    if u < 0:
        raise ValueError(f"u must be nonnegative, got {u}")
    if interaction_region not in ("full", "left"):
        raise ValueError(f"unknown interaction_region {interaction_region!r}")
    basis = pair_basis.sp_basis
    npair = len(pair_basis)
    diag = pair_basis.pair_energies

    if u == 0.0:
        order = np.argsort(diag, kind="stable")
        C = np.zeros((npair, npair))
        C[order, np.arange(npair)] = 1.0
        return TwoBodyEigensystem(pair_basis, 0.0, diag[order].copy(), C,
                                  interaction_region)

    ks = np.sqrt(basis.energies[: pair_basis.n_cut])
    x, w = _interaction_grid(basis, 4.0 * ks.max())
    if interaction_region == "left":
        w = np.where(x <= basis.spec.ell + basis.spec.b, w, 0.0)
    mode_vals = basis.evaluate(x)[: pair_basis.n_cut]
    F = (mode_vals[pair_basis.i_idx] * mode_vals[pair_basis.j_idx]
         * pair_basis.sym_factor[:, None])
    H = u * ((F * w[None, :]) @ F.T)
    H = 0.5 * (H + H.T)
    H[np.arange(npair), np.arange(npair)] += diag
    energies, C = np.linalg.eigh(H)
    # deterministic eigenvector sign: largest-magnitude component positive
    piv = np.argmax(np.abs(C), axis=0)
    C *= np.sign(C[piv, np.arange(npair)])[None, :]
    return TwoBodyEigensystem(pair_basis, u, energies, C, interaction_region)


# ---------------------------------------------------------------------------
# isolated-box fast path (closed-form interaction, sparse ground state)

def _box_pair_hamiltonian(n_cut: int, u: float, ell: float):
    """Sparse pair Hamiltonian of the box via sine product selection rules.

    X_ijlm = (1/2ell) [D(i-j, l-m) - D(i-j, l+m) - D(i+j, l-m) + D(i+j, l+m)]
    with D(p, q) = delta_{|p|,|q|} (doubled at p = q = 0), for 1-based modes.
    """
    eps = (np.pi / ell) ** 2 * np.arange(1, n_cut + 1) ** 2
    ii0, jj0 = np.triu_indices(n_cut)
    i_arr, j_arr = ii0 + 1, jj0 + 1
    npair = i_arr.size
    lookup = -np.ones((n_cut + 1, n_cut + 1), dtype=np.int64)
    lookup[i_arr, j_arr] = np.arange(npair)
    d_arr = j_arr - i_arr
    s_arr = i_arr + j_arr
    sym = 1.0 / np.sqrt(1.0 + (i_arr == j_arr))

    rows, cols, vals = [], [], []

    def _add(rsel, csel, coeff):
        rows.append(rsel)
        cols.append(csel)
        vals.append(coeff)

    # group pair indices by difference and by sum
    by_d = {}
    by_s = {}
    for a in range(npair):
        by_d.setdefault(d_arr[a], []).append(a)
        by_s.setdefault(s_arr[a], []).append(a)
    by_d = {k: np.array(v) for k, v in by_d.items()}
    by_s = {k: np.array(v) for k, v in by_s.items()}

    # +D(i-j, l-m): blocks of equal difference (value 2 on the d=0 block)
    for d, members in by_d.items():
        R = np.repeat(members, members.size)
        Cc = np.tile(members, members.size)
        _add(R, Cc, np.full(R.size, 2.0 if d == 0 else 1.0))
    # +D(i+j, l+m): blocks of equal sum
    for s, members in by_s.items():
        R = np.repeat(members, members.size)
        Cc = np.tile(members, members.size)
        _add(R, Cc, np.ones(R.size))
    # -D(i-j, l+m): row difference equals column sum (and transpose)
    for v in set(by_d).intersection(by_s):
        if v == 0:
            continue
        R = np.repeat(by_d[v], by_s[v].size)
        Cc = np.tile(by_s[v], by_d[v].size)
        _add(R, Cc, -np.ones(R.size))
        _add(Cc, R, -np.ones(R.size))

    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.concatenate(vals)
    # element = 4 u X / norms, X = bracket / (2 ell)
    vals = vals * (2.0 * u / ell) * sym[rows] * sym[cols]
    H = sparse.csr_matrix((vals, (rows, cols)), shape=(npair, npair))
    H = H + sparse.diags(eps[ii0] + eps[jj0])
    return H, (i_arr, j_arr), eps[ii0] + eps[jj0]


def _box_ground(n_cut: int, u: float, ell: float, tol=1e-11):
    if u == 0.0:
        ii, jj = np.triu_indices(n_cut)
        v = np.zeros(ii.size)
        v[0] = 1.0
        return 2.0 * (np.pi / ell) ** 2, v, (ii + 1, jj + 1)
    H, pairs, diag = _box_pair_hamiltonian(n_cut, u, ell)
    rng = np.random.default_rng(1234)
    X = np.zeros((H.shape[0], 1))
    X[0, 0] = 1.0
    X += 1e-3 * rng.standard_normal(X.shape)
    precond = sparse.diags(1.0 / (diag - diag.min() + 0.05))
    vals, vecs = lobpcg(H, X, M=precond, tol=tol, maxiter=3000, largest=False)
    v = vecs[:, 0]
    v = v * np.sign(v[np.argmax(np.abs(v))])
    return float(vals[0]), v, pairs


def box_ground_ladder(u: float, ell: float, n_cuts=(64, 128, 256)) -> dict:
    """Ground energy over an n_cut ladder with the Richardson-extrapolated limit.

    Returns {"n_cuts", "energies", "extrapolated", "doubling_shift"} where
    ``doubling_shift`` is the relative change of the extrapolated value when
    the ladder is shifted down one rung (the convergence certificate).
    """
    n_cuts = sorted(n_cuts)
    if len(n_cuts) < 3:
        raise ValueError("ladder needs at least three n_cut values")
    energies = np.array([_box_ground(n, u, ell)[0] for n in n_cuts])

    def _fit(ns, es):
        M = np.array([[1.0, 1.0 / n, 1.0 / n ** 2] for n in ns])
        return np.linalg.solve(M, es)[0] if len(ns) == 3 else \
            np.linalg.lstsq(M, es, rcond=None)[0][0]

    e_inf = _fit(n_cuts[-3:], energies[-3:])
    # certificate: refit on a shifted ladder; requires one extra rung
    half = [max(8, n // 2) for n in n_cuts[-3:]]
    e_half = np.array([_box_ground(n, u, ell)[0] for n in half])
    e_inf_half = _fit(half, e_half)
    shift = abs(e_inf - e_inf_half) / max(abs(e_inf), 1e-300)
    return {"n_cuts": list(n_cuts), "energies": energies,
            "extrapolated": float(e_inf), "doubling_shift": float(shift)}


@dataclass
class BoxInitialState:
    """Two-boson ground state of the isolated left well in its pair basis."""
    u: float
    ell: float
    n_cut: int
    coeffs: np.ndarray            # over box pairs (i <= j), 1-based modes
    i_idx: np.ndarray
    j_idx: np.ndarray
    energy: float                 # raw ground energy at n_cut
    energy_converged: float       # Richardson-extrapolated estimate
    doubling_shift: float

    def mode_matrix(self) -> np.ndarray:
        D = np.zeros((self.n_cut, self.n_cut))
        off = self.i_idx != self.j_idx
        D[self.i_idx[off] - 1, self.j_idx[off] - 1] = self.coeffs[off] / np.sqrt(2.0)
        D[self.j_idx[off] - 1, self.i_idx[off] - 1] = self.coeffs[off] / np.sqrt(2.0)
        diag = ~off
        D[self.i_idx[diag] - 1, self.j_idx[diag] - 1] = self.coeffs[diag]
        return D


def prepare_initial_state(u: float, ell: float, n_cut: int = 192,
                          certify: bool = True,
                          bethe_tol: float = 1e-5) -> BoxInitialState:
    """Ground state of two bosons in the isolated left well.

    With ``certify`` the converged energy from the Richardson ladder is
    checked against the exact quantization conditions at ``bethe_tol``
    relative; failure raises TruncationError.
    """
    if u < 0:
        raise ValueError(f"u must be nonnegative, got {u}")
    e0, v, (ii, jj) = _box_ground(n_cut, u, ell)
    if certify and u > 0:
        ladder = box_ground_ladder(u, ell, (n_cut // 4, n_cut // 2, n_cut))
        e_conv = ladder["extrapolated"]
        shift = ladder["doubling_shift"]
        e_ref = solve_bethe(u, ell).energy
        rel = abs(e_conv - e_ref) / e_ref
        if rel > bethe_tol:
            raise TruncationError(
                f"converged box energy {e_conv:.8e} misses exact value "
                f"{e_ref:.8e} by {rel:.2e} (> {bethe_tol})")
    else:
        e_conv, shift = e0, 0.0
    return BoxInitialState(u=u, ell=ell, n_cut=n_cut, coeffs=v,
                           i_idx=ii, j_idx=jj, energy=e0,
                           energy_converged=float(e_conv),
                           doubling_shift=float(shift))


# ---------------------------------------------------------------------------
# spectral decomposition of the initial state

@dataclass
class SpectralDecomposition:
    """Initial-state coefficients over a TwoBodyEigensystem (real)."""
    eigensystem: TwoBodyEigensystem
    coeffs: np.ndarray
    norm_deficit: float
    initial_energy: float         # converged two-boson energy of the source state

    @property
    def energies(self) -> np.ndarray:
        return self.eigensystem.energies

    def normalized(self) -> np.ndarray:
        return self.coeffs / np.sqrt(np.sum(self.coeffs ** 2))


def expand_initial(initial: BoxInitialState, eig: TwoBodyEigensystem,
                   max_deficit: float = 1e-3) -> SpectralDecomposition:
    """Expand the left-well pair state in the double-well two-body eigenbasis.

    Left-box modes are re-expanded in double-well modes through exact overlap
    integrals before pairing.  The norm deficit combines mode-completeness
    loss and the pair-energy window; quasi-continuum windows legitimately
    exceed the strict default, so ``max_deficit`` is a parameter.
    """
    pb = eig.pair_basis
    basis = pb.sp_basis
    if abs(basis.spec.ell - initial.ell) > 1e-12:
        raise ValueError("initial state and eigensystem have different left wells")
    O = left_box_overlaps(basis, initial.n_cut)[: pb.n_cut]
    D = initial.mode_matrix()
    Ddw = O @ D @ O.T
    v = pb.gather(Ddw)
    c = eig.vectors.T @ v
    deficit = 1.0 - float(np.sum(c ** 2))
    if deficit > max_deficit:
        raise TruncationError(
            f"norm deficit {deficit:.3e} exceeds {max_deficit:.1e}; "
            "increase e_max / e2_cut or raise max_deficit")
    return SpectralDecomposition(eigensystem=eig, coeffs=c,
                                 norm_deficit=deficit,
                                 initial_energy=initial.energy_converged)


def double_well_eigensystem(spec: PotentialSpec, u: float, e2_cut: float,
                            e_max: float | None = None,
                            interaction_region: str = "full") -> TwoBodyEigensystem:
    """Convenience pipeline: sp basis -> windowed pair basis -> eigensystem."""
    if e_max is None:
        e_max = e2_cut
    basis = solve_double_well(spec, e_max)
    pb = PairBasis(basis, n_cut=len(basis), e2_cut=e2_cut)
    return assemble_and_diagonalize(pb, u, interaction_region)

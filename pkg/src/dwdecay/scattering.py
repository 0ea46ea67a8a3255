"""Complex resonance momenta of the semi-infinite right well.

With region III unbounded, a purely outgoing solution G exp(ikx) exists only
at complex k.  The four matching conditions with the outgoing amplitude
eliminated reduce to one analytic scalar

    W(k) = psi'(ell + b) - i k psi(ell + b),

where psi is the left-anchored solution sin(kx) transferred across the
barrier; the decaying-in-barrier branch Re(kappa) >= 0 of
kappa = sqrt(v0 - k^2) is tracked continuously along the iteration.
Each root gives a complex energy k^2 whose imaginary part sets the decay
rate of the corresponding quasi-bound left-well level.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["ResonancePole", "PoleSearchError", "find_resonances"]


class PoleSearchError(RuntimeError):
    pass


@dataclass(frozen=True)
class ResonancePole:
    n: int
    k: complex
    residual: float

    @property
    def energy(self) -> complex:
        return self.k * self.k

    @property
    def rate(self) -> float:
        """Decay rate of |psi|^2: -2 Im(E)."""
        return -2.0 * self.energy.imag


def _outgoing(k, ell, b, v0, kappa_prev=None):
    """Raw analytic matching function W(k) and the scale for residual checks.

    Newton differentiates W itself; dividing by the (non-analytic) scale
    would corrupt the derivative.
    """
    kappa = np.sqrt(v0 - k * k + 0j)
    if kappa_prev is not None and (kappa * np.conj(kappa_prev)).real < 0:
        kappa = -kappa          # stay on the branch of the previous iterate
    elif kappa_prev is None and kappa.real < 0:
        kappa = -kappa          # decaying-in-barrier start
    p, q = np.sin(k * ell), k * np.cos(k * ell)
    C = np.cosh(kappa * b)
    S = np.sinh(kappa * b) / kappa if kappa != 0 else b
    p2 = C * p + S * q
    q2 = (v0 - k * k) * S * p + C * q
    W = q2 - 1j * k * p2
    # the transmitted amplitudes p2, q2 are exponentially small at opaque
    # barriers, so the residual is normalized by the terms being cancelled
    scale = (abs(v0 - k * k) * abs(S) * abs(p) + abs(C) * abs(q)
             + abs(k) * (abs(C) * abs(p) + abs(S) * abs(q)) + 1e-300)
    return W, scale, kappa


def _bound_level_seed(n, ell, v0):
    """Real quasi-bound momentum below the barrier: tan(k ell) = -k/kappa.

    This is the bound level of the well against a semi-infinite barrier; the
    resonance pole lies within O(exp(-2 kappa b)/ell) of it, so it seeds the
    Newton iteration even for nearly opaque barriers.
    """
    def g(k):
        kap = np.sqrt(v0 - k * k)
        return kap * np.sin(k * ell) + k * np.cos(k * ell)

    lo = (n - 0.5) * np.pi / ell
    hi = min(n * np.pi / ell, np.sqrt(v0) * (1 - 1e-12))
    if hi <= lo or g(lo) * g(hi) > 0:
        return None
    from scipy.optimize import brentq
    return brentq(g, lo, hi, xtol=1e-15, rtol=8.9e-16)


def _find_single(n, ell, b, v0, trust_frac=0.1, tol=1e-13, max_iter=200):
    k0 = n * np.pi / ell
    kap = None
    seed = _bound_level_seed(n, ell, v0) if k0 * k0 < v0 else None
    if seed is not None:
        k = complex(seed, 0.0)
    else:
        # above-barrier level: coarse |W| minimum on a lower-half-plane grid
        re = np.linspace(k0 - 0.3 * np.pi / ell, k0 + 0.3 * np.pi / ell, 61)
        im = np.linspace(-0.12 * k0, 0.0, 41)
        best, k = np.inf, complex(k0)
        for ki in im:
            for kr in re:
                val, scl, _ = _outgoing(complex(kr, ki), ell, b, v0)
                if abs(val) / scl < best:
                    best, k = abs(val) / scl, complex(kr, ki)
    trust = trust_frac * k0
    h = 1e-7 * k0
    for _ in range(max_iter):
        F, scale, kap = _outgoing(k, ell, b, v0, kap)
        if abs(F) / scale < tol:
            break
        Fp, _, _ = _outgoing(k + h, ell, b, v0, kap)
        Fm, _, _ = _outgoing(k - h, ell, b, v0, kap)
        dF = (Fp - Fm) / (2.0 * h)
        if dF == 0:
            raise PoleSearchError(f"stationary point in Newton iteration at k={k}")
        step = F / dF
        if abs(step) > trust:
            step *= trust / abs(step)
        k = k - step
    F, scale, _ = _outgoing(k, ell, b, v0, kap)
    res = abs(F) / scale
    if res > 1e-12:
        raise PoleSearchError(f"seed n={n}: no convergence, |W|={res:.2e} at k={k}")
    E = k * k
    if E.imag > 0:
        raise PoleSearchError(f"seed n={n}: converged to a growing solution E={E}")
    return ResonancePole(n=n, k=complex(k), residual=float(res))


def find_resonances(ell: float, b: float, v0: float, n_list) -> list:
    """Resonance poles seeded at the isolated-left-well momenta n pi / ell.

    Divergent seeds raise PoleSearchError naming the seed; a returned pole
    always has negative imaginary energy.
    """
    if not (v0 > 0):
        raise ValueError(f"v0 must be positive, got {v0}")
    if not (ell > 0 and b > 0):
        raise ValueError("ell and b must be positive for a barrier-coupled well")
    return [_find_single(int(n), ell, b, v0) for n in n_list]

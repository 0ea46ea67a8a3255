"""Exact two-boson eigenmomenta in a hard-wall box with contact coupling.

The pair (k1, k2) solves the coupled quantization conditions

    k1*ell = n1*pi + atan(u / (k1 - k2)) + atan(u / (k1 + k2))
    k2*ell = n2*pi - atan(u / (k1 - k2)) + atan(u / (k1 + k2))

with two-body energy k1^2 + k2^2.  Roots are obtained by continuation in u
from the decoupled u = 0 point with a Newton correction at every step; on the
equal-quantum-number branch the splitting opens as sqrt(2u/ell), which seeds
the first step.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["BetheMomenta", "BetheConvergenceError", "solve_bethe",
           "bethe_energy_curve"]


class BetheConvergenceError(RuntimeError):
    def __init__(self, msg, last_iterate=None):
        super().__init__(msg)
        self.last_iterate = last_iterate


@dataclass(frozen=True)
class BetheMomenta:
    k1: float
    k2: float
    n1: int
    n2: int
    u: float
    ell: float

    @property
    def energy(self) -> float:
        return self.k1 ** 2 + self.k2 ** 2

    @property
    def residual(self) -> float:
        f1, f2 = _residual(np.array([self.k1, self.k2]), self.u, self.ell,
                           self.n1, self.n2)
        return float(max(abs(f1), abs(f2)))


def _residual(k, u, ell, n1, n2):
    k1, k2 = k
    d, s = k1 - k2, k1 + k2
    ad = np.arctan2(u, d)
    as_ = np.arctan2(u, s)
    return np.array([k1 * ell - n1 * np.pi - ad - as_,
                     k2 * ell - n2 * np.pi + ad - as_])


def _jacobian(k, u, ell):
    k1, k2 = k
    d, s = k1 - k2, k1 + k2
    # d/dx atan2(u, x) = -u / (u^2 + x^2)
    gd = -u / (u * u + d * d)
    gs = -u / (u * u + s * s)
    return np.array([[ell - gd - gs, gd - gs],
                     [gd - gs, ell - gd - gs]])


def _newton(k, u, ell, n1, n2, tol=1e-14, max_iter=60):
    for _ in range(max_iter):
        F = _residual(k, u, ell, n1, n2)
        if np.max(np.abs(F)) < tol:
            return k, True, 0
        step = np.linalg.solve(_jacobian(k, u, ell), F)
        k = k - step
    F = _residual(k, u, ell, n1, n2)
    return k, bool(np.max(np.abs(F)) < tol), max_iter


def solve_bethe(u: float, ell: float, n1: int = 1, n2: int = 1,
                residual_tol: float = 1e-12) -> BetheMomenta:
    """Root of the coupled system by adaptive continuation from u = 0."""
    if u < 0:
        raise ValueError(f"attractive branch u={u} < 0 is not supported")
    if not (ell > 0):
        raise ValueError(f"ell must be positive, got {ell}")
    if not (n1 >= n2 >= 1):
        raise ValueError(f"need n1 >= n2 >= 1, got ({n1}, {n2})")

    k = np.array([n1 * np.pi / ell, n2 * np.pi / ell], dtype=float)
    if u == 0.0:
        return BetheMomenta(k1=k[0], k2=k[1], n1=n1, n2=n2, u=0.0, ell=ell)

    u_now, k_now = 0.0, k
    du = u if u <= 0.05 else 0.05 * u
    while u_now < u:
        du = min(du, u - u_now)
        u_next = u_now + du
        k_try = k_now.copy()
        if u_now == 0.0 and n1 == n2:
            # degenerate start: splitting opens as sqrt(2u/ell)
            delta = np.sqrt(2.0 * u_next / ell)
            k_try = k_try + np.array([0.5 * delta, -0.5 * delta])
        k_new, ok, iters = _newton(k_try, u_next, ell, n1, n2)
        # branch continuity: momenta ordered and move smoothly
        jump = np.max(np.abs(k_new - k_now))
        bound = 0.5 * np.pi / ell + 10.0 * du / ell
        if not ok or k_new[0] < k_new[1] - 1e-12 or jump > bound:
            du *= 0.5
            if du < 1e-12 * max(u, 1.0):
                raise BetheConvergenceError(
                    f"continuation stalled at u={u_now:.6g} (target {u})",
                    last_iterate=tuple(k_now))
            continue
        u_now, k_now = u_next, k_new
        du *= 1.5

    res = np.max(np.abs(_residual(k_now, u, ell, n1, n2)))
    if res > residual_tol:
        raise BetheConvergenceError(
            f"final residual {res:.3e} above {residual_tol}",
            last_iterate=tuple(k_now))
    return BetheMomenta(k1=float(k_now[0]), k2=float(k_now[1]),
                        n1=n1, n2=n2, u=float(u), ell=float(ell))


def bethe_energy_curve(u_samples, ell: float, levels=((1, 1),)) -> dict:
    """Energy of each level along ascending u samples.

    Returns {"u": array, (n1, n2): energy array, ...}; solver failures
    propagate with the offending (u, level) attached.
    """
    u_samples = np.asarray(u_samples, dtype=float)
    if u_samples.size == 0 or np.any(np.diff(u_samples) < 0) or u_samples[0] < 0:
        raise ValueError("u_samples must be ascending and nonnegative")
    out = {"u": u_samples.copy()}
    for (n1, n2) in levels:
        energies = np.empty_like(u_samples)
        for i, u in enumerate(u_samples):
            try:
                energies[i] = solve_bethe(u, ell, n1, n2).energy
            except BetheConvergenceError as exc:
                raise BetheConvergenceError(
                    f"level ({n1},{n2}) failed at u={u}: {exc}",
                    last_iterate=exc.last_iterate) from exc
        out[(n1, n2)] = energies
    return out

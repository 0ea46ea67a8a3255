"""Stable primitives for piecewise constant-potential wavefunctions.

Every wavefunction segment on an interval of length ``T`` is written as

    psi(t) = p * C(t) + q * S(t),        t = x - x0,

with ``C(t) = cosh(kappa t)`` and ``S(t) = sinh(kappa t)/kappa``.  Both are
entire functions of ``kappa**2 = V - E``, so a single complex ``kappa``
covers the evanescent (V > E), oscillatory (V < E, kappa imaginary) and
degenerate (V ~ E) cases without switching formulas.  ``p`` and ``q`` are the
value and first derivative at the left edge of the segment.

Products of two such segments reduce to exponentials, so every overlap
integral collapses to the primitive h(a) = int_0^T exp(a t) dt evaluated with
complex a.
"""
from __future__ import annotations

import numpy as np

# below this |kappa*T| the h-difference formulas lose too many digits and we
# integrate the (perfectly smooth) product with a fixed Gauss rule instead
_DEGENERATE_KT = 1e-5

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(48)


def h_exp(a, t0, t1):
    """int_{t0}^{t1} exp(a t) dt for complex ``a``, stable for small |a|."""
    a = np.asarray(a, dtype=complex)
    t0 = np.asarray(t0, dtype=float)
    t1 = np.asarray(t1, dtype=float)

    def _h(aT, T):
        small = np.abs(aT) < 1e-8
        safe = np.where(small, 1.0, aT)
        series = T * (1.0 + aT / 2.0 + aT ** 2 / 6.0 + aT ** 3 / 24.0)
        return np.where(small, series, T * (np.exp(aT) - 1.0) / safe)

    return _h(a * t1, t1) - _h(a * t0, t0)


def cs_value(kappa, t):
    """(C, S) = (cosh(kappa t), sinh(kappa t)/kappa), entire in kappa**2."""
    kt = np.asarray(kappa * t, dtype=complex)
    C = np.cosh(kt)
    small = np.abs(kt) < 1e-6
    kap_safe = np.where(np.abs(kappa) == 0.0, 1.0, kappa)
    t_arr = np.asarray(t, dtype=float)
    S = np.where(small,
                 t_arr * (1.0 + kt ** 2 / 6.0 + kt ** 4 / 120.0),
                 np.sinh(kt) / kap_safe)
    return C, S


def segment_eval(p, q, kappa, t):
    """psi(t) for one segment; inputs broadcast, result is real."""
    C, S = cs_value(kappa, t)
    return (p * C + q * S).real


def segment_eval_d(p, q, kappa, t):
    """psi'(t); d/dt[C] = kappa**2 S, d/dt[S] = C."""
    C, S = cs_value(kappa, t)
    return (p * kappa ** 2 * S + q * C).real


def transfer(p, q, z, length):
    """Propagate (value, derivative) across a segment with kappa**2 = z."""
    kappa = np.sqrt(complex(z))
    C, S = cs_value(kappa, length)
    C, S = C.real, S.real
    return C * p + S * q, z * S * p + C * q


def segment_product_integral(p1, q1, kap1, p2, q2, kap2, t0, t1):
    """int_{t0}^{t1} psi1(t) psi2(t) dt via the four-exponential expansion.

    All arguments broadcast; kap1/kap2 are complex.  Near-degenerate entries
    (|kappa|*span below _DEGENERATE_KT with kappa nonzero would cancel badly)
    are recomputed with a 48-point Gauss rule, which is exact to machine
    precision because the integrand is analytic with sub-radian phase there.
    """
    p1, q1, kap1, p2, q2, kap2, t0, t1 = np.broadcast_arrays(
        np.asarray(p1, float), np.asarray(q1, float), np.asarray(kap1, complex),
        np.asarray(p2, float), np.asarray(q2, float), np.asarray(kap2, complex),
        np.asarray(t0, float), np.asarray(t1, float))
    scalar = p1.ndim == 0
    if scalar:
        p1, q1, kap1, p2, q2, kap2, t0, t1 = (
            np.atleast_1d(a) for a in (p1, q1, kap1, p2, q2, kap2, t0, t1))

    hpp = h_exp(kap1 + kap2, t0, t1)
    hpm = h_exp(kap1 - kap2, t0, t1)
    hmp = h_exp(-kap1 + kap2, t0, t1)
    hmm = h_exp(-kap1 - kap2, t0, t1)

    span = t1 - t0
    with np.errstate(divide="ignore", invalid="ignore"):
        CC = 0.25 * (hpp + hpm + hmp + hmm)
        CS = (hpp - hpm + hmp - hmm) / (4.0 * kap2)
        SC = (hpp + hpm - hmp - hmm) / (4.0 * kap1)
        SS = (hpp - hpm - hmp + hmm) / (4.0 * kap1 * kap2)
        out = (p1 * p2 * CC + p1 * q2 * CS + q1 * p2 * SC + q1 * q2 * SS).real

    bad = ((np.abs(kap1 * span) < _DEGENERATE_KT)
           | (np.abs(kap2 * span) < _DEGENERATE_KT)) & (span > 0)
    if np.any(bad):
        idx = np.nonzero(bad)
        for flat in zip(*idx):
            a, b = t0[flat], t1[flat]
            tt = 0.5 * (b - a) * _GL_NODES + 0.5 * (a + b)
            ww = 0.5 * (b - a) * _GL_WEIGHTS
            f1 = segment_eval(p1[flat], q1[flat], kap1[flat], tt)
            f2 = segment_eval(p2[flat], q2[flat], kap2[flat], tt)
            out[flat] = np.sum(ww * f1 * f2)
    if scalar:
        return float(out[0])
    return out


def gauss_panels(x_lo, x_hi, k_max, nodes_per_panel=12, max_phase=3.0):
    """Composite Gauss-Legendre grid resolving oscillations up to ``k_max``.

    Panel widths keep the accumulated phase below ``max_phase`` radians so a
    12-node rule is exact to machine precision; the node density always
    exceeds 6 nodes per shortest beat wavelength.
    """
    width = max_phase / max(k_max, 1e-12)
    n_panels = max(1, int(np.ceil((x_hi - x_lo) / width)))
    xg, wg = np.polynomial.legendre.leggauss(nodes_per_panel)
    edges = np.linspace(x_lo, x_hi, n_panels + 1)
    a = edges[:-1][:, None]
    b = edges[1:][:, None]
    x = (0.5 * (b - a) * xg[None, :] + 0.5 * (a + b)).ravel()
    w = (0.5 * (b - a) * wg[None, :] + np.zeros_like(a)).ravel()
    return x, w

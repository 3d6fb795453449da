"""Oscillator phase noise and residual frequency offset at the SINR level.

Phase noise is a piecewise power-law PSD around the carrier whose integral
over the occupied band gives the fraction of signal power smeared into
inter-carrier interference. That fraction bounds the usable baseband SINR.
The residual frequency offset left by a training-based estimator is modeled
as a zero-mean Gaussian whose variance shrinks with the number of subcarriers
and the baseband SINR; a given offset scales the SINR through a sinc-squared
attenuation plus an ICI term.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

__all__ = [
    "RFO_EPS_LIMIT",
    "PhaseNoisePsdParams",
    "phase_noise_psd",
    "ici_factor",
    "sinr_baseband",
    "rfo_std",
    "sinr_after_rfo",
]

# ICI coefficient of the residual-offset SINR model; fixed by the two-symbol
# training structure, not tunable.
RFO_ICI_COEFF = 0.5947

# Random residual-offset draws are confined strictly inside the +-0.5 domain
# of sinr_after_rfo; the Gaussian tail beyond this is negligible at any SINR
# where a link is usable.
RFO_EPS_LIMIT = 0.4999


@dataclass(frozen=True)
class PhaseNoisePsdParams:
    """Piecewise oscillator PSD: flat close to the carrier, log-linear
    roll-off between f_l and f_h, plus a wideband floor."""

    a: float = 8.5       # near-carrier plateau is 10^-a (1/Hz)
    b: float = 2.0       # decades dropped across [f_l, f_h]
    c: float = 12.5      # wideband floor is 10^-c (1/Hz)
    f_l: float = 10e3    # plateau corner, Hz
    f_h: float = 100e3   # roll-off reference frequency, Hz

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0 and self.c > 0):
            raise ValueError("PSD exponents a, b, c must be positive")
        if not (0 < self.f_l < self.f_h):
            raise ValueError("PSD corners must satisfy 0 < f_l < f_h")


def phase_noise_psd(f, psd: PhaseNoisePsdParams = PhaseNoisePsdParams()):
    """One-sided-symmetric oscillator PSD value at offset frequency f (Hz).

    Even in f, continuous at +-f_l, and floored at 10^-c far from the carrier.
    Accepts scalars or arrays.
    """
    f = np.asarray(f, dtype=float)
    af = np.abs(f)
    slope = psd.b / (psd.f_h - psd.f_l)
    shaped = np.where(
        af < psd.f_l,
        10.0 ** (-psd.a),
        10.0 ** (-(af - psd.f_l) * slope - psd.a),
    )
    out = 10.0 ** (-psd.c) + shaped
    return float(out) if np.isscalar(f) or out.ndim == 0 else out


def ici_factor(psd: PhaseNoisePsdParams, w_t_hz: float) -> float:
    """Fraction of signal power the oscillator smears across the band:
    the PSD integrated over [-W_T/2, +W_T/2].

    Uses adaptive quadrature with breakpoints at the PSD corners.
    """
    if w_t_hz <= 0:
        raise ValueError("total bandwidth must be positive")
    half = w_t_hz / 2.0
    points = [p for p in (-psd.f_l, psd.f_l) if -half < p < half]
    val, err = integrate.quad(
        lambda f: phase_noise_psd(f, psd),
        -half,
        half,
        points=points or None,
        limit=200,
        epsabs=0.0,
        epsrel=1e-6,
    )
    if not math.isfinite(val) or err > 1e-4 * abs(val):
        raise ArithmeticError("ICI quadrature did not converge")
    return val


def sinr_baseband(sinr_in, f_ici: float):
    """Baseband SINR after phase-noise ICI: sinr / (1 + 2 * sinr * f_ici).

    Strictly increasing in sinr_in and saturating at 1 / (2 * f_ici).
    """
    sinr_in = np.asarray(sinr_in, dtype=float)
    if np.any(sinr_in < 0):
        raise ValueError("sinr_in must be non-negative")
    if f_ici < 0:
        raise ValueError("f_ici must be non-negative")
    out = sinr_in / (1.0 + 2.0 * sinr_in * f_ici)
    return float(out) if out.ndim == 0 else out


def rfo_std(sinr_b: float, n_sub: int) -> float:
    """Standard deviation of the residual carrier offset (in subcarrier
    spacings) after two-training-symbol estimation: 1/(2*pi*sqrt(n_sub*sinr))."""
    if sinr_b <= 0:
        raise ValueError("sinr_b must be positive")
    if n_sub < 1:
        raise ValueError("n_sub must be at least 1")
    return 1.0 / (2.0 * math.pi * math.sqrt(n_sub * sinr_b))


def sinr_after_rfo(sinr_b, eps):
    """SINR once a residual offset of eps subcarrier spacings is applied:
    sinc^2 attenuation of the useful power over 1 + coeff * sinr * sin^2(pi eps).

    Defined for |eps| < 0.5 (beyond that the offset aliases onto a neighbor
    subcarrier); even in eps and equal to sinr_b at eps = 0.
    """
    sinr_b = np.asarray(sinr_b, dtype=float)
    eps = np.asarray(eps, dtype=float)
    if np.any(sinr_b < 0):
        raise ValueError("sinr_b must be non-negative")
    if np.any(np.abs(eps) >= 0.5):
        raise ValueError("residual offset must satisfy |eps| < 0.5")
    att = np.sinc(eps) ** 2
    den = 1.0 + RFO_ICI_COEFF * sinr_b * np.sin(np.pi * eps) ** 2
    out = sinr_b * att / den
    return float(out) if out.ndim == 0 else out

"""Closed-form saturated Beer-Lambert relations.

All saturation parameters are dimensionless intensities in units of the
two-level saturation intensity. Functions accept scalars or numpy arrays and
broadcast like numpy ufuncs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import DomainError
from .kernels import lambert_w0_exp

D2_WAVELENGTH = 780.24e-9
ALPHA_ISO = 2.12
ALPHA_SA_LINEAR = 1.829
IMAGING_NA = 0.185
PROBE_WAIST = 1.13e-3
PROBE_OFFSET = 464e-6

# below this the Lambert form is replaced by its s_c -> 0 limit
SC_SMALL = 1e-12


def solid_angle_from_na(na: float) -> float:
    """Collection solid angle (sr) of an objective with numerical aperture ``na``."""
    if not 0.0 < na < 1.0:
        raise DomainError(f"numerical aperture must be in (0, 1), got {na}")
    return 2.0 * math.pi * (1.0 - math.cos(math.asin(na)))


def gaussian_intensity_factor(offset: float, waist: float) -> float:
    """Relative intensity of a Gaussian beam at radial ``offset`` from its axis."""
    return math.exp(-2.0 * (offset / waist) ** 2)


@dataclass(frozen=True)
class ProbeGeometry:
    """Probe and imaging geometry.

    ``solid_angle`` defaults to the collection cone of the NA 0.185 aperture
    and ``offcenter_intensity_factor`` to the 464 um offset in a 1.13 mm
    waist probe.
    """

    wavelength: float = D2_WAVELENGTH
    alpha_iso: float = ALPHA_ISO
    solid_angle: float = field(default_factory=lambda: solid_angle_from_na(IMAGING_NA))
    offcenter_intensity_factor: float = field(
        default_factory=lambda: gaussian_intensity_factor(PROBE_OFFSET, PROBE_WAIST))

    def __post_init__(self):
        if not self.wavelength > 0:
            raise DomainError("wavelength must be positive")
        if not self.alpha_iso >= 1.0:
            raise DomainError(f"alpha_iso must be >= 1, got {self.alpha_iso}")
        # 0 is accepted as "no collected fluorescence"
        if not 0.0 <= self.solid_angle < 4 * math.pi:
            raise DomainError(f"solid_angle must be in [0, 4pi), got {self.solid_angle}")
        if not 0.0 < self.offcenter_intensity_factor <= 1.0:
            raise DomainError("offcenter_intensity_factor must be in (0, 1]")

    @property
    def k(self) -> float:
        return 2.0 * math.pi / self.wavelength

    @property
    def sigma0(self) -> float:
        """Resonant two-level cross section 6 pi / k^2 (m^2)."""
        return 6.0 * math.pi / self.k ** 2

    @property
    def sigma0_iso(self) -> float:
        return self.sigma0 / self.alpha_iso


@dataclass(frozen=True)
class SaturationState:
    s_c: float
    s_i: float = 0.0
    alpha_sa: float = 1.0

    def __post_init__(self):
        if self.s_c < 0 or self.s_i < 0:
            raise DomainError("saturation parameters must be non-negative")
        if not 1.0 <= self.alpha_sa <= ALPHA_SA_LINEAR:
            raise DomainError(
                f"alpha_sa must be in [1, {ALPHA_SA_LINEAR}], got {self.alpha_sa}")


@dataclass(frozen=True)
class RatePair:
    """Coherent and total scattering rates in units of the linewidth."""

    r_coh: float
    r_tot: float


class AlphaEstimate(NamedTuple):
    alpha: float
    consistent: bool


def _as_out(x, scalar):
    return float(x) if scalar else x


def od_from_transmission(T, s_c, alpha):
    """Optical density from a saturated transmission measurement.

    ``b = -alpha ln T + s_c (1 - T)``.
    """
    T = np.asarray(T, dtype=float)
    if np.any(~(T > 0)):
        raise DomainError("transmission must be > 0")
    if np.any(~(np.asarray(alpha) > 0)):
        raise DomainError("alpha must be > 0")
    scalar = T.ndim == 0 and np.ndim(s_c) == 0 and np.ndim(alpha) == 0
    b = -alpha * np.log(T) + s_c * (1.0 - T)
    return _as_out(b, scalar)


def transmission_from_od(b, s_c, alpha):
    """Probe transmission through optical density ``b`` at saturation ``s_c``.

    Inverse of :func:`od_from_transmission`, written with the principal
    Lambert branch: ``T = (alpha/s_c) W((s_c/alpha) exp((s_c - b)/alpha))``.
    For ``s_c < 1e-12`` the unsaturated limit ``exp(-b/alpha)`` is returned.
    The Lambert argument is handled in log space so large ``s_c/alpha`` does
    not overflow.
    """
    b_, s_, a_ = np.broadcast_arrays(np.asarray(b, dtype=float),
                                     np.asarray(s_c, dtype=float),
                                     np.asarray(alpha, dtype=float))
    scalar = b_.ndim == 0
    if np.any(~(b_ >= 0)):
        raise DomainError("optical density must be >= 0")
    if np.any(~(s_ >= 0)):
        raise DomainError("saturation must be >= 0")
    if np.any(~(a_ > 0)):
        raise DomainError("alpha must be > 0")
    b_, s_, a_ = (np.atleast_1d(v).ravel() for v in (b_, s_, a_))
    T = np.empty_like(b_)

    small = s_ < SC_SMALL
    T[small] = np.exp(-b_[small] / a_[small])

    big = ~small
    if big.any():
        ratio = s_[big] / a_[big]
        logarg = np.log(ratio) + ratio - b_[big] / a_[big]
        T[big] = lambert_w0_exp(logarg) / ratio
    T[b_ == 0] = 1.0
    if scalar:
        return float(T[0])
    return T.reshape(np.broadcast(np.asarray(b), np.asarray(s_c), np.asarray(alpha)).shape)


def alpha_from_transmission(T, s_c, b_true) -> AlphaEstimate:
    """The alpha that maps a measured ``T`` at saturation ``s_c`` onto ``b_true``.

    ``alpha = (b_true - s_c (1 - T)) / (-ln T)``. Inconsistent inputs give
    ``alpha <= 0``; it is returned unchanged with ``consistent=False``.
    """
    T = np.asarray(T, dtype=float)
    if np.any(~(T > 0)):
        raise DomainError("transmission must be > 0")
    if np.any(T >= 1):
        raise DomainError("alpha is indeterminate at T >= 1")
    alpha = (b_true - s_c * (1.0 - T)) / (-np.log(T))
    if np.ndim(alpha) == 0:
        return AlphaEstimate(float(alpha), bool(alpha > 0))
    return AlphaEstimate(alpha, alpha > 0)


def scattering_rates(state: SaturationState) -> RatePair:
    """Coherent and total scattering rates of the effective two-level system
    embedded in an incoherent background of saturation ``s_i``."""
    alpha = state.alpha_sa * (1.0 + state.s_i)
    alpha_c = 1.0 + state.s_c
    x = state.s_c / alpha
    y = state.s_i / alpha_c
    r_coh = x / (1.0 + x) ** 2 / (2.0 * alpha)
    r_tot = 0.5 * (x / (1.0 + x) + y / (1.0 + y))
    return RatePair(r_coh, r_tot)


def alpha_highsat_asymptote(b, alpha_iso=ALPHA_ISO):
    """High-saturation law ``alpha = 1 + b / (2 alpha_iso)``."""
    b = np.asarray(b, dtype=float)
    if np.any(b < 0):
        raise DomainError("optical density must be >= 0")
    out = 1.0 + b / (2.0 * alpha_iso)
    return float(out) if out.ndim == 0 else out


def alpha_diffusive_asymptote(b, omega, c_diff=1.0):
    """Diffusive-regime law ``alpha = b / ln(2 pi b / (C omega))``.

    The law is only meaningful on its increasing branch, where the logarithm
    exceeds 1; below that the curve turns over and diverges at argument 1.

    Raises
    ------
    DomainError
        If ``ln(2 pi b / (C omega)) <= 1`` (up to rounding).
    """
    if not (omega > 0 and c_diff > 0):
        raise DomainError("omega and c_diff must be > 0")
    arg = 2.0 * math.pi * np.asarray(b, dtype=float) / (c_diff * omega)
    with np.errstate(divide="ignore", invalid="ignore"):
        log_arg = np.log(arg)
    if np.any(~(log_arg > 1.0 + 8 * np.finfo(float).eps)):
        raise DomainError("diffusive asymptote needs ln(2 pi b / (C omega)) > 1")
    out = np.asarray(b, dtype=float) / log_arg
    return float(out) if out.ndim == 0 else out

"""Per-pixel recovery of (alpha, b) from a probe-saturation sweep.

For each pixel the optical density implied by every sweep point,
``b_j(alpha) = alpha * u_j + v_j`` with ``u_j = -ln T_j`` and
``v_j = s_j (1 - T_j)``, is affine in alpha, so the alpha that makes the
density least dependent on the probe intensity (minimum spread of ``b_j``)
has the closed form ``-cov(u, v) / var(u)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy import stats

from .errors import ValidationError

T_MIN = 0.05
# points transmitting more than this carry no usable absorption signal
T_MAX = float(np.exp(-1e-6))
ALPHA_CLAMP = (0.1, 50.0)

OK = "ok"
CLAMPED = "clamped"
INSUFFICIENT = "insufficient"
QUALITIES = (OK, CLAMPED, INSUFFICIENT)


def transmission(I_at, I_noat, I_back):
    """``(I_at - I_back) / (I_noat - I_back)``; NaN where the denominator is <= 0."""
    I_at, I_noat, I_back = (np.asarray(a, dtype=float) for a in (I_at, I_noat, I_back))
    if not I_at.shape == I_noat.shape == I_back.shape:
        raise ValidationError(
            f"frame shapes differ: {I_at.shape}, {I_noat.shape}, {I_back.shape}")
    den = I_noat - I_back
    with np.errstate(divide="ignore", invalid="ignore"):
        T = np.where(den > 0, (I_at - I_back) / den, np.nan)
    return T if T.ndim else float(T)


def compute_transmission(triplet):
    """Transmission map of an :class:`~satabs.synth.ImageTriplet`."""
    return transmission(triplet.I_at, triplet.I_noat, triplet.I_back)


@dataclass(frozen=True)
class TransmissionSeries:
    """Transmissions of one pixel across the saturation sweep."""

    pixel: tuple
    s_c: np.ndarray
    T: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.s_c, dtype=float)
        T = np.asarray(self.T, dtype=float)
        if s.shape != T.shape or s.ndim != 1:
            raise ValidationError("s_c and T must be 1-D and of equal length")
        if np.any(~(s > 0)):
            raise ValidationError("saturations must be > 0")
        if np.unique(s).size != s.size:
            raise ValidationError("saturations must be pairwise distinct")
        object.__setattr__(self, "s_c", s)
        object.__setattr__(self, "T", T)


@dataclass(frozen=True)
class PixelCalibration:
    alpha: float
    b: float
    residual_std: float
    n_used: int
    quality: str


@dataclass(frozen=True)
class LinearFit:
    """``alpha = offset + slope * b`` with standard errors."""

    slope: float
    offset: float
    slope_err: float
    offset_err: float
    n_points: int


def _solve(s, T, t_min, t_max, clamp):
    # s, T: (P, J). Returns alpha, b, residual_std, n_used, quality (int codes).
    with np.errstate(invalid="ignore", divide="ignore"):
        use = np.isfinite(T) & (T >= t_min) & (T < t_max)
        Ts = np.where(use, T, 1.0)
        u = np.where(use, -np.log(Ts), 0.0)
        v = np.where(use, s * (1.0 - Ts), 0.0)
    n = use.sum(axis=1)
    nn = np.maximum(n, 1)
    mu = u.sum(axis=1) / nn
    mv = v.sum(axis=1) / nn
    du = np.where(use, u - mu[:, None], 0.0)
    dv = np.where(use, v - mv[:, None], 0.0)
    suu = (du * du).sum(axis=1)
    suv = (du * dv).sum(axis=1)

    # fewer than two distinct u values <=> zero variance
    insufficient = (n < 2) | ~(suu > 0)
    with np.errstate(invalid="ignore", divide="ignore"):
        alpha = np.where(insufficient, np.nan, -suv / np.where(suu > 0, suu, 1.0))
    lo, hi = clamp
    clamped = ~insufficient & ((alpha < lo) | (alpha > hi))
    alpha = np.where(clamped, np.clip(alpha, lo, hi), alpha)

    bj = alpha[:, None] * u + v
    b = np.where(use, bj, 0.0).sum(axis=1) / nn
    resid = np.where(use, bj - b[:, None], 0.0)
    rstd = np.sqrt((resid * resid).sum(axis=1) / nn)
    b = np.where(insufficient, np.nan, b)
    rstd = np.where(insufficient, np.nan, rstd)
    quality = np.where(insufficient, 2, np.where(clamped, 1, 0))
    return alpha, b, rstd, n, quality


def calibrate_pixel(series: TransmissionSeries, t_min: float = T_MIN,
                    t_max: float = T_MAX, clamp=ALPHA_CLAMP) -> PixelCalibration:
    """Alpha minimising the spread of the per-point optical densities, and
    the mean density at that alpha.

    Points with ``T < t_min`` (read-noise dominated) or ``T >= t_max``
    (no absorption) are discarded first. ``residual_std`` is the population
    standard deviation of the per-point densities at the optimum.
    """
    alpha, b, rstd, n, q = _solve(series.s_c[None, :], series.T[None, :], t_min, t_max, clamp)
    return PixelCalibration(float(alpha[0]), float(b[0]), float(rstd[0]), int(n[0]),
                            QUALITIES[int(q[0])])


@dataclass
class CalibrationMap:
    """Per-pixel results of :func:`calibrate_stack` as parallel 2-D arrays."""

    alpha: np.ndarray
    b: np.ndarray
    residual_std: np.ndarray
    n_used: np.ndarray
    quality: np.ndarray

    @property
    def shape(self):
        return self.alpha.shape

    def pixel(self, row: int, col: int) -> PixelCalibration:
        return PixelCalibration(float(self.alpha[row, col]), float(self.b[row, col]),
                                float(self.residual_std[row, col]),
                                int(self.n_used[row, col]), str(self.quality[row, col]))

    def records(self):
        """Yield ``(row, col, PixelCalibration)`` in row-major order."""
        rows, cols = self.shape
        for r in range(rows):
            for c in range(cols):
                yield r, c, self.pixel(r, c)

    def pixels(self) -> list[PixelCalibration]:
        return [p for _, _, p in self.records()]


def calibrate_stack(stacks: Sequence, t_min: float = T_MIN, t_max: float = T_MAX,
                    clamp=ALPHA_CLAMP) -> CalibrationMap:
    """Calibrate every pixel of a sweep.

    Parameters
    ----------
    stacks : sequence of (s_c, T) pairs
        ``T`` is a 2-D transmission map (NaN marks invalid pixels); ``s_c`` is
        a scalar or a map of the same shape giving the local saturation.
    """
    if len(stacks) < 1:
        raise ValidationError("empty stack")
    shape = np.shape(stacks[0][1])
    if len(shape) != 2:
        raise ValidationError("transmission maps must be 2-D")
    s_cols, T_cols = [], []
    for s, T in stacks:
        T = np.asarray(T, dtype=float)
        if T.shape != shape:
            raise ValidationError(f"transmission map shape {T.shape} != {shape}")
        s = np.broadcast_to(np.asarray(s, dtype=float), shape)
        s_cols.append(s.ravel())
        T_cols.append(T.ravel())
    s_all = np.stack(s_cols, axis=1)
    if np.any(~(s_all > 0)):
        raise ValidationError("saturations must be > 0")
    s_sorted = np.sort(s_all, axis=1)
    if np.any(s_sorted[:, 1:] == s_sorted[:, :-1]):
        raise ValidationError("saturations must be pairwise distinct")
    alpha, b, rstd, n, q = _solve(s_all, np.stack(T_cols, axis=1), t_min, t_max, clamp)
    names = np.array(QUALITIES)[q]
    return CalibrationMap(alpha.reshape(shape), b.reshape(shape), rstd.reshape(shape),
                          n.reshape(shape), names.reshape(shape))


def fit_line(b, alpha) -> LinearFit:
    """Unweighted least-squares line ``alpha = offset + slope * b``."""
    b = np.asarray(b, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    if b.size < 2:
        raise ValidationError("need at least two points for a linear fit")
    if np.all(b == b[0]):
        raise ValidationError("degenerate fit: all b values are identical")
    res = stats.linregress(b, alpha)
    return LinearFit(float(res.slope), float(res.intercept), float(res.stderr),
                     float(res.intercept_stderr), int(b.size))


def linear_fit_alpha_b(pixels: Iterable[PixelCalibration], quality=(OK,),
                       b_min: float | None = None, b_max: float | None = None) -> LinearFit:
    """Linear alpha(b) law over the pixels whose quality is in ``quality``,
    optionally restricted to ``b_min <= b <= b_max``."""
    if isinstance(quality, str):
        quality = (quality,)
    pts = [(p.b, p.alpha) for p in pixels
           if p.quality in quality
           and (b_min is None or p.b >= b_min)
           and (b_max is None or p.b <= b_max)]
    if len(pts) < 2:
        raise ValidationError(f"need >= 2 pixels for the fit, got {len(pts)}")
    b, alpha = np.array(pts).T
    return fit_line(b, alpha)


def binned_alpha(b, alpha, edges):
    """Mean alpha per optical-density bin.

    Returns ``(centers, mean_alpha, counts)``; empty bins give NaN.
    """
    b = np.asarray(b, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    edges = np.asarray(edges, dtype=float)
    idx = np.digitize(b, edges) - 1
    nb = edges.size - 1
    ok = (idx >= 0) & (idx < nb)
    counts = np.bincount(idx[ok], minlength=nb)
    sums = np.bincount(idx[ok], weights=alpha[ok], minlength=nb)
    with np.errstate(invalid="ignore", divide="ignore"):
        mean = np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)
    return 0.5 * (edges[1:] + edges[:-1]), mean, counts


def density_curves(series: TransmissionSeries, alphas=np.linspace(1.0, 11.0, 10),
                   t_min: float = T_MIN):
    """Per-point optical density against saturation for a grid of trial alphas.

    Diagnostic only: the flattest curve is the calibrated one. Returns
    ``(s_c, b)`` with ``b`` of shape ``(len(alphas), n_points)``.
    """
    keep = np.isfinite(series.T) & (series.T >= t_min) & (series.T < 1.0)
    s = series.s_c[keep]
    T = series.T[keep]
    a = np.asarray(alphas, dtype=float)[:, None]
    return s, -a * np.log(T) + s * (1.0 - T)

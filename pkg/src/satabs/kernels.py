"""Scalar numerical primitives: principal-branch Lambert W and a bracketing
root finder.

The root finder is deliberately independent of :func:`lambert_w0` so that it
can serve as an oracle for the closed-form Beer-Lambert inversion.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import optimize

from .errors import ConvergenceError, DomainError

INV_E = math.exp(-1.0)
_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class Tolerance:
    """Stopping rule for iterative solvers.

    Parameters
    ----------
    rel : float
        Relative tolerance, > 0.
    abs : float
        Absolute tolerance, >= 0.
    max_iter : int
        Iteration cap, >= 1.
    """

    rel: float = 1e-12
    abs: float = 0.0
    max_iter: int = 200

    def __post_init__(self):
        if not self.rel > 0:
            raise DomainError(f"rel must be > 0, got {self.rel}")
        if not self.abs >= 0:
            raise DomainError(f"abs must be >= 0, got {self.abs}")
        if int(self.max_iter) < 1:
            raise DomainError(f"max_iter must be >= 1, got {self.max_iter}")


def _halley(w, x, n_iter=30):
    # w*e^w - x = 0, iterated in place on the active subset until the step
    # is at round-off level.
    active = np.ones(w.shape, dtype=bool)
    for _ in range(n_iter):
        if not active.any():
            break
        wa = w[active]
        ew = np.exp(wa)
        f = wa * ew - x[active]
        wp1 = wa + 1.0
        with np.errstate(invalid="ignore", divide="ignore"):
            denom = ew * wp1 - (wa + 2.0) * f / (2.0 * wp1)
            dw = np.where(np.isfinite(denom) & (denom != 0.0), f / denom, 0.0)
        w[active] = wa - dw
        done = np.abs(dw) <= 4 * _EPS * np.abs(wa)
        idx = np.flatnonzero(active)
        active[idx[done]] = False
    return w


def _w0_of_log(logx, n_iter=30):
    # W(e^logx) for logx >= 1, solving w + ln w = logx by Newton.
    l2 = np.log(logx)
    w = logx - l2 + l2 / logx
    for _ in range(n_iter):
        dw = (w + np.log(w) - logx) / (1.0 + 1.0 / w)
        w = w - dw
        if np.all(np.abs(dw) <= 4 * _EPS * w):
            break
    return w


def lambert_w0(x):
    """Principal branch of the Lambert W function.

    Solves ``w * exp(w) = x`` for ``x >= -1/e``. Accepts scalars or arrays and
    returns the same shape.

    The initial guess is a branch-point series for ``x < -0.25``, ``log1p``
    in the middle range and the two-term asymptotic expansion for large
    ``x``; Halley's iteration then polishes it to round-off.

    Raises
    ------
    DomainError
        If any ``x < -1/e - 1e-12``.
    """
    xa = np.asarray(x, dtype=float)
    scalar = xa.ndim == 0
    xa = np.atleast_1d(xa).copy()
    if np.any(np.isnan(xa)):
        raise DomainError("lambert_w0 got NaN")
    if np.any(xa < -INV_E - 1e-12):
        raise DomainError(f"lambert_w0 domain is x >= -1/e, got min {xa.min()!r}")
    xa = np.maximum(xa, -INV_E)

    w = np.empty_like(xa)
    near = xa < -0.25
    mid = (~near) & (xa <= 3.0)
    big = xa > 3.0

    p = np.sqrt(np.maximum(2.0 * (math.e * xa[near] + 1.0), 0.0))
    w[near] = -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p ** 3
    w[mid] = np.log1p(xa[mid])
    w[big] = _w0_of_log(np.log(xa[big]))

    halley = near | mid
    if halley.any():
        w[halley] = _halley(w[halley], xa[halley])
    # exact branch point; Halley's denominator vanishes there
    w[xa == -INV_E] = -1.0
    return float(w[0]) if scalar else w


def lambert_w0_exp(logx):
    """``W(exp(logx))`` evaluated without forming ``exp(logx)``.

    Used where the Lambert argument would overflow a double.
    """
    la = np.atleast_1d(np.asarray(logx, dtype=float))
    out = np.empty_like(la)
    big = la >= 1.0
    out[big] = _w0_of_log(la[big])
    if (~big).any():
        out[~big] = lambert_w0(np.exp(la[~big]))
    return float(out[0]) if np.ndim(logx) == 0 else out


def bracket_root(f: Callable[[float], float], lo: float, hi: float,
                 tol: Tolerance = Tolerance()) -> float:
    """Root of ``f`` inside ``[lo, hi]`` by Brent's bracketing method.

    ``f(lo)`` and ``f(hi)`` must not share a sign. Brent's method is bisection
    safeguarded inverse interpolation, so the iterate never leaves the bracket
    and the result is deterministic.

    Raises
    ------
    DomainError
        If ``lo >= hi`` or there is no sign change.
    ConvergenceError
        If ``tol.max_iter`` iterations are not enough.
    """
    if not lo < hi:
        raise DomainError(f"need lo < hi, got [{lo}, {hi}]")
    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        return float(lo)
    if fhi == 0.0:
        return float(hi)
    if np.sign(flo) == np.sign(fhi):
        raise DomainError(
            f"no sign change on [{lo}, {hi}]: f(lo)={flo!r}, f(hi)={fhi!r}")
    # scipy rejects rtol below 4 eps
    rtol = max(tol.rel, 4 * _EPS)
    xtol = max(tol.abs, 1e-300)
    try:
        root, info = optimize.brentq(f, lo, hi, xtol=xtol, rtol=rtol,
                                     maxiter=tol.max_iter, full_output=True,
                                     disp=False)
    except RuntimeError as exc:  # pragma: no cover - disp=False path
        raise ConvergenceError(str(exc)) from exc
    if not info.converged:
        raise ConvergenceError(
            f"bracket_root: no convergence after {info.iterations} iterations",
            residual=abs(f(root)))
    return float(root)

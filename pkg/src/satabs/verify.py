"""Quick oracle and invariant checks behind ``satabs verify``.

Each check returns ``(passed, detail)``; :func:`run_checks` runs them all and
never raises, so a broken module shows up as a failed line.
"""
from __future__ import annotations

import math
import os
import tempfile

import numpy as np
from scipy import special

from .calibration import TransmissionSeries, calibrate_pixel, calibrate_stack, fit_line
from .io import read_aimg, write_aimg
from .kernels import INV_E, lambert_w0
from .model import ProbeGeometry, od_from_transmission, transmission_from_od
from .transport import DensityProfile, TransportParams, build_grid, solve_transport


def _bisect_T(b, s, alpha, n=200):
    # b(T) is strictly decreasing on (0, 1]
    lo, hi = 0.0, 1.0
    for _ in range(n):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if mid > 0 and od_from_transmission(mid, s, alpha) > b:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def check_lambert():
    x = np.concatenate([-INV_E + np.logspace(-9, math.log10(INV_E), 2000),
                        np.logspace(-12, 9, 3000)])
    w = lambert_w0(x)
    resid = np.max(np.abs(w * np.exp(w) - x) / np.maximum(1.0, np.abs(x)))
    # W is ill-conditioned next to -1/e, so the cross-check is looser
    ref = np.max(np.abs(w - special.lambertw(x).real) / np.maximum(1.0, np.abs(w)))
    return resid <= 1e-12 and ref <= 1e-10, f"residual {resid:.1e}, vs scipy {ref:.1e}"


def check_beer_lambert():
    b, s, a = np.meshgrid(np.linspace(0, 15, 11), np.linspace(0, 50, 11),
                          np.linspace(1, 6, 6), indexing="ij")
    T = transmission_from_od(b, s, a)
    with np.errstate(divide="ignore"):
        back = np.where(T < 1, -a * np.log(T) + s * (1 - T), 0.0)
    rt = np.max(np.abs(back - b))
    idx = [(3, 4, 2), (10, 10, 0), (7, 0, 5), (1, 9, 3)]
    orc = max(abs(T[i] - _bisect_T(b[i], s[i], a[i])) for i in idx)
    return rt <= 1e-10 and orc <= 1e-10, f"round trip {rt:.1e}, bisection {orc:.1e}"


def check_transport_analytic():
    geom = ProbeGeometry()
    params = TransportParams(geometry=geom, incoherent_enabled=False)
    worst = 0.0
    for b, s0 in ((0.5, 0.5), (5.0, 5.0), (10.0, 50.0)):
        grid = build_grid(DensityProfile(b_target=b, n_grid=4000), geom.sigma0)
        sol = solve_transport(grid, s0, params)
        worst = max(worst, abs(sol.T_c - transmission_from_od(b, s0, 1.0)))
    return worst <= 1e-6, f"max |T_c - closed form| {worst:.1e}"


def check_conservation():
    worst = 0.0
    for b, s0 in ((2.0, 0.5), (30.0, 50.0)):
        grid = build_grid(DensityProfile(b_target=b), ProbeGeometry().sigma0)
        worst = max(worst, solve_transport(grid, s0).flux_residual_max)
    return worst <= 1e-8, f"max relative flux change {worst:.1e}"


def check_calibration():
    s = np.array([0.44, 1.36, 4.9, 12.3, 28.0, 49.0])
    worst = 0.0
    for alpha, b in ((1.0, 1.0), (2.0, 5.0), (3.0, 10.0)):
        p = calibrate_pixel(TransmissionSeries((0, 0), s, transmission_from_od(b, s, alpha)))
        worst = max(worst, abs(p.alpha - alpha), abs(p.b - b))
    T = transmission_from_od(4.0, s, 2.0)
    cmap = calibrate_stack([(sj, np.full((3, 2), Tj)) for sj, Tj in zip(s, T)])
    same = bool(np.all(cmap.alpha == cmap.alpha[0, 0]))
    return worst <= 1e-8 and same, f"max error {worst:.1e}, stack uniform {same}"


def check_fit():
    b = np.linspace(0, 30, 31)
    fit = fit_line(b, 1.17 + 0.255 * b)
    err = max(abs(fit.slope - 0.255), abs(fit.offset - 1.17))
    return err <= 1e-12, f"slope {fit.slope!r}, offset {fit.offset!r}"


def check_aimg():
    rng = np.random.default_rng(7)
    frames = rng.normal(size=(3, 8, 5))
    fd, path = tempfile.mkstemp(suffix=".aimg")
    os.close(fd)
    try:
        write_aimg(path, frames, {"k": 1})
        back, meta = read_aimg(path)
        with open(path, "rb") as fh:
            first = fh.read()
        write_aimg(path, back, meta)
        with open(path, "rb") as fh:
            second = fh.read()
    finally:
        os.unlink(path)
    ok = np.array_equal(back, frames) and first == second
    return ok, "bit-exact round trip" if ok else "round trip differs"


CHECKS = {
    "lambert_w0": check_lambert,
    "beer_lambert_inverse": check_beer_lambert,
    "transport_vs_closed_form": check_transport_analytic,
    "flux_conservation": check_conservation,
    "calibration_round_trip": check_calibration,
    "linear_fit": check_fit,
    "aimg_round_trip": check_aimg,
}


def run_checks():
    results = []
    for name, fn in CHECKS.items():
        try:
            ok, detail = fn()
        except Exception as exc:  # report, keep going
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        results.append((name, bool(ok), detail))
    return results

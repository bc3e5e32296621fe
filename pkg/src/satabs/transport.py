"""One-dimensional coherent / incoherent two-stream propagation.

The coherent probe ``s_c`` is depleted by the saturated medium; the light it
loses feeds a forward (``s_i_plus``) and a backward (``s_i_minus``) incoherent
stream, both measured in units of the isotropic saturation intensity
``alpha_iso * I_sat``. The backward stream obeys its equation along its own
propagation direction, so in the laboratory frame::

    ds_c/dz  = -n s0 s_c / D
    ds_i+/dz = -(n s0_iso / 2) [ (s_i+ - s_i-) / D - src ]
    ds_i-/dz = +(n s0_iso / 2) [ (s_i- - s_i+) / D - src ]

with ``D = alpha_sa (1 + s_i) + s_c`` and ``src`` the temporally plus
spatially incoherent re-emission of the coherent loss. With these signs
``s_c + alpha_iso (s_i+ - s_i-)`` is conserved exactly.

The two-point problem (``s_i+(0) = 0``, ``s_i-(L) = 0``) is solved by
shooting on ``s_i-(0)``. Each trial is one fixed-step RK4 pass over the
whole column. Runge-Kutta schemes preserve linear invariants, so the
discrete flux is conserved to round-off whatever the step.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numba
import numpy as np

from .errors import ConvergenceError, DomainError, ValidationError
from .kernels import Tolerance, bracket_root
from .model import ProbeGeometry, alpha_from_transmission

# stands in for s0 = 0 so the linear-response limit has finite profiles
_LINEAR_PROBE = 1e-100


@dataclass(frozen=True)
class DensityProfile:
    """Density along the probe axis, normalised to an optical density.

    ``length`` defaults to ``8 * sigma_z`` and the Gaussian is centred in the
    column.
    """

    kind: str = "gaussian"
    b_target: float = 1.0
    sigma_z: float = 6.5e-6
    length: float | None = None
    n_grid: int = 2000

    def __post_init__(self):
        if self.kind not in ("gaussian", "homogeneous"):
            raise ValidationError(f"unknown profile kind {self.kind!r}")
        if not self.b_target >= 0:
            raise ValidationError("b_target must be >= 0")
        if int(self.n_grid) < 2:
            raise ValidationError("n_grid must be >= 2")
        if self.kind == "gaussian":
            if not self.sigma_z > 0:
                raise ValidationError("sigma_z must be > 0")
            if self.length is not None and self.length < 8 * self.sigma_z * (1 - 1e-12):
                raise ValidationError("gaussian profile needs length >= 8 sigma_z")
        if self.length is not None and not self.length > 0:
            raise ValidationError("length must be > 0")

    @property
    def column_length(self) -> float:
        return self.length if self.length is not None else 8.0 * self.sigma_z


@dataclass(frozen=True)
class Grid:
    """Uniform discretisation of a :class:`DensityProfile`.

    ``n`` holds node densities (m^-3), ``n_mid`` the densities half-way
    between nodes, needed by the RK4 midpoint stages.
    """

    z: np.ndarray
    n: np.ndarray
    n_mid: np.ndarray
    sigma0: float

    @property
    def h(self) -> float:
        return float(self.z[1] - self.z[0])

    @property
    def optical_density(self) -> float:
        """Trapezoidal quadrature of ``n sigma0`` over the column."""
        return float(np.trapezoid(self.n * self.sigma0, self.z))


def _shape(profile: DensityProfile, z):
    if profile.kind == "homogeneous":
        return np.ones_like(z)
    zc = 0.5 * profile.column_length
    return np.exp(-0.5 * ((z - zc) / profile.sigma_z) ** 2)


def build_grid(profile: DensityProfile, sigma0: float | None = None) -> Grid:
    """Node and midpoint densities whose trapezoidal column density equals
    ``profile.b_target / sigma0``."""
    if sigma0 is None:
        sigma0 = ProbeGeometry().sigma0
    if not sigma0 > 0:
        raise ValidationError("sigma0 must be > 0")
    L = profile.column_length
    n_grid = int(profile.n_grid)
    z = np.linspace(0.0, L, n_grid + 1)
    h = z[1] - z[0]
    shape = _shape(profile, z)
    shape_mid = _shape(profile, z[:-1] + 0.5 * h)
    norm = np.trapezoid(shape, z) * sigma0
    scale = profile.b_target / norm
    return Grid(z=z, n=scale * shape, n_mid=scale * shape_mid, sigma0=float(sigma0))


@dataclass(frozen=True)
class TransportParams:
    """Solver settings.

    ``max_sweeps`` caps the number of full-column integrations spent on the
    shooting search. ``backward_enabled=False`` gives the one-way variant in
    which the backward stream is held at zero.
    """

    geometry: ProbeGeometry = field(default_factory=ProbeGeometry)
    incoherent_enabled: bool = True
    backward_enabled: bool = True
    alpha_sa: float = 1.0
    tol: Tolerance = field(default_factory=lambda: Tolerance(rel=1e-10, max_iter=500))
    max_sweeps: int = 500

    def __post_init__(self):
        if int(self.max_sweeps) < 1:
            raise ValidationError("max_sweeps must be >= 1")
        if not self.alpha_sa >= 1.0:
            raise ValidationError("alpha_sa must be >= 1")


@dataclass
class TransportSolution:
    z: np.ndarray
    s_c: np.ndarray
    s_i_plus: np.ndarray
    s_i_minus: np.ndarray
    T_c: float
    T_tot: float
    iterations: int
    flux_residual_max: float
    alpha_iso: float = 2.12

    @property
    def flux(self) -> np.ndarray:
        """Net forward energy flux ``s_c + alpha_iso (s_i+ - s_i-)`` at each node."""
        return self.s_c + self.alpha_iso * (self.s_i_plus - self.s_i_minus)


@numba.njit(cache=True)
def _rhs(nsig, sc, sp, sm, a_iso, a_sa, incoherent, backward):
    si = sp + sm
    D = a_sa * (1.0 + si) + sc
    loss = nsig * sc / D
    if not incoherent:
        return -loss, 0.0, 0.0
    g = 0.5 * nsig / a_iso
    # temporally incoherent part s_c(s_c + a_sa s_i)/D^2 plus spatially
    # incoherent part a_sa s_c/D^2; together they re-emit s_c/D
    src = sc * (sc + a_sa * si) / (D * D) + a_sa * sc / (D * D)
    dp = -g * ((sp - sm) / D - src)
    if not backward:
        return -loss, dp, 0.0
    dm = g * ((sm - sp) / D - src)
    return -loss, dp, dm


@numba.njit(cache=True)
def _integrate(nsig, nsig_mid, h, s0, p, a_iso, a_sa, incoherent, backward, out):
    # Returns the index of the last node written. A trial stops early once
    # the backward stream turns negative: its launch value was too small.
    sc = s0
    sp = 0.0
    sm = p
    out[0, 0] = sc
    out[0, 1] = sp
    out[0, 2] = sm
    last = nsig.shape[0] - 1
    for k in range(last):
        n0 = nsig[k]
        n1 = nsig_mid[k]
        n2 = nsig[k + 1]
        a1, b1, c1 = _rhs(n0, sc, sp, sm, a_iso, a_sa, incoherent, backward)
        a2, b2, c2 = _rhs(n1, sc + 0.5 * h * a1, sp + 0.5 * h * b1, sm + 0.5 * h * c1,
                          a_iso, a_sa, incoherent, backward)
        a3, b3, c3 = _rhs(n1, sc + 0.5 * h * a2, sp + 0.5 * h * b2, sm + 0.5 * h * c2,
                          a_iso, a_sa, incoherent, backward)
        a4, b4, c4 = _rhs(n2, sc + h * a3, sp + h * b3, sm + h * c3,
                          a_iso, a_sa, incoherent, backward)
        sc += h / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
        sp += h / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4)
        sm += h / 6.0 * (c1 + 2.0 * c2 + 2.0 * c3 + c4)
        out[k + 1, 0] = sc
        out[k + 1, 1] = sp
        out[k + 1, 2] = sm
        if not math.isfinite(sm + sp + sc):
            out[k + 1, 2] = -1e300
            return k + 1
        if sm < 0.0 and k + 1 < last:
            return k + 1
    return last


def total_transmission(sol: TransportSolution, geometry: ProbeGeometry) -> float:
    """Coherent transmission plus the forward fluorescence collected in the
    imaging solid angle, relative to the incident probe."""
    s_in = sol.s_c[0]
    if s_in == 0:
        raise DomainError("total transmission undefined for zero incident probe")
    collected = geometry.alpha_iso * sol.s_i_plus[-1] * geometry.solid_angle / (2 * math.pi)
    return float((sol.s_c[-1] + collected) / s_in)


def _flux_residual(grid: Grid, out, a_iso, s0):
    q = out[:, 0] + a_iso * (out[:, 1] - out[:, 2])
    scale = grid.n_mid * grid.sigma0 * s0 * grid.h
    dq = np.abs(np.diff(q))
    mask = scale > 0
    if not mask.any():
        return 0.0
    return float(np.max(dq[mask] / scale[mask]))


def solve_transport(grid: Grid, s0: float, params: TransportParams = TransportParams()
                    ) -> TransportSolution:
    """Solve the coupled propagation through ``grid`` for incident saturation ``s0``.

    ``flux_residual_max`` is the largest finite-difference derivative of the
    net flux over all cells, in units of the local ``n sigma0 s0``.

    Raises
    ------
    DomainError
        Negative ``s0`` or negative densities.
    ConvergenceError
        The shooting search ran out of ``params.max_sweeps`` integrations.
    """
    if not s0 >= 0:
        raise DomainError(f"s0 must be >= 0, got {s0}")
    if np.any(grid.n < 0) or np.any(grid.n_mid < 0):
        raise DomainError("negative density in grid")
    geom = params.geometry
    a_iso = geom.alpha_iso
    s_eff = float(s0) if s0 > 0 else _LINEAR_PROBE
    nsig = np.ascontiguousarray(grid.n * grid.sigma0)
    nsig_mid = np.ascontiguousarray(grid.n_mid * grid.sigma0)
    h = grid.h
    out = np.empty((grid.z.size, 3))
    inc = bool(params.incoherent_enabled)
    back = inc and bool(params.backward_enabled)
    calls = 0
    last = grid.z.size - 1

    def run(p):
        nonlocal calls
        calls += 1
        k = _integrate(nsig, nsig_mid, h, s_eff, float(p), float(a_iso),
                       float(params.alpha_sa), inc, back, out)
        if k == last:
            return out[k, 2]
        # early exit: negative, shrinking to 0 as the crossing nears z = L
        return -(last - k) / last * s_eff / a_iso

    p_star = 0.0
    if run(0.0) != 0.0 and back:
        hi = s_eff / a_iso
        while run(hi) <= 0.0:
            hi *= 2.0
            if calls > params.max_sweeps:
                raise ConvergenceError("could not bracket backward boundary value")
        budget = max(int(params.max_sweeps) - calls, 1)
        tol = Tolerance(rel=4 * np.finfo(float).eps,
                        abs=1e-6 * params.tol.rel * (1.0 + s_eff) / (1.0 + a_iso),
                        max_iter=budget)
        try:
            p_star = bracket_root(run, 0.0, hi, tol)
        except ConvergenceError as exc:
            raise ConvergenceError(f"transport shooting: {exc}", exc.residual) from exc
        run(p_star)
        resid = abs(out[-1, 2])
        if resid > params.tol.rel * (1.0 + s_eff):
            raise ConvergenceError(
                f"backward boundary residual {resid:.3g} above tolerance", resid)

    scale = s0 / s_eff
    sol = TransportSolution(
        z=grid.z.copy(),
        s_c=out[:, 0] * scale,
        s_i_plus=out[:, 1] * scale,
        s_i_minus=out[:, 2] * scale,
        T_c=float(out[-1, 0] / s_eff),
        T_tot=float("nan"),
        iterations=calls,
        flux_residual_max=_flux_residual(grid, out, a_iso, s_eff),
        alpha_iso=a_iso,
    )
    collected = a_iso * out[-1, 1] * geom.solid_angle / (2 * math.pi)
    sol.T_tot = float((out[-1, 0] + collected) / s_eff)
    return sol


def _profile_for(b, profile):
    template = profile if profile is not None else DensityProfile()
    return replace(template, b_target=float(b))


def model_alpha(b: float, s0: float, params: TransportParams = TransportParams(),
                use_total: bool = False, profile: DensityProfile | None = None) -> float:
    """Apparent alpha of the modelled column, read off its coherent (or total)
    transmission with the saturated Beer-Lambert law."""
    if not b > 0 or not s0 > 0:
        raise DomainError("model_alpha needs b > 0 and s0 > 0")
    grid = build_grid(_profile_for(b, profile), params.geometry.sigma0)
    sol = solve_transport(grid, s0, params)
    T = sol.T_tot if use_total else sol.T_c
    return alpha_from_transmission(T, s0, b).alpha


@dataclass(frozen=True)
class SweepRow:
    b: float
    s0: float
    T_c: float
    T_tot: float
    alpha_coh: float
    alpha_tot: float


def sweep_alpha_vs_b(b_list, s0_list, params: TransportParams = TransportParams(),
                     profile: DensityProfile | None = None) -> list[SweepRow]:
    """Model alpha over the Cartesian product of ``b_list`` and ``s0_list``.

    Rows come out b-major, s0-minor.
    """
    b_list = [float(b) for b in b_list]
    s0_list = [float(s) for s in s0_list]
    if not b_list or not s0_list:
        raise ValidationError("sweep lists must be non-empty")
    rows = []
    for b in b_list:
        grid = build_grid(_profile_for(b, profile), params.geometry.sigma0)
        for s0 in s0_list:
            sol = solve_transport(grid, s0, params)
            a_coh = alpha_from_transmission(sol.T_c, s0, b).alpha
            a_tot = alpha_from_transmission(sol.T_tot, s0, b).alpha
            rows.append(SweepRow(b, s0, sol.T_c, sol.T_tot, a_coh, a_tot))
    return rows

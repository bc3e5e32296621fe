"""Synthetic absorption-imaging scenes and noisy image triplets.

Each pixel is treated as an independent column along the probe axis. The
probe photon budget per frame grows with the saturation so that the number
of photons scattered per atom stays constant across the sweep, which is how
the exposure of such sweeps is normally set up.
"""
from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from functools import lru_cache

import numpy as np
from scipy.interpolate import RectBivariateSpline

from .errors import ValidationError
from .model import (ALPHA_ISO, IMAGING_NA, PROBE_OFFSET, PROBE_WAIST,
                    ProbeGeometry, solid_angle_from_na, transmission_from_od)
from .transport import DensityProfile, TransportParams, sweep_alpha_vs_b

log = logging.getLogger(__name__)

DEFAULT_SWEEP = (0.44, 0.63, 1.36, 2.2, 4.9, 7.8, 12.3, 16.3, 20.9, 28.0, 37.3, 49.0)
PHOTON_RANGE = (200, 6500)
# 16 um camera pixels behind a 500/53 x 2 magnification
PIXEL_PITCH = 16e-6 / (2 * 500 / 53)


@dataclass(frozen=True)
class AlphaLaw:
    """How the true transmission of a pixel depends on (b, s_c).

    ``kind="constant"`` applies the saturated Beer-Lambert law with a fixed
    ``alpha``. ``kind="transport"`` uses the two-stream column model; with
    ``fluorescence`` the forward fluorescence collected by the objective is
    added to the transmitted probe.
    """

    kind: str = "constant"
    alpha: float = 1.0
    alpha_iso: float = ALPHA_ISO
    alpha_sa: float = 1.0
    solid_angle: float = field(default_factory=lambda: solid_angle_from_na(IMAGING_NA))
    fluorescence: bool = True
    n_grid: int = 1000

    def __post_init__(self):
        if self.kind not in ("constant", "transport"):
            raise ValidationError(f"unknown alpha law {self.kind!r}")
        if not self.alpha > 0:
            raise ValidationError("alpha must be > 0")

    def transport_params(self) -> TransportParams:
        geom = ProbeGeometry(alpha_iso=self.alpha_iso, solid_angle=self.solid_angle)
        return TransportParams(geometry=geom, alpha_sa=self.alpha_sa)

    def alpha_map(self, b, s_c):
        """Apparent alpha of each pixel, the ground truth a calibration sees."""
        b = np.asarray(b, dtype=float)
        if self.kind == "constant":
            return np.full(np.broadcast(b, np.asarray(s_c)).shape, self.alpha)
        s_c = np.broadcast_to(np.asarray(s_c, dtype=float), b.shape)
        lo = min(math.floor(math.log(s_c.min()) / 0.25) * 0.25, math.log(0.1))
        hi = max(math.ceil(math.log(s_c.max()) / 0.25) * 0.25, math.log(100.0))
        table = alpha_table(self, 5.0 * max(1, math.ceil(b.max() / 5.0)), lo, hi)
        return table(b, s_c)

    def transmission(self, b, s_c):
        return transmission_from_od(b, s_c, self.alpha_map(b, s_c))


class AlphaTable:
    """Cubic interpolant of the transport-model alpha on a (b, ln s) grid.

    Node spacing is 0.5 in b and 0.25 in ln s; alpha is smooth in both, so
    the interpolation error is far below the photon noise of a frame. The
    table covers ``0 <= b <= b_max`` and ``log_s_lo <= ln s <= log_s_hi``.
    """

    def __init__(self, law: AlphaLaw, b_max: float, log_s_lo: float, log_s_hi: float):
        nb = max(5, int(math.ceil(b_max / 0.5)) + 1)
        self.b_nodes = np.linspace(0.0, nb * 0.5 - 0.5, nb)
        lo, hi = log_s_lo, log_s_hi
        ns = max(5, int(math.ceil((hi - lo) / 0.25 - 1e-9)) + 1)
        self.log_s_nodes = np.linspace(lo, hi, ns)
        s_nodes = np.exp(self.log_s_nodes)
        rows = sweep_alpha_vs_b(self.b_nodes[1:], s_nodes, law.transport_params(),
                                DensityProfile(n_grid=law.n_grid))
        key = "alpha_tot" if law.fluorescence else "alpha_coh"
        vals = np.array([getattr(r, key) for r in rows]).reshape(nb - 1, ns)
        # dilute limit: a single atom's alpha
        vals = np.vstack([np.full(ns, law.alpha_sa), vals])
        self.values = vals
        self._spline = RectBivariateSpline(self.b_nodes, self.log_s_nodes, vals, kx=3, ky=3)

    def __call__(self, b, s_c):
        b = np.asarray(b, dtype=float)
        s_c = np.broadcast_to(np.asarray(s_c, dtype=float), b.shape)
        return self._spline.ev(b, np.log(s_c))


@lru_cache(maxsize=16)
def alpha_table(law: AlphaLaw, b_max: float, log_s_lo: float, log_s_hi: float) -> AlphaTable:
    return AlphaTable(law, b_max, log_s_lo, log_s_hi)


@dataclass(frozen=True)
class SceneConfig:
    """Ground-truth cloud, probe and sweep of a synthetic acquisition.

    Offsets are ``(x, y)`` in metres from the image centre pixel. ``sweep``
    lists the probe saturation at the probe centre for every frame and
    ``photons_per_pixel_max`` is the probe budget of the strongest one.
    """

    shape: tuple = (64, 64)
    pixel_pitch: float = PIXEL_PITCH
    b_peak: float = 6.0
    sigma_x: float = 6.5e-6
    sigma_y: float = 14.6e-6
    cloud_offset: tuple = (0.0, 0.0)
    probe_waist: float = PROBE_WAIST
    probe_offset: tuple = (PROBE_OFFSET, 0.0)
    sweep: tuple = DEFAULT_SWEEP
    photons_per_pixel_max: int = 6500
    alpha_law: AlphaLaw = field(default_factory=AlphaLaw)

    def __post_init__(self):
        object.__setattr__(self, "shape", tuple(int(v) for v in self.shape))
        object.__setattr__(self, "cloud_offset", tuple(float(v) for v in self.cloud_offset))
        object.__setattr__(self, "probe_offset", tuple(float(v) for v in self.probe_offset))
        object.__setattr__(self, "sweep", tuple(float(v) for v in self.sweep))
        if isinstance(self.alpha_law, dict):
            object.__setattr__(self, "alpha_law", AlphaLaw(**self.alpha_law))
        if len(self.shape) != 2 or min(self.shape) < 1:
            raise ValidationError(f"bad image shape {self.shape}")
        if not self.b_peak >= 0:
            raise ValidationError("b_peak must be >= 0")
        if not (self.probe_waist > 0 and self.pixel_pitch > 0
                and self.sigma_x > 0 and self.sigma_y > 0):
            raise ValidationError("lengths must be positive")
        if not self.sweep or min(self.sweep) <= 0:
            raise ValidationError("sweep must hold positive saturations")
        if len(set(self.sweep)) != len(self.sweep):
            raise ValidationError("sweep saturations must be distinct")
        if self.photons_per_pixel_max < 1:
            raise ValidationError("photons_per_pixel_max must be >= 1")

    def to_dict(self) -> dict:
        d = asdict(self)
        for k in ("shape", "cloud_offset", "probe_offset", "sweep"):
            d[k] = list(d[k])
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SceneConfig":
        return cls(**d)


@dataclass(frozen=True)
class NoiseModel:
    """Camera noise. ``poisson=False`` with zero read noise is expectation mode."""

    read_noise_rms: float = 3.0
    quantum_efficiency: float = 1.0
    seed: int = 0
    poisson: bool = True

    def __post_init__(self):
        if not self.read_noise_rms >= 0:
            raise ValidationError("read_noise_rms must be >= 0")
        if not 0 < self.quantum_efficiency <= 1:
            raise ValidationError("quantum_efficiency must be in (0, 1]")
        if int(self.seed) < 0:
            raise ValidationError("seed must be non-negative")

    @classmethod
    def expectation(cls) -> "NoiseModel":
        return cls(read_noise_rms=0.0, poisson=False)


@dataclass
class Scene:
    config: SceneConfig
    x: np.ndarray
    y: np.ndarray
    b: np.ndarray
    probe_profile: np.ndarray

    def s_c(self, s0: float) -> np.ndarray:
        """Local probe saturation for probe-centre saturation ``s0``."""
        return s0 * self.probe_profile

    @property
    def center_index(self):
        rows, cols = self.config.shape
        return rows // 2, cols // 2

    @property
    def intensity_factor_at_cloud(self) -> float:
        cfg = self.config
        dx = cfg.cloud_offset[0] - cfg.probe_offset[0]
        dy = cfg.cloud_offset[1] - cfg.probe_offset[1]
        return math.exp(-2.0 * (dx * dx + dy * dy) / cfg.probe_waist ** 2)


def synth_scene(config: SceneConfig) -> Scene:
    """Ground-truth optical-density map and probe profile on the pixel grid."""
    rows, cols = config.shape
    p = config.pixel_pitch
    x = (np.arange(cols) - cols // 2) * p
    y = (np.arange(rows) - rows // 2) * p
    X, Y = np.meshgrid(x, y)
    cx, cy = config.cloud_offset
    b = config.b_peak * np.exp(-0.5 * ((X - cx) / config.sigma_x) ** 2
                               - 0.5 * ((Y - cy) / config.sigma_y) ** 2)
    px, py = config.probe_offset
    profile = np.exp(-2.0 * ((X - px) ** 2 + (Y - py) ** 2) / config.probe_waist ** 2)
    return Scene(config, X, Y, b, profile)


@dataclass
class ImageTriplet:
    I_at: np.ndarray
    I_noat: np.ndarray
    I_back: np.ndarray
    meta: dict

    @property
    def frames(self) -> np.ndarray:
        return np.stack([self.I_at, self.I_noat, self.I_back])


def photon_budget(scene: Scene, s0: float) -> float:
    """Probe photons on the brightest pixel for a frame at saturation ``s0``.

    At fixed scattered photons per atom the pulse length scales as
    ``(1 + s) / s`` with ``s`` the saturation at the atoms, so the photon
    count scales as ``1 + s``.
    """
    cfg = scene.config
    f = scene.intensity_factor_at_cloud
    return cfg.photons_per_pixel_max * (1.0 + f * s0) / (1.0 + f * max(cfg.sweep))


def _stream(seed, index, frame):
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, index, frame])))


def render_triplet(scene: Scene, s0: float, noise: NoiseModel = NoiseModel(),
                   alpha_law: AlphaLaw | None = None, index: int = 0) -> ImageTriplet:
    """Atoms, probe-only and background frames for one sweep point.

    Frame ``k`` of sweep point ``index`` draws from its own Philox stream keyed
    by ``(seed, index, k)``, so any subset of frames can be rendered in any
    order with identical results.
    """
    law = alpha_law if alpha_law is not None else scene.config.alpha_law
    s_c = scene.s_c(s0)
    T = law.transmission(scene.b, s_c)
    budget = photon_budget(scene, s0)
    lo, hi = PHOTON_RANGE
    warn = not (lo <= budget * scene.probe_profile.min() / scene.probe_profile.max()
                and budget <= hi)
    if warn:
        log.warning("photon budget %.1f at s0=%g outside %s", budget, s0, PHOTON_RANGE)
    N = noise.quantum_efficiency * budget * scene.probe_profile / scene.probe_profile.max()

    means = (N * T, N, np.zeros_like(N))
    frames = []
    for k, mean in enumerate(means):
        rng = _stream(int(noise.seed), int(index), k)
        counts = rng.poisson(mean).astype(float) if noise.poisson else mean.copy()
        if noise.read_noise_rms > 0:
            counts += rng.normal(0.0, noise.read_noise_rms, size=mean.shape)
        frames.append(counts)

    meta = {
        "s0": float(s0),
        "index": int(index),
        "photon_budget": float(budget),
        "budget_warning": bool(warn),
        "noise": asdict(noise),
        "scene": scene.config.to_dict(),
        "truth": {"b": scene.b.tolist()},
    }
    return ImageTriplet(frames[0], frames[1], frames[2], meta)


def render_sweep(config: SceneConfig, noise: NoiseModel = NoiseModel()) -> list[ImageTriplet]:
    """One triplet per saturation in ``config.sweep``."""
    scene = synth_scene(config)
    return [render_triplet(scene, s0, noise, index=i) for i, s0 in enumerate(config.sweep)]

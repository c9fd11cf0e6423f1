"""Multi-source image formation with a Fourier amplitude mask, pupil views and adjoints.

A view through pupil ``p`` is

    A_p = sqrt( 1/T sum_t sum_{j active at t} |F^-1{ U_j(phi_t) H P_t M_p }|^2 )

with ``U_j = F{ w_j * hdo(exp(i Q(phi_t))) * tilt_j }``.  Sources are
mutually incoherent, so only intensities are ever summed across ``j``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .field import ComplexField, GridSpec, fft2c, ifft2c
from .fourier import (BlockUpsampler, FourierMask, PupilLayout, PupilSpec, band_mask,
                      disk_mask, pupil_mask, sigmoid)
from .illumination import SourceArray, spectral_shift_bins, tilt_field
from .propagation import make_kernel
from .slm import HdoModel, quantize_phase, supersample_array, supersample_array_adjoint

__all__ = [
    "BASELINE_TAGS",
    "SystemConfig",
    "Params",
    "ForwardModel",
    "field_at_image",
    "view_amplitude",
    "full_lightfield",
    "eyebox_coverage",
]

BASELINE_TAGS = ("I", "II", "III", "IV", "V", "Vstar", "VI", "VII", "custom")


@dataclass(frozen=True)
class SystemConfig:
    slm: GridSpec
    hdo: HdoModel
    sources: SourceArray
    mask: FourierMask
    frames: int
    z: float
    g: float
    layout: PupilLayout
    levels: Optional[int] = 16
    baseline: str = "custom"
    phase_screen_seed: Optional[int] = None
    optimize_weights: bool = False

    def __post_init__(self):
        if self.frames < 1:
            raise ValueError("frames must be >= 1")
        if self.baseline not in BASELINE_TAGS:
            raise ValueError(f"unknown baseline tag {self.baseline!r}")
        if self.sources.schedule == "sequential" and self.frames != len(self.sources):
            raise ValueError("sequential schedules need frames == number of sources")
        if self.levels is not None and self.levels < 2:
            raise ValueError("quantization levels must be >= 2")
        if self.mask.mode == "shifting_aperture" and self.sources.schedule != "sequential":
            raise ValueError("a shifting aperture follows the active source; use a sequential schedule")
        if self.g <= 0:
            raise ValueError("eyepiece focal length must be positive")

    @property
    def grid(self) -> GridSpec:
        """Simulation (supersampled) grid."""
        return self.slm.supersampled(self.hdo.q)

    @property
    def n_sources(self) -> int:
        return len(self.sources)

    def to_dict(self) -> dict:
        return {
            "slm": self.slm.to_dict(), "hdo": self.hdo.to_dict(), "sources": self.sources.to_dict(),
            "mask": self.mask.to_dict(), "frames": self.frames, "z": self.z, "g": self.g,
            "layout": self.layout.to_dict(), "levels": self.levels, "baseline": self.baseline,
            "phase_screen_seed": self.phase_screen_seed, "optimize_weights": self.optimize_weights,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SystemConfig":
        return cls(
            slm=GridSpec.from_dict(d["slm"]), hdo=HdoModel(**d["hdo"]),
            sources=SourceArray.from_dict(d["sources"]), mask=FourierMask.from_dict(d["mask"]),
            frames=int(d["frames"]), z=float(d["z"]), g=float(d["g"]),
            layout=PupilLayout.from_dict(d["layout"]), levels=d.get("levels"),
            baseline=d.get("baseline", "custom"), phase_screen_seed=d.get("phase_screen_seed"),
            optimize_weights=bool(d.get("optimize_weights", False)),
        )


@dataclass
class Params:
    """Optimization variables: T phase patterns, mask logits, global scale, source weights."""

    phases: np.ndarray                      # (T, Ny, Nx) SLM-native
    logits: Optional[np.ndarray] = None     # (T, ry, rx) when the mask is optimizable
    scale: float = 1.0
    weights: Optional[np.ndarray] = None    # (T, J) when source weights are optimized

    def copy(self) -> "Params":
        return Params(self.phases.copy(), None if self.logits is None else self.logits.copy(),
                      float(self.scale), None if self.weights is None else self.weights.copy())


@dataclass
class _FrameCache:
    t: int
    active: list
    a: np.ndarray
    S0: np.ndarray
    w: np.ndarray
    D: np.ndarray
    HM: np.ndarray
    E: np.ndarray


@dataclass
class _ViewCache:
    frames: list = field(default_factory=list)
    amplitude: Optional[np.ndarray] = None


class ForwardModel:
    """Precomputed operators for one :class:`SystemConfig`.

    ``dtype`` selects complex128 (reference) or complex64 (fast mode).
    """

    def __init__(self, cfg: SystemConfig, dtype=np.complex128):
        self.cfg = cfg
        self.grid = cfg.grid
        self.ctype = np.dtype(dtype)
        self.rtype = np.float32 if self.ctype == np.complex64 else np.float64
        self.H = make_kernel(self.grid, cfg.z).values.astype(self.ctype)
        self._pupils: dict[int, np.ndarray] = {}

        self.shifts = [spectral_shift_bins(s, self.grid) for s in cfg.sources.sources]
        self.use_roll = all(sh is not None for sh in self.shifts) and all(
            s.u_src is None for s in cfg.sources.sources)
        if not self.use_roll:
            self.tilts = np.stack([tilt_field(replace(s, weight=1.0), self.grid).values
                                   for s in cfg.sources.sources]).astype(self.ctype)
        self.base_weights = np.array([s.weight for s in cfg.sources.sources], dtype=self.rtype)

        self.screen = None
        if cfg.phase_screen_seed is not None:
            rng = np.random.default_rng(cfg.phase_screen_seed)
            self.screen = np.exp(1j * rng.uniform(0, 2 * np.pi, self.grid.shape)).astype(self.ctype)

        m = cfg.mask
        self.upsampler = BlockUpsampler(self.grid, m.resolution) if m.optimizable else None
        self.fixed_masks: Optional[list] = None
        if m.mode == "shifting_aperture":
            self.fixed_masks = []
            for t in range(cfg.frames):
                (j,) = cfg.sources.active(t, cfg.frames)
                s = cfg.sources.sources[j]
                c = (s.sin_x / self.grid.wavelength, s.sin_y / self.grid.wavelength)
                self.fixed_masks.append(disk_mask(self.grid, c, m.radius).astype(self.rtype))
        elif not m.optimizable:
            from .fourier import realize_mask
            P = realize_mask(m, self.grid).astype(self.rtype)
            self.fixed_masks = [P] * cfg.frames

    # -- parameters -------------------------------------------------------
    def init_params(self, rng: np.random.Generator) -> Params:
        cfg = self.cfg
        phases = rng.uniform(-np.pi, np.pi, (cfg.frames,) + cfg.slm.shape)
        logits = np.zeros((cfg.frames,) + cfg.mask.resolution) if cfg.mask.optimizable else None
        weights = None
        if cfg.optimize_weights:
            weights = np.tile(self.base_weights.astype(np.float64), (cfg.frames, 1))
        return Params(phases, logits, 1.0, weights)

    def frame_mask(self, t: int, logits: Optional[np.ndarray]) -> np.ndarray:
        if self.fixed_masks is not None:
            return self.fixed_masks[t]
        lg = np.zeros(self.cfg.mask.resolution) if logits is None else logits[t]
        return self.upsampler.up(sigmoid(lg)).astype(self.rtype)

    def pupil(self, p: int) -> np.ndarray:
        m = self._pupils.get(p)
        if m is None:
            m = pupil_mask(self.cfg.layout.pupils[p], self.grid).astype(self.rtype)
            self._pupils[p] = m
        return m

    def _weights(self, params: Params, t: int) -> np.ndarray:
        if params.weights is not None:
            return np.asarray(params.weights[t], dtype=self.rtype)
        return self.base_weights

    # -- forward ----------------------------------------------------------
    def slm_field(self, phi: np.ndarray) -> np.ndarray:
        psi = quantize_phase(phi, self.cfg.levels) if self.cfg.levels else phi
        return np.exp(1j * psi).astype(self.ctype)

    def source_spectra(self, a: np.ndarray, active: list) -> np.ndarray:
        """Unweighted spectra F{hdo(a) * screen * tilt_j} for the active sources, stacked."""
        b = supersample_array(a, self.cfg.hdo)
        if self.screen is not None:
            b = b * self.screen
        if self.use_roll:
            B = fft2c(b)
            return np.stack([np.roll(B, self.shifts[j], axis=(0, 1)) for j in active])
        return fft2c(b[None] * self.tilts[active])

    def view(self, params: Params, p: Optional[int] = None, keep: bool = False,
             extra_mask: Optional[np.ndarray] = None):
        """Amplitude of view ``p`` (``p=None``: no pupil).  Returns (A, cache or None)."""
        cfg = self.cfg
        M = self.pupil(p) if p is not None else None
        if extra_mask is not None:
            M = extra_mask if M is None else M * extra_mask
        I = np.zeros(self.grid.shape, dtype=self.rtype)
        cache = _ViewCache() if keep else None
        for t in range(cfg.frames):
            P = self.frame_mask(t, params.logits)
            PM = P if M is None else P * M
            if not PM.any():
                continue
            active = cfg.sources.active(t, cfg.frames)
            w = self._weights(params, t)[active]
            HM = self.H if M is None else self.H * M
            D = HM * P
            a = self.slm_field(params.phases[t])
            S0 = self.source_spectra(a, active)
            E = ifft2c(S0 * (w[:, None, None] * D))
            I += (E.real ** 2 + E.imag ** 2).sum(axis=0)
            if keep:
                cache.frames.append(_FrameCache(t, active, a, S0, w, D, HM, E))
        I /= cfg.frames
        A = np.sqrt(I)
        if keep:
            cache.amplitude = A
        return A, cache

    # -- backward ---------------------------------------------------------
    def backward(self, params: Params, cache: _ViewCache, grad_A: np.ndarray) -> Params:
        """Gradients of a real loss w.r.t. every parameter given dL/dA.

        Phase gradients pass straight through the quantizer.  The returned
        ``Params.scale`` is 0 (the scale enters only through the loss).
        """
        cfg = self.cfg
        A = cache.amplitude
        with np.errstate(divide="ignore", invalid="ignore"):
            gI = np.where(A > 0, grad_A / (2 * A), 0.0).astype(self.rtype)
        g_ph = np.zeros_like(params.phases)
        g_lg = None if params.logits is None else np.zeros_like(params.logits)
        g_w = None if params.weights is None else np.zeros_like(params.weights)
        for fc in cache.frames:
            gE = (2.0 / cfg.frames) * gI * fc.E
            G = fft2c(gE)
            gS = np.conj(fc.D) * G
            if g_lg is not None:
                acc = (np.conj(fc.S0 * fc.w[:, None, None]) * G).sum(axis=0)
                gP = np.real(np.conj(fc.HM) * acc)
                sg = sigmoid(params.logits[fc.t])
                g_lg[fc.t] = self.upsampler.adjoint(gP) * sg * (1 - sg)
            if g_w is not None:
                g_w[fc.t, fc.active] = np.real((np.conj(fc.S0) * gS).sum(axis=(1, 2)))
            gS0 = gS * fc.w[:, None, None]
            if self.use_roll:
                gB = sum(np.roll(gS0[i], tuple(-s for s in self.shifts[j]), axis=(0, 1))
                         for i, j in enumerate(fc.active))
                gb = ifft2c(gB)
            else:
                gb = (np.conj(self.tilts[fc.active]) * ifft2c(gS0)).sum(axis=0)
            if self.screen is not None:
                gb = gb * np.conj(self.screen)
            ga = supersample_array_adjoint(gb, cfg.hdo)
            g_ph[fc.t] = np.imag(np.conj(fc.a) * ga)
        return Params(g_ph, g_lg, 0.0, g_w)

    def view_loss(self, params: Params, p: int, target: np.ndarray, grad: bool = True,
                  closed_form_scale: bool = False):
        """Mean squared amplitude error of view ``p`` and (optionally) all gradients."""
        A, cache = self.view(params, p, keep=grad)
        s = params.scale
        if closed_form_scale:
            den = float(np.sum(A * A))
            s = float(np.sum(A * target)) / den if den > 0 else params.scale
        r = s * A - target
        n = r.size
        loss = float(np.sum(r * r)) / n
        if not grad:
            return loss, None
        gA = (2.0 * s / n) * r
        g = self.backward(params, cache, gA)
        g.scale = 0.0 if closed_form_scale else float(2.0 * np.sum(r * A)) / n
        return loss, g


def field_at_image(phi: np.ndarray, mask_realized: Optional[np.ndarray], source: int,
                   cfg: SystemConfig, extra_freq_mask: Optional[np.ndarray] = None,
                   model: Optional[ForwardModel] = None) -> ComplexField:
    """Complex image-plane field of one source for one phase pattern."""
    fm = model or ForwardModel(cfg)
    a = fm.slm_field(phi)
    S = fm.source_spectra(a, [source])[0] * fm.base_weights[source]
    D = fm.H.copy()
    if mask_realized is not None:
        D = D * mask_realized
    if extra_freq_mask is not None:
        D = D * extra_freq_mask
    return ComplexField(fm.grid, ifft2c(S * D))


def view_amplitude(params: Params, pupil: PupilSpec | int, cfg: SystemConfig,
                   model: Optional[ForwardModel] = None) -> np.ndarray:
    fm = model or ForwardModel(cfg)
    if isinstance(pupil, PupilSpec):
        return fm.view(params, None, extra_mask=pupil_mask(pupil, fm.grid).astype(fm.rtype))[0]
    return fm.view(params, pupil)[0]


def full_lightfield(params: Params, cfg: SystemConfig, model: Optional[ForwardModel] = None) -> np.ndarray:
    """All V x V view amplitudes, shape (V, V, ny, nx)."""
    fm = model or ForwardModel(cfg)
    V = cfg.layout.views
    views = [fm.view(params, p)[0] for p in range(V * V)]
    return np.stack(views).reshape((V, V) + fm.grid.shape)


def eyebox_coverage(cfg: SystemConfig) -> tuple[np.ndarray, float, float]:
    """Union of the source-shifted native SLM bands on the simulation grid.

    Returns (occupancy map, area in (cycles/m)^2, expansion ratio vs one
    on-axis source).  Higher-order replicas are not counted.
    """
    grid = cfg.grid
    occ = np.zeros(grid.shape, dtype=bool)
    for s in cfg.sources.sources:
        sx = s.sin_x / grid.wavelength / grid.df_x
        sy = s.sin_y / grid.wavelength / grid.df_y
        occ |= band_mask(grid, cfg.slm.shape, (sy, sx)).astype(bool)
    ratio = occ.sum() / (cfg.slm.nx * cfg.slm.ny)
    return occ, float(occ.sum() * grid.df_x * grid.df_y), float(ratio)

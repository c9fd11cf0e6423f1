"""Factory for the compared display configurations, built from one shared parameter set."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

from .field import GridSpec
from .forward import SystemConfig
from .fourier import FourierMask, PupilLayout
from .illumination import SourceArray, SourceSpec, grid_angles_matching_orders
from .slm import HdoModel

__all__ = ["BaselineId", "BaseParams", "make_config", "parse_baseline"]


class BaselineId(str, enum.Enum):
    I = "I"          # single source, circular DC-order filter
    II = "II"        # single source, fixed random phase screen
    III = "III"      # all sources on, no Fourier mask
    IV = "IV"        # all sources on, fixed binary random Fourier mask
    V = "V"          # all sources on, optimizable low-res Fourier mask
    Vstar = "Vstar"  # V with optimizable per-source weights
    VI = "VI"        # steered (one source per frame), no mask
    VII = "VII"      # steered with an aperture following the active source


def parse_baseline(value) -> BaselineId:
    if isinstance(value, BaselineId):
        return value
    v = str(value).strip()
    if v in ("V*", "Vstar", "V_star"):
        return BaselineId.Vstar
    return BaselineId(v)


@dataclass(frozen=True)
class BaseParams:
    """Parameters shared by every baseline so comparisons are like-for-like.

    Defaults are the desk-scale setup: a 64x64 SLM with 10.8 um pixels,
    blue light, 3x3 matched-order sources and a 3x3 view layout over the
    expanded eyebox.  The default pupil is a 5 mm eye pupil;
    ``pupil_radius=None`` makes the radius equal to the view spacing.
    """

    n_slm: int = 64
    pitch: float = 10.8e-6
    wavelength: float = 450e-9
    lambda_ref: Optional[float] = None
    alpha: int = 3
    q: Optional[int] = None
    fill_factor: float = 1.0
    z: float = 2e-3
    g: float = 75e-3
    views: int = 3
    pupil_radius: Optional[float] = 2.5e-3
    levels: Optional[int] = 16
    mask_resolution: tuple[int, int] = (20, 20)
    random_mask_seed: int = 0
    phase_screen_seed: int = 0
    frames: int = 1

    @property
    def slm_grid(self) -> GridSpec:
        return GridSpec.square(self.n_slm, self.pitch, self.wavelength)

    @property
    def band_radius(self) -> float:
        """Radius (cycles/m) of the circle inscribed in one SLM band."""
        return 1.0 / (2 * self.pitch)

    @property
    def eyebox_width(self) -> float:
        """Expanded eyebox alpha * g * lambda / p (m)."""
        return self.alpha * self.g * self.wavelength / self.pitch

    @property
    def view_spacing(self) -> float:
        return self.eyebox_width / self.views

    def layout(self) -> PupilLayout:
        r = self.pupil_radius if self.pupil_radius is not None else self.view_spacing
        return PupilLayout.uniform(self.views, self.eyebox_width, self.g, r)


def make_config(baseline, base: BaseParams = BaseParams(), frames: Optional[int] = None) -> SystemConfig:
    """SystemConfig for one baseline; ``frames`` only applies to V and V*."""
    bid = parse_baseline(baseline)
    q = base.q or base.alpha
    hdo = HdoModel(q, base.fill_factor)
    lam_ref = base.lambda_ref or base.wavelength
    multi = grid_angles_matching_orders(base.alpha, base.pitch, lam_ref)
    single = SourceArray((SourceSpec(),), "simultaneous", 1)
    J = len(multi)
    aperture = FourierMask("aperture", base.mask_resolution, radius=base.band_radius)
    common = dict(slm=base.slm_grid, hdo=hdo, z=base.z, g=base.g, layout=base.layout(),
                  levels=base.levels, baseline=bid.value)
    if frames is not None and bid not in (BaselineId.V, BaselineId.Vstar):
        raise ValueError(f"baseline {bid.value} has a fixed frame count")
    T = frames or base.frames

    if bid is BaselineId.I:
        return SystemConfig(sources=single, mask=aperture, frames=1, **common)
    if bid is BaselineId.II:
        return SystemConfig(sources=single, mask=FourierMask("none"), frames=1,
                            phase_screen_seed=base.phase_screen_seed, **common)
    if bid is BaselineId.III:
        return SystemConfig(sources=multi, mask=FourierMask("none"), frames=1, **common)
    if bid is BaselineId.IV:
        return SystemConfig(sources=multi, frames=1, mask=FourierMask(
            "fixed_random", base.mask_resolution, seed=base.random_mask_seed), **common)
    if bid in (BaselineId.V, BaselineId.Vstar):
        return SystemConfig(sources=multi, frames=T,
                            mask=FourierMask("optimizable_lowres", base.mask_resolution),
                            optimize_weights=bid is BaselineId.Vstar, **common)
    if bid is BaselineId.VI:
        return SystemConfig(sources=multi.with_schedule("sequential"), mask=FourierMask("none"),
                            frames=J, **common)
    if bid is BaselineId.VII:
        return SystemConfig(sources=multi.with_schedule("sequential"), frames=J,
                            mask=FourierMask("shifting_aperture", base.mask_resolution,
                                             radius=base.band_radius), **common)
    raise ValueError(f"unsupported baseline {bid}")

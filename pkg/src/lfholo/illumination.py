"""Mutually incoherent off-axis plane-wave sources."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .field import ComplexField, GridSpec, spatial_coords

__all__ = [
    "SourceSpec",
    "SourceArray",
    "tilt_field",
    "grid_angles_matching_orders",
    "incidence_angle_deg",
    "spectral_shift_bins",
]

SCHEDULES = ("simultaneous", "sequential")


@dataclass(frozen=True)
class SourceSpec:
    """One collimated source.

    Direction is stored as direction sines (sin theta_x, sin theta_y) so the
    spec is wavelength-agnostic; ``k(wavelength)`` gives the wavevector.
    ``u_src`` is None for an ideal plane wave, otherwise a complex array on
    the (supersampled) simulation grid.
    """

    sin_x: float = 0.0
    sin_y: float = 0.0
    weight: float = 1.0
    u_src: Optional[np.ndarray] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.weight < 0:
            raise ValueError("source weight must be non-negative")
        if self.sin_x ** 2 + self.sin_y ** 2 >= 1.0:
            raise ValueError("source direction is not forward-traveling (k_z <= 0)")

    @classmethod
    def from_k(cls, k: Sequence[float], wavelength: float, weight: float = 1.0) -> "SourceSpec":
        kx, ky, kz = (float(v) for v in k)
        k0 = 2 * np.pi / wavelength
        if kz <= 0:
            raise ValueError("backward-traveling wavevector (k_z <= 0)")
        if abs(kx * kx + ky * ky + kz * kz - k0 * k0) > 1e-12 * k0 * k0:
            raise ValueError("|k| does not match 2*pi/wavelength")
        return cls(kx / k0, ky / k0, weight)

    def k(self, wavelength: float) -> tuple[float, float, float]:
        k0 = 2 * np.pi / wavelength
        kx, ky = k0 * self.sin_x, k0 * self.sin_y
        return (kx, ky, math.sqrt(k0 * k0 - kx * kx - ky * ky))

    def to_dict(self) -> dict:
        return {"sin_x": self.sin_x, "sin_y": self.sin_y, "weight": self.weight}


@dataclass(frozen=True)
class SourceArray:
    sources: tuple[SourceSpec, ...]
    schedule: str = "simultaneous"
    alpha: int = 1

    def __post_init__(self):
        object.__setattr__(self, "sources", tuple(self.sources))
        if self.schedule not in SCHEDULES:
            raise ValueError(f"unknown schedule {self.schedule!r}")
        if not self.sources:
            raise ValueError("at least one source is required")

    def __len__(self) -> int:
        return len(self.sources)

    def active(self, frame: int, frames: int) -> list[int]:
        """Indices of sources that are on during ``frame``."""
        if self.schedule == "simultaneous":
            return list(range(len(self.sources)))
        if frames != len(self.sources):
            raise ValueError("sequential schedule needs one frame per source")
        return [frame]

    def with_schedule(self, schedule: str) -> "SourceArray":
        return SourceArray(self.sources, schedule, self.alpha)

    def to_dict(self) -> dict:
        return {"schedule": self.schedule, "alpha": self.alpha,
                "sources": [s.to_dict() for s in self.sources]}

    @classmethod
    def from_dict(cls, d: dict) -> "SourceArray":
        srcs = tuple(SourceSpec(float(s["sin_x"]), float(s["sin_y"]), float(s.get("weight", 1.0)))
                     for s in d["sources"])
        return cls(srcs, d.get("schedule", "simultaneous"), int(d.get("alpha", 1)))


def tilt_field(spec: SourceSpec, grid: GridSpec) -> ComplexField:
    """weight * u_src * exp(i (k_x x + k_y y)) sampled on ``grid``."""
    kx, ky, _ = spec.k(grid.wavelength)
    X, Y = spatial_coords(grid)
    u = spec.weight * np.exp(1j * (kx * X + ky * Y))
    if spec.u_src is not None:
        if spec.u_src.shape != grid.shape:
            raise ValueError("u_src shape does not match grid")
        u = u * spec.u_src
    return ComplexField(grid, u)


def spectral_shift_bins(spec: SourceSpec, grid: GridSpec, atol: float = 1e-9) -> Optional[tuple[int, int]]:
    """(dy, dx) integer DFT-bin shift produced by the tilt, or None if off-grid."""
    sx = spec.sin_x / grid.wavelength * grid.nx * grid.pitch_x
    sy = spec.sin_y / grid.wavelength * grid.ny * grid.pitch_y
    rx, ry = round(sx), round(sy)
    if abs(sx - rx) > atol or abs(sy - ry) > atol:
        return None
    return (int(ry), int(rx))


def grid_angles_matching_orders(alpha: int, pitch_slm: float, lambda_ref: float,
                                schedule: str = "simultaneous") -> SourceArray:
    """alpha x alpha sources whose tilts equal the SLM diffraction orders at ``lambda_ref``.

    Source (m_y, m_x) has sin(theta) = m * lambda_ref / pitch_slm, so each
    source shifts the spectrum by whole SLM bandwidths (1 / pitch_slm).
    """
    if alpha < 1 or alpha % 2 == 0:
        raise ValueError("alpha must be a positive odd integer")
    if pitch_slm <= 0 or lambda_ref <= 0:
        raise ValueError("pitch and wavelength must be positive")
    half = (alpha - 1) // 2
    step = lambda_ref / pitch_slm
    if half * step >= 1.0:
        raise ValueError(f"non-physical angle: sin(theta) = {half * step:g} >= 1")
    srcs = []
    for my in range(-half, half + 1):
        for mx in range(-half, half + 1):
            if (mx * step) ** 2 + (my * step) ** 2 >= 1.0:
                raise ValueError("non-physical angle for diagonal source")
            srcs.append(SourceSpec(mx * step, my * step))
    return SourceArray(tuple(srcs), schedule, alpha)


def incidence_angle_deg(spacing: float, focal_length: float) -> float:
    """Incidence angle of a collimated off-axis source: atan(spacing / focal length)."""
    return math.degrees(math.atan2(spacing, focal_length))

"""Sampled complex fields, frequency grids and the unitary 2D DFT."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
import scipy.fft as sfft

__all__ = [
    "GridSpec",
    "ComplexField",
    "dft2",
    "idft2",
    "fft2c",
    "ifft2c",
    "freq_coords",
    "freq_bins",
    "spatial_coords",
    "energy",
    "center",
    "uncenter",
]


@dataclass(frozen=True)
class GridSpec:
    """Uniform sampling grid with physical pitch (m) and wavelength (m).

    Arrays living on this grid have shape ``(ny, nx)``.
    """

    nx: int
    ny: int
    pitch_x: float
    pitch_y: float
    wavelength: float

    def __post_init__(self):
        if int(self.nx) != self.nx or int(self.ny) != self.ny:
            raise ValueError("grid sizes must be integers")
        if self.nx < 2 or self.ny < 2:
            raise ValueError(f"grid must be at least 2x2, got {self.ny}x{self.nx}")
        if not (self.pitch_x > 0 and self.pitch_y > 0):
            raise ValueError("pitch must be positive")
        if not self.wavelength > 0:
            raise ValueError("wavelength must be positive")

    @classmethod
    def square(cls, n: int, pitch: float, wavelength: float) -> "GridSpec":
        return cls(n, n, pitch, pitch, wavelength)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.ny, self.nx)

    @property
    def df_x(self) -> float:
        return 1.0 / (self.nx * self.pitch_x)

    @property
    def df_y(self) -> float:
        return 1.0 / (self.ny * self.pitch_y)

    @property
    def extent(self) -> tuple[float, float]:
        """Physical size (L_x, L_y) in meters."""
        return (self.nx * self.pitch_x, self.ny * self.pitch_y)

    def supersampled(self, q: int) -> "GridSpec":
        """Same physical extent sampled ``q`` times finer per axis."""
        return replace(self, nx=self.nx * q, ny=self.ny * q,
                       pitch_x=self.pitch_x / q, pitch_y=self.pitch_y / q)

    def to_dict(self) -> dict:
        return {"nx": self.nx, "ny": self.ny, "pitch_x": self.pitch_x,
                "pitch_y": self.pitch_y, "wavelength": self.wavelength}

    @classmethod
    def from_dict(cls, d: dict) -> "GridSpec":
        return cls(int(d["nx"]), int(d["ny"]), float(d["pitch_x"]),
                   float(d["pitch_y"]), float(d["wavelength"]))


@dataclass(frozen=True)
class ComplexField:
    """Complex amplitude samples on a grid.

    ``domain`` is ``"space"`` or ``"frequency"``; frequency-domain fields
    are stored DC-at-origin (``numpy.fft`` order).
    """

    grid: GridSpec
    values: np.ndarray
    domain: str = field(default="space")

    def __post_init__(self):
        values = np.asarray(self.values)
        if values.shape != self.grid.shape:
            raise ValueError(f"values shape {values.shape} does not match grid {self.grid.shape}")
        if not np.iscomplexobj(values):
            values = values.astype(np.complex128)
        object.__setattr__(self, "values", values)

    def with_values(self, values: np.ndarray, domain: str | None = None) -> "ComplexField":
        return ComplexField(self.grid, values, self.domain if domain is None else domain)


def fft2c(x: np.ndarray) -> np.ndarray:
    """Unitary forward DFT over the last two axes (arrays, batch-friendly)."""
    return sfft.fft2(x, norm="ortho")


def ifft2c(x: np.ndarray) -> np.ndarray:
    """Unitary inverse DFT over the last two axes."""
    return sfft.ifft2(x, norm="ortho")


def dft2(u: ComplexField) -> ComplexField:
    if u.domain != "space":
        raise ValueError("dft2 expects a space-domain field")
    return ComplexField(u.grid, fft2c(u.values), "frequency")


def idft2(U: ComplexField) -> ComplexField:
    if U.domain != "frequency":
        raise ValueError("idft2 expects a frequency-domain field")
    return ComplexField(U.grid, ifft2c(U.values), "space")


def freq_coords(grid: GridSpec) -> tuple[np.ndarray, np.ndarray]:
    """Frequency sample coordinates (cycles/m), DC-at-origin, shape ``grid.shape``."""
    fx = sfft.fftfreq(grid.nx, d=grid.pitch_x)
    fy = sfft.fftfreq(grid.ny, d=grid.pitch_y)
    FY, FX = np.meshgrid(fy, fx, indexing="ij")
    return FX, FY


def freq_bins(grid: GridSpec) -> tuple[np.ndarray, np.ndarray]:
    """Integer frequency bin indices in DC-at-origin order (exact, no roundoff)."""
    kx = np.rint(sfft.fftfreq(grid.nx) * grid.nx)
    ky = np.rint(sfft.fftfreq(grid.ny) * grid.ny)
    KY, KX = np.meshgrid(ky, kx, indexing="ij")
    return KX, KY


def spatial_coords(grid: GridSpec) -> tuple[np.ndarray, np.ndarray]:
    """Sample positions (m) with the origin at index (0, 0)."""
    x = np.arange(grid.nx) * grid.pitch_x
    y = np.arange(grid.ny) * grid.pitch_y
    Y, X = np.meshgrid(y, x, indexing="ij")
    return X, Y


def energy(u: ComplexField) -> float:
    v = u.values
    return float(np.sum(v.real ** 2 + v.imag ** 2) * u.grid.pitch_x * u.grid.pitch_y)


def center(a: np.ndarray) -> np.ndarray:
    """DC-at-origin -> centered ordering (for display and mask construction)."""
    return sfft.fftshift(a, axes=(-2, -1))


def uncenter(a: np.ndarray) -> np.ndarray:
    return sfft.ifftshift(a, axes=(-2, -1))

"""Fourier-plane masks: programmable amplitude display, fixed baseline masks and pupils."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .field import GridSpec, center, freq_bins, uncenter

__all__ = [
    "MASK_MODES",
    "FourierMask",
    "PupilSpec",
    "PupilLayout",
    "eyebox_to_freq",
    "freq_to_eyebox",
    "pupil_mask",
    "disk_mask",
    "band_mask",
    "block_edges",
    "BlockUpsampler",
    "sigmoid",
    "realize_mask",
    "mask_logit_grad",
    "save_mask",
]

MASK_MODES = ("none", "aperture", "fixed_random", "optimizable_lowres", "shifting_aperture")


def sigmoid(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(x)))


def eyebox_to_freq(x_e, g: float, wavelength: float):
    """Eyebox coordinate (m) -> spatial frequency (cycles/m): f = x_e / (lambda g)."""
    if g <= 0 or wavelength <= 0:
        raise ValueError("focal length and wavelength must be positive")
    return x_e / (wavelength * g)


def freq_to_eyebox(f, g: float, wavelength: float):
    return f * wavelength * g


@dataclass(frozen=True)
class FourierMask:
    """Descriptor of the amplitude mask P at the Fourier plane.

    ``resolution`` is the (rows, cols) of the low-resolution display used by
    ``fixed_random`` and ``optimizable_lowres``; ``radius`` and ``center``
    (cycles/m) describe an ``aperture``.  ``shifting_aperture`` uses
    ``radius`` with a per-frame center chosen by the forward model.
    """

    mode: str = "none"
    resolution: tuple[int, int] = (20, 20)
    seed: int = 0
    open_fraction: float = 0.5
    radius: float | None = None
    center: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if self.mode not in MASK_MODES:
            raise ValueError(f"unknown mask mode {self.mode!r}")
        object.__setattr__(self, "resolution", tuple(int(r) for r in self.resolution))
        if min(self.resolution) < 1:
            raise ValueError("mask resolution must be positive")
        if self.mode in ("aperture", "shifting_aperture") and not (self.radius and self.radius > 0):
            raise ValueError(f"{self.mode} mask needs a positive radius")

    @property
    def optimizable(self) -> bool:
        return self.mode == "optimizable_lowres"

    def with_center(self, center: tuple[float, float]) -> "FourierMask":
        return FourierMask("aperture", self.resolution, self.seed, self.open_fraction,
                           self.radius, tuple(center))

    def random_pattern(self) -> np.ndarray:
        rng = np.random.default_rng(self.seed)
        return (rng.random(self.resolution) < self.open_fraction).astype(np.float64)

    def to_dict(self) -> dict:
        return {"mode": self.mode, "resolution": list(self.resolution), "seed": self.seed,
                "open_fraction": self.open_fraction, "radius": self.radius,
                "center": list(self.center)}

    @classmethod
    def from_dict(cls, d: dict) -> "FourierMask":
        return cls(d.get("mode", "none"), tuple(d.get("resolution", (20, 20))),
                   int(d.get("seed", 0)), float(d.get("open_fraction", 0.5)),
                   d.get("radius"), tuple(d.get("center", (0.0, 0.0))))


@dataclass(frozen=True)
class PupilSpec:
    """Eye pupil in eyebox coordinates (meters) with the eyepiece focal length g."""

    center: tuple[float, float]
    radius: float
    g: float

    def __post_init__(self):
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))
        if not self.radius > 0:
            raise ValueError("pupil radius must be positive")
        if not self.g > 0:
            raise ValueError("eyepiece focal length must be positive")

    def freq_center(self, wavelength: float) -> tuple[float, float]:
        return (self.center[0] / (wavelength * self.g), self.center[1] / (wavelength * self.g))

    def freq_radius(self, wavelength: float) -> float:
        return self.radius / (wavelength * self.g)

    def to_dict(self) -> dict:
        return {"center": list(self.center), "radius": self.radius, "g": self.g}


@dataclass(frozen=True)
class PupilLayout:
    """V x V pupils, row-major (row index runs along y)."""

    views: int
    pupils: tuple[PupilSpec, ...] = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "pupils", tuple(self.pupils))
        if len(self.pupils) != self.views ** 2:
            raise ValueError(f"layout needs {self.views ** 2} pupils, got {len(self.pupils)}")

    @classmethod
    def uniform(cls, views: int, eyebox_width: float, g: float, radius: float | None = None) -> "PupilLayout":
        """Equally spaced pupils tiling an eyebox of width ``eyebox_width``.

        ``radius`` defaults to half the pupil spacing (neighbouring pupils touch).
        """
        spacing = eyebox_width / views
        if radius is None:
            radius = spacing / 2
        offs = (np.arange(views) - (views - 1) / 2) * spacing
        pupils = [PupilSpec((float(cx), float(cy)), radius, g) for cy in offs for cx in offs]
        return cls(views, tuple(pupils))

    def __len__(self) -> int:
        return len(self.pupils)

    def index(self, row: int, col: int) -> int:
        return row * self.views + col

    def center_index(self) -> int:
        c = (self.views - 1) // 2
        return self.index(c, c)

    def to_dict(self) -> dict:
        return {"views": self.views, "pupils": [p.to_dict() for p in self.pupils]}

    @classmethod
    def from_dict(cls, d: dict) -> "PupilLayout":
        return cls(int(d["views"]), tuple(PupilSpec(tuple(p["center"]), float(p["radius"]), float(p["g"]))
                                          for p in d["pupils"]))


def disk_mask(grid: GridSpec, center: tuple[float, float], radius: float, rtol: float = 1e-9) -> np.ndarray:
    """Binary disk in frequency (cycles/m), DC-at-origin; sample-center inclusion.

    The comparison runs in bin units so samples exactly on the rim are kept.
    """
    KX, KY = freq_bins(grid)
    cx = center[0] / grid.df_x
    cy = center[1] / grid.df_y
    rx = radius / grid.df_x
    ry = radius / grid.df_y
    d2 = ((KX - cx) / rx) ** 2 + ((KY - cy) / ry) ** 2
    return (d2 <= 1.0 + rtol).astype(np.float64)


def pupil_mask(spec: PupilSpec, grid: GridSpec) -> np.ndarray:
    lam = grid.wavelength
    m = disk_mask(grid, spec.freq_center(lam), spec.freq_radius(lam))
    if not m.any():
        raise ValueError("degenerate pupil: mask has no samples on the grid")
    return m


def band_mask(grid: GridSpec, n_native: tuple[int, int], shift: tuple[float, float] = (0, 0),
              tol: float = 1e-9) -> np.ndarray:
    """Half-open native SLM band of ``n_native`` bins per axis, shifted by (dy, dx) bins.

    Bins are taken modulo the grid size (periodic spectrum); shifts may be fractional.
    """
    ny, nx = n_native
    KX, KY = freq_bins(grid)
    kx = np.mod(KX - shift[1] + nx / 2 + tol, grid.nx)
    ky = np.mod(KY - shift[0] + ny / 2 + tol, grid.ny)
    return ((kx < nx) & (ky < ny)).astype(np.float64)


def block_edges(n: int, blocks: int) -> np.ndarray:
    """Sample boundaries of ``blocks`` near-equal blocks over ``n`` samples (rounded edges)."""
    return np.rint(np.arange(blocks + 1) * n / blocks).astype(int)


class BlockUpsampler:
    """Nearest-neighbour upsampling of a low-res grid onto the (DC-at-origin) frequency grid.

    Blocks are laid out in centered coordinates and then reordered.
    """

    def __init__(self, grid: GridSpec, resolution: tuple[int, int]):
        by, bx = resolution
        ey = block_edges(grid.ny, by)
        ex = block_edges(grid.nx, bx)
        iy = np.searchsorted(ey, np.arange(grid.ny), side="right") - 1
        ix = np.searchsorted(ex, np.arange(grid.nx), side="right") - 1
        centered_ids = iy[:, None] * bx + ix[None, :]
        self.ids = uncenter(centered_ids)
        self.resolution = (by, bx)
        self.shape = grid.shape

    def up(self, low: np.ndarray) -> np.ndarray:
        return low.reshape(low.shape[:-2] + (-1,))[..., self.ids]

    def adjoint(self, g: np.ndarray) -> np.ndarray:
        n = self.resolution[0] * self.resolution[1]
        flat_ids = self.ids.ravel()
        if g.ndim == 2:
            return np.bincount(flat_ids, weights=g.ravel(), minlength=n).reshape(self.resolution)
        lead = g.shape[:-2]
        gg = g.reshape(-1, g.shape[-2] * g.shape[-1])
        out = np.stack([np.bincount(flat_ids, weights=row, minlength=n) for row in gg])
        return out.reshape(lead + self.resolution)


def realize_mask(mask: FourierMask, grid: GridSpec, logits: np.ndarray | None = None) -> np.ndarray:
    """Full-resolution amplitude in [0, 1] on the DC-at-origin frequency grid."""
    if mask.mode == "none":
        return np.ones(grid.shape)
    if mask.mode in ("aperture", "shifting_aperture"):
        return disk_mask(grid, mask.center, mask.radius)
    up = BlockUpsampler(grid, mask.resolution)
    if mask.mode == "fixed_random":
        return up.up(mask.random_pattern())
    if logits is None:
        logits = np.zeros(mask.resolution)
    if logits.shape != mask.resolution:
        raise ValueError(f"logits shape {logits.shape} does not match mask resolution {mask.resolution}")
    return up.up(sigmoid(logits))


def mask_logit_grad(grad_realized: np.ndarray, logits: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Chain rule from d/d(realized mask) to d/d(logits): block-sum, then sigmoid'."""
    up = BlockUpsampler(grid, logits.shape)
    sg = sigmoid(logits)
    return up.adjoint(grad_realized) * sg * (1 - sg)


def save_mask(path, amplitude_lowres: np.ndarray, realized: np.ndarray | None = None) -> None:
    """Raw float32 + JSON sidecar of the low-res amplitude, plus an 8-bit PNG preview."""
    from PIL import Image

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.ascontiguousarray(amplitude_lowres, dtype="<f4").tofile(path.with_suffix(".f32"))
    meta = {"shape": list(amplitude_lowres.shape), "dtype": "<f4"}
    path.with_suffix(".json").write_text(json.dumps(meta, indent=2, sort_keys=True))
    img = center(realized) if realized is not None else amplitude_lowres
    Image.fromarray(np.clip(np.rint(img * 255), 0, 255).astype(np.uint8)).save(path.with_suffix(".png"))

"""Phase SLM model: phasor, uniform phase quantization and pixel-aperture supersampling."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .field import ComplexField, GridSpec

__all__ = [
    "HdoModel",
    "wrap_phase",
    "phase_levels",
    "quantize_phase",
    "quantize_index",
    "phasor",
    "supersample_hdo",
    "supersample_hdo_adjoint",
    "supersample_array",
    "supersample_array_adjoint",
    "subpixel_aperture",
    "hdo_envelope",
    "save_phase",
    "load_phase",
]


@dataclass(frozen=True)
class HdoModel:
    """Zero-order-hold pixel model: each SLM pixel becomes a q x q block of subpixels."""

    q: int = 1
    fill_factor: float = 1.0

    def __post_init__(self):
        if int(self.q) != self.q or self.q < 1:
            raise ValueError("supersample factor q must be an integer >= 1")
        if not 0.0 < self.fill_factor <= 1.0:
            raise ValueError("fill_factor must be in (0, 1]")

    def to_dict(self) -> dict:
        return {"q": self.q, "fill_factor": self.fill_factor}


def wrap_phase(phi: np.ndarray) -> np.ndarray:
    """Wrap to [-pi, pi)."""
    return np.mod(np.asarray(phi) + np.pi, 2 * np.pi) - np.pi


def phase_levels(levels: int = 16) -> np.ndarray:
    return -np.pi + 2 * np.pi * np.arange(levels) / levels


def quantize_index(phi: np.ndarray, levels: int = 16) -> np.ndarray:
    """Level index in ``0..levels-1`` of the nearest uniform level."""
    if levels < 2:
        raise ValueError("need at least 2 quantization levels")
    step = 2 * np.pi / levels
    idx = np.rint((wrap_phase(phi) + np.pi) / step).astype(np.int64)
    return np.mod(idx, levels)


def quantize_phase(phi: np.ndarray, levels: int = 16) -> np.ndarray:
    """Snap wrapped phases to the nearest of ``levels`` values -pi + 2 pi m / levels.

    The optimizer treats this as identity in the backward pass
    (straight-through), see :mod:`lfholo.forward`.
    """
    return -np.pi + 2 * np.pi * quantize_index(phi, levels) / levels


def phasor(phi: np.ndarray) -> np.ndarray:
    return np.exp(1j * np.asarray(phi))


def subpixel_aperture(q: int, fill_factor: float = 1.0) -> np.ndarray:
    """1D open/closed pattern of the q subpixels in one pixel.

    The open count is ``round(fill_factor * q)`` (at least one), placed in
    the middle of the pixel with the remainder split floor-left.
    """
    c = max(1, int(round(fill_factor * q)))
    ap = np.zeros(q)
    start = (q - c) // 2
    ap[start:start + c] = 1.0
    return ap


def _aperture_tile(shape: tuple[int, int], model: HdoModel) -> np.ndarray | None:
    if model.fill_factor >= 1.0:
        return None
    ap = subpixel_aperture(model.q, model.fill_factor)
    ny, nx = shape
    return np.outer(np.tile(ap, ny), np.tile(ap, nx))


def supersample_array(a: np.ndarray, model: HdoModel) -> np.ndarray:
    """Array version of :func:`supersample_hdo` over the last two axes."""
    q = model.q
    if q == 1 and model.fill_factor >= 1.0:
        return a
    out = np.repeat(np.repeat(a, q, axis=-2), q, axis=-1)
    tile = _aperture_tile(a.shape[-2:], model)
    if tile is not None:
        out = out * tile
    return out


def supersample_array_adjoint(g: np.ndarray, model: HdoModel) -> np.ndarray:
    """Block-sum with aperture masking; adjoint of :func:`supersample_array`."""
    q = model.q
    if q == 1 and model.fill_factor >= 1.0:
        return g
    ny, nx = g.shape[-2] // q, g.shape[-1] // q
    tile = _aperture_tile((ny, nx), model)
    if tile is not None:
        g = g * tile
    return g.reshape(g.shape[:-2] + (ny, q, nx, q)).sum(axis=(-3, -1))


def supersample_hdo(u: ComplexField, model: HdoModel) -> ComplexField:
    return ComplexField(u.grid.supersampled(model.q), supersample_array(u.values, model))


def supersample_hdo_adjoint(g: ComplexField, model: HdoModel) -> ComplexField:
    q = model.q
    grid = GridSpec(g.grid.nx // q, g.grid.ny // q, g.grid.pitch_x * q,
                    g.grid.pitch_y * q, g.grid.wavelength)
    return ComplexField(grid, supersample_array_adjoint(g.values, model))


def hdo_envelope(n_native: int, model: HdoModel) -> np.ndarray:
    """Per-axis spectral envelope of the supersampled field.

    With unitary DFTs, ``dft(supersample(a))[k] = dft(a)[k mod N] * env[k]``
    per axis, where ``env[k] = sum_r ap[r] exp(-2 pi i k r / (qN)) / sqrt(q)``.
    The 2D envelope is the outer product of the two axis envelopes.
    """
    q = model.q
    ap = subpixel_aperture(q, model.fill_factor)
    k = np.arange(n_native * q)
    r = np.arange(q)
    return (ap[None, :] * np.exp(-2j * np.pi * np.outer(k, r) / (n_native * q))).sum(1) / np.sqrt(q)


def save_phase(path, phi: np.ndarray, grid: GridSpec, levels: int | None = 16) -> None:
    """Write ``<path>.f32`` (little-endian float32), ``<path>.json`` sidecar and a PNG preview."""
    from PIL import Image

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.ascontiguousarray(phi, dtype="<f4").tofile(path.with_suffix(".f32"))
    meta = {"grid": grid.to_dict(), "levels": levels, "shape": list(phi.shape), "dtype": "<f4"}
    path.with_suffix(".json").write_text(json.dumps(meta, indent=2, sort_keys=True))
    if levels is not None:
        idx = quantize_index(phi, levels)
        png = np.clip(idx * (256 // levels), 0, 255).astype(np.uint8)
    else:
        png = np.clip((wrap_phase(phi) + np.pi) / (2 * np.pi) * 255, 0, 255).astype(np.uint8)
    Image.fromarray(png).save(path.with_suffix(".png"))


def load_phase(path) -> tuple[np.ndarray, GridSpec, int | None]:
    path = Path(path)
    meta = json.loads(path.with_suffix(".json").read_text())
    shape = tuple(meta["shape"])
    raw = np.fromfile(path.with_suffix(".f32"), dtype="<f4")
    if raw.size != int(np.prod(shape)):
        raise ValueError(f"{path}: expected {int(np.prod(shape))} samples, found {raw.size}")
    return raw.reshape(shape).astype(np.float64), GridSpec.from_dict(meta["grid"]), meta["levels"]

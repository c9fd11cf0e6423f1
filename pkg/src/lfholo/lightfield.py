"""Synthetic multi-layer light-field targets and their on-disk format.

On disk a light field is a directory holding ``meta.json`` and one
little-endian float32 raw file per view, ``view_{row}_{col}.f32``, row-major.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .field import GridSpec
from .fourier import PupilLayout

__all__ = [
    "Layer",
    "SceneSpec",
    "LightFieldTarget",
    "LightFieldFormatError",
    "texture",
    "render_lightfield",
    "save_lightfield",
    "load_lightfield",
    "demo_scene",
    "DEMO_SCENES",
    "disparity_to_depth",
]

FORMAT_VERSION = 1


class LightFieldFormatError(ValueError):
    pass


@dataclass(frozen=True)
class Layer:
    """One fronto-parallel layer.

    ``pattern``/``params`` select a procedural texture; ``opacity`` and
    ``opacity_params`` select its coverage.  ``disparity`` is the integer
    pixel shift per unit pupil step; ``depth`` is recorded metadata.
    """

    pattern: str
    params: dict = field(default_factory=dict)
    disparity: int = 0
    opacity: str = "full"
    opacity_params: dict = field(default_factory=dict)
    opacity_scale: float = 1.0
    depth: Optional[float] = None

    def to_dict(self) -> dict:
        return {"pattern": self.pattern, "params": dict(self.params), "disparity": self.disparity,
                "opacity": self.opacity, "opacity_params": dict(self.opacity_params),
                "opacity_scale": self.opacity_scale, "depth": self.depth}

    @classmethod
    def from_dict(cls, d: dict) -> "Layer":
        return cls(d["pattern"], dict(d.get("params", {})), int(d.get("disparity", 0)),
                   d.get("opacity", "full"), dict(d.get("opacity_params", {})),
                   float(d.get("opacity_scale", 1.0)), d.get("depth"))


@dataclass(frozen=True)
class SceneSpec:
    """Layers listed back to front."""

    name: str
    layers: tuple[Layer, ...]
    boundary: str = "wrap"

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        if not self.layers:
            raise ValueError("scene has no layers")
        if self.boundary not in ("wrap", "clamp"):
            raise ValueError("boundary must be 'wrap' or 'clamp'")

    def to_dict(self) -> dict:
        return {"name": self.name, "boundary": self.boundary,
                "layers": [l.to_dict() for l in self.layers]}

    @classmethod
    def from_dict(cls, d: dict) -> "SceneSpec":
        return cls(d["name"], tuple(Layer.from_dict(l) for l in d["layers"]), d.get("boundary", "wrap"))


@dataclass
class LightFieldTarget:
    views: np.ndarray                 # (V, V, ny, nx) amplitudes in [0, 1]
    grid: GridSpec
    layout: Optional[PupilLayout] = None
    scene: dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.asarray(self.views)
        if v.ndim != 4 or v.shape[0] != v.shape[1]:
            raise ValueError(f"views must have shape (V, V, ny, nx), got {v.shape}")
        if v.shape[2:] != self.grid.shape:
            raise ValueError("view shape does not match grid")
        if self.layout is not None and self.layout.views != v.shape[0]:
            raise ValueError("layout view count does not match views")
        self.views = v

    @property
    def n_views(self) -> int:
        return self.views.shape[0]


def texture(pattern: str, shape: tuple[int, int], **p) -> np.ndarray:
    """Procedural texture in [0, 1]; sizes are in pixels."""
    ny, nx = shape
    Y, X = np.mgrid[0:ny, 0:nx].astype(np.float64)
    if pattern == "constant":
        out = np.full(shape, float(p.get("value", 1.0)))
    elif pattern == "checker":
        size = int(p.get("size", 8))
        lo, hi = p.get("lo", 0.2), p.get("hi", 1.0)
        out = np.where(((Y // size + X // size) % 2) == 0, hi, lo)
    elif pattern == "bars":
        period = float(p.get("period", 12))
        duty = float(p.get("duty", 0.5))
        coord = Y if p.get("orientation", "vertical") == "horizontal" else X
        lo, hi = p.get("lo", 0.1), p.get("hi", 1.0)
        out = np.where((coord % period) < duty * period, hi, lo)
    elif pattern == "gradient_disk":
        cy, cx = p.get("center", (ny / 2, nx / 2))
        r = float(p.get("radius", min(ny, nx) / 4))
        d = np.sqrt((Y - cy) ** 2 + (X - cx) ** 2)
        out = np.clip(1.0 - d / r, 0.0, 1.0) * p.get("hi", 1.0)
    elif pattern == "ramp":
        axis = X if p.get("axis", "x") == "x" else Y
        n = nx if p.get("axis", "x") == "x" else ny
        lo, hi = p.get("lo", 0.0), p.get("hi", 1.0)
        out = lo + (hi - lo) * axis / max(n - 1, 1)
    elif pattern == "rings":
        cy, cx = p.get("center", (ny / 2, nx / 2))
        period = float(p.get("period", 10))
        d = np.sqrt((Y - cy) ** 2 + (X - cx) ** 2)
        out = np.where((d % period) < period / 2, p.get("hi", 1.0), p.get("lo", 0.2))
    elif pattern == "disk":
        cy, cx = p.get("center", (ny / 2, nx / 2))
        r = float(p.get("radius", min(ny, nx) / 4))
        out = (((Y - cy) ** 2 + (X - cx) ** 2) <= r * r).astype(np.float64)
    elif pattern == "rect":
        y0, x0, y1, x1 = p.get("box", (ny // 4, nx // 4, 3 * ny // 4, 3 * nx // 4))
        out = ((Y >= y0) & (Y < y1) & (X >= x0) & (X < x1)).astype(np.float64)
    else:
        raise ValueError(f"unknown texture pattern {pattern!r}")
    return np.clip(np.asarray(out, dtype=np.float64), 0.0, 1.0)


def _shift(a: np.ndarray, dy: int, dx: int, boundary: str) -> np.ndarray:
    if dy == 0 and dx == 0:
        return a
    if boundary == "wrap":
        return np.roll(a, (dy, dx), axis=(0, 1))
    ny, nx = a.shape
    iy = np.clip(np.arange(ny) - dy, 0, ny - 1)
    ix = np.clip(np.arange(nx) - dx, 0, nx - 1)
    return a[np.ix_(iy, ix)]


def render_lightfield(scene: SceneSpec, views: int, grid: GridSpec,
                      layout: Optional[PupilLayout] = None) -> LightFieldTarget:
    """Composite the layers back to front for each of the V x V pupils.

    A layer with disparity ``d`` is shifted by ``d * (row - c, col - c)``
    pixels in view (row, col), with ``c`` the central view index.
    """
    if layout is not None and layout.views != views:
        raise ValueError("layout does not match the requested view count")
    shape = grid.shape
    texs = [texture(l.pattern, shape, **l.params) for l in scene.layers]
    alphas = [np.clip(texture(l.opacity, shape, **l.opacity_params) * l.opacity_scale
                      if l.opacity != "full" else np.full(shape, l.opacity_scale), 0.0, 1.0)
              for l in scene.layers]
    c = (views - 1) / 2
    out = np.zeros((views, views) + shape)
    for r in range(views):
        for col in range(views):
            dr, dc = r - c, col - c
            img = np.zeros(shape)
            for l, tex, al in zip(scene.layers, texs, alphas):
                dy, dx = int(round(l.disparity * dr)), int(round(l.disparity * dc))
                ts = _shift(tex, dy, dx, scene.boundary)
                as_ = _shift(al, dy, dx, scene.boundary)
                img = img * (1.0 - as_) + ts * as_
            out[r, col] = np.clip(img, 0.0, 1.0)
    # JSON-normalized so in-memory metadata equals what a stored copy loads back
    return LightFieldTarget(out.astype(np.float32), grid, layout, json.loads(json.dumps(scene.to_dict())))


def disparity_to_depth(disparity: float, pitch: float, wavelength: float, pupil_step_freq: float) -> float:
    """Defocus distance whose pupil-to-pupil lateral shift is ``disparity`` pixels.

    A pupil offset ``df`` (cycles/m) shears a plane at distance ``dz`` by
    ``wavelength * dz * df`` meters.
    """
    return disparity * pitch / (wavelength * pupil_step_freq)


DEMO_SCENES = ("checker", "bars", "rings")


def demo_scene(name: str, shape: tuple[int, int]) -> SceneSpec:
    """Three two-layer procedural scenes: a textured background and a nearer object."""
    ny, nx = shape
    cy, cx = ny / 2, nx / 2
    if name == "checker":
        layers = (
            Layer("checker", {"size": max(ny // 8, 2), "lo": 0.25, "hi": 0.9}, disparity=-1),
            Layer("constant", {"value": 1.0}, disparity=2, opacity="disk",
                  opacity_params={"center": (cy - ny / 10, cx + nx / 10), "radius": ny / 5}),
        )
    elif name == "bars":
        layers = (
            Layer("bars", {"period": max(ny // 6, 2), "lo": 0.15, "hi": 0.85}, disparity=1),
            Layer("gradient_disk", {"center": (cy, cx), "radius": ny / 3.5, "hi": 1.0}, disparity=-2,
                  opacity="disk", opacity_params={"center": (cy, cx), "radius": ny / 4}),
        )
    elif name == "rings":
        layers = (
            Layer("ramp", {"axis": "y", "lo": 0.2, "hi": 0.7}, disparity=0),
            Layer("rings", {"center": (cy, cx), "period": max(ny // 8, 2), "lo": 0.3, "hi": 1.0},
                  disparity=2, opacity="rect",
                  opacity_params={"box": (ny // 4, nx // 3, 3 * ny // 4, 2 * nx // 3)}),
        )
    else:
        raise ValueError(f"unknown demo scene {name!r}; choose from {DEMO_SCENES}")
    return SceneSpec(name, layers)


def save_lightfield(target: LightFieldTarget, path) -> None:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    V = target.n_views
    meta = {
        "format_version": FORMAT_VERSION,
        "views": V,
        "grid": target.grid.to_dict(),
        "dtype": "<f4",
        "layout": target.layout.to_dict() if target.layout is not None else None,
        "scene": target.scene,
    }
    (path / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True))
    for r in range(V):
        for c in range(V):
            np.ascontiguousarray(target.views[r, c], dtype="<f4").tofile(path / f"view_{r}_{c}.f32")


def load_lightfield(path) -> LightFieldTarget:
    path = Path(path)
    try:
        meta = json.loads((path / "meta.json").read_text())
    except FileNotFoundError as e:
        raise LightFieldFormatError(f"{path}: missing meta.json") from e
    except json.JSONDecodeError as e:
        raise LightFieldFormatError(f"{path}/meta.json: malformed header ({e})") from e
    for key in ("views", "grid", "dtype"):
        if key not in meta:
            raise LightFieldFormatError(f"{path}/meta.json: malformed header, missing key {key!r}")
    if meta["dtype"] != "<f4":
        raise LightFieldFormatError(f"unsupported dtype {meta['dtype']!r}")
    try:
        grid = GridSpec.from_dict(meta["grid"])
    except (KeyError, TypeError, ValueError) as e:
        raise LightFieldFormatError(f"{path}/meta.json: malformed grid ({e})") from e
    V = int(meta["views"])
    files = sorted(path.glob("view_*_*.f32"))
    if len(files) != V * V:
        raise LightFieldFormatError(
            f"{path}: header declares {V}x{V}={V * V} views but {len(files)} view files are present")
    n = grid.ny * grid.nx
    views = np.empty((V, V) + grid.shape, dtype=np.float32)
    for r in range(V):
        for c in range(V):
            f = path / f"view_{r}_{c}.f32"
            if not f.exists():
                raise LightFieldFormatError(f"{path}: missing view file {f.name}")
            raw = f.read_bytes()
            if len(raw) != 4 * n:
                short = 4 * n - len(raw)
                what = f"truncated: missing {short} bytes" if short > 0 else f"{-short} extra bytes"
                raise LightFieldFormatError(f"{f}: {what} (expected {4 * n})")
            views[r, c] = np.frombuffer(raw, dtype="<f4").reshape(grid.shape)
    layout = PupilLayout.from_dict(meta["layout"]) if meta.get("layout") else None
    return LightFieldTarget(views, grid, layout, meta.get("scene") or {})

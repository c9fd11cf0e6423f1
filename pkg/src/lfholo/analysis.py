"""Etendue bookkeeping and image-quality metrics."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "EtendueParams",
    "etendue_slm",
    "etendue_from_angle",
    "diffraction_half_angle",
    "fov_eyebox",
    "paraxial_product",
    "tradeoff_table",
    "write_tradeoff_csv",
    "TRADEOFF_COLUMNS",
    "METRICS_COLUMNS",
    "psnr",
    "ssim",
    "to_display_intensity",
    "incidence_angle_deg",
]

TRADEOFF_COLUMNS = ("alpha", "g_m", "fov_x_deg", "fov_y_deg", "eyebox_mm", "etendue_m2sr")
METRICS_COLUMNS = ("scene", "config", "frames", "view", "psnr_db", "ssim")


@dataclass(frozen=True)
class EtendueParams:
    n_x: int
    n_y: int
    pitch: float
    wavelength: float
    g: float
    alpha: int = 1

    def __post_init__(self):
        if min(self.pitch, self.wavelength, self.g) <= 0 or self.alpha < 1:
            raise ValueError("etendue parameters must be positive")

    @property
    def extent(self) -> tuple[float, float]:
        return (self.n_x * self.pitch, self.n_y * self.pitch)

    @property
    def area(self) -> float:
        return self.extent[0] * self.extent[1]


def etendue_slm(n_x: int, n_y: int, wavelength: float) -> float:
    """G = lambda^2 N_x N_y (m^2 sr).  Zero pixels give 0."""
    return wavelength ** 2 * n_x * n_y


def diffraction_half_angle(pitch: float, wavelength: float) -> float:
    return math.asin(wavelength / (2 * pitch))


def etendue_from_angle(area: float, half_angle: float) -> float:
    """G = 4 A sin^2(theta)."""
    return 4 * area * math.sin(half_angle) ** 2


def fov_eyebox(p: EtendueParams) -> tuple[float, float, float]:
    """(FoV_x, FoV_y) in radians and the expanded 1D eyebox w = alpha g lambda / p in meters."""
    fov_x = 2 * math.atan(p.n_x * p.pitch / (2 * p.g))
    fov_y = 2 * math.atan(p.n_y * p.pitch / (2 * p.g))
    w = p.alpha * p.g * p.wavelength / p.pitch
    return fov_x, fov_y, w


def paraxial_product(p: EtendueParams) -> float:
    fx, fy, w = fov_eyebox(p)
    return fx * fy * w * w


def tradeoff_table(base: EtendueParams, g_values: Iterable[float], alphas: Sequence[int]) -> list[dict]:
    """Rows tracing constant-etendue FoV/eyebox loci, one per (alpha, g)."""
    rows = []
    for a in alphas:
        for g in g_values:
            p = EtendueParams(base.n_x, base.n_y, base.pitch, base.wavelength, float(g), int(a))
            fx, fy, w = fov_eyebox(p)
            rows.append({
                "alpha": int(a), "g_m": float(g),
                "fov_x_deg": math.degrees(fx), "fov_y_deg": math.degrees(fy),
                "eyebox_mm": w * 1e3,
                "etendue_m2sr": a * a * etendue_slm(p.n_x, p.n_y, p.wavelength),
            })
    return rows


def write_tradeoff_csv(rows: list[dict], path=None) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=TRADEOFF_COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", newline="") as f:
            f.write(text)
    return text


def incidence_angle_deg(spacing: float, focal_length: float) -> float:
    """Angle of a collimated source offset by ``spacing`` behind a lens of ``focal_length``."""
    return math.degrees(math.atan2(spacing, focal_length))


def to_display_intensity(amplitude: np.ndarray, target_amplitude: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Intensities normalized by the target's peak intensity; reconstruction clipped to [0, 1]."""
    ti = np.asarray(target_amplitude, dtype=np.float64) ** 2
    peak = ti.max()
    if peak <= 0:
        raise ValueError("target is identically zero")
    ri = np.asarray(amplitude, dtype=np.float64) ** 2 / peak
    return np.clip(ri, 0.0, 1.0), ti / peak


def psnr(a: np.ndarray, b: np.ndarray, data_range: float = 1.0) -> float:
    """PSNR in dB; identical images give ``inf``."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(data_range ** 2 / mse)


def ssim(a: np.ndarray, b: np.ndarray, data_range: float = 1.0) -> float:
    """Gaussian-window SSIM (11x11, sigma 1.5, K1 0.01, K2 0.03)."""
    from skimage.metrics import structural_similarity

    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    return float(structural_similarity(a, b, data_range=data_range, gaussian_weights=True,
                                       sigma=1.5, use_sample_covariance=False, K1=0.01, K2=0.03))

"""Angular spectrum propagation with an evanescent cutoff and its adjoint."""

from __future__ import annotations

import threading
from dataclasses import dataclass

import numpy as np

from .field import ComplexField, GridSpec, fft2c, freq_coords, ifft2c

__all__ = [
    "PropagationKernel",
    "make_kernel",
    "transfer_function",
    "propagating_band",
    "propagate",
    "propagate_adjoint",
    "band_limit",
    "propagate_padded",
    "clear_kernel_cache",
]


@dataclass(frozen=True, eq=False)
class PropagationKernel:
    grid: GridSpec
    z: float
    values: np.ndarray  # DC-at-origin transfer function


def propagating_band(grid: GridSpec) -> np.ndarray:
    FX, FY = freq_coords(grid)
    return np.sqrt(FX ** 2 + FY ** 2) < 1.0 / grid.wavelength


def transfer_function(grid: GridSpec, z: float) -> np.ndarray:
    """H(fx, fy; z) = exp(i 2pi/lambda z sqrt(1 - (lambda fx)^2 - (lambda fy)^2)), 0 if evanescent."""
    lam = grid.wavelength
    FX, FY = freq_coords(grid)
    band = np.sqrt(FX ** 2 + FY ** 2) < 1.0 / lam
    arg = 1.0 - (lam * FX) ** 2 - (lam * FY) ** 2
    root = np.sqrt(np.where(band, arg, 0.0))
    return np.where(band, np.exp(1j * (2 * np.pi / lam) * z * root), 0.0)


_cache: dict[tuple, PropagationKernel] = {}
_cache_lock = threading.Lock()


def make_kernel(grid: GridSpec, z: float, cache: bool = True) -> PropagationKernel:
    """Build (or fetch from the process-wide cache) the ASM kernel for ``grid`` at distance ``z``."""
    z = float(z)
    if not np.isfinite(z):
        raise ValueError("propagation distance must be finite")
    key = (grid, z)
    if cache:
        hit = _cache.get(key)
        if hit is not None:
            return hit
    kernel = PropagationKernel(grid, z, transfer_function(grid, z))
    kernel.values.setflags(write=False)
    if cache:
        with _cache_lock:
            _cache[key] = kernel
    return kernel


def clear_kernel_cache() -> None:
    with _cache_lock:
        _cache.clear()


def _check(u: ComplexField, kernel: PropagationKernel) -> None:
    if u.grid != kernel.grid:
        raise ValueError("field grid does not match kernel grid")
    if u.domain != "space":
        raise ValueError("propagation expects a space-domain field")


def propagate(u: ComplexField, kernel: PropagationKernel) -> ComplexField:
    _check(u, kernel)
    return u.with_values(ifft2c(fft2c(u.values) * kernel.values))


def propagate_adjoint(g: ComplexField, kernel: PropagationKernel) -> ComplexField:
    _check(g, kernel)
    return g.with_values(ifft2c(fft2c(g.values) * np.conj(kernel.values)))


def band_limit(u: ComplexField) -> ComplexField:
    """Projection onto the propagating band (what z=0 propagation returns)."""
    return u.with_values(ifft2c(fft2c(u.values) * propagating_band(u.grid)))


def propagate_padded(u: ComplexField, z: float, pad: int = 1) -> ComplexField:
    """Propagate ``u`` embedded in a ``pad``-times larger zero field, then crop.

    Removes the periodic wrap-around of plain ASM when the field spreads
    beyond the window.  ``pad=1`` is plain :func:`propagate`.
    """
    if int(pad) != pad or pad < 1:
        raise ValueError("pad must be a positive integer")
    pad = int(pad)
    g = u.grid
    if pad == 1:
        return propagate(u, make_kernel(g, z))
    if u.domain != "space":
        raise ValueError("propagation expects a space-domain field")
    big = GridSpec(g.nx * pad, g.ny * pad, g.pitch_x, g.pitch_y, g.wavelength)
    oy, ox = (big.ny - g.ny) // 2, (big.nx - g.nx) // 2
    buf = np.zeros(big.shape, dtype=np.result_type(u.values.dtype, np.complex64))
    buf[oy:oy + g.ny, ox:ox + g.nx] = u.values
    H = make_kernel(big, z, cache=False).values
    out = ifft2c(fft2c(buf) * H)[oy:oy + g.ny, ox:ox + g.nx]
    return u.with_values(out)

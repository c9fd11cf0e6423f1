"""Straight-line reference evaluation of the multi-source image formation model.

Shares no code with ``lfholo``: explicit tilts, np.kron pixel hold,
np.fft with manual normalization, the transfer function written out.
"""

import numpy as np


def ref_transfer(n, pitch, lam, z):
    f = np.fft.fftfreq(n, d=pitch)
    FX, FY = np.meshgrid(f, f)
    out = np.zeros((n, n), complex)
    for i in range(n):
        for j in range(n):
            fx, fy = FX[i, j], FY[i, j]
            if np.sqrt(fx * fx + fy * fy) < 1 / lam:
                out[i, j] = np.exp(1j * 2 * np.pi / lam * z * np.sqrt(1 - (lam * fx) ** 2 - (lam * fy) ** 2))
    return out


def ref_field(phi, q, pitch_slm, lam, z, sin_xy, weight, mask_full):
    """Image-plane field of one source (phi already quantized if needed)."""
    n = phi.shape[0] * q
    pitch = pitch_slm / q
    u = np.kron(np.exp(1j * phi), np.ones((q, q)))
    x = np.arange(n) * pitch
    X, Y = np.meshgrid(x, x)
    k0 = 2 * np.pi / lam
    u = weight * u * np.exp(1j * k0 * (sin_xy[0] * X + sin_xy[1] * Y))
    U = np.fft.fft2(u) / n
    E = np.fft.ifft2(U * ref_transfer(n, pitch, lam, z) * mask_full) * n
    return E


def ref_view(phis, masks_full, pupil, q, pitch_slm, lam, z, sources, schedule="simultaneous"):
    """sqrt(1/T sum_t sum_j |E|^2), with ``sources`` a list of (sin_x, sin_y, weight)."""
    T = len(phis)
    acc = 0.0
    for t in range(T):
        js = range(len(sources)) if schedule == "simultaneous" else [t]
        for j in js:
            sx, sy, w = sources[j]
            E = ref_field(phis[t], q, pitch_slm, lam, z, (sx, sy), w, masks_full[t] * pupil)
            acc = acc + np.abs(E) ** 2
    return np.sqrt(acc / T)

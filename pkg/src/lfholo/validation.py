"""Input validation helpers shared by the estimator, optimizer and CLI."""

from __future__ import annotations

import numbers

import numpy as np

from .lightfield import LightFieldTarget

__all__ = ["check_lightfield", "check_phases", "check_random_state_int", "check_positive"]


def check_lightfield(X, views: int | None = None, shape: tuple[int, int] | None = None,
                     dtype=np.float64) -> np.ndarray:
    """Return a finite (V, V, ny, nx) amplitude array in [0, 1].

    Accepts a :class:`LightFieldTarget`, a (V, V, ny, nx) array or a
    single 2D image (treated as a 1x1 light field).
    """
    if isinstance(X, LightFieldTarget):
        X = X.views
    X = np.asarray(X)
    if X.dtype == object or not np.issubdtype(X.dtype, np.number) or np.iscomplexobj(X):
        raise TypeError("light field must be a real numeric array")
    if X.ndim == 2:
        X = X[None, None]
    if X.ndim != 4 or X.shape[0] != X.shape[1]:
        raise ValueError(f"expected a (V, V, ny, nx) light field, got shape {X.shape}")
    if views is not None and X.shape[0] != views:
        raise ValueError(f"expected {views}x{views} views, got {X.shape[0]}x{X.shape[1]}")
    if shape is not None and X.shape[2:] != tuple(shape):
        raise ValueError(f"expected views of shape {tuple(shape)}, got {X.shape[2:]}")
    X = X.astype(dtype, copy=False)
    if not np.all(np.isfinite(X)):
        raise ValueError("light field contains NaN or inf")
    if X.min() < 0 or X.max() > 1:
        raise ValueError("light field amplitudes must lie in [0, 1]")
    return X


def check_phases(phases, frames: int, shape: tuple[int, int]) -> np.ndarray:
    phases = np.asarray(phases, dtype=np.float64)
    if phases.ndim == 2:
        phases = phases[None]
    if phases.shape != (frames,) + tuple(shape):
        raise ValueError(f"expected phases of shape {(frames,) + tuple(shape)}, got {phases.shape}")
    if not np.all(np.isfinite(phases)):
        raise ValueError("phases contain NaN or inf")
    return phases


def check_random_state_int(random_state) -> int:
    """Integer seed from ``None``/int/Generator (the optimizer needs a reproducible int)."""
    if random_state is None:
        return 0
    if isinstance(random_state, numbers.Integral):
        if random_state < 0:
            raise ValueError("random_state must be non-negative")
        return int(random_state)
    if isinstance(random_state, np.random.Generator):
        return int(random_state.integers(0, 2 ** 31 - 1))
    raise TypeError(f"cannot derive a seed from {type(random_state).__name__}")


def check_positive(name: str, value) -> float:
    if not isinstance(value, numbers.Real) or not np.isfinite(value) or value <= 0:
        raise ValueError(f"{name} must be a positive finite number, got {value!r}")
    return float(value)

"""scikit-learn style front end to the light-field hologram optimizer."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .analysis import psnr, ssim, to_display_intensity
from .baselines import BaseParams, make_config
from .forward import ForwardModel, Params, SystemConfig, full_lightfield
from .optimizer import Hyper, optimize
from .validation import check_lightfield, check_phases, check_positive, check_random_state_int

__all__ = ["LightFieldHologram"]


class LightFieldHologram(BaseEstimator):
    """Fit time-multiplexed phase patterns (and Fourier masks) to a target light field.

    Parameters
    ----------
    baseline : str
        Display configuration tag (``"I"`` ... ``"VII"``, ``"Vstar"``); ignored
        when ``config`` is given.
    base : BaseParams or None
        Shared physical parameters for the baseline factory.
    frames : int or None
        Frame count for configurations V and V*.
    config : SystemConfig or None
        Explicit system configuration, overriding ``baseline``/``base``/``frames``.
    n_iter, lr_phase, lr_mask, lr_scale, lr_weights :
        Iterations and Adam step sizes per parameter group.
    closed_form_scale : bool
        Use the per-view least-squares scale instead of a learned one.
    precision : {"f64", "f32"}
    random_state : int or None

    Attributes
    ----------
    config_ : SystemConfig
    phases_ : ndarray (T, Ny, Nx), hard-quantized
    mask_logits_ : ndarray (T, ry, rx) or None
    scale_ : float
    source_weights_ : ndarray (T, J) or None
    report_ : OptimizeReport
    """

    def __init__(self, baseline="V", base=None, frames=None, config=None, n_iter=1000,
                 lr_phase=2e-2, lr_mask=5e-2, lr_scale=1e-2, lr_weights=1e-2,
                 closed_form_scale=False, precision="f64", random_state=0):
        self.baseline = baseline
        self.base = base
        self.frames = frames
        self.config = config
        self.n_iter = n_iter
        self.lr_phase = lr_phase
        self.lr_mask = lr_mask
        self.lr_scale = lr_scale
        self.lr_weights = lr_weights
        self.closed_form_scale = closed_form_scale
        self.precision = precision
        self.random_state = random_state

    def _make_config(self) -> SystemConfig:
        if self.config is not None:
            if not isinstance(self.config, SystemConfig):
                raise TypeError("config must be a SystemConfig")
            return self.config
        return make_config(self.baseline, self.base or BaseParams(), frames=self.frames)

    def _hyper(self) -> Hyper:
        for name in ("lr_phase", "lr_mask", "lr_scale", "lr_weights"):
            check_positive(name, getattr(self, name))
        return Hyper(n_iter=int(self.n_iter), lr_phase=self.lr_phase, lr_mask=self.lr_mask,
                     lr_scale=self.lr_scale, lr_weights=self.lr_weights,
                     seed=check_random_state_int(self.random_state),
                     closed_form_scale=bool(self.closed_form_scale), precision=self.precision)

    def fit(self, X, y=None):
        """Optimize against the target light field ``X`` (V, V, ny, nx) amplitudes."""
        cfg = self._make_config()
        hyper = self._hyper()
        X = check_lightfield(X, cfg.layout.views, cfg.grid.shape)
        self.model_ = ForwardModel(cfg, hyper.dtype)
        params, report = optimize(cfg, X, hyper, model=self.model_)
        self.config_ = cfg
        self.params_ = params
        self.phases_ = params.phases
        self.mask_logits_ = params.logits
        self.scale_ = params.scale
        self.source_weights_ = params.weights
        self.report_ = report
        self.n_iter_ = hyper.n_iter
        return self

    def predict(self, X=None):
        """Reconstructed light field ``scale * amplitude``, shape (V, V, ny, nx).

        ``X`` is accepted for API symmetry and only used for shape checks.
        """
        check_is_fitted(self, "params_")
        out = self.params_.scale * full_lightfield(self.params_, self.config_, self.model_)
        if X is not None:
            check_lightfield(X, self.config_.layout.views, self.config_.grid.shape)
        return out.astype(np.float64)

    def view_metrics(self, X):
        """Per-view (PSNR, SSIM) on peak-normalized intensities."""
        X = check_lightfield(X, self.config_.layout.views, self.config_.grid.shape)
        rec = self.predict()
        V = X.shape[0]
        out = []
        for r in range(V):
            for c in range(V):
                a, b = to_display_intensity(rec[r, c], X[r, c])
                out.append((psnr(a, b), ssim(a, b)))
        return out

    def score(self, X, y=None):
        """Mean per-view PSNR (dB)."""
        return float(np.mean([m[0] for m in self.view_metrics(X)]))

    def set_solution(self, phases, logits=None, scale=1.0, weights=None, config=None):
        """Load a stored solution without optimizing (for re-simulation)."""
        cfg = config or self._make_config()
        phases = check_phases(phases, cfg.frames, cfg.slm.shape)
        self.config_ = cfg
        self.model_ = ForwardModel(cfg, Hyper(precision=self.precision).dtype)
        self.params_ = Params(phases, logits, float(scale), weights)
        self.phases_, self.mask_logits_, self.scale_ = phases, logits, float(scale)
        self.source_weights_ = weights
        return self

"""Stochastic light-field hologram optimization: one sampled pupil view per step."""

from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .analysis import psnr, ssim, to_display_intensity
from .forward import ForwardModel, Params, SystemConfig
from .slm import quantize_phase

__all__ = [
    "Hyper",
    "Adam",
    "ViewSampler",
    "OptimizerState",
    "OptimizeReport",
    "NumericalError",
    "init_state",
    "stochastic_step",
    "optimize",
    "evaluate",
]

logger = logging.getLogger(__name__)


class NumericalError(RuntimeError):
    """Non-finite loss; ``snapshot`` holds the parameters before the failing step."""

    def __init__(self, msg: str, snapshot: Optional[Params] = None, iteration: int = -1):
        super().__init__(msg)
        self.snapshot = snapshot
        self.iteration = iteration


@dataclass(frozen=True)
class Hyper:
    n_iter: int = 1000
    lr_phase: float = 2e-2
    lr_mask: float = 5e-2
    lr_scale: float = 1e-2
    lr_weights: float = 1e-2
    seed: int = 0
    closed_form_scale: bool = False
    precision: str = "f64"

    def __post_init__(self):
        if self.n_iter < 0:
            raise ValueError("n_iter must be non-negative")
        if self.precision not in ("f32", "f64"):
            raise ValueError("precision must be 'f32' or 'f64'")

    @property
    def dtype(self):
        return np.complex64 if self.precision == "f32" else np.complex128


class Adam:
    """Per-parameter-group Adam with bias correction."""

    def __init__(self, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}
        self.t = 0

    def step(self, name: str, value, grad, lr: float):
        b1, b2 = self.beta1, self.beta2
        grad = np.asarray(grad, dtype=np.float64)
        m = self.m.get(name)
        if m is None:
            m = np.zeros_like(grad)
            self.v[name] = np.zeros_like(grad)
        m = b1 * m + (1 - b1) * grad
        v = b2 * self.v[name] + (1 - b2) * grad * grad
        self.m[name], self.v[name] = m, v
        mhat = m / (1 - b1 ** self.t)
        vhat = v / (1 - b2 ** self.t)
        return value - lr * mhat / (np.sqrt(vhat) + self.eps)


class ViewSampler:
    """Epoch-based view sampling: a fresh random permutation of all views per epoch."""

    def __init__(self, n_views: int, rng: np.random.Generator):
        self.n_views = n_views
        self.rng = rng
        self._queue: list[int] = []

    def __call__(self) -> int:
        if not self._queue:
            self._queue = list(self.rng.permutation(self.n_views))
        return int(self._queue.pop(0))


@dataclass
class OptimizerState:
    params: Params
    adam: Adam
    sampler: ViewSampler
    iteration: int = 0


@dataclass
class OptimizeReport:
    loss_curve: list = field(default_factory=list)
    view_psnr: list = field(default_factory=list)
    view_ssim: list = field(default_factory=list)
    wall_clock: float = 0.0
    config: dict = field(default_factory=dict)
    hyper: dict = field(default_factory=dict)
    seed: int = 0
    scale: float = 1.0

    @property
    def mean_psnr(self) -> float:
        return float(np.mean(self.view_psnr)) if self.view_psnr else float("nan")

    @property
    def mean_ssim(self) -> float:
        return float(np.mean(self.view_ssim)) if self.view_ssim else float("nan")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["mean_psnr"] = self.mean_psnr
        d["mean_ssim"] = self.mean_ssim
        return d


def init_state(model: ForwardModel, hyper: Hyper) -> OptimizerState:
    rng = np.random.default_rng(hyper.seed)
    params = model.init_params(rng)
    return OptimizerState(params, Adam(), ViewSampler(len(model.cfg.layout), rng))


def _flat_views(target: np.ndarray, cfg: SystemConfig) -> np.ndarray:
    V = cfg.layout.views
    t = np.asarray(target)
    if t.shape[:2] == (V, V):
        t = t.reshape((V * V,) + t.shape[2:])
    if t.shape != (V * V,) + cfg.grid.shape:
        raise ValueError(f"target shape {np.shape(target)} does not match {V}x{V} views on {cfg.grid.shape}")
    return t


def stochastic_step(state: OptimizerState, target: np.ndarray, model: ForwardModel, hyper: Hyper) -> float:
    """Sample one view, evaluate its loss and apply one Adam update to every parameter group."""
    views = _flat_views(target, model.cfg)
    p = state.sampler()
    params = state.params
    loss, g = model.view_loss(params, p, views[p].astype(model.rtype),
                              closed_form_scale=hyper.closed_form_scale)
    if not np.isfinite(loss):
        raise NumericalError(f"non-finite loss at iteration {state.iteration} (view {p})",
                             params.copy(), state.iteration)
    adam = state.adam
    adam.t += 1
    params.phases = adam.step("phases", params.phases, g.phases, hyper.lr_phase)
    if params.logits is not None:
        params.logits = adam.step("logits", params.logits, g.logits, hyper.lr_mask)
    if not hyper.closed_form_scale:
        params.scale = max(float(adam.step("scale", params.scale, g.scale, hyper.lr_scale)), 1e-12)
    if params.weights is not None:
        params.weights = np.maximum(adam.step("weights", params.weights, g.weights, hyper.lr_weights), 0.0)
    for name, v in (("phases", params.phases), ("logits", params.logits),
                    ("scale", params.scale), ("weights", params.weights)):
        if v is not None and not np.all(np.isfinite(v)):
            raise NumericalError(f"non-finite {name} after update {state.iteration}",
                                 params.copy(), state.iteration)
    state.iteration += 1
    return loss


def _fit_scale(model: ForwardModel, params: Params, views: np.ndarray) -> float:
    num = den = 0.0
    for p in range(len(views)):
        A = model.view(params, p)[0]
        num += float(np.sum(A * views[p]))
        den += float(np.sum(A * A))
    return num / den if den > 0 else params.scale


def optimize(cfg: SystemConfig, target: np.ndarray, hyper: Hyper = Hyper(),
             model: Optional[ForwardModel] = None, state: Optional[OptimizerState] = None,
             log_every: int = 0):
    """Run ``hyper.n_iter`` stochastic steps; phases are hard-quantized on return.

    Returns (params, report).  With 0 iterations the initialization is
    returned unchanged and the report carries no metrics.
    """
    model = model or ForwardModel(cfg, hyper.dtype)
    state = state or init_state(model, hyper)
    report = OptimizeReport(config=cfg.to_dict(), hyper=asdict(hyper), seed=hyper.seed)
    if hyper.n_iter == 0:
        report.scale = state.params.scale
        return state.params, report
    t0 = time.perf_counter()
    for it in range(hyper.n_iter):
        loss = stochastic_step(state, target, model, hyper)
        report.loss_curve.append(loss)
        if log_every and (it + 1) % log_every == 0:
            logger.info("iter %d/%d loss %.5g", it + 1, hyper.n_iter, loss)
    params = state.params
    if cfg.levels:
        params.phases = quantize_phase(params.phases, cfg.levels)
    if hyper.closed_form_scale:
        params.scale = _fit_scale(model, params, _flat_views(target, cfg).astype(model.rtype))
    report.wall_clock = time.perf_counter() - t0
    report.scale = float(params.scale)
    report.view_psnr, report.view_ssim = evaluate(model, params, target)
    return params, report


def evaluate(model: ForwardModel, params: Params, target: np.ndarray) -> tuple[list, list]:
    """Per-view PSNR/SSIM on target-peak-normalized intensities."""
    views = _flat_views(target, model.cfg)
    ps, ss = [], []
    for p in range(len(views)):
        A = params.scale * model.view(params, p)[0].astype(np.float64)
        r, t = to_display_intensity(A, views[p])
        ps.append(psnr(r, t))
        ss.append(ssim(r, t))
    return ps, ss

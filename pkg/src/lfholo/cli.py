"""Command-line entry points.

Verbs: ``optimize``, ``simulate``, ``render-target``, ``analyze-etendue``
and ``metrics``.  Configs are strict JSON (see ``RunConfig``); unknown keys
are rejected.  Exit codes: 0 ok, 2 config error, 3 numerical failure,
4 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import math
import sys
from pathlib import Path
from typing import Literal, Optional

import numpy as np
import scipy.fft
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .analysis import (EtendueParams, METRICS_COLUMNS, etendue_slm, fov_eyebox, paraxial_product,
                       psnr, ssim, to_display_intensity, tradeoff_table, write_tradeoff_csv)
from .baselines import BaseParams, make_config, parse_baseline
from .forward import ForwardModel, Params, SystemConfig
from .fourier import PupilSpec, pupil_mask, save_mask, sigmoid
from .lightfield import (LightFieldFormatError, LightFieldTarget, SceneSpec, demo_scene,
                         load_lightfield, render_lightfield, save_lightfield)
from .optimizer import Hyper, NumericalError, optimize
from .slm import save_phase

__all__ = ["RunConfig", "EtendueConfig", "main", "load_solution", "render_solution_view"]

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4

log = logging.getLogger("lfholo")


class ConfigError(ValueError):
    pass


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", strict=True, frozen=True)


class SystemSection(_Strict):
    """Shared physical parameters; any field left out takes the library default."""

    n_slm: int = Field(BaseParams.n_slm, ge=2)
    pitch: float = Field(BaseParams.pitch, gt=0)
    wavelength: float = Field(BaseParams.wavelength, gt=0)
    lambda_ref: Optional[float] = Field(None, gt=0)
    alpha: int = Field(BaseParams.alpha, ge=1)
    q: Optional[int] = Field(None, ge=1)
    fill_factor: float = Field(BaseParams.fill_factor, gt=0, le=1)
    z: float = BaseParams.z
    g: float = Field(BaseParams.g, gt=0)
    views: int = Field(BaseParams.views, ge=1)
    pupil_radius: Optional[float] = Field(BaseParams.pupil_radius, gt=0)
    levels: Optional[int] = Field(BaseParams.levels, ge=2)
    mask_resolution: tuple[int, int] = BaseParams.mask_resolution
    random_mask_seed: int = BaseParams.random_mask_seed
    phase_screen_seed: int = BaseParams.phase_screen_seed

    def to_base(self) -> BaseParams:
        return BaseParams(**self.model_dump())


class OptimizerSection(_Strict):
    n_iter: int = Field(Hyper.n_iter, ge=0)
    lr_phase: float = Field(Hyper.lr_phase, gt=0)
    lr_mask: float = Field(Hyper.lr_mask, gt=0)
    lr_scale: float = Field(Hyper.lr_scale, gt=0)
    lr_weights: float = Field(Hyper.lr_weights, gt=0)
    closed_form_scale: bool = Hyper.closed_form_scale


class SceneSection(_Strict):
    """Exactly one of ``demo`` (built-in scene name), ``path`` (stored light field) or ``spec``."""

    demo: Optional[str] = None
    path: Optional[str] = None
    spec: Optional[dict] = None

    @model_validator(mode="after")
    def _one_source(self):
        if sum(x is not None for x in (self.demo, self.path, self.spec)) != 1:
            raise ValueError("scene needs exactly one of 'demo', 'path' or 'spec'")
        return self


class RunConfig(_Strict):
    baseline: str = "V"
    frames: Optional[int] = Field(None, ge=1)
    system: SystemSection = SystemSection()
    system_config: Optional[dict] = None
    optimizer: OptimizerSection = OptimizerSection()
    scene: SceneSection = SceneSection(demo="checker")
    out: Optional[str] = None
    seed: int = 0
    precision: Literal["f32", "f64"] = "f64"
    jobs: int = Field(1, ge=1)
    log_every: int = Field(0, ge=0)

    @model_validator(mode="after")
    def _check_baseline(self):
        parse_baseline(self.baseline)
        return self

    def system_cfg(self) -> SystemConfig:
        if self.system_config is not None:
            return SystemConfig.from_dict(self.system_config)
        return make_config(self.baseline, self.system.to_base(), self.frames)

    def hyper(self) -> Hyper:
        return Hyper(seed=self.seed, precision=self.precision, **self.optimizer.model_dump())


class EtendueConfig(_Strict):
    n_x: int = Field(1280, ge=1)
    n_y: int = Field(800, ge=1)
    pitch: float = Field(8e-6, gt=0)
    wavelength: float = Field(520e-9, gt=0)
    g: float = Field(50e-3, gt=0)
    alpha: int = Field(3, ge=1)
    g_values: list[float] = Field(default_factory=lambda: [round(0.01 * k, 2) for k in range(1, 21)])
    alphas: list[int] = Field(default_factory=lambda: [1, 2, 3])
    out: Optional[str] = None


# -- config loading ------------------------------------------------------------

def _read_json(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON ({e})") from e
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return data


def _parse(model, data: dict, overrides: dict):
    data = dict(data)
    data.update({k: v for k, v in overrides.items() if v is not None})
    try:
        cfg = model.model_validate_json(json.dumps(data))
    except ValidationError as e:
        raise ConfigError(str(e)) from e
    return cfg


def _resolve_out(cfg_out: Optional[str], default: str) -> Path:
    return Path(cfg_out or default)


def _echo(cfg: BaseModel, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / "config_echo.json").write_text(cfg.model_dump_json(indent=2) + "\n")


def _system(run: RunConfig) -> SystemConfig:
    try:
        return run.system_cfg()
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigError(f"invalid system: {e}") from e


def _target(run: RunConfig, cfg: SystemConfig) -> LightFieldTarget:
    sc = run.scene
    if sc.path is not None:
        t = load_lightfield(sc.path)
        if t.views.shape[:2] != (cfg.layout.views,) * 2 or t.grid.shape != cfg.grid.shape:
            raise ConfigError(f"stored light field {sc.path} does not match the system "
                              f"({t.views.shape} vs {cfg.layout.views}x{cfg.layout.views} on {cfg.grid.shape})")
        return t
    try:
        scene = demo_scene(sc.demo, cfg.grid.shape) if sc.demo is not None else SceneSpec.from_dict(sc.spec)
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigError(f"invalid scene: {e}") from e
    return render_lightfield(scene, cfg.layout.views, cfg.grid, cfg.layout)


# -- solution storage ----------------------------------------------------------

def _dump(path: Path, a: np.ndarray) -> None:
    np.ascontiguousarray(a, dtype="<f8").tofile(path)


def save_solution(path, params: Params, cfg: SystemConfig, precision: str, seed: int) -> None:
    """Authoritative float64 dump of the optimized variables."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    _dump(path / "phases.f64", params.phases)
    meta = {"system": cfg.to_dict(), "scale": float(params.scale), "precision": precision,
            "seed": seed, "phases_shape": list(params.phases.shape),
            "logits_shape": None, "weights_shape": None}
    if params.logits is not None:
        _dump(path / "logits.f64", params.logits)
        meta["logits_shape"] = list(params.logits.shape)
    if params.weights is not None:
        _dump(path / "weights.f64", params.weights)
        meta["weights_shape"] = list(params.weights.shape)
    (path / "solution.json").write_text(json.dumps(meta, indent=2, sort_keys=True))


def _load_raw(path: Path, shape) -> np.ndarray:
    raw = np.fromfile(path, dtype="<f8")
    n = int(np.prod(shape))
    if raw.size != n:
        raise LightFieldFormatError(f"{path}: expected {n} samples, found {raw.size}")
    return raw.reshape(shape)


def load_solution(path) -> tuple[Params, SystemConfig, str]:
    """Read a solution directory (or an ``optimize`` output directory)."""
    path = Path(path)
    if (path / "solution").is_dir():
        path = path / "solution"
    try:
        meta = json.loads((path / "solution.json").read_text())
    except FileNotFoundError as e:
        raise FileNotFoundError(f"{path}: no solution.json (not an optimize output?)") from e
    cfg = SystemConfig.from_dict(meta["system"])
    phases = _load_raw(path / "phases.f64", meta["phases_shape"])
    logits = _load_raw(path / "logits.f64", meta["logits_shape"]) if meta["logits_shape"] else None
    weights = _load_raw(path / "weights.f64", meta["weights_shape"]) if meta["weights_shape"] else None
    return Params(phases, logits, meta["scale"], weights), cfg, meta["precision"]


def _model(cfg: SystemConfig, precision: str) -> ForwardModel:
    return ForwardModel(cfg, np.complex64 if precision == "f32" else np.complex128)


def render_solution_view(model: ForwardModel, params: Params, pupil) -> np.ndarray:
    """Scaled view amplitude as stored on disk (float32).

    ``pupil`` is a layout index, a :class:`PupilSpec` or None (no pupil).
    """
    if isinstance(pupil, PupilSpec):
        A = model.view(params, None, extra_mask=pupil_mask(pupil, model.grid).astype(model.rtype))[0]
    else:
        A = model.view(params, pupil)[0]
    return (params.scale * A.astype(np.float64)).astype(np.float32)


def _preview(img: np.ndarray, path: Path, peak: Optional[float] = None) -> None:
    from PIL import Image

    inten = np.asarray(img, dtype=np.float64) ** 2
    peak = peak if peak else (inten.max() or 1.0)
    Image.fromarray(np.clip(np.rint(255 * inten / peak), 0, 255).astype(np.uint8)).save(path)


def _write_metrics(rows: list[dict], path: Path) -> None:
    with open(path, "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=METRICS_COLUMNS, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})


# -- commands ------------------------------------------------------------------

def cmd_optimize(run: RunConfig) -> int:
    cfg = _system(run)
    target = _target(run, cfg)
    hyper = run.hyper()
    out = _resolve_out(run.out, "runs/optimize")
    _echo(run, out)
    save_lightfield(target, out / "target")
    model = _model(cfg, run.precision)
    try:
        params, report = optimize(cfg, target.views, hyper, model=model, log_every=run.log_every)
    except NumericalError as e:
        snap = out / "snapshot"
        save_solution(snap, e.snapshot, cfg, run.precision, run.seed)
        (snap / "error.json").write_text(json.dumps({"error": str(e), "iteration": e.iteration}, indent=2))
        log.error("%s; snapshot written to %s", e, snap)
        return EXIT_NUMERIC

    save_solution(out / "solution", params, cfg, run.precision, run.seed)
    for t in range(cfg.frames):
        save_phase(out / "phases" / f"frame_{t}", params.phases[t], cfg.slm, cfg.levels)
        if cfg.mask.mode == "none":
            continue
        realized = model.frame_mask(t, params.logits).astype(np.float64)
        low = sigmoid(params.logits[t]) if params.logits is not None else (
            cfg.mask.random_pattern() if cfg.mask.mode == "fixed_random" else realized)
        save_mask(out / "masks" / f"mask_{t}", low, realized)

    V = cfg.layout.views
    recon = np.stack([render_solution_view(model, params, p) for p in range(V * V)])
    recon = recon.reshape((V, V) + cfg.grid.shape)
    save_lightfield(LightFieldTarget(recon, cfg.grid, cfg.layout, target.scene), out / "recon")
    (out / "recon" / "png").mkdir(exist_ok=True)
    for r in range(V):
        for c in range(V):
            peak = float(np.max(target.views[r, c].astype(np.float64) ** 2))
            _preview(recon[r, c], out / "recon" / "png" / f"view_{r}_{c}.png", peak)

    rep = report.to_dict()
    (out / "report.json").write_text(json.dumps(rep, indent=2, sort_keys=True, default=float))
    with open(out / "loss_curve.csv", "w", newline="") as f:
        f.write("iteration,loss\n")
        for i, l in enumerate(report.loss_curve):
            f.write(f"{i},{float(l)!r}\n")
    scene = target.scene.get("name", "custom") if target.scene else "custom"
    rows = [{"scene": scene, "config": cfg.baseline, "frames": cfg.frames, "view": p,
             "psnr_db": float(report.view_psnr[p]), "ssim": float(report.view_ssim[p])}
            for p in range(len(report.view_psnr))]
    _write_metrics(rows, out / "metrics.csv")
    if rows:
        log.info("%s T=%d: mean PSNR %.2f dB, SSIM %.3f", cfg.baseline, cfg.frames,
                 report.mean_psnr, report.mean_ssim)
    return EXIT_OK


def cmd_simulate(solution, out: Path, view=None, pupil=None, z_values=None, precision=None) -> list:
    """Re-render views from stored patterns.  Returns the written file paths.

    With ``z_values`` a focal stack is rendered by re-propagating to each
    distance; the sharpness (gradient energy) of every slice goes to
    ``focal_stack.json``.
    """
    params, cfg, prec = load_solution(solution)
    prec = precision or prec
    out.mkdir(parents=True, exist_ok=True)
    if pupil is not None:
        sel = PupilSpec(tuple(pupil[:2]), pupil[2], cfg.g)
        tag = "pupil"
    elif view is not None:
        r, c = view
        if not (0 <= r < cfg.layout.views and 0 <= c < cfg.layout.views):
            raise ConfigError(f"view ({r}, {c}) outside the {cfg.layout.views}x{cfg.layout.views} layout")
        sel, tag = cfg.layout.index(r, c), f"view_{r}_{c}"
    else:
        sel = cfg.layout.center_index()
        c = (cfg.layout.views - 1) // 2
        tag = f"view_{c}_{c}"
    written = []
    if not z_values:
        img = render_solution_view(_model(cfg, prec), params, sel)
        np.ascontiguousarray(img, dtype="<f4").tofile(out / f"{tag}.f32")
        _preview(img, out / f"{tag}.png")
        return [out / f"{tag}.f32"]
    stack = []
    for i, z in enumerate(z_values):
        img = render_solution_view(_model(dataclasses.replace(cfg, z=float(z)), prec), params, sel)
        p = out / f"{tag}_z{i:03d}.f32"
        np.ascontiguousarray(img, dtype="<f4").tofile(p)
        written.append(p)
        gy, gx = np.gradient(img.astype(np.float64) ** 2)
        stack.append({"index": i, "z": float(z), "file": p.name, "sharpness": float(np.sum(gx * gx + gy * gy))})
    (out / "focal_stack.json").write_text(json.dumps(stack, indent=2))
    return written


def cmd_render_target(run: RunConfig) -> int:
    cfg = _system(run)
    target = _target(run, cfg)
    out = _resolve_out(run.out, "runs/target")
    _echo(run, out)
    save_lightfield(target, out)
    return EXIT_OK


def cmd_analyze_etendue(ec: EtendueConfig) -> int:
    out = _resolve_out(ec.out, "runs/etendue")
    _echo(ec, out)
    p = EtendueParams(ec.n_x, ec.n_y, ec.pitch, ec.wavelength, ec.g, ec.alpha)
    fx, fy, w = fov_eyebox(p)
    G = etendue_slm(p.n_x, p.n_y, p.wavelength)
    summary = {"etendue_m2sr": G, "expanded_etendue_m2sr": ec.alpha ** 2 * G,
               "fov_x_deg": math.degrees(fx), "fov_y_deg": math.degrees(fy), "eyebox_mm": w * 1e3,
               "paraxial_product": paraxial_product(p)}
    (out / "etendue.json").write_text(json.dumps(summary, indent=2, sort_keys=True))
    write_tradeoff_csv(tradeoff_table(p, ec.g_values, ec.alphas), out / "tradeoff.csv")
    return EXIT_OK


def _lightfield_dir(path: Path) -> LightFieldTarget:
    if (path / "recon" / "meta.json").exists():
        path = path / "recon"
    return load_lightfield(path)


def cmd_metrics(reference: Path, candidate: Path, out: Path) -> list[dict]:
    """Per-view PSNR/SSIM between two light-field directories (reference first)."""
    ref, cand = _lightfield_dir(reference), _lightfield_dir(candidate)
    if ref.views.shape != cand.views.shape:
        raise ConfigError(f"light fields differ in shape: {ref.views.shape} vs {cand.views.shape}")
    V = ref.n_views
    rows = []
    scene = (ref.scene or {}).get("name", "custom")
    for r in range(V):
        for c in range(V):
            ri, ti = to_display_intensity(cand.views[r, c], ref.views[r, c])
            rows.append({"scene": scene, "config": candidate.name, "frames": "", "view": r * V + c,
                         "psnr_db": psnr(ri, ti), "ssim": ssim(ri, ti)})
    out.parent.mkdir(parents=True, exist_ok=True)
    _write_metrics(rows, out)
    return rows


# -- entry point ---------------------------------------------------------------

def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lfholo", description="Light-field holography with multi-source illumination.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="verb", required=True)

    def common(p, config_required=True):
        p.add_argument("--config", required=config_required, help="JSON run config")
        p.add_argument("--out", help="output directory (overrides the config)")
        p.add_argument("--seed", type=int)
        p.add_argument("--jobs", type=int, help="worker bound for FFTs")
        p.add_argument("--precision", choices=("f32", "f64"))

    common(sub.add_parser("optimize", help="optimize a hologram for one configuration"))
    common(sub.add_parser("render-target", help="render a procedural light-field target"))
    p = sub.add_parser("analyze-etendue", help="etendue summary and FoV/eyebox sweep CSV")
    p.add_argument("--config")
    p.add_argument("--out")
    p = sub.add_parser("simulate", help="re-render views from a stored solution")
    p.add_argument("solution", help="optimize output or solution directory")
    p.add_argument("--out", required=True)
    p.add_argument("--view", type=int, nargs=2, metavar=("ROW", "COL"))
    p.add_argument("--pupil", type=float, nargs=3, metavar=("X_M", "Y_M", "RADIUS_M"),
                   help="pupil center and radius in eyebox coordinates")
    p.add_argument("--z-sweep", type=float, nargs=3, metavar=("Z0", "Z1", "N"))
    p.add_argument("--jobs", type=int)
    p.add_argument("--precision", choices=("f32", "f64"))
    p = sub.add_parser("metrics", help="PSNR/SSIM between two light-field directories")
    p.add_argument("reference")
    p.add_argument("candidate")
    p.add_argument("--out", required=True, help="CSV path")
    return ap


def _dispatch(args) -> int:
    if args.verb in ("optimize", "render-target"):
        data = _read_json(args.config)
        over = {"out": args.out, "seed": args.seed, "jobs": args.jobs, "precision": args.precision}
        run = _parse(RunConfig, data, over)
        with scipy.fft.set_workers(run.jobs):
            return cmd_optimize(run) if args.verb == "optimize" else cmd_render_target(run)
    if args.verb == "analyze-etendue":
        data = _read_json(args.config) if args.config else {}
        return cmd_analyze_etendue(_parse(EtendueConfig, data, {"out": args.out}))
    if args.verb == "simulate":
        zs = None
        if args.z_sweep:
            z0, z1, n = args.z_sweep
            if n < 1 or n != int(n):
                raise ConfigError("--z-sweep N must be a positive integer")
            zs = list(np.linspace(z0, z1, int(n)))
        with scipy.fft.set_workers(args.jobs or 1):
            cmd_simulate(Path(args.solution), Path(args.out), args.view, args.pupil, zs, args.precision)
        return EXIT_OK
    if args.verb == "metrics":
        rows = cmd_metrics(Path(args.reference), Path(args.candidate), Path(args.out))
        print(f"mean PSNR {np.mean([r['psnr_db'] for r in rows]):.3f} dB, "
              f"mean SSIM {np.mean([r['ssim'] for r in rows]):.4f}")
        return EXIT_OK
    raise ConfigError(f"unknown verb {args.verb}")


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return _dispatch(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except (OSError, LightFieldFormatError) as e:
        print(f"I/O error: {e}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())

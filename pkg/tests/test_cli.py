import json
from pathlib import Path

import numpy as np
import pytest

from lfholo.cli import RunConfig, load_solution, main, save_solution
from lfholo.field import GridSpec, fft2c, ifft2c
from lfholo.forward import Params, SystemConfig
from lfholo.fourier import FourierMask, PupilLayout, PupilSpec
from lfholo.illumination import SourceArray, SourceSpec
from lfholo.lightfield import demo_scene, load_lightfield, render_lightfield
from lfholo.propagation import make_kernel
from lfholo.slm import HdoModel

SMALL = {"n_slm": 16, "q": 2, "mask_resolution": [4, 4]}


def write_cfg(path: Path, **kw) -> Path:
    cfg = {"system": SMALL, "optimizer": {"n_iter": 12}, "scene": {"demo": "bars"}, "seed": 4}
    cfg.update(kw)
    path.write_text(json.dumps(cfg))
    return path


def raw_files(d: Path) -> dict:
    return {p.relative_to(d).as_posix(): p.read_bytes() for p in sorted(d.rglob("*"))
            if p.suffix in (".f32", ".f64") or p.name in ("metrics.csv", "loss_curve.csv")}


def test_optimize_writes_artifacts_and_echo(tmp_path):
    cfg = write_cfg(tmp_path / "c.json", baseline="V", frames=2)
    assert main(["optimize", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    o = tmp_path / "o"
    for f in ("phases/frame_0.f32", "phases/frame_1.png", "masks/mask_1.f32", "recon/view_2_2.f32",
              "report.json", "loss_curve.csv", "solution/solution.json", "target/meta.json"):
        assert (o / f).exists(), f
    rows = (o / "metrics.csv").read_text().strip().splitlines()
    assert rows[0] == "scene,config,frames,view,psnr_db,ssim" and len(rows) == 10
    echo = RunConfig.model_validate_json((o / "config_echo.json").read_text())
    assert echo.out == str(o) and echo.frames == 2 and echo.system.n_slm == 16
    rep = json.loads((o / "report.json").read_text())
    assert len(rep["loss_curve"]) == 12 and rep["seed"] == 4


def test_single_source_config(tmp_path):
    cfg = write_cfg(tmp_path / "c.json", baseline="I")
    assert main(["optimize", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    _, sc, _ = load_solution(tmp_path / "o")
    assert sc.n_sources == 1


def test_same_seed_gives_identical_raw_outputs(tmp_path):
    cfg = write_cfg(tmp_path / "c.json", baseline="Vstar")
    for d in ("a", "b"):
        assert main(["optimize", "--config", str(cfg), "--out", str(tmp_path / d)]) == 0
    a, b = raw_files(tmp_path / "a"), raw_files(tmp_path / "b")
    assert a.keys() == b.keys() and len(a) > 20
    assert all(a[k] == b[k] for k in a)
    assert main(["optimize", "--config", str(cfg), "--out", str(tmp_path / "c"), "--seed", "5"]) == 0
    assert raw_files(tmp_path / "c")["solution/phases.f64"] != a["solution/phases.f64"]


@pytest.mark.parametrize("payload", [
    {"bogus": 1},
    {"system": {"n_slm": "16"}},
    {"system": {"warp": 2}},
    {"baseline": "VIII"},
    {"scene": {"demo": "checker", "path": "x"}},
    {"precision": "f16"},
])
def test_config_errors_exit_2(tmp_path, payload, capsys):
    p = tmp_path / "c.json"
    p.write_text(json.dumps(payload))
    assert main(["optimize", "--config", str(p), "--out", str(tmp_path / "o")]) == 2
    assert "config error" in capsys.readouterr().err


def test_bad_json_and_missing_target(tmp_path):
    p = tmp_path / "c.json"
    p.write_text("{")
    assert main(["optimize", "--config", str(p)]) == 2
    cfg = write_cfg(tmp_path / "d.json", scene={"path": str(tmp_path / "nowhere")})
    assert main(["optimize", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 4


@pytest.mark.filterwarnings("ignore:overflow encountered")
def test_numerical_failure_exit_3(tmp_path):
    cfg = write_cfg(tmp_path / "c.json", optimizer={"n_iter": 3, "lr_phase": 1e308})
    assert main(["optimize", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 3
    assert (tmp_path / "o" / "snapshot" / "error.json").exists()


def test_simulate_central_view_is_bitwise_identical(tmp_path):
    cfg = write_cfg(tmp_path / "c.json", baseline="V", precision="f32")
    assert main(["optimize", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    assert main(["simulate", str(tmp_path / "o"), "--out", str(tmp_path / "s")]) == 0
    assert (tmp_path / "s" / "view_1_1.f32").read_bytes() == (tmp_path / "o" / "recon" / "view_1_1.f32").read_bytes()
    assert main(["simulate", str(tmp_path / "o"), "--out", str(tmp_path / "s"), "--view", "0", "2"]) == 0
    assert (tmp_path / "s" / "view_0_2.f32").read_bytes() == (tmp_path / "o" / "recon" / "view_0_2.f32").read_bytes()
    assert main(["simulate", str(tmp_path / "o"), "--out", str(tmp_path / "s"), "--view", "5", "0"]) == 2
    assert main(["simulate", str(tmp_path / "nothing"), "--out", str(tmp_path / "s")]) == 4


def test_simulate_peripheral_pupil_fades_for_single_source(tmp_path):
    # q defaults to 3 so the simulated spectrum reaches the peripheral pupil
    cfg = write_cfg(tmp_path / "c.json", baseline="I", system={"n_slm": 16})
    assert main(["optimize", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    _, sc, _ = load_solution(tmp_path / "o")
    edge = sc.layout.pupils[sc.layout.index(1, 2)]
    out = tmp_path / "s"
    assert main(["simulate", str(tmp_path / "o"), "--out", str(out)]) == 0
    assert main(["simulate", str(tmp_path / "o"), "--out", str(out), "--pupil",
                 str(edge.center[0]), "0", str(edge.radius / 2)]) == 0
    centre = np.fromfile(out / "view_1_1.f32", dtype="<f4").astype(float) ** 2
    side = np.fromfile(out / "pupil.f32", dtype="<f4").astype(float) ** 2
    assert side.mean() < 0.05 * centre.mean()


def test_simulate_focal_sweep_finds_each_layer(tmp_path):
    n, p, lam = 64, 10.8e-6, 450e-9
    grid = GridSpec.square(n, p, lam)
    z_near, z_far = 2e-3, 6e-3
    field = np.zeros(grid.shape, complex)
    for depth, cols in ((z_near, (8, 20)), (z_far, (40, 52))):
        layer = np.zeros(grid.shape)
        for r in (12, 32, 50):
            for c in cols:
                layer[r, c] = 1.0
        back = make_kernel(grid, -depth, cache=False).values
        field += ifft2c(fft2c(layer) * back)
    cfg = SystemConfig(grid, HdoModel(1), SourceArray((SourceSpec(),)), FourierMask("none"), 1, 0.0,
                       75e-3, PupilLayout(1, (PupilSpec((0.0, 0.0), 1.0, 75e-3),)), None)
    save_solution(tmp_path / "sol", Params(np.angle(field)[None]), cfg, "f64", 0)
    out = tmp_path / "sweep"
    assert main(["simulate", str(tmp_path / "sol"), "--out", str(out), "--z-sweep", "0", "8e-3", "17"]) == 0
    stack = json.loads((out / "focal_stack.json").read_text())
    zs = [s["z"] for s in stack]

    def sharpness(img):
        gy, gx = np.gradient(img)
        return float(np.sum(gx * gx + gy * gy))

    left, right = [], []
    for s in stack:
        img = np.fromfile(out / s["file"], dtype="<f4").reshape(grid.shape).astype(float) ** 2
        left.append(sharpness(img[:, :32]))
        right.append(sharpness(img[:, 32:]))
    assert zs[int(np.argmax(left))] == pytest.approx(z_near)
    assert zs[int(np.argmax(right))] == pytest.approx(z_far)


def test_render_target_round_trip(tmp_path):
    cfg = write_cfg(tmp_path / "c.json", scene={"demo": "rings"})
    assert main(["render-target", "--config", str(cfg), "--out", str(tmp_path / "t")]) == 0
    t = load_lightfield(tmp_path / "t")
    run = RunConfig.model_validate_json((tmp_path / "t" / "config_echo.json").read_text())
    sc = run.system_cfg()
    ref = render_lightfield(demo_scene("rings", sc.grid.shape), 3, sc.grid, sc.layout)
    assert t.views.tobytes() == ref.views.tobytes()


def test_analyze_etendue(tmp_path):
    p = tmp_path / "e.json"
    p.write_text(json.dumps({"n_x": 1000, "n_y": 1000, "pitch": 10.8e-6, "wavelength": 632.8e-9,
                             "g": 50e-3, "alpha": 1, "g_values": [0.2, 0.4, 0.8], "alphas": [1, 3]}))
    assert main(["analyze-etendue", "--config", str(p), "--out", str(tmp_path / "e")]) == 0
    summary = json.loads((tmp_path / "e" / "etendue.json").read_text())
    assert summary["etendue_m2sr"] == (632.8e-9) ** 2 * 1e6
    assert summary["eyebox_mm"] == pytest.approx(2.930, rel=1e-3)
    lines = (tmp_path / "e" / "tradeoff.csv").read_text().splitlines()
    assert lines[0] == "alpha,g_m,fov_x_deg,fov_y_deg,eyebox_mm,etendue_m2sr" and len(lines) == 7
    ets = {l.split(",")[-1] for l in lines[1:4]}
    assert len(ets) == 1
    assert main(["analyze-etendue", "--out", str(tmp_path / "d")]) == 0


def test_metrics_on_identical_dirs(tmp_path, capsys):
    cfg = write_cfg(tmp_path / "c.json")
    assert main(["render-target", "--config", str(cfg), "--out", str(tmp_path / "t")]) == 0
    assert main(["metrics", str(tmp_path / "t"), str(tmp_path / "t"), "--out", str(tmp_path / "m.csv")]) == 0
    rows = (tmp_path / "m.csv").read_text().strip().splitlines()[1:]
    assert len(rows) == 9
    for r in rows:
        f = r.split(",")
        assert f[-2] == "inf" and float(f[-1]) == 1.0
    assert "mean PSNR inf" in capsys.readouterr().out


def test_inputs_not_mutated(tmp_path):
    cfg = write_cfg(tmp_path / "c.json")
    before = cfg.read_bytes()
    assert main(["optimize", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    assert cfg.read_bytes() == before
    snap = raw_files(tmp_path / "o")
    assert main(["simulate", str(tmp_path / "o"), "--out", str(tmp_path / "s")]) == 0
    assert raw_files(tmp_path / "o") == snap

import csv
import io
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lfholo.analysis import (EtendueParams, TRADEOFF_COLUMNS, diffraction_half_angle, etendue_from_angle,
                             etendue_slm, fov_eyebox, incidence_angle_deg, paraxial_product, psnr, ssim,
                             to_display_intensity, tradeoff_table, write_tradeoff_csv)


def test_etendue_examples():
    assert etendue_slm(1000, 1000, 632.8e-9) == pytest.approx(4.004e-7, rel=1e-3)
    assert etendue_slm(1000, 1000, 632.8e-9) == (632.8e-9) ** 2 * 1e6
    assert etendue_slm(0, 1000, 632.8e-9) == 0
    assert etendue_slm(200, 300, 5e-7) * 4 == pytest.approx(etendue_slm(400, 600, 5e-7), rel=1e-15)


def test_etendue_from_diffraction_angle_matches_pixel_count():
    n, p, lam = 1000, 10.8e-6, 632.8e-9
    G = etendue_from_angle((n * p) ** 2, diffraction_half_angle(p, lam))
    assert G == pytest.approx(etendue_slm(n, n, lam), rel=1e-12)


def test_eyebox_examples():
    w1 = fov_eyebox(EtendueParams(1000, 1000, 10.8e-6, 632.8e-9, 50e-3, 1))[2]
    w3 = fov_eyebox(EtendueParams(1000, 1000, 10.8e-6, 632.8e-9, 50e-3, 3))[2]
    assert w1 == pytest.approx(2.930e-3, rel=1e-3)
    assert w3 == pytest.approx(8.79e-3, rel=1e-3)


def test_fov_formula():
    fx, fy, _ = fov_eyebox(EtendueParams(1280, 800, 8e-6, 520e-9, 50e-3))
    assert fx == 2 * math.atan(1280 * 8e-6 / 0.1)
    assert fy == 2 * math.atan(800 * 8e-6 / 0.1)


@pytest.mark.parametrize("alpha", [1, 3])
def test_paraxial_limit(alpha):
    n, p, lam = 1000, 10.8e-6, 632.8e-9
    for g in (0.2, 1.0, 10.0):
        prm = EtendueParams(n, n, p, lam, g, alpha)
        assert math.degrees(fov_eyebox(prm)[0]) < 5
        assert paraxial_product(prm) == pytest.approx(alpha ** 2 * lam ** 2 * n ** 2, rel=1e-3)


def test_tradeoff_sweep():
    base = EtendueParams(1000, 1000, 10.8e-6, 632.8e-9, 50e-3)
    gs = np.linspace(0.07, 0.5, 30)
    rows = tradeoff_table(base, gs, [1, 3])
    assert len(rows) == 60
    prods = {1: [], 3: []}
    for r in rows:
        if r["fov_x_deg"] < 10:
            prods[r["alpha"]].append(math.radians(r["fov_x_deg"]) * math.radians(r["fov_y_deg"])
                                     * (r["eyebox_mm"] * 1e-3) ** 2)
    for a in (1, 3):
        v = np.array(prods[a])
        assert v.size > 5 and (v.max() - v.min()) / v.max() < 0.01
        assert all(r["etendue_m2sr"] == a * a * etendue_slm(1000, 1000, 632.8e-9)
                   for r in rows if r["alpha"] == a)
    ratio = np.array(prods[3]) / np.array(prods[1])
    np.testing.assert_allclose(ratio, 9.0, rtol=1e-12)
    assert len(tradeoff_table(base, [0.1], [1])) == 1


def test_tradeoff_csv_schema(tmp_path):
    rows = tradeoff_table(EtendueParams(64, 64, 1e-5, 5e-7, 0.05), [0.05, 0.1], [1, 2])
    text = write_tradeoff_csv(rows, tmp_path / "t.csv")
    assert (tmp_path / "t.csv").read_text() == text
    parsed = list(csv.DictReader(io.StringIO(text)))
    assert tuple(parsed[0].keys()) == TRADEOFF_COLUMNS and len(parsed) == 4
    assert float(parsed[3]["g_m"]) == rows[3]["g_m"]


def test_prototype_incidence_angle():
    assert incidence_angle_deg(8.17e-3, 200e-3) == pytest.approx(2.34, abs=0.01)


# -- metrics -----------------------------------------------------------------

def test_psnr_examples(rng):
    a = rng.uniform(0, 0.9, (32, 32))
    assert psnr(a, a) == math.inf
    assert psnr(a, a + 0.1) == pytest.approx(20.0, abs=1e-9)
    b = rng.uniform(0, 1, (32, 32))
    assert psnr(a, b) == psnr(b, a)
    with pytest.raises(ValueError):
        psnr(a, a[:5])


def naive_ssim(a, b, L=1.0, sigma=1.5, radius=5):
    """Per-pixel Gaussian-window SSIM with symmetric padding; mean over the interior."""
    k = np.arange(-radius, radius + 1)
    g1 = np.exp(-k ** 2 / (2 * sigma ** 2))
    w = np.outer(g1, g1)
    w /= w.sum()
    C1, C2 = (0.01 * L) ** 2, (0.03 * L) ** 2
    pa, pb = np.pad(a, radius, mode="symmetric"), np.pad(b, radius, mode="symmetric")
    ny, nx = a.shape
    vals = []
    for y in range(radius, ny - radius):
        for x in range(radius, nx - radius):
            wa = pa[y:y + 2 * radius + 1, x:x + 2 * radius + 1]
            wb = pb[y:y + 2 * radius + 1, x:x + 2 * radius + 1]
            ma, mb = (w * wa).sum(), (w * wb).sum()
            va = (w * wa * wa).sum() - ma * ma
            vb = (w * wb * wb).sum() - mb * mb
            cov = (w * wa * wb).sum() - ma * mb
            vals.append(((2 * ma * mb + C1) * (2 * cov + C2)) / ((ma * ma + mb * mb + C1) * (va + vb + C2)))
    return float(np.mean(vals))


@pytest.mark.parametrize("seed", range(3))
def test_ssim_matches_naive_oracle(seed):
    r = np.random.default_rng(seed)
    a = r.uniform(0, 1, (24, 20))
    b = np.clip(a + r.normal(0, 0.2, a.shape), 0, 1)
    assert ssim(a, b) == pytest.approx(naive_ssim(a, b), abs=1e-9)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_ssim_properties(seed):
    r = np.random.default_rng(seed)
    a, b = r.uniform(0, 1, (16, 16)), r.uniform(0, 1, (16, 16))
    assert ssim(a, a) == pytest.approx(1.0, abs=1e-12)
    assert -1 <= ssim(a, b) <= 1
    assert ssim(a, b) == pytest.approx(ssim(b, a), abs=1e-12)


def test_display_intensity_normalization():
    t = np.array([[0.5, 1.0], [0.0, 0.25]])
    r = np.array([[2.0, 0.5], [0.0, 0.5]])
    ri, ti = to_display_intensity(r, t)
    np.testing.assert_allclose(ti, t ** 2)
    np.testing.assert_allclose(ri, [[1.0, 0.25], [0.0, 0.25]])
    with pytest.raises(ValueError):
        to_display_intensity(r, np.zeros((2, 2)))

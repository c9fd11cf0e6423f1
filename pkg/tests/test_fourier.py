import numpy as np
import pytest

from lfholo.field import GridSpec, center, fft2c, freq_coords
from lfholo.fourier import (BlockUpsampler, FourierMask, PupilLayout, PupilSpec, disk_mask,
                            eyebox_to_freq, mask_logit_grad, pupil_mask, realize_mask, sigmoid)

from conftest import inner


def test_eyebox_to_freq_examples():
    assert eyebox_to_freq(0.0, 75e-3, 632.8e-9) == 0.0
    p, g, lam = 10.8e-6, 50e-3, 632.8e-9
    assert eyebox_to_freq(g * lam / (2 * p), g, lam) == pytest.approx(1 / (2 * p), rel=1e-12)
    assert eyebox_to_freq(2e-3, 75e-3, 632.8e-9) == pytest.approx(4.214e4, rel=1e-3)


def test_pupil_mask_examples():
    g = GridSpec.square(32, 1e-6, 5e-7)
    big = PupilSpec((0, 0), radius=1.0, g=1.0)
    assert pupil_mask(big, g).all()
    # tiny pupil at the most negative frequency corner catches exactly one sample
    f0 = -0.5 / 1e-6
    lam, gg = 5e-7, 0.1
    corner = PupilSpec((f0 * lam * gg, f0 * lam * gg), radius=0.1 * lam * gg * (1 / 32e-6), g=gg)
    m = pupil_mask(corner, g)
    assert m.sum() == 1 and center(m)[0, 0] == 1
    with pytest.raises(ValueError):
        pupil_mask(PupilSpec((1.0, 1.0), 1e-9, 1.0), g)


def test_pupil_area_matches_disk():
    lam, gg, r = 632.8e-9, 75e-3, 2e-3
    rf = r / (lam * gg)
    assert rf == pytest.approx(4.214e4, rel=1e-3)
    n, pitch = 512, 1.5e-6
    g = GridSpec.square(n, pitch, lam)
    m = pupil_mask(PupilSpec((0, 0), r, gg), g)
    bin_area = g.df_x * g.df_y
    area = m.sum() * bin_area
    perimeter_bins = 2 * np.pi * rf / g.df_x
    assert abs(area - np.pi * rf ** 2) <= perimeter_bins * bin_area


def test_realize_modes():
    g = GridSpec.square(40, 1e-6, 5e-7)
    opt = FourierMask("optimizable_lowres", (8, 8))
    np.testing.assert_array_equal(realize_mask(opt, g, np.zeros((8, 8))), 0.5)
    ap = FourierMask("aperture", radius=0.25e6)
    np.testing.assert_array_equal(realize_mask(ap, g), pupil_mask(PupilSpec((0, 0), 0.25e6, 1.0), GridSpec.square(40, 1e-6, 1.0)))
    rnd = FourierMask("fixed_random", (8, 8), seed=42)
    a, b = realize_mask(rnd, g), realize_mask(rnd, g)
    np.testing.assert_array_equal(a, b)
    assert set(np.unique(a)) <= {0.0, 1.0}
    np.testing.assert_array_equal(realize_mask(FourierMask("none"), g), 1.0)


@pytest.mark.parametrize("n,blocks", [(40, 8), (192, 20), (30, 7)])
def test_blocks_are_piecewise_constant(n, blocks, rng):
    g = GridSpec.square(n, 1e-6, 5e-7)
    up = BlockUpsampler(g, (blocks, blocks))
    low = rng.random((blocks, blocks))
    full = center(up.up(low))
    ids = center(up.ids)
    for b in range(blocks * blocks):
        vals = full[ids == b]
        assert vals.size > 0 and np.all(vals == vals[0])
        assert vals[0] == low.ravel()[b]


def test_mask_bounded_and_commutes_with_pupil(rng):
    g = GridSpec.square(40, 1e-6, 5e-7)
    P = realize_mask(FourierMask("optimizable_lowres", (8, 8)), g, rng.standard_normal((8, 8)))
    M = pupil_mask(PupilSpec((0.1e6 * 5e-7, 0.0), 0.2e6 * 5e-7, 1.0), g)
    U = fft2c(rng.standard_normal((40, 40)) + 0j)
    assert np.all(np.abs(P * U) <= np.abs(U))
    np.testing.assert_array_equal(P * M, M * P)


def test_mask_multiply_adjoint_and_logit_gradient(rng):
    g = GridSpec.square(24, 1e-6, 5e-7)
    logits = rng.standard_normal((8, 8))
    P = realize_mask(FourierMask("optimizable_lowres", (8, 8)), g, logits)
    u = rng.standard_normal(g.shape) + 1j * rng.standard_normal(g.shape)
    v = rng.standard_normal(g.shape) + 1j * rng.standard_normal(g.shape)
    assert abs(inner(P * u, v) - inner(u, P * v)) < 1e-12 * abs(inner(u, v)) + 1e-12
    W = rng.standard_normal(g.shape)

    def f(lg):
        return float(np.sum(W * realize_mask(FourierMask("optimizable_lowres", (8, 8)), g, lg) ** 2))

    Pm = realize_mask(FourierMask("optimizable_lowres", (8, 8)), g, logits)
    grad = mask_logit_grad(2 * W * Pm, logits, g)
    h = 1e-5
    for idx in [(0, 0), (3, 5), (7, 7), (4, 1)]:
        e = np.zeros_like(logits)
        e[idx] = h
        fd = (f(logits + e) - f(logits - e)) / (2 * h)
        assert grad[idx] == pytest.approx(fd, rel=1e-5, abs=1e-9)


def test_layout_uniform():
    lay = PupilLayout.uniform(9, 9e-3, 75e-3, radius=2e-3)
    assert len(lay) == 81
    xs = sorted({p.center[0] for p in lay.pupils})
    np.testing.assert_allclose(np.diff(xs), 1e-3)
    assert lay.center_index() == 40 and lay.pupils[40].center == (0.0, 0.0)
    assert PupilLayout.from_dict(lay.to_dict()) == lay

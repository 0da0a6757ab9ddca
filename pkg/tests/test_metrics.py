import math

import numpy as np
import pytest

from rainstack.errors import DimensionMismatchError
from rainstack.metrics import MetricReport, evaluate_scene, mse, psnr, ssim
from rainstack.temporal import temporal_median
from rainstack.synth import RainSceneSpec, generate_scene

from oracles import mse_double_loop, ssim_direct

C1, C2 = 0.01 ** 2, 0.03 ** 2


def seeded_pair():
    rng = np.random.default_rng(2024)
    a = rng.random((32, 32, 3))
    return a, np.clip(a + rng.normal(0, 0.1, a.shape), 0, 1)


def test_psnr_identical_is_inf():
    a = np.random.default_rng(0).random((8, 8, 3))
    assert psnr(a, a) == math.inf


def test_psnr_uniform_shift_is_20db():
    a = np.random.default_rng(0).random((8, 8, 3)) * 0.9
    assert psnr(a, a + 0.1) == pytest.approx(20.0, abs=1e-9)
    assert mse(a, a + 0.1) == pytest.approx(0.01, abs=1e-15)


def test_psnr_matches_loop_oracle(rng):
    a, b = rng.random((8, 8, 3)), rng.random((8, 8, 3))
    assert abs(mse(a, b) - mse_double_loop(a, b)) <= 1e-12
    assert psnr(a, b) == pytest.approx(10 * math.log10(1 / mse_double_loop(a, b)), abs=1e-12)


def test_frozen_values_from_oracles():
    # Computed once with oracles.ssim_direct / mse_double_loop on this seeded pair.
    a, b = seeded_pair()
    assert ssim(a, b) == pytest.approx(0.9449415475883131, abs=1e-9)
    assert psnr(a, b) == pytest.approx(20.459402003827073, abs=1e-9)


def test_psnr_symmetric(rng):
    a, b = rng.random((8, 8, 3)), rng.random((8, 8, 3))
    assert psnr(a, b) == psnr(b, a)


def test_psnr_monotone_in_noise(rng):
    a = rng.random((16, 16, 3))
    noise = rng.uniform(-1, 1, a.shape)
    scores = [psnr(a, a + amp * noise) for amp in (0.01, 0.05, 0.2)]
    assert scores[0] > scores[1] > scores[2]


def test_shape_mismatch():
    with pytest.raises(DimensionMismatchError):
        psnr(np.zeros((4, 4, 3)), np.zeros((4, 5, 3)))
    with pytest.raises(DimensionMismatchError):
        ssim(np.zeros((12, 12, 3)), np.zeros((12, 13, 3)))


def test_ssim_self_is_one(rng):
    a = rng.random((20, 24, 3))
    assert abs(ssim(a, a) - 1.0) <= 1e-12


@pytest.mark.parametrize("c1,c2", [(0.2, 0.7), (0.5, 0.5), (0.0, 1.0)])
def test_ssim_constant_images(c1, c2):
    a, b = np.full((16, 16, 3), c1), np.full((16, 16, 3), c2)
    expected = (2 * c1 * c2 + C1) / (c1 ** 2 + c2 ** 2 + C1)
    assert ssim(a, b) == pytest.approx(expected, abs=1e-12)


def test_ssim_matches_direct_oracle(rng):
    for _ in range(3):
        a, b = rng.random((32, 32, 3)), rng.random((32, 32, 3))
        assert abs(ssim(a, b) - ssim_direct(a, b)) <= 1e-9


def test_ssim_symmetric(rng):
    a, b = rng.random((16, 16, 3)), rng.random((16, 16, 3))
    assert abs(ssim(a, b) - ssim(b, a)) <= 1e-12


def test_ssim_too_small():
    with pytest.raises(ValueError, match="11x11"):
        ssim(np.zeros((10, 20, 3)), np.zeros((10, 20, 3)))


def test_evaluate_scene_identical(rng):
    a = rng.random((16, 16, 3))
    rep = evaluate_scene(a, a)
    assert rep.psnr == math.inf and rep.mse == 0.0
    assert rep.ssim == pytest.approx(1.0, abs=1e-12)


def test_evaluate_scene_shift():
    a = np.random.default_rng(5).random((16, 16, 3)) * 0.9
    rep = evaluate_scene(a + 0.1, a)
    assert isinstance(rep, MetricReport)
    assert rep.psnr == pytest.approx(20.0, abs=1e-9)
    assert rep.mse == pytest.approx(0.01, abs=1e-15)


def test_evaluate_quantized_differs_only_slightly(rng):
    a, b = rng.random((16, 16, 3)), rng.random((16, 16, 3))
    exact, quant = evaluate_scene(a, b), evaluate_scene(a, b, quantized=True)
    assert exact.psnr != quant.psnr
    assert abs(exact.psnr - quant.psnr) < 0.1


def test_median_beats_every_rainy_frame():
    stack, clean = generate_scene(RainSceneSpec(seed=3))
    med_score = evaluate_scene(temporal_median(stack), clean).psnr
    assert all(med_score > evaluate_scene(f, clean).psnr for f in stack.frames)

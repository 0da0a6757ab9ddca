import math

import numpy as np
import pytest

from rainstack.errors import InfeasibleSpecError
from rainstack.scene_io import load_reference_library
from rainstack.synth import (
    RainSceneSpec,
    default_suite,
    degrade,
    generate_reference_library,
    generate_scene,
    generate_scene_with_strikes,
    rasterize_streak,
    simulate_restorer,
)
from rainstack.temporal import temporal_median


def test_no_rain_no_shift_frames_equal_clean():
    stack, clean = generate_scene(RainSceneSpec(rain_density=0.0))
    for frame in stack.frames:
        np.testing.assert_array_equal(frame, clean)


def test_no_rain_pure_offset():
    stack, clean = generate_scene(RainSceneSpec(rain_density=0.0, brightness_offset=0.1))
    np.testing.assert_array_equal(temporal_median(stack), np.clip(clean + 0.1, 0, 1))


def test_default_spec_median_is_degraded_background():
    spec = RainSceneSpec()
    assert (spec.height, spec.width, spec.T, spec.rain_density) == (64, 64, 31, 0.05)
    stack, clean = generate_scene(spec)
    assert np.any(stack.frames != clean)  # rain is actually present
    np.testing.assert_array_equal(temporal_median(stack), degrade(clean, spec))


@pytest.mark.parametrize("spec", default_suite(3, seed=4) + [RainSceneSpec(T=10, seed=2), RainSceneSpec(T=3, seed=5)])
def test_majority_guarantee(spec):
    stack, clean, strikes = generate_scene_with_strikes(spec)
    background = degrade(clean, spec)
    assert strikes.max() < math.ceil(spec.T / 2)
    # Independent count: frames in which a pixel departs from the background.
    touched = np.any(stack.frames != background[None], axis=-1).sum(axis=0)
    np.testing.assert_array_equal(touched, strikes)
    np.testing.assert_array_equal(temporal_median(stack), background)


def test_background_stays_in_range():
    for spec in default_suite(10, seed=1):
        _, clean = generate_scene(spec)
        bg = degrade(clean, spec)
        assert bg.min() >= 0.0 and bg.max() <= 1.0


def test_deterministic():
    spec = RainSceneSpec(seed=11)
    (a, ca), (b, cb) = generate_scene(spec), generate_scene(spec)
    np.testing.assert_array_equal(a.frames, b.frames)
    np.testing.assert_array_equal(ca, cb)
    other, _ = generate_scene(RainSceneSpec(seed=12))
    assert not np.array_equal(a.frames, other.frames)


@pytest.mark.parametrize("t", [1, 2])
def test_infeasible_small_t(t):
    with pytest.raises(InfeasibleSpecError):
        generate_scene(RainSceneSpec(T=t))
    generate_scene(RainSceneSpec(T=t, rain_density=0.0))


def test_infeasible_dense_rain():
    with pytest.raises(InfeasibleSpecError):
        generate_scene(RainSceneSpec(T=3, rain_density=0.4))
    generate_scene(RainSceneSpec(T=3, rain_density=0.3))


@pytest.mark.parametrize("bad", [dict(rain_density=0.5), dict(rain_density=-0.1), dict(streak_intensity=0.0),
                                 dict(T=0), dict(streak_length=0)])
def test_spec_validation(bad):
    with pytest.raises(ValueError):
        RainSceneSpec(**bad)


def test_rasterize_vertical_streak():
    idx = rasterize_streak(2, 5, math.pi / 2, 4, 10, 10)
    np.testing.assert_array_equal(idx, [25, 35, 45, 55])
    assert len(rasterize_streak(-20, 5, math.pi / 2, 4, 10, 10)) == 0


def test_simulated_restorer():
    spec = RainSceneSpec(seed=3, brightness_gain=0.8, restorer_noise=0.0)
    _, clean = generate_scene(spec)
    restored = simulate_restorer(clean, spec)
    assert restored.T == spec.T
    np.testing.assert_allclose(restored.frames[0], clean + 0.5 * (degrade(clean, spec) - clean), atol=1e-15)
    noisy = RainSceneSpec(seed=3, brightness_gain=0.8)
    np.testing.assert_array_equal(simulate_restorer(clean, noisy).frames, simulate_restorer(clean, noisy).frames)


def test_reference_library_round_trip(tmp_path):
    specs = [RainSceneSpec(seed=s, height=24 + s, width=20, T=9, scene_id=f"s{s}") for s in range(3)]
    generate_reference_library(specs, tmp_path)
    pairs = load_reference_library(tmp_path)
    assert [p.scene_id for p in pairs] == ["s0", "s1", "s2"]
    for spec, pair in zip(specs, pairs):
        assert pair.median_image.shape == (spec.height, spec.width, 3)
        _, clean = generate_scene(spec)
        np.testing.assert_allclose(pair.clean_image, clean, atol=0.5 / 65535 + 1e-12)


def test_empty_reference_library(tmp_path):
    generate_reference_library([], tmp_path / "lib")
    assert load_reference_library(tmp_path / "lib") == []


def test_default_suite_ranges():
    for spec in default_suite(20, seed=7):
        assert all(0.7 <= g <= 1.3 for g in spec.brightness_gain)
        assert all(-0.1 <= o <= 0.1 for o in spec.brightness_offset)
    assert [s.name for s in default_suite(2)] == ["scene_00", "scene_01"]

"""
Synthetic rainy scenes with known ground truth.

A scene is a smooth clean background, degraded by a per-channel affine
brightness change, observed ``T`` times with bright rain streaks at fresh
random positions in every frame. Streak placement keeps per-pixel strike
counts below ``ceil(T / 2)``, so the temporal median of the frames is the
degraded background exactly.

A crude stand-in for a single-image restorer is also provided: it removes
the rain, undoes part of the brightness degradation and adds a little
per-frame noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import InfeasibleSpecError
from .scene_io import ReferencePair, SceneStack, save_reference_pair, write_scene
from .temporal import temporal_median

CLEAN_RANGE = (0.15, 0.65)
MAX_STREAK_ATTEMPTS = 50


def _triple(v):
    arr = np.broadcast_to(np.asarray(v, dtype=np.float64), (3,)).copy()
    return tuple(float(a) for a in arr)


@dataclass(frozen=True)
class RainSceneSpec:
    height: int = 64
    width: int = 64
    T: int = 31
    rain_density: float = 0.05
    streak_length: int = 9
    streak_intensity: float = 0.5
    brightness_gain: tuple = (1.0, 1.0, 1.0)
    brightness_offset: tuple = (0.0, 0.0, 0.0)
    seed: int = 0
    # simulated restorer
    restorer_residual: float = 0.5
    restorer_noise: float = 0.01
    scene_id: str = field(default="", compare=False)

    def __post_init__(self):
        object.__setattr__(self, "brightness_gain", _triple(self.brightness_gain))
        object.__setattr__(self, "brightness_offset", _triple(self.brightness_offset))
        if self.height < 1 or self.width < 1 or self.T < 1:
            raise ValueError("height, width and T must be >= 1")
        if not 0.0 <= self.rain_density < 0.5:
            raise ValueError(f"rain_density must lie in [0, 0.5), got {self.rain_density}")
        if self.streak_length < 1:
            raise ValueError("streak_length must be >= 1")
        if not 0.0 < self.streak_intensity <= 1.0:
            raise ValueError("streak_intensity must lie in (0, 1]")

    @property
    def name(self) -> str:
        return self.scene_id or f"scene_{self.seed:04d}"

    @property
    def max_strikes(self) -> int:
        """Largest number of frames in which any single pixel may be struck."""
        return math.ceil(self.T / 2) - 1


def smooth_background(height, width, rng) -> np.ndarray:
    """Random low-order polynomial field per channel, rescaled into ``CLEAN_RANGE``."""
    y = np.linspace(-1.0, 1.0, height)[:, None]
    x = np.linspace(-1.0, 1.0, width)[None, :]
    lo, hi = CLEAN_RANGE
    channels = []
    for _ in range(3):
        a, b, c, d, e = rng.uniform(-1.0, 1.0, size=5)
        f = a * x + b * y + 0.3 * c * x * y + 0.15 * d * x * x + 0.15 * e * y * y
        f = np.broadcast_to(f, (height, width))
        span = f.max() - f.min()
        if span == 0:
            f = np.full((height, width), 0.5)
        else:
            f = (f - f.min()) / span
        channels.append(lo + (hi - lo) * f)
    return np.stack(channels, axis=-1)


def rasterize_streak(y0, x0, angle, length, height, width) -> np.ndarray:
    """Flat indices of the pixels covered by a straight segment, clipped to the image."""
    steps = max(2, int(math.ceil(2 * length)))
    t = np.linspace(0.0, length - 1, steps) if length > 1 else np.zeros(1)
    ys = np.rint(y0 + t * math.sin(angle)).astype(int)
    xs = np.rint(x0 + t * math.cos(angle)).astype(int)
    keep = (ys >= 0) & (ys < height) & (xs >= 0) & (xs < width)
    return np.unique(ys[keep] * width + xs[keep])


def _rain_layers(spec: RainSceneSpec, rng):
    """Per-frame additive rain layers and the per-pixel strike counts."""
    h, w = spec.height, spec.width
    strikes = np.zeros(h * w, dtype=np.int64)
    layers = np.zeros((spec.T, h * w))
    n_streaks = int(round(spec.rain_density * h * w / spec.streak_length))
    if n_streaks and spec.max_strikes < 1:
        raise InfeasibleSpecError(
            f"T={spec.T} leaves no room for rain: every pixel must stay clean in a strict majority of frames"
        )
    if spec.rain_density * spec.T > spec.max_strikes:
        raise InfeasibleSpecError(
            f"density {spec.rain_density} over T={spec.T} frames expects {spec.rain_density * spec.T:.2f} "
            f"strikes per pixel, more than the {spec.max_strikes} allowed"
        )

    for t in range(spec.T):
        hit = np.zeros(h * w, dtype=bool)
        for _ in range(n_streaks):
            for _attempt in range(MAX_STREAK_ATTEMPTS):
                y0 = rng.uniform(-spec.streak_length, h)
                x0 = rng.uniform(0, w)
                angle = math.radians(rng.uniform(70.0, 110.0))
                level = spec.streak_intensity * rng.uniform(0.6, 1.0)
                pix = rasterize_streak(y0, x0, angle, spec.streak_length, h, w)
                fresh = pix[~hit[pix]]
                if np.all(strikes[fresh] < spec.max_strikes):
                    break
            else:
                raise InfeasibleSpecError(
                    f"could not place a streak in frame {t} after {MAX_STREAK_ATTEMPTS} attempts; "
                    f"density {spec.rain_density} is too high for T={spec.T}"
                )
            strikes[fresh] += 1
            hit[pix] = True
            layers[t, pix] = np.maximum(layers[t, pix], level)
    return layers.reshape(spec.T, h, w, 1), strikes.reshape(h, w)


def degrade(clean, spec: RainSceneSpec) -> np.ndarray:
    """Rain-free degraded background ``gain * clean + offset``, not clamped."""
    return np.asarray(spec.brightness_gain) * clean + np.asarray(spec.brightness_offset)


def generate_scene_with_strikes(spec: RainSceneSpec):
    rng = np.random.default_rng(spec.seed)
    clean = smooth_background(spec.height, spec.width, rng)
    layers, strikes = _rain_layers(spec, rng)
    frames = np.clip(degrade(clean, spec)[None] + layers, 0.0, 1.0)
    return SceneStack(spec.name, frames), clean, strikes


def generate_scene(spec: RainSceneSpec):
    """Return ``(stack, clean)`` for ``spec``; bit-identical for equal specs."""
    stack, clean, _ = generate_scene_with_strikes(spec)
    return stack, clean


def simulate_restorer(clean, spec: RainSceneSpec) -> SceneStack:
    """
    Frames a decent single-image restorer might produce for this scene.

    Rain is fully removed, a fraction ``restorer_residual`` of the brightness
    degradation survives, and Gaussian noise of std ``restorer_noise`` is
    added independently per frame.
    """
    rng = np.random.default_rng([spec.seed, 1])
    partial = clean + spec.restorer_residual * (degrade(clean, spec) - clean)
    noise = rng.normal(0.0, spec.restorer_noise, size=(spec.T,) + clean.shape)
    return SceneStack(spec.name, np.clip(partial[None] + noise, 0.0, 1.0))


def reference_pair(spec: RainSceneSpec) -> ReferencePair:
    stack, clean = generate_scene(spec)
    return ReferencePair(spec.name, temporal_median(stack), clean)


def generate_reference_library(specs, directory, bit_depth: int = 16) -> None:
    """Write ``<dir>/<scene>/median.png`` and ``clean.png`` for every spec."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for spec in specs:
        save_reference_pair(reference_pair(spec), directory, bit_depth)


def write_dataset(specs, root, with_restored: bool = True, bit_depth: int = 16) -> list[Path]:
    """Generate every spec and write it in the standard dataset layout."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    out = []
    for spec in specs:
        stack, clean = generate_scene(spec)
        restored = simulate_restorer(clean, spec) if with_restored else None
        out.append(write_scene(root, stack, clean=clean, restored=restored, bit_depth=bit_depth))
    return out


def default_suite(n_scenes: int = 5, seed: int = 0, **overrides) -> list[RainSceneSpec]:
    """
    ``n_scenes`` specs with random per-channel degradations.

    Gains are drawn from ``[0.7, 1.3]`` and offsets from ``[-0.1, 0.1]``.
    """
    rng = np.random.default_rng(seed)
    specs = []
    for i in range(n_scenes):
        gain = rng.uniform(0.7, 1.3, size=3)
        offset = rng.uniform(-0.1, 0.1, size=3)
        spec = RainSceneSpec(brightness_gain=gain, brightness_offset=offset, seed=seed * 1000 + i,
                             scene_id=f"scene_{i:02d}")
        specs.append(replace(spec, **overrides) if overrides else spec)
    return specs

"""
Image decoding/encoding and dataset directory layout.

Images are plain ``float64`` numpy arrays of shape ``(H, W, 3)`` holding RGB
values in ``[0, 1]``. Quantization happens only inside :func:`save_image`;
every other stage works on real values.

Dataset layout::

    <root>/<scene_id>/rainy/*.png       rainy frames
    <root>/<scene_id>/restored/*.png    optional, externally restored frames
    <root>/<scene_id>/clean.png         optional ground truth

Reference library layout::

    <lib>/<scene_id>/median.png
    <lib>/<scene_id>/clean.png
"""

from __future__ import annotations

import logging
import os
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import png

from .errors import (
    DatasetLayoutError,
    DimensionMismatchError,
    EmptyStackError,
    ImageFormatError,
)

logger = logging.getLogger(__name__)

PNG_SUFFIX = ".png"


def as_image(data, name="image") -> np.ndarray:
    """Validate ``data`` as an ``(H, W, 3)`` image and return it as float64."""
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError(f"{name} must have shape (H, W, 3), got {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"{name} must be at least 1x1, got {arr.shape[:2]}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def check_same_shape(a: np.ndarray, b: np.ndarray, what="images") -> None:
    if a.shape != b.shape:
        raise DimensionMismatchError(f"{what} differ in shape: {a.shape} vs {b.shape}")


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr, dtype=np.float64)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class SceneStack:
    """Ordered frames of one static scene, stored as a ``(T, H, W, 3)`` array."""

    scene_id: str
    frames: np.ndarray

    def __post_init__(self):
        frames = np.asarray(self.frames, dtype=np.float64)
        if frames.ndim != 4 or frames.shape[-1] != 3:
            raise ValueError(f"frames must have shape (T, H, W, 3), got {frames.shape}")
        if frames.shape[0] < 1:
            raise EmptyStackError(f"scene {self.scene_id!r} has no frames")
        object.__setattr__(self, "frames", _frozen(frames))

    @classmethod
    def from_images(cls, scene_id, images):
        images = list(images)
        if not images:
            raise EmptyStackError(f"scene {scene_id!r} has no frames")
        first = images[0].shape
        for i, img in enumerate(images):
            if img.shape != first:
                raise DimensionMismatchError(
                    f"scene {scene_id!r}: frame {i} has shape {img.shape}, expected {first}"
                )
        return cls(scene_id, np.stack(images, axis=0))

    @property
    def T(self) -> int:
        return self.frames.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.frames.shape[1], self.frames.shape[2]

    def __len__(self):
        return self.T


@dataclass(frozen=True)
class ReferencePair:
    """A (median, clean) image pair searched by the patch matcher."""

    scene_id: str
    median_image: np.ndarray
    clean_image: np.ndarray

    def __post_init__(self):
        median = as_image(self.median_image, "median_image")
        clean = as_image(self.clean_image, "clean_image")
        if median.shape != clean.shape:
            raise DimensionMismatchError(
                f"reference {self.scene_id!r}: median {median.shape} vs clean {clean.shape}"
            )
        object.__setattr__(self, "median_image", _frozen(median))
        object.__setattr__(self, "clean_image", _frozen(clean))


@dataclass(frozen=True)
class SceneRecord:
    """Paths of one scene inside a dataset root. Nothing is decoded yet."""

    scene_id: str
    rainy_dir: Path
    restored_dir: Path | None = None
    clean_path: Path | None = None


# ---------------------------------------------------------------------------
# single images
# ---------------------------------------------------------------------------

def load_image(path) -> np.ndarray:
    """
    Decode a PNG file into an ``(H, W, 3)`` float image in ``[0, 1]``.

    Integer sample ``v`` at bit depth ``d`` maps to ``v / (2**d - 1)``.
    Greyscale is replicated to three channels; an alpha channel is dropped
    with a warning. Palette images are expanded.
    """
    path = Path(path)
    if path.suffix.lower() != PNG_SUFFIX:
        raise ImageFormatError(f"{path}: unsupported format {path.suffix!r} (PNG only)")
    with open(path, "rb") as fh:
        payload = fh.read()
    try:
        width, height, rows, info = png.Reader(bytes=payload).asDirect()
        bitdepth = info["bitdepth"]
        planes = info["planes"]
        raw = np.vstack([np.asarray(row, dtype=np.uint32) for row in rows])
    except png.Error as exc:
        raise ImageFormatError(f"{path}: {exc}") from exc

    raw = raw.reshape(height, width, planes)
    if info.get("alpha"):
        warnings.warn(f"{path}: dropping alpha channel", stacklevel=2)
        raw = raw[..., :-1]
    if info.get("greyscale"):
        raw = np.repeat(raw[..., :1], 3, axis=2)
    if raw.shape[2] != 3:
        raise ImageFormatError(f"{path}: expected 3 colour channels, got {raw.shape[2]}")
    return raw.astype(np.float64) / float(2 ** bitdepth - 1)


def quantize(img: np.ndarray, bit_depth: int = 8) -> np.ndarray:
    """Round-half-up quantization to unsigned integers, clamped to the depth's range."""
    if bit_depth not in (8, 16):
        raise ValueError(f"bit_depth must be 8 or 16, got {bit_depth}")
    top = 2 ** bit_depth - 1
    q = np.floor(np.asarray(img, dtype=np.float64) * top + 0.5)
    q = np.clip(q, 0, top)
    return q.astype(np.uint8 if bit_depth == 8 else np.uint16)


def dequantize(q: np.ndarray, bit_depth: int = 8) -> np.ndarray:
    return q.astype(np.float64) / float(2 ** bit_depth - 1)


def save_image(img, path, bit_depth: int = 8) -> None:
    img = as_image(img)
    q = quantize(img, bit_depth)
    height, width, _ = q.shape
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    writer = png.Writer(width, height, greyscale=False, alpha=False, bitdepth=bit_depth)
    with open(path, "wb") as fh:
        writer.write(fh, q.reshape(height, width * 3))


# ---------------------------------------------------------------------------
# directories
# ---------------------------------------------------------------------------

def list_frames(directory) -> list[Path]:
    """PNG files in ``directory`` in plain lexicographic filename order."""
    directory = Path(directory)
    names = sorted(n for n in os.listdir(directory) if n.lower().endswith(PNG_SUFFIX))
    return [directory / n for n in names]


def load_scene(directory, scene_id: str | None = None) -> SceneStack:
    directory = Path(directory)
    if scene_id is None:
        scene_id = directory.name
    paths = list_frames(directory)
    if not paths:
        raise EmptyStackError(f"{directory}: no PNG frames")

    frames = []
    for p in paths:
        img = load_image(p)
        if frames and img.shape != frames[0].shape:
            raise DimensionMismatchError(
                f"{p}: frame shape {img.shape[:2]} differs from {paths[0].name} "
                f"shape {frames[0].shape[:2]}"
            )
        frames.append(img)
    return SceneStack(scene_id, np.stack(frames, axis=0))


def load_reference_library(directory) -> list[ReferencePair]:
    directory = Path(directory)
    pairs = []
    for sub in sorted(p for p in directory.iterdir() if p.is_dir()):
        median_path, clean_path = sub / "median.png", sub / "clean.png"
        for required in (median_path, clean_path):
            if not required.is_file():
                raise DatasetLayoutError(f"reference scene {sub.name!r}: missing {required.name}")
        median, clean = load_image(median_path), load_image(clean_path)
        if median.shape != clean.shape:
            raise DimensionMismatchError(
                f"reference scene {sub.name!r}: median {median.shape[:2]} vs clean {clean.shape[:2]}"
            )
        pairs.append(ReferencePair(sub.name, median, clean))
    return pairs


def save_reference_pair(pair: ReferencePair, directory, bit_depth: int = 16) -> Path:
    target = Path(directory) / pair.scene_id
    save_image(pair.median_image, target / "median.png", bit_depth)
    save_image(pair.clean_image, target / "clean.png", bit_depth)
    return target


def discover_scenes(root) -> list[SceneRecord]:
    """Enumerate scenes under a dataset root; a scene is any subdirectory with ``rainy/``."""
    root = Path(root)
    if not root.is_dir():
        raise DatasetLayoutError(f"{root}: dataset root is not a directory")
    records = []
    for sub in sorted(p for p in root.iterdir() if p.is_dir()):
        rainy = sub / "rainy"
        if not rainy.is_dir():
            logger.debug("skipping %s: no rainy/ directory", sub)
            continue
        restored = sub / "restored"
        clean = sub / "clean.png"
        records.append(
            SceneRecord(
                scene_id=sub.name,
                rainy_dir=rainy,
                restored_dir=restored if restored.is_dir() else None,
                clean_path=clean if clean.is_file() else None,
            )
        )
    return records


def write_scene(root, stack: SceneStack, clean=None, restored: SceneStack | None = None,
                bit_depth: int = 16) -> Path:
    """Write one scene in the dataset layout. Frame files are ``f000.png, f001.png, ...``."""
    scene_dir = Path(root) / stack.scene_id
    width = max(3, len(str(stack.T - 1)))
    for t, frame in enumerate(stack.frames):
        save_image(frame, scene_dir / "rainy" / f"f{t:0{width}d}.png", bit_depth)
    if restored is not None:
        if restored.T != stack.T:
            raise DimensionMismatchError("restored stack must have as many frames as the rainy stack")
        for t, frame in enumerate(restored.frames):
            save_image(frame, scene_dir / "restored" / f"f{t:0{width}d}.png", bit_depth)
    if clean is not None:
        save_image(clean, scene_dir / "clean.png", bit_depth)
    return scene_dir

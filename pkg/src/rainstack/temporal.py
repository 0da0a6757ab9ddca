"""Per-pixel reductions along the time axis of a scene."""

import numpy as np

from .errors import EmptyStackError
from .scene_io import SceneStack


def _frames(stack) -> np.ndarray:
    frames = stack.frames if isinstance(stack, SceneStack) else np.asarray(stack, dtype=np.float64)
    if frames.ndim != 4 or frames.shape[0] == 0:
        raise EmptyStackError("temporal reduction needs at least one frame")
    return frames


def temporal_median(stack) -> np.ndarray:
    """
    Marginal median over frames, independently per pixel and channel.

    For an even frame count the result is the midpoint of the two central
    order statistics. Transient rain that touches a pixel in fewer than half
    of the frames therefore leaves the background value.
    """
    return np.median(_frames(stack), axis=0)


def temporal_mean(stack) -> np.ndarray:
    """Arithmetic mean over frames. Not clamped."""
    return _frames(stack).mean(axis=0)

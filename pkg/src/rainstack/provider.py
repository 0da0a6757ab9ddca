"""
Sources of per-frame restored images.

The single-image restoration network is not part of this package; its
outputs are consumed from disk (``from_directory``) or replaced by the rainy
frames themselves (``identity``).
"""

from enum import Enum
from pathlib import Path

from .errors import DimensionMismatchError, FrameCountMismatchError
from .scene_io import SceneStack, load_scene


class ProviderKind(str, Enum):
    IDENTITY = "identity"
    FROM_DIRECTORY = "from_directory"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        return cls(str(value).replace("-", "_"))


def provide_restored(stack: SceneStack, kind=ProviderKind.IDENTITY, restored_dir=None) -> SceneStack:
    kind = ProviderKind.parse(kind)
    if kind is ProviderKind.IDENTITY:
        return stack

    if restored_dir is None:
        raise ValueError("from_directory provider needs a restored-frames directory")
    restored = load_scene(Path(restored_dir), scene_id=stack.scene_id)
    if restored.T != stack.T:
        raise FrameCountMismatchError(
            f"scene {stack.scene_id!r}: {restored.T} restored frames for {stack.T} rainy frames"
        )
    if restored.shape != stack.shape:
        raise DimensionMismatchError(
            f"scene {stack.scene_id!r}: restored frames are {restored.shape}, rainy frames {stack.shape}"
        )
    return restored

"""Compositing viewer: receives slab textures, assembles images, steers the axis."""

from corridor.viewer.scene import SceneGraph, ViewState
from corridor.viewer.compositor import artifact_error, composite_layers, composite_scene

__all__ = ["SceneGraph", "ViewState", "artifact_error", "composite_layers", "composite_scene"]

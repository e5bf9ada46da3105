"""Parallel slab renderer: loaders, payloads, timing model, run engines."""

from corridor.backend.payload import FeedbackMessage, FrameHeader, LightPayload
from corridor.backend.timing import TimingModel, predict

__all__ = ["FeedbackMessage", "FrameHeader", "LightPayload", "TimingModel", "predict"]

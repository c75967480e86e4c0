"""Synthetic corpus construction: event simulation, blur and exposure decomposition."""

from .corpus import TrainingSample, build_corpus, load_corpus, load_sample, read_manifest
from .exposure import (BLUR_WINDOW, ExposureStack, blur_linear, decompose_exposure,
                       exposure_stack, synthesize_blur)
from .scenes import SharpSequence, toy_sequence
from .simulator import luminance, simulate_events, simulate_log_events

__all__ = [
    "BLUR_WINDOW", "ExposureStack", "SharpSequence", "TrainingSample", "blur_linear",
    "build_corpus", "decompose_exposure", "exposure_stack", "load_corpus", "load_sample",
    "luminance", "read_manifest", "simulate_events", "simulate_log_events", "synthesize_blur",
    "toy_sequence",
]

"""Exposure decomposition of HDR radiance and frame-averaging blur."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import EXPOSURES, GAINS
from ..errors import InvalidInputError

BLUR_WINDOW = 13


@dataclass(frozen=True)
class ExposureStack:
    s_minus2: np.ndarray
    s_plus0: np.ndarray
    s_plus2: np.ndarray
    n_ev: tuple = field(default=(1.0, 4.0, 16.0))

    def __post_init__(self):
        if not (self.s_minus2.shape == self.s_plus0.shape == self.s_plus2.shape):
            raise InvalidInputError("stack images differ in shape")
        if tuple(self.n_ev) != (1.0, 4.0, 16.0):
            raise InvalidInputError("n_ev is fixed to (1, 4, 16)")
        for img in self.images:
            if img.size and (img.min() < 0 or img.max() > 1):
                raise InvalidInputError("stack images must lie in [0, 1]")

    @property
    def images(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return (self.s_minus2, self.s_plus0, self.s_plus2)

    def as_array(self) -> np.ndarray:
        """``(3, ...)`` array ordered EV-2, EV+0, EV+2."""
        return np.stack(self.images)


def apply_crf(ldr: np.ndarray, crf: str = "linear", gamma: float = 2.2) -> np.ndarray:
    if crf == "linear":
        return ldr
    if crf == "gamma":
        return ldr ** (1.0 / gamma)
    raise InvalidInputError(f"unknown crf {crf!r}")


def decompose_exposure(hdr: np.ndarray, ev: int, crf: str = "linear", gamma: float = 2.2) -> np.ndarray:
    """LDR rendering of linear radiance at exposure ``ev``: ``clip(hdr * n_ev, 0, 1)``."""
    if ev not in GAINS:
        raise InvalidInputError(f"unknown exposure tag {ev}")
    hdr = np.asarray(hdr, dtype=np.float64)
    if hdr.size and hdr.min() < 0:
        raise InvalidInputError("negative radiance")
    return apply_crf(np.clip(hdr * GAINS[ev], 0.0, 1.0), crf, gamma)


def exposure_stack(hdr: np.ndarray, crf: str = "linear", gamma: float = 2.2) -> ExposureStack:
    return ExposureStack(*(decompose_exposure(hdr, ev, crf, gamma) for ev in EXPOSURES))


def blur_linear(frames) -> np.ndarray:
    """Pixel-wise mean of exactly 13 non-negative linear frames."""
    frames = np.asarray(frames, dtype=np.float64)
    if len(frames) != BLUR_WINDOW:
        raise InvalidInputError(f"blur window needs {BLUR_WINDOW} frames, got {len(frames)}")
    if frames.size and frames.min() < 0:
        raise InvalidInputError("negative radiance in blur window")
    return frames.mean(axis=0)


def synthesize_blur(frames, crf: str = "linear", gamma: float = 2.2) -> np.ndarray:
    """Blurry LDR frame: linear mean of the window rendered at EV+0."""
    return decompose_exposure(blur_linear(frames), 0, crf, gamma)

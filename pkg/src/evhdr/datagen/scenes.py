"""Procedural HDR scenes under camera (and object) motion.

Stand-in source material for the synthetic corpus when no sharp HDR video is
at hand. Scenes are analytic, so sub-pixel motion renders without resampling.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import InvalidInputError


@dataclass
class SharpSequence:
    frames: np.ndarray  # (T, h, w, 3) linear radiance
    timestamps: np.ndarray  # seconds, uniform spacing
    kind: str = "static"
    name: str = field(default="")

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.float64)
        self.timestamps = np.asarray(self.timestamps, dtype=np.float64)
        if self.frames.ndim != 4 or self.frames.shape[-1] != 3:
            raise InvalidInputError(f"frames must be (T, h, w, 3), got {self.frames.shape}")
        if len(self.timestamps) != len(self.frames):
            raise InvalidInputError("one timestamp per frame required")
        if len(self.timestamps) > 1 and np.any(np.diff(self.timestamps) <= 0):
            raise InvalidInputError("timestamps must increase strictly")
        if self.frames.size and self.frames.min() < 0:
            raise InvalidInputError("negative radiance in sequence")

    @classmethod
    def from_frames(cls, frames, framerate: float, kind: str = "static", name: str = ""):
        frames = np.asarray(frames)
        return cls(frames, np.arange(len(frames)) / framerate, kind, name)

    def __len__(self) -> int:
        return len(self.frames)


def _soft_step(d, width=0.75):
    return 0.5 * (1.0 + np.tanh(d / width))


class ToyScene:
    """Textured background plus soft-edged blobs, some of them far above EV+0 clipping."""

    def __init__(self, rng: np.random.Generator, n_shapes: int = 5):
        self.bg_level = rng.uniform(0.015, 0.05)
        self.bg_tint = rng.uniform(0.7, 1.3, size=3)
        self.freqs = rng.uniform(0.05, 0.25, size=(3, 2)) * rng.choice([-1, 1], size=(3, 2))
        self.phases = rng.uniform(0, 2 * np.pi, size=3)
        self.shapes = []
        for i in range(n_shapes):
            # first shape always bright enough to saturate the blurry frame
            level = rng.uniform(0.4, 0.95) if i == 0 else np.exp(rng.uniform(np.log(0.03), np.log(0.95)))
            self.shapes.append({
                "cx": rng.uniform(-8, 72), "cy": rng.uniform(-8, 72),
                "rx": rng.uniform(5, 14), "ry": rng.uniform(5, 14),
                "disc": bool(rng.integers(0, 2)),
                "color": level * rng.uniform(0.75, 1.0, size=3),
            })

    def render_background(self, u, v):
        tex = np.ones_like(u)
        for (fu, fv), ph in zip(self.freqs, self.phases):
            tex = tex + 0.3 * np.sin(fu * u + fv * v + ph)
        return self.bg_level * np.clip(tex, 0.1, None)[..., None] * self.bg_tint

    @staticmethod
    def shape_mask(shape, u, v):
        du, dv = (u - shape["cx"]) / shape["rx"], (v - shape["cy"]) / shape["ry"]
        if shape["disc"]:
            d = (1.0 - np.sqrt(du ** 2 + dv ** 2)) * min(shape["rx"], shape["ry"])
        else:
            d = (1.0 - np.maximum(np.abs(du), np.abs(dv))) * min(shape["rx"], shape["ry"])
        return _soft_step(d)

    def render(self, u, v, object_shift=None):
        img = self.render_background(u, v)
        for i, shape in enumerate(self.shapes):
            su, sv = u, v
            if object_shift is not None and i == len(self.shapes) - 1:
                su, sv = u - object_shift[0], v - object_shift[1]
            a = self.shape_mask(shape, su, sv)[..., None]
            img = img * (1 - a) + a * shape["color"]
        return img


def toy_sequence(rng: np.random.Generator, n_frames: int = 13, size: int = 64,
                 dynamic: bool = False, framerate: float = 150.0, max_speed: float = 0.8) -> SharpSequence:
    """Render ``n_frames`` of a random scene under constant camera translation.

    With ``dynamic`` the last shape also moves independently of the camera.
    """
    scene = ToyScene(rng)
    speed = rng.uniform(0.3, max_speed)
    angle = rng.uniform(0, 2 * np.pi)
    vel = speed * np.array([np.cos(angle), np.sin(angle)])
    obj_vel = rng.uniform(-1.5, 1.5, size=2) if dynamic else None
    vv, uu = np.mgrid[0:size, 0:size].astype(np.float64) + 0.5
    frames = []
    for k in range(n_frames):
        off = vel * (k - (n_frames - 1) / 2)
        shift = None if obj_vel is None else obj_vel * (k - (n_frames - 1) / 2)
        frames.append(scene.render(uu + off[0], vv + off[1], shift))
    return SharpSequence.from_frames(np.stack(frames), framerate, "dynamic" if dynamic else "static")

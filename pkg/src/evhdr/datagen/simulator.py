"""Contrast-threshold event simulation on linearly interpolated log intensity."""

from __future__ import annotations

import numpy as np

from ..config import SimulatorConfig
from ..errors import ConfigError, InvalidInputError
from ..events import EventStream

REC601 = np.array([0.299, 0.587, 0.114])

# relative slack when a level is reached exactly (e.g. a drop of exactly 2C)
_LEVEL_TOL = 1e-9


def luminance(frames: np.ndarray) -> np.ndarray:
    """Rec.601 weighted sum over the trailing RGB axis."""
    return np.asarray(frames, dtype=np.float64) @ REC601


def log_intensity(frames: np.ndarray, log_eps: float) -> np.ndarray:
    return np.log(np.maximum(luminance(frames), log_eps))


def simulate_log_events(log_frames: np.ndarray, timestamps: np.ndarray, threshold: float,
                        refractory: float = 0.0) -> EventStream:
    """Emit events from a ``(T, h, w)`` stack of log intensities.

    Between consecutive samples the log intensity is a straight line. Each pixel
    keeps a reference level (initially its first sample); whenever the line
    reaches ``ref +/- threshold`` an event of matching polarity fires at the
    exact interpolated time and the reference moves to the crossed level.
    """
    log_frames = np.asarray(log_frames, dtype=np.float64)
    timestamps = np.asarray(timestamps, dtype=np.float64)
    if threshold <= 0:
        raise ConfigError("contrast threshold must be > 0")
    if log_frames.ndim != 3 or len(log_frames) < 2:
        raise InvalidInputError("need at least 2 frames of shape (h, w)")
    if len(timestamps) != len(log_frames) or np.any(np.diff(timestamps) <= 0):
        raise InvalidInputError("timestamps must match frames and increase strictly")

    _, h, w = log_frames.shape
    ref = log_frames[0].reshape(-1).copy()
    xs, ys, ts, ps = [], [], [], []
    tol = _LEVEL_TOL * threshold
    for k in range(len(log_frames) - 1):
        a = log_frames[k].reshape(-1)
        b = log_frames[k + 1].reshape(-1)
        slope = b - a
        up = slope > 0
        down = slope < 0
        n = np.zeros(a.shape, dtype=np.int64)
        n[up] = np.floor((b[up] - ref[up]) / threshold + tol).astype(np.int64)
        n[down] = np.floor((ref[down] - b[down]) / threshold + tol).astype(np.int64)
        n = np.maximum(n, 0)
        total = int(n.sum())
        if total:
            pix = np.repeat(np.arange(a.size), n)
            # j = 1..n[pix] for every emitting pixel
            starts = np.cumsum(n) - n
            j = np.arange(total) - np.repeat(starts, n) + 1
            sign = np.where(up[pix], 1.0, -1.0)
            level = ref[pix] + sign * j * threshold
            frac = (level - a[pix]) / slope[pix]
            frac = np.clip(frac, 0.0, 1.0)
            dt = timestamps[k + 1] - timestamps[k]
            ts.append(timestamps[k] + frac * dt)
            xs.append(pix % w)
            ys.append(pix // w)
            ps.append(sign.astype(np.int8))
            moved = n > 0
            step = np.where(up, 1.0, -1.0)
            ref[moved] = ref[moved] + step[moved] * n[moved] * threshold

    span = (float(timestamps[0]), float(timestamps[-1]))
    if not ts:
        return EventStream.empty((h, w), span)
    x = np.concatenate(xs)
    y = np.concatenate(ys)
    t = np.concatenate(ts)
    p = np.concatenate(ps)
    order = np.lexsort((x, y, t))
    ev = EventStream(x[order], y[order], t[order], p[order], (h, w), span)
    if refractory > 0:
        ev = apply_refractory(ev, refractory)
    return ev


def apply_refractory(ev: EventStream, period: float) -> EventStream:
    """Drop events that follow the previous kept event at the same pixel by < ``period``."""
    keep = np.ones(len(ev), dtype=bool)
    last: dict[tuple[int, int], float] = {}
    for i in range(len(ev)):
        key = (int(ev.x[i]), int(ev.y[i]))
        prev = last.get(key)
        if prev is not None and ev.t[i] - prev < period:
            keep[i] = False
        else:
            last[key] = float(ev.t[i])
    return ev.select(keep)


def simulate_events(frames: np.ndarray, timestamps: np.ndarray, cfg: SimulatorConfig) -> EventStream:
    """Events for a sequence of linear RGB frames ``(T, h, w, 3)``."""
    cfg.validate()
    frames = np.asarray(frames)
    if frames.ndim != 4 or frames.shape[0] < 2:
        raise InvalidInputError("need at least 2 frames shaped (T, h, w, 3)")
    return simulate_log_events(log_intensity(frames, cfg.log_eps), timestamps,
                               cfg.contrast_threshold, cfg.refractory)

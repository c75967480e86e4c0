"""Event streams and their network-facing representations."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, InvalidInputError


@dataclass(frozen=True)
class EventStream:
    """Polarity events ``(x, y, t, p)`` on an ``h x w`` sensor over ``span``.

    Arrays are stored column-wise. ``x`` is the pixel column, ``y`` the row,
    ``t`` in seconds and ``p`` in {+1, -1}.
    """

    x: np.ndarray
    y: np.ndarray
    t: np.ndarray
    p: np.ndarray
    resolution: tuple[int, int]
    span: tuple[float, float]

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=np.int64))
        object.__setattr__(self, "y", np.asarray(self.y, dtype=np.int64))
        object.__setattr__(self, "t", np.asarray(self.t, dtype=np.float64))
        object.__setattr__(self, "p", np.asarray(self.p, dtype=np.int8))
        object.__setattr__(self, "span", (float(self.span[0]), float(self.span[1])))
        object.__setattr__(self, "resolution", (int(self.resolution[0]), int(self.resolution[1])))
        n = len(self.t)
        if not (len(self.x) == len(self.y) == len(self.p) == n):
            raise InvalidInputError("event columns differ in length")
        h, w = self.resolution
        t0, t1 = self.span
        if t1 < t0:
            raise InvalidInputError(f"span end {t1} precedes start {t0}")
        if n:
            if self.x.min() < 0 or self.x.max() >= w or self.y.min() < 0 or self.y.max() >= h:
                raise InvalidInputError("event coordinates outside the sensor")
            if not np.all(np.abs(self.p) == 1):
                raise InvalidInputError("polarity must be +1 or -1")
            if self.t.min() < t0 or self.t.max() > t1:
                raise InvalidInputError("event timestamps outside the stream span")

    def __len__(self) -> int:
        return len(self.t)

    @classmethod
    def empty(cls, resolution, span) -> "EventStream":
        z = np.zeros(0)
        return cls(z, z, z, z, resolution, span)

    def select(self, mask: np.ndarray, span=None) -> "EventStream":
        return EventStream(self.x[mask], self.y[mask], self.t[mask], self.p[mask],
                           self.resolution, self.span if span is None else span)

    def sorted(self) -> "EventStream":
        order = np.argsort(self.t, kind="stable")
        return self.select(order)

    def shifted(self, dt: float) -> "EventStream":
        """Same events with every timestamp (and the span) offset by ``dt``."""
        return EventStream(self.x, self.y, self.t + dt, self.p, self.resolution,
                           (self.span[0] + dt, self.span[1] + dt))

    def crop(self, top: int, left: int, h: int, w: int) -> "EventStream":
        keep = (self.y >= top) & (self.y < top + h) & (self.x >= left) & (self.x < left + w)
        return EventStream(self.x[keep] - left, self.y[keep] - top, self.t[keep], self.p[keep],
                           (h, w), self.span)


@dataclass(frozen=True)
class EventVoxelGrid:
    grid: np.ndarray  # (2m, h, w); positive group first
    m: int
    span: tuple[float, float]

    @property
    def positive(self) -> np.ndarray:
        return self.grid[: self.m]

    @property
    def negative(self) -> np.ndarray:
        return self.grid[self.m:]


def _deposit(grid: np.ndarray, ev: EventStream, m: int, tstar: np.ndarray) -> None:
    h, w = ev.resolution
    lo = np.floor(tstar).astype(np.int64)
    lo = np.clip(lo, 0, m - 1)
    frac = tstar - lo
    hi = np.minimum(lo + 1, m - 1)
    # events landing exactly on the last bin center put all mass there
    frac = np.where(hi == lo, 0.0, frac)
    channel_offset = np.where(ev.p > 0, 0, m)
    flat = grid.reshape(-1)
    pix = ev.y * w + ev.x
    np.add.at(flat, (channel_offset + lo) * h * w + pix, 1.0 - frac)
    np.add.at(flat, (channel_offset + hi) * h * w + pix, frac)


def voxelize(ev: EventStream, m: int, span: tuple[float, float] | None = None,
             dtype=np.float64) -> EventVoxelGrid:
    """Bin events into a ``(2m, h, w)`` polarity-separated voxel grid.

    Every event deposits unit mass split linearly between the two temporal
    bins nearest to ``t* = (m - 1)(t - t0) / (t1 - t0)``. Positive events fill
    channels ``[0, m)``, negative ones ``[m, 2m)``.
    """
    if m < 1:
        raise ConfigError(f"bin count must be >= 1, got {m}")
    t0, t1 = ev.span if span is None else span
    if not t1 > t0:
        raise ConfigError(f"degenerate voxel span [{t0}, {t1}]")
    if len(ev) and (ev.t.min() < t0 or ev.t.max() > t1):
        raise InvalidInputError("events outside the voxel span")
    h, w = ev.resolution
    grid = np.zeros((2 * m, h, w), dtype=np.float64)
    if len(ev):
        tstar = (m - 1) * (ev.t - t0) / (t1 - t0)
        _deposit(grid, ev, m, tstar)
    return EventVoxelGrid(grid.astype(dtype), m, (float(t0), float(t1)))


def split_at(ev: EventStream, t: float) -> tuple[EventStream, EventStream]:
    """Partition ``ev`` into events with ``t_i <= t`` and events with ``t_i > t``."""
    t0, t1 = ev.span
    if not t0 <= t <= t1:
        raise InvalidInputError(f"split time {t} outside span [{t0}, {t1}]")
    left = ev.t <= t
    return ev.select(left, (t0, t)), ev.select(~left, (t, t1))


def voxelize_split(ev: EventStream, t: float, m: int, dtype=np.float64):
    """Voxel grids of the left/right halves of ``ev`` around instant ``t``.

    A half with a zero-length span cannot be binned in time; its events (all
    sitting exactly at ``t``) go to the bin adjacent to ``t``.
    """
    left, right = split_at(ev, t)
    grids = []
    for half, edge_bin in ((left, m - 1), (right, 0)):
        a, b = half.span
        if b > a:
            grids.append(voxelize(half, m, dtype=dtype))
            continue
        h, w = half.resolution
        grid = np.zeros((2 * m, h, w), dtype=np.float64)
        if len(half):
            _deposit(grid, half, m, np.full(len(half), float(edge_bin)))
        grids.append(EventVoxelGrid(grid.astype(dtype), m, (a, b)))
    return grids[0], grids[1]

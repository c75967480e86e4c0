"""Materialize and load on-disk training corpora.

Layout of a corpus directory::

    manifest.json          # [{"path": "00000", "split": "train", "kind": "static"}, ...]
    00000/blur.png         # blurry LDR frame (EV+0)
    00000/events.bin       # events over the blur window, times relative to its start
    00000/obs.png          # one sharp LDR observation
    00000/obs.meta         # observation timestamp, exposure tag, window span, scene kind
    00000/gt_hdr.pfm       # sharp radiance at the observation time (synthetic only)
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .. import EXPOSURES, io
from ..config import SimulatorConfig
from ..errors import InvalidInputError
from ..events import EventStream
from .exposure import BLUR_WINDOW, decompose_exposure, synthesize_blur
from .scenes import SharpSequence
from .simulator import simulate_events

log = logging.getLogger(__name__)


@dataclass
class TrainingSample:
    blurry_ldr: np.ndarray  # (h, w, 3) in [0, 1]
    events: EventStream  # span is the exposure window
    obs_time: float
    obs_image: np.ndarray
    obs_ev: int
    eval_hdr: np.ndarray | None = None
    kind: str = "static"
    name: str = ""

    def __post_init__(self):
        t0, t1 = self.events.span
        if not t0 <= self.obs_time <= t1:
            raise InvalidInputError("observation time outside the event span")
        if self.obs_ev not in EXPOSURES:
            raise InvalidInputError(f"unknown exposure tag {self.obs_ev}")


def make_samples(seq: SharpSequence, cfg: SimulatorConfig, seed: int, first_index: int = 0,
                 stride: int = 1):
    """Yield one :class:`TrainingSample` per sliding 13-frame window of ``seq``."""
    if len(seq) < BLUR_WINDOW:
        raise InvalidInputError(f"sequence has {len(seq)} frames, need >= {BLUR_WINDOW}")
    events = simulate_events(seq.frames, seq.timestamps, cfg)
    index = first_index
    for start in range(0, len(seq) - BLUR_WINDOW + 1, stride):
        stop = start + BLUR_WINDOW
        t0, t1 = float(seq.timestamps[start]), float(seq.timestamps[stop - 1])
        window = events.select((events.t >= t0) & (events.t <= t1), (t0, t1)).shifted(-t0)
        rng = np.random.default_rng([seed, index])
        k = int(rng.integers(0, BLUR_WINDOW))
        ev = EXPOSURES[index % 3]
        hdr = seq.frames[start + k]
        yield TrainingSample(
            blurry_ldr=synthesize_blur(seq.frames[start:stop], cfg.crf, cfg.gamma),
            events=window,
            obs_time=float(seq.timestamps[start + k]) - t0,
            obs_image=decompose_exposure(hdr, ev, cfg.crf, cfg.gamma),
            obs_ev=ev,
            eval_hdr=hdr,
            kind=seq.kind,
        )
        index += 1


def save_sample(directory: Path, sample: TrainingSample) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    io.write_png(directory / "blur.png", sample.blurry_ldr)
    io.write_events(directory / "events.bin", sample.events)
    io.write_png(directory / "obs.png", sample.obs_image)
    io.write_meta(directory / "obs.meta", sample.obs_time, sample.obs_ev, sample.events.span, sample.kind)
    if sample.eval_hdr is not None:
        io.write_pfm(directory / "gt_hdr.pfm", sample.eval_hdr)


def load_sample(directory) -> TrainingSample:
    directory = Path(directory)
    try:
        meta = io.read_meta(directory / "obs.meta")
        gt = directory / "gt_hdr.pfm"
        return TrainingSample(
            blurry_ldr=io.read_png(directory / "blur.png"),
            events=io.read_events(directory / "events.bin", meta["span"]),
            obs_time=meta["timestamp"],
            obs_image=io.read_png(directory / "obs.png"),
            obs_ev=meta["ev"],
            eval_hdr=io.read_pfm(gt) if gt.exists() else None,
            kind=meta["kind"],
            name=directory.name,
        )
    except FileNotFoundError as exc:
        raise InvalidInputError(f"incomplete sample directory {directory}: {exc.filename}") from exc


def build_corpus(seqs: list[SharpSequence], cfg: SimulatorConfig, out, seed: int,
                 stride: int = 1, splits: list[str] | None = None) -> list[dict]:
    """Write every sliding-window sample of ``seqs`` under ``out`` and return the manifest.

    Observation exposures cycle -2, +0, +2 over the global sample index; the
    observation frame inside each window is drawn from a generator seeded by
    ``(seed, sample index)`` so results do not depend on processing order.
    ``splits`` tags each sequence (default "train").
    """
    if not seqs:
        raise InvalidInputError("no input sequences")
    cfg.validate()
    if splits is None:
        splits = ["train"] * len(seqs)
    if len(splits) != len(seqs):
        raise InvalidInputError("one split tag per sequence required")
    for seq in seqs:
        if len(seq) < BLUR_WINDOW:
            raise InvalidInputError(f"sequence has {len(seq)} frames, need >= {BLUR_WINDOW}")
    out = Path(out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise InvalidInputError(f"cannot create output directory {out}: {exc}") from exc

    manifest = []
    for seq, split in zip(seqs, splits):
        for sample in make_samples(seq, cfg, seed, first_index=len(manifest), stride=stride):
            name = f"{len(manifest):05d}"
            save_sample(out / name, sample)
            manifest.append({"path": name, "split": split, "kind": sample.kind,
                             "events": len(sample.events)})
    write_manifest(out / "manifest.json", manifest)
    log.info("wrote %d samples to %s", len(manifest), out)
    return manifest


def write_manifest(path, manifest: list[dict]) -> None:
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def read_manifest(path) -> list[dict]:
    path = Path(path)
    try:
        entries = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidInputError(f"cannot read manifest {path}: {exc}") from exc
    if not isinstance(entries, list):
        raise InvalidInputError("manifest must be a JSON list")
    for e in entries:
        e["dir"] = str(path.parent / e["path"])
    return entries


def load_corpus(manifest_path, split: str | None = None, kinds=None) -> list[TrainingSample]:
    samples = []
    for e in read_manifest(manifest_path):
        if split is not None and e.get("split") != split:
            continue
        if kinds is not None and e.get("kind") not in kinds:
            continue
        samples.append(load_sample(e["dir"]))
    return samples

"""Command line entry point: ``evhdr synth|train|infer|eval``.

Exit codes: 0 success, 1 runtime failure, 2 configuration or input error.
Configuration files are JSON; ``--set section.key=value`` overrides win over
the file, which wins over built-in defaults.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import io
from .config import load_config
from .errors import ConfigError, InvalidInputError

log = logging.getLogger("evhdr")

FRAME_SUFFIXES = (".png", ".pfm")
EXTERNAL_NOTE = "external: not computed"


def _add_config_args(p):
    p.add_argument("--config", type=Path, help="JSON config file (sections sim, model, loss, train, tonemap)")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config value, e.g. --set loss.l4=0 (repeatable)")


def _config(args):
    cfg = load_config(args.config, args.overrides)
    if getattr(args, "seed", None) is not None:
        cfg.train.seed = args.seed
    return cfg


# synth ----------------------------------------------------------------------

def _read_frame_dir(path: Path, framerate: float | None, default_rate: float, kind: str):
    from .datagen import SharpSequence

    if not path.is_dir():
        raise InvalidInputError(f"{path}: not a directory")
    files = sorted(p for p in path.iterdir() if p.suffix.lower() in FRAME_SUFFIXES)
    if not files:
        raise InvalidInputError(f"{path}: no PNG or PFM frames")
    rate_file = path / "framerate.txt"
    if framerate is None and rate_file.exists():
        try:
            framerate = float(rate_file.read_text().split()[0])
        except (ValueError, IndexError) as exc:
            raise InvalidInputError(f"{rate_file}: expected a number") from exc
    frames = [io.read_pfm(f) if f.suffix.lower() == ".pfm" else io.read_png(f) for f in files]
    if any(f.ndim != 3 or f.shape != frames[0].shape for f in frames):
        raise InvalidInputError(f"{path}: frames must share one HxWx3 shape")
    rate = framerate if framerate is not None else default_rate
    if not rate > 0:
        raise InvalidInputError(f"{path}: frame rate must be > 0, got {rate}")
    return SharpSequence.from_frames(np.stack(frames).astype(np.float64), rate, kind, name=path.name)


def cmd_synth(args) -> int:
    from .datagen import build_corpus, toy_sequence

    cfg = _config(args)
    seqs = []
    if args.toy:
        rng = np.random.default_rng(args.seed or 0)
        for i in range(args.toy):
            dynamic = args.dynamic_every > 0 and i % args.dynamic_every == args.dynamic_every - 1
            seqs.append(toy_sequence(rng, args.toy_frames, args.toy_size, dynamic=dynamic,
                                     framerate=cfg.sim.framerate))
    for d in args.inputs:
        seqs.append(_read_frame_dir(Path(d), args.framerate, cfg.sim.framerate, args.kind))
    if not seqs:
        raise InvalidInputError("no input sequences (give frame directories or --toy N)")
    manifest = build_corpus(seqs, cfg.sim, args.out, seed=args.seed or 0, stride=args.stride)
    counts = np.array([m["events"] for m in manifest])
    print(f"{len(manifest)} samples written to {args.out}")
    print(f"events: total {counts.sum()}, per sample mean {counts.mean():.1f} "
          f"min {counts.min()} max {counts.max()}")
    return 0


# train ----------------------------------------------------------------------

def cmd_train(args) -> int:
    from .datagen import load_corpus
    from .train import load_checkpoint, pretrain_stage, train_full

    cfg = _config(args)
    if args.stage:
        cfg.train.stage = args.stage
    if not Path(args.manifest).is_file():
        raise InvalidInputError(f"manifest not found: {args.manifest}")
    stage = cfg.train.stage
    kinds = {"static"} if stage == "pretrain" else None
    samples = load_corpus(args.manifest, split=args.split, kinds=kinds)
    if not samples:
        raise InvalidInputError(f"no {'static ' if kinds else ''}samples in split {args.split!r}")
    resume = load_checkpoint(args.resume) if args.resume else None
    if stage == "pretrain":
        ckpt = pretrain_stage(samples, cfg, args.out, resume=resume)
    else:
        if not args.init:
            raise InvalidInputError("--stage full needs --init CHECKPOINT")
        ckpt = train_full(samples, load_checkpoint(args.init), cfg, args.out, resume=resume)
    summary = {"stage": stage, "samples": len(samples), "epoch": ckpt["epoch"], "step": ckpt["step"],
               "checkpoint": str(Path(args.out) / f"{stage}_last.pt")}
    print(json.dumps(summary, sort_keys=True))
    return 0


# infer ----------------------------------------------------------------------

def reinhard_preview(hdr: np.ndarray, key: float = 0.18, eps: float = 1e-6) -> np.ndarray:
    """Global Reinhard operator ``L / (1 + L)`` on luminance scaled to a log-average of ``key``."""
    lum = hdr @ np.array([0.2126, 0.7152, 0.0722])
    scaled = key / np.exp(np.mean(np.log(lum + eps))) * lum
    ratio = (scaled / (1.0 + scaled)) / np.maximum(lum, eps)
    return np.clip(hdr * ratio[..., None], 0.0, 1.0)


def cmd_infer(args) -> int:
    from .datagen import load_sample
    from .train import infer_sequence, load_checkpoint

    if not Path(args.checkpoint).is_file():
        raise InvalidInputError(f"checkpoint not found: {args.checkpoint}")
    if not Path(args.sample).is_dir():
        raise InvalidInputError(f"sample directory not found: {args.sample}")
    ckpt = load_checkpoint(args.checkpoint)
    frames = infer_sequence(ckpt, load_sample(args.sample), args.k)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for i, frame in enumerate(frames):
        io.write_pfm(out / f"frame_{i:03d}.pfm", frame)
        io.write_png(out / f"frame_{i:03d}.png", reinhard_preview(frame.astype(np.float64)))
    print(f"{len(frames)} frames written to {out}")
    return 0


# eval -----------------------------------------------------------------------

def cmd_eval(args) -> int:
    from . import metrics

    cfg = _config(args)
    pred_dir = Path(args.pred)
    if not pred_dir.is_dir():
        raise InvalidInputError(f"prediction directory not found: {pred_dir}")
    preds = {p.stem: p for p in pred_dir.glob("*.pfm")}
    if not preds:
        raise InvalidInputError(f"{pred_dir}: no PFM predictions")
    refs = None
    if args.ref:
        ref_dir = Path(args.ref)
        if not ref_dir.is_dir():
            raise InvalidInputError(f"reference directory not found: {ref_dir}")
        refs = {p.stem: p for p in ref_dir.glob("*.pfm")}
        orphans = sorted(set(preds) ^ set(refs))
        if orphans:
            raise InvalidInputError("unmatched files: " + ", ".join(orphans))

    columns = ["sample_id", "psnr_mu", "ssim_mu", "ag", "sf"] if refs else ["sample_id", "ag", "sf"]
    rows = []
    for name in sorted(preds):
        pred = io.read_pfm(preds[name]).astype(np.float64)
        row = {"sample_id": name}
        if refs:
            ref = io.read_pfm(refs[name]).astype(np.float64)
            row["psnr_mu"] = metrics.psnr_mu(pred, ref, cfg.tonemap)
            row["ssim_mu"] = metrics.ssim_mu(pred, ref, cfg.tonemap)
        tm = metrics.mu_tonemap(pred, cfg.tonemap)
        row["ag"] = metrics.average_gradient(tm)
        row["sf"] = metrics.spatial_frequency(tm)
        rows.append(row)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "metrics.csv", "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=columns)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
    summary = {
        "count": len(rows),
        "mean": {c: float(np.mean([r[c] for r in rows])) for c in columns[1:]},
        "tonemap": {"mu": cfg.tonemap.mu, "normalize": cfg.tonemap.normalize},
        "external": {name: EXTERNAL_NOTE for name in metrics.EXTERNAL_METRICS},
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    print(json.dumps(summary["mean"], sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="evhdr", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="build a training corpus from sharp frame sequences")
    p.add_argument("inputs", nargs="*", help="directories of PNG/PFM frames (sorted by name)")
    p.add_argument("--out", required=True, type=Path, help="corpus output directory")
    p.add_argument("--framerate", type=float,
                   help="frames per second (default: framerate.txt in each directory, else sim.framerate)")
    p.add_argument("--kind", choices=("static", "dynamic"), default="static",
                   help="scene tag for the frame directories (pretraining uses static ones only)")
    p.add_argument("--stride", type=int, default=1, help="window stride in frames")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--toy", type=int, default=0, metavar="N", help="add N procedurally generated sequences")
    p.add_argument("--toy-frames", type=int, default=14)
    p.add_argument("--toy-size", type=int, default=64)
    p.add_argument("--dynamic-every", type=int, default=2, metavar="K",
                   help="every K-th toy sequence has an independently moving object (0: none)")
    _add_config_args(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="run the pretraining or full training stage")
    p.add_argument("--manifest", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path, help="checkpoint and log directory")
    p.add_argument("--stage", choices=("pretrain", "full"))
    p.add_argument("--init", type=Path, help="pretrained checkpoint (required for --stage full)")
    p.add_argument("--resume", type=Path, help="checkpoint of this stage to continue from")
    p.add_argument("--split", default="train", help="manifest split to train on")
    p.add_argument("--seed", type=int)
    _add_config_args(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("infer", help="reconstruct an HDR sequence from one sample")
    p.add_argument("--checkpoint", required=True, type=Path)
    p.add_argument("--sample", required=True, type=Path, help="sample directory inside a corpus")
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("-k", type=int, default=11, help="number of frames across the exposure window")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("eval", help="score PFM predictions, optionally against references")
    p.add_argument("--pred", required=True, type=Path)
    p.add_argument("--ref", type=Path, help="reference PFM directory with matching file names")
    p.add_argument("--out", required=True, type=Path)
    _add_config_args(p)
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, InvalidInputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - reported as a runtime failure
        log.debug("runtime failure", exc_info=True)
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

"""Two-stage self-supervised training, checkpoints and sequence inference."""

from __future__ import annotations

import copy
import json
import logging
import pickle
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from . import metrics
from .config import Config, ModelConfig, TrainConfig
from .datagen.corpus import TrainingSample
from .errors import ConfigError, InvalidInputError
from .losses import ComboContext, total_loss
from .model import HdrFramework, sample_grids

log = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "evhdr-checkpoint-v1"


def lr_schedule(epoch: int, cfg: TrainConfig) -> float:
    """Constant ``lr0`` until ``decay_start_epoch``, then linear decay to zero at ``epochs``."""
    if not 0 <= epoch <= cfg.epochs:
        raise ConfigError(f"epoch {epoch} outside [0, {cfg.epochs}]")
    if epoch < cfg.decay_start_epoch:
        return cfg.lr0
    return cfg.lr0 * (cfg.epochs - epoch) / (cfg.epochs - cfg.decay_start_epoch)


def toy_config(**train_overrides) -> Config:
    """Desk-scale settings: narrow networks, 64 px crops, batch 4."""
    cfg = Config()
    cfg.model = ModelConfig(base_channels=16, growth=8, dense_layers=2, drd_blocks=2)
    cfg.train.crop = 64
    for k, v in train_overrides.items():
        setattr(cfg.train, k, v)
    return cfg.validate()


def _chw(img: np.ndarray) -> torch.Tensor:
    return torch.from_numpy(np.ascontiguousarray(np.asarray(img, np.float32).transpose(2, 0, 1)))


@dataclass
class SampleTensors:
    ldr: torch.Tensor
    grid: torch.Tensor
    grid_left: torch.Tensor
    grid_right: torch.Tensor
    obs: torch.Tensor
    ev: int
    eval_hdr: torch.Tensor | None

    @classmethod
    def from_sample(cls, sample: TrainingSample, bins: int) -> "SampleTensors":
        full, left, right = sample_grids(sample.events, sample.obs_time, bins)
        return cls(
            ldr=_chw(sample.blurry_ldr),
            grid=torch.from_numpy(full.grid.astype(np.float32)),
            grid_left=torch.from_numpy(left.grid.astype(np.float32)),
            grid_right=torch.from_numpy(right.grid.astype(np.float32)),
            obs=_chw(sample.obs_image),
            ev=sample.obs_ev,
            eval_hdr=None if sample.eval_hdr is None else _chw(sample.eval_hdr),
        )

    def crop(self, top, left, size):
        sl = (slice(None), slice(top, top + size), slice(left, left + size))
        return SampleTensors(self.ldr[sl], self.grid[sl], self.grid_left[sl], self.grid_right[sl],
                             self.obs[sl], self.ev,
                             None if self.eval_hdr is None else self.eval_hdr[sl])


def collate(items: list[SampleTensors]) -> dict:
    return {
        "ldr": torch.stack([s.ldr for s in items]),
        "grid": torch.stack([s.grid for s in items]),
        "grid_left": torch.stack([s.grid_left for s in items]),
        "grid_right": torch.stack([s.grid_right for s in items]),
        "obs": torch.stack([s.obs for s in items]),
        "ev": torch.tensor([s.ev for s in items]),
    }


def iterate_batches(data: list[SampleTensors], cfg: TrainConfig, epoch: int):
    """Seed-determined shuffled batches with random crops for one epoch."""
    rng = np.random.default_rng([cfg.seed, epoch])
    order = rng.permutation(len(data))
    for start in range(0, len(order), cfg.batch_size):
        items = []
        for i in order[start:start + cfg.batch_size]:
            s = data[i]
            h, w = s.ldr.shape[-2:]
            size = min(cfg.crop, h, w)
            top = int(rng.integers(0, h - size + 1))
            left = int(rng.integers(0, w - size + 1))
            items.append(s.crop(top, left, size))
        yield collate(items)


class Trainer:
    """Owns the networks, the combo context and both optimizers for one run."""

    def __init__(self, cfg: Config, init: dict | None = None):
        cfg.validate()
        self.cfg = cfg
        torch.manual_seed(cfg.train.seed)
        self.model = HdrFramework(cfg.model)
        self.ctx = ComboContext(cfg.loss)
        self.epoch = 0
        self.step = 0
        if init is not None:
            self.model.load_state_dict(init["model"])
            self.ctx.load_state_dict(init["ctx"])
        self.frozen_drc = cfg.train.stage == "full"
        if self.frozen_drc:
            self.model.drc.requires_grad_(False)
        gen_params = [p for p in self.model.parameters() if p.requires_grad]
        self.opt_g = torch.optim.Adam(gen_params, lr=cfg.train.lr0, betas=tuple(cfg.train.betas))
        self.opt_d = torch.optim.Adam(self.ctx.discriminator.parameters(),
                                      lr=cfg.train.lr0 * cfg.train.d_lr_scale, betas=tuple(cfg.train.betas))

    def set_lr(self, epoch):
        lr = lr_schedule(epoch, self.cfg.train)
        for group in self.opt_g.param_groups:
            group["lr"] = lr
        for group in self.opt_d.param_groups:
            group["lr"] = lr * self.cfg.train.d_lr_scale
        return lr

    def generator_step(self, batch) -> dict:
        self.model.train()
        self.ctx.pairs.clear()
        self.ctx.discriminator.requires_grad_(False)
        out = self.model(batch["ldr"], batch["grid"], batch["grid_left"], batch["grid_right"])
        total, breakdown = total_loss(out, batch["obs"], batch["ev"], self.cfg.loss, self.ctx)
        self.opt_g.zero_grad(set_to_none=True)
        total.backward()
        self.opt_g.step()
        return breakdown

    def discriminator_step(self) -> float | None:
        self.ctx.discriminator.requires_grad_(True)
        d_loss = self.ctx.discriminator_loss()
        self.ctx.pairs.clear()
        if d_loss is None:
            return None
        self.opt_d.zero_grad(set_to_none=True)
        d_loss.backward()
        self.opt_d.step()
        return float(d_loss.detach())

    def train_step(self, batch) -> dict:
        record = self.generator_step(batch)
        record["D"] = self.discriminator_step()
        self.step += 1
        return record

    def checkpoint(self) -> dict:
        return {
            "format": CHECKPOINT_FORMAT,
            "config": self.cfg.to_dict(),
            "model": copy.deepcopy(self.model.state_dict()),
            "ctx": copy.deepcopy(self.ctx.state_dict()),
            "opt_g": copy.deepcopy(self.opt_g.state_dict()),
            "opt_d": copy.deepcopy(self.opt_d.state_dict()),
            "epoch": self.epoch,
            "step": self.step,
            "stage": self.cfg.train.stage,
            "torch_rng": torch.get_rng_state(),
        }

    def resume(self, ckpt: dict) -> None:
        self.model.load_state_dict(ckpt["model"])
        self.ctx.load_state_dict(ckpt["ctx"])
        self.opt_g.load_state_dict(ckpt["opt_g"])
        self.opt_d.load_state_dict(ckpt["opt_d"])
        self.epoch = ckpt["epoch"]
        self.step = ckpt["step"]
        torch.set_rng_state(ckpt["torch_rng"])

    def fit(self, samples: list[TrainingSample], out_dir=None, log_path=None) -> dict:
        """Train until ``epochs`` (or ``max_steps``) and return the final checkpoint."""
        if not samples:
            raise InvalidInputError("empty training corpus")
        tcfg = self.cfg.train
        data = [SampleTensors.from_sample(s, self.cfg.model.bins) for s in samples]
        out_dir = Path(out_dir) if out_dir is not None else None
        if out_dir is not None:
            out_dir.mkdir(parents=True, exist_ok=True)
            if log_path is None:
                log_path = out_dir / "train_log.jsonl"
        log_file = open(log_path, "a") if log_path is not None else None
        try:
            while self.epoch < tcfg.epochs and not self._steps_done():
                lr = self.set_lr(self.epoch)
                for batch in iterate_batches(data, tcfg, self.epoch):
                    if self._steps_done():
                        break
                    record = self.train_step(batch)
                    record.update(step=self.step, epoch=self.epoch, lr=lr, stage=tcfg.stage)
                    if log_file is not None:
                        log_file.write(json.dumps(record, sort_keys=True) + "\n")
                self.epoch += 1
                if out_dir is not None and (self.epoch % tcfg.checkpoint_every == 0
                                            or self.epoch == tcfg.epochs or self._steps_done()):
                    save_checkpoint(self.checkpoint(), out_dir / f"ckpt_{tcfg.stage}_epoch{self.epoch:04d}.pt")
        finally:
            if log_file is not None:
                log_file.close()
        ckpt = self.checkpoint()
        if out_dir is not None:
            save_checkpoint(ckpt, out_dir / f"{tcfg.stage}_last.pt")
        return ckpt

    def _steps_done(self):
        return self.cfg.train.max_steps is not None and self.step >= self.cfg.train.max_steps


def pretrain_stage(samples: list[TrainingSample], cfg: Config, out_dir=None, resume: dict | None = None) -> dict:
    """Stage one: all networks trained jointly on static-scene samples."""
    if not samples:
        raise InvalidInputError("empty pretraining corpus")
    non_static = [s.name or i for i, s in enumerate(samples) if s.kind != "static"]
    if non_static:
        raise InvalidInputError(f"pretraining expects static samples, got dynamic: {non_static[:5]}")
    cfg = copy.deepcopy(cfg)
    cfg.train.stage = "pretrain"
    trainer = Trainer(cfg)
    if resume is not None:
        trainer.resume(resume)
    return trainer.fit(samples, out_dir)


def train_full(samples: list[TrainingSample], init: dict | None, cfg: Config, out_dir=None,
               resume: dict | None = None) -> dict:
    """Stage two: continue from ``init`` with the composition network frozen."""
    if init is None:
        raise InvalidInputError("full training needs an initial checkpoint from pretraining")
    _check_checkpoint(init)
    cfg = copy.deepcopy(cfg)
    cfg.train.stage = "full"
    trainer = Trainer(cfg, init=init)
    if resume is not None:
        trainer.resume(resume)
    return trainer.fit(samples, out_dir)


def save_checkpoint(ckpt: dict, path) -> None:
    torch.save(ckpt, path)


def _check_checkpoint(ckpt):
    if not isinstance(ckpt, dict) or ckpt.get("format") != CHECKPOINT_FORMAT:
        raise InvalidInputError("not an evhdr checkpoint")


def load_checkpoint(path) -> dict:
    try:
        ckpt = torch.load(path, map_location="cpu", weights_only=False)
    except (OSError, RuntimeError, EOFError, pickle.UnpicklingError) as exc:
        raise InvalidInputError(f"cannot read checkpoint {path}: {exc}") from exc
    _check_checkpoint(ckpt)
    return ckpt


def model_from_checkpoint(ckpt: dict) -> HdrFramework:
    _check_checkpoint(ckpt)
    cfg = Config.from_dict(ckpt["config"])
    model = HdrFramework(cfg.model)
    model.load_state_dict(ckpt["model"])
    return model.eval()


def infer_sequence(ckpt_or_model, sample: TrainingSample, k: int = 11) -> list[np.ndarray]:
    """``k`` HDR frames ``(h, w, 3)`` at uniformly spaced instants over the exposure span.

    A single frame is placed at the span midpoint.
    """
    if k < 1:
        raise InvalidInputError("k must be >= 1")
    model = ckpt_or_model if isinstance(ckpt_or_model, HdrFramework) else model_from_checkpoint(ckpt_or_model)
    model.eval()
    t0, t1 = sample.events.span
    times = [0.5 * (t0 + t1)] if k == 1 else np.linspace(t0, t1, k)
    frames = []
    with torch.no_grad():
        for t in times:
            hdr = model.ebl2sh.reconstruct(sample.blurry_ldr, sample.events, float(t))
            frames.append(hdr.numpy().transpose(1, 2, 0).astype(np.float32))
    return frames


def evaluate(model: HdrFramework, samples: list[TrainingSample], tm_cfg=None) -> dict:
    """PSNR-mu of the reconstruction at the observation instant versus ground truth.

    Also scores the blurry LDR frame taken as-is as an HDR estimate.
    """
    model.eval()
    pred_scores, base_scores = [], []
    with torch.no_grad():
        for s in samples:
            if s.eval_hdr is None:
                raise InvalidInputError("evaluation needs samples with ground-truth HDR")
            hdr = model.ebl2sh.reconstruct(s.blurry_ldr, s.events, s.obs_time).numpy().transpose(1, 2, 0)
            pred_scores.append(metrics.psnr_mu(hdr, s.eval_hdr, tm_cfg))
            base_scores.append(metrics.psnr_mu(s.blurry_ldr, s.eval_hdr, tm_cfg))
    return {"psnr_mu": float(np.mean(pred_scores)), "baseline_psnr_mu": float(np.mean(base_scores)),
            "per_sample": pred_scores, "baseline_per_sample": base_scores}

"""Main reconstruction network and the decomposition/composition assistance networks.

Tensors are batched ``(B, C, H, W)``. Exposure stacks are ``(B, 3, 3, H, W)``
with the exposure axis ordered EV-2, EV+0, EV+2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from .. import EXPOSURES, GAINS
from ..config import ModelConfig
from ..errors import InvalidInputError
from ..events import EventStream, voxelize, voxelize_split
from .blocks import MRFR, DenseFusion, EventTransform, ImageTransform, ResBlock, conv

GAIN_VECTOR = torch.tensor([GAINS[ev] for ev in EXPOSURES])


def _check_spatial(*tensors):
    shapes = {tuple(t.shape[-2:]) for t in tensors}
    if len(shapes) != 1:
        raise InvalidInputError(f"spatial shapes differ: {sorted(shapes)}")
    batches = {t.shape[0] for t in tensors}
    if len(batches) != 1:
        raise InvalidInputError(f"batch sizes differ: {sorted(batches)}")


@dataclass
class Eb2shOutputs:
    hdr_pred: torch.Tensor
    fused_features: torch.Tensor
    res_left: torch.Tensor
    res_right: torch.Tensor


class EBL2SH(nn.Module):
    """Blurry LDR frame + events -> sharp HDR frame at the split instant."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        cfg.validate()
        c, m = cfg.base_channels, cfg.bins
        self.cfg = cfg
        self.image_transform = ImageTransform(c)
        self.event_transform = EventTransform(2 * m, c, cfg.deformable, cfg.deformable_groups)
        self.fusion = DenseFusion(2 * c, c)
        # left and right branches are one module registered twice: one parameter set
        shared = EventTransform(2 * m, c, cfg.deformable, cfg.deformable_groups)
        self.event_transform_left = shared
        self.event_transform_right = shared
        self.mrfr = MRFR(c, cfg.growth, cfg.dense_layers, cfg.mrfr_kernel_sizes)
        self.out = nn.Sequential(conv(c, c), nn.LeakyReLU(0.2), conv(c, 3))
        nn.init.constant_(self.out[-1].bias, -3.0)

    def dre(self, ldr, grid):
        _check_spatial(ldr, grid)
        if grid.shape[1] != 2 * self.cfg.bins:
            raise InvalidInputError(f"expected {2 * self.cfg.bins} voxel channels, got {grid.shape[1]}")
        z = torch.cat([self.image_transform(ldr), self.event_transform(grid)], dim=1)
        return self.fusion(z)

    def residuals(self, fused, grid_left, grid_right):
        _check_spatial(fused, grid_left, grid_right)
        b = fused.shape[0]
        # both sides in one pass through the shared weights
        ev = self.event_transform_left(torch.cat([grid_left, grid_right], dim=0))
        r = self.mrfr(torch.cat([fused.repeat(2, 1, 1, 1), ev], dim=1))
        return r[:b], r[b:]

    def md(self, fused, grid_left, grid_right):
        r_left, r_right = self.residuals(fused, grid_left, grid_right)
        return F.softplus(self.out(fused + r_left + r_right)), r_left, r_right

    def forward(self, ldr, grid, grid_left, grid_right) -> Eb2shOutputs:
        fused = self.dre(ldr, grid)
        hdr, r_left, r_right = self.md(fused, grid_left, grid_right)
        return Eb2shOutputs(hdr, fused, r_left, r_right)

    def reconstruct(self, ldr: np.ndarray, events: EventStream, t: float) -> torch.Tensor:
        """Sharp HDR frame ``(3, h, w)`` at instant ``t`` from an ``(h, w, 3)`` LDR image."""
        full, left, right = sample_grids(events, t, self.cfg.bins)
        p = next(self.parameters())
        ldr_t = torch.as_tensor(np.ascontiguousarray(ldr.transpose(2, 0, 1)), dtype=p.dtype)[None]
        grids = [torch.as_tensor(g.grid, dtype=p.dtype)[None] for g in (full, left, right)]
        return self(ldr_t, *grids).hdr_pred[0]


def sample_grids(events: EventStream, t: float, m: int):
    """Full-window grid plus the left/right grids around ``t``."""
    t0, t1 = events.span
    if not t0 <= t <= t1:
        raise InvalidInputError(f"timestamp {t} outside exposure span [{t0}, {t1}]")
    full = voxelize(events, m)
    left, right = voxelize_split(events, t, m)
    return full, left, right


def ideal_logits(hdr, eps=1e-3):
    """Logits of the ideal linear exposure response ``clip(g * hdr)`` for every exposure."""
    gains = GAIN_VECTOR.to(hdr)
    s = (hdr.unsqueeze(1) * gains.view(1, 3, 1, 1, 1)).clamp(eps, 1 - eps)
    return torch.log(s) - torch.log1p(-s)


class DRD(nn.Module):
    """HDR frame -> EV-2/EV+0/EV+2 LDR stack.

    Residual blocks read the HDR frame; each exposure head predicts a logit
    correction added to the ideal exposure response before the sigmoid.
    """

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        c = cfg.base_channels
        self.features = nn.Sequential(conv(6, c), nn.LeakyReLU(0.2),
                                      *[ResBlock(c) for _ in range(cfg.drd_blocks)])
        self.heads = nn.ModuleList(conv(c, 3) for _ in EXPOSURES)
        for head in self.heads:
            nn.init.normal_(head.weight, std=1e-3)
            nn.init.zeros_(head.bias)

    def forward(self, hdr):
        x = torch.cat([hdr, torch.log(hdr + 1e-3)], dim=1)
        feat = self.features(x)
        corr = torch.stack([head(feat) for head in self.heads], dim=1)
        return torch.sigmoid(ideal_logits(hdr) + corr)


class DRC(nn.Module):
    """LDR stack -> HDR frame by spatial attention over exposure-normalized inputs.

    Each exposure has its own encoder and a one-channel attention logit map;
    a softmax across exposures gives per-pixel weights that merge both the
    features and the linearized images ``S_ev / n_ev``. A decoder on the merged
    features predicts a bounded log-gain applied to the merged radiance.
    """

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        c = cfg.base_channels
        self.encoders = nn.ModuleList(
            nn.Sequential(conv(6, c), nn.LeakyReLU(0.2), conv(c, c), nn.LeakyReLU(0.2))
            for _ in EXPOSURES
        )
        self.attention = nn.ModuleList(conv(c, 1) for _ in EXPOSURES)
        self.decoder = nn.Sequential(conv(c, c), nn.LeakyReLU(0.2), conv(c, 3))
        nn.init.normal_(self.decoder[-1].weight, std=1e-3)
        nn.init.zeros_(self.decoder[-1].bias)

    def forward(self, stack, return_attention=False):
        gains = GAIN_VECTOR.to(stack).view(1, 3, 1, 1, 1)
        linear = stack / gains
        feats, logits = [], []
        for i, (enc, att) in enumerate(zip(self.encoders, self.attention)):
            f = enc(torch.cat([stack[:, i], linear[:, i]], dim=1))
            feats.append(f)
            logits.append(att(f))
        weights = torch.softmax(torch.stack(logits, dim=1), dim=1)  # (B, 3, 1, H, W)
        merged = (weights * torch.stack(feats, dim=1)).sum(dim=1)
        radiance = (weights * linear).sum(dim=1)
        hdr = radiance * torch.exp(torch.tanh(self.decoder(merged)))
        if return_attention:
            return hdr, weights[:, :, 0]
        return hdr


class HdrFramework(nn.Module):
    """Main branch plus assistance branch, evaluated together for one batch."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        self.ebl2sh = EBL2SH(cfg)
        self.drd = DRD(cfg)
        self.drc = DRC(cfg)

    def forward(self, ldr, grid, grid_left, grid_right):
        main = self.ebl2sh(ldr, grid, grid_left, grid_right)
        stack = self.drd(main.hdr_pred)
        hdr_comp = self.drc(stack)
        return {"hdr_pred": main.hdr_pred, "stack": stack, "hdr_comp": hdr_comp, "main": main}

"""Self-supervised consistency losses and the analytic exposure-fusion reference.

Stacks are ``(B, 3, C, H, W)`` tensors ordered EV-2, EV+0, EV+2; exposure tags
per sample are integer tensors or sequences with values in {-2, 0, 2}.
"""

from __future__ import annotations

import math

import torch
import torch.nn as nn
import torch.nn.functional as F

from . import EXPOSURES, GAINS
from .config import LossWeights
from .errors import ConfigError, InvalidInputError

FUSION_EPS = 1e-6

# Lambda_ev of the well-exposedness weight: reject dark short exposures,
# both extremes at the mid exposure, bright long exposures
LAMBDA = {-2: lambda z: -z, 0: torch.abs, 2: lambda z: z}


def mu_law(x, mu=5000.0):
    return torch.log1p(mu * x) / math.log1p(mu)


class FeatureExtractor(nn.Module):
    """Frozen randomly initialized conv encoder used for the perceptual term.

    Weights come from a private generator so every context built with the same
    seed computes the same features regardless of the global RNG state.
    """

    def __init__(self, channels=(16, 32, 32), seed=1234):
        super().__init__()
        gen = torch.Generator().manual_seed(seed)
        layers, cin = [], 3
        for i, c in enumerate(channels):
            conv = nn.Conv2d(cin, c, 3, stride=1 if i == 0 else 2, padding=1)
            with torch.no_grad():
                bound = math.sqrt(6.0 / (cin * 9))
                conv.weight.copy_((torch.rand(conv.weight.shape, generator=gen) * 2 - 1) * bound)
                conv.bias.zero_()
            layers.append(conv)
            cin = c
        self.layers = nn.ModuleList(layers)
        self.requires_grad_(False)

    def forward(self, x):
        feats = []
        for conv in self.layers:
            x = F.relu(conv(x))
            feats.append(x)
        return feats


class PatchDiscriminator(nn.Module):
    """Least-squares patch critic on 3-channel images in roughly [0, 1]."""

    def __init__(self, c=16):
        super().__init__()
        self.net = nn.Sequential(
            nn.Conv2d(3, c, 4, 2, 1), nn.LeakyReLU(0.2),
            nn.Conv2d(c, 2 * c, 4, 2, 1), nn.LeakyReLU(0.2),
            nn.Conv2d(2 * c, 1, 3, 1, 1),
        )

    def forward(self, x):
        return self.net(x)


class ComboContext(nn.Module):
    """Frozen feature extractor, adversarial critic and the combo sub-weights.

    Each call of :func:`combo_distance` with a nonzero GAN weight records the
    (fake, real) pair it judged so the training loop can run the critic's
    own update afterwards.
    """

    def __init__(self, weights: LossWeights | None = None, seed=1234):
        super().__init__()
        self.weights = weights or LossWeights()
        self.feature_extractor = FeatureExtractor(seed=seed)
        self.discriminator = PatchDiscriminator()
        self.pairs: list[tuple[torch.Tensor, torch.Tensor]] = []

    def discriminator_loss(self):
        if not self.pairs:
            return None
        loss = 0.0
        for fake, real in self.pairs:
            loss = loss + ((self.discriminator(real) - 1) ** 2).mean() + (self.discriminator(fake) ** 2).mean()
        return loss / len(self.pairs)


def _check_pair(pred, target):
    if pred.shape != target.shape:
        raise InvalidInputError(f"shape mismatch {tuple(pred.shape)} vs {tuple(target.shape)}")
    if not (torch.isfinite(pred).all() and torch.isfinite(target).all()):
        raise InvalidInputError("non-finite input to combo distance")


def combo_distance(pred, target, ctx: ComboContext, hdr: bool = False):
    """Weighted L1 + perceptual + generator-side least-squares adversarial distance.

    With ``hdr`` the perceptual and adversarial terms see mu-law tone-mapped
    inputs; the L1 term always compares raw values.
    """
    _check_pair(pred, target)
    w = ctx.weights
    total = pred.new_zeros(())
    if w.w_l1:
        total = total + w.w_l1 * (pred - target).abs().mean()
    if not (w.w_perc or w.w_gan):
        return total
    p = mu_law(pred.clamp_min(0), w.mu) if hdr else pred
    q = mu_law(target.clamp_min(0), w.mu) if hdr else target
    if w.w_perc:
        fp, fq = ctx.feature_extractor(p), ctx.feature_extractor(q)
        total = total + w.w_perc * sum((a - b).abs().mean() for a, b in zip(fp, fq))
    if w.w_gan:
        total = total + w.w_gan * ((ctx.discriminator(p) - 1) ** 2).mean()
        ctx.pairs.append((p.detach(), q.detach()))
    return total


def _ev_index(ev, batch, device):
    ev = torch.as_tensor(ev, device=device).reshape(-1)
    if ev.numel() == 1 and batch > 1:
        ev = ev.expand(batch)
    lookup = {e: i for i, e in enumerate(EXPOSURES)}
    try:
        return torch.tensor([lookup[int(e)] for e in ev], device=device)
    except KeyError as exc:
        raise InvalidInputError(f"unknown exposure tag {exc.args[0]}") from None


def loss_hl(stack, obs, ev, ctx: ComboContext):
    """Distance between each observation and the stack element of its own exposure."""
    idx = _ev_index(ev, stack.shape[0], stack.device)
    matched = stack[torch.arange(stack.shape[0], device=stack.device), idx]
    return combo_distance(matched, obs, ctx)


def brightness_convert(img):
    """Raise exposure by two stops: ``clip(4 * img, 0, 1)``."""
    return (4.0 * img).clamp(0.0, 1.0)


def loss_ll(stack):
    s_m2, s_0, s_p2 = stack.unbind(dim=1)
    return (brightness_convert(s_m2) - s_0).abs().mean() + (brightness_convert(s_0) - s_p2).abs().mean()


def fusion_weights(img, ev):
    if ev not in LAMBDA:
        raise InvalidInputError(f"unknown exposure tag {ev}")
    return 1.0 - torch.clamp_min(LAMBDA[ev](2.0 * img - 1.0), 0.0)


def fuse_reference(stack, eps=FUSION_EPS):
    """Well-exposedness weighted mean of the exposure-normalized images ``S_ev / n_ev``."""
    num = torch.zeros_like(stack[:, 0])
    den = torch.zeros_like(stack[:, 0])
    for i, ev in enumerate(EXPOSURES):
        s = stack[:, i]
        phi = fusion_weights(s, ev)
        num = num + phi * s / GAINS[ev]
        den = den + phi
    return num / den.clamp_min(eps)


def loss_lh(fused_ref, hdr_comp, ctx: ComboContext):
    """Composed HDR vs the analytic fusion of the stack, which acts as a fixed target."""
    return combo_distance(hdr_comp, fused_ref.detach(), ctx, hdr=True)


def loss_hh(hdr_comp, hdr_pred, ctx: ComboContext):
    """Main-branch HDR vs the composed HDR, which acts as a fixed target."""
    return combo_distance(hdr_pred, hdr_comp.detach(), ctx, hdr=True)


TERMS = ("L_HL", "L_LL", "L_LH", "L_HH")


def total_loss(outputs: dict, obs, ev, weights: LossWeights, ctx: ComboContext):
    """Weighted sum of the four consistencies plus a per-term breakdown.

    ``outputs`` carries ``stack``, ``hdr_comp`` and ``hdr_pred`` from one
    forward pass. Terms whose lambda is zero are reported as exactly 0 and
    never evaluated.
    """
    lambdas = weights.lambdas
    if any(lam < 0 for lam in lambdas):
        raise ConfigError("loss lambdas must be >= 0")
    stack = outputs["stack"]
    terms = {}
    if lambdas[0]:
        terms["L_HL"] = loss_hl(stack, obs, ev, ctx)
    if lambdas[1]:
        terms["L_LL"] = loss_ll(stack)
    if lambdas[2]:
        terms["L_LH"] = loss_lh(fuse_reference(stack), outputs["hdr_comp"], ctx)
    if lambdas[3]:
        terms["L_HH"] = loss_hh(outputs["hdr_comp"], outputs["hdr_pred"], ctx)
    total = stack.new_zeros(())
    for lam, name in zip(lambdas, TERMS):
        if name in terms:
            total = total + lam * terms[name]
    breakdown = {name: float(terms[name].detach()) if name in terms else 0.0 for name in TERMS}
    breakdown["total"] = float(total.detach())
    return total, breakdown

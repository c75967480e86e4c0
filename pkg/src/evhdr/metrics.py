"""Tone-mapped full-reference metrics and gradient-based no-reference metrics.

Images are numpy arrays, ``(H, W)`` or channel-last ``(H, W, C)``.
"""

from __future__ import annotations

import numpy as np
from scipy.ndimage import correlate1d

from .config import ToneMapConfig
from .errors import InvalidInputError

PSNR_CAP = 99.0
# learned or calibrated metrics that need third-party models
EXTERNAL_METRICS = ("HDR-VDP-2", "NIQE", "CLIP-IQA+", "MANIQA", "MUSIQ", "LIQE")


def normalize(hdr: np.ndarray, mode: str = "per-image-max") -> np.ndarray:
    hdr = np.asarray(hdr, dtype=np.float64)
    if hdr.size and hdr.min() < 0:
        raise InvalidInputError("negative radiance")
    if mode == "fixed-1":
        return np.clip(hdr, 0.0, 1.0)
    if mode == "per-image-max":
        peak = hdr.max() if hdr.size else 0.0
        return hdr / peak if peak > 0 else hdr
    raise InvalidInputError(f"unknown normalization {mode!r}")


def mu_tonemap(hdr, cfg: ToneMapConfig | None = None) -> np.ndarray:
    """``log(1 + mu x) / log(1 + mu)`` after normalizing ``x`` into [0, 1]."""
    cfg = cfg or ToneMapConfig()
    x = normalize(hdr, cfg.normalize)
    return np.log1p(cfg.mu * x) / np.log1p(cfg.mu)


def psnr(a: np.ndarray, b: np.ndarray, peak: float = 1.0) -> float:
    mse = float(np.mean((np.asarray(a, np.float64) - np.asarray(b, np.float64)) ** 2))
    if mse == 0:
        return PSNR_CAP
    return float(min(PSNR_CAP, 10.0 * np.log10(peak ** 2 / mse)))


def psnr_mu(pred, ref, cfg: ToneMapConfig | None = None) -> float:
    if np.shape(pred) != np.shape(ref):
        raise InvalidInputError(f"shape mismatch {np.shape(pred)} vs {np.shape(ref)}")
    return psnr(mu_tonemap(pred, cfg), mu_tonemap(ref, cfg))


def _gaussian_window(size=11, sigma=1.5):
    r = np.arange(size) - size // 2
    g = np.exp(-(r ** 2) / (2 * sigma ** 2))
    return g / g.sum()


def ssim(a: np.ndarray, b: np.ndarray, data_range: float = 1.0, size: int = 11, sigma: float = 1.5) -> float:
    """Mean SSIM of two 2-D images over the positions where the window fits."""
    a = np.asarray(a, np.float64)
    b = np.asarray(b, np.float64)
    if a.shape != b.shape or a.ndim != 2:
        raise InvalidInputError("ssim expects two equally shaped 2-D images")
    if min(a.shape) < size:
        raise InvalidInputError(f"image {a.shape} smaller than the {size}x{size} window")
    g = _gaussian_window(size, sigma)

    def blur(x):
        return correlate1d(correlate1d(x, g, axis=0, mode="reflect"), g, axis=1, mode="reflect")

    c1, c2 = (0.01 * data_range) ** 2, (0.03 * data_range) ** 2
    mu_a, mu_b = blur(a), blur(b)
    var_a = blur(a * a) - mu_a ** 2
    var_b = blur(b * b) - mu_b ** 2
    cov = blur(a * b) - mu_a * mu_b
    smap = ((2 * mu_a * mu_b + c1) * (2 * cov + c2)) / ((mu_a ** 2 + mu_b ** 2 + c1) * (var_a + var_b + c2))
    pad = size // 2
    return float(smap[pad:-pad, pad:-pad].mean())


def _luma(img):
    img = np.asarray(img, np.float64)
    if img.ndim == 3 and img.shape[-1] == 3:
        return img @ np.array([0.299, 0.587, 0.114])
    if img.ndim == 3 and img.shape[-1] == 1:
        return img[..., 0]
    return img


def ssim_mu(pred, ref, cfg: ToneMapConfig | None = None) -> float:
    """SSIM on the luminance of the tone-mapped images."""
    if np.shape(pred) != np.shape(ref):
        raise InvalidInputError(f"shape mismatch {np.shape(pred)} vs {np.shape(ref)}")
    return ssim(_luma(mu_tonemap(pred, cfg)), _luma(mu_tonemap(ref, cfg)))


def _as_channels(img):
    img = np.asarray(img, np.float64)
    return img[..., None] if img.ndim == 2 else img


def average_gradient(img) -> float:
    """Mean of ``sqrt((dx^2 + dy^2) / 2)`` over forward differences, averaged over channels."""
    x = _as_channels(img)
    dx = x[:-1, 1:] - x[:-1, :-1]
    dy = x[1:, :-1] - x[:-1, :-1]
    return float(np.mean(np.sqrt((dx ** 2 + dy ** 2) / 2.0)))


def spatial_frequency(img) -> float:
    """``sqrt(RF^2 + CF^2)`` with RF/CF the RMS of horizontal/vertical forward differences."""
    x = _as_channels(img)
    rf = np.sqrt(np.mean((x[:, 1:] - x[:, :-1]) ** 2))
    cf = np.sqrt(np.mean((x[1:] - x[:-1]) ** 2))
    return float(np.sqrt(rf ** 2 + cf ** 2))

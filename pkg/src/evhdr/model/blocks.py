"""Convolutional building blocks shared by the networks."""

import torch
import torch.nn as nn
import torch.nn.functional as F


def deform_conv(x, offset, weight, bias, mask, groups=1):
    """Modulated deformable convolution (stride 1, "same" padding) via ``grid_sample``.

    ``offset`` is ``(B, 2*G*k*k, H, W)`` holding (dy, dx) per tap in row-major
    kernel order, ``mask`` is ``(B, G*k*k, H, W)``; out-of-image samples read
    zeros. Layout matches ``torchvision.ops.deform_conv2d``.
    """
    b, c, h, w = x.shape
    cout, _, k, _ = weight.shape
    taps = k * k
    cg = c // groups
    ky, kx = torch.meshgrid(torch.arange(k, dtype=x.dtype, device=x.device) - k // 2,
                            torch.arange(k, dtype=x.dtype, device=x.device) - k // 2, indexing="ij")
    ys = torch.arange(h, dtype=x.dtype, device=x.device).view(1, 1, h, 1)
    xs = torch.arange(w, dtype=x.dtype, device=x.device).view(1, 1, 1, w)
    off = offset.view(b * groups, taps, 2, h, w)
    py = ys + ky.reshape(1, taps, 1, 1) + off[:, :, 0]
    px = xs + kx.reshape(1, taps, 1, 1) + off[:, :, 1]
    grid = torch.stack([2 * px / max(w - 1, 1) - 1, 2 * py / max(h - 1, 1) - 1], dim=-1)
    # sample every tap at once: taps are laid out along the output height
    sampled = F.grid_sample(x.view(b * groups, cg, h, w), grid.view(b * groups, taps * h, w, 2),
                            mode="bilinear", padding_mode="zeros", align_corners=True)
    sampled = sampled.view(b, groups, cg, taps, h, w) * mask.view(b, groups, 1, taps, h, w)
    cols = sampled.reshape(b, c * taps, h * w)
    out = torch.matmul(weight.reshape(cout, c * taps), cols).view(b, cout, h, w)
    return out + bias.view(1, -1, 1, 1)


def conv(cin, cout, k=3, stride=1):
    return nn.Conv2d(cin, cout, k, stride=stride, padding=k // 2)


class ResBlock(nn.Module):
    def __init__(self, c, k=3):
        super().__init__()
        self.body = nn.Sequential(conv(c, c, k), nn.LeakyReLU(0.2), conv(c, c, k))

    def forward(self, x):
        return x + self.body(x)


class ModulatedDeformConv(nn.Module):
    """3x3 deformable convolution with per-tap learned offsets and modulation masks.

    Offsets and masks are predicted from the input itself. The predictor starts
    with zero weights and a small random offset bias, so sampling positions at
    initialization sit off the integer grid where bilinear sampling has kinks.
    """

    def __init__(self, c, groups=1, k=3):
        super().__init__()
        self.k = k
        self.groups = groups
        self.weight = nn.Parameter(torch.empty(c, c, k, k))
        self.bias = nn.Parameter(torch.zeros(c))
        nn.init.kaiming_uniform_(self.weight, a=0.2)
        taps = groups * k * k
        self.predictor = nn.Conv2d(c, 3 * taps, k, padding=k // 2)
        nn.init.zeros_(self.predictor.weight)
        with torch.no_grad():
            self.predictor.bias.zero_()
            self.predictor.bias[: 2 * taps].uniform_(-0.3, 0.3)

    def forward(self, x):
        taps = self.groups * self.k * self.k
        pred = self.predictor(x)
        offset, mask = pred[:, : 2 * taps], torch.sigmoid(pred[:, 2 * taps:])
        return deform_conv(x, offset, self.weight, self.bias, mask, self.groups)


class EventTransform(nn.Module):
    """Voxel grid -> features: plain conv stem followed by a deformable stage."""

    def __init__(self, cin, c, deformable=True, groups=1):
        super().__init__()
        self.stem = nn.Sequential(conv(cin, c), nn.LeakyReLU(0.2))
        # plain conv fallback trades alignment capacity for portability
        self.align = ModulatedDeformConv(c, groups) if deformable else conv(c, c)
        self.act = nn.LeakyReLU(0.2)

    def forward(self, grid):
        x = self.stem(grid)
        return x + self.act(self.align(x))


class ImageTransform(nn.Module):
    def __init__(self, c):
        super().__init__()
        self.body = nn.Sequential(conv(3, c), nn.LeakyReLU(0.2), ResBlock(c))

    def forward(self, img):
        return self.body(img)


class DenseLayer(nn.Module):
    def __init__(self, cin, growth, k):
        super().__init__()
        self.conv = conv(cin, growth, k)

    def forward(self, x):
        return torch.cat([x, F.relu(self.conv(x))], dim=1)


class ResidualDenseBlock(nn.Module):
    def __init__(self, c, growth, layers, k=3):
        super().__init__()
        self.dense = nn.Sequential(*[DenseLayer(c + i * growth, growth, k) for i in range(layers)])
        self.fuse = nn.Conv2d(c + layers * growth, c, 1)

    def forward(self, x):
        return x + self.fuse(self.dense(x))


class MRFR(nn.Module):
    """Three residual dense blocks of growing kernel size with inter-block skips.

    Takes the concatenation of fused HDR features and event features
    (``2c`` channels) and returns a ``c``-channel residual.
    """

    def __init__(self, c, growth, layers, kernel_sizes=(3, 5, 7)):
        super().__init__()
        self.head = nn.Conv2d(2 * c, c, 1)
        self.blocks = nn.ModuleList(ResidualDenseBlock(c, growth, layers, k) for k in kernel_sizes)
        self.fuse = nn.Conv2d(len(kernel_sizes) * c, c, 1)
        self.tail = conv(c, c)

    def forward(self, x):
        h = self.head(x)
        outs, y = [], h
        for block in self.blocks:
            y = block(y)
            outs.append(y)
        return self.tail(self.fuse(torch.cat(outs, dim=1)) + h)


class DenseFusion(nn.Module):
    """Two-level encoder/decoder whose decoder stages see every encoder level.

    Features from non-adjacent levels are resized and concatenated before each
    decoder fusion, so spatial detail survives the down/up path.
    """

    def __init__(self, cin, c):
        super().__init__()
        self.inp = nn.Sequential(conv(cin, c), nn.LeakyReLU(0.2))
        self.down1 = nn.Sequential(conv(c, 2 * c, 3, stride=2), nn.LeakyReLU(0.2), ResBlock(2 * c))
        self.down2 = nn.Sequential(conv(2 * c, 4 * c, 3, stride=2), nn.LeakyReLU(0.2), ResBlock(4 * c))
        self.fuse1 = nn.Sequential(nn.Conv2d(4 * c + 2 * c + c, 2 * c, 1), nn.LeakyReLU(0.2), ResBlock(2 * c))
        self.fuse0 = nn.Sequential(nn.Conv2d(2 * c + c + 4 * c, c, 1), nn.LeakyReLU(0.2), ResBlock(c))

    @staticmethod
    def _resize(x, ref):
        return F.interpolate(x, size=ref.shape[-2:], mode="bilinear", align_corners=False)

    def forward(self, x):
        e0 = self.inp(x)
        e1 = self.down1(e0)
        e2 = self.down2(e1)
        d1 = self.fuse1(torch.cat([self._resize(e2, e1), e1, self._resize(e0, e1)], dim=1))
        d0 = self.fuse0(torch.cat([self._resize(d1, e0), e0, self._resize(e2, e0)], dim=1))
        return d0 + e0

"""Small strided-conv encoder with a three-level 1x1 fusion head."""
from dataclasses import asdict, dataclass

import torch
import torch.nn.functional as F
from torch import nn

from .errors import ConfigError, DimensionError


@dataclass
class ModelConfig:
    encoder_channels: tuple = (16, 32, 64, 96, 128)
    fusion_channels: int = 64
    input_size: int = 96

    def __post_init__(self):
        self.encoder_channels = tuple(int(c) for c in self.encoder_channels)
        if len(self.encoder_channels) != 5:
            raise ConfigError("encoder_channels needs one entry per stage (5)")
        if min(self.encoder_channels) < 1 or self.fusion_channels < 1:
            raise ConfigError("channel counts must be >= 1")
        if self.input_size % 32:
            raise ConfigError(f"input_size {self.input_size} is not a multiple of 32")

    def to_dict(self):
        d = asdict(self)
        d["encoder_channels"] = list(self.encoder_channels)
        return d


@dataclass
class FeaturePyramid:
    f2: torch.Tensor  # stride 8
    f3: torch.Tensor  # stride 16
    f4: torch.Tensor  # stride 32


def conv_bn_relu(cin, cout, kernel_size=3, stride=1):
    return nn.Sequential(
        nn.Conv2d(cin, cout, kernel_size, stride=stride, padding=kernel_size // 2, bias=False),
        nn.BatchNorm2d(cout),
        nn.ReLU(inplace=True),
    )


class Encoder(nn.Module):
    def __init__(self, channels):
        super().__init__()
        stages = []
        cin = 3
        for cout in channels:
            stages.append(nn.Sequential(conv_bn_relu(cin, cout, stride=2), conv_bn_relu(cout, cout)))
            cin = cout
        self.stages = nn.ModuleList(stages)

    def forward(self, x):
        if x.dim() != 4 or x.shape[1] != 3:
            raise DimensionError(f"expected (N, 3, H, W) input, got {tuple(x.shape)}")
        if x.shape[-2] % 32 or x.shape[-1] % 32:
            raise DimensionError(f"input size {tuple(x.shape[-2:])} is not a multiple of 32")
        feats = []
        for stage in self.stages:
            x = stage(x)
            feats.append(x)
        return FeaturePyramid(feats[2], feats[3], feats[4])


class FusionHead(nn.Module):
    def __init__(self, in_channels, fusion_channels):
        super().__init__()
        self.reduce = nn.ModuleList(conv_bn_relu(c, fusion_channels, kernel_size=1) for c in in_channels)
        self.predict = nn.Conv2d(fusion_channels, 1, kernel_size=1)

    def forward(self, pyr, out_h, out_w):
        f2, f3, f4 = pyr.f2, pyr.f3, pyr.f4
        size = f2.shape[-2:]
        if (f3.shape[-2] * 2, f3.shape[-1] * 2) != tuple(size) or (
            f4.shape[-2] * 4,
            f4.shape[-1] * 4,
        ) != tuple(size):
            raise DimensionError("pyramid levels are not at strides 8/16/32 of one input")
        fused = self.reduce[0](f2)
        for reduce, f in zip(self.reduce[1:], (f3, f4)):
            fused = fused + F.interpolate(reduce(f), size=size, mode="bilinear", align_corners=False)
        logits = self.predict(fused)
        logits = F.interpolate(logits, size=(out_h, out_w), mode="bilinear", align_corners=False)
        return torch.sigmoid(logits)[:, 0]


class SegModel(nn.Module):
    def __init__(self, cfg=None):
        super().__init__()
        self.cfg = cfg or ModelConfig()
        self.encoder = Encoder(self.cfg.encoder_channels)
        self.head = FusionHead(self.cfg.encoder_channels[2:], self.cfg.fusion_channels)

    def encode(self, image):
        return self.encoder(image)

    def fuse_and_predict(self, pyr, out_h, out_w):
        return self.head(pyr, out_h, out_w)

    def forward(self, image, out_size=None):
        """Probability mask (N, H', W'); defaults to the input resolution."""
        out_h, out_w = out_size or image.shape[-2:]
        return self.head(self.encoder(image), out_h, out_w)

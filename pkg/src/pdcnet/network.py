"""Full segmentation network: pyramid encoder, MDA per stage, MGC, AFD."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from . import tensorio
from .afd import AFD
from .autodiff import functional as F
from .autodiff.nn import ConvBNReLU, Module, count_parameters
from .autodiff.tensor import Tensor, pad
from .errors import ConfigError, FormatError
from .mda import MDA, VARIANTS
from .mgc import MGC

STAGE_STRIDES = (4, 8, 16, 32)


@dataclass
class EncoderConfig:
    channels: list = field(default_factory=lambda: [32, 64, 128, 256])
    blocks: int = 2

    def validate(self) -> None:
        if len(self.channels) != 4:
            raise ConfigError(f"encoder needs exactly 4 stages, got {len(self.channels)}")
        if self.blocks < 1:
            raise ConfigError("encoder needs at least one block per stage")


@dataclass
class PdcNetConfig:
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    in_channels: int = 1
    num_classes: int = 3
    input_size: int = 64
    mda_variant: str = "full"
    strip_len: int = 9
    mgc_window: int = 4
    mgc_capacity: int = 8
    mgc_wiring: str = "pre"
    afd_width: int = 64
    seed: int = 0
    dtype: str = "f32"

    def validate(self) -> None:
        self.encoder.validate()
        if self.input_size % 32:
            raise ConfigError(f"input size {self.input_size} must be divisible by 32")
        if self.mda_variant not in VARIANTS:
            raise ConfigError(f"mda_variant must be one of {VARIANTS}")
        if self.mgc_wiring not in ("pre", "post"):
            raise ConfigError("mgc_wiring must be 'pre' or 'post'")
        if self.mgc_window < 1 or self.mgc_capacity < 1:
            raise ConfigError("MGC window and capacity must be positive")
        parts = {"full": 4, "dual": 2, "pconv": 1}[self.mda_variant]
        for c in self.encoder.channels:
            if c % parts:
                raise ConfigError(f"stage width {c} not divisible by {parts} for MDA variant {self.mda_variant}")
        if self.afd_width % 4:
            raise ConfigError(f"AFD width {self.afd_width} must be divisible by 4")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "PdcNetConfig":
        d = dict(d)
        enc = EncoderConfig(**d.pop("encoder", {}))
        return cls(encoder=enc, **d)


class Encoder(Module):
    """Plain conv pyramid with outputs at strides 4, 8, 16, 32."""

    def __init__(self, cfg: EncoderConfig, in_channels: int = 1, rng=None, dtype: str = "f32"):
        rng = rng or np.random.default_rng(0)
        self.stages = []
        cin = in_channels
        for s, cout in enumerate(cfg.channels):
            if s == 0:
                strides = [2, 2] + [1] * (cfg.blocks - 2) if cfg.blocks >= 2 else [4]
            else:
                strides = [2] + [1] * (cfg.blocks - 1)
            blocks = []
            for st in strides:
                blocks.append(ConvBNReLU(cin, cout, stride=st, rng=rng, dtype=dtype))
                cin = cout
            self.stages.append(_Sequential(blocks))

    def forward(self, x: Tensor) -> list:
        feats = []
        for stage in self.stages:
            x = stage(x)
            feats.append(x)
        return feats


class _Sequential(Module):
    def __init__(self, layers):
        self.layers = list(layers)

    def forward(self, x):
        for layer in self.layers:
            x = layer(x)
        return x


class PdcNet(Module):
    def __init__(self, config: PdcNetConfig | None = None):
        config = config or PdcNetConfig()
        config.validate()
        self.config = config
        rng = np.random.default_rng(config.seed)
        dt = config.dtype
        chans = config.encoder.channels
        self.encoder = Encoder(config.encoder, config.in_channels, rng=rng, dtype=dt)
        self.mda = [MDA(c, config.mda_variant, config.strip_len, rng=rng, dtype=dt) for c in chans]
        self.mgc = MGC(chans[3], config.mgc_window, config.mgc_capacity, rng=rng, dtype=dt)
        self.afd = AFD(chans, config.afd_width, config.num_classes, upsample=(1, 2, 4, 8), rng=rng, dtype=dt)

    def _context(self, x: Tensor) -> Tensor:
        # zero-pad the deepest map up to a whole number of windows, crop back afterwards
        n = self.mgc.window
        _, _, H, W = x.shape
        ph, pw = (-H) % n, (-W) % n
        if ph or pw:
            y = self.mgc(pad(x, ((0, 0), (0, 0), (0, ph), (0, pw))))
            return y[:, :, :H, :W]
        return self.mgc(x)

    def stage_features(self, image: Tensor) -> list:
        """The four MDA outputs fed to the decoder."""
        e = self.encoder(image)
        out = [self.mda[i](e[i]) for i in range(3)]
        if self.config.mgc_wiring == "pre":
            out.append(self.mda[3](self._context(e[3])))
        else:
            out.append(self._context(self.mda[3](e[3])))
        return out

    def forward(self, image: Tensor) -> Tensor:
        if image.ndim != 4 or image.shape[2] % 32 or image.shape[3] % 32:
            raise ConfigError(f"input spatial size must be divisible by 32, got shape {image.shape}")
        logits = self.afd(self.stage_features(image))
        return F.bilinear_upsample(logits, STAGE_STRIDES[0])

    def num_parameters(self) -> int:
        return count_parameters(self)


CONFIG_KEY = "meta/config"


def model_entries(model: PdcNet) -> list:
    cfg = json.dumps(model.config.to_dict(), sort_keys=True).encode("utf-8")
    entries = [(CONFIG_KEY, np.frombuffer(cfg, dtype=np.uint8))]
    entries += [(f"model/{k}", v) for k, v in model.state_dict().items()]
    return entries


def save_model(path, model: PdcNet, extra=()) -> None:
    tensorio.save_checkpoint(path, model_entries(model) + list(extra))


def model_from_entries(entries) -> PdcNet:
    if CONFIG_KEY not in entries:
        raise FormatError(f"checkpoint has no {CONFIG_KEY} entry")
    cfg = PdcNetConfig.from_dict(json.loads(bytes(entries[CONFIG_KEY]).decode("utf-8")))
    model = PdcNet(cfg)
    state = {k[len("model/"):]: v for k, v in entries.items() if k.startswith("model/")}
    model.load_state_dict(state)
    return model


def load_model(path) -> PdcNet:
    return model_from_entries(tensorio.load_checkpoint(path))

"""Two-scale training with selectable supervision regimes.

Modes:

``full_gt``
    single scale, BCE + Dice against the ground-truth mask.
``naive_box``
    single scale, BCE + Dice against the rendered box mask.
``m2b_only``
    two scales, BCE + Dice between the M2B outputs and the box mask.
``weak``
    ``m2b_only`` plus the in-box scale-consistency term.
"""
import csv
import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F

from .data import apply_augment, augment_params, render_boxes, scale_boxes
from .errors import ConfigError, DimensionError
from .losses import direct_loss, total_loss
from .model import ModelConfig, SegModel

log = logging.getLogger(__name__)

MODES = ("full_gt", "naive_box", "m2b_only", "weak")
TWO_SCALE_MODES = ("m2b_only", "weak")
CSV_FIELDS = ["epoch", "mode", "bce", "dice", "sum", "sc", "total", "val_dice", "val_iou"]


@dataclass
class RunConfig:
    mode: str = "weak"
    base_size: int = 96
    scale_set: tuple = (64, 96, 128)
    lr: float = 1e-4
    batch_size: int = 16
    epochs: int = 20
    weight_decay: float = 1e-4
    betas: tuple = (0.9, 0.999)
    seed: int = 0
    augment: bool = True
    encoder_channels: tuple = (16, 32, 64, 96, 128)
    fusion_channels: int = 64
    device: str = "cpu"

    def __post_init__(self):
        self.scale_set = tuple(int(s) for s in self.scale_set)
        self.betas = tuple(float(b) for b in self.betas)
        self.encoder_channels = tuple(int(c) for c in self.encoder_channels)
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not self.scale_set:
            raise ConfigError("scale_set must be nonempty")
        for s in (self.base_size, *self.scale_set):
            if s <= 0 or s % 32:
                raise ConfigError(f"size {s} is not a positive multiple of 32")
        if not self.lr > 0:
            raise ConfigError("lr must be > 0")
        if self.batch_size < 1 or self.epochs < 0:
            raise ConfigError("batch_size must be >= 1 and epochs >= 0")

    @classmethod
    def full_scale(cls, **overrides):
        """Full-size recipe: 352px base, lr 1e-4, batch 16, 16 epochs."""
        params = dict(
            base_size=352,
            scale_set=(256, 288, 320, 352, 384, 416),
            lr=1e-4,
            batch_size=16,
            epochs=16,
        )
        params.update(overrides)
        return cls(**params)

    def model_config(self):
        return ModelConfig(self.encoder_channels, self.fusion_channels, self.base_size)

    def to_dict(self):
        d = asdict(self)
        for k in ("scale_set", "betas", "encoder_channels"):
            d[k] = list(d[k])
        return d

    @classmethod
    def from_dict(cls, d):
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown run-config keys: {sorted(unknown)}")
        try:
            return cls(**d)
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"invalid run config: {exc}") from exc

    @classmethod
    def from_file(cls, path):
        try:
            d = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read run config {path}: {exc}") from exc
        if not isinstance(d, dict):
            raise ConfigError(f"run config {path} must be a JSON object")
        return cls.from_dict(d)


@dataclass
class TrainState:
    model: SegModel
    optimizer: torch.optim.Optimizer
    cfg: RunConfig
    epoch: int = 0
    history: list = field(default_factory=list)
    step_losses: list = field(default_factory=list)


class TrainingDiverged(RuntimeError):
    pass


def init_state(cfg):
    torch.manual_seed(cfg.seed)
    model = SegModel(cfg.model_config()).to(cfg.device)
    opt = torch.optim.AdamW(
        model.parameters(), lr=cfg.lr, betas=cfg.betas, weight_decay=cfg.weight_decay
    )
    return TrainState(model, opt, cfg)


# batch preparation


def resize_images(images, size):
    if tuple(images.shape[-2:]) == (size, size):
        return images
    return F.interpolate(images, size=(size, size), mode="bilinear", align_corners=False)


def resize_probs(probs, size):
    if tuple(probs.shape[-2:]) == (size, size):
        return probs
    return F.interpolate(probs.unsqueeze(1), size=(size, size), mode="bilinear", align_corners=False)[:, 0]


def _image_at(sample, size):
    img = torch.from_numpy(np.ascontiguousarray(sample.image, dtype=np.float32))
    return resize_images(img.unsqueeze(0), size)[0]


def box_target(sample, size):
    boxes = scale_boxes(sample.boxes, sample.size, (size, size))
    return torch.from_numpy(render_boxes(boxes, size, size).astype(np.float32))


def gt_target(sample, size):
    if sample.gt_mask is None:
        raise ConfigError(f"sample {sample.id} has no ground-truth mask")
    gt = torch.from_numpy(sample.gt_mask.astype(np.float32))
    if tuple(gt.shape) != (size, size):
        gt = F.interpolate(gt[None, None], size=(size, size), mode="nearest")[0, 0]
    return gt


def predict_pair(model, images, s2):
    """Predictions for ``images`` (already at the base size) and for the same
    images resized to ``s2``, the latter resized back to the base size."""
    s1 = images.shape[-1]
    p1 = model(images)
    p2 = resize_probs(model(resize_images(images, s2)), s1)
    return p1, p2


def train_step(batch, state, s2=None):
    """One optimizer update on ``batch``; returns the LossReport."""
    cfg = state.cfg
    if not batch:
        raise ConfigError("empty batch")
    s1 = cfg.base_size
    if cfg.mode == "full_gt" and any(s.gt_mask is None for s in batch):
        raise ConfigError("mode full_gt needs ground-truth masks")
    images = torch.stack([_image_at(s, s1) for s in batch]).to(cfg.device)
    state.model.train()

    if cfg.mode in TWO_SCALE_MODES:
        if s2 is None:
            rng = np.random.default_rng([cfg.seed, state.epoch, len(state.step_losses)])
            s2 = int(rng.choice(cfg.scale_set))
        boxes = torch.stack([box_target(s, s1) for s in batch]).to(cfg.device)
        p1, p2 = predict_pair(state.model, images, s2)
        report = total_loss(p1, p2, boxes, use_sc=cfg.mode == "weak")
    else:
        if cfg.mode == "full_gt":
            target = torch.stack([gt_target(s, s1) for s in batch])
        else:
            target = torch.stack([box_target(s, s1) for s in batch])
        report = direct_loss(state.model(images), target.to(cfg.device))

    if not torch.isfinite(report.total):
        raise TrainingDiverged(f"non-finite loss at epoch {state.epoch}: {report.as_floats()}")
    state.optimizer.zero_grad(set_to_none=True)
    report.total.backward()
    state.optimizer.step()
    return report


def epoch_batches(cfg, n, epoch):
    """Shuffled index batches and second scales for one epoch."""
    rng = np.random.default_rng([cfg.seed, epoch])
    order = rng.permutation(n)
    batches = [order[i : i + cfg.batch_size] for i in range(0, n, cfg.batch_size)]
    scales = [int(rng.choice(cfg.scale_set)) for _ in batches]
    return batches, scales


def run_epoch(state, dataset):
    cfg = state.cfg
    batches, scales = epoch_batches(cfg, len(dataset), state.epoch)
    totals = {k: 0.0 for k in ("bce", "dice", "sum", "sc", "total")}
    for idxs, s2 in zip(batches, scales):
        batch = []
        for i in idxs:
            s = dataset[int(i)]
            if cfg.augment:
                s = apply_augment(s, *augment_params([cfg.seed, state.epoch, int(i)]))
            batch.append(s)
        report = train_step(batch, state, s2)
        values = report.as_floats()
        state.step_losses.append(values["total"])
        for k in totals:
            totals[k] += values[k] * len(idxs)
    return {k: v / len(dataset) for k, v in totals.items()}


def train(dataset, cfg, out_dir=None, val_dataset=None, state=None):
    """Run ``cfg.epochs`` epochs; checkpoints and a CSV log go to ``out_dir``."""
    from .metrics import evaluate

    if len(dataset) == 0:
        raise ConfigError("empty training dataset")
    if cfg.mode == "full_gt" and any(s.gt_mask is None for s in dataset):
        raise ConfigError("mode full_gt needs ground-truth masks for every training sample")
    state = state or init_state(cfg)
    state.cfg = cfg
    log.info("run config: %s", json.dumps(cfg.to_dict(), sort_keys=True))
    out = Path(out_dir) if out_dir else None
    if out:
        out.mkdir(parents=True, exist_ok=True)
        (out / "run_config.json").write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n")

    while state.epoch < cfg.epochs:
        try:
            means = run_epoch(state, dataset)
        except TrainingDiverged:
            if out:
                save_checkpoint(out / "diverged.npz", state)
            raise
        row = {"epoch": state.epoch + 1, "mode": cfg.mode, **means, "val_dice": "", "val_iou": ""}
        if val_dataset is not None:
            metric = evaluate(state, val_dataset)
            row["val_dice"], row["val_iou"] = metric.dice, metric.iou
        state.epoch += 1
        state.history.append(row)
        log.info("epoch %d %s total=%.4f", state.epoch, cfg.mode, means["total"])
        if out:
            _append_csv(out / "metrics.csv", row)
            save_checkpoint(out / f"epoch_{state.epoch:03d}.npz", state)
    return state


def _append_csv(path, row):
    new = not path.exists()
    with open(path, "a", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_FIELDS)
        if new:
            writer.writeheader()
        writer.writerow({k: row.get(k, "") for k in CSV_FIELDS})


# inference


@torch.no_grad()
def infer(image, state):
    """Probability mask at the image's own resolution; one forward at base size."""
    model = state.model if isinstance(state, TrainState) else state
    size = model.cfg.input_size
    img = torch.as_tensor(np.ascontiguousarray(image), dtype=torch.float32)
    if img.dim() != 3 or img.shape[0] != 3:
        raise DimensionError(f"expected a (3, H, W) image, got {tuple(img.shape)}")
    model.eval()
    device = next(model.parameters()).device
    x = resize_images(img.unsqueeze(0).to(device), size)
    return model(x, out_size=tuple(img.shape[-2:]))[0].cpu().numpy()


@torch.no_grad()
def infer_batch(images, state, out_size):
    model = state.model if isinstance(state, TrainState) else state
    model.eval()
    x = resize_images(images, model.cfg.input_size)
    return model(x, out_size=out_size)


# checkpoints


def save_checkpoint(path, state):
    """Single .npz archive: parameters/buffers, optimizer moments, and metadata.

    Only the segmentation network is stored; nothing from the supervision
    losses is part of the archive.
    """
    arrays = {}
    for name, t in state.model.state_dict().items():
        arrays[f"model/{name}"] = t.detach().cpu().numpy()
    opt_state = state.optimizer.state_dict()["state"]
    for idx, slots in opt_state.items():
        for key, t in slots.items():
            arrays[f"optim/{idx}/{key}"] = torch.as_tensor(t).detach().cpu().numpy()
    meta = {
        "format": 1,
        "model_config": state.model.cfg.to_dict(),
        "run_config": state.cfg.to_dict(),
        "epoch": state.epoch,
        "history": state.history,
    }
    arrays["meta"] = np.array(json.dumps(meta, sort_keys=True))
    path = Path(path)
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)
    return path


def load_checkpoint(path):
    with np.load(path, allow_pickle=False) as archive:
        meta = json.loads(str(archive["meta"]))
        cfg = RunConfig.from_dict(meta["run_config"])
        state = init_state(cfg)
        mc = ModelConfig(**meta["model_config"])
        if mc != state.model.cfg:
            state.model = SegModel(mc)
        sd = {k[len("model/") :]: torch.from_numpy(archive[k].copy()) for k in archive.files if k.startswith("model/")}
        state.model.load_state_dict(sd)
        state.optimizer = torch.optim.AdamW(
            state.model.parameters(), lr=cfg.lr, betas=cfg.betas, weight_decay=cfg.weight_decay
        )
        opt_sd = state.optimizer.state_dict()
        slots = {}
        for k in archive.files:
            if k.startswith("optim/"):
                _, idx, key = k.split("/", 2)
                slots.setdefault(int(idx), {})[key] = torch.from_numpy(archive[k].copy())
        opt_sd["state"] = slots
        state.optimizer.load_state_dict(opt_sd)
    state.epoch = meta["epoch"]
    state.history = meta["history"]
    return state

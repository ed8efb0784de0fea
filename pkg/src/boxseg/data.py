"""Samples, box annotations, synthetic blob data and directory datasets.

Boxes are ``(row_min, col_min, row_max, col_max)`` tuples with inclusive
integer pixel coordinates. Images are float32 arrays shaped (3, H, W) with
intensities in [0, 1]; masks are uint8 arrays shaped (H, W).
"""
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image
from scipy import ndimage

from . import kernels
from .errors import ConfigError, DimensionError

log = logging.getLogger(__name__)

IMAGE_SUFFIXES = (".png", ".bmp", ".tif", ".tiff", ".jpg", ".jpeg")
BOXES_FILE = "boxes.txt"


@dataclass
class Sample:
    image: np.ndarray
    boxes: list
    id: str
    gt_mask: np.ndarray = None

    @property
    def size(self):
        return self.image.shape[-2:]


def mask_to_boxes(mask):
    """Tight box of every 4-connected component, sorted by (row_min, col_min)."""
    arr = np.ascontiguousarray(np.asarray(mask) != 0, dtype=np.uint8)
    if arr.ndim != 2:
        raise DimensionError(f"expected a 2-D mask, got shape {arr.shape}")
    boxes = sorted(tuple(int(v) for v in b) for b in kernels.component_boxes(arr))
    if not boxes:
        log.debug("mask has no foreground; empty box annotation")
    return boxes


def render_boxes(boxes, height, width):
    """Binary union mask of ``boxes`` on an H×W grid."""
    out = np.zeros((height, width), dtype=np.uint8)
    for r0, c0, r1, c1 in boxes:
        if not (0 <= r0 <= r1 < height and 0 <= c0 <= c1 < width):
            raise DimensionError(f"box {(r0, c0, r1, c1)} outside {height}x{width}")
        out[r0 : r1 + 1, c0 : c1 + 1] = 1
    return out


def scale_boxes(boxes, src_hw, dst_hw):
    """Rescale boxes between grids, rounding outward so no extent is lost."""
    sy = dst_hw[0] / src_hw[0]
    sx = dst_hw[1] / src_hw[1]
    out = []
    for r0, c0, r1, c1 in boxes:
        nr0 = math.floor(r0 * sy)
        nc0 = math.floor(c0 * sx)
        nr1 = min(math.ceil((r1 + 1) * sy), dst_hw[0]) - 1
        nc1 = min(math.ceil((c1 + 1) * sx), dst_hw[1]) - 1
        out.append((nr0, nc0, max(nr0, nr1), max(nc0, nc1)))
    return out


# synthetic data


@dataclass
class SynthConfig:
    count: int = 100
    image_size: int = 96
    blob_count_range: tuple = (1, 2)
    blob_scale_range: tuple = (0.2, 0.4)
    texture_noise: float = 0.05
    contrast: float = 0.25
    seed: int = 0

    def __post_init__(self):
        self.blob_count_range = tuple(int(v) for v in self.blob_count_range)
        self.blob_scale_range = tuple(float(v) for v in self.blob_scale_range)
        lo, hi = self.blob_count_range
        if self.count < 0:
            raise ConfigError("count must be >= 0")
        if self.image_size < 32 or self.image_size % 32:
            raise ConfigError(f"image_size {self.image_size} must be a positive multiple of 32")
        if not 1 <= lo <= hi:
            raise ConfigError(f"blob_count_range {self.blob_count_range} must satisfy 1 <= min <= max")
        slo, shi = self.blob_scale_range
        if not 0 < slo <= shi <= 1:
            raise ConfigError(f"blob_scale_range {self.blob_scale_range} must lie in (0, 1]")
        if self.texture_noise < 0 or self.contrast <= 0:
            raise ConfigError("texture_noise must be >= 0 and contrast > 0")

    def to_dict(self):
        d = asdict(self)
        d["blob_count_range"] = list(self.blob_count_range)
        d["blob_scale_range"] = list(self.blob_scale_range)
        return d


def _periodic_walk(rng, n=64, step=0.09, limit=0.3):
    """Smooth closed random walk used to perturb a blob outline."""
    walk = np.cumsum(rng.normal(0.0, step, n))
    walk -= np.linspace(0.0, 1.0, n, endpoint=False) * walk[-1]
    walk = ndimage.gaussian_filter1d(walk - walk.mean(), sigma=2.0, mode="wrap")
    return np.clip(walk, -limit, limit)


def _blob(rng, size, scale):
    a = scale * size / 2
    b = a * rng.uniform(0.35, 0.75)
    theta = rng.uniform(0.0, math.pi)
    wobble = _periodic_walk(rng)
    margin = min(a * 1.1 + 1, size / 2)
    cy, cx = rng.uniform(margin, size - margin, 2)

    yy, xx = np.mgrid[0:size, 0:size] + 0.5
    dy, dx = yy - cy, xx - cx
    u = dx * math.cos(theta) + dy * math.sin(theta)
    v = -dx * math.sin(theta) + dy * math.cos(theta)
    rho = np.hypot(u / a, v / b)
    phi = np.mod(np.arctan2(v / b, u / a), 2 * math.pi)
    n = wobble.shape[0]
    pos = phi / (2 * math.pi) * n
    i0 = np.floor(pos).astype(int) % n
    frac = pos - np.floor(pos)
    radius = 1.0 + wobble[i0] * (1 - frac) + wobble[(i0 + 1) % n] * frac
    return rho <= radius


def _texture(rng, size, base, sigma, amp):
    field_ = ndimage.gaussian_filter(rng.normal(size=(3, size, size)), sigma=(0, sigma, sigma))
    field_ /= field_.std() + 1e-12
    return base[:, None, None] + amp * field_


def synth_sample(cfg, index):
    """Sample ``index`` of the dataset described by ``cfg``.

    Randomness is keyed on (seed, index) only, so samples can be generated
    in any order or in parallel.
    """
    rng = np.random.default_rng([cfg.seed, index])
    size = cfg.image_size
    n_blobs = int(rng.integers(cfg.blob_count_range[0], cfg.blob_count_range[1] + 1))
    mask = np.zeros((size, size), dtype=bool)
    while True:
        for _ in range(n_blobs):
            mask |= _blob(rng, size, rng.uniform(*cfg.blob_scale_range))
        if mask.any():
            break

    bg_color = rng.uniform(0.3, 0.7, 3)
    sign = rng.choice([-1.0, 1.0])
    fg_color = np.clip(bg_color + sign * cfg.contrast * rng.uniform(0.6, 1.0, 3), 0.0, 1.0)
    background = _texture(rng, size, bg_color, sigma=6.0, amp=0.06)
    foreground = _texture(rng, size, fg_color, sigma=3.0, amp=0.06)
    weight = ndimage.gaussian_filter(mask.astype(np.float64), 0.8)
    image = background * (1 - weight) + foreground * weight
    image += cfg.texture_noise * rng.normal(size=image.shape)
    # quantised to 8 bits so a PNG round trip is lossless
    image = np.round(np.clip(image, 0.0, 1.0) * 255) / 255

    gt = mask.astype(np.uint8)
    return Sample(image=image.astype(np.float32), boxes=mask_to_boxes(gt), id=f"{index:05d}", gt_mask=gt)


def generate_synthetic(cfg):
    return [synth_sample(cfg, i) for i in range(cfg.count)]


# augmentation


def _transform_box(box, h, w, hflip, vflip, k):
    r0, c0, r1, c1 = box
    if hflip:
        c0, c1 = w - 1 - c1, w - 1 - c0
    if vflip:
        r0, r1 = h - 1 - r1, h - 1 - r0
    for _ in range(k):
        # np.rot90 (counter-clockwise): (r, c) -> (w - 1 - c, r)
        r0, c0, r1, c1 = w - 1 - c1, r0, w - 1 - c0, r1
        h, w = w, h
    return (r0, c0, r1, c1)


def augment_params(seed):
    rng = np.random.default_rng(seed)
    hflip = bool(rng.random() < 0.5)
    vflip = bool(rng.random() < 0.5)
    k = int(rng.integers(0, 4))
    return hflip, vflip, k


def apply_augment(sample, hflip, vflip, k):
    def tf(arr):
        if hflip:
            arr = arr[..., :, ::-1]
        if vflip:
            arr = arr[..., ::-1, :]
        if k:
            arr = np.rot90(arr, k, axes=(-2, -1))
        return np.ascontiguousarray(arr)

    h, w = sample.size
    boxes = sorted(_transform_box(b, h, w, hflip, vflip, k) for b in sample.boxes)
    gt = None if sample.gt_mask is None else tf(sample.gt_mask)
    return Sample(image=tf(sample.image), boxes=boxes, id=sample.id, gt_mask=gt)


def augment(sample, seed):
    """Random horizontal/vertical flip (p=0.5 each) and rotation by k*90 degrees."""
    return apply_augment(sample, *augment_params(seed))


# directory datasets


class SampleList(list):
    """List of samples with the loader's skip report attached."""

    def __init__(self, samples=(), report=()):
        super().__init__(samples)
        self.report = list(report)


def read_boxes_file(path):
    records = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        parts = line.split()
        if not parts:
            continue
        try:
            n = int(parts[1])
            coords = [int(v) for v in parts[2:]]
        except (IndexError, ValueError) as exc:
            raise ConfigError(f"{path}:{lineno}: malformed box record") from exc
        if len(coords) != 4 * n:
            raise ConfigError(f"{path}:{lineno}: expected {n} boxes, got {len(coords)} numbers")
        records[parts[0]] = [tuple(coords[i : i + 4]) for i in range(0, len(coords), 4)]
    return records


def write_boxes_file(path, samples):
    lines = []
    for s in sorted(samples, key=lambda s: s.id):
        coords = " ".join(f"{r0} {c0} {r1} {c1}" for r0, c0, r1, c1 in s.boxes)
        lines.append(f"{s.id} {len(s.boxes)} {coords}".rstrip())
    Path(path).write_text("\n".join(lines) + "\n")


def read_image(path):
    with Image.open(path) as im:
        arr = np.asarray(im.convert("RGB"), dtype=np.float32) / 255.0
    return np.ascontiguousarray(arr.transpose(2, 0, 1))


def read_mask(path):
    with Image.open(path) as im:
        return (np.asarray(im.convert("L")) > 127).astype(np.uint8)


def write_image(path, image):
    arr = np.round(np.clip(image, 0.0, 1.0) * 255).astype(np.uint8).transpose(1, 2, 0)
    Image.fromarray(arr).save(path)


def write_mask(path, mask):
    Image.fromarray((np.asarray(mask) > 0).astype(np.uint8) * 255).save(path)


def save_directory(root, samples):
    root = Path(root)
    (root / "images").mkdir(parents=True, exist_ok=True)
    has_masks = any(s.gt_mask is not None for s in samples)
    if has_masks:
        (root / "masks").mkdir(exist_ok=True)
    for s in samples:
        write_image(root / "images" / f"{s.id}.png", s.image)
        if s.gt_mask is not None:
            write_mask(root / "masks" / f"{s.id}.png", s.gt_mask)
    write_boxes_file(root / BOXES_FILE, samples)


def _find(folder, stem):
    for suffix in IMAGE_SUFFIXES:
        p = folder / f"{stem}{suffix}"
        if p.exists():
            return p
    return None


def load_directory(root):
    """Load ``root/images`` with ``root/masks`` and/or ``root/boxes.txt``.

    Images that cannot be read or have no annotation are skipped and listed
    in ``.report`` of the returned :class:`SampleList`.
    """
    root = Path(root)
    image_dir = root / "images"
    if not image_dir.is_dir():
        raise ConfigError(f"{root} has no images/ directory")
    mask_dir = root / "masks"
    has_masks = mask_dir.is_dir()
    box_path = root / BOXES_FILE
    records = read_boxes_file(box_path) if box_path.exists() else None

    samples, report = [], []
    paths = sorted(p for p in image_dir.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
    for path in paths:
        sid = path.stem
        try:
            image = read_image(path)
        except Exception as exc:  # PIL raises a variety of types on bad files
            report.append(f"{sid}: unreadable image ({exc.__class__.__name__})")
            continue
        gt = None
        if has_masks:
            mpath = _find(mask_dir, sid)
            if mpath is not None:
                try:
                    gt = read_mask(mpath)
                except Exception as exc:
                    report.append(f"{sid}: unreadable mask ({exc.__class__.__name__})")
                    continue
                if gt.shape != image.shape[1:]:
                    report.append(f"{sid}: mask shape {gt.shape} != image shape {image.shape[1:]}")
                    continue
        if records is not None and sid in records:
            boxes = sorted(records[sid])
            try:
                render_boxes(boxes, *image.shape[1:])
            except DimensionError as exc:
                report.append(f"{sid}: {exc}")
                continue
        elif gt is not None:
            boxes = mask_to_boxes(gt)
        else:
            report.append(f"{sid}: no annotation")
            continue
        samples.append(Sample(image=image, boxes=boxes, id=sid, gt_mask=gt))
    for line in report:
        log.warning("skipped %s", line)
    return SampleList(samples, report)

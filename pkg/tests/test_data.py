import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from PIL import Image

from boxseg import ConfigError, DimensionError
from boxseg.data import (
    Sample,
    SynthConfig,
    apply_augment,
    augment,
    generate_synthetic,
    load_directory,
    mask_to_boxes,
    read_boxes_file,
    render_boxes,
    save_directory,
    scale_boxes,
    synth_sample,
)


def flood_boxes(mask):
    """Reference: breadth-first flood fill over 4-neighbours."""
    h, w = mask.shape
    seen = np.zeros_like(mask, dtype=bool)
    boxes = []
    for r in range(h):
        for c in range(w):
            if not mask[r, c] or seen[r, c]:
                continue
            queue, pts = [(r, c)], []
            seen[r, c] = True
            while queue:
                y, x = queue.pop()
                pts.append((y, x))
                for dy, dx in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                    ny, nx = y + dy, x + dx
                    if 0 <= ny < h and 0 <= nx < w and mask[ny, nx] and not seen[ny, nx]:
                        seen[ny, nx] = True
                        queue.append((ny, nx))
            ys, xs = zip(*pts)
            boxes.append((min(ys), min(xs), max(ys), max(xs)))
    return sorted(boxes)


def test_mask_to_boxes_examples():
    m = np.zeros((10, 10), dtype=np.uint8)
    m[2:6, 3:8] = 1
    assert mask_to_boxes(m) == [(2, 3, 5, 7)]
    m = np.zeros((3, 3), dtype=np.uint8)
    m[0, 0] = m[2, 2] = 1
    assert mask_to_boxes(m) == [(0, 0, 0, 0), (2, 2, 2, 2)]
    m = np.zeros((7, 7), dtype=np.uint8)
    m[1:5, 1:3] = 1
    m[4, 1:6] = 1
    assert mask_to_boxes(m) == [(1, 1, 4, 5)]
    assert mask_to_boxes(np.zeros((4, 4))) == []


def test_diagonal_neighbours_are_separate():
    m = np.eye(4, dtype=np.uint8)
    assert len(mask_to_boxes(m)) == 4


def test_component_boxes_match_flood_fill(backend):
    rng = np.random.default_rng(0)
    for _ in range(100):
        h, w = rng.integers(1, 25, 2)
        m = (rng.random((h, w)) < rng.uniform(0.1, 0.7)).astype(np.uint8)
        assert sorted(backend.component_boxes(m)) == flood_boxes(m)
        assert mask_to_boxes(m) == flood_boxes(m)


@settings(deadline=None)
@given(st.lists(st.tuples(st.integers(0, 7), st.integers(0, 7), st.integers(1, 4), st.integers(1, 4)), max_size=6))
def test_round_trip_non_touching_boxes(cands):
    # keep boxes that do not touch (1-pixel gap) an already accepted one
    boxes, occ = [], np.zeros((16, 16), dtype=bool)
    for r, c, hh, ww in cands:
        r0, c0 = 2 * r, 2 * c
        r1, c1 = min(r0 + hh - 1, 15), min(c0 + ww - 1, 15)
        if occ[max(r0 - 1, 0) : r1 + 2, max(c0 - 1, 0) : c1 + 2].any():
            continue
        occ[r0 : r1 + 1, c0 : c1 + 1] = True
        boxes.append((r0, c0, r1, c1))
    assert mask_to_boxes(render_boxes(boxes, 16, 16)) == sorted(boxes)


def test_render_rejects_out_of_range():
    with pytest.raises(DimensionError):
        render_boxes([(0, 0, 4, 1)], 4, 4)


def test_scale_boxes_rounds_outward():
    assert scale_boxes([(0, 0, 95, 95)], (96, 96), (64, 64)) == [(0, 0, 63, 63)]
    assert scale_boxes([(10, 11, 20, 21)], (96, 96), (64, 64)) == [(6, 7, 13, 14)]
    assert scale_boxes([(3, 4, 5, 6)], (10, 10), (10, 10)) == [(3, 4, 5, 6)]


# synthetic data


def test_synth_is_deterministic_and_tight():
    cfg = SynthConfig(count=12, seed=7)
    a, b = generate_synthetic(cfg), generate_synthetic(cfg)
    for x, y in zip(a, b):
        assert np.array_equal(x.image, y.image) and np.array_equal(x.gt_mask, y.gt_mask)
        assert x.boxes == y.boxes
        assert x.boxes == mask_to_boxes(x.gt_mask)
        assert 1 <= len(x.boxes)
        assert x.image.dtype == np.float32 and x.image.shape == (3, 96, 96)
    # index-keyed: any sample can be regenerated alone
    assert np.array_equal(synth_sample(cfg, 5).image, a[5].image)


def test_synth_foreground_fraction():
    # 1000 seeds, one sample each
    fractions = [synth_sample(SynthConfig(count=1, seed=s, blob_scale_range=(0.2, 0.4)), 0).gt_mask.mean() for s in range(1000)]
    assert 0.02 <= np.mean(fractions) <= 0.30


@pytest.mark.parametrize(
    "kwargs",
    [dict(image_size=100), dict(blob_count_range=(2, 1)), dict(blob_scale_range=(0.5, 0.2)), dict(contrast=0), dict(count=-1)],
)
def test_synth_config_validation(kwargs):
    with pytest.raises(ConfigError):
        SynthConfig(**kwargs)


# augmentation


def _sample(h=10, w=10):
    gt = np.zeros((h, w), dtype=np.uint8)
    gt[2:6, 3:8] = 1
    img = np.random.default_rng(0).random((3, h, w)).astype(np.float32)
    return Sample(image=img, boxes=mask_to_boxes(gt), id="a", gt_mask=gt)


def test_augment_identity_and_hflip():
    s = _sample()
    same = apply_augment(s, False, False, 0)
    assert np.array_equal(same.image, s.image) and same.boxes == s.boxes
    flipped = apply_augment(s, True, False, 0)
    assert flipped.boxes == [(2, 2, 5, 6)]


@pytest.mark.parametrize("hflip", [False, True])
@pytest.mark.parametrize("vflip", [False, True])
@pytest.mark.parametrize("k", range(4))
def test_augment_keeps_boxes_tight(hflip, vflip, k):
    s = _sample(10, 14)
    s.gt_mask[7:9, 0:2] = 1
    s.boxes = mask_to_boxes(s.gt_mask)
    out = apply_augment(s, hflip, vflip, k)
    assert out.boxes == mask_to_boxes(out.gt_mask)
    assert out.gt_mask.sum() == s.gt_mask.sum()
    assert out.image.shape[1:] == out.gt_mask.shape


def test_augment_seeded():
    s = _sample()
    a, b = augment(s, 3), augment(s, 3)
    assert np.array_equal(a.image, b.image) and a.boxes == b.boxes


# directory loading


def test_directory_round_trip(tmp_path):
    samples = generate_synthetic(SynthConfig(count=4, seed=1))
    save_directory(tmp_path, samples)
    loaded = load_directory(tmp_path)
    assert [s.id for s in loaded] == [s.id for s in samples]
    for x, y in zip(samples, loaded):
        assert np.array_equal(x.image, y.image)
        assert np.array_equal(x.gt_mask, y.gt_mask)
        assert x.boxes == y.boxes
    assert loaded.report == []


def test_box_only_directory(tmp_path):
    samples = generate_synthetic(SynthConfig(count=3, seed=2))
    for s in samples:
        s.gt_mask = None
    save_directory(tmp_path, samples)
    assert not (tmp_path / "masks").exists()
    loaded = load_directory(tmp_path)
    assert len(loaded) == 3
    assert all(s.gt_mask is None for s in loaded)
    assert [s.boxes for s in loaded] == [s.boxes for s in samples]


def test_masks_without_boxes_file(tmp_path):
    samples = generate_synthetic(SynthConfig(count=3, seed=3))
    save_directory(tmp_path, samples)
    (tmp_path / "boxes.txt").unlink()
    loaded = load_directory(tmp_path)
    assert [s.boxes for s in loaded] == [mask_to_boxes(s.gt_mask) for s in samples]


def test_corrupt_and_unannotated_images_are_reported(tmp_path):
    samples = generate_synthetic(SynthConfig(count=3, seed=4))
    for s in samples:
        s.gt_mask = None
    save_directory(tmp_path, samples)
    (tmp_path / "images" / "zz_bad.png").write_bytes(b"not an image")
    Image.new("RGB", (96, 96)).save(tmp_path / "images" / "zz_unlabelled.png")
    loaded = load_directory(tmp_path)
    assert len(loaded) == 3
    assert len(loaded.report) == 2
    assert any("zz_bad" in r for r in loaded.report)
    assert any("zz_unlabelled" in r for r in loaded.report)


def test_boxes_file_format(tmp_path):
    p = tmp_path / "boxes.txt"
    p.write_text("a 2 0 0 1 1 3 3 4 4\nb 0\n")
    assert read_boxes_file(p) == {"a": [(0, 0, 1, 1), (3, 3, 4, 4)], "b": []}
    p.write_text("a 2 0 0 1 1\n")
    with pytest.raises(ConfigError):
        read_boxes_file(p)

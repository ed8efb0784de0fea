"""Seed-pinned desk-scale benchmark and supervision-mode comparisons."""
import logging
import time
from dataclasses import dataclass, replace

import numpy as np

from .data import SynthConfig, generate_synthetic
from .metrics import MetricRow, evaluate_counts, summarize
from .trainer import RunConfig, train

log = logging.getLogger(__name__)

ABLATION_MODES = ("naive_box", "m2b_only", "weak")
ABLATION_LABELS = {"naive_box": "Base", "m2b_only": "Base+M2B", "weak": "Base+M2B+SC"}
SUPERVISION_LABELS = {"full_gt": "gt", "naive_box": "box", "weak": "ours"}

# one object per image: whole-mask M2B merges several boxes into their cross product
BENCH_TRAIN = SynthConfig(count=800, image_size=96, blob_count_range=(1, 1), seed=1000)
BENCH_TEST = SynthConfig(count=200, image_size=96, blob_count_range=(1, 1), seed=2000)
BENCH_RUN = RunConfig(mode="weak", base_size=96, scale_set=(64, 96, 128), lr=1e-3, batch_size=16, epochs=20)


@dataclass
class ModeResult:
    mode: str
    seed: int
    row: MetricRow
    per_image: dict
    seconds: float
    state: object = None


def benchmark(train_cfg=BENCH_TRAIN, test_cfg=BENCH_TEST):
    return generate_synthetic(train_cfg), generate_synthetic(test_cfg)


def run_mode(mode, seed, train_set, test_set, base=BENCH_RUN, keep_state=False, **overrides):
    cfg = replace(base, mode=mode, seed=seed, **overrides)
    t0 = time.perf_counter()
    state = train(train_set, cfg)
    per_image = evaluate_counts(state, test_set)
    row = summarize(per_image, "test", mode)
    elapsed = time.perf_counter() - t0
    log.info("%s seed=%d dice=%.4f iou=%.4f (%.1fs)", mode, seed, row.dice, row.iou, elapsed)
    return ModeResult(mode, seed, row, per_image, elapsed, state if keep_state else None)


def compare_modes(modes, seeds, train_set, test_set, base=BENCH_RUN, **overrides):
    """Train every (mode, seed) pair with an identical budget."""
    return {
        mode: [run_mode(mode, seed, train_set, test_set, base, **overrides) for seed in seeds]
        for mode in modes
    }


def median_dice(results):
    return float(np.median([r.row.dice for r in results]))


def median_rows(results, labels):
    """One MetricRow per mode with the median Dice/IoU over seeds."""
    rows = []
    for mode, runs in results.items():
        rows.append(
            MetricRow(
                "test",
                labels.get(mode, mode),
                float(np.median([r.row.dice for r in runs])),
                float(np.median([r.row.iou for r in runs])),
                runs[0].row.n_images,
            )
        )
    return rows

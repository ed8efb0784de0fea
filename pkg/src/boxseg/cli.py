"""Command-line entry point: ``boxseg {synth,train,eval,ablate,predict}``."""
import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import data, experiments
from .errors import ConfigError, DimensionError
from .metrics import evaluate, write_metric_csv
from .trainer import RunConfig, TrainingDiverged, infer, load_checkpoint, train

log = logging.getLogger("boxseg")


def _parse_value(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _run_config(args, base=None):
    """Config file (or ``base``), then ``--set`` items, then explicit flags."""
    if args.config:
        d = RunConfig.from_file(args.config).to_dict()
    else:
        d = base.to_dict() if base is not None else {}
    for item in args.set or ():
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        d[key.replace("-", "_")] = _parse_value(value)
    for key in ("mode", "epochs", "seed", "lr", "batch_size"):
        value = getattr(args, key, None)
        if value is not None:
            d[key] = value
    return RunConfig.from_dict(d)


def _add_run_options(p, mode=True):
    p.add_argument("--config", help="run-config JSON file")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a run-config field (repeatable)")
    if mode:
        p.add_argument("--mode", choices=["full_gt", "naive_box", "m2b_only", "weak"])
    p.add_argument("--epochs", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--batch-size", dest="batch_size", type=int)


def cmd_synth(args):
    cfg = data.SynthConfig(
        count=args.count,
        image_size=args.image_size,
        blob_count_range=tuple(args.blob_count),
        blob_scale_range=tuple(args.blob_scale),
        texture_noise=args.texture_noise,
        contrast=args.contrast,
        seed=args.seed,
    )
    samples = data.generate_synthetic(cfg)
    if args.boxes_only:
        for s in samples:
            s.gt_mask = None
    out = Path(args.out)
    data.save_directory(out, samples)
    (out / "synth_config.json").write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n")
    print(f"wrote {len(samples)} samples to {out}")


def cmd_train(args):
    cfg = _run_config(args)
    dataset = data.load_directory(args.data)
    val = data.load_directory(args.val) if args.val else None
    state = train(dataset, cfg, out_dir=args.out, val_dataset=val)
    print(f"trained {state.epoch} epochs; checkpoints in {args.out}")


def cmd_eval(args):
    state = load_checkpoint(args.checkpoint)
    dataset = data.load_directory(args.data)
    row = evaluate(state, dataset, split=args.split, mode=state.cfg.mode)
    if args.out:
        write_metric_csv(args.out, [row])
    print(f"{row.dataset_split},{row.mode},{row.dice:.6f},{row.iou:.6f},{row.n_images}")


def cmd_ablate(args):
    base = _run_config(args, experiments.BENCH_RUN)
    if args.train:
        train_set = data.load_directory(args.train)
        test_set = data.load_directory(args.test or args.train)
    else:
        train_set = data.generate_synthetic(replace(experiments.BENCH_TRAIN, count=args.train_count))
        test_set = data.generate_synthetic(replace(experiments.BENCH_TEST, count=args.test_count))
    if args.table == "ablation":
        modes, labels = experiments.ABLATION_MODES, experiments.ABLATION_LABELS
    else:
        modes, labels = tuple(experiments.SUPERVISION_LABELS), experiments.SUPERVISION_LABELS
    results = experiments.compare_modes(modes, args.seeds, train_set, test_set, base)
    rows = experiments.median_rows(results, labels)
    if args.out:
        write_metric_csv(args.out, rows)
    print("mode,dice,iou,n")
    for row in rows:
        print(f"{row.mode},{row.dice:.6f},{row.iou:.6f},{row.n_images}")


def _image_paths(folder):
    folder = Path(folder)
    if (folder / "images").is_dir():
        folder = folder / "images"
    return sorted(p for p in folder.iterdir() if p.suffix.lower() in data.IMAGE_SUFFIXES)


def cmd_predict(args):
    state = load_checkpoint(args.checkpoint)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    n = 0
    for path in _image_paths(args.images):
        try:
            image = data.read_image(path)
        except Exception as exc:
            log.warning("skipping %s: %s", path.name, exc.__class__.__name__)
            continue
        prob = infer(image, state)
        data.write_mask(out / f"{path.stem}.png", prob >= args.threshold)
        n += 1
    print(f"wrote {n} masks to {out}")


def build_parser():
    parser = argparse.ArgumentParser(prog="boxseg", description="Box-supervised segmentation toolkit")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic blob dataset directory")
    p.add_argument("--out", required=True)
    p.add_argument("--count", type=int, default=100)
    p.add_argument("--image-size", type=int, default=96)
    p.add_argument("--blob-count", type=int, nargs=2, default=[1, 1], metavar=("MIN", "MAX"))
    p.add_argument("--blob-scale", type=float, nargs=2, default=[0.2, 0.4], metavar=("MIN", "MAX"))
    p.add_argument("--texture-noise", type=float, default=0.05)
    p.add_argument("--contrast", type=float, default=0.25)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--boxes-only", action="store_true", help="omit masks/ (weak-label dataset)")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train from a run-config file plus overrides")
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--val", help="validation dataset directory (needs masks)")
    p.add_argument("--out", required=True, help="output directory for checkpoints and metrics.csv")
    _add_run_options(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="Dice/IoU of a checkpoint on a masked dataset")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--split", default="test")
    p.add_argument("--out", help="CSV file (split,mode,dice,iou,n)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="compare supervision modes with shared seeds")
    p.add_argument("--table", choices=["ablation", "supervision"], default="ablation")
    p.add_argument("--train", help="training dataset directory (default: built-in synthetic benchmark)")
    p.add_argument("--test", help="test dataset directory")
    p.add_argument("--train-count", type=int, default=800)
    p.add_argument("--test-count", type=int, default=200)
    p.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    p.add_argument("--out", help="CSV file for the comparison table")
    _add_run_options(p, mode=False)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("predict", help="write thresholded masks for a folder of images")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--images", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--threshold", type=float, default=0.5)
    p.set_defaults(func=cmd_predict)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        args.func(args)
    except (ConfigError, DimensionError) as exc:
        print(f"boxseg {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except TrainingDiverged as exc:
        print(f"boxseg {args.command}: training diverged: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

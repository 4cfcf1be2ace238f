"""Command-line entry points: train, eval, predict, bench.

Exit codes are fixed: 0 success, 1 usage error, 2 data error, 3 archive
error. Per-face prediction lines are
``frame,x,y,w,h,emotion,emotion_conf,gender,gender_conf,latency_ms``.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import data as dio
from .detect import load_cascade
from .errors import (ArchiveError, DataError, DecodeError, EmogenError,
                     LabelError, ParseError, UsageError)
from .metrics import evaluate
from .models import (MINI_XCEPTION, SIMPLE_CNN, Model, build_emotion_ensemble,
                     build_mini_xception, build_simple_cnn4)
from .optim import TASK_CLASSES, TrainConfig
from .pipeline import DetectorParams, bench, draw_box, process_frame
from .train import train_epochs
from .weights import load_model, save_model

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_ARCHIVE = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _build_parser() -> _Parser:
    p = _Parser(prog="emogen", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train a model and write a weight archive")
    t.add_argument("--task", required=True, choices=("emotion", "gender"))
    t.add_argument("--data", required=True)
    t.add_argument("--model", choices=("ensemble", "mini-xception", "simple-cnn"))
    t.add_argument("--epochs", type=int, default=100)
    t.add_argument("--batch", type=int, default=32)
    t.add_argument("--lr", type=float, default=1e-3)
    t.add_argument("--seed", type=int, default=42)
    t.add_argument("--out", required=True)
    t.add_argument("--trace", help="write the per-epoch CSV here instead of stdout")
    t.add_argument("--limit", type=int, help="cap the number of training samples")

    e = sub.add_parser("eval", help="evaluate an archive on a dataset")
    e.add_argument("--weights", required=True)
    e.add_argument("--task", required=True, choices=("emotion", "gender"))
    e.add_argument("--data", required=True)
    e.add_argument("--split", choices=("train", "test", "all"), default="all")

    pr = sub.add_parser("predict", help="detect faces and classify emotion + gender")
    pr.add_argument("--weights-emotion", required=True)
    pr.add_argument("--weights-gender", required=True)
    pr.add_argument("--cascade", required=True)
    pr.add_argument("--input", required=True,
                    help="PGM file, directory of PGM files, or - for a stdin frame stream")
    pr.add_argument("--annotate", help="directory for box-outlined PGM copies")
    pr.add_argument("--scale-factor", type=float, default=1.1)
    pr.add_argument("--min-neighbors", type=int, default=3)
    pr.add_argument("--min-size", type=int, default=30)

    b = sub.add_parser("bench", help="latency benchmark on synthetic frames")
    b.add_argument("--weights-emotion", required=True)
    b.add_argument("--weights-gender", required=True)
    b.add_argument("--cascade", required=True)
    b.add_argument("--frames", type=int, default=20)
    b.add_argument("--size", default="640x480")
    b.add_argument("--seed", type=int, default=0)
    return p


# ---------------------------------------------------------------------------
# dataset loading helpers


def _read_model(path):
    try:
        return load_model(path)
    except FileNotFoundError as exc:
        raise ArchiveError(f"cannot read archive: {exc}") from None


def _load_emotion_data(path, split_seed):
    samples = dio.load_fer_csv(path)
    train = [s for s in samples if s.usage == "Training"]
    val = [s for s in samples if s.usage != "Training"]
    if not train or not val:
        raise DataError("FER file must contain Training and non-Training rows")
    return dio.Dataset.from_fer(train), dio.Dataset.from_fer(val)


def _load_gender_data(path, split_seed):
    rows = dio.load_gender_manifest(path)
    if not rows:
        raise DataError("gender manifest has no usable rows")
    root = Path(path).parent
    faces, labels = [], []
    for row in rows:
        img_path = Path(row.image_path)
        if not img_path.is_absolute():
            img_path = root / img_path
        img = dio.decode_image(img_path)
        if img.shape != (dio.FACE_SIZE, dio.FACE_SIZE):
            img = np.clip(dio.resize_bilinear(img, dio.FACE_SIZE, dio.FACE_SIZE),
                          0, 255).astype(np.uint8)
        faces.append(img)
        labels.append(row.gender)
    faces = np.stack(faces)
    labels = np.asarray(labels, dtype=np.int64)
    order = np.random.default_rng(split_seed).permutation(len(rows))
    cut = max(1, int(len(rows) * 0.8))
    if cut == len(rows):
        cut = len(rows) - 1 if len(rows) > 1 else len(rows)
    tr, va = order[:cut], order[cut:]
    if len(va) == 0:
        tr = va = order
    return (dio.Dataset.from_arrays(faces[tr], labels[tr]),
            dio.Dataset.from_arrays(faces[va], labels[va]))


def _balanced_subset(ds: dio.Dataset, limit: int, seed: int) -> dio.Dataset:
    rng = np.random.default_rng(seed)
    classes = np.unique(ds.labels)
    per = max(1, limit // len(classes))
    picks = []
    for c in classes:
        idx = np.nonzero(ds.labels == c)[0]
        take = min(per, len(idx))
        picks.append(rng.choice(idx, size=take, replace=False))
    sel = np.sort(np.concatenate(picks))
    return dio.Dataset(ds.images[sel], ds.labels[sel])


# ---------------------------------------------------------------------------
# subcommands


def cmd_train(args) -> int:
    model_name = args.model or ("ensemble" if args.task == "emotion" else "mini-xception")
    if args.task == "gender" and model_name == "ensemble":
        raise UsageError("gender classification uses the mini-xception model alone; "
                         "--model ensemble is not valid with --task gender")
    cfg = TrainConfig(task=args.task, epochs=args.epochs, batch_size=args.batch,
                      learning_rate=args.lr, seed=args.seed)
    if args.task == "emotion":
        train_ds, val_ds = _load_emotion_data(args.data, cfg.seed)
    else:
        train_ds, val_ds = _load_gender_data(args.data, cfg.seed)
    if args.limit:
        train_ds = _balanced_subset(train_ds, args.limit, cfg.seed)
    k = TASK_CLASSES[args.task]
    if model_name == "ensemble":
        model = build_emotion_ensemble(cfg.seed)
    elif model_name == "mini-xception":
        model = Model({MINI_XCEPTION: build_mini_xception(k, cfg.seed)})
    else:
        model = Model({SIMPLE_CNN: build_simple_cnn4(k, cfg.seed)})
    if args.trace:
        with open(args.trace, "w", encoding="utf-8") as fh:
            train_epochs(model, train_ds, val_ds, cfg,
                         progress=lambda line: fh.write(line + "\n"))
    else:
        train_epochs(model, train_ds, val_ds, cfg, progress=print)
    save_model(model, args.out)
    return EXIT_OK


def cmd_eval(args) -> int:
    model = _read_model(args.weights)
    k = TASK_CLASSES[args.task]
    if model.class_count != k:
        raise ArchiveError(f"archive has {model.class_count} classes, task "
                           f"{args.task!r} needs {k}")
    if args.task == "emotion":
        samples = dio.load_fer_csv(args.data)
        if args.split == "train":
            samples = [s for s in samples if s.usage == "Training"]
        elif args.split == "test":
            samples = [s for s in samples if s.usage != "Training"]
        if not samples:
            raise DataError(f"no rows in split {args.split!r}")
        ds = dio.Dataset.from_fer(samples)
        names = dio.EMOTIONS
    else:
        train_ds, val_ds = _load_gender_data(args.data, 0)
        ds = val_ds if args.split == "test" else \
            (train_ds if args.split == "train"
             else dio.Dataset(np.concatenate([train_ds.images, val_ds.images]),
                              np.concatenate([train_ds.labels, val_ds.labels])))
        names = dio.GENDERS
    print(evaluate(model, ds).render(names))
    return EXIT_OK


def _iter_frames(spec):
    """Yield (frame_id, image) from a PGM path, a directory, or stdin ('-')."""
    if spec == "-":
        for i, img in enumerate(dio.read_pgm_stream(sys.stdin.buffer)):
            yield str(i), img
        return
    path = Path(spec)
    if path.is_dir():
        for p in sorted(path.glob("*.pgm")):
            yield p.stem, dio.decode_image(p)
    else:
        yield path.stem, dio.decode_image(path)


def cmd_predict(args) -> int:
    emotion_model = _read_model(args.weights_emotion)
    gender_model = _read_model(args.weights_gender)
    if emotion_model.class_count != 7:
        raise ArchiveError("emotion archive must have 7 classes")
    if gender_model.class_count != 2:
        raise ArchiveError("gender archive must have 2 classes")
    cascade = load_cascade(args.cascade)
    params = DetectorParams(args.scale_factor, args.min_neighbors, args.min_size)
    annotate_dir = Path(args.annotate) if args.annotate else None
    if annotate_dir:
        annotate_dir.mkdir(parents=True, exist_ok=True)
    for frame_id, img in _iter_frames(args.input):
        try:
            result = process_frame(img, cascade, emotion_model, gender_model, params)
        except EmogenError as exc:
            print(f"warning: frame {frame_id}: {exc}", file=sys.stderr)
            continue
        for face in result.faces:
            b = face.box
            print(f"{frame_id},{b.x},{b.y},{b.w},{b.h},"
                  f"{face.emotion.name},{face.emotion_probs.max():.4f},"
                  f"{face.gender},{face.gender_probs.max():.4f},"
                  f"{result.total_ms:.1f}")
        if annotate_dir:
            out = img
            for face in result.faces:
                out = draw_box(out, face.box)
            dio.write_pgm(annotate_dir / f"{frame_id}.pgm", out)
    return EXIT_OK


def cmd_bench(args) -> int:
    emotion_model = _read_model(args.weights_emotion)
    gender_model = _read_model(args.weights_gender)
    cascade = load_cascade(args.cascade)
    try:
        w, h = (int(v) for v in args.size.lower().split("x"))
    except ValueError:
        raise UsageError(f"--size must look like 640x480, got {args.size!r}") from None
    report = bench(emotion_model, gender_model, cascade, args.frames, (w, h),
                   seed=args.seed)
    print(f"frames: {report['frames']}  size: {w}x{h}")
    for stage in ("detect", "classify", "total"):
        s = report[stage]
        print(f"{stage:>8}: min {s['min']:8.1f} ms   median {s['median']:8.1f} ms   "
              f"p95 {s['p95']:8.1f} ms")
    return EXIT_OK


def main(argv=None) -> int:
    try:
        args = _build_parser().parse_args(argv)
        handler = {"train": cmd_train, "eval": cmd_eval,
                   "predict": cmd_predict, "bench": cmd_bench}[args.command]
        return handler(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, ParseError, DecodeError, LabelError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ArchiveError as exc:
        print(f"archive error: {exc}", file=sys.stderr)
        return EXIT_ARCHIVE
    except FileNotFoundError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


def entry():
    sys.exit(main())


if __name__ == "__main__":
    entry()

"""Command-line front end.

Subcommands: ``convert``, ``decompose``, ``train``, ``infer``, ``eval`` and
``bench``.  Exit status is 0 on success, 1 when a computation fails and 2
for usage, configuration or file-format errors.  ``--threads`` defaults to
the ``EIGENSR_THREADS`` environment variable.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np

from .bench import BENCH_COLUMNS, run_bench
from .cube import CubeFormatError, HsiCube, matrix_view, read_cube, write_cube, write_npy
from .finetune import TrainConfig, finetune
from .inference import InferenceConfig, run
from .metrics import evaluate
from .speclin import channel_cutoff, default_rank, project, spectral_svd
from .srmodel import BicubicSR, CheckpointError, ScaleMismatchError, TinyNet, load_checkpoint, load_weights
from .synthetic import band_limited_cube

log = logging.getLogger("eigensr")

EXIT_OK, EXIT_COMPUTE, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    """Bad arguments, configuration or input files; exit status 2."""


def _threads(value):
    if value is None:
        value = os.environ.get("EIGENSR_THREADS", "1")
    try:
        n = int(value)
    except ValueError:
        raise UsageError(f"thread count must be an integer, got {value!r}") from None
    if n < 1:
        raise UsageError(f"thread count must be >= 1, got {n}")
    return n


def _existing(path):
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"no such file: {path}")
    return p


def _writable(path):
    p = Path(path)
    if not p.parent.is_dir():
        raise UsageError(f"output directory does not exist: {p.parent}")
    return p


def _load_config(path):
    if path is None:
        return {}
    try:
        values = json.loads(_existing(path).read_text())
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: invalid JSON: {exc}") from None
    if not isinstance(values, dict):
        raise UsageError(f"{path}: config must be a JSON object")
    return values


def _merge(flags: dict, config: dict) -> dict:
    # flags given on the command line win over the config file
    merged = dict(config)
    merged.update({k: v for k, v in flags.items() if v is not None})
    return merged


def _dump_json(obj, path):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


# --------------------------------------------------------------------------
# subcommands


def cmd_convert(args):
    src, dst = _existing(args.input), _writable(args.output)
    cube = read_cube(src)
    if dst.suffix.lower() == ".npy":
        write_npy(cube, dst)
    else:
        write_cube(cube, dst)
    log.info("wrote %s %s", dst, cube.shape)


def cmd_decompose(args):
    src = _existing(args.input)
    out = Path(args.output)
    cube = read_cube(src)
    L = cube.bands
    rank = default_rank(L) if args.rank is None else args.rank
    if not 1 <= rank <= L:
        raise UsageError(f"--rank must be in [1, {L}], got {rank}")
    if not 0.0 < args.tau <= 1.0:
        raise UsageError(f"--tau must be in (0, 1], got {args.tau}")
    out.mkdir(parents=True, exist_ok=True)

    dec = spectral_svd(matrix_view(cube))
    p = channel_cutoff(dec.singular_values, args.tau)
    with open(out / "sigma.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "sigma"])
        for j, s in enumerate(dec.singular_values, start=1):
            writer.writerow([j, repr(float(s))])
    # U is stored as an L x 1 x L cube: band = row of U, pixel = column
    write_cube(HsiCube(dec.basis[:, None, :]), out / "basis.hsc")
    E = project(cube.data, dec, rank)
    for k in range(rank):
        write_cube(HsiCube(E.channel(k)[None]), out / f"eigenimage_{k + 1:03d}.hsc")
    _dump_json({"bands": L, "rank": rank, "tau": args.tau, "cutoff": p, "height": cube.height, "width": cube.width}, out / "summary.json")
    print(f"bands={L} rank={rank} tau={args.tau} cutoff={p}")


def _train_config(args):
    flags = {f.name: getattr(args, f.name, None) for f in fields(TrainConfig)}
    try:
        cfg = TrainConfig.from_dict(_merge(flags, _load_config(args.config)))
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid training configuration: {exc}") from None
    return cfg, args.data or [], args.init, args.synthetic


def cmd_train(args):
    cfg, data, init, synthetic = _train_config(args)
    if not data and not synthetic:
        raise UsageError("no training data: give cube files with --data or a count with --synthetic")
    paths = [_existing(p) for p in data]
    if init is not None:
        _existing(init)
    if args.resume is not None:
        _existing(args.resume)
    out = Path(args.output)

    cubes = [read_cube(p) for p in paths]
    if synthetic:
        rng = np.random.default_rng(cfg.seed)
        cubes += [band_limited_cube(31, 64, 64, rng=rng) for _ in range(int(synthetic))]
    model = load_weights(init, cfg.scale) if init is not None else TinyNet(cfg.scale, seed=cfg.seed)
    if model.kind != "tinynet":
        raise UsageError(f"{init}: only a tinynet checkpoint can be fine-tuned")
    out.mkdir(parents=True, exist_ok=True)
    cfg.to_json(out / "config.json")
    result = finetune(model, cubes, cfg, out_dir=out, resume=args.resume)
    if result.log:
        print(f"epochs={len(result.log)} final_loss={result.log[-1][1]:.6g} model={out / 'model.esrw'}")


def _model(spec, scale):
    if spec == "bicubic":
        if scale is None:
            raise UsageError("--scale is required with --model bicubic")
        return BicubicSR(scale)
    op, _, _ = load_checkpoint(_existing(spec), scale)
    return op


def cmd_infer(args):
    src, dst = _existing(args.input), _writable(args.output)
    config = _load_config(args.config)
    flags = {"mode": args.mode, "rank": args.rank, "iterations": args.iters, "weight": args.weight, "scale": args.scale}
    values = _merge(flags, config)
    unknown = set(values) - {f.name for f in fields(InferenceConfig)} - {"model"}
    if unknown:
        raise UsageError(f"unknown inference options: {sorted(unknown)}")
    spec = args.model or values.pop("model", None)
    values.pop("model", None)
    if spec is None:
        raise UsageError("--model is required (a checkpoint path or 'bicubic')")
    model = _model(spec, values.get("scale"))
    values.setdefault("scale", model.scale)
    cube = read_cube(src)
    try:
        cfg = InferenceConfig(**values).resolve(cube.bands)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid inference configuration: {exc}") from None
    result = run(cube, model, cfg, workers=_threads(args.threads))
    if dst.suffix.lower() == ".npy":
        write_npy(result, dst)
    else:
        write_cube(result, dst)
    log.info("mode=%s rank=%d iterations=%d weight=%g", cfg.mode, cfg.rank, cfg.iterations, cfg.weight)


def cmd_eval(args):
    pred, ref = read_cube(_existing(args.pred)), read_cube(_existing(args.ref))
    if pred.shape != ref.shape:
        raise UsageError(f"geometry mismatch: {pred.shape} vs {ref.shape}")
    report = evaluate(pred, ref, args.peak).to_dict()
    if args.output is not None:
        _dump_json(report, _writable(args.output))
    print(json.dumps({k: report[k] for k in ("psnr", "ssim", "sam", "peak")}))


def cmd_bench(args):
    if args.rank is not None and not 1 <= args.rank <= args.bands:
        raise UsageError(f"--rank must be in [1, {args.bands}], got {args.rank}")
    if args.reps < 1 or args.size < 1 or args.iters < 1:
        raise UsageError("--reps, --size and --iters must be positive")
    if args.scale < 2:
        raise UsageError(f"--scale must be >= 2, got {args.scale}")
    rows = run_bench(
        bands=args.bands,
        rank=args.rank,
        iterations=args.iters,
        size=args.size,
        reps=args.reps,
        scale=args.scale,
        mode=args.mode,
        seed=args.seed,
        workers=_threads(args.threads),
    )
    fh = open(_writable(args.output), "w", newline="") if args.output else sys.stdout
    try:
        writer = csv.DictWriter(fh, fieldnames=BENCH_COLUMNS, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
    finally:
        if fh is not sys.stdout:
            fh.close()


# --------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="random seed (train, bench)")
    common.add_argument("--threads", default=None, help="worker threads; default $EIGENSR_THREADS or 1")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="eigensr", description="Hyperspectral super-resolution in the eigenimage domain.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("convert", parents=[common], help="convert between NPY and .hsc")
    p.add_argument("input")
    p.add_argument("output", help="'.npy' suffix writes NPY, anything else .hsc")
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("decompose", parents=[common], help="spectral basis, singular values and eigenimages")
    p.add_argument("input")
    p.add_argument("output", help="output directory")
    p.add_argument("--rank", type=int, default=None, help="eigenimages to write (default ceil(L/2))")
    p.add_argument("--tau", type=float, default=0.97, help="energy threshold for the channel cutoff")
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("train", parents=[common], help="fine-tune a tinynet on eigenimages")
    p.add_argument("output", help="output directory for checkpoints and the loss log")
    p.add_argument("--config", help="JSON file with TrainConfig fields; flags override it")
    p.add_argument("--data", nargs="+", help="training cubes (.hsc or .npy)")
    p.add_argument("--synthetic", type=int, default=None, help="add this many synthetic 31x64x64 cubes")
    p.add_argument("--init", help="checkpoint to start from (default: fresh weights)")
    p.add_argument("--resume", help="checkpoint written by an earlier run with the same config")
    p.add_argument("--scale", type=int)
    p.add_argument("--tau", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--learning-rate", dest="learning_rate", type=float)
    p.add_argument("--patch-size", dest="patch_size", type=int)
    p.add_argument("--checkpoint-every", dest="checkpoint_every", type=int)
    p.add_argument("--ema-decay", dest="ema_decay", type=float, help="weight averaging per step (0 disables)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("infer", parents=[common], help="super-resolve a low-resolution cube")
    p.add_argument("input")
    p.add_argument("output", help="'.npy' suffix writes NPY, anything else .hsc")
    p.add_argument("--model", help="checkpoint path or 'bicubic'")
    p.add_argument("--config", help="JSON file with inference options")
    p.add_argument("--mode", choices=("alpha", "beta"))
    p.add_argument("--rank", type=int)
    p.add_argument("--iters", type=int)
    p.add_argument("--lambda", dest="weight", type=float, help="combination weight (default 0.8 at scale 2, else 0.4)")
    p.add_argument("--scale", type=int, help="default: read from the checkpoint")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("eval", parents=[common], help="PSNR, SSIM and SAM against a reference")
    p.add_argument("pred")
    p.add_argument("ref")
    p.add_argument("--output", help="write the full report as JSON")
    p.add_argument("--peak", type=float, default=None, help="peak value (default: reference maximum)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", parents=[common], help="eigenimage SR vs band-by-band cost")
    p.add_argument("--bands", type=int, default=102)
    p.add_argument("--rank", type=int, default=None, help="default ceil(bands/2)")
    p.add_argument("--iters", type=int, default=5)
    p.add_argument("--size", type=int, default=64, help="LR height and width")
    p.add_argument("--reps", type=int, default=3)
    p.add_argument("--scale", type=int, default=2)
    p.add_argument("--mode", choices=("alpha", "beta"), default="alpha")
    p.add_argument("--output", help="CSV path (default stdout)")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.command == "bench" and args.seed is None:
        args.seed = 0
    try:
        _threads(args.threads)
        args.func(args)
    except (UsageError, CubeFormatError, CheckpointError, ScaleMismatchError) as exc:
        print(f"eigensr {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001 - reported, not swallowed
        log.debug("computation failed", exc_info=True)
        print(f"eigensr {args.command}: computation failed: {exc}", file=sys.stderr)
        return EXIT_COMPUTE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

"""Command line: ``fingerunet {gen-data,train,enhance,eval}``.

Exit codes: 0 success, 1 runtime or data failure, 2 usage error. Every
command prints its resolved configuration (JSON) before doing any work.
``--config FILE`` loads a JSON object whose keys mirror the long flag names
(dashes become underscores); flags given on the command line win.
"""
import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from .checkpoint import CheckpointError, checkpoint_load
from .imageio import FormatError, read_pgm, write_orient, write_pgm
from .losses import LossWeights, orientation_decode
from .metrics import image_metrics, mean_report
from .model import ConfigError, ModelConfig, build_model, check_divisible
from .synth.dataset import DatasetError, load_dataset, load_sample, make_dataset, sample_dirs
from .tensor import ShapeError, Tensor
from .train import AugmentRanges, TrainConfig, Trainer, TrainingDiverged


class UsageError(Exception):
    pass


def _size(text):
    try:
        h, w = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"size must look like HxW, got {text!r}")
    if h < 32 or w < 32:
        raise argparse.ArgumentTypeError(f"size must be at least 32x32, got {text!r}")
    return [h, w]


def _severity(text):
    try:
        lo, hi = (float(v) for v in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"severity must look like lo:hi, got {text!r}")
    if not 0 <= lo <= hi <= 1:
        raise argparse.ArgumentTypeError(f"severity range must satisfy 0 <= lo <= hi <= 1, got {text!r}")
    return [lo, hi]


def _weights(text):
    try:
        w = LossWeights.parse(text)
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e))
    return [w.lambda_r, w.lambda_m, w.lambda_o]


def _heads(text):
    return [h.strip() for h in text.split(",") if h.strip()]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fingerunet", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-data", help="write a synthetic dataset")
    g.add_argument("--config")
    g.add_argument("--out", required=True)
    g.add_argument("--count", type=int, default=100)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--size", type=_size, default=[64, 64], help="HxW (default 64x64)")
    g.add_argument("--severity", type=_severity, default=[0.2, 0.8], help="lo:hi in [0, 1]")

    t = sub.add_parser("train", help="train a model on a dataset")
    t.add_argument("--config")
    t.add_argument("--data", required=True)
    t.add_argument("--out-ckpt", required=True)
    t.add_argument("--steps", type=int, default=2000, help="steps to run in this invocation")
    t.add_argument("--batch", type=int, default=4)
    t.add_argument("--lr", type=float, default=0.001)
    t.add_argument("--lambda", dest="lambda_", type=_weights, default=[0.8, 0.1, 0.1], help="r,m,o")
    t.add_argument("--no-wa", action="store_true", help="max pooling instead of wavelet attention")
    t.add_argument("--no-ds", action="store_true", help="standard instead of depthwise separable conv")
    t.add_argument("--no-bn", action="store_true")
    t.add_argument("--heads", type=_heads, default=["enhancement", "minutia", "orientation"])
    t.add_argument("--depth", type=int, default=4)
    t.add_argument("--base-channels", type=int, default=16)
    t.add_argument("--recon-loss", choices=["l1", "l2"], default="l1")
    t.add_argument("--no-augment", action="store_true")
    t.add_argument("--resume", help="checkpoint to continue from")
    t.add_argument("--history", help="CSV history path (default: <out-ckpt>.csv)")
    t.add_argument("--ckpt-interval", type=int, default=500)
    t.add_argument("--eval-interval", type=int, default=50)
    t.add_argument("--seed", type=int, default=0)

    e = sub.add_parser("enhance", help="enhance PGM images with a trained model")
    e.add_argument("--config")
    e.add_argument("--ckpt", required=True)
    e.add_argument("--in", dest="inp", required=True, help="PGM file or directory of PGMs")
    e.add_argument("--out", required=True)
    e.add_argument("--emit-minutiae", action="store_true")
    e.add_argument("--emit-orientation", action="store_true")

    v = sub.add_parser("eval", help="SSIM/PSNR/RMSE of enhanced vs clean images")
    v.add_argument("--config")
    v.add_argument("--ckpt")
    v.add_argument("--data", required=True)
    v.add_argument("--report", required=True)
    v.add_argument("--identity", action="store_true", help="score clean against itself (no model)")
    return p


def parse(argv):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        try:
            overrides = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as e:
            parser.error(f"cannot read config {args.config}: {e}")
        sub = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest for a in sub._actions}
        alias = {"lambda": "lambda_", "in": "inp"}
        mapped = {}
        for k, val in overrides.items():
            dest = alias.get(k, k.replace("-", "_"))
            if dest not in known or dest in ("help", "config"):
                parser.error(f"unknown config key {k!r} for {args.command}")
            mapped[dest] = val
        sub.set_defaults(**mapped)
        for a in sub._actions:
            if a.dest in mapped:
                a.required = False
        args = parser.parse_args(argv)
    return args


def _print_config(args):
    d = {k: v for k, v in vars(args).items() if k != "config"}
    print(json.dumps({"resolved_config": d}, sort_keys=True, default=str), flush=True)


# --- commands ------------------------------------------------------------------------

def cmd_gen_data(args) -> int:
    make_dataset(args.count, args.seed, args.out, tuple(args.size), tuple(args.severity))
    print(f"manifest: {Path(args.out) / 'manifest.json'}")
    return 0


def cmd_train(args) -> int:
    samples = load_dataset(args.data)
    h, w = samples[0].shape
    cfg = TrainConfig(
        data=args.data, steps=args.steps, batch_size=args.batch, lr=args.lr,
        weights=LossWeights(*args.lambda_), recon_loss=args.recon_loss,
        augment=AugmentRanges(enabled=not args.no_augment),
        checkpoint_path=args.out_ckpt, checkpoint_interval=args.ckpt_interval,
        eval_interval=args.eval_interval, history_path=args.history or str(Path(args.out_ckpt).with_suffix(".csv")),
        seed=args.seed,
    )
    if args.resume:
        ckpt = checkpoint_load(args.resume)
        model = ckpt.build()
        check_divisible(h, w, model.cfg.depth)
        trainer = Trainer(model, cfg, samples, ckpt.adam, ckpt.step)
    else:
        mcfg = ModelConfig(depth=args.depth, base_channels=args.base_channels, use_wa=not args.no_wa,
                           use_ds=not args.no_ds, use_bn=not args.no_bn, heads=tuple(args.heads),
                           input_h=h, input_w=w, seed=args.seed)
        trainer = Trainer(build_model(mcfg), cfg, samples)
    start = trainer.step
    history = trainer.run(start + args.steps)
    last = history[-1].losses.as_dict() if history else {}
    print(f"trained steps {start + 1}..{trainer.step}; final {json.dumps(last, sort_keys=True)}")
    print(f"checkpoint: {args.out_ckpt}; history: {cfg.history_path}")
    return 0


def _inputs(path: Path):
    if path.is_dir():
        files = sorted(p for p in path.iterdir() if p.suffix.lower() == ".pgm")
        if not files:
            raise FormatError(f"{path}: no .pgm files found")
        return files
    if not path.exists():
        raise FormatError(f"{path}: no such file")
    return [path]


def cmd_enhance(args) -> int:
    ckpt = checkpoint_load(args.ckpt)
    model = ckpt.build()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    m = 2 ** model.cfg.depth
    for f in _inputs(Path(args.inp)):
        img = read_pgm(f)
        h, w = img.shape
        if h % m or w % m:
            raise ConfigError(f"{f.name}: dims {h}x{w} must be divisible by {m} (2**depth) for this checkpoint")
        res = model.forward(Tensor(img[None, None].astype(np.float32)), train=False, strict=False)
        stem = f.stem
        write_pgm(out / f"{stem}.enhanced.pgm", res.enhanced.data[0, 0])
        if args.emit_minutiae and res.minutia_map is not None:
            write_pgm(out / f"{stem}.minutiae.pgm", res.minutia_map.data[0, 0])
        if args.emit_orientation and res.orientation is not None:
            write_orient(out / f"{stem}.orient.bin", orientation_decode(res.orientation.data[0]))
        print(f"wrote {out / (stem + '.enhanced.pgm')}")
    return 0


def cmd_eval(args) -> int:
    if not args.identity and not args.ckpt:
        raise UsageError("eval needs --ckpt unless --identity is given")
    model = None if args.identity else checkpoint_load(args.ckpt).build()
    rows = []
    for d in sample_dirs(args.data):
        if not (d / "clean.pgm").exists():
            raise DatasetError(f"{d.name}: missing clean.pgm (no ground truth)")
        s = load_sample(d)
        if model is None:
            enhanced = s.clean
        else:
            res = model.forward(Tensor(s.degraded[None, None].astype(np.float32)), train=False, strict=False)
            enhanced = res.enhanced.data[0, 0]
        r = image_metrics(enhanced, s.clean)
        rows.append((d.name, r))
    mean = mean_report(r for _, r in rows)
    report = {
        "checkpoint": None if args.identity else str(args.ckpt),
        "identity": bool(args.identity),
        "samples": [dict(sample=name, **json.loads(r.to_json())) for name, r in rows],
        "mean": json.loads(mean.to_json()),
    }
    Path(args.report).write_text(json.dumps(report, indent=1, sort_keys=True) + "\n")
    print(f"{'sample':<14}{'ssim':>10}{'ssim_8x8':>10}{'psnr':>10}{'rmse':>10}")
    for name, r in rows + [("mean", mean)]:
        print(f"{name:<14}{r.ssim:>10.4f}{r.ssim_block:>10.4f}{r.psnr:>10.3f}{r.rmse:>10.3f}")
    return 0


COMMANDS = {"gen-data": cmd_gen_data, "train": cmd_train, "enhance": cmd_enhance, "eval": cmd_eval}


def main(argv=None) -> int:
    args = parse(sys.argv[1:] if argv is None else argv)
    _print_config(args)
    try:
        from threadpoolctl import threadpool_limits
        threads = int(os.environ.get("FUNET_THREADS", "1"))
    except ValueError:
        print("error: FUNET_THREADS must be an integer", file=sys.stderr)
        return 2
    with threadpool_limits(limits=max(threads, 1)):
        try:
            return COMMANDS[args.command](args)
        except UsageError as e:
            print(f"error: {e}", file=sys.stderr)
            return 2
        except TrainingDiverged as e:
            print(f"error: {e}", file=sys.stderr)
            return 1
        except (ConfigError, CheckpointError, DatasetError, FormatError, ShapeError, OSError, ValueError) as e:
            print(f"error: {e}", file=sys.stderr)
            return 1


if __name__ == "__main__":
    sys.exit(main())

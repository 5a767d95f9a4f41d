"""Command-line interface.

Subcommands:

    copy-train      train a copy-task model, writing metrics CSV + checkpoint
    grad-check      finite-difference verification of analytic gradients
    params          exact parameter-count tables for layer stacks
    pack-features   energy CSV -> quaternion feature matrix (csv or bin)

Exit codes: 0 success, 1 check/format failure, 2 usage error, 3 training
divergence.  All commands are deterministic functions of their flags.
"""

from __future__ import annotations

import argparse
import json
import struct
import sys
from pathlib import Path

import numpy as np

from .autograd import DivergenceError
from .cells import LSTMCell, QLSTMCell
from .copy_task import CopyTaskSpec, build_copy_model
from .features import EnergyMatrix, pack_features
from .io import save_checkpoint, write_metrics
from .layers import (lstm_params, qlstm_params, quaternion_linear_params,
                     real_linear_params)
from .training import (Adam, TrainConfig, grad_check, restore_state,
                       train_copy_task)

__all__ = ["main", "console_main", "build_parser", "parse_arch"]

EXIT_OK = 0
EXIT_CHECK = 1
EXIT_USAGE = 2
EXIT_DIVERGED = 3


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems via exit code 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qrnn", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("copy-train", help="train a model on the copy task")
    p.add_argument("--model", choices=("qlstm", "lstm"), required=True)
    p.add_argument("--hidden", type=int, default=None,
                   help="hidden units (quaternion units for qlstm, real for lstm); "
                        "defaults 20 / 40")
    p.add_argument("--seq-len", type=int, default=10, metavar="L")
    p.add_argument("--blank-len", type=int, required=True, metavar="T")
    p.add_argument("--epochs", type=int, default=2000)
    p.add_argument("--lr", type=float, default=5e-3)
    p.add_argument("--batch", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--seeds", type=str, default=None,
                   help="comma-separated list; runs each seed in turn with "
                        "per-seed output files (overrides --seed)")
    p.add_argument("--grad-clip", type=float, default=None,
                   help="global-norm clip threshold (off by default)")
    p.add_argument("--early-stop-accuracy", type=float, default=None,
                   help="stop once recall accuracy reaches this value")
    p.add_argument("--metrics", type=Path, default=None, metavar="PATH")
    p.add_argument("--checkpoint", type=Path, default=None, metavar="PATH")
    p.set_defaults(func=cmd_copy_train)

    p = sub.add_parser("grad-check", help="compare analytic and numeric gradients")
    p.add_argument("--model", choices=("qlstm", "lstm"), required=True)
    p.add_argument("--hidden", type=int, required=True)
    p.add_argument("--timesteps", type=int, default=3)
    p.add_argument("--tolerance", type=float, default=1e-5)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_grad_check)

    p = sub.add_parser("params", help="parameter-count table for architectures")
    p.add_argument("--arch", action="append", required=True, metavar="KIND:LxW",
                   help="e.g. linear:1x2048, qlinear:1x512q, lstm:1x40, "
                        "qlstm:1x20q; repeatable")
    p.add_argument("--input", type=str, default=None,
                   help="input width for the first layer (same convention as "
                        "the descriptor width; defaults to the layer width)")
    p.add_argument("--compare", action="store_true",
                   help="with exactly two --arch entries, print their ratio")
    p.set_defaults(func=cmd_params)

    p = sub.add_parser("pack-features",
                       help="pack energy frames into quaternion features")
    p.add_argument("--in", dest="infile", type=Path, required=True)
    p.add_argument("--out", dest="outfile", type=Path, required=True)
    p.add_argument("--window", type=int, default=2)
    p.add_argument("--format", choices=("csv", "bin"), default="csv")
    p.set_defaults(func=cmd_pack_features)
    return parser


# ---------------------------------------------------------------------------
# copy-train


def _seed_path(path: Path | None, seed: int) -> Path | None:
    if path is None:
        return None
    return path.with_name(f"{path.stem}.seed{seed}{path.suffix}")


def _run_one_training(args, seed: int, metrics_path: Path | None,
                      ckpt_path: Path | None) -> int:
    spec = CopyTaskSpec(seq_len=args.seq_len, blank_len=args.blank_len)
    try:
        cfg = TrainConfig(learning_rate=args.lr, epochs=args.epochs,
                          batch_size=args.batch, seed=seed,
                          grad_clip=args.grad_clip,
                          early_stop_accuracy=args.early_stop_accuracy)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        result = train_copy_task(args.model, spec, cfg, hidden=args.hidden)
    except DivergenceError as exc:
        print(f"diverged: {exc}", file=sys.stderr)
        if metrics_path is not None:
            write_metrics(metrics_path, exc.records)
        if ckpt_path is not None and exc.snapshot is not None:
            # Rebuild the last finite state so the checkpoint is usable.
            rng = np.random.default_rng([seed, 0])
            model = build_copy_model(args.model, spec, hidden=args.hidden, rng=rng)
            optimizer = Adam([p for _, p in model.parameters()], lr=cfg.learning_rate,
                             beta1=cfg.beta1, beta2=cfg.beta2, epsilon=cfg.epsilon)
            restore_state(model, optimizer, exc.snapshot)
            epoch = exc.records[-1].epoch if exc.records else 0
            save_checkpoint(ckpt_path, model, optimizer, cfg, epoch)
        return EXIT_DIVERGED
    if metrics_path is not None:
        write_metrics(metrics_path, result.records)
    if ckpt_path is not None:
        save_checkpoint(ckpt_path, result.model, result.optimizer, cfg,
                        result.records[-1].epoch if result.records else 0,
                        anneal_state=result.anneal_state)
    last = result.records[-1]
    print(f"seed {seed}: epoch {last.epoch} loss {last.loss:.6f} "
          f"accuracy_recall {last.accuracy_recall:.4f} "
          f"accuracy_full {last.accuracy_full:.4f}")
    return EXIT_OK


def cmd_copy_train(args) -> int:
    if args.seq_len < 1 or args.blank_len < 0:
        print("error: --seq-len must be >= 1 and --blank-len >= 0", file=sys.stderr)
        return EXIT_USAGE
    if args.hidden is not None and args.hidden < 1:
        print("error: --hidden must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    if args.seeds is not None:
        try:
            seeds = [int(s) for s in args.seeds.split(",") if s.strip() != ""]
        except ValueError:
            print(f"error: bad --seeds list {args.seeds!r}", file=sys.stderr)
            return EXIT_USAGE
        if not seeds:
            print("error: --seeds is empty", file=sys.stderr)
            return EXIT_USAGE
        status = EXIT_OK
        for seed in seeds:
            code = _run_one_training(args, seed,
                                     _seed_path(args.metrics, seed),
                                     _seed_path(args.checkpoint, seed))
            status = max(status, code)
        return status
    return _run_one_training(args, args.seed, args.metrics, args.checkpoint)


# ---------------------------------------------------------------------------
# grad-check


def cmd_grad_check(args) -> int:
    if args.hidden < 1 or args.timesteps < 1:
        print("error: --hidden and --timesteps must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    rng = np.random.default_rng(args.seed)
    # Zero forget bias keeps every micro-model gradient entry large enough
    # for the central-difference oracle to resolve at the default tolerance.
    if args.model == "qlstm":
        cell = QLSTMCell(in_q=2, hidden_q=args.hidden, rng=rng, forget_bias=0.0)
        input_dim = 8
    else:
        cell = LSTMCell(input_dim=5, hidden_dim=args.hidden, rng=rng,
                        forget_bias=0.0)
        input_dim = 5
    inputs = rng.standard_normal((args.timesteps, 2, input_dim))
    targets = rng.integers(0, 2, size=args.timesteps * 2)

    from .autograd import Tensor, concat_rows, softmax_cross_entropy
    from .cells import run_sequence
    from .layers import RealLinear

    head = RealLinear(2, cell.state_width if args.model == "qlstm" else args.hidden,
                      bias=True, rng=rng)

    def loss_fn():
        hs, _ = run_sequence(cell, [Tensor(x) for x in inputs])
        return softmax_cross_entropy(head(concat_rows(hs)), targets)

    named = list(cell.parameters()) + [("head.weight", head.weight),
                                       ("head.bias", head.bias)]
    report = grad_check(named, loss_fn)
    print(report.format_table())
    if report.max_rel_error < args.tolerance:
        return EXIT_OK
    print(f"gradient check failed: {report.max_rel_error:.3e} >= "
          f"{args.tolerance:.3e}", file=sys.stderr)
    return EXIT_CHECK


# ---------------------------------------------------------------------------
# params


def parse_arch(text: str) -> tuple[str, int, int, bool]:
    """``kind:LxW`` -> (kind, layers, width_in_reals, quaternion_width).

    A ``q`` suffix on the width means quaternion units; bare widths are
    real scalars and must be divisible by 4 for quaternion kinds.
    """
    try:
        kind, shape = text.split(":")
        layers_s, width_s = shape.lower().split("x")
        quat_width = width_s.endswith("q")
        if quat_width:
            width_s = width_s[:-1]
        layers, width = int(layers_s), int(width_s)
    except ValueError:
        raise ValueError(f"malformed descriptor {text!r}; expected kind:LxW")
    if kind not in ("linear", "qlinear", "lstm", "qlstm"):
        raise ValueError(f"unknown architecture kind {kind!r}")
    if layers < 1 or width < 1:
        raise ValueError(f"layers and width must be >= 1 in {text!r}")
    if quat_width:
        width *= 4
    if kind in ("qlinear", "qlstm") and width % 4 != 0:
        raise ValueError(
            f"{kind} width must be a whole number of quaternions in {text!r}")
    return kind, layers, width, quat_width


def _parse_width(text: str) -> int:
    text = text.lower()
    quat = text.endswith("q")
    value = int(text[:-1] if quat else text)
    return value * 4 if quat else value


def _arch_params(kind: str, layers: int, width: int, input_width: int) -> int:
    total = 0
    fan_in = input_width
    for _ in range(layers):
        if kind == "linear":
            total += real_linear_params(width, fan_in)
        elif kind == "qlinear":
            total += quaternion_linear_params(width // 4, fan_in // 4)
        elif kind == "lstm":
            total += lstm_params(width, fan_in)
        else:
            total += qlstm_params(width // 4, fan_in // 4)
        fan_in = width
    return total


def cmd_params(args) -> int:
    entries = []
    for text in args.arch:
        try:
            kind, layers, width, _ = parse_arch(text)
            if args.input is not None:
                input_width = _parse_width(args.input)
                if kind in ("qlinear", "qlstm") and input_width % 4 != 0:
                    raise ValueError("--input must be a whole number of "
                                     f"quaternions for {kind}")
            else:
                input_width = width
        except ValueError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_USAGE
        entries.append((text, _arch_params(kind, layers, width, input_width)))
    name_w = max(len(t) for t, _ in entries)
    for text, count in entries:
        print(f"{text:<{name_w}}  {count:>12,}")
    if args.compare:
        if len(entries) != 2:
            print("error: --compare needs exactly two --arch entries",
                  file=sys.stderr)
            return EXIT_USAGE
        a, b = entries[0][1], entries[1][1]
        print(f"ratio {entries[0][0]} / {entries[1][0]} = {a / b:g}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# pack-features

_FEATURES_MAGIC = b"QRNNFEA1"


def write_features_bin(path, features: np.ndarray) -> None:
    header = {"format": 1, "layout": "split", "endianness": "little",
              "scalar_width": 64, "shape": list(features.shape)}
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    with open(path, "wb") as fh:
        fh.write(_FEATURES_MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        fh.write(np.ascontiguousarray(features, dtype="<f8").tobytes())


def read_features_bin(path) -> np.ndarray:
    with open(path, "rb") as fh:
        if fh.read(len(_FEATURES_MAGIC)) != _FEATURES_MAGIC:
            raise ValueError("not a feature file")
        (hlen,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(hlen).decode("utf-8"))
        shape = tuple(header["shape"])
        count = int(np.prod(shape, dtype=np.int64))
        data = np.frombuffer(fh.read(count * 8), dtype="<f8")
        if data.size != count:
            raise ValueError("truncated feature payload")
        return data.reshape(shape).copy()


def cmd_pack_features(args) -> int:
    if args.window < 1:
        print("error: --window must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        energies = EnergyMatrix.from_csv(args.infile)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CHECK
    packed = pack_features(energies, window=args.window)
    if args.format == "bin":
        write_features_bin(args.outfile, packed)
    else:
        with open(args.outfile, "w", encoding="utf-8") as fh:
            for row in packed:
                fh.write(",".join(f"{x:.17g}" for x in row) + "\n")
    print(f"wrote {packed.shape[0]} frames x {packed.shape[1]} features "
          f"to {args.outfile}")
    return EXIT_OK


# ---------------------------------------------------------------------------


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    return args.func(args)


def console_main() -> None:
    raise SystemExit(main())

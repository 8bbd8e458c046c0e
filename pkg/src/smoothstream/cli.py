"""Command-line entry point: selftest, bench, train, eval, stream."""
from __future__ import annotations

import argparse
import json
import logging
import sys

from .harness import io
from .harness.bench import MODES, BenchConfig, run_benchmark
from .harness.experiment import (
    checkpoint_metadata,
    evaluate_synthetic,
    split_config,
    summarize,
    synth_from_metadata,
    train_synthetic,
)
from .harness.metrics import probabilities
from .harness.selftest import selftest
from .model import StreamRuntime
from .model.checkpoint import load_checkpoint, save_checkpoint


def _ints(text: str):
    return tuple(int(v) for v in text.split(",") if v.strip())


def cmd_selftest(args) -> int:
    return 0 if selftest() else 1


def cmd_bench(args) -> int:
    modes = tuple(m.strip() for m in args.modes.split(",") if m.strip())
    bad = [m for m in modes if m not in MODES]
    if bad:
        raise SystemExit(f"unknown modes {bad}; choose from {','.join(MODES)}")
    cfg = BenchConfig(windows=_ints(args.windows), modes=modes, frames=args.frames, reps=args.reps, seed=args.seed)
    report = run_benchmark(cfg)
    for r in report.rows:
        print(f"{r.mode:12s} window={r.window:6d} median={r.median_ns / 1e3:10.1f} us  p95={r.p95_ns / 1e3:10.1f} us")
    if args.csv:
        report.write_csv(args.csv)
    return 0


def cmd_train(args) -> int:
    raw = io.read_config_file(args.config) if args.config else {}
    model, synth, training = split_config(raw)
    params, history = train_synthetic(model, synth, training, seed=args.seed)
    save_checkpoint(args.out, params, checkpoint_metadata(synth, training, args.seed))
    print(summarize(history))
    return 0


def cmd_eval(args) -> int:
    params, meta = load_checkpoint(args.ckpt)
    synth = synth_from_metadata(meta)
    report = evaluate_synthetic(params, synth, horizons=_ints(args.horizons), seed=args.seed, T=args.frames)
    out = report.to_dict()
    print(json.dumps(out, indent=2))
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(out, fh, indent=2)
    return 0


def cmd_stream(args) -> int:
    params, _ = load_checkpoint(args.ckpt)
    frames = io.read_features(args.input)
    if frames.shape[1] != params.config.d:
        raise SystemExit(f"features have d={frames.shape[1]}, checkpoint expects d={params.config.d}")
    rt = StreamRuntime(params)
    with open(args.emit, "w") as fh:
        for t, x in enumerate(frames):
            fh.write(json.dumps(io.score_record(t, probabilities(rt.step(x)))) + "\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="smoothstream", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("selftest", help="run the oracle-equivalence suites")
    s.set_defaults(func=cmd_selftest)

    s = sub.add_parser("bench", help="per-frame cost of streaming vs windowed attention")
    s.add_argument("--windows", default="32,128,512,2048,8192")
    s.add_argument("--modes", default=",".join(MODES))
    s.add_argument("--frames", type=int, default=20000)
    s.add_argument("--reps", type=int, default=3)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--csv")
    s.set_defaults(func=cmd_bench)

    s = sub.add_parser("train", help="train on synthetic streams and write a checkpoint")
    s.add_argument("--config")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("eval", help="stream a held-out synthetic sequence and report mAP")
    s.add_argument("--ckpt", required=True)
    s.add_argument("--horizons", default="0")
    s.add_argument("--frames", type=int, default=5000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--json")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("stream", help="run frame-by-frame inference on a features.bin file")
    s.add_argument("--ckpt", required=True)
    s.add_argument("--input", required=True)
    s.add_argument("--emit", required=True)
    s.set_defaults(func=cmd_stream)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry point: synth, train, eval, gradcheck, bench, ablate.

Exit codes: 0 success, 1 usage error, 2 data/format error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import time

import numpy as np

from .errors import ConfigError, DataError, FormatError, GenerationError, NumericalError

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _add_model_flags(p):
    p.add_argument("--size", type=int, default=64, help="input size (multiple of 32)")
    p.add_argument("--mda-variant", choices=("full", "dual", "pconv"), default="full")
    p.add_argument("--mgc-k", type=int, default=8, help="memory capacity K")
    p.add_argument("--mgc-n", type=int, default=4, help="window size N")
    p.add_argument("--mgc-wiring", choices=("pre", "post"), default="pre")
    p.add_argument("--afd-width", type=int, default=64)
    p.add_argument("--channels", default="32,64,128,256", help="encoder stage widths")


def _add_train_flags(p):
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--batch", type=int, default=8)
    p.add_argument("--lr-max", type=float, default=1e-4)
    p.add_argument("--lr-min", type=float, default=1e-6)
    p.add_argument("--wd", type=float, default=5e-4)
    p.add_argument("--ckpt-every", type=int, default=0)
    p.add_argument("--no-figures", action="store_true")
    _add_model_flags(p)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pdcnet", description="PDC-Net segmentation toolkit (numpy, CPU).")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, default=200, help="training images")
    p.add_argument("--n-test", type=int, default=None, help="test images (default n/4)")
    p.add_argument("--size", type=int, default=64)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--diagonal-only", action="store_true")
    p.add_argument("--noise", type=float, default=0.03)
    p.add_argument("--texture", type=float, default=0.25)

    p = sub.add_parser("train", help="train a model")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--ckpt", help="resume from this checkpoint")
    p.add_argument("--stop-after", type=int, default=None, help="stop after this epoch (schedule unchanged)")
    _add_train_flags(p)

    p = sub.add_parser("eval", help="evaluate a checkpoint")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--report", required=True, help="metrics CSV path")
    p.add_argument("--per-image", help="optional per-image CSV path")
    p.add_argument("--no-figures", action="store_true")

    p = sub.add_parser("gradcheck", help="finite-difference gradient suite")
    p.add_argument("--module", choices=("all", "ops", "strip", "mda", "mgc", "afd", "network"), default="all")
    p.add_argument("--eps", type=float, default=1e-5)
    p.add_argument("--tol", type=float, default=1e-4)

    p = sub.add_parser("bench", help="strip-conv throughput table")
    p.add_argument("--sizes", default="32,64,128")
    p.add_argument("--channels", type=int, default=16)
    p.add_argument("--batch", type=int, default=4)
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--report", help="optional CSV path")

    p = sub.add_parser("ablate", help="compare MDA variants on the diagonal-only subset")
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--n-test", type=int, default=50)
    _add_train_flags(p)
    return parser


def _model_config(args):
    from .network import EncoderConfig, PdcNetConfig

    return PdcNetConfig(
        encoder=EncoderConfig(channels=[int(c) for c in args.channels.split(",")]),
        input_size=args.size,
        mda_variant=args.mda_variant,
        mgc_window=args.mgc_n,
        mgc_capacity=args.mgc_k,
        mgc_wiring=args.mgc_wiring,
        afd_width=args.afd_width,
        seed=args.seed,
    )


def _train_config(args):
    from .optim import ScheduleConfig
    from .train import TrainConfig

    cfg = TrainConfig(
        model=_model_config(args),
        schedule=ScheduleConfig(args.lr_max, args.lr_min, args.epochs, args.batch, args.size),
        weight_decay=args.wd,
        seed=args.seed,
        ckpt_every=args.ckpt_every,
        figures=not args.no_figures,
    )
    cfg.model.validate()
    return cfg


def cmd_synth(args) -> int:
    from .synth import SynthConfig, write_dataset

    cfg = SynthConfig(
        size=args.size,
        n_images=args.n,
        seed=args.seed,
        diagonal_only=args.diagonal_only,
        noise=args.noise,
        texture_amplitude=args.texture,
    )
    train, test = write_dataset(args.out, cfg, args.n_test)
    print(f"wrote {len(train)} train / {len(test)} test samples to {args.out}")
    return EXIT_OK


def cmd_train(args) -> int:
    from .train import train

    res = train(_train_config(args), args.data, args.out, resume=args.ckpt, stop_after=args.stop_after)
    print(f"checkpoint: {res.checkpoint}")
    if res.report is not None:
        print(f"mean foreground DSC: {res.report.mean_dsc():.4f}")
    return EXIT_OK


def cmd_eval(args) -> int:
    from .network import load_model
    from .objectives import evaluate_predictions, predict
    from .synth import load_dataset, resolve_split

    model = load_model(args.ckpt)
    samples = load_dataset(resolve_split(args.data, "test"))
    if not samples:
        raise DataError(f"no samples in {args.data}")
    preds = predict(model, np.stack([s.image for s in samples]))
    report = evaluate_predictions(preds, samples)
    for path in (args.report, args.per_image):
        if path and os.path.dirname(path):
            os.makedirs(os.path.dirname(path), exist_ok=True)
    report.write_csv(args.report)
    if args.per_image:
        report.write_per_image_csv(args.per_image)
    if not args.no_figures:
        from . import plots

        stem = os.path.splitext(args.report)[0]
        plots.plot_metrics(report, stem + ".png")
        plots.plot_predictions(samples, preds, stem + "_predictions.png")
    with open(args.report) as fh:
        sys.stdout.write(fh.read())
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    from .checks import NETWORK_TOL, SUITES

    names = list(SUITES) if args.module == "all" else [args.module]
    worst_fail = False
    print(f"{'check':<36} {'max_rel_err':>12} {'tol':>8}  status")
    for n in names:
        tol = max(args.tol, NETWORK_TOL) if n == "network" else args.tol
        for label, err in SUITES[n](eps=args.eps).items():
            ok = err <= tol
            worst_fail |= not ok
            print(f"{label:<36} {err:>12.3e} {tol:>8.0e}  {'ok' if ok else 'FAIL'}")
    return EXIT_NUMERIC if worst_fail else EXIT_OK


def cmd_bench(args) -> int:
    from .autodiff.tensor import Tensor
    from .strip import DIRECTIONS, strip_conv

    rng = np.random.default_rng(0)
    rows = []
    for size in (int(s) for s in args.sizes.split(",")):
        x = Tensor(rng.standard_normal((args.batch, args.channels, size, size)).astype(np.float32))
        w = Tensor(rng.standard_normal((args.channels, 9)).astype(np.float32))
        for d in DIRECTIONS:
            strip_conv(x, w, d)
            t0 = time.perf_counter()
            for _ in range(args.repeat):
                strip_conv(x, w, d)
            ns = (time.perf_counter() - t0) / args.repeat / x.size * 1e9
            rows.append((d.tag, size, ns))
    print(f"{'direction':<14} {'size':>6} {'ns/elem':>10}")
    for d, s, ns in rows:
        print(f"{d:<14} {s:>6d} {ns:>10.2f}")
    if args.report:
        with open(args.report, "w") as fh:
            fh.write("direction,size,ns_per_elem\n")
            fh.writelines(f"{d},{s},{ns:.3f}\n" for d, s, ns in rows)
    return EXIT_OK


def cmd_ablate(args) -> int:
    from .synth import SynthConfig
    from .train import ablation_ordering, run_ablation

    cfg = _train_config(args)
    synth = SynthConfig(size=args.size, n_images=args.n, seed=args.seed)
    scores = run_ablation(args.out, cfg, synth, args.n_test)
    with open(os.path.join(args.out, "ablation.csv")) as fh:
        sys.stdout.write(fh.read())
    status = "pass" if ablation_ordering(scores) else "warn"
    print(f"ordering full >= dual - 0.02 >= pconv - 0.04: {status}")
    return EXIT_OK


COMMANDS = {
    "synth": cmd_synth,
    "train": cmd_train,
    "eval": cmd_eval,
    "gradcheck": cmd_gradcheck,
    "bench": cmd_bench,
    "ablate": cmd_ablate,
}


def _thread_limit():
    raw = os.environ.get("PDC_THREADS", "0")
    try:
        n = int(raw)
    except ValueError:
        raise UsageError(f"PDC_THREADS must be an integer, got {raw!r}") from None
    if n <= 0:
        return None
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=n)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_usage(sys.stderr)
            return EXIT_USAGE
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
        limiter = _thread_limit()
        try:
            return COMMANDS[args.command](args)
        finally:
            if limiter is not None:
                limiter.unregister()
    except UsageError as e:
        print(e, file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, FormatError, GenerationError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())

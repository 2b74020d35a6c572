"""advprobe command line: train, attack, sweep, verify, cw-compare, prob-shift.

Exit codes: 0 success, 1 usage error, 2 runtime error, 3 theorem-suite violations.
"""
import argparse
import logging
import sys
import warnings

import numpy as np

from . import charts
from .arch import ArchParseError, build_network
from .attacks import METHODS, AttackConfig, CWParams, run_attack
from .attacks.base import TARGETED
from .csvio import write_csv
from .data import gen_blobs, load_digits_dataset, load_idx
from .experiments import (compare_cw, parse_grid, prob_shift, random_cw_instances, sweep)
from .network import SGD, Adam, Linear, Network, train
from .theory import SUITES, c_bound_cw, run_suite

log = logging.getLogger("advprobe")

EXIT_USAGE, EXIT_RUNTIME, EXIT_VIOLATIONS = 1, 2, 3

ARCH_HELP = """architecture strings:
  mlp:D0-D1-...-Dk                     linear layers, ReLU between, linear last
  cnn:CxHxW:conv(oc,k,s,p)-...-mlp(D1-...-Dk)
                                       conv layers (each followed by ReLU), then an
                                       mlp whose input dim is inferred
data specs:
  blobs:DIMS:CLASSES:SPREAD:N_PER_CLASS[:SEED]   seeded Gaussian blobs (seed 0 default)
  idx:IMAGES_PATH:LABELS_PATH                    IDX image/label files
  digits                                         scikit-learn 8x8 digits
"""


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# -- data ---------------------------------------------------------------------------


def load_data(spec):
    kind, _, rest = spec.partition(":")
    if kind == "blobs":
        parts = rest.split(":")
        if len(parts) not in (4, 5):
            raise UsageError(f"bad blobs spec {spec!r}: blobs:DIMS:CLASSES:SPREAD:N_PER_CLASS[:SEED]")
        dims, classes, spread, n = int(parts[0]), int(parts[1]), float(parts[2]), int(parts[3])
        seed = int(parts[4]) if len(parts) == 5 else 0
        return gen_blobs(n, dims, classes, spread, seed)
    if kind == "idx":
        images, sep, labels = rest.partition(":")
        if not sep:
            raise UsageError(f"bad idx spec {spec!r}: idx:IMAGES_PATH:LABELS_PATH")
        return load_idx(images, labels)
    if kind == "digits":
        return load_digits_dataset()
    raise UsageError(f"unknown data spec {spec!r}")


def fit_shape(data, net):
    if data.inputs[0].size != net.input_dim:
        raise UsageError(f"data has {data.inputs[0].size} features per sample but the "
                         f"model expects input shape {net.input_shape}")
    return data.reshape(net.input_shape)


def select(data, args, targeted_at=None, source=None):
    """Rows of the requested split (original indices kept), filtered by class."""
    train_idx, test_idx = data.split_indices(args.test_fraction, args.split_seed)
    idx = {"train": train_idx, "test": test_idx, "all": np.arange(len(data))}[args.split]
    if targeted_at is not None:
        # targeted attacks only make sense away from the target class
        idx = idx[data.labels[idx] != targeted_at]
    if source is not None:
        idx = idx[data.labels[idx] == source]
    if args.limit is not None:
        idx = idx[:args.limit]
    return data.subset(idx), idx


def _emit(args, header, rows, trailer=None):
    return write_csv(args.out, header, rows, trailer)


def _save_svg(path, svg):
    if path:
        with open(path, "w", newline="\n") as f:
            f.write(svg)


# -- commands -------------------------------------------------------------------------


def cmd_train(args):
    net = build_network(args.arch, seed=args.seed, bias=not args.no_bias)
    data = fit_shape(load_data(args.data), net)
    if data.class_count > net.class_count:
        raise UsageError(f"data has {data.class_count} classes, model outputs {net.class_count}")
    train_set, test_set = data.split(args.test_fraction, args.split_seed)
    opt = Adam(args.lr) if args.optimizer == "adam" else SGD(args.lr)
    progress = None if args.quiet else (lambda e, l: log.info("epoch %d loss %.6f", e + 1, l))
    net = train(net, train_set, opt, args.epochs, args.batch_size, args.seed, progress)
    if args.out:
        net.save(args.out)
    train_acc = float(np.mean(net.predict(train_set.inputs) == train_set.labels))
    test_acc = (float(np.mean(net.predict(test_set.inputs) == test_set.labels))
                if len(test_set) else float("nan"))
    sys.stdout.write(f"train_accuracy,test_accuracy\n{train_acc!r},{test_acc!r}\n")
    return 0


def _config(args, **overrides):
    cw = CWParams(args.c, args.kappa, args.cw_lr, args.steps)
    kw = dict(method=args.method, epsilon=args.eps, iterations=args.iters,
              clip_alpha=args.alpha, target=args.target, cw=cw)
    kw.update(overrides)
    return AttackConfig(**kw)


def _attack_set(args, net):
    data = fit_shape(load_data(args.data), net)
    return select(data, args, args.target if args.method in TARGETED else None, args.source)


def cmd_attack(args):
    net = Network.load(args.model)
    config = _config(args)
    data, idx = _attack_set(args, net)
    results = run_attack(net, data.inputs, data.labels, config)
    rows = []
    for i, (x, label, r) in enumerate(zip(data.inputs, data.labels, results)):
        rows.append([int(idx[i]), int(label), r.label_before, r.label_after, r.loss_before,
                     r.loss_after, r.success, r.l2_delta(x), r.linf_delta(x)])
    header = ["index", "label", "pred_before", "pred_after", "loss_before", "loss_after",
              "success", "l2_delta", "linf_delta"]
    _emit(args, header, rows)
    if not args.quiet:
        log.info("%d samples, success rate %.4f", len(rows),
                 np.mean([r.success for r in results]) if results else 0.0)
    return 0


def cmd_sweep(args):
    net = Network.load(args.model)
    grid = parse_grid(args.grid)
    if args.vary == "iters" and any(v != int(v) or v < 1 for v in grid):
        raise UsageError("iteration grids must hold positive integers")
    data, _ = _attack_set(args, net)
    if len(data) == 0:
        raise UsageError("no samples to attack")
    result = sweep(net, data.inputs, data.labels, _config(args), grid, args.vary)
    header = ["iterations" if args.vary == "iters" else "epsilon", "accuracy", "success_rate",
              "mean_loss", "sample_count", "model_digest"]
    rows = [[int(g) if args.vary == "iters" else float(g), a, s, l, result.sample_count,
             result.model_digest]
            for g, a, s, l in zip(result.grid, result.accuracy, result.success_rate,
                                  result.mean_loss)]
    _emit(args, header, rows)
    metric = "success_rate" if args.method in TARGETED else "accuracy"
    ys = result.success_rate if args.method in TARGETED else result.accuracy
    xlabel = "iterations" if args.vary == "iters" else "attack strength epsilon"
    _save_svg(args.svg, charts.line_chart(result.grid, {metric: ys},
                                          title=f"{args.method}: {xlabel} vs {metric}",
                                          xlabel=xlabel, ylabel=metric, y_range=(0.0, 1.0)))
    return 0


def cmd_verify(args):
    reports, summary = run_suite(args.theorem, args.trials, args.seed)
    header = ["theorem_id", "threshold", "epsilon_used", "verdict", "violation_magnitude", "seed"]
    trailer_header = ["theorem_id", "trials", "applicable", "holds", "violated"]
    trailer_row = [summary.theorem_id, summary.trials, summary.applicable, summary.holds,
                   summary.violated]
    for key, value in summary.extra.items():
        trailer_header.append(key)
        trailer_row.append(float(value))
    _emit(args, header, [r.csv_row() for r in reports], (trailer_header, [trailer_row]))
    if args.out and args.out != "-" and not args.quiet:
        sys.stdout.write(",".join(trailer_header) + "\n"
                         + ",".join(str(v) for v in trailer_row) + "\n")
    return 0 if summary.ok else EXIT_VIOLATIONS


def cmd_cw_compare(args):
    if args.model:
        net = Network.load(args.model)
        if len(net.layers) != 1 or not isinstance(net.layers[0], Linear):
            raise UsageError("theorem scope: cw-compare needs a single linear layer model")
        W, b = net.layers[0].weight, net.layers[0].bias
        data, idx = select(fit_shape(load_data(args.data), net), args)
        rng = np.random.default_rng(args.seed)
        instances = []
        for x, i in zip(data.inputs.reshape(len(data), -1), idx):
            z = W @ x + (0 if b is None else b)
            y = int(np.argmax(z))
            t = int(rng.integers(0, net.class_count - 1))
            t += t >= y
            instances.append((int(i), W, b, x, y, t))
    else:
        instances = [(i, W, None, x, y, t) for i, (W, x, y, t)
                     in enumerate(random_cw_instances(args.instances, args.seed))]
    rows, diffs, agree = [], [], 0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        for i, W, b, x, y, t in instances:
            bound = c_bound_cw(W, x, y, t, b)
            c = args.c_frac * bound
            cmp = compare_cw(W, x, y, t, c, args.steps, args.cw_lr, b)
            diffs.append(cmp.rel_l2_diff)
            agree += cmp.closed_verdict == cmp.iterative_verdict
            rows.append([i, y, t, float(c), float(bound), cmp.rel_l2_diff, cmp.closed_verdict,
                         cmp.iterative_verdict,
                         ";".join(repr(float(v)) for v in cmp.closed_delta),
                         ";".join(repr(float(v)) for v in cmp.iterative_delta)])
    header = ["index", "label", "target", "c", "c_bound", "rel_l2_diff", "closed_verdict",
              "iterative_verdict", "closed_delta", "iterative_delta"]
    _emit(args, header, rows)
    if not args.quiet and rows:
        log.info("median rel_l2_diff %.3e, verdict agreement %d/%d",
                 float(np.median(diffs)), agree, len(rows))
    return 0


def cmd_prob_shift(args):
    net = Network.load(args.model)
    data = fit_shape(load_data(args.data), net)
    src, _ = select(data, args, source=args.source)
    if len(src) == 0:
        raise UsageError(f"no samples of source class {args.source}")
    shift = prob_shift(net, src.inputs, args.target,
                       CWParams(args.c, args.kappa, args.cw_lr, args.steps))
    rows = [[k, float(shift.before[k]), float(shift.after[k])] for k in range(net.class_count)]
    _emit(args, ["class", "mean_prob_before", "mean_prob_after"], rows)
    _save_svg(args.svg, charts.bar_chart(
        list(range(net.class_count)),
        {"before attack": shift.before, "after CW attack": shift.after},
        title=f"class {args.source} -> {args.target}: mean class probability",
        xlabel="class", ylabel="mean probability"))
    if not args.quiet:
        log.info("%d samples, %d reached class %d", shift.sample_count, shift.successes,
                 args.target)
    return 0


# -- parser ---------------------------------------------------------------------------


def build_parser():
    # global flags work before or after the subcommand; SUPPRESS keeps a subparser
    # from overwriting a value given up front, and main() fills the defaults
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS,
                        help="master seed (default 0; verify: 42)")
    common.add_argument("--out", default=argparse.SUPPRESS,
                        help="output file ('-' or omitted: stdout)")
    common.add_argument("--quiet", action="store_true", default=argparse.SUPPRESS)

    data_opts = argparse.ArgumentParser(add_help=False)
    data_opts.add_argument("--data", required=True, help="data spec, see --help")
    data_opts.add_argument("--split", choices=("train", "test", "all"), default="test")
    data_opts.add_argument("--test-fraction", type=float, default=0.2)
    data_opts.add_argument("--split-seed", type=int, default=0)
    data_opts.add_argument("--limit", type=int, default=None, help="use the first N samples")

    attack_opts = argparse.ArgumentParser(add_help=False)
    attack_opts.add_argument("--method", choices=METHODS, default="fgsm")
    attack_opts.add_argument("--eps", type=float, default=0.02)
    attack_opts.add_argument("--iters", type=int, default=1)
    attack_opts.add_argument("--alpha", type=float, default=None, help="clip radius")
    attack_opts.add_argument("--target", type=int, default=None)
    attack_opts.add_argument("--source", type=int, default=None,
                             help="only attack samples of this class")
    cw_opts = argparse.ArgumentParser(add_help=False)
    cw_opts.add_argument("--c", type=float, default=10.0)
    cw_opts.add_argument("--kappa", type=float, default=0.0)
    cw_opts.add_argument("--steps", type=int, default=10)
    cw_opts.add_argument("--lr", dest="cw_lr", type=float, default=0.01)

    parser = _Parser(prog="advprobe", description=__doc__, epilog=ARCH_HELP,
                     formatter_class=argparse.RawDescriptionHelpFormatter, parents=[common])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train", parents=[common], epilog=ARCH_HELP,
                       formatter_class=argparse.RawDescriptionHelpFormatter,
                       help="train a model and write its JSON")
    p.add_argument("--arch", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--lr", type=float, default=0.1)
    p.add_argument("--optimizer", choices=("sgd", "adam"), default="sgd")
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--no-bias", action="store_true")
    p.add_argument("--test-fraction", type=float, default=0.2)
    p.add_argument("--split-seed", type=int, default=0)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("attack", parents=[common, data_opts, attack_opts, cw_opts],
                       help="attack every sample, one CSV row each")
    p.add_argument("--model", required=True)
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("sweep", parents=[common, data_opts, attack_opts, cw_opts],
                       help="metric vs epsilon or iterations, CSV + SVG")
    p.add_argument("--model", required=True)
    p.add_argument("--grid", required=True, help="start:end:step or a comma list")
    p.add_argument("--vary", choices=("eps", "iters"), default="eps")
    p.add_argument("--svg", default=None)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("verify", parents=[common], help="randomized theorem suite")
    p.add_argument("--theorem", required=True, choices=sorted(SUITES))
    p.add_argument("--trials", type=int, default=1000)
    p.set_defaults(func=cmd_verify, default_seed=42)

    p = sub.add_parser("cw-compare", parents=[common, cw_opts],
                       help="closed-form vs iterative CW on a single linear layer")
    p.add_argument("--model", default=None, help="single linear layer model; random if omitted")
    p.add_argument("--data", default=None)
    p.add_argument("--split", choices=("train", "test", "all"), default="test")
    p.add_argument("--test-fraction", type=float, default=0.2)
    p.add_argument("--split-seed", type=int, default=0)
    p.add_argument("--limit", type=int, default=None)
    p.add_argument("--instances", type=int, default=100)
    p.add_argument("--c-frac", type=float, default=0.5, help="c as a fraction of its bound")
    p.set_defaults(func=cmd_cw_compare, steps=2000)

    p = sub.add_parser("prob-shift", parents=[common, data_opts, cw_opts],
                       help="mean class probabilities before/after CW, CSV + SVG")
    p.add_argument("--model", required=True)
    p.add_argument("--source", type=int, required=True)
    p.add_argument("--target", type=int, required=True)
    p.add_argument("--svg", default=None)
    p.set_defaults(func=cmd_prob_shift)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if not hasattr(args, "seed"):
        args.seed = getattr(args, "default_seed", 0)
    args.out = getattr(args, "out", None)
    args.quiet = getattr(args, "quiet", False)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(message)s", stream=sys.stderr)
    try:
        if args.command == "cw-compare" and args.model and not args.data:
            raise UsageError("--model needs --data")
        return args.func(args)
    except (UsageError, ArchParseError) as exc:
        print(f"advprobe: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, KeyError, OSError, RuntimeError) as exc:
        print(f"advprobe: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())

"""Command-line front end: train, eval, gen, and bench subcommands.

Exit codes: 0 success, 1 usage or configuration error, 2 data or
format error, 3 numerical failure. Reports are JSON lines: one object
per iteration (objective and gradient norm, plus the class for
one-vs-all runs), then a single summary object with "summary": true.
Timing fields vary run to run; everything else is deterministic for a
fixed seed.
"""

import argparse
import json
import subprocess
import sys

import numpy as np

from .data_io import (
    generate_blobs,
    generate_checkerboard,
    generate_fig1_synthetic,
    load_model,
    parse_sparse_text,
    save_model,
    scale_minmax,
    write_sparse_text,
)
from .dense_oracle import train_exact
from .errors import (
    CapExceededError,
    DataFormatError,
    DimensionError,
    NumericalError,
    UndefinedMetricError,
    ValidationError,
)
from .kernel import GridSpec, RadialKernel
from .klr_fast import TrainConfig, predict, train
from .metrics import accuracy, confusion_matrix, macro_f1, mcc, roc_auc
from .multiclass import MulticlassModel, predict_ova, train_ova
from .tensor_fft import LevelOrder


def _load_dataset(path):
    with open(path) as f:
        return parse_sparse_text(f, source=path)


def _levels_config(value, h):
    """--levels is either 'auto[:q]' or an explicit comma list of sizes."""
    if value.startswith("auto"):
        q = 3
        if ":" in value:
            try:
                q = int(value.split(":", 1)[1])
            except ValueError:
                raise ValidationError(f"bad --levels value {value!r}")
        return {"grid": "auto", "auto_q": q, "auto_h": h}
    try:
        dims = [int(v) for v in value.split(",")]
    except ValueError:
        raise ValidationError(f"bad --levels value {value!r}")
    order = LevelOrder(dims)
    return {"grid": GridSpec((float(h),) * order.q, order)}


def _build_config(args, **overrides):
    kw = dict(
        lambda_=args.lam,
        kernel=RadialKernel(sigma=args.sigma),
        t_max=args.tmax,
        eps=args.eps,
        armijo_delta=args.delta,
        armijo_beta=args.beta,
        seed=args.seed,
    )
    kw.update(_levels_config(args.levels, args.h))
    kw.update(overrides)
    return TrainConfig(**kw)


def _write_report(path, rows):
    with open(path, "w") as f:
        for row in rows:
            f.write(json.dumps(row) + "\n")


def cmd_train(args):
    ds = _load_dataset(args.data)
    scaler = None
    if args.scale:
        ds, scaler = scale_minmax(ds)
    cfg = _build_config(args)

    if args.multiclass:
        model = train_ova(ds, cfg, jobs=args.jobs, solver=args.solver, scaler=scaler)
        parts = list(zip([int(c) for c in model.classes], model.models))
    else:
        if args.solver == "exact":
            model = train_exact(ds, cfg, scaler=scaler)
        else:
            model = train(ds, cfg, scaler=scaler)
        parts = [(None, model)]
    save_model(model, args.out)

    total = sum(m.diagnostics["train_seconds"] for _, m in parts)
    iters = [m.diagnostics["iterations"] for _, m in parts]
    print(
        f"trained {args.solver} model on {ds.n} samples (d={ds.d}) "
        f"in {total:.3f}s, iterations {','.join(map(str, iters))}"
    )
    print(f"model written to {args.out}")

    if args.report:
        rows = []
        for cls, m in parts:
            diag = m.diagnostics
            for i, (o, g) in enumerate(
                zip(diag["objective_trace"], diag["grad_norm_trace"])
            ):
                row = {"iteration": i, "objective": o, "grad_norm": g}
                if cls is not None:
                    row["class"] = cls
                rows.append(row)
        rows.append(
            {
                "summary": True,
                "command": "train",
                "solver": args.solver,
                "n": ds.n,
                "d": ds.d,
                "padded_size": parts[0][1].diagnostics["padded_size"],
                "iterations": iters,
                "t_max": cfg.t_max,
                "final_grad_norms": [m.diagnostics["final_grad_norm"] for _, m in parts],
                "clamp_count": sum(m.diagnostics["clamp_count"] for _, m in parts),
                "line_search_stalls": sum(
                    m.diagnostics["line_search_stalls"] for _, m in parts
                ),
                "train_seconds": total,
                "sigma": args.sigma,
                "lambda": args.lam,
                "seed": args.seed,
            }
        )
        _write_report(args.report, rows)
        print(f"report written to {args.report}")
    return 0


def cmd_eval(args):
    model = load_model(args.model)
    ds = _load_dataset(args.data)
    if isinstance(model, MulticlassModel):
        pred = predict_ova(model, ds.X)
        n_classes = int(max(ds.y.max(), pred.max(), len(model.classes) - 1)) + 1
        cm = confusion_matrix(ds.y, pred, n_classes=n_classes)
        metrics = {
            "accuracy": accuracy(ds.y, pred),
            "macro_f1": macro_f1(cm),
            "mcc": mcc(cm),
        }
    else:
        scores = predict(model, ds.X)
        pred = (scores >= 0.5).astype(int)
        metrics = {
            "accuracy": accuracy(ds.y, pred),
            "auc": roc_auc(ds.y, scores),
        }
    for name, value in metrics.items():
        print(f"{name} {value:.4f}")
    if args.report:
        _write_report(
            args.report,
            [{"summary": True, "command": "eval", "n": ds.n, "metrics": metrics}],
        )
    return 0


def cmd_gen(args):
    if args.kind == "fig1":
        n_test = args.test_n if args.test_n is not None else 625
        tr, te = generate_fig1_synthetic(args.n, n_test, seed=args.seed)
        write_sparse_text(tr, args.out)
        print(f"wrote {tr.n} samples to {args.out}")
        if args.test_out:
            write_sparse_text(te, args.test_out)
            print(f"wrote {te.n} samples to {args.test_out}")
        return 0

    def make(n, seed):
        if args.kind == "checkerboard":
            return generate_checkerboard(n, seed=seed)
        return generate_blobs(n, n_classes=args.classes, seed=seed)

    ds = make(args.n, args.seed)
    write_sparse_text(ds, args.out)
    print(f"wrote {ds.n} samples to {args.out}")
    if args.test_out:
        n_test = args.test_n if args.test_n is not None else args.n
        te = make(n_test, args.seed + 1)
        write_sparse_text(te, args.test_out)
        print(f"wrote {te.n} samples to {args.test_out}")
    return 0


def _peak_rss_kib():
    # VmHWM restarts with this process image; ru_maxrss survives exec and
    # would report the launching process's peak instead
    try:
        with open("/proc/self/status") as f:
            for line in f:
                if line.startswith("VmHWM:"):
                    return int(line.split()[1])
    except OSError:
        pass
    import resource

    return resource.getrusage(resource.RUSAGE_SELF).ru_maxrss


def _probe_run(n, sigma, lam, iters, seed=0):
    """Child-process body of --mem-probe: train once, print peak RSS (KiB)."""
    ds = generate_checkerboard(n, seed=seed)
    cfg = TrainConfig(
        lambda_=lam, kernel=RadialKernel(sigma=sigma), t_max=iters, eps=1e-300
    )
    train(ds, cfg)
    print(_peak_rss_kib())


def _probe_rss_kib(n, sigma, lam, iters, seed):
    code = (
        "import sys\n"
        "from mcmklr.cli import _probe_run\n"
        "_probe_run(int(sys.argv[1]), float(sys.argv[2]), float(sys.argv[3]),\n"
        "           int(sys.argv[4]), int(sys.argv[5]))\n"
    )
    proc = subprocess.run(
        [sys.executable, "-c", code, str(n), repr(sigma), repr(lam), str(iters), str(seed)],
        capture_output=True,
        text=True,
    )
    if proc.returncode != 0:
        raise NumericalError(f"memory probe failed for n={n}: {proc.stderr.strip()}")
    return int(proc.stdout.strip().splitlines()[-1])


def cmd_bench(args):
    sizes = [int(v) for v in args.sizes.split(",") if v.strip()]
    if not sizes:
        raise ValidationError("--sizes must list at least one size")
    if min(sizes) < 2:
        raise ValidationError("every size must be >= 2")
    if args.reps < 1:
        raise ValidationError("--reps must be >= 1")

    rows = []
    for n in sizes:
        ds = generate_checkerboard(n, seed=args.seed)
        cfg = TrainConfig(
            lambda_=args.lam,
            kernel=RadialKernel(sigma=args.sigma),
            t_max=args.iters,
            eps=1e-300,  # gradient never reaches this: runs exactly t_max steps
        )
        per_iter = []
        padded = None
        for _ in range(args.reps):
            diag = train(ds, cfg).diagnostics
            per_iter.append(diag["train_seconds"] / max(diag["iterations"], 1))
            padded = diag["padded_size"]
        row = {"n": n, "padded": padded, "sec_per_iter": float(np.median(per_iter))}
        if args.mem_probe:
            row["maxrss_kib"] = _probe_rss_kib(n, args.sigma, args.lam, args.iters, args.seed)
        rows.append(row)

    header = f"{'n':>10}  {'padded':>10}  {'sec/iter':>12}  {'ratio':>7}"
    if args.mem_probe:
        header += f"  {'maxrss_kib':>12}"
    print(header)
    for i, row in enumerate(rows):
        ratio = "-" if i == 0 else f"{row['sec_per_iter'] / rows[i - 1]['sec_per_iter']:.2f}"
        line = f"{row['n']:>10}  {row['padded']:>10}  {row['sec_per_iter']:>12.6f}  {ratio:>7}"
        if args.mem_probe:
            line += f"  {row['maxrss_kib']:>12}"
        print(line)

    if args.report:
        summary = {
            "summary": True,
            "command": "bench",
            "sizes": sizes,
            "iters": args.iters,
            "reps": args.reps,
            "sigma": args.sigma,
            "lambda": args.lam,
        }
        _write_report(args.report, rows + [summary])
    return 0


def build_parser():
    p = argparse.ArgumentParser(
        prog="mcmklr",
        description="Kernel logistic regression on a multilevel circulant lattice.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="fit a model and write it to disk")
    t.add_argument("--data", required=True, help="training set, sparse text format")
    t.add_argument("--sigma", type=float, default=1.0, help="kernel width exponent g(r)=exp(-sigma r^2)")
    t.add_argument("--lambda", dest="lam", type=float, default=1e-3, help="ridge weight")
    t.add_argument("--levels", default="auto:3", help="'auto[:q]' or comma list, e.g. 15,15,15")
    t.add_argument("--h", type=float, default=1.0, help="lattice step per level")
    t.add_argument("--tmax", type=int, default=30, help="Newton iteration cap")
    t.add_argument("--eps", type=float, default=1e-5, help="gradient-norm stopping threshold")
    t.add_argument("--delta", type=float, default=0.5, help="Armijo backtracking factor, in (0,1)")
    t.add_argument("--beta", type=float, default=0.1, help="Armijo slope fraction, in (0,0.5)")
    t.add_argument("--solver", choices=("mcm", "exact"), default="mcm")
    t.add_argument("--multiclass", action="store_true", help="one-vs-all over all labels")
    t.add_argument("--scale", action="store_true", help="min-max scale features to [0,1]")
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--jobs", type=int, default=1, help="parallel one-vs-all trainings")
    t.add_argument("--out", required=True, help="model file to write")
    t.add_argument("--report", help="JSON-lines report path")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="score a model on a labeled dataset")
    e.add_argument("--model", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--report", help="JSON-lines report path")
    e.set_defaults(func=cmd_eval)

    g = sub.add_parser("gen", help="write a synthetic dataset")
    g.add_argument("--kind", choices=("checkerboard", "fig1", "blobs"), required=True)
    g.add_argument("--n", type=int, default=3375, help="sample count (fig1: training half)")
    g.add_argument("--classes", type=int, default=3, help="blobs only")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.add_argument("--test-out", help="also write a disjoint test set")
    g.add_argument("--test-n", type=int, help="test set size (fig1 default 625)")
    g.set_defaults(func=cmd_gen)

    b = sub.add_parser("bench", help="per-iteration training time across sizes")
    b.add_argument("--sizes", required=True, help="comma list, e.g. 16384,32768,65536")
    b.add_argument("--iters", type=int, default=5, help="forced Newton iterations per run")
    b.add_argument("--reps", type=int, default=3, help="repetitions; median is reported")
    b.add_argument("--sigma", type=float, default=256.0)
    b.add_argument("--lambda", dest="lam", type=float, default=1e-4)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--mem-probe", action="store_true", help="measure peak RSS per size in a subprocess")
    b.add_argument("--report", help="JSON-lines report path")
    b.set_defaults(func=cmd_bench)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on bad flags; the contract reserves 2 for data
        # errors, so usage problems map to 1 (--help stays 0)
        return 0 if exc.code == 0 else 1
    try:
        return args.func(args)
    except (ValidationError, CapExceededError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (DataFormatError, DimensionError, UndefinedMetricError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())

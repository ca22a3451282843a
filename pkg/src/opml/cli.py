"""Command-line front end.

Every command writes its outputs plus a ``*.manifest.json`` into the output
directory (``--out-dir``, else ``$OPML_OUTPUT_DIR``, else ``./opml-out``).
``opml replay MANIFEST`` reruns a manifest and compares output bytes.

Exit codes: 0 success, 1 usage error, 2 data error, 3 check violation.
"""
import argparse
import csv
import hashlib
import json
import os
import sys
import tempfile
import time
from pathlib import Path

import numpy as np

from . import __version__
from .data import DatasetError, SplitSpec, bundled_names, load_bundled, load_csv, make_stream, normalize
from .evaluation import DEFAULT_GAMMA_GRID, error_rate, repeated_eval
from .metric import save_metric
from .theory import CHECKS, run_suite
from .timing import RATIO_WINDOW, REFERENCE_MS, measure_update_times
from .trainer import TRIPLET_FLAGS, TrainConfig, train

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_VIOLATION = 0, 1, 2, 3
ENV_OUT = "OPML_OUTPUT_DIR"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _triplet_gamma(text):
    v = float(text)
    if not 0.0 < v < 0.25:
        raise argparse.ArgumentTypeError(f"{v} outside (0, 1/4)")
    return v


def _positive(text):
    v = float(text)
    if not v > 0.0:
        raise argparse.ArgumentTypeError(f"{v} must be positive")
    return v


def _pos_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"{v} must be >= 1")
    return v


def _grid(text):
    if text.lower() in ("", "none", "off"):
        return ()
    return tuple(_triplet_gamma(t) for t in text.split(","))


# -- datasets and files -----------------------------------------------------

def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _load(source):
    """A CSV path, or the name of a bundled dataset."""
    p = Path(source)
    if p.is_file():
        return load_csv(p), {"source": source, "sha256": _sha256(p)}
    if source in bundled_names():
        ds = load_bundled(source)
        return ds, {"source": source, "bundled": True}
    raise DatasetError(f"{source}: no such file or bundled dataset "
                       f"(bundled: {', '.join(bundled_names())})")


def _out_dir(args):
    d = Path(args.out_dir or os.environ.get(ENV_OUT) or "opml-out")
    d.mkdir(parents=True, exist_ok=True)
    return d


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _manifest(args, argv, out_dir, stem, outputs, datasets=(), volatile=(), timings=None, **extra):
    # outputs are compared byte-for-byte on replay; volatile ones (timings) are not
    m = {
        "tool": "opml", "version": __version__, "command": args.command,
        "argv": _portable_argv(argv),
        "datasets": list(datasets),
        "outputs": {name: _sha256(out_dir / name) for name in outputs},
        "volatile_outputs": list(volatile),
        "timings": timings or {},
    }
    m.update(extra)
    path = out_dir / f"{stem}.manifest.json"
    _write_json(path, m)
    return path


def _portable_argv(argv):
    # drop the output directory so a replay can redirect it
    out, skip = [], False
    for tok in argv:
        if skip:
            skip = False
            continue
        if tok == "--out-dir":
            skip = True
            continue
        if tok.startswith("--out-dir="):
            continue
        out.append(tok)
    return out


# -- commands ---------------------------------------------------------------

def _config(args):
    return TrainConfig(gamma=args.gamma, gamma1=args.gamma1, gamma2=args.gamma2, seed=args.seed,
                       record_trace=bool(getattr(args, "trace", False)))


def _split(args, mode="shuffled", parts=0):
    return SplitSpec(train_fraction=args.train_fraction, seed=args.split_seed, mode=mode, parts=parts)


def cmd_train(args, argv):
    ds, meta = _load(args.dataset)
    out_dir = _out_dir(args)
    cfg = _config(args)
    spec = _split(args, "coldstart" if args.coldstart else "shuffled", args.coldstart or 0)
    tr, te = make_stream(ds, spec)
    tr, te, norm = normalize(tr, te)
    t0 = time.perf_counter()
    L, trace = train(tr, cfg, args.algo, dim=ds.dim)
    elapsed = time.perf_counter() - t0
    n_triplets = sum(trace.counts[f] for f in TRIPLET_FLAGS)
    if n_triplets == 0:
        print("warning: no triplets formed; writing the identity metric", file=sys.stderr)
    stem = args.name or f"{ds.name}_{args.algo}"
    metric_name = f"{stem}.metric"
    save_metric(out_dir / metric_name, L)
    outputs = [metric_name]
    err = error_rate(L, tr, te, args.k)
    report = {
        "dataset": ds.name, "algo": args.algo, "config": cfg.to_dict(), "split": spec.to_dict(),
        "k": args.k, "test_error": err, "train_size": len(tr), "test_size": len(te), "dim": ds.dim,
        "step_counts": dict(sorted(trace.counts.items())), "normalization": json.loads(norm.to_json()),
    }
    _write_json(out_dir / f"{stem}.report.json", report)
    outputs.append(f"{stem}.report.json")
    if args.trace:
        trace.to_csv(out_dir / f"{stem}.trace.csv")
        outputs.append(f"{stem}.trace.csv")
    path = _manifest(args, argv, out_dir, stem, outputs, [meta],
                     timings={"train_s": elapsed}, config=cfg.to_dict(), split=spec.to_dict(), k=args.k)
    print(f"{ds.name} {args.algo}: test error {err:.4f} ({len(tr)} train / {len(te)} test), "
          f"{trace.counts['active']} active updates")
    print(f"metric: {out_dir / metric_name}\nmanifest: {path}")
    return EXIT_OK


def _fmt_err(rep):
    return f"{rep.error_rate_mean:.3f}±{rep.error_rate_std:.3f}"


def cmd_bench(args, argv):
    out_dir = _out_dir(args)
    cfg = _config(args)
    algos = ["identity"] + [a for a in args.algos.split(",") if a]
    for a in algos[1:]:
        if a not in ("opml", "copml"):
            raise UsageError(f"unknown algorithm {a!r}")
    split = _split(args)
    rows, timing_rows, reports, metas, failed = [], [], [], [], []
    for source in args.datasets:
        try:
            ds, meta = _load(source)
        except (DatasetError, OSError) as exc:
            print(f"skipping {source}: {exc}", file=sys.stderr)
            failed.append({"source": source, "error": str(exc)})
            continue
        metas.append(meta)
        row = [ds.name, len(ds), ds.dim, ds.num_classes]
        cells = []
        for algo in algos:
            rep = repeated_eval(ds, algo, cfg, args.runs, args.k, split,
                                args.grid if algo != "identity" else None, args.cv_folds)
            reports.append(rep.to_dict(timing=False))
            row += [rep.error_rate_mean, rep.error_rate_std]
            cells.append(f"{algo} {_fmt_err(rep)}")
            if algo != "identity":
                timing_rows.append([ds.name, algo, rep.wall_time_total_s, rep.time_per_sample_ms])
        rows.append(row)
        print(f"{ds.name:10s} " + "  ".join(cells), flush=True)
    header = ["dataset", "samples", "dim", "classes"]
    for algo in algos:
        header += [f"{algo}_mean", f"{algo}_std"]
    stem = args.name or "bench"
    _write_csv(out_dir / f"{stem}.csv", header, rows)
    _write_json(out_dir / f"{stem}.json", {"reports": reports, "failed": failed,
                                           "config": cfg.to_dict(), "split": split.to_dict(),
                                           "runs": args.runs, "k": args.k,
                                           "gamma_grid": list(args.grid)})
    _write_csv(out_dir / f"{stem}.timing.csv",
               ["dataset", "algo", "wall_time_total_s", "time_per_sample_ms"], timing_rows)
    _manifest(args, argv, out_dir, stem, [f"{stem}.csv", f"{stem}.json"], metas,
              volatile=[f"{stem}.timing.csv"], config=cfg.to_dict(), split=split.to_dict(),
              runs=args.runs, k=args.k)
    if failed:
        print(f"{len(failed)} dataset(s) failed: " + ", ".join(f["source"] for f in failed), file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


def cmd_coldstart(args, argv):
    ds, meta = _load(args.dataset)
    out_dir = _out_dir(args)
    cfg = _config(args)
    rows, reports = [], []
    for parts in args.parts:
        split = _split(args, "coldstart", parts)
        tr, _ = make_stream(ds, split)
        prefix = int(np.argmax(tr.labels != tr.labels[0])) if np.any(tr.labels != tr.labels[0]) else len(tr)
        res = {}
        for algo in ("identity", "opml", "copml"):
            rep = repeated_eval(ds, algo, cfg, args.runs, args.k, split)
            res[algo] = rep
            reports.append(dict(rep.to_dict(timing=False), parts=parts))
        rows.append([f"{ds.name}-{parts}", parts, prefix,
                     res["identity"].error_rate_mean, res["opml"].error_rate_mean,
                     res["opml"].error_rate_std, res["copml"].error_rate_mean,
                     res["copml"].error_rate_std])
        print(f"{ds.name}-{parts:<3d} single-class prefix {prefix:4d}  euclid {res['identity'].error_rate_mean:.3f}  "
              f"opml {_fmt_err(res['opml'])}  copml {_fmt_err(res['copml'])}", flush=True)
    stem = args.name or f"{ds.name}_coldstart"
    _write_csv(out_dir / f"{stem}.csv",
               ["stream", "parts", "single_class_prefix", "identity_mean", "opml_mean", "opml_std",
                "copml_mean", "copml_std"], rows)
    _write_json(out_dir / f"{stem}.json", {"reports": reports, "config": cfg.to_dict(),
                                           "runs": args.runs, "k": args.k})
    _manifest(args, argv, out_dir, stem, [f"{stem}.csv", f"{stem}.json"], [meta],
              config=cfg.to_dict(), runs=args.runs, k=args.k)
    return EXIT_OK


def cmd_theory(args, argv):
    out_dir = _out_dir(args)
    checks = CHECKS if "all" in args.check else tuple(args.check)
    lo, hi = args.gamma_range
    if lo >= hi:
        raise UsageError("--gamma-range needs LO < HI")
    if args.dims[0] < 1 or args.dims[0] > args.dims[1]:
        raise UsageError("--dims needs 1 <= MIN <= MAX")
    report = run_suite(checks, args.trials, tuple(args.dims), (lo, hi), args.gamma, args.seed,
                       tuple(args.datasets))
    stem = args.name or "theory"
    (out_dir / f"{stem}.json").write_text(report.to_json() + "\n")
    (out_dir / f"{stem}.txt").write_text(report.table() + "\n")
    _manifest(args, argv, out_dir, stem, [f"{stem}.json", f"{stem}.txt"])
    print(report.table())
    if not report.passed:
        for c in report.checks:
            if not c.passed:
                print(f"VIOLATION {c.name}: {c.violations} of {c.trials}, worst margin {c.worst_margin:.3e}",
                      file=sys.stderr)
        return EXIT_VIOLATION
    return EXIT_OK


def cmd_timing(args, argv):
    out_dir = _out_dir(args)
    dims = sorted(set(args.dims) | set(args.scaling_dims))
    res = measure_update_times(dims, args.samples, args.repeats, seed=args.seed)
    ratios = res.ratios(args.min_ratio_dim)
    lo, hi = RATIO_WINDOW
    rows = [[d, res.median_ms[d], REFERENCE_MS.get(d, "")] for d in dims]
    stem = args.name or "timing"
    _write_csv(out_dir / f"{stem}.csv", ["dim", "median_ms_per_sample", "reference_ms"], rows)
    ratio_rows = [{"from": a, "to": b, "ratio": r, "in_window": lo <= r <= hi}
                  for (a, b), r in ratios.items()]
    _write_json(out_dir / f"{stem}.json", {"median_ms": {str(d): v for d, v in res.median_ms.items()},
                                           "reference_ms": {str(d): v for d, v in REFERENCE_MS.items()},
                                           "ratios": ratio_rows, "window": [lo, hi],
                                           "samples": args.samples, "repeats": args.repeats})
    _manifest(args, argv, out_dir, stem, [], volatile=[f"{stem}.csv", f"{stem}.json"])
    for d in dims:
        ref = REFERENCE_MS.get(d)
        print(f"d={d:5d}  {res.median_ms[d]:9.4f} ms/sample" + (f"  (published {ref} ms)" if ref else ""))
    bad = [r for r in ratio_rows if not r["in_window"]]
    for r in ratio_rows:
        print(f"time({r['to']})/time({r['from']}) = {r['ratio']:.2f}  {'ok' if r['in_window'] else 'OUTSIDE'} [{lo}, {hi}]")
    return EXIT_VIOLATION if bad else EXIT_OK


def cmd_replay(args, argv):
    mpath = Path(args.manifest)
    try:
        manifest = json.loads(mpath.read_text())
        old_argv = manifest["argv"]
    except (OSError, ValueError, KeyError) as exc:
        print(f"cannot read manifest {mpath}: {exc}", file=sys.stderr)
        return EXIT_DATA
    for meta in manifest.get("datasets", []):
        if "sha256" in meta:
            p = Path(meta["source"])
            if not p.is_file() or _sha256(p) != meta["sha256"]:
                print(f"dataset {meta['source']} is missing or changed since the original run", file=sys.stderr)
                return EXIT_DATA
    target = Path(args.out_dir) if args.out_dir else Path(tempfile.mkdtemp(prefix="opml-replay-"))
    code = main(old_argv + ["--out-dir", str(target)])
    if code not in (EXIT_OK, EXIT_VIOLATION):
        return code
    src_dir = mpath.parent
    mismatched = []
    for name, digest in manifest["outputs"].items():
        new = target / name
        if not new.is_file() or _sha256(new) != digest:
            mismatched.append(name)
    for name in manifest["outputs"]:
        status = "MISMATCH" if name in mismatched else "identical"
        print(f"{status:9s} {name}")
    for name in manifest.get("volatile_outputs", []):
        print(f"{'skipped':9s} {name} (timing)")
    print(f"replayed into {target} (original outputs in {src_dir})")
    return EXIT_VIOLATION if mismatched else EXIT_OK


# -- parser -----------------------------------------------------------------

def _add_common(p, train_flags=True):
    p.add_argument("--out-dir", help=f"output directory (default ${ENV_OUT} or ./opml-out)")
    p.add_argument("--name", help="stem for output files")
    if train_flags:
        p.add_argument("--gamma", type=_triplet_gamma, default=0.1, help="OPML regularizer, in (0, 1/4)")
        p.add_argument("--gamma1", type=_positive, default=0.1, help="COPML pair-step regularizer")
        p.add_argument("--gamma2", type=_triplet_gamma, default=0.1, help="COPML triplet regularizer, in (0, 1/4)")
        p.add_argument("--seed", type=int, default=0, help="triplet sampling seed")
        p.add_argument("--split-seed", type=int, default=0, help="train/test split seed")
        p.add_argument("--train-fraction", type=float, default=0.5)
        p.add_argument("--k", type=_pos_int, default=5, help="neighbours for k-NN")


def build_parser():
    parser = _Parser(prog="opml", description="One-pass online metric learning.")
    parser.add_argument("--version", action="version", version=f"opml {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train", help="train one metric on a dataset and evaluate k-NN on its test split")
    p.add_argument("dataset", help="CSV path (label in the last column) or bundled dataset name")
    p.add_argument("--algo", choices=("opml", "copml"), default="opml")
    p.add_argument("--coldstart", type=_pos_int, metavar="PARTS",
                   help="present the train part as a cold-start stream with PARTS blocks per class")
    p.add_argument("--trace", action="store_true", help="also write the per-step trace CSV")
    _add_common(p)

    p = sub.add_parser("bench", help="repeated-split k-NN error table")
    p.add_argument("datasets", nargs="+", help="CSV paths or bundled dataset names")
    p.add_argument("--runs", type=_pos_int, default=100)
    p.add_argument("--algos", default="opml,copml", help="comma list from opml,copml")
    p.add_argument("--grid", type=_grid, default=DEFAULT_GAMMA_GRID,
                   help="comma list of gammas for cross-validation, or 'none' for the fixed --gamma")
    p.add_argument("--cv-folds", type=_pos_int, default=3)
    _add_common(p)

    p = sub.add_parser("coldstart", help="OPML against COPML on cold-start streams")
    p.add_argument("dataset")
    p.add_argument("--parts", type=_pos_int, nargs="+", default=[10, 5, 2])
    p.add_argument("--runs", type=_pos_int, default=20)
    _add_common(p)

    p = sub.add_parser("theory", help="randomized and trace-based bound checks")
    p.add_argument("--check", nargs="+", choices=("all",) + CHECKS, default=["all"])
    p.add_argument("--trials", type=_pos_int, default=10000)
    p.add_argument("--dims", type=_pos_int, nargs=2, default=[2, 64], metavar=("MIN", "MAX"))
    p.add_argument("--gamma-range", type=_triplet_gamma, nargs=2, default=[0.01, 0.24], metavar=("LO", "HI"))
    p.add_argument("--gamma", type=_triplet_gamma, default=0.1, help="regularizer for trace-based checks")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--datasets", nargs="*", default=["iris", "wine", "breast"],
                   help="bundled datasets for trace-based checks")
    _add_common(p, train_flags=False)

    p = sub.add_parser("timing", help="per-sample update time and its scaling with d")
    p.add_argument("--dims", type=_pos_int, nargs="+", default=[21, 64, 310])
    p.add_argument("--scaling-dims", type=_pos_int, nargs="*", default=[256, 512, 1024])
    p.add_argument("--min-ratio-dim", type=_pos_int, default=256,
                   help="smallest d whose doubling ratio is checked")
    p.add_argument("--samples", type=_pos_int, default=200)
    p.add_argument("--repeats", type=_pos_int, default=5)
    p.add_argument("--seed", type=int, default=0)
    _add_common(p, train_flags=False)

    p = sub.add_parser("replay", help="rerun a manifest and compare output bytes")
    p.add_argument("manifest")
    p.add_argument("--out-dir", help="where to write the replayed outputs (default: a new temp dir)")
    return parser


COMMANDS = {"train": cmd_train, "bench": cmd_bench, "coldstart": cmd_coldstart,
            "theory": cmd_theory, "timing": cmd_timing, "replay": cmd_replay}


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return COMMANDS[args.command](args, argv)
    except UsageError as exc:
        print(f"opml {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DatasetError, OSError) as exc:
        print(f"opml {args.command}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"opml {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

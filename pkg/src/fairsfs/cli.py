"""Command-line entry point.

Exit codes: 0 success, 1 invalid arguments, 2 data or runtime error.
Flag defaults can be overridden through ``FAIRSFS_<FLAG>`` environment
variables (for example ``FAIRSFS_ALPHA=0.05``).
"""

import argparse
import csv
import hashlib
import json
import logging
import math
import os
import sys

from . import __version__, kernels, oracle
from .dataset import DataError, load_csv, make_stream
from .evaluation import CLASSIFIERS, EvaluationError, cross_validate, read_report, write_report
from .metrics import MetricError
from .selection import (
    RESCUE_MODES,
    SelectionError,
    SelectorConfig,
    audit_fairness,
    baseline_relevance_only,
    run,
    write_trace,
)

log = logging.getLogger("fairsfs")

MAX_SYNTH_NODES = 20


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _env(name, default):
    return os.environ.get(f"FAIRSFS_{name}", default)


def _alpha(text):
    try:
        a = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not 0.0 < a < 1.0:
        raise argparse.ArgumentTypeError(f"alpha must be in (0, 1), got {a}")
    return a


def _max_k(text):
    if str(text).lower() in ("inf", "full", "none"):
        return None
    try:
        k = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"max-k must be an integer or 'inf', got {text!r}") from None
    if k < 0:
        raise argparse.ArgumentTypeError("max-k must be >= 0")
    return k


def sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_manifest(out_dir, command, args, inputs, outputs, name="manifest.json"):
    manifest = {
        "command": command,
        "args": args,
        "inputs": {k: {"path": os.path.abspath(p), "sha256": sha256(p)} for k, p in inputs.items()},
        "outputs": {os.path.basename(p): sha256(p) for p in outputs},
        "version": __version__,
        "kernel_backend": kernels.BACKEND,
    }
    path = os.path.join(out_dir, name)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
        fh.write("\n")
    return path


def _read_manifest_near(path):
    cand = os.path.join(os.path.dirname(os.path.abspath(path)), "manifest.json")
    if os.path.exists(cand):
        with open(cand, encoding="utf-8") as fh:
            return json.load(fh)
    return None


# -- commands ----------------------------------------------------------------

def cmd_select(a):
    cfg = SelectorConfig(alpha=a.alpha, max_k=a.max_k, rescue_mode=a.rescue_mode)
    table = load_csv(a.data, a.target, a.sensitive, a.bins)
    stream = make_stream(table, a.order, a.seed)
    os.makedirs(a.out, exist_ok=True)
    outputs = []
    names = table.names
    if a.method == "fairsfs":
        selected, state = run(table, stream, cfg)
        ok, report = audit_fairness(table, selected, cfg, state.mb_s)
        trace_path = os.path.join(a.out, "trace.jsonl")
        write_trace(trace_path, state, table)
        audit_path = os.path.join(a.out, "audit.json")
        with open(audit_path, "w", encoding="utf-8") as fh:
            json.dump({
                "passed": ok,
                "mb_s": [names[i] for i in state.mb_s],
                "certificates": {names[x]: (None if z is None else [names[v] for v in z])
                                 for x, z in report.items()},
            }, fh, indent=1, sort_keys=True)
            fh.write("\n")
        outputs += [trace_path, audit_path]
        if not ok:
            log.warning("audit: %s lack a blocking set",
                        ", ".join(names[x] for x, z in report.items() if z is None))
    else:
        selected = baseline_relevance_only(table, stream, cfg)
    sel_path = os.path.join(a.out, "selected.txt")
    with open(sel_path, "w", encoding="utf-8") as fh:
        fh.writelines(names[i] + "\n" for i in selected)
    outputs.insert(0, sel_path)
    args = {
        "data": os.path.abspath(a.data), "target": a.target, "sensitive": a.sensitive,
        "alpha": a.alpha, "max_k": a.max_k, "order": a.order, "seed": a.seed,
        "bins": a.bins, "method": a.method, "rescue_mode": a.rescue_mode,
    }
    _write_manifest(a.out, "select", args, {"data": a.data}, outputs)
    print(f"{len(selected)} features selected: {', '.join(names[i] for i in selected)}")
    if table.dropped_rows:
        print(f"{table.dropped_rows} rows with missing values dropped")


def cmd_evaluate(a):
    near = _read_manifest_near(a.features) or {}
    near_args = near.get("args", {})
    target = a.target or near_args.get("target")
    sensitive = a.sensitive or near_args.get("sensitive")
    bins = a.bins if a.bins is not None else near_args.get("bins", 5)
    if not target or not sensitive:
        raise UsageError("--target and --sensitive are required (no manifest next to the features file)")
    table = load_csv(a.data, target, sensitive, bins)
    with open(a.features, encoding="utf-8") as fh:
        names = [line.strip() for line in fh if line.strip()]
    features = []
    for name in names:
        try:
            idx = table.index_of(name)
        except DataError:
            raise DataError(f"unknown feature {name!r} in {a.features}") from None
        if idx in (table.sensitive_index, table.target_index):
            raise DataError(f"feature file lists the {'sensitive' if idx == table.sensitive_index else 'target'} column {name!r}")
        features.append(idx)
    positive = None
    if a.positive_group is not None:
        positive = table.encode(table.sensitive_index, [a.positive_group])[0]
    rep = cross_validate(table, features, a.classifier, a.folds, a.seed, positive)
    os.makedirs(a.out, exist_ok=True)
    path = os.path.join(a.out, "report.jsonl")
    write_report(path, rep)
    args = {
        "data": os.path.abspath(a.data), "features": os.path.abspath(a.features),
        "target": target, "sensitive": sensitive, "bins": bins, "classifier": a.classifier,
        "folds": a.folds, "seed": a.seed, "positive_group": a.positive_group,
    }
    _write_manifest(a.out, "evaluate", args, {"data": a.data, "features": a.features}, [path])
    m = rep.mean
    pe = "n/a" if m["pe"] is None else f"{m['pe']:.4f}"
    print(f"{a.classifier}: ACC {m['acc']:.4f}  SPD {m['spd']:.4f}  PE {pe}")


def cmd_synth(a):
    if not 2 <= a.nodes <= MAX_SYNTH_NODES:
        raise UsageError(f"--nodes must be between 2 and {MAX_SYNTH_NODES}")
    if not 0.0 <= a.edge_prob <= 1.0:
        raise UsageError("--edge-prob must be in [0, 1]")
    if a.n < 1:
        raise UsageError("--n must be positive")
    bn = oracle.random_network(a.nodes, a.edge_prob, seed=a.seed)
    table = oracle.sample(bn, a.n, seed=a.seed)
    fair = oracle.fair_feature_set(bn, bn.target, bn.sensitive, a.max_k)
    prefix = a.out_prefix
    if os.path.dirname(prefix):
        os.makedirs(os.path.dirname(prefix), exist_ok=True)
    net_path, csv_path, fair_path = prefix + ".net.json", prefix + ".csv", prefix + ".fair.txt"
    oracle.save_network(bn, net_path)
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(bn.names)
        w.writerows(table.codes.T.tolist())
    with open(fair_path, "w", encoding="utf-8") as fh:
        fh.writelines(bn.names[v] + "\n" for v in sorted(fair))
    args = {"nodes": a.nodes, "edge_prob": a.edge_prob, "n": a.n, "seed": a.seed,
            "max_k": a.max_k, "out_prefix": os.path.abspath(prefix)}
    _write_manifest(os.path.dirname(os.path.abspath(prefix)), "synth", args, {},
                    [net_path, csv_path, fair_path], os.path.basename(prefix) + ".manifest.json")
    print(f"sensitive={bn.sensitive} target={bn.target} fair set: {', '.join(bn.names[v] for v in sorted(fair))}")


def _fmt(v):
    return "n/a" if v is None else f"{v:.4f}"


def report_table(rows):
    """Aligned text table; ``*`` marks the best value of each metric."""
    best = {}
    for key, pick in (("acc", max), ("spd", min), ("pe", min)):
        vals = [r[key] for r in rows if r[key] is not None]
        best[key] = pick(vals) if vals else None
    header = ["run", "classifier", "#feat", "ACC ↑", "SPD ↓", "PE ↓"]
    body = []
    for r in rows:
        cells = [r["run"], r["classifier"], str(r["n_features"])]
        for key in ("acc", "spd", "pe"):
            mark = "*" if r[key] is not None and best[key] is not None and math.isclose(r[key], best[key]) else " "
            cells.append(_fmt(r[key]) + mark)
        body.append(cells)
    widths = [max(len(row[i]) for row in [header] + body) for i in range(len(header))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip() for row in [header] + body]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)


def collect_runs(root):
    rows = []
    for dirpath, _, files in sorted(os.walk(root)):
        if "report.jsonl" not in files:
            continue
        recs = read_report(os.path.join(dirpath, "report.jsonl"))
        mean = next((r for r in recs if r.get("fold") == "mean"), None)
        if mean is None:
            continue
        rows.append({
            "run": os.path.relpath(dirpath, root),
            "classifier": mean.get("classifier", "?"),
            "n_features": len(mean.get("features", [])),
            "acc": mean.get("acc"),
            "spd": mean.get("spd"),
            "pe": mean.get("pe"),
        })
    return rows


def cmd_report(a):
    if not os.path.isdir(a.runs):
        raise DataError(f"no such directory: {a.runs}")
    rows = collect_runs(a.runs)
    if not rows:
        raise DataError(f"no completed runs (report.jsonl) under {a.runs}")
    print(report_table(rows))


def cmd_replay(a):
    with open(a.manifest, encoding="utf-8") as fh:
        man = json.load(fh)
    for key, info in man["inputs"].items():
        if sha256(info["path"]) != info["sha256"]:
            raise DataError(f"input {key} ({info['path']}) changed since the run")
    args = dict(man["args"])
    cmd = man["command"]
    argv = [cmd]
    flag_map = {"out_prefix": None}
    for k, v in args.items():
        if k in flag_map or v is None:
            continue
        argv += ["--" + k.replace("_", "-"), "inf" if (k == "max_k" and v is None) else str(v)]
    if cmd == "synth":
        argv += ["--out-prefix", os.path.join(a.out, os.path.basename(args["out_prefix"]))]
    else:
        argv += ["--out", a.out]
    if cmd == "select" and args.get("max_k") is None:
        argv += ["--max-k", "inf"]
    ns = build_parser().parse_args(argv)
    ns.func(ns)
    out_dir = a.out
    bad = []
    for name, digest in man["outputs"].items():
        p = os.path.join(out_dir, name)
        if not os.path.exists(p) or sha256(p) != digest:
            bad.append(name)
    if bad:
        raise RuntimeError(f"replay differs in: {', '.join(bad)}")
    print(f"replay identical: {', '.join(sorted(man['outputs']))}")


# -- parser --------------------------------------------------------------------

def build_parser():
    p = _Parser(prog="fairsfs", description="Fair streaming feature selection")
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("select", help="run streaming selection on a CSV file")
    s.add_argument("--data", required=True)
    s.add_argument("--target", required=True)
    s.add_argument("--sensitive", required=True)
    s.add_argument("--alpha", type=_alpha, default=_alpha(_env("ALPHA", "0.01")))
    s.add_argument("--max-k", type=_max_k, default=_max_k(_env("MAX_K", "3")))
    s.add_argument("--order", choices=("file", "shuffle"), default=_env("ORDER", "file"))
    s.add_argument("--seed", type=int, default=int(_env("SEED", "0")))
    s.add_argument("--bins", type=int, default=int(_env("BINS", "5")))
    s.add_argument("--method", choices=("fairsfs", "baseline"), default="fairsfs")
    s.add_argument("--rescue-mode", choices=RESCUE_MODES, default=_env("RESCUE_MODE", "every_step"))
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_select)

    e = sub.add_parser("evaluate", help="cross-validate a classifier on selected features")
    e.add_argument("--data", required=True)
    e.add_argument("--features", required=True)
    e.add_argument("--target")
    e.add_argument("--sensitive")
    e.add_argument("--bins", type=int)
    e.add_argument("--classifier", choices=CLASSIFIERS, default=_env("CLASSIFIER", "lr"))
    e.add_argument("--folds", type=int, default=int(_env("FOLDS", "10")))
    e.add_argument("--seed", type=int, default=int(_env("SEED", "0")))
    e.add_argument("--positive-group")
    e.add_argument("--out", required=True)
    e.set_defaults(func=cmd_evaluate)

    y = sub.add_parser("synth", help="sample a random network with its oracle fair set")
    y.add_argument("--nodes", type=int, default=12)
    y.add_argument("--edge-prob", type=float, default=0.25)
    y.add_argument("--n", type=int, default=20000)
    y.add_argument("--seed", type=int, default=int(_env("SEED", "0")))
    y.add_argument("--max-k", type=int, default=3)
    y.add_argument("--out-prefix", required=True)
    y.set_defaults(func=cmd_synth)

    r = sub.add_parser("report", help="tabulate evaluation runs")
    r.add_argument("--runs", required=True)
    r.set_defaults(func=cmd_report)

    rp = sub.add_parser("replay", help="re-run a manifest and compare output digests")
    rp.add_argument("manifest")
    rp.add_argument("--out", required=True)
    rp.set_defaults(func=cmd_replay)
    return p


def main(argv=None):
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        args = build_parser().parse_args(argv)
        if args.verbose:
            logging.getLogger().setLevel(logging.INFO)
        args.func(args)
    except (UsageError, SelectionError, argparse.ArgumentTypeError) as exc:
        print(f"fairsfs: error: {exc}", file=sys.stderr)
        return 1
    except (DataError, EvaluationError, MetricError, FileNotFoundError, OSError,
            RuntimeError, ValueError, KeyError) as exc:
        msg = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
        print(f"fairsfs: error: {msg}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())

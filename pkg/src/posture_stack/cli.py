"""``posture-stack`` command line: generate, train, evaluate, predict.

Exit codes: 0 success, 2 usage or data error, 3 training/internal error.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import dataset as ds
from .errors import PostureStackError
from .metrics import ALGORITHMS, render_report
from .modelfile import atomic_write_text, dumps_model, read_model_file
from .stack import StackConfig, evaluate_stack, fit_stack, predict_stack_batch

log = logging.getLogger("posture_stack")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INTERNAL = 3


class UsageError(Exception):
    pass


def _load_data(path):
    try:
        return ds.load_csv(path)
    except FileNotFoundError:
        raise UsageError(f"no such file: {path}") from None
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from None


def _write(path, text):
    try:
        atomic_write_text(path, text)
    except OSError as exc:
        raise UsageError(f"cannot write {path}: {exc}") from None


def _class_summary(data):
    counts = data.class_counts()
    return ", ".join(f"{name}={int(c)}" for name, c in zip(data.schema.class_names, counts))


def cmd_generate(args):
    params = ds.PRESETS[args.preset](args.seed)
    if args.params:
        try:
            overrides = json.loads(Path(args.params).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read synthesis params {args.params}: {exc}") from None
        params = ds.SynthParams.from_dict({**overrides, "seed": args.seed}, base=params)
    data = ds.generate(params, args.n)
    _write(args.out, data.to_csv_text())
    print(f"wrote {len(data)} rows to {args.out} ({_class_summary(data)})")
    return EXIT_OK


def _train_provenance(data, train, test, args, mode):
    return {"n": len(data), "n_train": len(train), "n_test": len(test), "seed": args.seed,
            "mode": mode, "test_fraction": args.test_fraction,
            "data_fingerprint": data.fingerprint()}


def cmd_train(args):
    data = _load_data(args.data)
    mode = "paper" if args.reproduce_paper else args.mode
    train, test = ds.split(data, args.test_fraction, args.seed, stratified=True)
    if len(train) == 0 or len(test) == 0:
        raise UsageError(f"split left train={len(train)} test={len(test)} rows; need both")
    config = StackConfig.seeded(args.seed, mode=mode, k_folds=args.folds)
    try:
        model = fit_stack(train, config, n_jobs=args.jobs)
        report = evaluate_stack(model, test, _train_provenance(data, train, test, args, mode))
    except ds.ConfigError as exc:
        raise UsageError(str(exc)) from None
    except PostureStackError as exc:
        log.error("training failed: %s", exc)
        return EXIT_INTERNAL
    corr = ds.correlation_matrix(data)
    report.extra["correlation"] = corr.to_dict()

    metadata = {"seed": args.seed, "data_fingerprint": data.fingerprint(),
                "n_train": len(train), "mode": mode}
    _write(args.model_out, dumps_model(model, data.schema, metadata))
    if args.report_out:
        _write(args.report_out, render_report(report, "json"))
    if args.test_out:
        _write(args.test_out, test.to_csv_text())
    table = render_report(report, "table")
    if args.table_out:
        _write(args.table_out, table)
    print(f"mode={mode} train={len(train)} test={len(test)} seed={args.seed}")
    print(table, end="")
    print("Correlation matrix")
    print(corr.to_table(), end="")
    return EXIT_OK


def _read_model(path):
    try:
        return read_model_file(path)
    except FileNotFoundError:
        raise UsageError(f"no such file: {path}") from None


def cmd_evaluate(args):
    mf = _read_model(args.model)
    data = _load_data(args.data)
    if data.schema != mf.schema:
        raise UsageError("dataset schema does not match the model schema")
    provenance = {"n": len(data), "seed": mf.metadata.get("seed"),
                  "mode": mf.model.config.mode, "data_fingerprint": data.fingerprint()}
    report = evaluate_stack(mf.model, data, provenance)
    if args.report_out:
        _write(args.report_out, render_report(report, "json"))
    print(render_report(report, "table"), end="")
    return EXIT_OK


def cmd_predict(args):
    values = [args.egg, args.heart_rate, args.respiration_rate, args.spo2]
    if not all(math.isfinite(v) for v in values):
        raise UsageError("all four feature values must be finite")
    mf = _read_model(args.model)
    preds = predict_stack_batch(mf.model, np.array([values]))
    names = mf.schema.class_names
    layer1, layer2 = preds.row(0)
    out = {f"layer{i}": {algo: names[c] for algo, c in zip(ALGORITHMS, layer)}
           for i, layer in ((1, layer1), (2, layer2))}
    print(json.dumps(out, sort_keys=True))
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="posture-stack", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic dataset CSV")
    g.add_argument("--n", type=int, default=180)
    g.add_argument("--seed", type=int, default=42)
    g.add_argument("--out", required=True)
    g.add_argument("--preset", choices=sorted(ds.PRESETS), default="separated")
    g.add_argument("--params", help="JSON file overriding means/stds/clamps")
    g.set_defaults(func=cmd_generate)

    t = sub.add_parser("train", help="split, fit the stack, report held-out metrics")
    t.add_argument("--data", required=True)
    t.add_argument("--mode", choices=("paper", "oof"), default="oof")
    t.add_argument("--reproduce-paper", action="store_true",
                   help="alias for --mode paper (in-sample layer-2 training)")
    t.add_argument("--seed", type=int, default=42)
    t.add_argument("--test-fraction", type=float, default=0.2)
    t.add_argument("--folds", type=int, default=5)
    t.add_argument("--model-out", required=True)
    t.add_argument("--report-out")
    t.add_argument("--table-out")
    t.add_argument("--test-out", help="also write the held-out split as CSV")
    t.add_argument("--jobs", type=int, default=1)
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("evaluate", help="score a saved model on a CSV")
    e.add_argument("--model", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--report-out")
    e.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("predict", help="classify one row of feature values")
    p.add_argument("--model", required=True)
    p.add_argument("--egg", type=float, required=True)
    p.add_argument("--heart-rate", type=float, required=True)
    p.add_argument("--respiration-rate", type=float, required=True)
    p.add_argument("--spo2", type=float, required=True)
    p.set_defaults(func=cmd_predict)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, PostureStackError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception:
        log.exception("internal error")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())

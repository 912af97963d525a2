"""Command-line entry point: pesynth <subcommand> ..."""
from __future__ import annotations

import argparse
import json
import logging
import sys

from . import neuralcore as nc
from .aggregator import CrossAggregator
from .datagen import (
    DatagenConfig, DatasetRecord, TimeoutPolicy, build_aggregator_instances, build_dataset,
    read_dataset, read_instances, write_jsonl,
)
from .encoder import EncoderConfig, StateModel
from .evalkit import (
    analyze_tot_ind, describe_statement, eval_success, export_attention, failure_breakdown,
    intent_generalization, nearest_statements, operator_overlap, perfect_pe_fraction,
)
from .search import AGG_MODES, Models, PipelineConfig, SearchBudget, synthesize
from .training import TrainConfig, train_ca, train_supervised

log = logging.getLogger("pesynth")

DEFAULT_PEPS_FRACTION = 0.16


class UsageError(Exception):
    pass


def _counts(text: str) -> dict:
    out = {}
    for part in text.split(","):
        k, _, v = part.partition(":")
        out[int(k)] = int(v)
    return out


def _k_range(text: str) -> list:
    if ".." in text:
        lo, hi = text.split("..")
        return list(range(int(lo), int(hi) + 1))
    return [int(k) for k in text.split(",")]


def _budget(text: str) -> SearchBudget:
    try:
        return SearchBudget.parse(text)
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e)) from None


def read_config(path) -> dict:
    """key=value lines; '#' starts a comment."""
    out = {}
    with open(path) as f:
        for line in f:
            line = line.split("#", 1)[0].strip()
            if line:
                k, sep, v = line.partition("=")
                if not sep:
                    raise UsageError(f"{path}: expected key=value, got {line!r}")
                out[k.strip().replace("-", "_")] = v.strip()
    return out


def apply_overrides(args, parser, pairs: dict) -> None:
    for key, raw in pairs.items():
        if not hasattr(args, key):
            raise UsageError(f"unknown setting {key!r}")
        cur = getattr(args, key)
        if isinstance(cur, bool):
            val = raw.lower() in ("1", "true", "yes")
        elif isinstance(cur, SearchBudget):
            val = SearchBudget.parse(raw)
        elif isinstance(cur, (int, float)):
            val = type(cur)(raw)
        else:
            val = raw
        setattr(args, key, val)


def _load_models(args) -> Models:
    gps = StateModel.load(args.gps) if getattr(args, "gps", None) else None
    pe = StateModel.load(args.pe) if getattr(args, "pe", None) else None
    ca = CrossAggregator.load(args.ca) if getattr(args, "ca", None) else None
    if gps is None:
        raise UsageError("--gps is required")
    mode = getattr(args, "mode", "ca")
    if mode != "gps" and pe is None:
        raise UsageError("--pe is required unless --mode gps")
    if mode == "ca" and ca is None:
        raise UsageError("--ca is required for --mode ca")
    return Models(gps, pe, ca)


def _pipeline(args, depth: int = 3) -> PipelineConfig:
    peps = args.peps_budget or args.budget.scaled(DEFAULT_PEPS_FRACTION)
    return PipelineConfig(alpha=args.alpha, peps_budget=peps, total_budget=args.budget,
                          variant=args.variant, mode=args.mode, pe_mode=args.pe_mode,
                          depth=depth, parallel=args.parallel, seed=args.seed)


def _emit(args, lines) -> None:
    text = "\n".join(lines) + "\n"
    if getattr(args, "out", None):
        with open(args.out, "w") as f:
            f.write(text)
    else:
        sys.stdout.write(text)


# ------------------------------------------------------------------ commands

def cmd_datagen(args):
    dcfg = DatagenConfig(train_counts=_counts(args.train_counts), test_counts=_counts(args.test_counts),
                         seed=args.seed)
    header, train, test = build_dataset(dcfg)
    write_jsonl(args.train_out, header, train)
    write_jsonl(args.test_out, header, test)
    print(json.dumps({"train": len(train), "test": len(test), **header["stats"]}))


def _train_state(args, kind: str):
    _, records = read_dataset(args.data)
    if args.limit:
        records = records[:args.limit]
    opt = nc.OptimizerConfig(lr=args.lr)
    tcfg = TrainConfig(kind=kind, batch_size=args.batch_size, epochs=args.epochs, patience=args.patience,
                       seed=args.seed, optimizer=opt, metrics_path=args.metrics)
    model, rows = train_supervised(records, tcfg, EncoderConfig(kind=kind, z=args.z))
    model.save(args.out, {"train": tcfg.to_dict(), "data": args.data})
    print(json.dumps(rows[-1], sort_keys=True))


def cmd_train_gps(args):
    _train_state(args, "gps")


def cmd_train_pe(args):
    _train_state(args, "pe")


def cmd_gen_agg(args):
    _, records = read_dataset(args.data)
    if args.limit:
        records = records[:args.limit]
    pe = StateModel.load(args.pe)
    header, inst = build_aggregator_instances(records, pe, TimeoutPolicy(args.policy, args.unit),
                                              args.pe_mode, args.seed)
    write_jsonl(args.out, header, inst)
    print(json.dumps({"instances": len(inst), **header["omitted"]}))


def cmd_train_ca(args):
    _, inst = read_instances(args.instances)
    gps, pe = StateModel.load(args.gps), StateModel.load(args.pe)
    opt = nc.OptimizerConfig(lr=args.lr)
    tcfg = TrainConfig(kind="ca", batch_size=args.batch_size, epochs=args.epochs, patience=args.patience,
                       seed=args.seed, optimizer=opt, variant=args.variant, metrics_path=args.metrics)
    ca, rows = train_ca(inst, pe, gps, tcfg)
    ca.save(args.out, {"train": tcfg.to_dict(), "instances": args.instances})
    print(json.dumps(rows[-1], sort_keys=True))


def cmd_synth(args):
    with open(args.task) as f:
        line = next(ln for ln in f if ln.strip() and "header" not in json.loads(ln))
    rec = DatasetRecord.from_json(json.loads(line))
    models = _load_models(args)
    pcfg = _pipeline(args, args.depth or len(rec.program))
    res = synthesize(rec.examples, models, pcfg)
    _emit(args, [json.dumps(res.to_dict(pcfg.total_budget.mode == "seconds"), sort_keys=True)])


def cmd_eval(args):
    _, records = read_dataset(args.split)
    if args.limit:
        records = records[:args.limit]
    report = eval_success(records, _load_models(args), _pipeline(args))
    _emit(args, report.lines())


def cmd_analyze(args):
    if args.what == "tot-ind":
        _, records = read_dataset(args.split)
        if args.limit:
            records = records[:args.limit]
        pe = StateModel.load(args.pe)
        gps = StateModel.load(args.gps) if args.gps else None
        table = analyze_tot_ind(records, pe, args.budget, _k_range(args.k), gps)
        _emit(args, [json.dumps(r, sort_keys=True) for r in table.rows()])
        return
    if args.what == "nearest":
        ca = CrossAggregator.load(args.ca)
        near = nearest_statements(ca, args.statement, args.top, args.metric)
        _emit(args, [json.dumps({"statement": describe_statement(args.statement),
                                 "neighbours": [describe_statement(i) for i in near]})])
        return
    if args.what == "attention":
        with open(args.task) as f:
            rows = [json.loads(ln) for ln in f if ln.strip()]
        from .datagen import AggregatorInstance
        inst = AggregatorInstance.from_json(next(r for r in rows if "pe" in r))
        trace = export_attention(inst.examples, inst.solutions, _load_models(args), args.variant, inst.program)
        _emit(args, trace.to_lines())
        return
    # report-based analyses
    _, records = read_dataset(args.split)
    results = _results_from_report(args.report)
    records = records[:len(results)]
    out = {"overlap": lambda: operator_overlap(results, records),
           "failures": lambda: failure_breakdown(results, records),
           "perfect": lambda: perfect_pe_fraction(results),
           "intent": lambda: intent_generalization(results, records)}[args.what]()
    _emit(args, [json.dumps({args.what: out}, sort_keys=True)])


class _ReportRow:
    """Just enough of a SynthesisResult for the report-based analyses."""

    def __init__(self, d):
        from .aggregator import PESolution
        from .dsl import parse_program
        self.status = d["status"]
        self.solved = d["status"] == "solved"
        self.solved_by = d.get("solved_by")
        self.program = parse_program(d["program"]) if d.get("program") else None
        self.pe = [PESolution(parse_program(s["program"]), s["u"], frozenset(s["satisfied"]))
                   for s in d.get("pe", [])]


def _results_from_report(path) -> list:
    with open(path) as f:
        rows = [json.loads(ln) for ln in f if ln.strip()]
    return [_ReportRow(r) for r in rows if "task" in r]


# ------------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pesynth", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--config", help="key=value settings file")
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
        return sp

    def pipeline(sp):
        sp.add_argument("--gps", required=True)
        sp.add_argument("--pe")
        sp.add_argument("--ca")
        sp.add_argument("--alpha", type=float, default=0.8)
        sp.add_argument("--budget", type=_budget, default=SearchBudget("nodes", 600))
        sp.add_argument("--peps-budget", type=_budget, default=None)
        sp.add_argument("--mode", choices=AGG_MODES, default="ca")
        sp.add_argument("--pe-mode", choices=("all", "tot"), default="all")
        sp.add_argument("--variant", choices=("default", "pg", "pp"), default="default")
        sp.add_argument("--parallel", action="store_true")
        sp.add_argument("--out")

    sp = common(sub.add_parser("datagen", help="generate train/test JSONL"))
    sp.add_argument("--train-out", required=True)
    sp.add_argument("--test-out", required=True)
    sp.add_argument("--train-counts", default="1:150,2:1200,3:1650")
    sp.add_argument("--test-counts", default="2:100,3:100")
    sp.set_defaults(func=cmd_datagen)

    for name, fn in (("train-gps", cmd_train_gps), ("train-pe", cmd_train_pe)):
        sp = common(sub.add_parser(name, help=f"train the {name[6:].upper()} model"))
        sp.add_argument("--data", required=True)
        sp.add_argument("--out", required=True)
        sp.add_argument("--z", type=int, default=64)
        sp.add_argument("--epochs", type=int, default=12)
        sp.add_argument("--batch-size", type=int, default=32)
        sp.add_argument("--patience", type=int, default=3)
        sp.add_argument("--lr", type=float, default=1e-3)
        sp.add_argument("--limit", type=int, default=0)
        sp.add_argument("--metrics")
        sp.set_defaults(func=fn)

    sp = common(sub.add_parser("gen-agg", help="build aggregator training instances"))
    sp.add_argument("--data", required=True)
    sp.add_argument("--pe", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--policy", default="fixed_0.5",
                    choices=("fixed_0.5", "random_0.1_to_0.9", "triple_0.4_0.5_0.6"))
    sp.add_argument("--unit", type=_budget, default=SearchBudget("nodes", 100))
    sp.add_argument("--pe-mode", choices=("all", "tot"), default="all")
    sp.add_argument("--limit", type=int, default=0)
    sp.set_defaults(func=cmd_gen_agg)

    sp = common(sub.add_parser("train-ca", help="train the Cross Aggregator"))
    sp.add_argument("--instances", required=True)
    sp.add_argument("--gps", required=True)
    sp.add_argument("--pe", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--variant", choices=("default", "pg", "pp"), default="default")
    sp.add_argument("--epochs", type=int, default=10)
    sp.add_argument("--batch-size", type=int, default=32)
    sp.add_argument("--patience", type=int, default=3)
    sp.add_argument("--lr", type=float, default=1e-4)
    sp.add_argument("--metrics")
    sp.set_defaults(func=cmd_train_ca)

    sp = common(sub.add_parser("synth", help="synthesize one task"))
    sp.add_argument("--task", required=True)
    sp.add_argument("--depth", type=int, default=0)
    pipeline(sp)
    sp.set_defaults(func=cmd_synth)

    sp = common(sub.add_parser("eval", help="success ratio over a split"))
    sp.add_argument("--split", required=True)
    sp.add_argument("--limit", type=int, default=0)
    pipeline(sp)
    sp.set_defaults(func=cmd_eval)

    sp = common(sub.add_parser("analyze", help="tot-ind, overlap, failures, perfect, intent, nearest, attention"))
    sp.add_argument("what", choices=("tot-ind", "overlap", "failures", "perfect", "intent",
                                     "nearest", "attention"))
    sp.add_argument("--split")
    sp.add_argument("--report")
    sp.add_argument("--task")
    sp.add_argument("--gps")
    sp.add_argument("--pe")
    sp.add_argument("--ca")
    sp.add_argument("--variant", choices=("default", "pg", "pp"), default="default")
    sp.add_argument("--budget", type=_budget, default=SearchBudget("nodes", 100))
    sp.add_argument("--k", default="1..5")
    sp.add_argument("--statement", type=int, default=0)
    sp.add_argument("--top", type=int, default=10)
    sp.add_argument("--metric", choices=("euclidean", "cosine"), default="euclidean")
    sp.add_argument("--limit", type=int, default=0)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_analyze)
    return p


def _require(args, *names):
    missing = [n for n in names if not getattr(args, n, None)]
    if missing:
        raise UsageError("missing " + ", ".join("--" + n.replace("_", "-") for n in missing))


ANALYZE_NEEDS = {"tot-ind": ("split", "pe"), "overlap": ("split", "report"), "failures": ("split", "report"),
                 "perfect": ("split", "report"), "intent": ("split", "report"), "nearest": ("ca",),
                 "attention": ("task", "gps", "pe", "ca")}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        pairs = read_config(args.config) if args.config else {}
        for item in args.set:
            k, sep, v = item.partition("=")
            if not sep:
                raise UsageError(f"--set expects KEY=VALUE, got {item!r}")
            pairs[k.replace("-", "_")] = v
        apply_overrides(args, parser, pairs)
        if args.command == "analyze":
            _require(args, *ANALYZE_NEEDS[args.what])
    except (UsageError, ValueError) as e:
        parser.print_usage(sys.stderr)
        print(f"pesynth: error: {e}", file=sys.stderr)
        return 2
    try:
        args.func(args)
    except UsageError as e:
        print(f"pesynth: error: {e}", file=sys.stderr)
        return 2
    except Exception as e:  # runtime failure: structured message, exit 1
        print(json.dumps({"error": type(e).__name__, "message": str(e)}), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

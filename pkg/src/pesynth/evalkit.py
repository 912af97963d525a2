"""Evaluation harness and analyses over synthesis results."""
from __future__ import annotations

import dataclasses
import json
import platform
import statistics
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .aggregator import build_keyset
from .dsl import DEFAULT_CONFIG, DslConfig, enumerate_vocabulary, satisfies
from .search import (
    ModelPredictor, Models, PipelineConfig, SearchBudget, cab, pe_searches,
    synthesize,
)
from .state import replay


@dataclass
class EvalReport:
    results: list
    config: dict
    seed: int
    with_times: bool = True
    summary: dict = field(default_factory=dict)

    @property
    def success_ratio(self) -> float:
        return self.summary["success_ratio"]

    def lines(self) -> list:
        out = [json.dumps({"task": i, **r.to_dict(self.with_times)}, sort_keys=True)
               for i, r in enumerate(self.results)]
        out.append(json.dumps({"summary": self.summary, "config": self.config, "seed": self.seed},
                              sort_keys=True))
        return out

    def write(self, path) -> None:
        with open(path, "w") as f:
            f.write("\n".join(self.lines()) + "\n")


def _summarize(results, with_times: bool) -> dict:
    n = len(results)
    wins = sum(r.solved for r in results)
    nodes = [r.nodes for r in results if r.solved]
    s = {"tasks": n, "solved": wins, "success_ratio": wins / n if n else 0.0,
         "mean_nodes": statistics.fmean(nodes) if nodes else None,
         "median_nodes": statistics.median(nodes) if nodes else None,
         "solved_by": dict(sorted(Counter(r.solved_by for r in results if r.solved).items()))}
    if with_times:
        secs = [r.seconds for r in results if r.solved]
        s["mean_seconds"] = statistics.fmean(secs) if secs else None
        s["median_seconds"] = statistics.median(secs) if secs else None
        s["host"] = {"python": platform.python_version(), "machine": platform.machine()}
    return s


def eval_success(records, models: Models, pcfg: PipelineConfig,
                 cfg: DslConfig = DEFAULT_CONFIG) -> EvalReport:
    """Run the pipeline on every task; search depth is each task's program length."""
    if not records:
        raise ValueError("empty split")
    results = []
    for rec in records:
        task_cfg = dataclasses.replace(pcfg, depth=len(rec.program))
        res = synthesize(rec.examples, models, task_cfg, cfg)
        if res.solved:
            assert all(satisfies(res.program, ex, cfg) for ex in rec.examples)
        results.append(res)
    with_times = pcfg.total_budget.mode == "seconds"
    return EvalReport(results, pcfg.to_dict(), pcfg.seed, with_times, _summarize(results, with_times))


# ------------------------------------------------------------ tot / ind

@dataclass
class TotIndTable:
    k_values: list
    ind: dict          # k -> set of task ids
    tot: dict
    gps: set | None
    n_tasks: int

    def rows(self) -> list:
        out = []
        for k in self.k_values:
            row = {"k": k, "ind": len(self.ind[k]) / self.n_tasks, "tot": len(self.tot[k]) / self.n_tasks}
            if self.gps is not None:
                row["gps"] = len(self.gps) / self.n_tasks
            out.append(row)
        return out

    def dominance_holds(self) -> bool:
        return all(self.ind[k] <= self.tot[k] for k in self.k_values)


def ind_tot_flags(solutions, k: int) -> tuple[bool, bool]:
    ind = any(len(s.satisfied) >= k for s in solutions)
    union = set()
    for s in solutions:
        union |= s.satisfied
    return ind, len(union) >= k


def analyze_tot_ind(records, pe_model, budget: SearchBudget, k_values=None, gps_model=None,
                    cfg: DslConfig = DEFAULT_CONFIG) -> TotIndTable:
    """Per-example searches with ``budget`` each; GPS gets N times that budget."""
    n = len(records[0].examples)
    k_values = list(k_values or range(1, n + 1))
    ind = {k: set() for k in k_values}
    tot = {k: set() for k in k_values}
    gps = set() if gps_model is not None else None
    pred = ModelPredictor(pe_model)
    for i, rec in enumerate(records):
        out = pe_searches(rec.examples, pred, budget, len(rec.program), "all", cfg=cfg)
        for k in k_values:
            a, b = ind_tot_flags(out.solutions, k)
            if a:
                ind[k].add(i)
            if b:
                tot[k].add(i)
        if gps_model is not None:
            res = cab(rec.examples, ModelPredictor(gps_model), budget.scaled(n), len(rec.program), cfg=cfg)
            if res.solved:
                gps.add(i)
    table = TotIndTable(k_values, ind, tot, gps, len(records))
    if not table.dominance_holds():
        raise AssertionError("ind success set is not contained in tot success set")
    return table


# ------------------------------------------------------------ breakdowns

def _pe_programs(r):
    # a result (live or parsed from a report) or a bare list of programs
    if hasattr(r, "pe"):
        return [s.program for s in r.pe]
    return r


def operator_overlap(results, records) -> float:
    """Share of ground-truth lines whose operator appears in some PE solution of the task."""
    hit = total = 0
    for r, rec in zip(results, records):
        ops = {st.op.index for p in _pe_programs(r) for st in p.statements}
        for st in rec.program.statements:
            total += 1
            hit += st.op.index in ops
    return hit / total if total else 0.0


def failure_breakdown(results, records) -> dict:
    """Per operator: fraction of its ground-truth occurrences that sit in failed tasks."""
    fails, totals = Counter(), Counter()
    for r, rec in zip(results, records):
        for st in rec.program.statements:
            name = str(st.op)
            totals[name] += 1
            if not r.solved:
                fails[name] += 1
    return {k: {"failed": fails[k], "total": totals[k], "rate": fails[k] / totals[k]}
            for k in sorted(totals)}


def perfect_pe_fraction(results) -> float:
    if not results:
        return 0.0
    return sum(r.solved_by == "pe" for r in results) / len(results)


def intent_generalization(results, records, cfg: DslConfig = DEFAULT_CONFIG) -> float:
    """Fraction of all tasks whose synthesized program also fits the held-out examples."""
    if not results:
        return 0.0
    good = 0
    for r, rec in zip(results, records):
        if r.solved and all(satisfies(r.program, ex, cfg) for ex in rec.extra):
            good += 1
    return good / len(results)


# ------------------------------------------------------------ attention

@dataclass
class AttentionTrace:
    keys: list        # (m, j, t, statement index) per key row
    steps: list       # per global step: {"step", "weights": heads x L}

    def to_lines(self) -> list:
        head = json.dumps({"keys": self.keys}, sort_keys=True)
        return [head] + [json.dumps(s, sort_keys=True) for s in self.steps]


def export_attention(examples, solutions, models: Models, variant: str = "default",
                     program=None, cfg: DslConfig = DEFAULT_CONFIG) -> AttentionTrace:
    """Teacher-forced weights along ``program``; without one, along the GPS-free CA greedy path."""
    enc = models.key_encoder(variant)
    keyset = build_keyset(solutions, examples, enc, variant, cfg)
    keys = [[et.solution, list(et.examples), et.step, int(sidx)]
            for et, sidx in zip(keyset.tuples, keyset.statements)]
    if program is not None:
        states, _ = replay(program, examples, cfg)
        states = states[:-1]
    else:
        states = [replay(s.program, examples, cfg)[0][0] for s in solutions[:1]]
    q = enc.embed_states(states)
    steps = np.array([s.n_defined - s.n_inputs for s in states])
    w = models.ca.attention_weights(q, steps, keyset)     # heads, B, L
    rows = [{"step": int(t), "weights": w[:, b, :].round(6).tolist()} for b, t in enumerate(steps)]
    return AttentionTrace(keys, rows)


def nearest_statements(ca, statement: int, k: int = 10, metric: str = "euclidean") -> list:
    """Statements whose output-projection columns lie closest to ``statement``'s."""
    w = ca.store["ca.head.stmt.w"].data.T.astype(np.float64)   # n_s x Z
    ref = w[statement]
    if metric == "euclidean":
        d = np.linalg.norm(w - ref, axis=1)
    elif metric == "cosine":
        norms = np.linalg.norm(w, axis=1) * np.linalg.norm(ref)
        d = 1.0 - (w @ ref) / np.where(norms == 0, 1.0, norms)
    else:
        raise ValueError(f"unknown metric {metric!r}")
    order = [int(i) for i in np.argsort(d, kind="stable") if i != statement]
    return order[:k]


def describe_statement(idx: int, nu: int = DEFAULT_CONFIG.nu) -> str:
    return str(enumerate_vocabulary(nu).statements[idx])

"""Beam search, complete anytime beam search, per-example searches and the
full aggregation pipeline."""
from __future__ import annotations

import hashlib
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .aggregator import KeySet, PESolution, build_keyset
from .dsl import (
    DEFAULT_CONFIG, DslConfig, ExecError, Program, enumerate_vocabulary, format_program,
    satisfies, solution_score,
)
from .neuralcore import ShapeError
from .state import (
    ProgramState, drop_exec, encode_states, init_state, slot_statements, to_program_statement,
)

AGG_MODES = ("ca", "sum", "mean", "mean_u", "none", "gps")


@dataclass(frozen=True)
class SearchBudget:
    mode: str = "nodes"  # nodes | seconds
    limit: float = 1000

    def __post_init__(self):
        if self.mode not in ("nodes", "seconds"):
            raise ValueError(f"unknown budget mode {self.mode!r}")
        if self.limit < 0:
            raise ValueError("budget limit must be non-negative")

    @classmethod
    def parse(cls, text: str) -> "SearchBudget":
        mode, _, value = text.partition(":")
        if mode not in ("nodes", "seconds") or not value:
            raise ValueError(f"budget must look like nodes:<n> or seconds:<f>, got {text!r}")
        return cls(mode, int(value) if mode == "nodes" else float(value))

    def scaled(self, fraction: float) -> "SearchBudget":
        if self.mode == "nodes":
            return SearchBudget("nodes", int(round(self.limit * fraction)))
        return SearchBudget("seconds", self.limit * fraction)

    def __str__(self) -> str:
        return f"{self.mode}:{self.limit}"


class BudgetClock:
    def __init__(self, budget: SearchBudget):
        self.budget = budget
        self.nodes = 0
        self.start = time.perf_counter()

    @property
    def elapsed(self) -> float:
        return time.perf_counter() - self.start

    def used(self) -> float:
        return self.nodes if self.budget.mode == "nodes" else self.elapsed

    def exhausted(self) -> bool:
        return self.used() >= self.budget.limit

    def remaining(self) -> float:
        return max(0, self.budget.limit - self.used())

    def tick(self) -> None:
        self.nodes += 1


@dataclass(frozen=True)
class CABSchedule:
    beam_size: int = 100
    expansion_size: int = 10
    beam_growth: int = 2
    expansion_growth: int = 10

    def iterations(self):
        beam, exp = self.beam_size, self.expansion_size
        while True:
            yield beam, exp
            beam, exp = beam * self.beam_growth, exp + self.expansion_growth


@dataclass
class BeamNode:
    state: ProgramState
    statements: tuple     # slot statements so far
    program_lines: tuple  # same lines in definition numbering
    score: float = 1.0

    def program(self, examples) -> Program:
        types = tuple("LIST" if isinstance(v, tuple) else "INT" for v in examples[0][0])
        return Program(types, self.program_lines)


@dataclass
class SearchOutcome:
    program: Program | None = None
    nodes: int = 0
    seconds: float = 0.0
    iterations: list = field(default_factory=list)
    trace: list = field(default_factory=list)
    exhausted: bool = False

    @property
    def solved(self) -> bool:
        return self.program is not None

    def digest(self) -> str:
        return hashlib.sha256(repr(self.trace).encode()).hexdigest()


def _children(node: BeamNode, scores, drop_probs, expansion: int, vocab, cfg: DslConfig):
    order = np.argsort(-scores, kind="stable")
    drop = int(np.argmax(drop_probs))
    out, attempts = [], 0
    for idx in order:
        if len(out) >= expansion or attempts >= 2 * expansion:
            break
        sc = float(scores[idx])
        if sc <= 0:
            break
        attempts += 1
        st = vocab.statements[idx]
        try:
            child = drop_exec(st, node.state, drop, cfg)
        except ExecError:
            continue
        line = to_program_statement(st, node.state)
        out.append(BeamNode(child, node.statements + (int(idx),), node.program_lines + (line,),
                            node.score * sc))
    return out


def beam_search(examples, predictor, beam_size: int, expansion: int, depth: int,
                clock: BudgetClock, cfg: DslConfig = DEFAULT_CONFIG, trace=None):
    """One beam search; returns the solving node or None."""
    vocab = enumerate_vocabulary(cfg.nu)
    beam = [BeamNode(init_state(examples, cfg), (), ())]
    for level in range(depth + 1):
        last = level == depth
        new = []
        i = 0
        while i < len(beam):
            if clock.budget.mode == "nodes":
                chunk = beam[i:i + max(1, int(clock.remaining()))]
            else:
                chunk = beam[i:]
            if not last and not clock.exhausted():
                scores, drops = predictor([n.state for n in chunk])
            for k, node in enumerate(chunk):
                if node.state.is_solution():
                    return node
                if last:
                    continue
                if clock.exhausted():
                    return None
                clock.tick()
                if trace is not None:
                    trace.append(node.statements)
                new.extend(_children(node, scores[k], drops[k], expansion, vocab, cfg))
            i += len(chunk)
        if last or not new:
            break
        order = sorted(range(len(new)), key=lambda j: -new[j].score)
        beam = [new[j] for j in order[:beam_size]]
    return None


def cab(examples, predictor, budget: SearchBudget, depth: int,
        schedule: CABSchedule = CABSchedule(), cfg: DslConfig = DEFAULT_CONFIG,
        clock: BudgetClock | None = None) -> SearchOutcome:
    """Repeat beam search with widening beams until success or budget exhaustion."""
    if depth < 1:
        raise ValueError("depth must be at least 1")
    clock = clock or BudgetClock(budget)
    out = SearchOutcome()
    for beam_size, expansion in schedule.iterations():
        if clock.exhausted():
            break
        out.iterations.append((beam_size, expansion))
        node = beam_search(examples, predictor, beam_size, expansion, depth, clock, cfg, out.trace)
        if node is not None:
            p = node.program(examples)
            if all(satisfies(p, ex, cfg) for ex in examples):
                out.program = p
                break
    out.exhausted = out.program is None
    out.nodes = clock.nodes
    out.seconds = clock.elapsed
    return out


# --------------------------------------------------------------- predictors

class ModelPredictor:
    """Statement and drop probabilities straight from a state model."""

    def __init__(self, model):
        self.model = model

    def __call__(self, states):
        return self.model.predict(states)


class BlendedPredictor:
    """alpha * aggregator scores + (1 - alpha) * GPS statement probabilities.

    The drop vector always comes from the GPS model. ``fixed`` replaces the
    aggregator term with a constant vector (the ablation baselines).
    """

    def __init__(self, gps, alpha: float, ca=None, keyset: KeySet | None = None,
                 query_model=None, fixed: np.ndarray | None = None):
        if not 0.0 <= alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        self.gps, self.alpha, self.ca, self.keyset = gps, alpha, ca, keyset
        self.query_model = query_model or gps
        self.fixed = fixed

    def aggregate_scores(self, states, x):
        n_s = self.gps.cfg.n_statements
        if self.fixed is not None:
            return np.broadcast_to(self.fixed, (len(states), n_s))
        if self.ca is None or self.keyset is None or len(self.keyset) == 0:
            return np.zeros((len(states), n_s))
        query = self.query_model.embed_array(x)
        steps = np.array([s.n_defined - s.n_inputs for s in states])
        return self.ca.statement_probs(query, steps, self.keyset)

    def __call__(self, states):
        x = encode_states(states)
        pred = self.gps.predict_tensor(x)
        return blend(self.aggregate_scores(states, x), pred.statements, self.alpha), pred.drop


def blend(s_ca, s_gps, alpha: float) -> np.ndarray:
    s_ca, s_gps = np.asarray(s_ca), np.asarray(s_gps)
    if s_ca.shape != s_gps.shape:
        raise ShapeError(f"score shapes differ: {s_ca.shape} vs {s_gps.shape}")
    return alpha * s_ca + (1.0 - alpha) * s_gps


def baseline_scores(solutions, mode: str, nu: int = DEFAULT_CONFIG.nu,
                    cfg: DslConfig = DEFAULT_CONFIG) -> np.ndarray:
    """Unnormalized statement vector from the per-example solutions' lines."""
    vocab = enumerate_vocabulary(nu)
    out = np.zeros(vocab.n_statements)
    lines = 0
    for sol in solutions:
        for st in slot_statements(sol.program, nu):
            out[vocab.statement_index(st)] += sol.u if mode == "mean_u" else 1.0
            lines += 1
    if mode in ("mean", "mean_u") and lines:
        out /= lines
    elif mode not in ("sum", "mean", "mean_u"):
        raise ValueError(f"unknown baseline {mode!r}")
    return out


# ------------------------------------------------------ per-example searches

@dataclass
class PEAttempt:
    example: int
    solved: bool
    nodes: int
    seconds: float


@dataclass
class PEOutcome:
    solutions: list
    attempts: list
    perfect: PESolution | None = None

    @property
    def nodes(self) -> int:
        return sum(a.nodes for a in self.attempts)

    @property
    def seconds(self) -> float:
        return sum(a.seconds for a in self.attempts)


def _one_pe(examples, j, predictor, budget, depth, schedule, cfg):
    res = cab([examples[j]], predictor, budget, depth, schedule, cfg)
    sol = None
    if res.solved:
        u, sat = solution_score(res.program, examples, cfg)
        sol = PESolution(res.program, u, sat, j, res.nodes, res.seconds)
    return sol, PEAttempt(j, res.solved, res.nodes, res.seconds)


def pe_searches(examples, predictor, budget: SearchBudget, depth: int, mode: str = "all",
                schedule: CABSchedule = CABSchedule(), cfg: DslConfig = DEFAULT_CONFIG,
                parallel: bool = False) -> PEOutcome:
    """Search each example in order; stop early on a perfect solution (or full cover for tot)."""
    if mode not in ("all", "tot"):
        raise ValueError(f"unknown PE mode {mode!r}")
    out = PEOutcome([], [])
    if parallel:
        with ThreadPoolExecutor() as pool:
            futs = [pool.submit(_one_pe, examples, j, predictor, budget, depth, schedule, cfg)
                    for j in range(len(examples))]
            results = [f.result() for f in futs]
    else:
        results = (_one_pe(examples, j, predictor, budget, depth, schedule, cfg)
                   for j in range(len(examples)))
    covered = set()
    for sol, attempt in results:
        out.attempts.append(attempt)
        if sol is None:
            continue
        out.solutions.append(sol)
        if sol.perfect:
            out.perfect = sol
            break
        covered |= sol.satisfied
        if mode == "tot" and len(covered) == len(examples):
            break
    return out


# ----------------------------------------------------------------- pipeline

@dataclass
class PipelineConfig:
    alpha: float = 0.8
    peps_budget: SearchBudget = SearchBudget("nodes", 40)
    total_budget: SearchBudget = SearchBudget("nodes", 400)
    variant: str = "default"
    mode: str = "ca"
    pe_mode: str = "all"
    depth: int = 3
    parallel: bool = False
    seed: int = 0
    schedule: CABSchedule = CABSchedule()

    def validate(self, n_examples: int) -> None:
        if self.mode not in AGG_MODES:
            raise ValueError(f"unknown aggregation mode {self.mode!r}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if self.mode != "gps":
            if self.peps_budget.mode != self.total_budget.mode:
                raise ValueError("PE and total budgets must use the same unit")
            if n_examples * self.peps_budget.limit >= self.total_budget.limit:
                raise ValueError("N x PE budget must be below the total budget")

    def to_dict(self) -> dict:
        return {"alpha": self.alpha, "peps_budget": str(self.peps_budget),
                "total_budget": str(self.total_budget), "variant": self.variant,
                "mode": self.mode, "pe_mode": self.pe_mode, "depth": self.depth,
                "parallel": self.parallel, "seed": self.seed,
                "schedule": [self.schedule.beam_size, self.schedule.expansion_size]}


@dataclass
class Models:
    gps: object
    pe: object | None = None
    ca: object | None = None

    def key_encoder(self, variant: str):
        return self.gps if variant == "pg" else self.pe


@dataclass
class SynthesisResult:
    status: str
    program: Program | None
    solved_by: str | None
    config: dict
    pe: list = field(default_factory=list)
    pe_attempts: list = field(default_factory=list)
    nodes_pe: int = 0
    nodes_agg: int = 0
    seconds_pe: float = 0.0
    seconds_agg: float = 0.0
    iterations: list = field(default_factory=list)
    trace_digest: str = ""
    keys: int = 0

    @property
    def solved(self) -> bool:
        return self.status == "solved"

    @property
    def nodes(self) -> int:
        return self.nodes_pe + self.nodes_agg

    @property
    def seconds(self) -> float:
        return self.seconds_pe + self.seconds_agg

    def to_dict(self, with_times: bool = True) -> dict:
        d = {
            "status": self.status,
            "program": format_program(self.program) if self.program else None,
            "solved_by": self.solved_by,
            "config": self.config,
            "pe": [{"program": format_program(s.program), "u": s.u, "satisfied": sorted(s.satisfied),
                    "example": s.example, "nodes": s.nodes,
                    **({"seconds": round(s.seconds, 6)} if with_times else {})} for s in self.pe],
            "pe_attempts": [{"example": a.example, "solved": a.solved, "nodes": a.nodes}
                            for a in self.pe_attempts],
            "nodes": {"pe": self.nodes_pe, "aggregation": self.nodes_agg, "total": self.nodes},
            "iterations": [list(it) for it in self.iterations],
            "trace_digest": self.trace_digest,
            "keys": self.keys,
        }
        if with_times:
            d["seconds"] = {"pe": round(self.seconds_pe, 6), "aggregation": round(self.seconds_agg, 6)}
        return d


def _finish(result: SynthesisResult, examples, cfg: DslConfig) -> SynthesisResult:
    # every claimed solution is re-checked on the full specification
    if result.program is not None and not all(satisfies(result.program, ex, cfg) for ex in examples):
        result.status, result.program, result.solved_by = "failed", None, None
    return result


def synthesize(examples, models: Models, pcfg: PipelineConfig,
               cfg: DslConfig = DEFAULT_CONFIG, pe_solutions=None) -> SynthesisResult:
    """Full pipeline; ``pe_solutions`` replays recorded PE results instead of searching."""
    pcfg.validate(len(examples))
    gps_pred = ModelPredictor(models.gps)
    conf = pcfg.to_dict()
    if pcfg.mode == "gps":
        res = cab(examples, gps_pred, pcfg.total_budget, pcfg.depth, pcfg.schedule, cfg)
        out = SynthesisResult("solved" if res.solved else "failed", res.program,
                              "gps" if res.solved else None, conf, nodes_agg=res.nodes,
                              seconds_agg=res.seconds, iterations=res.iterations,
                              trace_digest=res.digest())
        return _finish(out, examples, cfg)

    if pe_solutions is not None:
        sols = list(pe_solutions)
        pe = PEOutcome(sols, [], next((s for s in sols if s.perfect), None))
    else:
        pe = pe_searches(examples, ModelPredictor(models.pe), pcfg.peps_budget, pcfg.depth,
                         pcfg.pe_mode, pcfg.schedule, cfg, pcfg.parallel)
    out = SynthesisResult("failed", None, None, conf, pe.solutions, pe.attempts,
                          nodes_pe=pe.nodes, seconds_pe=pe.seconds)
    if pe.perfect is not None:
        out.status, out.program, out.solved_by = "solved", pe.perfect.program, "pe"
        return _finish(out, examples, cfg)

    total = pcfg.total_budget
    used = pe.nodes if total.mode == "nodes" else pe.seconds
    agg_budget = SearchBudget(total.mode, max(0, total.limit - used))

    if pcfg.mode == "none":
        predictor = gps_pred
    elif pcfg.mode == "ca":
        keyset = None
        if pe.solutions and models.ca is not None:
            enc = models.key_encoder(pcfg.variant)
            keyset = build_keyset(pe.solutions, examples, enc, pcfg.variant, cfg)
            out.keys = len(keyset)
        predictor = BlendedPredictor(models.gps, pcfg.alpha, models.ca, keyset,
                                     query_model=models.key_encoder(pcfg.variant))
    else:
        fixed = baseline_scores(pe.solutions, pcfg.mode, cfg.nu, cfg)
        predictor = BlendedPredictor(models.gps, pcfg.alpha, fixed=fixed)

    res = cab(examples, predictor, agg_budget, pcfg.depth, pcfg.schedule, cfg)
    out.nodes_agg, out.seconds_agg = res.nodes, res.seconds
    out.iterations, out.trace_digest = res.iterations, res.digest()
    if res.solved:
        out.status, out.program, out.solved_by = "solved", res.program, "aggregation"
    return _finish(out, examples, cfg)

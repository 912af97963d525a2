"""Random programs, their IO examples, equivalence filtering and aggregator instances."""
from __future__ import annotations

import functools
import itertools
import json
import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from .aggregator import PESolution
from .dsl import (
    DEFAULT_CONFIG, INT, LIST, OPERATORS, DslConfig, ExecError, Program, Statement,
    example_from_json, example_to_json, execute_trace, format_program, parse_program,
    satisfies, value_type,
)
from .search import ModelPredictor, SearchBudget, pe_searches

log = logging.getLogger(__name__)


class GenerationError(RuntimeError):
    pass


class Reject(Exception):
    """No valid example set could be sampled for a program."""


@dataclass
class DatasetRecord:
    program: Program
    examples: list
    extra: list = field(default_factory=list)

    def to_json(self) -> dict:
        d = {"program": format_program(self.program),
             "examples": [example_to_json(e) for e in self.examples]}
        if self.extra:
            d["extra"] = [example_to_json(e) for e in self.extra]
        return d

    @classmethod
    def from_json(cls, d: dict) -> "DatasetRecord":
        return cls(parse_program(d["program"]), [example_from_json(e) for e in d["examples"]],
                   [example_from_json(e) for e in d.get("extra", [])])


@dataclass(frozen=True)
class SamplingConfig:
    list_min: int = -64
    list_max: int = 63
    int_min: int = 0
    int_max: int = 20
    max_len: int = 20
    program_attempts: int = 100
    input_attempts: int = 500


# ------------------------------------------------------------------ programs

@functools.lru_cache(maxsize=4096)
def _feasible(var_types: tuple) -> tuple:
    out = []
    for op in OPERATORS:
        pools = [[i for i, t in enumerate(var_types) if t == want] for want in op.arg_types]
        out.extend(Statement(op, args) for args in itertools.product(*pools))
    return tuple(out)


def _all_used(p: Program) -> bool:
    used = set()
    for st in p.statements:
        used.update(st.args)
    return all(i in used for i in range(len(p.inputs) + len(p) - 1))


def gen_program(length: int, rng: np.random.Generator, cfg: DslConfig = DEFAULT_CONFIG,
                scfg: SamplingConfig = SamplingConfig()) -> Program:
    """Uniform over type-feasible statements that keep every input and intermediate readable later."""
    if length < 1:
        raise ValueError("length must be positive")
    for _ in range(scfg.program_attempts):
        n_in = int(rng.integers(1, 4))
        if n_in + length > cfg.nu:
            n_in = 1
        if n_in > length + 1:
            n_in = length + 1
        inputs = [LIST] + [LIST if rng.random() < 0.5 else INT for _ in range(n_in - 1)]
        inputs = [inputs[i] for i in rng.permutation(n_in)]
        types = list(inputs)
        unread = set(range(n_in))
        lines = []
        for k in range(1, length + 1):
            # each later line lowers the unread count by at most one, so
            # only keep statements that can still end with just the output unread
            cands = [st for st in _feasible(tuple(types))
                     if len(unread - set(st.args)) + 1 <= 1 + length - k]
            if not cands:
                break
            st = cands[int(rng.integers(len(cands)))]
            unread = (unread - set(st.args)) | {len(types)}
            lines.append(st)
            types.append(st.op.out_type)
        else:
            p = Program(tuple(inputs), tuple(lines))
            if _all_used(p):
                return p
    raise GenerationError(f"no program of length {length} after {scfg.program_attempts} attempts")


def _sample_input(t: str, rng, scfg: SamplingConfig):
    if t == INT:
        return int(rng.integers(scfg.int_min, scfg.int_max + 1))
    n = int(rng.integers(1, scfg.max_len + 1))
    return tuple(int(v) for v in rng.integers(scfg.list_min, scfg.list_max + 1, n))


def gen_examples(p: Program, n: int, rng: np.random.Generator, cfg: DslConfig = DEFAULT_CONFIG,
                 scfg: SamplingConfig = SamplingConfig()) -> list:
    """``n`` examples on which every intermediate value stays in range; Reject otherwise."""
    out = []
    for _ in range(scfg.input_attempts):
        inputs = tuple(_sample_input(t, rng, scfg) for t in p.inputs)
        try:
            env = execute_trace(p, inputs, cfg)
        except ExecError:
            continue
        out.append((inputs, env[-1]))
        if len(out) == n:
            if n > 1 and all(o == out[0][1] for _, o in out):
                out.pop()  # constant outputs carry no signal; keep sampling
                continue
            return out
    raise Reject(format_program(p))


# --------------------------------------------------------------- equivalence

class Corpus:
    """Accepted records indexed by input signature and output type."""

    def __init__(self):
        self.buckets = {}

    def _key(self, examples):
        inputs, output = examples[0]
        return tuple(value_type(v) for v in inputs), value_type(output)

    def add(self, rec: DatasetRecord) -> None:
        self.buckets.setdefault(self._key(rec.examples), []).append(rec)

    def __len__(self) -> int:
        return sum(len(b) for b in self.buckets.values())

    def matches(self, rec: DatasetRecord, cfg: DslConfig = DEFAULT_CONFIG,
                any_length: bool = False) -> bool:
        """Some stored program (no longer than ``rec``'s unless any_length) fits rec's examples."""
        for other in self.buckets.get(self._key(rec.examples), ()):
            if (any_length or len(other.program) <= len(rec.program)) and \
                    all(satisfies(other.program, e, cfg) for e in rec.examples):
                return True
        return False

    def covered_by(self, rec: DatasetRecord, cfg: DslConfig = DEFAULT_CONFIG,
                   any_length: bool = False) -> bool:
        """rec's program fits the examples of some stored record no longer than it."""
        for other in self.buckets.get(self._key(rec.examples), ()):
            if (any_length or len(other.program) <= len(rec.program)) and \
                    all(satisfies(rec.program, e, cfg) for e in other.examples):
                return True
        return False


def equiv_filter(candidate: DatasetRecord, corpus, cfg: DslConfig = DEFAULT_CONFIG) -> bool:
    """True (keep) unless some corpus program no longer than the candidate fits its examples."""
    if not isinstance(corpus, Corpus):
        c = Corpus()
        for item in corpus:
            c.add(item if isinstance(item, DatasetRecord) else DatasetRecord(item, candidate.examples))
        corpus = c
    return not corpus.matches(candidate, cfg)


# ------------------------------------------------------------------ datasets

@dataclass
class DatagenConfig:
    train_counts: dict = field(default_factory=lambda: {1: 150, 2: 1200, 3: 1650})
    test_counts: dict = field(default_factory=lambda: {2: 100, 3: 100})
    n_examples: int = 5
    n_extra: int = 5
    seed: int = 0
    attempts_per_record: int = 30
    sampling: SamplingConfig = SamplingConfig()

    def to_dict(self) -> dict:
        d = asdict(self)
        d["train_counts"] = {str(k): v for k, v in self.train_counts.items()}
        d["test_counts"] = {str(k): v for k, v in self.test_counts.items()}
        return d


def _fill(counts: dict, corpus: Corpus, rng, dcfg: DatagenConfig, cfg: DslConfig,
          with_extra: bool, stats: dict) -> list:
    records = []
    carry = 0
    lengths = sorted(counts)
    for li, length in enumerate(lengths):
        want = counts[length] + (carry if li == len(lengths) - 1 else 0)
        got = 0
        for _ in range(want * dcfg.attempts_per_record):
            if got >= want:
                break
            try:
                p = gen_program(length, rng, cfg, dcfg.sampling)
                n = dcfg.n_examples + (dcfg.n_extra if with_extra else 0)
                exs = gen_examples(p, n, rng, cfg, dcfg.sampling)
            except (GenerationError, Reject):
                stats["rejected"] += 1
                continue
            rec = DatasetRecord(p, exs[:dcfg.n_examples], exs[dcfg.n_examples:])
            # checked both ways; test tasks against training records of every length
            if corpus.matches(rec, cfg, with_extra) or corpus.covered_by(rec, cfg, with_extra):
                stats["equivalent"] += 1
                continue
            corpus.add(rec)
            records.append(rec)
            got += 1
        if got < want:
            log.info("length %d: %d of %d records", length, got, want)
            carry += want - got
    return records


def build_dataset(dcfg: DatagenConfig = DatagenConfig(), cfg: DslConfig = DEFAULT_CONFIG):
    """Train and test records; test programs are non-equivalent to every training program."""
    train_seed, test_seed = np.random.SeedSequence(dcfg.seed).spawn(2)
    stats = {"rejected": 0, "equivalent": 0}
    corpus = Corpus()
    train = _fill(dcfg.train_counts, corpus, np.random.default_rng(train_seed), dcfg, cfg, False, stats)
    test = _fill(dcfg.test_counts, corpus, np.random.default_rng(test_seed), dcfg, cfg, True, stats)
    header = {"kind": "dataset", "config": dcfg.to_dict(), "seed": dcfg.seed, "stats": stats}
    return header, train, test


def write_jsonl(path, header: dict, rows) -> None:
    with open(path, "w") as f:
        f.write(json.dumps({"header": header}, sort_keys=True) + "\n")
        for r in rows:
            f.write(json.dumps(r if isinstance(r, dict) else r.to_json(), sort_keys=True) + "\n")


def read_jsonl(path) -> tuple[dict, list]:
    header, rows = {}, []
    with open(path) as f:
        for line in f:
            if not line.strip():
                continue
            d = json.loads(line)
            if "header" in d and not rows and not header:
                header = d["header"]
            else:
                rows.append(d)
    return header, rows


def read_dataset(path) -> tuple[dict, list]:
    header, rows = read_jsonl(path)
    return header, [DatasetRecord.from_json(r) for r in rows]


# ------------------------------------------------------ aggregator instances

@dataclass(frozen=True)
class TimeoutPolicy:
    tag: str = "fixed_0.5"   # fixed_0.5 | random_0.1_to_0.9 | triple_0.4_0.5_0.6
    unit: SearchBudget = SearchBudget("nodes", 100)

    def fractions(self, rng) -> list:
        if self.tag == "fixed_0.5":
            return [0.5]
        if self.tag == "random_0.1_to_0.9":
            grid = [round(0.1 * k, 1) for k in range(1, 10)]
            return [float(rng.choice(grid)) for _ in range(2)]
        if self.tag == "triple_0.4_0.5_0.6":
            return [0.4, 0.5, 0.6]
        raise ValueError(f"unknown timeout policy {self.tag!r}")


@dataclass
class AggregatorInstance:
    examples: list
    solutions: list
    program: Program
    fraction: float = 0.5

    def to_json(self) -> dict:
        return {"program": format_program(self.program),
                "examples": [example_to_json(e) for e in self.examples],
                "fraction": self.fraction,
                "pe": [{"program": format_program(s.program), "u": s.u,
                        "satisfied": sorted(s.satisfied), "example": s.example}
                       for s in self.solutions]}

    @classmethod
    def from_json(cls, d: dict) -> "AggregatorInstance":
        sols = [PESolution(parse_program(s["program"]), float(s["u"]), frozenset(s["satisfied"]),
                           s.get("example", -1)) for s in d["pe"]]
        return cls([example_from_json(e) for e in d["examples"]], sols,
                   parse_program(d["program"]), d.get("fraction", 0.5))


def keep_instance(solutions) -> bool:
    return bool(solutions) and all(s.u < 1.0 for s in solutions) and any(s.u > 0 for s in solutions)


def build_aggregator_instances(records, pe_model, policy: TimeoutPolicy = TimeoutPolicy(),
                               mode: str = "all", seed: int = 0, cfg: DslConfig = DEFAULT_CONFIG):
    rng = np.random.default_rng(seed)
    predictor = ModelPredictor(pe_model)
    out, omitted = [], {"perfect": 0, "empty": 0}
    for rec in records:
        for frac in policy.fractions(rng):
            pe = pe_searches(rec.examples, predictor, policy.unit.scaled(frac), len(rec.program),
                             mode, cfg=cfg)
            if pe.perfect is not None:
                omitted["perfect"] += 1
            elif not keep_instance(pe.solutions):
                omitted["empty"] += 1
            else:
                out.append(AggregatorInstance(rec.examples, pe.solutions, rec.program, frac))
    header = {"kind": "instances", "policy": policy.tag, "unit": str(policy.unit), "mode": mode,
              "seed": seed, "omitted": omitted}
    return header, out


def read_instances(path) -> tuple[dict, list]:
    header, rows = read_jsonl(path)
    return header, [AggregatorInstance.from_json(r) for r in rows]

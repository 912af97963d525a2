"""Cross Aggregator: keys from partial executions of per-example solutions,
relation-aware multi-head attention and the statement/operator heads."""
from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import neuralcore as nc
from .dsl import DEFAULT_CONFIG, DslConfig, ErrorKind, ExecError, OPERATORS, Program, enumerate_vocabulary
from .state import drop_exec, init_state, slot_drop_targets, to_slot_statement

log = logging.getLogger(__name__)

VARIANTS = ("default", "pg", "pp")


@dataclass
class PESolution:
    """A program found for one example, scored against all of them."""
    program: Program
    u: float
    satisfied: frozenset
    example: int = -1
    nodes: int = 0
    seconds: float = 0.0

    @property
    def perfect(self) -> bool:
        return self.u >= 1.0


@dataclass(frozen=True)
class ExecutionTuple:
    solution: int          # position m in the solution list
    examples: tuple        # sorted example indices S
    step: int              # lines executed before the key state


def build_key_tuples(solutions, variant: str = "default", n_examples: int = 5) -> list[ExecutionTuple]:
    """Tuples in canonical (m, j, t) order."""
    if not solutions:
        raise ExecError(ErrorKind.EMPTY_INPUT)
    if variant not in VARIANTS:
        raise ValueError(f"unknown key variant {variant!r}")
    out = []
    for m, sol in enumerate(solutions):
        steps = range(len(sol.program))
        if variant == "pg":
            out.extend(ExecutionTuple(m, tuple(range(n_examples)), t) for t in steps)
            continue
        js = range(n_examples) if variant == "default" else sorted(sol.satisfied)
        for j in js:
            out.extend(ExecutionTuple(m, (j,), t) for t in steps)
    return out


@dataclass
class KeySet:
    keys: np.ndarray          # (L, Z), position encodings already added
    relation: np.ndarray      # (L,)
    steps: np.ndarray         # (L,)
    statements: np.ndarray    # (L,) value statement indices
    operators: np.ndarray     # (L,) value operator indices
    tuples: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.relation)


def _partial_states(program: Program, examples, cfg: DslConfig):
    """States before each line plus the slot statement run there; stops at the first failure."""
    s = init_state(examples, cfg)
    out = []
    for step, st in enumerate(program.statements):
        try:
            slot_st = to_slot_statement(st, s.slot_vars)
            drop = 0
            if s.n_vars >= s.nu:
                live = np.flatnonzero(slot_drop_targets(program, step, s.slot_vars, s.nu))
                drop = int(live[0]) if len(live) else 0
            out.append((s, slot_st))
            s = drop_exec(slot_st, s, drop, cfg)
        except ExecError:
            break
    return out


def assemble_kvu(tuples, solutions, examples, encoder, cfg: DslConfig = DEFAULT_CONFIG) -> KeySet:
    """Embed every key state; tuples whose state cannot be reached are dropped."""
    vocab = enumerate_vocabulary(cfg.nu)
    cache = {}
    rows = []
    for et in tuples:
        ck = (et.solution, et.examples)
        if ck not in cache:
            exs = [examples[j] for j in et.examples]
            cache[ck] = _partial_states(solutions[et.solution].program, exs, cfg)
        states = cache[ck]
        if et.step < len(states):
            rows.append((et, *states[et.step]))
    z = encoder.cfg.z
    keys = np.zeros((len(rows), z), dtype=nc.default_dtype())
    by_n = {}
    for i, (et, s, _) in enumerate(rows):
        by_n.setdefault(s.n_examples, []).append(i)
    for idx in by_n.values():
        keys[idx] = encoder.embed_states([rows[i][1] for i in idx])
    steps = np.array([et.step for et, _, _ in rows], dtype=np.int64)
    if len(rows):
        keys = keys + nc.sinusoidal_positions(steps, z)
    return KeySet(
        keys=keys,
        relation=np.array([solutions[et.solution].u for et, _, _ in rows], dtype=nc.default_dtype()),
        steps=steps,
        statements=np.array([vocab.statement_index(st) for _, _, st in rows], dtype=np.int64),
        operators=np.array([st.op.index for _, _, st in rows], dtype=np.int64),
        tuples=[et for et, _, _ in rows],
    )


def build_keyset(solutions, examples, encoder, variant: str = "default",
                 cfg: DslConfig = DEFAULT_CONFIG) -> KeySet:
    tuples = build_key_tuples(solutions, variant, len(examples))
    return assemble_kvu(tuples, solutions, examples, encoder, cfg)


def rel_att(q, k, v, u) -> np.ndarray:
    """softmax((U^T + q k^T / sqrt(d_k)) / 2) v for a single head, numpy in and out."""
    q, k, v = np.atleast_2d(q), np.atleast_2d(k), np.atleast_2d(v)
    u = np.asarray(u, dtype=float).reshape(-1)
    if q.shape[1] != k.shape[1] or k.shape[0] != v.shape[0] or u.shape[0] != k.shape[0]:
        raise nc.ShapeError("rel_att operand shapes disagree")
    logits = (u[None, :] + q @ k.T / math.sqrt(k.shape[1])) / 2
    return nc.softmax_np(logits) @ v


@dataclass(frozen=True)
class CAConfig:
    z: int = 256
    heads: int = 8
    d_k: int = 64
    d_v: int = 64
    ff: int = 1024
    nu: int = 11
    dropout: float = 0.1
    variant: str = "default"
    encoder_kind: str = "pe"

    @property
    def n_statements(self) -> int:
        return enumerate_vocabulary(self.nu).n_statements


class CrossAggregator:
    def __init__(self, cfg: CAConfig = CAConfig(), seed: int = 0):
        self.cfg = cfg
        self.seed = seed
        self.rng = np.random.default_rng(seed + 1)
        c = cfg
        s = self.store = nc.ParamStore(seed)
        s.linear("ca.q", c.z, c.heads * c.d_k, bias=False)
        s.linear("ca.k", c.z, c.heads * c.d_k, bias=False)
        s.linear("ca.v", c.z, c.heads * c.d_v, bias=False)
        s.linear("ca.o", c.heads * c.d_v, c.z)
        s.embedding("ca.val_stmt", c.n_statements, c.z, 1 / math.sqrt(c.z))
        s.embedding("ca.val_op", len(OPERATORS), c.z, 1 / math.sqrt(c.z))
        s.add("ca.ln1.g", np.ones(c.z))
        s.add("ca.ln1.b", np.zeros(c.z))
        s.linear("ca.ff1", c.z, c.ff)
        s.linear("ca.ff2", c.ff, c.z)
        s.add("ca.ln2.g", np.ones(c.z))
        s.add("ca.ln2.b", np.zeros(c.z))
        s.linear("ca.head.stmt", c.z, c.n_statements)
        s.linear("ca.head.op", c.z, len(OPERATORS))

    def init_heads_from(self, gps) -> bool:
        """Copy statement/operator heads from a trained state model."""
        src = gps.store
        pairs = [("ca.head.stmt", "head.stmt"), ("ca.head.op", "head.op")]
        for dst, name in pairs:
            for suffix in (".w", ".b"):
                if src[name + suffix].shape != self.store[dst + suffix].shape:
                    log.warning("head shapes differ (%s); keeping random init", name)
                    return False
        for dst, name in pairs:
            for suffix in (".w", ".b"):
                self.store.set(dst + suffix, src[name + suffix].data)
        return True

    def _heads(self, x, proj: str, width: int):
        # (R, heads*width) -> (heads, R, width)
        c, p = self.cfg, self.store
        y = nc.matmul(x, p[proj])
        return nc.swapaxes(nc.reshape(y, (y.shape[0], c.heads, width)), 0, 1)

    def attend(self, query, steps, keyset: KeySet, value_table: str, training: bool = False,
               return_weights: bool = False):
        """Block output (B, Z) for queries (B, Z) taken at global ``steps``."""
        c, p = self.cfg, self.store
        if len(keyset) == 0:
            raise nc.ShapeError("empty keyset")
        query = np.atleast_2d(np.asarray(query))
        if query.shape[1] != c.z or keyset.keys.shape[1] != c.z:
            raise nc.ShapeError("embedding width does not match the aggregator")
        pos_q = nc.sinusoidal_positions(np.broadcast_to(np.asarray(steps), (len(query),)), c.z)
        q_in = nc.Tensor((query + pos_q).astype(nc.default_dtype()))
        kv_pos = nc.Tensor(nc.sinusoidal_positions(keyset.steps, c.z).astype(nc.default_dtype()))
        table_idx = keyset.statements if value_table == "ca.val_stmt" else keyset.operators
        v_in = nc.add(nc.embedding(p[value_table], table_idx), kv_pos)
        qh = self._heads(q_in, "ca.q.w", c.d_k)                      # H B dk
        kh = self._heads(nc.Tensor(keyset.keys.astype(nc.default_dtype())), "ca.k.w", c.d_k)
        vh = self._heads(v_in, "ca.v.w", c.d_v)                      # H L dv
        logits = nc.matmul(qh, nc.swapaxes(kh, 1, 2))                 # H B L
        logits = nc.mul(nc.add(nc.mul(logits, 1 / math.sqrt(c.d_k)), keyset.relation), 0.5)
        weights = nc.softmax(logits, -1)
        ctx = nc.matmul(weights, vh)                                   # H B dv
        ctx = nc.reshape(nc.swapaxes(ctx, 0, 1), (len(query), c.heads * c.d_v))
        att = nc.linear(ctx, p["ca.o.w"], p["ca.o.b"])
        att = nc.dropout(att, c.dropout, self.rng, training)
        h = nc.layer_norm(nc.add(q_in, att), p["ca.ln1.g"], p["ca.ln1.b"])
        ff = nc.linear(nc.relu(nc.linear(h, p["ca.ff1.w"], p["ca.ff1.b"])), p["ca.ff2.w"], p["ca.ff2.b"])
        ff = nc.dropout(ff, c.dropout, self.rng, training)
        out = nc.layer_norm(nc.add(h, ff), p["ca.ln2.g"], p["ca.ln2.b"])
        if return_weights:
            return out, weights.data
        return out

    def logits(self, query, steps, keyset: KeySet, training: bool = False):
        """(statement logits, operator logits); the operator path is used in training only."""
        p = self.store
        hs = self.attend(query, steps, keyset, "ca.val_stmt", training)
        ho = self.attend(query, steps, keyset, "ca.val_op", training)
        return (nc.linear(hs, p["ca.head.stmt.w"], p["ca.head.stmt.b"]),
                nc.linear(ho, p["ca.head.op.w"], p["ca.head.op.b"]))

    def statement_probs(self, query, steps, keyset: KeySet) -> np.ndarray:
        with nc.no_grad():
            h = self.attend(query, steps, keyset, "ca.val_stmt")
            s = nc.linear(h, self.store["ca.head.stmt.w"], self.store["ca.head.stmt.b"])
        return nc.softmax_np(s.data)

    def attention_weights(self, query, steps, keyset: KeySet) -> np.ndarray:
        """Per-head weights (heads, B, L) on the statement path."""
        with nc.no_grad():
            return self.attend(query, steps, keyset, "ca.val_stmt", return_weights=True)[1]

    def loss(self, query, steps, keyset: KeySet, stmt, op, training: bool = True):
        s, o = self.logits(query, steps, keyset, training)
        return nc.add(nc.cross_entropy(s, stmt), nc.cross_entropy(o, op))

    # ------------------------------------------------------------ persistence
    def hparams(self) -> dict:
        return {"model": "ca", **asdict(self.cfg), "seed": self.seed}

    def save(self, path, extra: dict | None = None) -> None:
        hp = self.hparams()
        if extra:
            hp["run"] = extra
        nc.save_checkpoint(path, self.store.state_dict(), hp)

    @classmethod
    def load(cls, path) -> "CrossAggregator":
        hp, tensors = nc.load_checkpoint(path)
        if hp.get("model") != "ca":
            raise nc.CheckpointError(f"{path}: not an aggregator checkpoint")
        fields = CAConfig.__dataclass_fields__
        model = cls(CAConfig(**{k: v for k, v in hp.items() if k in fields}), hp.get("seed", 0))
        nc.load_checkpoint(path, {k: v.shape for k, v in model.store.items()})
        model.store.load_state_dict(tensors)
        return model

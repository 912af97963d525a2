"""Supervised training of the state models and of the Cross Aggregator."""
from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import neuralcore as nc
from .aggregator import CAConfig, CrossAggregator, build_keyset
from .dsl import DEFAULT_CONFIG, DslConfig, ExecError, enumerate_vocabulary
from .encoder import EncoderConfig, StateModel
from .state import NoDropError, drop_exec, encode_state, init_state, replay, slot_drop_targets, to_slot_statement

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    kind: str = "gps"  # gps | pe | ca
    batch_size: int = 32
    epochs: int = 12
    patience: int = 3
    seed: int = 0
    val_fraction: float = 0.1
    optimizer: nc.OptimizerConfig = field(default_factory=nc.OptimizerConfig)
    variant: str = "default"
    metrics_path: str | None = None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["optimizer"]["betas"] = list(d["optimizer"]["betas"])
        return d


@dataclass
class Sample:
    x: np.ndarray          # (N, nu+1, q+2)
    statement: int
    operator: int
    drop: np.ndarray       # (nu,)


@dataclass
class SupervisionStats:
    steps: int = 0
    degenerate: int = 0


def _trajectory(program, examples, rng, cfg: DslConfig, stats: SupervisionStats) -> list:
    vocab = enumerate_vocabulary(cfg.nu)
    s = init_state(examples, cfg)
    out = []
    for step, st in enumerate(program.statements):
        mask = slot_drop_targets(program, step, s.slot_vars, cfg.nu)
        slot_st = to_slot_statement(st, s.slot_vars)
        out.append(Sample(encode_state(s, cfg), vocab.statement_index(slot_st), st.op.index, mask))
        drop = 0
        if s.n_vars >= cfg.nu:
            live = np.flatnonzero(mask)
            if len(live) == 0:
                stats.degenerate += 1
                log.warning("no droppable slot before line %d; trajectory cut", step + 1)
                break
            drop = int(rng.choice(live))
        s = drop_exec(slot_st, s, drop, cfg)
    stats.steps += len(out)
    return out


def make_supervision(record, kind: str, rng=None, cfg: DslConfig = DEFAULT_CONFIG,
                     stats: SupervisionStats | None = None) -> list:
    """Trajectories of (state, targets): one over all examples (gps) or one per example (pe)."""
    rng = rng if rng is not None else np.random.default_rng(0)
    stats = stats if stats is not None else SupervisionStats()
    if kind == "gps":
        return [_trajectory(record.program, record.examples, rng, cfg, stats)]
    if kind == "pe":
        return [_trajectory(record.program, [ex], rng, cfg, stats) for ex in record.examples]
    raise ValueError(f"unknown model kind {kind!r}")


def _stack(samples):
    return (np.stack([s.x for s in samples]), np.array([s.statement for s in samples]),
            np.array([s.operator for s in samples]), np.stack([s.drop for s in samples]))


def _split(n: int, frac: float, rng):
    order = rng.permutation(n)
    n_val = int(round(n * frac)) if n > 1 else 0
    return sorted(order[n_val:].tolist()), sorted(order[:n_val].tolist())


class MetricsLog:
    def __init__(self, path=None):
        self.path = path
        self.rows = []
        if path:
            open(path, "w").close()

    def write(self, **row) -> None:
        self.rows.append(row)
        if self.path:
            with open(self.path, "a") as f:
                f.write(json.dumps(row, sort_keys=True) + "\n")


def evaluate_state_model(model: StateModel, samples, batch: int = 256) -> dict:
    if not samples:
        return {"loss": math.nan, "acc_statement": math.nan, "acc_operator": math.nan}
    tot = {"loss": 0.0, "ce_statement": 0.0, "ce_operator": 0.0, "bce_drop": 0.0,
           "acc_statement": 0.0, "acc_operator": 0.0}
    with nc.no_grad():
        for i in range(0, len(samples), batch):
            x, st, op, dr = _stack(samples[i:i + batch])
            _, pooled = model.embed(x)
            ls, lo, ld = model.head_logits(pooled)
            n = len(st)
            parts = {"ce_statement": nc.cross_entropy(ls, st).data, "ce_operator": nc.cross_entropy(lo, op).data,
                     "bce_drop": nc.bce_with_logits(ld, dr).data}
            for k, v in parts.items():
                tot[k] += float(v) * n
            tot["acc_statement"] += float((ls.data.argmax(-1) == st).sum())
            tot["acc_operator"] += float((lo.data.argmax(-1) == op).sum())
    out = {k: v / len(samples) for k, v in tot.items()}
    out["loss"] = out["ce_statement"] + out["ce_operator"] + out["bce_drop"]
    return out


def train_supervised(records, tcfg: TrainConfig, mcfg: EncoderConfig | None = None,
                     cfg: DslConfig = DEFAULT_CONFIG):
    """Fit a GPS or PE state model; returns (model, metrics rows)."""
    if not records:
        raise ValueError("empty dataset")
    mcfg = mcfg or EncoderConfig(kind=tcfg.kind, nu=cfg.nu, q=cfg.q)
    rng = np.random.default_rng(tcfg.seed)
    train_idx, val_idx = _split(len(records), tcfg.val_fraction, rng)
    stats = SupervisionStats()

    def expand(idx):
        return [s for i in idx for traj in make_supervision(records[i], tcfg.kind, rng, cfg, stats)
                for s in traj]

    train, val = expand(train_idx), expand(val_idx)
    model = StateModel(mcfg, tcfg.seed)
    opt = nc.Optimizer(model.store, tcfg.optimizer)
    sched = nc.Scheduler(opt)
    metrics = MetricsLog(tcfg.metrics_path)
    best, best_params, bad = math.inf, model.store.state_dict(), 0
    for epoch in range(tcfg.epochs):
        order = rng.permutation(len(train))
        run, seen = 0.0, 0
        for i in range(0, len(order), tcfg.batch_size):
            batch = [train[j] for j in order[i:i + tcfg.batch_size]]
            loss = model.loss(*_stack(batch))
            model.store.zero_grad()
            loss.backward()
            opt.step()
            run += float(loss.data) * len(batch)
            seen += len(batch)
        row = {"epoch": epoch, "split": "train", "loss": run / max(seen, 1), "lr": opt.lr}
        metrics.write(**row)
        v = evaluate_state_model(model, val if val else train)
        metrics.write(epoch=epoch, split="val", **v)
        log.info("%s epoch %d train %.4f val %.4f", tcfg.kind, epoch, row["loss"], v["loss"])
        if v["loss"] < best - 1e-6:
            best, best_params, bad = v["loss"], model.store.state_dict(), 0
        else:
            bad += 1
            if bad > tcfg.patience:
                break
        sched.step(v["loss"])
    model.store.load_state_dict(best_params)
    metrics.write(split="summary", best_val=best, degenerate=stats.degenerate, steps=stats.steps,
                  train_samples=len(train), val_samples=len(val))
    return model, metrics.rows


# --------------------------------------------------------------- aggregator

class SkipInstance(Exception):
    pass


@dataclass
class CAExample:
    keyset: object
    query: np.ndarray
    steps: np.ndarray
    statements: np.ndarray
    operators: np.ndarray


def prepare_ca_example(inst, key_encoder, variant: str, cfg: DslConfig = DEFAULT_CONFIG) -> CAExample:
    """Keyset built once, teacher-forced queries along the global program."""
    vocab = enumerate_vocabulary(cfg.nu)
    try:
        keyset = build_keyset(inst.solutions, inst.examples, key_encoder, variant, cfg)
        states, slot_stmts = replay(inst.program, inst.examples, cfg)
    except (ExecError, NoDropError) as e:
        raise SkipInstance(str(e)) from None
    if len(keyset) == 0:
        raise SkipInstance("empty keyset")
    q_states = states[:-1]
    return CAExample(keyset, key_encoder.embed_states(q_states),
                     np.array([s.n_defined - s.n_inputs for s in q_states]),
                     np.array([vocab.statement_index(st) for st in slot_stmts]),
                     np.array([st.op.index for st in slot_stmts]))


def _ca_eval(ca: CrossAggregator, examples) -> dict:
    if not examples:
        return {"loss": math.nan}
    tot, acc, n = 0.0, 0.0, 0
    with nc.no_grad():
        for ex in examples:
            s, o = ca.logits(ex.query, ex.steps, ex.keyset)
            tot += float(nc.add(nc.cross_entropy(s, ex.statements), nc.cross_entropy(o, ex.operators)).data)
            acc += float((s.data.argmax(-1) == ex.statements).mean())
            n += 1
    return {"loss": tot / n, "acc_statement": acc / n}


def train_ca(instances, pe_model: StateModel, gps_model: StateModel, tcfg: TrainConfig,
             ca_cfg: CAConfig | None = None, cfg: DslConfig = DEFAULT_CONFIG, init_heads: bool = True):
    """Teacher-forced training of the aggregator; encoders stay frozen."""
    key_encoder = gps_model if tcfg.variant == "pg" else pe_model
    z = key_encoder.cfg.z
    ca_cfg = ca_cfg or CAConfig(z=z, ff=4 * z, nu=cfg.nu, variant=tcfg.variant,
                                encoder_kind=key_encoder.cfg.kind)
    ca = CrossAggregator(ca_cfg, tcfg.seed)
    if init_heads:
        ca.init_heads_from(gps_model)
    prepared, skipped = [], 0
    for inst in instances:
        try:
            prepared.append(prepare_ca_example(inst, key_encoder, tcfg.variant, cfg))
        except SkipInstance as e:
            log.info("skipping instance: %s", e)
            skipped += 1
    if not prepared:
        raise ValueError("no usable aggregator instances")
    rng = np.random.default_rng(tcfg.seed)
    train_idx, val_idx = _split(len(prepared), tcfg.val_fraction, rng)
    train = [prepared[i] for i in train_idx]
    val = [prepared[i] for i in val_idx] or train
    opt = nc.Optimizer(ca.store, tcfg.optimizer)
    sched = nc.Scheduler(opt)
    metrics = MetricsLog(tcfg.metrics_path)
    best, best_params, bad = math.inf, ca.store.state_dict(), 0
    for epoch in range(tcfg.epochs):
        order = rng.permutation(len(train))
        run = 0.0
        for i in range(0, len(order), tcfg.batch_size):
            batch = [train[j] for j in order[i:i + tcfg.batch_size]]
            ca.store.zero_grad()
            for ex in batch:
                loss = ca.loss(ex.query, ex.steps, ex.keyset, ex.statements, ex.operators, training=True)
                nc.mul(loss, 1.0 / len(batch)).backward()
                run += float(loss.data)
            opt.step()
        metrics.write(epoch=epoch, split="train", loss=run / len(train), lr=opt.lr)
        v = _ca_eval(ca, val)
        metrics.write(epoch=epoch, split="val", **v)
        log.info("ca epoch %d train %.4f val %.4f", epoch, run / len(train), v["loss"])
        if v["loss"] < best - 1e-6:
            best, best_params, bad = v["loss"], ca.store.state_dict(), 0
        else:
            bad += 1
            if bad > tcfg.patience:
                break
        sched.step(v["loss"])
    ca.store.load_state_dict(best_params)
    metrics.write(split="summary", best_val=best, skipped=skipped, instances=len(prepared))
    return ca, metrics.rows

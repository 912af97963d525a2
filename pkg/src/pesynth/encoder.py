"""State-embedding network and the statement/operator/drop prediction heads."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from . import neuralcore as nc
from .dsl import OPERATORS, enumerate_vocabulary
from .neuralcore.tensor import _sigmoid as _sigmoid_np
from .state import NULL_TOKEN, encode_states

N_VALUE_ROWS = NULL_TOKEN + 1  # 512 shifted integers + NULL


@dataclass(frozen=True)
class EncoderConfig:
    kind: str = "gps"  # gps | pe
    nu: int = 11
    q: int = 20
    e: int = 20
    slot_width: int = 56
    z: int = 256
    dense_layers: int = 3

    @property
    def n_statements(self) -> int:
        return enumerate_vocabulary(self.nu).n_statements

    @property
    def n_ops(self) -> int:
        return len(OPERATORS)


@dataclass
class PredictionTriple:
    statements: np.ndarray
    operators: np.ndarray
    drop: np.ndarray


class StateModel:
    """Embeds program states and predicts the next statement, operator and drops."""

    def __init__(self, cfg: EncoderConfig = EncoderConfig(), seed: int = 0):
        self.cfg = cfg
        self.seed = seed
        s = self.store = nc.ParamStore(seed)
        c = cfg
        s.embedding("enc.values", N_VALUE_ROWS, c.e, 1 / math.sqrt(c.e))
        s.linear("enc.slot", c.q * c.e + 2, c.slot_width)
        width = (c.nu + 1) * c.slot_width
        for i in range(c.dense_layers):
            s.linear(f"enc.dense{i}", width + i * c.z, c.z)
        s.linear("head.stmt", c.z, c.n_statements)
        s.linear("head.op", c.z, c.n_ops)
        s.linear("head.drop", c.z, c.nu)

    # ---------------------------------------------------------------- forward
    def embed(self, x) -> tuple[nc.Tensor, nc.Tensor]:
        """x: int array (B, N, nu+1, q+2) -> (per-example reps (B, N, Z), pooled (B, Z))."""
        c, p = self.cfg, self.store
        x = np.asarray(x)
        if x.ndim == 3:
            x = x[None]
        if x.ndim != 4 or x.shape[2:] != (c.nu + 1, c.q + 2):
            raise nc.ShapeError(f"state tensor shape {x.shape} does not match nu={c.nu}, q={c.q}")
        B, N, S, _ = x.shape
        vals = nc.embedding(p["enc.values"], x[..., 2:])             # B N S q e
        vals = nc.reshape(vals, (B, N, S, c.q * c.e))
        bits = nc.Tensor(x[..., :2].astype(nc.default_dtype()))
        h = nc.linear(nc.concat([bits, vals], -1), p["enc.slot.w"], p["enc.slot.b"])
        h = nc.reshape(h, (B, N, S * c.slot_width))
        feats = [h]
        for i in range(c.dense_layers):
            inp = feats[0] if i == 0 else nc.concat(feats, -1)
            h = nc.selu(nc.linear(inp, p[f"enc.dense{i}.w"], p[f"enc.dense{i}.b"]))
            feats.append(h)
        return h, nc.mean(h, axis=1)

    def head_logits(self, pooled) -> tuple[nc.Tensor, nc.Tensor, nc.Tensor]:
        p = self.store
        return (nc.linear(pooled, p["head.stmt.w"], p["head.stmt.b"]),
                nc.linear(pooled, p["head.op.w"], p["head.op.b"]),
                nc.linear(pooled, p["head.drop.w"], p["head.drop.b"]))

    def loss(self, x, stmt, op, drop) -> nc.Tensor:
        _, pooled = self.embed(x)
        return step_loss(self.head_logits(pooled), stmt, op, drop)

    # -------------------------------------------------------------- inference
    def predict_tensor(self, x) -> PredictionTriple:
        with nc.no_grad():
            _, pooled = self.embed(x)
            return predict_heads(pooled, self)

    def predict(self, states) -> tuple[np.ndarray, np.ndarray]:
        """Statement probabilities and drop probabilities for a batch of states."""
        pred = self.predict_tensor(encode_states(states))
        return pred.statements, pred.drop

    def embed_states(self, states) -> np.ndarray:
        return self.embed_array(encode_states(states))

    def embed_array(self, x) -> np.ndarray:
        with nc.no_grad():
            return self.embed(x)[1].data

    # ------------------------------------------------------------ persistence
    def hparams(self) -> dict:
        c = self.cfg
        return {"model": "encoder", **asdict(c), "n_statements": c.n_statements,
                "n_ops": c.n_ops, "seed": self.seed}

    def expected_shapes(self) -> dict:
        return {k: v.shape for k, v in self.store.items()}

    def save(self, path, extra: dict | None = None) -> None:
        hp = self.hparams()
        if extra:
            hp["run"] = extra
        nc.save_checkpoint(path, self.store.state_dict(), hp)

    @classmethod
    def load(cls, path) -> "StateModel":
        hp, tensors = nc.load_checkpoint(path)
        if hp.get("model") != "encoder":
            raise nc.CheckpointError(f"{path}: not an encoder checkpoint")
        fields = EncoderConfig.__dataclass_fields__
        model = cls(EncoderConfig(**{k: v for k, v in hp.items() if k in fields}), hp.get("seed", 0))
        nc.load_checkpoint(path, model.expected_shapes())
        model.store.load_state_dict(tensors)
        return model


def predict_heads(pooled, model: StateModel) -> PredictionTriple:
    if pooled.shape[-1] != model.cfg.z:
        raise nc.ShapeError(f"embedding width {pooled.shape[-1]} != Z={model.cfg.z}")
    with nc.no_grad():
        s, o, d = model.head_logits(nc.as_tensor(pooled))
    return PredictionTriple(nc.softmax_np(s.data), nc.softmax_np(o.data), _sigmoid_np(d.data))


def step_loss(logits, stmt, op, drop) -> nc.Tensor:
    """CE(statement) + CE(operator) + sum over slots of BCE(drop), batch-averaged."""
    s, o, d = logits
    return nc.add(nc.add(nc.cross_entropy(s, stmt), nc.cross_entropy(o, op)),
                  nc.bce_with_logits(d, drop))


def probs_loss(pred: PredictionTriple, stmt: int, op: int, drop, eps: float = 1e-12) -> float:
    """Same loss evaluated on probabilities (clamped), for a single prediction."""
    ce = -math.log(max(float(pred.statements[stmt]), eps)) - math.log(max(float(pred.operators[op]), eps))
    p = np.clip(pred.drop, eps, 1 - eps)
    y = np.asarray(drop, dtype=np.float64)
    return ce + float(-(y * np.log(p) + (1 - y) * np.log(1 - p)).sum())

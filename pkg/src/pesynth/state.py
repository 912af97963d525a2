"""Program-state memory, the drop-and-execute transition and its numeric encoding."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dsl import (
    DEFAULT_CONFIG, DslConfig, ErrorKind, ExecError, Program, Statement,
    apply_function, value_type,
)
from .neuralcore.tensor import ShapeError  # noqa: F401  (shared error type)

NULL_TOKEN = 512  # payload id for an empty entry; values map to value - int_min

INPUT, INTERMEDIATE = "input", "intermediate"


class NoDropError(Exception):
    """All nu slots hold variables that later lines still read."""

    def __init__(self, step: int):
        super().__init__(f"no droppable slot before line {step + 1}")
        self.step = step




@dataclass(frozen=True)
class ProgramState:
    """N rows of nu variable slots plus the example outputs.

    ``slot_vars`` holds, for each filled slot, the definition index of the
    variable stored there, so that slot-indexed statements can be mapped
    back to a program. ``last`` is the slot written most recently.
    """
    rows: tuple
    outputs: tuple
    n_vars: int
    slot_vars: tuple
    n_defined: int
    n_inputs: int
    last: int
    nu: int

    @property
    def n_examples(self) -> int:
        return len(self.rows)

    def origin(self, slot: int) -> str | None:
        if slot >= self.n_vars:
            return None
        return INPUT if self.slot_vars[slot] < self.n_inputs else INTERMEDIATE

    def restrict(self, indices: Sequence[int]) -> "ProgramState":
        return ProgramState(
            tuple(self.rows[i] for i in indices), tuple(self.outputs[i] for i in indices),
            self.n_vars, self.slot_vars, self.n_defined, self.n_inputs, self.last, self.nu)

    def is_solution(self) -> bool:
        """True when the latest result equals every example output."""
        if self.n_defined == self.n_inputs:
            return False
        k = self.last
        return all(row[k] == out for row, out in zip(self.rows, self.outputs))


def init_state(examples, cfg: DslConfig = DEFAULT_CONFIG) -> ProgramState:
    if not examples:
        raise ShapeError("no examples")
    arity = len(examples[0][0])
    types = [value_type(v) for v in examples[0][0]]
    for inputs, _ in examples:
        if len(inputs) != arity or [value_type(v) for v in inputs] != types:
            raise ShapeError("examples disagree on input count or types")
    if arity > cfg.nu:
        raise ShapeError("more inputs than variable slots")
    pad = (None,) * (cfg.nu - arity)
    rows = tuple(tuple(inputs) + pad for inputs, _ in examples)
    outputs = tuple(out for _, out in examples)
    return ProgramState(rows, outputs, arity, tuple(range(arity)), arity, arity,
                        arity - 1, cfg.nu)


def drop_exec(stmt: Statement, s: ProgramState, drop_index: int = 0,
              cfg: DslConfig = DEFAULT_CONFIG) -> ProgramState:
    """Execute a slot-indexed statement on every row.

    The result goes to the next free slot, or replaces ``drop_index`` when all
    nu slots are full. Any per-row failure fails the whole transition.
    """
    op, args = stmt.op, stmt.args
    results = []
    for row in s.rows:
        vals = []
        for a in args:
            v = row[a] if a < s.nu else None
            if v is None:
                raise ExecError(ErrorKind.NULL_SLOT)
            vals.append(v)
        results.append(apply_function(op, vals, cfg))
    if s.n_vars < s.nu:
        target, n_vars = s.n_vars, s.n_vars + 1
        slot_vars = s.slot_vars + (s.n_defined,)
    else:
        if not 0 <= drop_index < s.nu:
            raise ValueError(f"drop index {drop_index} out of range")
        target, n_vars = drop_index, s.n_vars
        slot_vars = s.slot_vars[:target] + (s.n_defined,) + s.slot_vars[target + 1:]
    rows = tuple(row[:target] + (r,) + row[target + 1:] for row, r in zip(s.rows, results))
    return ProgramState(rows, s.outputs, n_vars, slot_vars, s.n_defined + 1,
                        s.n_inputs, target, s.nu)


def _encode_value(v, out: np.ndarray, cfg: DslConfig) -> None:
    # out: (q + 2,) already NULL-filled with zero type bits
    if v is None:
        return
    if isinstance(v, tuple):
        out[0] = 1
        if v:
            out[2:2 + len(v)] = np.asarray(v) - cfg.int_min
    else:
        out[1] = 1
        out[2] = v - cfg.int_min


def encode_state(s: ProgramState, cfg: DslConfig = DEFAULT_CONFIG) -> np.ndarray:
    """Array of shape (N, nu + 1, q + 2): type bits (list, int) then payload."""
    x = np.full((s.n_examples, s.nu + 1, cfg.q + 2), NULL_TOKEN, dtype=np.int16)
    x[:, :, :2] = 0
    for i, (row, out) in enumerate(zip(s.rows, s.outputs)):
        for j, v in enumerate(row):
            _encode_value(v, x[i, j], cfg)
        _encode_value(out, x[i, s.nu], cfg)
    return x


def encode_states(states: Sequence[ProgramState], cfg: DslConfig = DEFAULT_CONFIG) -> np.ndarray:
    return np.stack([encode_state(s, cfg) for s in states])


def decode_slot(vec: np.ndarray, cfg: DslConfig = DEFAULT_CONFIG):
    list_bit, int_bit = int(vec[0]), int(vec[1])
    payload = [int(t) for t in vec[2:] if t != NULL_TOKEN]
    if list_bit:
        return tuple(t + cfg.int_min for t in payload)
    if int_bit:
        return payload[0] + cfg.int_min
    return None


# ------------------------------------------------------------------ liveness

def ground_truth_drop(p: Program, t: int, nu: int = DEFAULT_CONFIG.nu) -> np.ndarray:
    """Drop targets after line ``t`` (1-based), in definition numbering.

    Bit i is set iff variable i exists after line t and no line after t reads it.
    """
    if not 1 <= t <= len(p):
        raise ValueError("t out of range")
    n_live = len(p.inputs) + t
    used = set()
    for st in p.statements[t:]:
        used.update(st.args)
    d = np.zeros(nu, dtype=np.float32)
    for i in range(min(n_live, nu)):
        if i not in used:
            d[i] = 1.0
    return d


def slot_drop_targets(p: Program, step: int, slot_vars: Sequence[int], nu: int) -> np.ndarray:
    """Droppable slots before executing line ``step`` (0-based).

    A filled slot may be overwritten by that line's result iff no later line
    reads the variable it holds.
    """
    used = set()
    for st in p.statements[step + 1:]:
        used.update(st.args)
    d = np.zeros(nu, dtype=np.float32)
    for slot, var in enumerate(slot_vars):
        if var not in used:
            d[slot] = 1.0
    return d


def to_slot_statement(st: Statement, slot_vars: Sequence[int]) -> Statement:
    """Rewrite a definition-indexed line against the current slot layout."""
    pos = {v: k for k, v in enumerate(slot_vars)}
    try:
        return Statement(st.op, tuple(pos[a] for a in st.args))
    except KeyError:
        raise ExecError(ErrorKind.NULL_SLOT) from None


def to_program_statement(st: Statement, s: ProgramState) -> Statement:
    """Inverse of :func:`to_slot_statement` for a state ``s``."""
    return Statement(st.op, tuple(s.slot_vars[a] for a in st.args))


def slot_statements(p: Program, nu: int) -> list:
    """Slot form of every line, dropping the lowest droppable slot when full."""
    slot_vars = tuple(range(len(p.inputs)))
    out = []
    for step, st in enumerate(p.statements):
        out.append(to_slot_statement(st, slot_vars))
        if len(slot_vars) < nu:
            slot_vars = slot_vars + (len(p.inputs) + step,)
        else:
            live = np.flatnonzero(slot_drop_targets(p, step, slot_vars, nu))
            if len(live) == 0:
                raise NoDropError(step)
            k = int(live[0])
            slot_vars = slot_vars[:k] + (len(p.inputs) + step,) + slot_vars[k + 1:]
    return out


def replay(p: Program, examples, cfg: DslConfig = DEFAULT_CONFIG, drop_choice=None):
    """States before each line and after the last, plus the slot statements used.

    ``drop_choice(mask) -> slot`` picks among droppable slots when the state is
    full; the default takes the lowest one. Raises ExecError if a line fails.
    """
    s = init_state(examples, cfg)
    states, slot_stmts = [s], []
    for step, st in enumerate(p.statements):
        slot_st = to_slot_statement(st, s.slot_vars)
        drop = 0
        if s.n_vars >= s.nu:
            mask = slot_drop_targets(p, step, s.slot_vars, s.nu)
            live = np.flatnonzero(mask)
            if len(live) == 0:
                raise NoDropError(step)
            drop = int(live[0]) if drop_choice is None else int(drop_choice(mask))
        s = drop_exec(slot_st, s, drop, cfg)
        states.append(s)
        slot_stmts.append(slot_st)
    return states, slot_stmts

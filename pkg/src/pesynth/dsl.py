"""Integer-list DSL: values, operators, statements, programs, text format and interpreter.

Values are plain Python ints or tuples of ints. A program line refers to
earlier variables by their definition index (inputs first, then one
variable per line, no reuse). Search-time statements refer to state slots;
the two numberings coincide until the state runs out of slots.
"""
from __future__ import annotations

import enum
import functools
import itertools
from dataclasses import dataclass, field
from typing import Sequence, Union

Value = Union[int, tuple]

LIST = "LIST"
INT = "INT"

FUNCTIONS = (
    "HEAD", "TAIL", "TAKE", "DROP", "ACCESS", "MINIMUM", "MAXIMUM",
    "REVERSE", "SORT", "SUM", "MAP", "FILTER", "COUNT", "ZIPWITH", "SCANL1",
)
FIRST_ORDER = FUNCTIONS[:10]

INT_TO_INT = ("+1", "-1", "*2", "*3", "*4", "/2", "/3", "/4", "*(-1)", "**2")
INT_TO_BOOL = (">0", "<0", "EVEN", "ODD")
INT_INT_TO_INT = ("+", "-", "*", "MIN", "MAX")

LAMBDAS = {
    "+1": lambda x: x + 1,
    "-1": lambda x: x - 1,
    "*2": lambda x: x * 2,
    "*3": lambda x: x * 3,
    "*4": lambda x: x * 4,
    "/2": lambda x: x // 2,
    "/3": lambda x: x // 3,
    "/4": lambda x: x // 4,
    "*(-1)": lambda x: -x,
    "**2": lambda x: x * x,
    ">0": lambda x: x > 0,
    "<0": lambda x: x < 0,
    "EVEN": lambda x: x % 2 == 0,
    "ODD": lambda x: x % 2 == 1,
    "+": lambda x, y: x + y,
    "-": lambda x, y: x - y,
    "*": lambda x, y: x * y,
    "MIN": min,
    "MAX": max,
}

HIGHER_ORDER_LAMBDAS = {
    "MAP": INT_TO_INT,
    "FILTER": INT_TO_BOOL,
    "COUNT": INT_TO_BOOL,
    "ZIPWITH": INT_INT_TO_INT,
    "SCANL1": INT_INT_TO_INT,
}

# argument types per function, in call order
SIGNATURES = {
    "HEAD": ((LIST,), INT),
    "TAIL": ((LIST,), INT),
    "TAKE": ((INT, LIST), LIST),
    "DROP": ((INT, LIST), LIST),
    "ACCESS": ((INT, LIST), INT),
    "MINIMUM": ((LIST,), INT),
    "MAXIMUM": ((LIST,), INT),
    "REVERSE": ((LIST,), LIST),
    "SORT": ((LIST,), LIST),
    "SUM": ((LIST,), INT),
    "MAP": ((LIST,), LIST),
    "FILTER": ((LIST,), LIST),
    "COUNT": ((LIST,), INT),
    "ZIPWITH": ((LIST, LIST), LIST),
    "SCANL1": ((LIST,), LIST),
}


@dataclass(frozen=True)
class DslConfig:
    n_examples: int = 5
    nu: int = 11
    max_list_len: int = 20
    int_min: int = -256
    int_max: int = 255

    @property
    def q(self) -> int:
        return self.max_list_len


DEFAULT_CONFIG = DslConfig()


class ErrorKind(enum.Enum):
    EMPTY_INPUT = "EmptyInput"
    OUT_OF_BOUNDS = "OutOfBounds"
    TYPE_MISMATCH = "TypeMismatch"
    RANGE_VIOLATION = "RangeViolation"
    NULL_SLOT = "NullSlot"


class ExecError(Exception):
    def __init__(self, kind: ErrorKind):
        super().__init__(kind.value)
        self.kind = kind


class ParseError(ValueError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


@dataclass(frozen=True)
class Operator:
    func: str
    lam: str | None
    index: int

    @property
    def arg_types(self) -> tuple:
        return SIGNATURES[self.func][0]

    @property
    def out_type(self) -> str:
        return SIGNATURES[self.func][1]

    @property
    def arity(self) -> int:
        return len(self.arg_types)

    def __str__(self) -> str:
        return self.func if self.lam is None else f"{self.func} {self.lam}"


@dataclass(frozen=True)
class Statement:
    op: Operator
    args: tuple

    def __str__(self) -> str:
        return f"{self.op} " + " ".join(var_name(a) for a in self.args)


@dataclass(frozen=True)
class Program:
    inputs: tuple
    statements: tuple

    def __post_init__(self):
        if not 1 <= len(self.inputs) <= 3:
            raise ValueError("a program takes 1 to 3 inputs")
        n = len(self.inputs)
        for i, st in enumerate(self.statements):
            if any(a < 0 or a >= n + i for a in st.args):
                raise ValueError(f"line {i + 1} refers to an undefined variable")

    def __len__(self) -> int:
        return len(self.statements)

    def var_types(self) -> list:
        return list(self.inputs) + [st.op.out_type for st in self.statements]

    def __str__(self) -> str:
        return format_program(self)


@dataclass(frozen=True)
class Vocabulary:
    nu: int
    operators: tuple
    statements: tuple
    index: dict = field(repr=False, compare=False)

    @property
    def n_ops(self) -> int:
        return len(self.operators)

    @property
    def n_statements(self) -> int:
        return len(self.statements)

    def statement_index(self, st: Statement) -> int:
        return self.index[(st.op.index, st.args)]

    def operator(self, func: str, lam: str | None = None) -> Operator:
        for op in self.operators:
            if op.func == func and op.lam == lam:
                return op
        raise KeyError(f"{func} {lam}")


def _build_operators() -> tuple:
    ops = []
    for func in FUNCTIONS:
        if func in HIGHER_ORDER_LAMBDAS:
            for lam in HIGHER_ORDER_LAMBDAS[func]:
                ops.append(Operator(func, lam, len(ops)))
        else:
            ops.append(Operator(func, None, len(ops)))
    return tuple(ops)


OPERATORS = _build_operators()
_OP_BY_NAME = {(op.func, op.lam): op for op in OPERATORS}


def operator(func: str, lam: str | None = None) -> Operator:
    return _OP_BY_NAME[(func, lam)]


@functools.lru_cache(maxsize=None)
def enumerate_vocabulary(nu: int = DEFAULT_CONFIG.nu) -> Vocabulary:
    """Operators and slot-indexed statements in canonical order."""
    if nu < 1:
        raise ValueError("nu must be at least 1")
    statements = []
    for op in OPERATORS:
        for args in itertools.product(range(nu), repeat=op.arity):
            statements.append(Statement(op, tuple(args)))
    index = {(st.op.index, st.args): i for i, st in enumerate(statements)}
    return Vocabulary(nu, OPERATORS, tuple(statements), index)


def value_type(v: Value) -> str:
    return LIST if isinstance(v, tuple) else INT


def check_value(v: Value, cfg: DslConfig = DEFAULT_CONFIG) -> Value:
    lo, hi = cfg.int_min, cfg.int_max
    if isinstance(v, tuple):
        if len(v) > cfg.max_list_len:
            raise ExecError(ErrorKind.RANGE_VIOLATION)
        for x in v:
            if x < lo or x > hi:
                raise ExecError(ErrorKind.RANGE_VIOLATION)
    elif v < lo or v > hi:
        raise ExecError(ErrorKind.RANGE_VIOLATION)
    return v


def _nonempty(xs):
    if not xs:
        raise ExecError(ErrorKind.EMPTY_INPUT)
    return xs


def _scanl1(f, xs):
    out = []
    acc = None
    for x in xs:
        acc = x if acc is None else f(acc, x)
        out.append(acc)
    return tuple(out)


def _access(n, xs):
    if n < 0 or n >= len(xs):
        raise ExecError(ErrorKind.OUT_OF_BOUNDS)
    return xs[n]


def _make_impl(op: Operator):
    f = LAMBDAS.get(op.lam)
    return {
        "HEAD": lambda xs: _nonempty(xs)[0],
        "TAIL": lambda xs: _nonempty(xs)[-1],
        "TAKE": lambda n, xs: xs[:max(0, n)],
        "DROP": lambda n, xs: xs[max(0, n):],
        "ACCESS": _access,
        "MINIMUM": lambda xs: min(_nonempty(xs)),
        "MAXIMUM": lambda xs: max(_nonempty(xs)),
        "REVERSE": lambda xs: xs[::-1],
        "SORT": lambda xs: tuple(sorted(xs)),
        "SUM": lambda xs: sum(xs),
        "MAP": lambda xs: tuple(f(x) for x in xs),
        "FILTER": lambda xs: tuple(x for x in xs if f(x)),
        "COUNT": lambda xs: sum(1 for x in xs if f(x)),
        "ZIPWITH": lambda xs, ys: tuple(f(x, y) for x, y in zip(xs, ys)),
        "SCANL1": lambda xs: _scanl1(f, xs),
    }[op.func]


_IMPLS = tuple(_make_impl(op) for op in OPERATORS)
_ARG_IS_LIST = tuple(tuple(t == LIST for t in op.arg_types) for op in OPERATORS)


def apply_function(op: Operator, args: Sequence[Value], cfg: DslConfig = DEFAULT_CONFIG) -> Value:
    """Apply ``op`` to argument values. Raises ExecError on failure."""
    kinds = _ARG_IS_LIST[op.index]
    if len(args) != len(kinds):
        raise ExecError(ErrorKind.TYPE_MISMATCH)
    for a, is_list in zip(args, kinds):
        if a is None:
            raise ExecError(ErrorKind.NULL_SLOT)
        if isinstance(a, tuple) != is_list:
            raise ExecError(ErrorKind.TYPE_MISMATCH)
    return check_value(_IMPLS[op.index](*args), cfg)


def execute_trace(p: Program, inputs: Sequence[Value], cfg: DslConfig = DEFAULT_CONFIG) -> list:
    """All variable values (inputs, then one per line)."""
    if len(inputs) != len(p.inputs):
        raise ExecError(ErrorKind.TYPE_MISMATCH)
    env = []
    for v, t in zip(inputs, p.inputs):
        if value_type(v) != t:
            raise ExecError(ErrorKind.TYPE_MISMATCH)
        env.append(v)
    for st in p.statements:
        env.append(apply_function(st.op, [env[a] for a in st.args], cfg))
    return env


def execute_program(p: Program, inputs: Sequence[Value], cfg: DslConfig = DEFAULT_CONFIG) -> Value:
    return execute_trace(p, inputs, cfg)[-1]


def satisfies(p: Program, example, cfg: DslConfig = DEFAULT_CONFIG) -> bool:
    inputs, output = example
    try:
        return execute_program(p, inputs, cfg) == output
    except ExecError:
        return False


def solution_score(p: Program, examples, cfg: DslConfig = DEFAULT_CONFIG) -> tuple[float, frozenset]:
    """Fraction of examples satisfied, and the (0-based) indices satisfied."""
    if not examples:
        raise ValueError("need at least one example")
    sat = frozenset(i for i, ex in enumerate(examples) if satisfies(p, ex, cfg))
    return len(sat) / len(examples), sat


# ---------------------------------------------------------------- text format

def var_name(i: int) -> str:
    if i < 26:
        return chr(ord("a") + i)
    return f"v{i}"


def _var_index(name: str) -> int | None:
    if len(name) == 1 and "a" <= name <= "z":
        return ord(name) - ord("a")
    if name.startswith("v") and name[1:].isdigit():
        return int(name[1:])
    return None


def format_program(p: Program) -> str:
    lines = [f"{var_name(i)} <- {t}" for i, t in enumerate(p.inputs)]
    n = len(p.inputs)
    for i, st in enumerate(p.statements):
        lines.append(f"{var_name(n + i)} <- {st}")
    return "\n".join(lines)


def parse_program(text: str) -> Program:
    inputs: list = []
    statements: list = []
    seen_statement = False
    lineno = 0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        col = raw.index(line[0]) + 1
        lhs, sep, rhs = line.partition(" <- ")
        if not sep:
            raise ParseError("expected '<-'", lineno, col)
        expected = len(inputs) + len(statements)
        if _var_index(lhs) != expected:
            raise ParseError(f"expected variable {var_name(expected)!r}", lineno, col)
        toks = rhs.split(" ")
        tcol = col + len(lhs) + 4
        if toks[0] in (LIST, INT) and len(toks) == 1:
            if seen_statement:
                raise ParseError("input declaration after a statement", lineno, tcol)
            inputs.append(toks[0])
            continue
        seen_statement = True
        func = toks[0]
        if func not in SIGNATURES:
            raise ParseError(f"unknown function {func!r}", lineno, tcol)
        rest = toks[1:]
        lam = None
        if func in HIGHER_ORDER_LAMBDAS:
            if not rest or rest[0] not in HIGHER_ORDER_LAMBDAS[func]:
                raise ParseError(f"{func} needs a lambda", lineno, tcol + len(func) + 1)
            lam, rest = rest[0], rest[1:]
        op = operator(func, lam)
        if len(rest) != op.arity:
            raise ParseError(f"{func} takes {op.arity} argument(s), got {len(rest)}",
                             lineno, tcol)
        args = []
        for name in rest:
            idx = _var_index(name)
            if idx is None or idx >= expected:
                raise ParseError(f"undefined variable {name!r}", lineno, tcol)
            args.append(idx)
        statements.append(Statement(op, tuple(args)))
    if not inputs:
        raise ParseError("program declares no inputs", max(lineno, 1), 1)
    if len(inputs) > 3:
        raise ParseError("at most 3 inputs", lineno, 1)
    if not statements:
        raise ParseError("program has no statements", max(lineno, 1), 1)
    return Program(tuple(inputs), tuple(statements))


def to_json_value(v: Value):
    return list(v) if isinstance(v, tuple) else v


def from_json_value(v) -> Value:
    return tuple(v) if isinstance(v, list) else int(v)


def example_to_json(example) -> dict:
    inputs, output = example
    return {"inputs": [to_json_value(x) for x in inputs], "output": to_json_value(output)}


def example_from_json(d: dict):
    return (tuple(from_json_value(x) for x in d["inputs"]), from_json_value(d["output"]))

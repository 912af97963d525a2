import pytest
from hypothesis import given, settings, strategies as st

from pesynth.dsl import (
    OPERATORS, ErrorKind, ExecError, ParseError, Program, apply_function, enumerate_vocabulary,
    example_from_json, example_to_json, execute_program, format_program, operator,
    parse_program, satisfies, solution_score,
)
from reference_cases import CASE1_GLOBAL, CASE1_PE, CASE2_EXAMPLES, CASE2_P1


def test_vocabulary_sizes():
    assert len(OPERATORS) == 38
    assert enumerate_vocabulary(11).n_statements == 1298
    assert enumerate_vocabulary(1).n_statements == 38
    assert enumerate_vocabulary(2).n_statements == 92


def test_vocabulary_index_roundtrip():
    v = enumerate_vocabulary(11)
    for i in (0, 17, 500, 1297):
        assert v.statement_index(v.statements[i]) == i


@pytest.mark.parametrize("func,lam,args,want", [
    ("TAIL", None, [(1, 2, 3)], 3),
    ("SCANL1", "+", [(1, 2, 3)], (1, 3, 6)),
    ("TAKE", None, [8, (8, 10, 12, 4)], (8, 10, 12, 4)),
    ("SUM", None, [()], 0),
    ("DROP", None, [2, (1, 2, 3)], (3,)),
    ("ACCESS", None, [1, (5, 6)], 6),
    ("MAP", "/2", [(-3, 3)], (-2, 1)),
    ("FILTER", "ODD", [(-3, 2, 5)], (-3, 5)),
    ("COUNT", "<0", [(-1, 0, -2)], 2),
    ("ZIPWITH", "MAX", [(1, 9, 3), (4, 2)], (4, 9)),
    ("SORT", None, [(3, -1, 2)], (-1, 2, 3)),
])
def test_apply_function(func, lam, args, want):
    assert apply_function(operator(func, lam), args) == want


@pytest.mark.parametrize("func,lam,args,kind", [
    ("HEAD", None, [()], ErrorKind.EMPTY_INPUT),
    ("ACCESS", None, [5, (1, 2)], ErrorKind.OUT_OF_BOUNDS),
    ("MAP", "*4", [(100,)], ErrorKind.RANGE_VIOLATION),
    ("SUM", None, [3], ErrorKind.TYPE_MISMATCH),
    ("SUM", None, [None], ErrorKind.NULL_SLOT),
])
def test_apply_function_errors(func, lam, args, kind):
    with pytest.raises(ExecError) as e:
        apply_function(operator(func, lam), args)
    assert e.value.kind is kind


def test_execute_reference_programs():
    p1 = parse_program(CASE1_PE[0][0])
    assert execute_program(p1, ((4, 5, 6, 2, 6, 2, 1, 6, 1, 4, 2, 5, 6, 3, 2, 2),)) == (4, 12, 10, 8)
    assert execute_program(parse_program(CASE2_P1), ((1, 0, 3, 3, 3), 35)) == (3, 1, 7)
    assert execute_program(parse_program("a <- LIST\nb <- REVERSE a"), ((),)) == ()


def test_satisfies_and_score():
    p = parse_program(CASE2_P1)
    assert satisfies(p, CASE2_EXAMPLES[0])
    assert not satisfies(p, CASE2_EXAMPLES[1])
    u, sat = solution_score(p, CASE2_EXAMPLES)
    assert u == 0.6 and sat == {0, 3, 4}
    bad = parse_program("a <- LIST\nb <- HEAD a")
    assert solution_score(bad, [(((),), 0)] * 3) == (0.0, frozenset())


def test_format_roundtrip():
    assert format_program(parse_program(CASE1_GLOBAL)) == CASE1_GLOBAL


@pytest.mark.parametrize("text", [
    "a <- LIST\nb <- TAKE a",
    "a <- LIST\nb <- FOO a",
    "a <- LIST\nb <- MAP a",
    "a <- LIST\nc <- REVERSE a",
    "a <- LIST\nb <- REVERSE c",
    "a <- LIST",
])
def test_parse_errors(text):
    with pytest.raises(ParseError) as e:
        parse_program(text)
    assert e.value.line >= 1


def test_program_rejects_forward_reference():
    with pytest.raises(ValueError):
        Program(("LIST",), (enumerate_vocabulary(11).statements[0].__class__(operator("SORT"), (1,)),))


def test_example_json_roundtrip():
    ex = (((1, 2), 3), (4,))
    assert example_from_json(example_to_json(ex)) == ex


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(-256, 255), max_size=20))
def test_sort_reverse_properties(xs):
    xs = tuple(xs)
    s = apply_function(operator("SORT"), [xs])
    assert list(s) == sorted(xs)
    assert apply_function(operator("REVERSE"), [apply_function(operator("REVERSE"), [xs])]) == xs
    assert apply_function(operator("COUNT", ">0"), [xs]) + apply_function(operator("COUNT", "<0"), [xs]) \
        == sum(1 for x in xs if x != 0)

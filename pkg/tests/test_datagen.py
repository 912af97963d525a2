import numpy as np
import pytest

from pesynth.aggregator import PESolution
from pesynth.datagen import (
    AggregatorInstance, Corpus, DatagenConfig, DatasetRecord, GenerationError, Reject, SamplingConfig,
    TimeoutPolicy, build_aggregator_instances, build_dataset, equiv_filter, gen_examples, gen_program,
    keep_instance, read_dataset, read_instances, write_jsonl,
)
from pesynth.dsl import format_program, parse_program, satisfies
from pesynth.encoder import EncoderConfig, StateModel
from pesynth.search import SearchBudget


@pytest.mark.parametrize("length", [1, 2, 3, 4])
def test_gen_program_valid_and_deterministic(length):
    a = gen_program(length, np.random.default_rng(length))
    b = gen_program(length, np.random.default_rng(length))
    assert a == b and len(a) == length
    assert parse_program(format_program(a)) == a


def test_gen_program_bad_length():
    with pytest.raises(ValueError):
        gen_program(0, np.random.default_rng(0))


def test_gen_examples_satisfy_and_deterministic():
    p = gen_program(3, np.random.default_rng(7))
    a = gen_examples(p, 5, np.random.default_rng(1))
    assert a == gen_examples(p, 5, np.random.default_rng(1))
    assert all(satisfies(p, e) for e in a)


def test_gen_examples_overflow_rejects():
    p = parse_program("a <- LIST\nb <- MAP *4 a\nc <- MAP *4 b\nd <- MAP *4 c\ne <- MAP *4 d")
    scfg = SamplingConfig(list_min=100, list_max=120, input_attempts=50)
    with pytest.raises(Reject):
        gen_examples(p, 5, np.random.default_rng(0), scfg=scfg)


def test_equiv_filter_cases():
    ident = parse_program("a <- LIST\nb <- SORT a")
    cand = parse_program("a <- LIST\nb <- REVERSE a\nc <- SORT b")
    exs = [(((3, 1, 2),), (1, 2, 3)), (((9, 0),), (0, 9))]
    rec = DatasetRecord(cand, exs)
    assert not equiv_filter(rec, [ident])
    assert equiv_filter(rec, [])
    assert not equiv_filter(rec, [cand])
    other = parse_program("a <- LIST\nb <- REVERSE a")
    assert equiv_filter(rec, [other])


def test_corpus_length_rule():
    long = DatasetRecord(parse_program("a <- LIST\nb <- REVERSE a\nc <- SORT b"), [(((2, 1),), (1, 2))])
    short = DatasetRecord(parse_program("a <- LIST\nb <- SORT a"), [(((2, 1),), (1, 2))])
    c = Corpus()
    c.add(long)
    assert not c.matches(short)
    assert c.matches(short, any_length=True)
    c2 = Corpus()
    c2.add(short)
    assert c2.covered_by(long) and not c2.matches(DatasetRecord(long.program, [(((5, 4, 9),), (9, 4, 5))]))


@pytest.fixture(scope="module")
def small_dataset():
    dcfg = DatagenConfig(train_counts={1: 10, 2: 25, 3: 25}, test_counts={2: 10, 3: 10}, seed=3)
    return dcfg, build_dataset(dcfg)


def test_dataset_integrity(small_dataset):
    _, (header, train, test) = small_dataset
    assert len(train) == 60 and len(test) == 20
    for r in train + test:
        assert all(satisfies(r.program, e) for e in r.examples)
    for r in test:
        assert len(r.extra) == 5 and all(satisfies(r.program, e) for e in r.extra)
        for t in train:
            assert not all(satisfies(t.program, e) for e in r.examples)
            assert not all(satisfies(r.program, e) for e in t.examples)
    # records come out by ascending length; no earlier program fits a later record
    for i, later in enumerate(train):
        for earlier in train[:i]:
            assert len(earlier.program) <= len(later.program)
            assert not all(satisfies(earlier.program, e) for e in later.examples)
            assert not all(satisfies(later.program, e) for e in earlier.examples)


def test_dataset_files_byte_identical(small_dataset, tmp_path):
    dcfg, (header, train, test) = small_dataset
    h2, train2, test2 = build_dataset(dcfg)
    write_jsonl(tmp_path / "a.jsonl", header, train + test)
    write_jsonl(tmp_path / "b.jsonl", h2, train2 + test2)
    assert (tmp_path / "a.jsonl").read_bytes() == (tmp_path / "b.jsonl").read_bytes()
    _, back = read_dataset(tmp_path / "a.jsonl")
    assert [r.program for r in back] == [r.program for r in train + test]


def test_timeout_policies():
    rng = np.random.default_rng(0)
    assert TimeoutPolicy("fixed_0.5").fractions(rng) == [0.5]
    assert TimeoutPolicy("triple_0.4_0.5_0.6").fractions(rng) == [0.4, 0.5, 0.6]
    r = TimeoutPolicy("random_0.1_to_0.9").fractions(rng)
    assert len(r) == 2 and all(0.1 <= f <= 0.9 for f in r)
    with pytest.raises(ValueError):
        TimeoutPolicy("bogus").fractions(rng)


def test_keep_instance_rules():
    p = parse_program("a <- LIST\nb <- SORT a")
    assert not keep_instance([])
    assert not keep_instance([PESolution(p, 1.0, frozenset(range(5)))])
    assert not keep_instance([PESolution(p, 0.0, frozenset())])
    assert keep_instance([PESolution(p, 0.4, frozenset({0, 1})), PESolution(p, 0.0, frozenset())])


def test_aggregator_instances_roundtrip(small_dataset, tmp_path):
    _, (_, train, _) = small_dataset
    pe = StateModel(EncoderConfig(kind="pe", z=16), 0)
    recs = train[10:30]
    header, inst = build_aggregator_instances(recs, pe, TimeoutPolicy(unit=SearchBudget("nodes", 12)))
    assert len(inst) + sum(header["omitted"].values()) == len(recs)
    for i in inst:
        assert keep_instance(i.solutions)
    write_jsonl(tmp_path / "i.jsonl", header, inst)
    _, back = read_instances(tmp_path / "i.jsonl")
    assert [b.to_json() for b in back] == [i.to_json() for i in inst]


def test_instance_json_roundtrip():
    p = parse_program("a <- LIST\nb <- SORT a")
    inst = AggregatorInstance([(((2, 1),), (1, 2))], [PESolution(p, 0.2, frozenset({0}), 0)], p, 0.4)
    assert AggregatorInstance.from_json(inst.to_json()).to_json() == inst.to_json()


def test_generation_error_on_impossible_budget():
    with pytest.raises(GenerationError):
        gen_program(3, np.random.default_rng(0), scfg=SamplingConfig(program_attempts=0))

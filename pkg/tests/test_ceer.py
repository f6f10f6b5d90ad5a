import random

import pytest
from hypothesis import given, settings, strategies as st

from ceerlab.algebra import finite_pairs, quotient
from ceerlab.ceer import (
    canonical, classes_at, eq_at, finite_ceer, id_ceer, id_n, indexed_ceer, parse_snapshot, r_u,
    snapshot_text,
)
from ceerlab.machine import Registry, finite_set, pair, unpair, w
from ceerlab.partition import StagedPartition
from ceerlab.ceer import PartitionCeer


def test_id_n_examples():
    assert eq_at(id_n(1), 0, 3, 17)
    assert not eq_at(id_ceer(), 100, 3, 5)
    assert eq_at(id_n(3), 0, 2, 5)
    assert not eq_at(id_n(3), 0, 2, 4)
    with pytest.raises(ValueError):
        id_n(0)


def test_classes_at_examples():
    assert canonical(classes_at(id_n(2), 0, 6)) == [(0, 2, 4), (1, 3, 5)]
    Q = quotient(id_ceer(), finite_pairs([(0, 1), (1, 2)]))
    assert canonical(classes_at(Q, 5, 4)) == [(0, 1, 2), (3,)]


def test_r_u():
    assert canonical(classes_at(r_u(finite_set([])), 50, 8)) == [(x,) for x in range(8)]
    R = r_u(finite_set([0, 1]))
    assert R.eq_at(1, 0, 1)
    assert not any(R.eq_at(s, 0, 2) for s in range(30))
    E = r_u(w("evens"))
    assert canonical(E.classes_at(20, 8)) == [(0, 2, 4, 6), (1,), (3,), (5,), (7,)]


def test_indexed_ceer_examples():
    reg = Registry()
    assert canonical(indexed_ceer("loop", reg).classes_at(100, 6)) == [(x,) for x in range(6)]
    codes = {pair(0, 1), pair(1, 2)}
    reg.register_spec("chain", "set " + " ".join(map(str, sorted(codes))))
    R = indexed_ceer("chain", reg)
    both = max(codes)
    assert canonical(R.classes_at(both, 4)) == [(0, 1, 2), (3,)]
    assert not R.eq_at(min(codes) - 1, 0, 1)


def test_indexed_all_pairs_matches_direct_closure():
    R = indexed_ceer("identity")
    for s in (0, 3, 10, 40):
        # direct closure: pair codes m <= s enumerated by stage s (entry = max(1, m))
        part = StagedPartition()
        for m in range(1, s + 1):
            part.merge(0, *unpair(m))
        assert canonical(R.classes_at(s, 12)) == canonical(part.classes(12))


def test_indexed_stage_zero_is_identity():
    for name in ("identity", "evens", "zero"):
        assert canonical(indexed_ceer(name).classes_at(0, 10)) == [(x,) for x in range(10)]


def test_finite_ceer():
    F = finite_ceer([[0, 3], [1, 2, 5], [4]])
    assert F.finite_classes == 3 and F.universe == 6
    assert F.eq_at(0, 0, 3) and F.eq_at(0, 6, 9) and not F.eq_at(0, 0, 4)
    with pytest.raises(ValueError):
        finite_ceer([[0, 2]])


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 400))
def test_indexed_ceers_are_monotone(index):
    R = indexed_ceer(index, step_cap=64)
    prev = None
    for s in range(0, 60, 6):
        cur = R.approx(s, 10)
        if prev is not None:
            for x in range(10):
                for y in range(10):
                    if prev.eq(x, y):
                        assert cur.eq(x, y)
        prev = cur


def test_snapshot_round_trip():
    R = indexed_ceer("identity")
    text = snapshot_text(R, 30, 12)
    E, stage = parse_snapshot(text)
    assert stage == 30
    assert snapshot_text(E, 30) == text
    assert text.splitlines()[0] == "ceer R[identity] 30 12"


def test_snapshot_rejects_garbage():
    with pytest.raises(ValueError):
        parse_snapshot("merge 1 0 1\n")
    with pytest.raises(ValueError):
        parse_snapshot("ceer X 3 2\nmerge 1 0 5\n")


@settings(max_examples=40)
@given(st.lists(st.tuples(st.integers(0, 15), st.integers(0, 15)), max_size=20))
def test_partition_ceer_snapshot_bit_exact(pairs):
    part = StagedPartition("P")
    for s, (a, b) in enumerate(pairs, 1):
        part.merge(s, a, b)
    part.mention(15)
    E = PartitionCeer(part)
    text = snapshot_text(E, len(pairs))
    back, _ = parse_snapshot(text)
    assert back.partition == part


def test_equivalence_laws_sampled():
    rng = random.Random(7)
    ceers = [id_n(3), indexed_ceer("identity"), r_u(w("evens")),
             finite_ceer([[0, 3], [1, 2, 5], [4]])]
    checks = 0
    for E in ceers:
        for _ in range(2500):
            s = rng.randrange(50)
            x, y, z = (rng.randrange(40) for _ in range(3))
            assert E.eq_at(s, x, x)
            assert E.eq_at(s, x, y) == E.eq_at(s, y, x)
            if E.eq_at(s, x, y) and E.eq_at(s, y, z):
                assert E.eq_at(s, x, z)
            checks += 3
    assert checks >= 30000

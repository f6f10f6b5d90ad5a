import pytest
from hypothesis import given, settings, strategies as st

from ceerlab.algebra import oplus
from ceerlab.ceer import canonical, finite_ceer, id_ceer, id_n, indexed_ceer, r_u, witness
from ceerlab.machine import finite_set, w, PredicateSet
from ceerlab.reductions import (
    ConsistentUpTo, Disagreement, HypothesisRefuted, NonTotalWithin, brute_force_reduction,
    dovetail_first, invert_onto, join_quotient, one_reduction_from, parse_witness, plus_span,
    ru_from_below, split_common, split_general, split_id_part, split_peel, table_witness,
    transversal_combine, verify_reduction, witness_text,
)

ok = ConsistentUpTo


def test_verify_examples():
    assert verify_reduction(witness(lambda x: x, id_ceer(), id_ceer()), 20, 0) == ok(20, 0)
    v = verify_reduction(witness(lambda x: 0, id_ceer(), id_ceer()), 2, 0)
    assert isinstance(v, Disagreement) and (v.x, v.y) == (0, 1) and v.direction == "target-only"
    E = indexed_ceer("evens")
    assert verify_reduction(witness(lambda x: 2 * x, E, oplus(E, id_ceer())), 64, 300) == ok(64, 300)


def test_non_total_and_final_flags():
    v = verify_reduction(witness(lambda x: None if x == 3 else x, id_ceer(), id_ceer()), 10, 0)
    assert v == NonTotalWithin(10**5, 3)
    v = verify_reduction(witness(lambda x: 0, id_n(2), id_n(2)), 4, 0)
    assert isinstance(v, Disagreement) and v.final
    v = verify_reduction(witness(lambda x: 0, indexed_ceer("loop"), id_n(1)), 4, 0)
    assert isinstance(v, Disagreement) and not v.final


def test_oracle_examples():
    assert brute_force_reduction(id_n(2), id_n(3)) is not None
    assert brute_force_reduction(id_n(3), id_n(2)) is None
    table = brute_force_reduction(finite_ceer([[0, 1], [2]]), id_n(2))
    assert table == {0: 0, 1: 0, 2: 1}


def test_oracle_on_identity_family():
    for n in range(1, 9):
        for m in range(1, 9):
            assert (brute_force_reduction(id_n(n), id_n(m)) is not None) == (n <= m)


def test_oracle_rejects_undecided():
    with pytest.raises(ValueError):
        brute_force_reduction(id_ceer(), id_n(2))


def test_dovetail_first_matches_scan():
    def pred(a, t):
        return t >= 10 - 2 * a
    # reference: scan pairs in Cantor order
    from ceerlab.machine import cantor_pairs
    ref = next(a for a, t in cantor_pairs() if pred(a, t))
    assert dovetail_first(pred, 10**4) == ref
    assert dovetail_first(lambda a, t: False, 500) is None


def test_invert_onto_examples():
    g = invert_onto(witness(lambda x: x, id_n(2), id_n(2)))
    assert [g(0), g(1)] == [0, 1]
    g = invert_onto(witness(lambda x: x, id_ceer(), id_ceer()), bound=20)
    assert [g(y) for y in range(20)] == list(range(20))
    R = finite_ceer([[0, 1], [2]])
    wt = witness(lambda x: {0: 0, 1: 2}[x % 2], id_n(2), R)
    g = invert_onto(wt)
    assert [g(0), g(1), g(2)] == [0, 0, 1]
    assert verify_reduction(g, 3, 0) == ok(3, 0)


def test_invert_onto_refutes_missing_class():
    with pytest.raises(HypothesisRefuted):
        invert_onto(witness(lambda x: 2 * x, id_ceer(), id_ceer()), budget=2000, bound=4)


def test_transversal_combine_examples():
    odds = PredicateSet(lambda x: 0 if x % 2 else None, "odds")
    wt = witness(lambda x: 2 * x, id_ceer(), id_ceer())
    g = transversal_combine(wt, odds, lambda v: v % 2 == 1, audit=64)
    assert verify_reduction(g, 200, 0) == ok(200, 0)
    E = r_u(w("evens"))
    g = transversal_combine(witness(lambda x: x, E, E), odds, lambda v: v % 2 == 1,
                            stage=600, audit=64)
    assert verify_reduction(g, 100, 600) == ok(100, 600)


def test_transversal_refuted():
    R = finite_ceer([[0, 1], [2], [3], [4], [5]])
    with pytest.raises(HypothesisRefuted):
        transversal_combine(witness(lambda x: x, R, R), w("identity"), lambda v: True, audit=4)


def test_plus_span_examples():
    g = plus_span(witness(lambda x: 0, id_n(1), id_n(2)), [1])
    assert verify_reduction(g, 40, 0) == ok(40, 0)
    g = plus_span(witness(lambda x: 0, id_n(1), id_n(3)), [1, 2])
    assert canonical(g.source.classes_at(0, 12)) == canonical(oplus(id_n(1), id_n(2)).classes_at(0, 12))
    assert verify_reduction(g, 40, 0) == ok(40, 0)
    assert brute_force_reduction(oplus_decided(1, 2), id_n(3)) is not None
    with pytest.raises(HypothesisRefuted):
        plus_span(witness(lambda x: 0, id_n(1), id_n(2)), [0])


def oplus_decided(a, b):
    """Id_a (+) Id_b as a finite ceer, for the oracle."""
    blocks = {}
    u = 2 * a * b
    for x in range(u):
        blocks.setdefault((x % 2, (x >> 1) % (a if x % 2 == 0 else b)), []).append(x)
    return finite_ceer(blocks.values())


def test_join_quotient_examples():
    one = id_n(1)
    jq = join_quotient(witness(lambda x: 0, one, one), witness(lambda x: 0, one, one))
    assert jq.W.size(10) == 121
    assert len(jq.quotient.classes_at(30, 20)) == 1
    assert verify_reduction(jq.witness, 30, 30) == ok(30, 30)
    R = id_ceer()
    jq = join_quotient(witness(lambda x: 2 * x, R, R), witness(lambda x: 2 * x + 1, R, R))
    assert jq.W.size(60) == 0
    assert verify_reduction(jq.witness, 60, 60) == ok(60, 60)


def test_join_quotient_needs_shared_target():
    with pytest.raises(ValueError):
        join_quotient(witness(lambda x: x, id_ceer(), id_ceer()),
                      witness(lambda x: x, id_ceer(), id_ceer()))


def check_split(sp, bound=40, stage=0):
    for lw in sp.lower:
        assert verify_reduction(lw, bound, stage) == ok(bound, stage)
    assert verify_reduction(sp.into, bound, stage) == ok(bound, stage)
    assert verify_reduction(sp.back, bound, stage) == ok(bound, stage)


def test_split_peel_all_even():
    target = oplus(id_n(1), id_n(1))
    sp = split_peel(witness(lambda x: 0, id_n(1), target), 1, audit=32)
    assert sp.k == 0
    check_split(sp)


def test_split_general_missing_class():
    R = id_n(3)
    wt = witness(lambda x: x % 2, id_n(2), R)
    sp = split_general(wt, finite_set([0]), [1], audit=32)
    assert sp.k == 1
    check_split(sp)
    assert len(sp.E0.classes_at(0, 20)) == 1


def test_split_common_two_targets():
    X = oplus(id_n(2), id_n(1))
    wf = witness(lambda x: 2 * (x % 2), id_n(2), X)
    wg = witness(lambda x: 2 * (x % 2), id_n(2), X)
    sp = split_common(wf, wg, 1, audit=32)
    assert sp.k == 0
    check_split(sp)


def test_split_id_part():
    target = oplus(id_n(1), id_ceer())
    # evens go to the left class, odds to distinct Id classes
    wt = witness(lambda x: 0 if x % 2 == 0 else 2 * (x >> 1) + 1, oplus(id_n(1), id_ceer()), target)
    sp = split_id_part(wt, threshold=8, audit=32)
    assert sp.k is None
    check_split(sp, bound=30)
    with pytest.raises(HypothesisRefuted):
        split_id_part(witness(lambda x: 0, id_n(1), target), threshold=8, audit=32)


def test_r_u_bridge():
    V = w("evens")
    U = w("evens")
    RU, RV = r_u(U), r_u(V)
    g = one_reduction_from(witness(lambda x: x, RU, RV), V, cap=200)
    vals = [g(x) for x in range(30)]
    assert len(set(vals)) == 30
    assert all((x % 2 == 0) == (v % 2 == 0) for x, v in zip(range(30), vals))
    Vset, down, up = ru_from_below(witness(lambda x: x, RU, RU), U, horizon=200)
    assert verify_reduction(down, 30, 200) == ok(30, 200)
    assert verify_reduction(up, 30, 200) == ok(30, 200)


def test_witness_file_round_trip():
    wt = witness(lambda x: 2 * x, id_ceer(), oplus(id_ceer(), id_n(1)))
    text = witness_text(wt, 16)
    back = parse_witness(text, wt.source, wt.target)
    assert [back(x) for x in range(16)] == [2 * x for x in range(16)]
    assert witness_text(back, 16) == text
    prog = parse_witness("witness A B\nprogram double\n", id_ceer(), id_ceer())
    assert prog(4) == 8
    with pytest.raises(ValueError):
        parse_witness("table 0 0\n", id_ceer(), id_ceer())


small_blocks = st.integers(1, 5).flatmap(
    lambda u: st.lists(st.integers(0, u - 1), min_size=u, max_size=u))


def blocks_of(labels):
    out = {}
    for x, lab in enumerate(labels):
        out.setdefault(lab, []).append(x)
    return list(out.values())


@settings(max_examples=80, deadline=None)
@given(small_blocks, small_blocks)
def test_oracle_soundness(a, b):
    E, R = finite_ceer(blocks_of(a)), finite_ceer(blocks_of(b))
    table = brute_force_reduction(E, R)
    assert (table is not None) == (E.finite_classes <= R.finite_classes)
    if table is not None:
        v = verify_reduction(table_witness(table, E, R), 30, 0)
        assert v == ok(30, 0)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 5), st.integers(0, 40))
def test_invert_round_trip_on_classes(n, shift):
    # f: Id_n -> Id_n, x -> x + shift is onto classes
    E = id_n(n)
    wt = witness(lambda x: x + shift, E, E)
    g = invert_onto(wt, bound=10)
    for y in range(10):
        assert E.eq_at(0, wt(g(y)), y)


def test_table_witness_extends_through_classes():
    E = finite_ceer([[0, 2], [1]])
    wt = table_witness({0: 5, 1: 6}, E, id_ceer())
    # numbers past the universe follow their residue mod 3
    assert [wt(x) for x in range(5)] == [5, 6, 5, 5, 6]

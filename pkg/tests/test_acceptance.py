"""End-to-end acceptance checks, one test per criterion.

Each test prints a single PASS/FAIL line (visible even under capture) and
then asserts, so a failing criterion shows both in the summary and in pytest.
"""

import os
import random

import pytest

from ceerlab.algebra import jump, oplus, quotient, finite_pairs, restrict
from ceerlab.ceer import finite_ceer, id_ceer, id_n, indexed_ceer, witness
from ceerlab.cli import main
from ceerlab.constructions import (
    ParameterMirror, cof_gadget, dark_join_pair, exact_pair, exact_pair_report,
    frozen_class_report, minimal_dark, nsf_actions, planted_join_check, self_full_covers,
    self_full_finite_classes, selffull_gadget,
)
from ceerlab.machine import PredicateSet, Registry, column, decidable_set, finite_set, omega, unpair
from ceerlab.reductions import (
    ConsistentUpTo, HypothesisRefuted, brute_force_reduction, invert_onto, join_quotient,
    plus_span, split_common, split_general, split_id_part, split_peel, table_witness,
    transversal_combine, verify_reduction,
)


@pytest.fixture
def report(capsys):
    def emit(n, what, ok, detail=""):
        line = f"{'PASS' if ok else 'FAIL'} criterion {n}: {what}"
        if detail:
            line += f" ({detail})"
        with capsys.disabled():
            print("\n" + line)
        assert ok, line
    return emit


def partitions(u):
    """All partitions of [0, u) as restricted growth strings."""
    def rec(i, labels, top):
        if i == u:
            yield list(labels)
            return
        for lab in range(top + 1):
            labels.append(lab)
            yield from rec(i + 1, labels, max(top, lab + 1))
            labels.pop()
    yield from rec(0, [], 0)


def blocks_of(labels):
    out = {}
    for x, lab in enumerate(labels):
        out.setdefault(lab, []).append(x)
    return list(out.values())


def random_blocks(rng, u, classes):
    labels = list(range(classes)) + [rng.randrange(classes) for _ in range(u - classes)]
    rng.shuffle(labels)
    return blocks_of(labels)


def ok_verdict(wt, bound, stage=0):
    return verify_reduction(wt, bound, stage) == ConsistentUpTo(bound, stage)


# ---------------------------------------------------------------- 1

def test_criterion_1_oracle_equivalence(report):
    labels = [p for u in range(1, 7) for p in partitions(u)]
    ceers = [finite_ceer(blocks_of(p)) for p in labels]
    counts = [len(set(p)) for p in labels]
    pairs = mismatched = failed = 0
    for a, E in enumerate(ceers):
        for b, R in enumerate(ceers):
            table = brute_force_reduction(E, R)
            pairs += 1
            if (table is not None) != (counts[a] <= counts[b]):
                mismatched += 1
            elif table is not None and not ok_verdict(table_witness(table, E, R), 12):
                failed += 1
    report(1, "oracle existence matches class counts; every table verifies",
           pairs == 278 ** 2 and mismatched == 0 and failed == 0,
           f"{pairs} pairs, {mismatched} mismatches, {failed} bad tables")


# ---------------------------------------------------------------- 2

class Tally:
    def __init__(self):
        self.n = 0
        self.bad = []

    def check(self, cond, what):
        self.n += 1
        if not cond and len(self.bad) < 5:
            self.bad.append(what)


def check_map(t, src, dst, f, s, bound, what):
    """x src y iff f(x) dst f(y) for all x, y < bound, at stage s."""
    ks = [src.key(s, x) for x in range(bound)]
    kd = [dst.key(s, f(x)) for x in range(bound)]
    for x in range(bound):
        for y in range(bound):
            t.check((ks[x] == ks[y]) == (kd[x] == kd[y]), f"{what} at {x},{y}")


def test_criterion_2_algebra_laws(report):
    t = Tally()
    A, B, C = indexed_ceer("evens"), id_n(3), finite_ceer([[0, 2], [1], [3, 4]])
    s = 400
    left, right = oplus(oplus(A, B), C), oplus(A, oplus(B, C))

    def to_right(x):
        if x % 2 == 1:
            return 4 * (x >> 1) + 3
        y = x >> 1
        return 2 * (y >> 1) if y % 2 == 0 else 4 * (y >> 1) + 1

    def to_left(x):
        if x % 2 == 0:
            return 4 * (x >> 1)
        y = x >> 1
        return 2 * (2 * (y >> 1) + 1) if y % 2 == 0 else 2 * (y >> 1) + 1

    check_map(t, left, right, to_right, s, 128, "assoc ->")
    check_map(t, right, left, to_left, s, 128, "assoc <-")
    J = oplus(A, C)
    check_map(t, A, J, lambda x: 2 * x, s, 128, "left injection")
    check_map(t, C, J, lambda x: 2 * x + 1, s, 128, "right injection")
    Q = quotient(A, finite_pairs([]))
    check_map(t, A, Q, lambda x: x, s, 128, "quotient by empty")
    R = restrict(A, omega(), horizon=s)
    check_map(t, R, A, R.h, s, 96, "restrict to omega")
    check_map(t, A, R, R.h_inverse, s, 96, "restrict to omega, back")
    jp = jump(id_n(2))
    for x in range(10000):
        t.check(jp.eq_at(0, x, x), f"jump reflexive at {x}")
    report(2, "algebra laws hold exactly", t.n >= 10 ** 5 and not t.bad,
           f"{t.n} assertions, failures {t.bad}")


# ---------------------------------------------------------------- 3

def random_reduction(rng, E_blocks, R_blocks):
    """f sending each E class to a random member of a distinct R class."""
    targets = rng.sample(range(len(R_blocks)), len(E_blocks))
    image = {}
    for b, tgt in zip(E_blocks, targets):
        for x in b:
            image[x] = rng.choice(R_blocks[tgt])
    u = sum(len(b) for b in E_blocks)
    return (lambda x: image[x % u]), targets


def lemma_invert(rng):
    n = rng.randint(1, 4)
    Rb = random_blocks(rng, rng.randint(n, 7), n)
    Eb = random_blocks(rng, rng.randint(n, 7), n)
    E, R = finite_ceer(Eb), finite_ceer(Rb)
    f, _ = random_reduction(rng, Eb, Rb)
    g = invert_onto(witness(f, E, R), bound=10)
    good = ok_verdict(g, 10)
    Rb2 = random_blocks(rng, rng.randint(n + 1, 8), n + 1)
    f2, _ = random_reduction(rng, Eb, Rb2)
    try:
        invert_onto(witness(f2, E, finite_ceer(Rb2)), budget=3000, bound=10)
        refuted = False
    except HypothesisRefuted:
        refuted = True
    return good, refuted


def lemma_transversal(rng):
    m = rng.randint(1, 4)
    Fb = random_blocks(rng, rng.randint(m + 1, 8), m + 1)
    R = oplus(finite_ceer(Fb), id_ceer())
    Eb = random_blocks(rng, rng.randint(m, 7), m)
    E = finite_ceer(Eb)
    image = {}
    offsets = rng.sample(range(30), m)
    for i, b in enumerate(Eb):
        odd = rng.random() < 0.5
        for x in b:
            image[x] = 2 * offsets[i] + 1 if odd else 2 * rng.choice(Fb[i])
    u = sum(len(b) for b in Eb)
    odds = PredicateSet(lambda x: 0 if x % 2 else None, "odds")
    g = transversal_combine(witness(lambda x: image[x % u], E, R), odds, lambda v: v % 2 == 1,
                            audit=24)
    good = ok_verdict(g, 40)
    everything = PredicateSet(lambda x: 0, "all")
    try:
        transversal_combine(witness(lambda x: image[x % u], E, R), everything,
                            lambda v: True, audit=8)
        refuted = False
    except HypothesisRefuted:
        refuted = True
    return good, refuted


def lemma_plus_span(rng):
    m, n = rng.randint(1, 3), rng.randint(1, 3)
    Rb = random_blocks(rng, rng.randint(m + n, 8), m + n)
    Eb = random_blocks(rng, rng.randint(m, 6), m)
    E, R = finite_ceer(Eb), finite_ceer(Rb)
    f, used = random_reduction(rng, Eb, Rb)
    free = [i for i in range(len(Rb)) if i not in used]
    U = [rng.choice(Rb[i]) for i in free[:n]]
    g = plus_span(witness(f, E, R), U)
    good = ok_verdict(g, 30)
    bad_U = U[:-1] + [rng.choice(Rb[used[0]])]
    try:
        plus_span(witness(f, E, R), bad_U)
        refuted = False
    except HypothesisRefuted:
        refuted = True
    return good, refuted


def lemma_join_quotient(rng):
    Rb = random_blocks(rng, rng.randint(4, 9), 4)
    R = finite_ceer(Rb)
    out = []
    for _ in range(2):
        m = rng.randint(1, 4)
        Eb = random_blocks(rng, rng.randint(m, 6), m)
        f, used = random_reduction(rng, Eb, Rb)
        out.append((witness(f, finite_ceer(Eb), R), set(used)))
    (w1, u1), (w2, u2) = out
    jq = join_quotient(w1, w2, limit=24)
    # independent count: the quotient has one class per R class hit by either map
    good = ok_verdict(jq.witness, 24, 24) and len(jq.quotient.classes_at(24, 24)) == len(u1 | u2)
    try:
        join_quotient(w1, witness(w2.f, w2.source, finite_ceer(Rb)))
        refuted = False
    except ValueError:
        refuted = True
    return good, refuted


def split_ok(sp, bound=24, stage=0, onto=True):
    """Lower witnesses and ``into`` verify; ``back`` too when f hits every Id class."""
    return all(ok_verdict(lw, bound, stage) for lw in sp.lower) and ok_verdict(sp.into, bound, stage) \
        and (not onto or ok_verdict(sp.back, bound, stage))


def lemma_split_general(rng):
    m = rng.randint(2, 4)
    Rb = random_blocks(rng, rng.randint(m + 1, 8), m + 1)
    Eb = random_blocks(rng, rng.randint(m, 6), m)
    E, R = finite_ceer(Eb), finite_ceer(Rb)
    f, used = random_reduction(rng, Eb, Rb)
    inside = used[:rng.randint(1, m - 1)]
    outside = [i for i in range(len(Rb)) if i not in inside]
    W = finite_set([rng.choice(Rb[i]) for i in inside])
    U = [rng.choice(Rb[i]) for i in outside]
    sp = split_general(witness(f, E, R), W, U, audit=16)
    onto = set(outside) <= set(used)
    good = split_ok(sp, onto=onto) and sp.k == len(U)
    hit_outside = [i for i in used if i not in inside]
    short_U = [rng.choice(Rb[i]) for i in outside if i != hit_outside[0]]
    try:
        split_general(witness(f, E, R), W, short_U or [rng.choice(Rb[inside[0]])], audit=16)
        refuted = False
    except HypothesisRefuted:
        refuted = True
    return good, refuted


def lemma_split_peel(rng):
    m, n = rng.randint(2, 4), rng.randint(1, 3)
    Rb = random_blocks(rng, rng.randint(m, 7), m)
    Eb = random_blocks(rng, rng.randint(m, 7), m)
    target = oplus(finite_ceer(Rb), id_n(n))
    E = finite_ceer(Eb)
    image = {}
    rclasses = rng.sample(range(len(Rb)), m)
    odd_slots = rng.sample(range(n), min(n, rng.randint(0, m - 1)))
    for i, b in enumerate(Eb):
        for x in b:
            if i < len(odd_slots):
                image[x] = 2 * (odd_slots[i] + n * rng.randint(0, 3)) + 1
            else:
                image[x] = 2 * rng.choice(Rb[rclasses[i]])
    u = sum(len(b) for b in Eb)
    sp = split_peel(witness(lambda x: image[x % u], E, target), n, audit=16)
    good = split_ok(sp) and sp.k == len(odd_slots)
    try:
        split_peel(witness(lambda x: 2 * (x % n) + 1, id_n(n), target), n, audit=16)
        refuted = False
    except (HypothesisRefuted, ValueError):
        refuted = True
    return good, refuted


def lemma_split_common(rng):
    m, n = rng.randint(2, 4), rng.randint(1, 2)
    Xb = random_blocks(rng, rng.randint(m, 7), m)
    Yb = random_blocks(rng, rng.randint(m, 7), m)
    X, Y = oplus(finite_ceer(Xb), id_n(n)), oplus(finite_ceer(Yb), id_n(n))
    Eb = random_blocks(rng, rng.randint(m, 7), m)
    E = finite_ceer(Eb)
    u = sum(len(b) for b in Eb)
    maps = []
    for Zb in (Xb, Yb):
        image = {}
        cls = rng.sample(range(len(Zb)), m)
        odd = set(rng.sample(range(1, m), min(n, rng.randint(0, m - 1))))
        slot = {i: k for k, i in enumerate(sorted(odd))}
        for i, b in enumerate(Eb):
            for x in b:
                image[x] = 2 * slot[i] + 1 if i in odd else 2 * rng.choice(Zb[cls[i]])
        maps.append(image)
    wf = witness(lambda x: maps[0][x % u], E, X)
    wg = witness(lambda x: maps[1][x % u], E, Y)
    sp = split_common(wf, wg, n, audit=16)
    good = split_ok(sp) and sp.k <= 2 * n
    try:
        split_common(witness(lambda x: 2 * (x % n) + 1, id_n(n), X), wg, n, audit=16)
        refuted = False
    except (HypothesisRefuted, ValueError):
        refuted = True
    return good, refuted


def lemma_split_id_part(rng):
    m = rng.randint(1, 3)
    Fb = random_blocks(rng, rng.randint(m, 6), m)
    Rb = random_blocks(rng, rng.randint(m, 7), m)
    source = oplus(finite_ceer(Fb), id_ceer())
    target = oplus(finite_ceer(Rb), id_ceer())
    cls = rng.sample(range(len(Rb)), m)
    fimage = {x: 2 * rng.choice(Rb[cls[i]]) for i, b in enumerate(Fb) for x in b}
    u = sum(len(b) for b in Fb)
    shift = rng.randint(0, 5)

    def f(x):
        if x % 2 == 0:
            return fimage[(x >> 1) % u]
        return 2 * ((x >> 1) + shift) + 1

    sp = split_id_part(witness(f, source, target), threshold=8, audit=24)
    good = sp.k is None and split_ok(sp, bound=20)
    try:
        split_id_part(witness(lambda x: 2 * fimage[0] + 0 if x % 2 == 0 else 1, source, target),
                      threshold=8, audit=24)
        refuted = False
    except HypothesisRefuted:
        refuted = True
    return good, refuted


LEMMAS = {
    "invert_onto": lemma_invert,
    "transversal_combine": lemma_transversal,
    "plus_span": lemma_plus_span,
    "join_quotient": lemma_join_quotient,
    "split_general": lemma_split_general,
    "split_peel": lemma_split_peel,
    "split_common": lemma_split_common,
    "split_id_part": lemma_split_id_part,
}


def test_criterion_3_combinator_soundness(report):
    summary = {}
    for name, fn in LEMMAS.items():
        rng = random.Random(name)
        good = refuted = 0
        for _ in range(100):
            g, r = fn(rng)
            good += g
            refuted += r
        summary[name] = (good, refuted)
    ok = all(v == (100, 100) for v in summary.values())
    report(3, "combinator witnesses verify and planted violations are refuted", ok,
           ", ".join(f"{k} {g}/{r}" for k, (g, r) in summary.items()))


# ---------------------------------------------------------------- 4

def test_criterion_4_minimal_dark(report):
    reg = Registry()
    specs = ["const 7", "const 0", "affine 1 1", "affine 3 0", "mod 2 0", "mod 3 1", "delay 5",
             "delay 50", "cofinite 3", "set 0 1 2", "column 0", "column 1", "table 0:5 1:5@3 2:9"]
    for i, sp in enumerate(specs):
        reg.register_spec(f"x{i}", sp)
    mirror = ParameterMirror(3)
    reg.register(mirror.program)
    opponents = ["identity", "loop", "zero", "one", "evens", "double"] + \
        [f"x{i}" for i in range(len(specs))] + ["mirror"]
    stages = 50_000
    res = minimal_dark(id_ceer(), 3, opponents, stages, registry=reg, mirrors=[mirror])
    rep = res.audit()
    q_bad = [q.name for q in res.of_kind("Q") if q.outcome == "collapsed" and q.verify(res.ctx) != ""]
    t_bad = [t.name for t in res.of_kind("T")
             if t.state.k is not None and t.actions > t.state.k]
    ok = len(opponents) == 20 and not rep.violations and not q_bad and not t_bad
    report(4, "minimal dark run: no violations, Q mismatches verified, T actions bounded", ok,
           f"{len(res.trace)} events, {len(rep.violations)} violations, bad Q {q_bad[:3]}, "
           f"bad T {t_bad[:3]}")


# ---------------------------------------------------------------- 5

def test_criterion_5_coding_fidelity(report):
    reg = Registry()
    reg.register_fn("par", lambda x: x % 2)
    ops = ["identity", "evens", "one", "par", "loop"]
    covers = self_full_covers(indexed_ceer("evens"), 3, ops, 4096, registry=reg)
    fin = self_full_finite_classes(id_n(3), 3, ops, 4096, registry=reg)
    fid = [all(r.extras["coding"].fidelity(r.ctx).values()) for r in (covers, fin)]
    frozen = frozen_class_report(fin.trace)
    exact = bool(frozen) and all(fz["exact"] for fz in frozen)
    clean = covers.audit().ok and fin.audit().ok
    report(5, "column zero copies A exactly; frozen classes grow only from higher priority",
           all(fid) and exact and clean, f"fidelity {fid}, {len(frozen)} freezes, audits {clean}")


# ---------------------------------------------------------------- 6

def test_criterion_6_planted_join(report):
    reg = Registry()
    reg.register_fn("diagpairs", lambda c: 0 if unpair(c)[0] == unpair(c)[1] else None)
    reg.register_spec("c5", "const 5")
    reg.register_spec("m4", "mod 4 2")
    ops = ["identity", "loop", "zero", "one", "evens", "double", "diagpairs", "c5", "m4"]
    res = dark_join_pair(ops, stages=4096, registry=reg)
    pj = planted_join_check(res)
    ok = res.audit().ok and pj.stable and isinstance(pj.verdict, ConsistentUpTo)
    report(6, "planted upper bound: W settles before the last 20% and the witness verifies", ok,
           f"W sizes {pj.sizes}, verdict {pj.verdict}")


# ---------------------------------------------------------------- 7

def test_criterion_7_exact_pair(report):
    reg = Registry()
    reg.register_fn("par", lambda x: x % 2)
    reg.register_spec("c5", "const 5")
    # a late-converging first opponent makes P[0,0] injure coders that already own columns
    reg.register_spec("d50", "delay 50")
    ops = ["d50", "identity", "zero", "double", "par", "c5", "loop"]
    family = [id_n(1), id_n(2), indexed_ceer("evens")]
    res = exact_pair(family, 3, ops, stages=4096, registry=reg)
    rep = exact_pair_report(res)
    ok = rep.ok and res.audit().ok and len(rep.fidelity) == 3 and len(rep.retired) > 0
    report(7, "exact pair columns copy each member; retired columns stay bounded", ok,
           f"fidelity {rep.fidelity}, retired (classes, bound) {rep.retired}, "
           f"restrained {rep.restrained_retired}")


# ---------------------------------------------------------------- 8

def interval_classes(in_w, lo, hi):
    """u ~ v iff u = v or every z between them is in W; grouped by scanning."""
    groups, current = [], []
    for z in range(lo, hi):
        if current and in_w(z) and in_w(current[-1]):
            current.append(z)
        else:
            if current:
                groups.append(current)
            current = [z]
    groups.append(current)
    return sorted(tuple(g) for g in groups)


def test_criterion_8_cof_gadget(report):
    expected = [(0, 1, 2), (3,), (4, 5, 6, 7)]
    truth = interval_classes(lambda z: z != 3, 0, 8)
    built = sorted(tuple(sorted(b)) for b in
                   cof_gadget(decidable_set(lambda x: x != 3)).classes_at(1000, 8))
    report(8, "cof gadget limit classes on [0, 8)", truth == expected and built == truth,
           f"evaluator {truth}, gadget {built}")


# ---------------------------------------------------------------- 9

def test_criterion_9_selffull_gadget(report):
    ops = ["identity", "loop", "zero", "one", "evens", "double"]
    stages = 2048
    inf = selffull_gadget(decidable_set(lambda c: unpair(c)[0] == 0), ops, stages=stages)
    nsf0 = next(r for r in inf.requirements if r.name == "NSF[0]")
    inf_ok = bool(nsf0.f) and nsf0.verify(inf.ctx) == ""
    W = decidable_set(lambda c: unpair(c)[1] <= unpair(c)[0])
    fin = selffull_gadget(W, ops, stages=stages)
    total = sum(nsf_actions(fin).values())
    observed = sum(len(column(W, k).enumerated(stages)) for k in range(4))
    ok = inf_ok and total <= observed and inf.audit().ok and fin.audit().ok
    report(9, "self-embedding verifies and misses [a]; NSF actions bounded by column sizes", ok,
           f"|f| = {len(nsf0.f)}, NSF actions {total} <= {observed}")


# ---------------------------------------------------------------- 10

MANIFESTS = {
    "minimal_dark": "construction minimal_dark\nceer R id_n 1\nopponent identity loop zero\n"
                    "extern c5 const 5\nmirror m3 3\nstages 1500\n",
    "join": "construction dark_join_pair\nopponent identity evens zero one\nstages 800\n",
    "exact": "construction exact_pair\nmember id_n 1\nmember id_n 2\nopponent identity zero\n"
             "stages 800\n",
    "gadget": "construction selffull_gadget\nwset identity\nopponent identity one\nstages 400\n",
    "covers": "construction self_full_covers\nceer A id_n 2\nopponent identity evens\nset count 2\n"
              "stages 600\n",
}


def test_criterion_10_determinism(report, tmp_path, capsys):
    differing = []
    for name, text in MANIFESTS.items():
        path = tmp_path / f"{name}.txt"
        path.write_text(text)
        outs = []
        for rep in ("a", "b"):
            out = tmp_path / f"{name}_{rep}"
            assert main(["run", str(path), "--out", str(out)]) == 0
            outs.append({p: (out / p).read_bytes() for p in sorted(os.listdir(out))})
        if outs[0] != outs[1] or not outs[0]:
            differing.append(name)
    capsys.readouterr()
    report(10, "reruns reproduce byte-identical snapshots and traces", not differing,
           f"{len(MANIFESTS)} manifests, differing {differing}")

"""Reduction verification, inversion, the combinators that build
reductions, and a brute-force oracle for ceers with finitely many classes."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Hashable, Iterable, Sequence, Union

from .algebra import PairSet, RestrictedCeer, oplus, quotient, MappedPairs, restrict
from .ceer import Ceer, Decider, ReductionWitness, id_ceer, id_n
from .machine import CeSet, Converged, PredicateSet, Registry, DEFAULT_REGISTRY, pair

DEFAULT_BOUND = 128
DEFAULT_STAGE = 4096
DEFAULT_STEPS = 10**5


class HypothesisRefuted(Exception):
    """A combinator's hypothesis fails on the audited range."""


# ---------------------------------------------------------------- verdicts

@dataclass(frozen=True)
class ConsistentUpTo:
    bound: int
    stage: int


@dataclass(frozen=True)
class Disagreement:
    """x E y holds on one side only ("source-only" or "target-only").

    Evidence at the recorded stage; ``final`` when both ceers are decided.
    """

    stage: int
    x: int
    y: int
    direction: str
    final: bool = False


@dataclass(frozen=True)
class NonTotalWithin:
    budget: int
    x: int


ReductionVerdict = Union[ConsistentUpTo, Disagreement, NonTotalWithin]


def verify_reduction(w: ReductionWitness, bound: int = DEFAULT_BOUND, stage: int = DEFAULT_STAGE,
                     step_budget: int = DEFAULT_STEPS) -> ReductionVerdict:
    """Check x E y <=> f(x) R f(y) for all x, y < bound at the given stage."""
    values = []
    for x in range(bound):
        out = w.f.evaluate(x, step_budget)
        if not isinstance(out, Converged):
            return NonTotalWithin(step_budget, x)
        values.append(out.value)
    E, R = w.source, w.target
    ke = [E.key(stage, x) for x in range(bound)]
    kr = [R.key(stage, v) for v in values]
    image: dict[Hashable, Hashable] = {}
    back: dict[Hashable, Hashable] = {}
    clean = True
    for a, b in zip(ke, kr):
        if image.setdefault(a, b) != b or back.setdefault(b, a) != a:
            clean = False
            break
    if clean:
        return ConsistentUpTo(bound, stage)
    final = E.decided and R.decided
    for x in range(bound):
        for y in range(x + 1, bound):
            e = ke[x] == ke[y]
            r = kr[x] == kr[y]
            if e != r:
                return Disagreement(stage, x, y, "source-only" if e else "target-only", final)
    raise AssertionError("unreachable")


def is_consistent(v: ReductionVerdict) -> bool:
    return isinstance(v, ConsistentUpTo)


# ---------------------------------------------------------------- search helpers

def dovetail_first(pred: Callable[[int, int], bool], budget: int) -> int | None:
    """Least a in Cantor order of (a, stage) with pred(a, stage), among the
    first ``budget`` pairs.

    pred must be monotone in the stage (true at t stays true after t), which
    holds for every convergence-and-equivalence search here. That lets each
    a be settled by a check at its last admissible stage plus a binary
    search, with the same answer as scanning pairs one by one.
    """
    best: int | None = None
    best_a: int | None = None
    limit = budget
    a = 0
    while pair(a, 0) < limit:
        # largest t with pair(a, t) < limit
        lo, hi = 0, limit
        while lo < hi:
            mid = (lo + hi + 1) // 2
            if pair(a, mid) < limit:
                lo = mid
            else:
                hi = mid - 1
        last = lo
        if pred(a, last):
            lo, hi = 0, last
            while lo < hi:
                mid = (lo + hi) // 2
                if pred(a, mid):
                    hi = mid
                else:
                    lo = mid + 1
            code = pair(a, lo)
            if best is None or code < best:
                best, best_a = code, a
                limit = code
        a += 1
    return best_a


class Listing:
    """Elements of a c.e. set in order of appearance, checked for repeats of class."""

    def __init__(self, U: "CeSet | Sequence[int]", cap: int = DEFAULT_STAGE):
        self.U = U
        self.cap = cap
        if isinstance(U, CeSet):
            self.items: list[int] = []
            self._stage = -1
            self.finite = False
        else:
            self.items = list(U)
            self.finite = True

    def nth(self, i: int) -> int | None:
        if self.finite:
            return self.items[i] if i < len(self.items) else None
        while len(self.items) <= i and self._stage < self.cap:
            self._stage += 1
            self.items.extend(self.U.new_at(self._stage))  # type: ignore[union-attr]
        return self.items[i] if i < len(self.items) else None

    def prefix(self, n: int) -> list[int]:
        if n > 0:
            self.nth(n - 1)
        return self.items[:n]

    def check_transversal(self, R: Ceer, n: int, stage: int) -> None:
        seen: dict[Hashable, int] = {}
        for y in self.prefix(n):
            k = R.key(stage, y)
            if k in seen:
                raise HypothesisRefuted(
                    f"transversal lists {seen[k]} and {y}, which are equivalent at stage {stage}")
            seen[k] = y


# ---------------------------------------------------------------- brute force

def representatives(E: Ceer, limit: int = 10**4) -> list[int]:
    """Least element of each class of a decided ceer, in increasing order."""
    if not E.decided:
        raise ValueError(f"{E.label} is not a decided ceer with finitely many classes")
    reps: list[int] = []
    keys: set[Hashable] = set()
    for x in range(limit):
        k = E.key(0, x)
        if k not in keys:
            keys.add(k)
            reps.append(x)
            if len(reps) == E.finite_classes:
                return reps
    raise ValueError("class representatives not found within the search limit")


def _domain(E: Ceer, reps: list[int]) -> int:
    return max(getattr(E, "universe", 0), reps[-1] + 1)


def brute_force_reduction(E: Ceer, R: Ceer) -> dict[int, int] | None:
    """A table on E's universe inducing an injective map on classes, or None.

    Searches maps from E-class representatives to R-class representatives
    in lexicographic order, pruning non-injective partial maps.
    """
    re_, rr = representatives(E), representatives(R)
    n, m = len(re_), len(rr)
    assign: list[int] = []
    used = [False] * m

    def search() -> bool:
        if len(assign) == n:
            return True
        for j in range(m):
            if not used[j]:
                used[j] = True
                assign.append(j)
                if search():
                    return True
                assign.pop()
                used[j] = False
        return False

    if not search():
        return None
    cls = {E.key(0, r): i for i, r in enumerate(re_)}
    return {x: rr[assign[cls[E.key(0, x)]]] for x in range(_domain(E, re_))}


def table_witness(table: dict[int, int], E: Ceer, R: Ceer) -> ReductionWitness:
    """Extend a table on a prefix to all numbers through E's classes."""
    by_key = {}
    for x in sorted(table):
        by_key.setdefault(E.key(0, x), table[x])

    def f(x: int) -> int | None:
        if x in table:
            return table[x]
        return by_key.get(E.key(0, x))

    return ReductionWitness(_prog("table", f), E, R, "table")


def _prog(name: str, fn: Callable[[int], object]):
    from .ceer import fn_program
    return fn_program(name, fn)


# ---------------------------------------------------------------- Lemma: onto reductions flip

def invert_onto(w: ReductionWitness, budget: int = DEFAULT_STEPS, bound: int | None = None,
                step_budget: int = DEFAULT_STEPS) -> ReductionWitness:
    """g(y) = the first x seen with f(x) R y, dovetailing (x, stage) in Cantor order.

    With ``bound`` given, g is evaluated eagerly on [0, bound) and search
    exhaustion raises HypothesisRefuted.
    """
    R = w.target
    cache: dict[int, int | None] = {}

    def g(y: int) -> int | None:
        if y not in cache:
            def hit(x: int, t: int) -> bool:
                out = w.f.evaluate(x, t)
                return isinstance(out, Converged) and R.eq_at(t, out.value, y)
            cache[y] = dovetail_first(hit, budget)
        return cache[y]

    inv = ReductionWitness(_prog("invert", g), w.target, w.source, "invert_onto")
    if bound is not None:
        for y in range(bound):
            if g(y) is None:
                raise HypothesisRefuted(f"no x with f(x) R {y} within {budget} search steps")
    return inv


# ---------------------------------------------------------------- Lemma: effective transversals

def transversal_combine(w: ReductionWitness, U: CeSet, in_closure: Decider,
                        stage: int = DEFAULT_STAGE, search: int = DEFAULT_STEPS,
                        audit: int = DEFAULT_BOUND, step_budget: int = DEFAULT_STEPS
                        ) -> ReductionWitness:
    """E (+) Id <= R from f: E <= R and an infinite transversal U of R with
    f(x) in [U]_R decidable (``in_closure``).

    U is listed as y_0, y_1, ...; V = {y_2i}, W = {y_2i+1}; h(y_i) = y_2i and
    k(x) = y_2x+1. Then 2x -> f(x) off [U]_R, 2x -> h(y_i) when f(x) R y_i,
    and 2x+1 -> k(x).
    """
    E, R = w.source, w.target
    lst = Listing(U, cap=max(stage, 4 * audit + 8))
    lst.check_transversal(R, 2 * audit + 2, stage)
    if lst.nth(2 * audit + 1) is None:
        raise HypothesisRefuted(f"{U.label} lists fewer than {2 * audit + 2} elements")

    def g(x: int) -> int | None:
        if x % 2 == 1:
            return lst.nth(2 * (x >> 1) + 1)
        v = w.f(x >> 1, step_budget)
        if v is None:
            return None
        if not in_closure(v):
            return v

        def hit(i: int, t: int) -> bool:
            y = lst.nth(i)
            return y is not None and R.eq_at(t, v, y)
        i = dovetail_first(hit, search)
        return None if i is None else lst.nth(2 * i)

    return ReductionWitness(_prog("transversal", g), oplus(E, id_ceer()), R, "transversal_combine")


def plus_span(w: ReductionWitness, U: "Sequence[int] | CeSet", stage: int = DEFAULT_STAGE,
              audit: int = DEFAULT_BOUND, step_budget: int = DEFAULT_STEPS) -> ReductionWitness:
    """E (+) Id_n <= R from f and a transversal U = (y_i) with [U]_R disjoint from im f.

    2x -> f(x), 2x+1 -> y_i with x = i mod n (n = |U|, possibly infinite).
    """
    E, R = w.source, w.target
    lst = Listing(U, cap=max(stage, 2 * audit + 8))
    n = len(lst.items) if lst.finite else None
    if n == 0:
        raise ValueError("U must be nonempty")
    span = lst.prefix(n if n is not None else audit)
    lst.check_transversal(R, len(span), stage)
    ukeys = {R.key(stage, y): y for y in span}
    for x in range(audit):
        v = w.f(x, step_budget)
        if v is not None and R.key(stage, v) in ukeys:
            raise HypothesisRefuted(f"f({x}) = {v} is equivalent to {ukeys[R.key(stage, v)]} in U")

    def g(x: int) -> int | None:
        if x % 2 == 0:
            return w.f(x >> 1, step_budget)
        i = x >> 1
        return lst.nth(i % n if n is not None else i)

    target_id = id_n(n) if n is not None else id_ceer()
    return ReductionWitness(_prog("plus_span", g), oplus(E, target_id), R, "plus_span")


# ---------------------------------------------------------------- Lemma: join quotients

class JoinPairs(PairSet):
    """W = {(x, y) : f1(x) R f2(y)} restricted at stage s to x, y <= s."""

    def __init__(self, w1: ReductionWitness, w2: ReductionWitness, limit: int | None = None):
        self.w1, self.w2 = w1, w2
        self.R = w1.target
        self.limit = limit
        self.label = "W"

    def _groups(self, s: int) -> dict[Hashable, tuple[list[int], list[int]]]:
        top = s if self.limit is None else min(s, self.limit)
        groups: dict[Hashable, tuple[list[int], list[int]]] = {}
        for side, wt in ((0, self.w1), (1, self.w2)):
            for x in range(top + 1):
                out = wt.f.evaluate(x, s)
                if isinstance(out, Converged):
                    groups.setdefault(self.R.key(s, out.value), ([], []))[side].append(x)
        return groups

    def enumerated(self, s: int) -> set[tuple[int, int]]:
        return {(a, b) for xs, ys in self._groups(s).values() for a in xs for b in ys}

    def spanning(self, s: int) -> Iterable[tuple[int, int]]:
        out = []
        for xs, ys in self._groups(s).values():
            if xs and ys:
                out += [(xs[0], b) for b in ys] + [(a, ys[0]) for a in xs[1:]]
        return out

    def size(self, s: int) -> int:
        return sum(len(xs) * len(ys) for xs, ys in self._groups(s).values())


@dataclass
class JoinQuotient:
    W: JoinPairs
    quotient: Ceer
    witness: ReductionWitness


def join_quotient(w1: ReductionWitness, w2: ReductionWitness, limit: int | None = None,
                  step_budget: int = DEFAULT_STEPS) -> JoinQuotient:
    """(E1 (+) E2)/W <= R via h(2x) = f1(x), h(2x+1) = f2(x)."""
    if w1.target is not w2.target:
        raise ValueError("both reductions must share a target")
    W = JoinPairs(w1, w2, limit)
    Q = quotient(oplus(w1.source, w2.source),
                 MappedPairs(W, lambda p: (2 * p[0], 2 * p[1] + 1), "W'"))

    def h(x: int) -> int | None:
        return (w1 if x % 2 == 0 else w2).f(x >> 1, step_budget)

    return JoinQuotient(W, Q, ReductionWitness(_prog("join", h), Q, w1.target, "join_quotient"))


# ---------------------------------------------------------------- Lemma: restrictions

@dataclass
class Split:
    """E0 with E0 <= target(s) and E <= E0 (+) Id_k (and back when onto)."""

    E0: Ceer
    k: int | None                         # None stands for Id (infinitely many)
    lower: list[ReductionWitness]         # E0 <= R (or X, Y)
    into: ReductionWitness                # E <= E0 (+) Id_k  (E <= E0 when k == 0)
    back: ReductionWitness | None = None  # E0 (+) Id_k <= E by flipping ``into``


def closure_entry(R: Ceer, W: CeSet, horizon: int) -> Callable[[int], int | None]:
    """y -> least stage t <= horizon with y in [W_t]_{R_t}, or None."""
    if R.static:
        first: dict[Hashable, int] = {}
        for t in range(horizon + 1):
            for m in W.new_at(t):
                first.setdefault(R.key(t, m), t)
        return lambda y: first.get(R.key(0, y))
    keysets: dict[int, set[Hashable]] = {}

    def keys(t: int) -> set[Hashable]:
        if t not in keysets:
            keysets[t] = {R.key(t, m) for m in W.listing(t)}
        return keysets[t]

    def entry(y: int) -> int | None:
        for t in range(horizon + 1):
            if R.key(t, y) in keys(t):
                return t
        return None

    return entry


def preimage_set(w: ReductionWitness, closure: Callable[[int], int | None], label: str,
                 step_budget: int = DEFAULT_STEPS) -> CeSet:
    """{x : f(x) converges into the closure}, entering once both have happened."""

    def entry(x: int) -> int | None:
        out = w.f.evaluate(x, step_budget)
        if not isinstance(out, Converged):
            return None
        t = closure(out.value)
        return None if t is None else max(t, out.steps)

    return PredicateSet(entry, label)


def _finish(E: Ceer, E0: RestrictedCeer, k: int | None, lower: list[ReductionWitness],
            g: Callable[[int], int | None], flip_budget: int) -> Split:
    part = E0 if k == 0 else oplus(E0, id_ceer() if k is None else id_n(k))
    into = ReductionWitness(_prog("split", g), E, part, "restriction_split")
    back = invert_onto(into, flip_budget)
    return Split(E0, k, lower, into, back)


def split_general(w: ReductionWitness, W: CeSet, U: "Sequence[int] | CeSet",
                  stage: int = DEFAULT_STAGE, horizon: int = 1024, search: int = DEFAULT_STEPS,
                  audit: int = DEFAULT_BOUND, step_budget: int = DEFAULT_STEPS) -> Split:
    """E0 = E restricted to V = f^-1[[W]_R]; E0 <= R via f.h and E <= E0 (+) Id_n
    with n the number of classes of [U]_R."""
    E, R = w.source, w.target
    lst = Listing(U, cap=max(stage, horizon))
    n = len(lst.items) if lst.finite else None
    span = lst.prefix(n if n is not None else audit)
    lst.check_transversal(R, len(span), stage)
    in_w = closure_entry(R, W, horizon)
    for y in span:
        if in_w(y) is not None:
            raise HypothesisRefuted(f"U element {y} lies in [W]_R")
    ukeys = {R.key(stage, y) for y in span}
    for x in range(audit):
        v = w.f(x, step_budget)
        if v is not None and in_w(v) is None and R.key(stage, v) not in ukeys:
            raise HypothesisRefuted(f"f({x}) = {v} is outside [W]_R and [U]_R")

    V = preimage_set(w, closure_entry(R, W, horizon), f"f^-1[{W.label}]", step_budget)
    E0 = restrict(E, V, horizon)
    ws = W.listing(min(stage, horizon))

    def lower_fn(x: int) -> int | None:
        return w.f(E0.h(x), step_budget)

    def g(x: int) -> int | None:
        v = w.f(x, step_budget)
        if v is None:
            return None
        def hit(j: int, t: int) -> bool:
            if j % 2 == 0:
                m = ws[j >> 1] if (j >> 1) < len(ws) else None
            else:
                m = lst.nth(j >> 1)
            return m is not None and R.eq_at(t, v, m)
        j = dovetail_first(hit, search)
        if j is None:
            return None
        if j % 2 == 1:
            i = j >> 1
            return 2 * (i % n if n is not None else i) + 1 if n != 0 else None
        u = E0.h_inverse(x)
        if u is None:
            return None
        return u if n == 0 else 2 * u

    lower = [ReductionWitness(_prog("lower", lower_fn), E0, R, "f.h")]
    return _finish(E, E0, n, lower, g, search)


def split_peel(w: ReductionWitness, n: int, stage: int = DEFAULT_STAGE, horizon: int = 1024,
               search: int = DEFAULT_STEPS, audit: int = DEFAULT_BOUND,
               step_budget: int = DEFAULT_STEPS) -> Split:
    """From f: E <= R (+) Id_n, E0 <= R with E == E0 (+) Id_k, k <= n the
    number of Id_n classes hit by f (counted on the audited range)."""
    E, RI = w.source, w.target
    R = RI.parts[0] if hasattr(RI, "parts") else None  # type: ignore[attr-defined]
    V = preimage_set(w, lambda y: 0 if y % 2 == 0 else None, "f^-1[evens]", step_budget)
    E0 = restrict(E, V, horizon)
    hit = sorted({((v - 1) >> 1) % n for v in (w.f(x, step_budget) for x in range(audit))
                  if v is not None and v % 2 == 1})
    rank = {i: r for r, i in enumerate(hit)}
    k = len(hit)

    def lower_fn(x: int) -> int | None:
        v = w.f(E0.h(x), step_budget)
        return None if v is None else v >> 1

    def g(x: int) -> int | None:
        v = w.f(x, step_budget)
        if v is None:
            return None
        if v % 2 == 1:
            r = rank.get(((v - 1) >> 1) % n)
            return None if r is None else 2 * r + 1
        u = E0.h_inverse(x)
        if u is None:
            return None
        return u if k == 0 else 2 * u

    lower = [ReductionWitness(_prog("lower", lower_fn), E0, R if R is not None else RI, "f.h/2")]
    return _finish(E, E0, k, lower, g, search)


def split_common(wf: ReductionWitness, wg: ReductionWitness, n: int, horizon: int = 1024,
                 search: int = DEFAULT_STEPS, audit: int = DEFAULT_BOUND,
                 step_budget: int = DEFAULT_STEPS) -> Split:
    """From E <= X (+) Id_n and E <= Y (+) Id_n: E0 <= X, Y and E == E0 (+) Id_k, k <= 2n."""
    E = wf.source
    X = wf.target.parts[0]  # type: ignore[attr-defined]
    Y = wg.target.parts[0]  # type: ignore[attr-defined]

    def entry(x: int) -> int | None:
        a, b = wf.f.evaluate(x, step_budget), wg.f.evaluate(x, step_budget)
        if isinstance(a, Converged) and isinstance(b, Converged):
            if a.value % 2 == 0 and b.value % 2 == 0:
                return max(a.steps, b.steps)
        return None

    V = PredicateSet(entry, "V")
    E0 = restrict(E, V, horizon)

    def odd_slot(x: int) -> int | None:
        a = wf.f(x, step_budget)
        if a is None:
            return None
        if a % 2 == 1:
            return ((a - 1) >> 1) % n
        b = wg.f(x, step_budget)
        if b is None:
            return None
        if b % 2 == 1:
            return n + ((b - 1) >> 1) % n
        return -1

    slots = sorted({s for s in (odd_slot(x) for x in range(audit)) if s is not None and s >= 0})
    rank = {s: r for r, s in enumerate(slots)}
    k = len(slots)

    def g(x: int) -> int | None:
        slot = odd_slot(x)
        if slot is None:
            return None
        if slot >= 0:
            r = rank.get(slot)
            return None if r is None else 2 * r + 1
        u = E0.h_inverse(x)
        if u is None:
            return None
        return u if k == 0 else 2 * u

    def half(wt: ReductionWitness) -> Callable[[int], int | None]:
        def fn(x: int) -> int | None:
            v = wt.f(E0.h(x), step_budget)
            return None if v is None else v >> 1
        return fn

    lower = [ReductionWitness(_prog("lowerX", half(wf)), E0, X, "to X"),
             ReductionWitness(_prog("lowerY", half(wg)), E0, Y, "to Y")]
    return _finish(E, E0, k, lower, g, search)


def split_id_part(w: ReductionWitness, threshold: int = 16, stage: int = DEFAULT_STAGE,
                  horizon: int = 1024, search: int = DEFAULT_STEPS, audit: int = DEFAULT_BOUND,
                  step_budget: int = DEFAULT_STEPS) -> Split:
    """From f: E <= R (+) Id hitting infinitely many Id classes: E == E0 (+) Id.

    Odd images are renumbered by a bijection from Y = {y : 2y+1 in im f}
    onto omega (order of discovery), then the general split applies with
    W = evens and U = odds.
    """
    E, RI = w.source, w.target
    order: dict[int, int] = {}
    scanned = [0]

    def discover(upto: int) -> None:
        while scanned[0] <= upto:
            v = w.f(scanned[0], step_budget)
            if v is not None and v % 2 == 1 and (v >> 1) not in order:
                order[v >> 1] = len(order)
            scanned[0] += 1

    discover(audit - 1)
    if len(order) < threshold:
        raise HypothesisRefuted(
            f"f hits only {len(order)} Id classes on [0, {audit}), below the threshold {threshold}")

    def h(x: int) -> int | None:
        v = w.f(x, step_budget)
        if v is None or v % 2 == 0:
            return v
        discover(x)
        return 2 * order[v >> 1] + 1

    hw = ReductionWitness(_prog("renumber", h), E, RI, "renumbered")
    odds = PredicateSet(lambda x: 0 if x % 2 == 1 else None, "odds")
    evens = PredicateSet(lambda x: 0 if x % 2 == 0 else None, "evens")
    out = split_general(hw, evens, odds, stage, horizon, search, audit, step_budget)
    R = RI.parts[0] if hasattr(RI, "parts") else RI  # type: ignore[attr-defined]
    E0 = out.E0
    half = ReductionWitness(_prog("lower", lambda x: (lambda v: None if v is None else v >> 1)(
        hw.f(E0.h(x), step_budget))), E0, R, "f.h/2")  # type: ignore[attr-defined]
    out.lower = [half]
    return out


# ---------------------------------------------------------------- R_U bridge

def one_reduction_from(w: ReductionWitness, V: CeSet, cap: int = DEFAULT_STAGE,
                       step_budget: int = DEFAULT_STEPS) -> Callable[[int], int | None]:
    """From f: R_U <= R_V with V infinite, an injective g with x in U iff g(x) in V."""
    lst = Listing(V, cap)
    values: list[int] = []
    used: set[int] = set()

    def g(x: int) -> int | None:
        while len(values) <= x:
            i = len(values)
            v = w.f(i, step_budget)
            if v is None:
                return None
            if v in used:
                j = 0
                while True:
                    y = lst.nth(j)
                    if y is None:
                        return None
                    if y not in used:
                        v = y
                        break
                    j += 1
            values.append(v)
            used.add(v)
        return values[x]

    return g


def ru_from_below(w: ReductionWitness, U: CeSet, horizon: int = DEFAULT_STAGE,
                  step_budget: int = DEFAULT_STEPS):
    """From f: R <= R_U, the set V = h^-1[U] with h the injective enumeration of
    im f, and witnesses R <= R_V and R_V <= R."""
    from .ceer import r_u
    seen: dict[int, int] = {}
    vals: list[int] = []
    firsts: list[int] = []
    scanned = [0]

    def grow(limit: int) -> None:
        while scanned[0] <= limit:
            v = w.f(scanned[0], step_budget)
            if v is not None and v not in seen:
                seen[v] = len(vals)
                vals.append(v)
                firsts.append(scanned[0])
            scanned[0] += 1

    def hval(n: int) -> int | None:
        x = 0
        while len(vals) <= n and x < horizon:
            grow(scanned[0] + 64)
            x += 64
        return vals[n] if n < len(vals) else None

    def entry(n: int) -> int | None:
        v = hval(n)
        return None if v is None else U.entry(v)

    V = PredicateSet(entry, f"h^-1[{U.label}]")
    RV = r_u(V)

    def down(x: int) -> int | None:
        v = w.f(x, step_budget)
        if v is None:
            return None
        grow(x)
        return seen[v]

    def up(n: int) -> int | None:
        return firsts[n] if hval(n) is not None else None

    R = w.source
    return V, ReductionWitness(_prog("toRV", down), R, RV, "R<=R_V"), \
        ReductionWitness(_prog("fromRV", up), RV, R, "R_V<=R")


# ---------------------------------------------------------------- witness files

def witness_text(w: ReductionWitness, bound: int = DEFAULT_BOUND,
                 step_budget: int = DEFAULT_STEPS, program: str | None = None) -> str:
    """``witness <src> <tgt>`` then a ``program`` line or ``table x y`` lines."""
    from .ceer import _clean
    lines = [f"witness {_clean(w.source.label)} {_clean(w.target.label)}"]
    if program is not None:
        lines.append(f"program {program}")
    else:
        for x in range(bound):
            v = w.f(x, step_budget)
            if v is not None:
                lines.append(f"table {x} {v}")
    return "\n".join(lines) + "\n"


def parse_witness(text: str, source: Ceer, target: Ceer,
                  registry: Registry | None = None) -> ReductionWitness:
    lines = [ln.split() for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0][0] != "witness" or len(lines[0]) != 3:
        raise ValueError("witness file must start with 'witness <source> <target>'")
    body = lines[1:]
    if body and body[0][0] == "program":
        prog = (registry or DEFAULT_REGISTRY).resolve(body[0][1])
        return ReductionWitness(prog, source, target, f"program {body[0][1]}")
    table = {}
    for parts in body:
        if parts[0] != "table" or len(parts) != 3:
            raise ValueError(f"bad witness line {' '.join(parts)!r}")
        table[int(parts[1])] = int(parts[2])
    return ReductionWitness(_prog("table", table.get), source, target, "table")

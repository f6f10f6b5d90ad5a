"""Uniform joins, quotients, restrictions, the jump, collapses and Z-chains."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Hashable, Iterable, Sequence

from .ceer import Ceer, Decider, KeyCeer, ReductionWitness, id_n, witness
from .machine import CeSet, Converged, Registry, DEFAULT_REGISTRY, unpair


class KeyUnionFind:
    """Union-find over arbitrary hashable keys; the first argument's root wins ties."""

    def __init__(self):
        self.parent: dict[Hashable, Hashable] = {}
        self.size: dict[Hashable, int] = {}

    def find(self, k: Hashable) -> Hashable:
        parent = self.parent
        if k not in parent:
            return k
        while parent[k] != k:
            parent[k] = parent[parent[k]]
            k = parent[k]
        return k

    def union(self, a: Hashable, b: Hashable) -> None:
        for k in (a, b):
            if k not in self.parent:
                self.parent[k] = k
                self.size[k] = 1
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]


# ---------------------------------------------------------------- pair sets

class PairSet:
    """A monotone enumeration of pairs of naturals."""

    label = "pairs"
    static = False

    def enumerated(self, s: int) -> set[tuple[int, int]]:
        raise NotImplementedError

    def spanning(self, s: int) -> Iterable[tuple[int, int]]:
        """Pairs generating the same equivalence closure as enumerated(s)."""
        return sorted(self.enumerated(s))

    def size(self, s: int) -> int:
        return len(self.enumerated(s))


class FinitePairs(PairSet):
    static = True

    def __init__(self, pairs: Iterable[tuple[int, int]]):
        self.pairs = frozenset((int(a), int(b)) for a, b in pairs)
        self.label = "{" + ",".join(f"({a},{b})" for a, b in sorted(self.pairs)) + "}"

    def enumerated(self, s: int) -> set[tuple[int, int]]:
        return set(self.pairs)


class CodedPairs(PairSet):
    """Pairs unpair(m) for m in a c.e. set of codes."""

    def __init__(self, codes: CeSet):
        self.codes = codes
        self.label = f"pairs[{codes.label}]"

    def enumerated(self, s: int) -> set[tuple[int, int]]:
        return {unpair(m) for m in self.codes.enumerated(s)}


class MappedPairs(PairSet):
    def __init__(self, inner: PairSet, fn: Callable[[tuple[int, int]], tuple[int, int]], label: str):
        self.inner = inner
        self.fn = fn
        self.label = label
        self.static = inner.static

    def enumerated(self, s: int) -> set[tuple[int, int]]:
        return {self.fn(p) for p in self.inner.enumerated(s)}

    def spanning(self, s: int) -> Iterable[tuple[int, int]]:
        return [self.fn(p) for p in self.inner.spanning(s)]

    def size(self, s: int) -> int:
        return self.inner.size(s)


def finite_pairs(pairs: Iterable[tuple[int, int]]) -> PairSet:
    return FinitePairs(pairs)


def coded_pairs(codes: CeSet) -> PairSet:
    return CodedPairs(codes)


# ---------------------------------------------------------------- joins

def _both_static(*cs: Ceer) -> bool:
    return all(c.static for c in cs)


def oplus(E: Ceer, R: Ceer) -> Ceer:
    """2u ~ 2v iff u E v; 2u+1 ~ 2v+1 iff u R v."""

    def key(s: int, x: int) -> Hashable:
        return (0, E.key(s, x >> 1)) if x % 2 == 0 else (1, R.key(s, x >> 1))

    def decider(x: int) -> Decider | None:
        d = (E if x % 2 == 0 else R).class_decider(x >> 1)
        if d is None:
            return None
        par = x % 2
        return lambda y: y % 2 == par and d(y >> 1)

    fc = None
    if E.finite_classes is not None and R.finite_classes is not None:
        fc = E.finite_classes + R.finite_classes
    out = KeyCeer(key, f"({E.label}+{R.label})", static=_both_static(E, R), finite_classes=fc)
    out.class_decider = decider  # type: ignore[method-assign]
    out.parts = (E, R)
    return out


def oplus_n(ceers: Sequence[Ceer]) -> Ceer:
    """x ~ y iff x = y = i mod n and (x - i)/n E_i (y - i)/n."""
    ceers = list(ceers)
    n = len(ceers)
    if n == 0:
        raise ValueError("oplus_n needs at least one ceer")

    def key(s: int, x: int) -> Hashable:
        i = x % n
        return (i, ceers[i].key(s, x // n))

    def decider(x: int) -> Decider | None:
        i = x % n
        d = ceers[i].class_decider(x // n)
        if d is None:
            return None
        return lambda y: y % n == i and d(y // n)

    fc = None
    if all(c.finite_classes is not None for c in ceers):
        fc = sum(c.finite_classes for c in ceers)  # type: ignore[misc]
    out = KeyCeer(key, "(" + "+".join(c.label for c in ceers) + ")",
                  static=_both_static(*ceers), finite_classes=fc)
    out.class_decider = decider  # type: ignore[method-assign]
    out.parts = tuple(ceers)
    return out


def big_oplus(family: Callable[[int], Ceer], label: str = "family") -> Ceer:
    """<j, x> ~ <k, y> iff j = k and x E_j y."""
    cache: dict[int, Ceer] = {}

    def member(j: int) -> Ceer:
        c = cache.get(j)
        if c is None:
            c = cache[j] = family(j)
        return c

    def key(s: int, x: int) -> Hashable:
        j, y = unpair(x)
        return (j, member(j).key(s, y))

    out = KeyCeer(key, f"Oplus[{label}]")
    out.member = member
    return out


# ---------------------------------------------------------------- quotients

class QuotientCeer(Ceer):
    def __init__(self, E: Ceer, W: PairSet, label: str | None = None):
        self.E = E
        self.W = W
        self.label = label or f"{E.label}/{W.label}"
        self.static = E.static and W.static
        self._cache: dict[int, KeyUnionFind] = {}

    def _uf(self, s: int) -> KeyUnionFind:
        if self.static:
            s = 0
        uf = self._cache.get(s)
        if uf is None:
            uf = KeyUnionFind()
            E = self.E
            for a, b in self.W.spanning(s):
                uf.union(E.key(s, a), E.key(s, b))
            if len(self._cache) > 256:
                self._cache.clear()
            self._cache[s] = uf
        return uf

    def key(self, s: int, x: int) -> Hashable:
        return self._uf(s).find(self.E.key(s, x))


def quotient(E: Ceer, W: PairSet) -> Ceer:
    """Stagewise equivalence closure of E together with W."""
    return QuotientCeer(E, W)


# ---------------------------------------------------------------- restriction

class RestrictedCeer(Ceer):
    """E pulled back along h, where h(n) is the n-th element of [W]_E in
    discovery order (fixed after ``horizon`` stages, cycling if finite)."""

    def __init__(self, E: Ceer, W: CeSet, horizon: int = 1024):
        self.E = E
        self.W = W
        self.horizon = horizon
        self.label = f"{E.label}|{W.label}"
        self.static = E.static
        self._found: list[int] | None = None
        self._index: dict[int, int] = {}

    def discovered(self) -> list[int]:
        """[W]_E in discovery order: at stage t every unseen y <= t whose class
        meets W_t is appended, in increasing order."""
        if self._found is not None:
            return self._found
        found: list[int] = []
        E, W = self.E, self.W
        wkeys: set[Hashable] = set()
        members: list[int] = []
        if E.static:
            pending: dict[Hashable, list[int]] = {}
            for t in range(self.horizon + 1):
                fresh = []
                for m in W.new_at(t):
                    k = E.key(t, m)
                    if k not in wkeys:
                        wkeys.add(k)
                        fresh.extend(pending.pop(k, ()))
                k = E.key(t, t)
                if k in wkeys:
                    fresh.append(t)
                else:
                    pending.setdefault(k, []).append(t)
                found.extend(sorted(fresh))
        else:
            seen: set[int] = set()
            changes = set(E.change_stages(self.horizon))
            for t in range(self.horizon + 1):
                new = W.new_at(t)
                members.extend(new)
                if new or t in changes:
                    wkeys = {E.key(t, m) for m in members}
                    cands = range(t + 1)
                else:
                    cands = range(t, t + 1)
                for y in cands:
                    if y not in seen and E.key(t, y) in wkeys:
                        seen.add(y)
                        found.append(y)
        self._found = found
        for i, y in enumerate(found):
            self._index.setdefault(y, i)
        return found

    def h(self, n: int) -> int:
        found = self.discovered()
        if not found:
            raise ValueError(f"{self.W.label} enumerated nothing within {self.horizon} stages")
        return found[n] if n < len(found) else found[n % len(found)]

    def h_inverse(self, z: int) -> int | None:
        self.discovered()
        return self._index.get(z)

    def key(self, s: int, x: int) -> Hashable:
        return self.E.key(s, self.h(x))


def restrict(E: Ceer, W: CeSet, horizon: int = 1024) -> RestrictedCeer:
    out = RestrictedCeer(E, W, horizon)
    out.discovered()
    if not out._found:
        raise ValueError(f"{W.label} enumerated nothing within {horizon} stages")
    return out


# ---------------------------------------------------------------- jump

def jump(E: Ceer, registry: Registry | None = None) -> Ceer:
    """x ~ y iff x = y or phi_x(x), phi_y(y) both converge to E-equivalent values."""
    reg = registry or DEFAULT_REGISTRY

    def key(s: int, x: int) -> Hashable:
        out = reg.resolve(x).evaluate(x, s)
        if isinstance(out, Converged):
            return ("c", E.key(s, out.value))
        return ("d", x)

    return KeyCeer(key, f"{E.label}'")


# ---------------------------------------------------------------- collapses

@dataclass
class Collapse:
    """Result of collapsing finitely many decidable classes."""

    quotient: Ceer
    k: int
    to_target: ReductionWitness      # quotient (+) Id_k <= E
    from_target: ReductionWitness    # E <= quotient (+) Id_k
    missed: list[int] = field(default_factory=list)


def collapse_with_witness(E: Ceer, pairs: Sequence[tuple[int, int]], stage: int = 0,
                          deciders: dict[int, Decider] | None = None) -> Collapse:
    """Quotient by finitely many pairs with [x_i] decidable, and the
    witnesses for E_/pairs (+) Id_k == E.

    The reduction of the quotient into E sends every redirected decidable
    class to a chosen target class of its component and fixes everything
    else; its range misses exactly k classes, which the odd side covers.
    """
    deciders = dict(deciders or {})
    pairs = [(int(a), int(b)) for a, b in pairs]
    if not pairs:
        raise ValueError("need at least one pair")
    dec: dict[int, Decider] = {}
    for x, _ in pairs:
        d = deciders.get(x) or E.class_decider(x)
        if d is None:
            raise ValueError(f"no decider attached to the class of {x}")
        dec[x] = d
    for _, y in pairs:
        d = deciders.get(y) or E.class_decider(y)
        if d is not None:
            dec.setdefault(y, d)

    # E-classes of the mentioned points, represented by their least member.
    points = sorted({p for pr in pairs for p in pr})
    rep: dict[int, int] = {}
    for p in points:
        for r in sorted(set(rep.values())):
            if E.eq_at(stage, p, r):
                rep[p] = r
                break
        else:
            rep[p] = p
    uf = KeyUnionFind()
    for a, b in pairs:
        uf.union(rep[a], rep[b])
    classes = sorted(set(rep.values()))
    comps: dict[Hashable, list[int]] = {}
    for c in classes:
        comps.setdefault(uf.find(c), []).append(c)

    def decider_for(c: int) -> Decider | None:
        for p in points:
            if rep[p] == c and p in dec:
                return dec[p]
        return None

    redirect: list[tuple[Decider, int, int]] = []   # (decider, class rep, target)
    for comp in comps.values():
        if len(comp) == 1:
            continue
        undecided = [c for c in comp if decider_for(c) is None]
        if len(undecided) > 1:
            raise ValueError("a merged component has more than one class without a decider")
        target = undecided[0] if undecided else comp[0]
        for c in comp:
            if c != target:
                redirect.append((decider_for(c), c, target))  # type: ignore[arg-type]
    Q = quotient(E, finite_pairs(pairs))
    k = len(redirect)
    missed = [c for _, c, _ in redirect]

    def f(z: int) -> int:
        for d, _, target in redirect:
            if d(z):
                return target
        return z

    if k == 0:
        return Collapse(Q, 0, witness(lambda x: x, Q, E, "identity"),
                        witness(lambda x: x, E, Q, "identity"), [])
    src = oplus(Q, id_n(k))

    def up(x: int) -> int:
        return f(x >> 1) if x % 2 == 0 else missed[(x >> 1) % k]

    def down(y: int) -> int:
        for i, (d, _, _) in enumerate(redirect):
            if d(y):
                return 2 * i + 1
        return 2 * y

    return Collapse(Q, k, witness(up, src, E, "collapse-up"),
                    witness(down, E, src, "collapse-down"), missed)


# ---------------------------------------------------------------- Z-chains

@dataclass
class ZChain:
    """ceers[i] (+) Id_1 == ceers[i+1] for each link i."""

    ceers: list[Ceer]
    links: list[tuple[ReductionWitness, ReductionWitness]]
    center: int


def z_chain(E: Ceer, k: int, stage: int = 0, search: int = 10**4) -> ZChain:
    """E_0 = E, E_{n+1} = E_n (+) Id_1, E_{-(n+1)} = E_{-n} collapsed at a fresh
    decidable pair. Returned in order E_{-k}, ..., E_k."""
    if k < 0:
        raise ValueError("k must be non-negative")
    used: list[int] = []

    def fresh(need_decider: bool) -> int:
        for c in range(search):
            if any(E.eq_at(stage, c, u) for u in used):
                continue
            if need_decider and E.class_decider(c) is None:
                continue
            used.append(c)
            return c
        raise ValueError("fresh decidable pairs exhausted within the search budget")

    negatives: list[Ceer] = []
    neg_links: list[tuple[ReductionWitness, ReductionWitness]] = []
    cur = E
    for _ in range(k):
        x = fresh(True)
        y = fresh(False)
        d = E.class_decider(x)
        col = collapse_with_witness(cur, [(x, y)], stage, {x: d})  # type: ignore[dict-item]
        # col: col.quotient (+) Id_1 == cur
        negatives.append(col.quotient)
        neg_links.append((col.to_target, col.from_target))
        cur = col.quotient
    positives: list[Ceer] = []
    pos_links: list[tuple[ReductionWitness, ReductionWitness]] = []
    cur = E
    for _ in range(k):
        nxt = oplus(cur, id_n(1))
        positives.append(nxt)
        pos_links.append((witness(lambda x: x, nxt, nxt, "identity"),
                          witness(lambda x: x, nxt, nxt, "identity")))
        cur = nxt
    ceers = list(reversed(negatives)) + [E] + positives
    links = list(reversed(neg_links)) + pos_links
    return ZChain(ceers, links, k)

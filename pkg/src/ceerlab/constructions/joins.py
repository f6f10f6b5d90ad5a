"""Join constructions: dark pairs with finite classes and least upper bounds
that differ from the plain sum.

Composite ceers (sums of construction ceers, possibly with an Id tail) are
described by ``Layout`` trees: a sum of n children sends z to child z % n
with local number z // n.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

from ..algebra import finite_pairs, oplus, oplus_n, quotient
from ..ceer import witness
from ..machine import CeSet, Converged, Program, Registry, unpair
from ..priority import NEVER, WAITING, ACTED_SATISFIED, INITIALIZED, Context, PairKeepApart, Requirement
from ..reductions import join_quotient, verify_reduction
from .common import (ConstructionResult, FreezeRequirement, domains, execute, next_entry_stage,
                     priority_order, resolve_all)


# ---------------------------------------------------------------- layouts

@dataclass(frozen=True)
class Leaf:
    """A summand: construction ceer ``ceer`` (None for Id).

    ``collapsible`` says which local numbers the construction may merge.
    """

    ceer: int | None
    collapsible: Callable[[int], bool] | None = None

    def can_merge(self, u: int) -> bool:
        return self.ceer is not None and (self.collapsible is None or self.collapsible(u))


IDENTITY = Leaf(None)


class Layout:
    def __init__(self, *children: "Leaf | Layout"):
        if not children:
            raise ValueError("a layout needs at least one summand")
        self.children = list(children)

    def decode(self, z: int) -> tuple[Leaf, int]:
        node: Leaf | Layout = self
        while isinstance(node, Layout):
            n = len(node.children)
            node, z = node.children[z % n], z // n
        return node, z

    def encode(self, path: Sequence[int], local: int) -> int:
        nodes = [self]
        for i in path[:-1]:
            nodes.append(nodes[-1].children[i])
        z = local
        for node, i in zip(reversed(nodes), reversed(path)):
            z = z * len(node.children) + i
        return z

    def eq(self, ctx: Context, u: int, v: int) -> bool:
        lu, xu = self.decode(u)
        lv, xv = self.decode(v)
        if lu is not lv:
            return False
        if lu.ceer is None:
            return xu == xv
        return ctx.eq(lu.ceer, xu, xv)

    def merge_pair(self, u: int, v: int) -> tuple[int, int, int] | None:
        """(ceer, local u, local v) when u, v may be merged inside one summand."""
        lu, xu = self.decode(u)
        lv, xv = self.decode(v)
        if lu is not lv or not (lu.can_merge(xu) and lu.can_merge(xv)):
            return None
        return lu.ceer, xu, xv

    def apart(self, u: int, v: int) -> list[PairKeepApart]:
        lu, xu = self.decode(u)
        lv, xv = self.decode(v)
        if lu is not lv or lu.ceer is None or xu == xv:
            return []
        return [PairKeepApart(xu, xv, lu.ceer)]


def _converges(prog: Program, x: int, cache: dict, step_budget: int) -> tuple[int | None, float]:
    if x not in cache:
        out = prog.evaluate(x, step_budget)
        cache[x] = (out.value, out.steps) if isinstance(out, Converged) else (None, NEVER)
    return cache[x]


# ---------------------------------------------------------------- P: anti-matching

class PairMismatch(Requirement):
    """An infinite W of pairs has (x, y), (x', y') with x ~ x' xor y ~ y'.

    W enumerates pair codes. Either side may act when its summand is in
    ``acting``: merge that side's pair and keep the other side apart, or
    keep the acting side apart when the other side is already merged.
    """

    kind = "P"

    def __init__(self, name: str, W: CeSet, left: Layout, right: Layout,
                 acting: Sequence[int], window: int = 32):
        super().__init__(name, left.decode(0)[0].ceer or 0)
        self.W = W
        self.sides = (left, right)
        self.acting = set(acting)
        self.window = window
        self.witness: tuple[tuple[int, int], tuple[int, int]] | None = None
        self._pairs: list[tuple[int, int]] = []
        self._upto = -1

    def reset(self) -> None:
        super().reset()
        self.witness = None

    def _extend(self, s: int) -> None:
        while self._upto < s and len(self._pairs) < self.window:
            self._upto += 1
            self._pairs.extend(unpair(c) for c in self.W.new_at(self._upto))
        del self._pairs[self.window:]

    def _ready(self, ctx: Context, p: tuple[int, int], q: tuple[int, int]):
        for side in (0, 1):
            lay = self.sides[side]
            m = lay.merge_pair(p[side], q[side])
            if m is None or m[0] not in self.acting:
                continue
            l, u, v = m
            if ctx.eq(l, u, v) or ctx.blocking(self.rank, l, u, v) is not None:
                continue
            other = self.sides[1 - side]
            if other.decode(p[1 - side])[0] is not other.decode(q[1 - side])[0]:
                continue
            return side, m
        return None

    def attend(self, ctx: Context, s: int) -> bool:
        if self.witness is not None:
            self.wake = NEVER
            return False
        self._extend(s)
        pairs = self._pairs
        for j in range(len(pairs)):
            for i in range(j):
                found = self._ready(ctx, pairs[i], pairs[j])
                if found is None:
                    continue
                side, (l, u, v) = found
                p, q = pairs[i], pairs[j]
                other = self.sides[1 - side]
                ou, ov = p[1 - side], q[1 - side]
                if other.eq(ctx, ou, ov):
                    ctx.restrain(self, PairKeepApart(u, v, l))
                else:
                    ctx.collapse(self, l, u, v)
                    for r in other.apart(ou, ov):
                        ctx.restrain(self, r)
                self.witness = (p, q)
                self.state = ACTED_SATISFIED
                return True
        self.wake = NEVER if len(pairs) >= self.window else next_entry_stage(self.W, s)
        return False

    def mismatch(self, ctx: Context) -> bool:
        (x, y), (x2, y2) = self.witness
        left, right = self.sides
        return left.eq(ctx, x, x2) != right.eq(ctx, y, y2)

    def verify(self, ctx: Context) -> str | None:
        if self.witness is None:
            return None
        return "" if self.mismatch(ctx) else f"pairs {self.witness} match"


# ---------------------------------------------------------------- D: darkness

class DarkCollapse(Requirement):
    """If W is infinite, two of its elements are merged in the ceer."""

    kind = "D"
    injurable = False

    def __init__(self, name: str, ceer: int, W: CeSet,
                 collapsible: Callable[[int], bool] | None = None, window: int = 64):
        super().__init__(name, ceer)
        self.W = W
        self.collapsible = collapsible
        self.window = window
        self.how = ""
        self.pair: tuple[int, int] | None = None
        self._seen: list[int] = []
        self._upto = -1

    def attend(self, ctx: Context, s: int) -> bool:
        if self.how:
            self.wake = NEVER
            return False
        while self._upto < s and len(self._seen) < self.window:
            self._upto += 1
            self._seen.extend(x for x in self.W.new_at(self._upto)
                              if self.collapsible is None or self.collapsible(x))
        l = self.ceer
        xs = self._seen[:self.window]
        for j in range(len(xs)):
            for i in range(j):
                if ctx.eq(l, xs[i], xs[j]):
                    self.how, self.pair, self.wake = "met", (xs[i], xs[j]), NEVER
                    return False
        for j in range(len(xs)):
            for i in range(j):
                if ctx.blocking(self.rank, l, xs[i], xs[j]) is None:
                    ctx.collapse(self, l, xs[i], xs[j])
                    self.how, self.pair = "acted", (xs[i], xs[j])
                    self.state = ACTED_SATISFIED
                    return True
        self.wake = NEVER if len(xs) >= self.window else next_entry_stage(self.W, s)
        return False

    def verify(self, ctx: Context) -> str | None:
        if not self.how:
            return None
        return "" if ctx.eq(self.ceer, *self.pair) else "pair separated"


# ---------------------------------------------------------------- I: incomparability

class LayoutDiagonal(Requirement):
    """phi is not a reduction of the source to ``target``.

    Witnesses are local numbers of ceer ``ceer``; ``embed`` turns them into
    inputs of phi (their codes in the source sum).
    """

    kind = "I"

    def __init__(self, name: str, ceer: int, embed: Callable[[int], int], opponent: Program,
                 target: Layout, avoid: Callable[[int], bool] | None = None):
        super().__init__(name, ceer)
        self.embed = embed
        self.opponent = opponent
        self.target = target
        self.avoid = avoid
        self.outcome = ""

    def reset(self) -> None:
        super().reset()
        self.outcome = ""

    def attend(self, ctx: Context, s: int) -> bool:
        l = self.ceer
        if self.state == INITIALIZED:
            x = ctx.fresh(self, "x", self.avoid)
            y = ctx.fresh(self, "y", self.avoid)
            ctx.restrain(self, PairKeepApart(x, y, l))
            self.state = WAITING
            return True
        if self.outcome:
            self.wake = NEVER
            return False
        x, y = self.params["x"], self.params["y"]
        cx = ctx.converged(self.opponent, self.embed(x), s)
        cy = ctx.converged(self.opponent, self.embed(y), s)
        if cx is None or cy is None:
            self.wake = max(ctx.convergence_stage(self.opponent, self.embed(x)),
                            ctx.convergence_stage(self.opponent, self.embed(y)))
            return False
        fx, fy = cx.value, cy.value
        self.params.update(fx=fx, fy=fy)
        if self.target.eq(ctx, fx, fy):
            self.outcome = "images equivalent"
            self.wake = NEVER
            return False
        if ctx.blocking(self.rank, l, x, y) is not None:
            self.wake = NEVER
            return False
        ctx.collapse(self, l, x, y)
        for r in self.target.apart(fx, fy):
            ctx.restrain(self, r)
        self.outcome = "collapsed"
        self.state = ACTED_SATISFIED
        return True

    def verify(self, ctx: Context) -> str | None:
        if not self.outcome:
            return None
        x, y = self.params["x"], self.params["y"]
        left = ctx.eq(self.ceer, x, y)
        right = self.target.eq(ctx, self.params["fx"], self.params["fy"])
        return "" if left != right else f"no mismatch on {x},{y}"


# ---------------------------------------------------------------- Q: not below the smaller sum

class CopyCollapse(Requirement):
    """phi does not reduce a sum with two copies of a ceer to ``target``.

    Searches a in the first copy and b in the second (inputs ``first(a)``,
    ``second(b)``) whose images can be merged inside one summand of the
    target; merging them makes the images equivalent while a, b stay apart.
    """

    kind = "Q"
    injurable = False

    def __init__(self, name: str, opponent: Program, target: Layout,
                 first: Callable[[int], int], second: Callable[[int], int], window: int = 16,
                 step_budget: int = 10**5):
        super().__init__(name, 0)
        self.opponent = opponent
        self.target = target
        self.first, self.second = first, second
        self.window = window
        self.step_budget = step_budget
        self.outcome = ""
        self.pair: tuple[int, int] | None = None
        self._cache: dict[int, tuple[int | None, float]] = {}

    def attend(self, ctx: Context, s: int) -> bool:
        if self.outcome:
            self.wake = NEVER
            return False
        wake = NEVER
        for t in range(2 * self.window - 1):
            for a in range(max(0, t - self.window + 1), min(t, self.window - 1) + 1):
                b = t - a
                fa, sa = _converges(self.opponent, self.first(a), self._cache, self.step_budget)
                fb, sb = _converges(self.opponent, self.second(b), self._cache, self.step_budget)
                if max(sa, sb) > s:
                    wake = min(wake, max(sa, sb))
                    continue
                if self.target.eq(ctx, fa, fb):
                    self.outcome, self.pair = "images equivalent", (a, b)
                    self.params.update(fa=fa, fb=fb)
                    self.wake = NEVER
                    return False
                m = self.target.merge_pair(fa, fb)
                if m is None or ctx.blocking(self.rank, *m) is not None:
                    continue
                ctx.collapse(self, *m)
                self.outcome, self.pair = "collapsed", (a, b)
                self.params.update(fa=fa, fb=fb)
                self.state = ACTED_SATISFIED
                return True
        self.wake = wake
        return False

    def verify(self, ctx: Context) -> str | None:
        if not self.outcome:
            return None
        ok = self.target.eq(ctx, self.params["fa"], self.params["fb"])
        return "" if ok else "images separated"


# ---------------------------------------------------------------- constructions

def _join_pairs_entries(progs, Ws, left: Layout, right: Layout, acting, window):
    return [((i, 1, i), PairMismatch(f"P[{i}]", W, left, right, acting, window))
            for i, W in enumerate(Ws)]


def dark_join_pair(opponents: Sequence = (), stages: int = 4096, finite_classes: int = 8,
                   registry: Registry | None = None, step_budget: int = 10**5,
                   seed_universe: int = 0, window: int = 32) -> ConstructionResult:
    """Dark E1, E2 with finite classes, neither below the other plus Id, such that
    every infinite c.e. set of pairs contains a mismatching couple of pairs."""
    progs = resolve_all(opponents, registry)
    Ws = domains(progs, step_budget)
    E1, E2 = Leaf(0), Leaf(1)
    entries = _join_pairs_entries(progs, Ws, Layout(E1), Layout(E2), [0], window)
    for m, W in enumerate(Ws):
        for l in (0, 1):
            entries.append(((m, 2, l, m), DarkCollapse(f"D[{l},{m}]", l, W)))
    for e, p in enumerate(progs):
        entries.append(((e, 0, 0, e), LayoutDiagonal(f"I12[{e}]", 0, lambda x: x, p,
                                                     Layout(E2, IDENTITY))))
        entries.append(((e, 0, 1, e), LayoutDiagonal(f"I21[{e}]", 1, lambda x: x, p,
                                                     Layout(E1, IDENTITY))))
    for k in range(finite_classes):
        for l in (0, 1):
            entries.append(((k, 3, l, k), FreezeRequirement(f"F[{l},{k}]", l, k)))
    reqs = priority_order(entries)
    return execute("dark_join_pair", reqs, 2, stages, labels=["E1", "E2"],
                   step_budget=step_budget, seed_universe=seed_universe)


@dataclass
class PlantedJoin:
    """Evidence that the sum of the two outputs is below a planted upper bound modulo W."""

    checkpoints: list[int]
    sizes: list[int]
    stable: bool
    verdict: object

    @property
    def ok(self) -> bool:
        from ..reductions import ConsistentUpTo
        return self.stable and isinstance(self.verdict, ConsistentUpTo)


def planted_join_check(result: ConstructionResult, a: int = 0, b: int = 0, bound: int = 64,
                       points: int = 10) -> PlantedJoin:
    """Plant the upper bound Y = (E1 (+) E2) with [2a] and [2b+1] merged.

    f1(x) = 2x and f2(y) = 2y+1 reduce E1, E2 to Y, and W = {(x, y) :
    f1(x) Y f2(y)} must stop growing; the join-quotient witness is verified.
    """
    E1, E2 = result.ceers[0], result.ceers[1]
    Y = quotient(oplus(E1, E2), finite_pairs([(2 * a, 2 * b + 1)]))
    w1 = witness(lambda x: 2 * x, E1, Y, "planted f1")
    w2 = witness(lambda y: 2 * y + 1, E2, Y, "planted f2")
    jq = join_quotient(w1, w2, limit=bound)
    stages = result.stages
    checkpoints = sorted({stages * i // points for i in range(points + 1)})
    sizes = [jq.W.size(s) for s in checkpoints]
    tail = [sz for s, sz in zip(checkpoints, sizes) if s >= stages * 8 // 10]
    stable = len(set(tail)) == 1
    verdict = verify_reduction(jq.witness, bound=bound, stage=stages)
    return PlantedJoin(checkpoints, sizes, stable, verdict)


def _three_part(stages, opponents, registry, step_budget, seed_universe, window, finite_classes,
                dark_y: bool, name: str) -> ConstructionResult:
    progs = resolve_all(opponents, registry)
    Ws = domains(progs, step_budget)
    X, Z = Leaf(0), Leaf(2)
    Y = Leaf(1) if dark_y else Leaf(1, lambda y: y % 2 == 0)
    left, right = Layout(X, Z), Layout(Y, Z)
    entries = _join_pairs_entries(progs, Ws, left, right, [0, 1], window)
    if dark_y:
        target = Layout(X, Y, Z, IDENTITY)
    else:
        target = Layout(X, Y, Z)
    four = Layout(X, Y, Z, Z)
    for j, p in enumerate(progs):
        entries.append(((j, 0, j), CopyCollapse(
            f"Q[{j}]", p, target, lambda a: four.encode([2], a), lambda b: four.encode([3], b),
            step_budget=step_budget)))
    dark = [(0, "X", None), (2, "Z", None)]
    if dark_y:
        dark.insert(1, (1, "Y", None))
    for m, W in enumerate(Ws):
        for l, tag, pred in dark:
            entries.append(((m, 3, l, m), DarkCollapse(f"D{tag}[{m}]", l, W, pred)))
    y_avoid = None if dark_y else (lambda y: y % 2 == 1)
    for e, p in enumerate(progs):
        entries.append(((e, 2, 0, e), LayoutDiagonal(
            f"I12[{e}]", 0, lambda x: 2 * x, p, Layout(Y, Z, IDENTITY))))
        entries.append(((e, 2, 1, e), LayoutDiagonal(
            f"I21[{e}]", 1, lambda y: 2 * y, p, Layout(X, Z, IDENTITY), avoid=y_avoid)))
    frozen = [(0, "X"), (2, "Z")] + ([(1, "Y")] if dark_y else [])
    for k in range(finite_classes):
        for l, tag in frozen:
            entries.append(((k, 4, l, k), FreezeRequirement(f"F{tag}[{k}]", l, k)))
    reqs = priority_order(entries)
    res = execute(name, reqs, 3, stages, labels=["X", "Y", "Z"], step_budget=step_budget,
                  seed_universe=seed_universe)
    Xc, Yc, Zc = res.ceers
    res.extras.update(E1=oplus(Xc, Zc), E2=oplus(Yc, Zc), R=oplus_n([Xc, Yc, Zc]),
                      target=target, dark_y=dark_y)
    return res


def sup_not_oplus(opponents: Sequence = (), stages: int = 4096, finite_classes: int = 8,
                  registry: Registry | None = None, step_budget: int = 10**5,
                  seed_universe: int = 0, window: int = 32) -> ConstructionResult:
    """X, Y = Y0 (+) Id, Z with E1 = X (+) Z, E2 = Y (+) Z and R = X (+) Y (+) Z.

    Y's odd numbers form its Id part and are never merged.
    """
    return _three_part(stages, opponents, registry, step_budget, seed_universe, window,
                       finite_classes, False, "sup_not_oplus")


def dark_I_join(opponents: Sequence = (), stages: int = 4096, finite_classes: int = 8,
                registry: Registry | None = None, step_budget: int = 10**5,
                seed_universe: int = 0, window: int = 32) -> ConstructionResult:
    """As ``sup_not_oplus`` with Y dark (no Id part) and Q aiming at X (+) Y (+) Z (+) Id.

    Only the requirement list is fixed; results are tagged ``fidelity = "sketch"``.
    """
    res = _three_part(stages, opponents, registry, step_budget, seed_universe, window,
                      finite_classes, True, "dark_I_join")
    res.extras["fidelity"] = "sketch"
    return res


def id_part_merges(result: ConstructionResult) -> list:
    """Merge events touching the Id part of Y (odd Y numbers)."""
    return [e for e in result.trace if e.kind in ("Collapse", "AuxCollapse", "CodingMerge")
            and e.payload[0] == 1 and (e.payload[1] % 2 == 1 or e.payload[2] % 2 == 1)]


def class_sizes(result: ConstructionResult) -> dict[int, int]:
    """Largest class size per ceer among mentioned numbers."""
    out = {}
    for l, part in enumerate(result.ctx.parts):
        top = result.ctx.mentioned + 1
        sizes = [part.class_size(x) for x in range(min(top, 4096))]
        out[l] = max(sizes) if sizes else 1
    return out


__all__ = ["Leaf", "IDENTITY", "Layout", "PairMismatch", "DarkCollapse", "LayoutDiagonal",
           "CopyCollapse", "dark_join_pair", "planted_join_check", "PlantedJoin", "sup_not_oplus",
           "dark_I_join", "id_part_merges", "class_sizes"]

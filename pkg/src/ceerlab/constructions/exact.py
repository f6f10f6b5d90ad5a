"""Exact pairs above a uniform family, and minimal dark n-tuples."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations, product
from typing import Hashable, Sequence

from ..algebra import oplus_n
from ..ceer import Ceer
from ..machine import Converged, Program, Registry, pair, unpair
from ..priority import (ACTED_SATISFIED, INITIALIZED, NEVER, WAITING, ColumnBlock, Context,
                        PairKeepApart, Requirement)
from .common import (ConstructionResult, domains, execute, partition_of,
                     ceer_partition, resolve_all)
from .joins import DarkCollapse, Layout, Leaf


# ---------------------------------------------------------------- exact pair

def restrained_columns(ctx: Context, l: int, below: float) -> set[int]:
    cols: set[int] = set()
    for owner, rs in ctx.restraints.items():
        if owner < below:
            for r in rs:
                if isinstance(r, ColumnBlock) and r.ceer == l:
                    cols.update(r.columns)
    return cols


def meets(ctx: Context, l: int, x: int, cols: set[int]) -> bool:
    return any(unpair(y)[0] in cols for y in ctx.class_of(l, x))


class ColumnCoder(Requirement):
    """Some column of both ceers carries a copy of A_n.

    Never acts in the dispatch step; the per-stage coding step appoints its
    column and codes into it.
    """

    kind = "Q"

    def __init__(self, name: str, n: int, A: Ceer):
        super().__init__(name, 0)
        self.n = n
        self.A = A
        self.column: int | None = None
        self.coded: list[tuple[int, int]] | None = None
        self.retired: list[int] = []

    def reset(self) -> None:
        if self.column is not None:
            self.retired.append(self.column)
        super().reset()
        self.column = None
        self.coded = None

    def attend(self, ctx: Context, s: int) -> bool:
        self.wake = NEVER
        return False


class ColumnMismatch(Requirement):
    """phi_j (into X) and phi_k (into Y) do not reduce one ceer to both."""

    kind = "P"

    def __init__(self, name: str, left: Program, right: Program, window: int = 12,
                 step_budget: int = 10**5):
        super().__init__(name, 0)
        self.left, self.right = left, right
        self.window = window
        self.step_budget = step_budget
        self.found: dict | None = None
        self._cache: dict[tuple[int, int], tuple[int | None, float]] = {}

    def reset(self) -> None:
        super().reset()
        self.found = None

    def _image(self, side: int, x: int) -> tuple[int | None, float]:
        key = (side, x)
        if key not in self._cache:
            prog = self.left if side == 0 else self.right
            out = prog.evaluate(x, self.step_budget)
            self._cache[key] = (out.value, out.steps) if isinstance(out, Converged) else (None, NEVER)
        return self._cache[key]

    def _candidates(self, s: int):
        wake = NEVER
        out = []
        for y in range(1, self.window):
            for x in range(y):
                vals = [self._image(side, z) for side in (0, 1) for z in (x, y)]
                late = max(st for _, st in vals)
                if late > s:
                    wake = min(wake, late)
                    continue
                out.append((x, y, [v for v, _ in vals]))
        return out, wake

    def attend(self, ctx: Context, s: int) -> bool:
        if self.found is not None:
            self.wake = NEVER
            return False
        cx = restrained_columns(ctx, 0, self.rank)
        cy = restrained_columns(ctx, 1, self.rank)
        cands, wake = self._candidates(s)
        for x, y, (jx, jy, kx, ky) in cands:
            if meets(ctx, 0, jx, cx) and meets(ctx, 0, jy, cx):
                continue
            if meets(ctx, 1, kx, cy) and meets(ctx, 1, ky, cy):
                continue
            xeq, yeq = ctx.eq(0, jx, jy), ctx.eq(1, kx, ky)
            if xeq and yeq:
                continue
            collapsed = False
            if not yeq and not xeq:
                ctx.collapse(self, 0, jx, jy)
                collapsed = True
            top = max(unpair(z)[0] for l, zs in ((0, (jx, jy)), (1, (kx, ky)))
                      for z0 in zs for z in ctx.class_of(l, z0))
            for l in (0, 1):
                ctx.restrain(self, ColumnBlock(tuple(range(top + 1)), l))
            self.found = {"x": x, "y": y, "images": (jx, jy, kx, ky), "collapsed": collapsed}
            self.params.update(x=x, y=y)
            self.state = ACTED_SATISFIED
            return True
        self.wake = wake
        return False

    def mismatch(self, ctx: Context) -> bool:
        jx, jy, kx, ky = self.found["images"]
        return ctx.eq(0, jx, jy) != ctx.eq(1, kx, ky)

    def confined(self, ctx: Context, s: int) -> bool:
        """No pair in the window is ready: every converged pair is restrained or matched."""
        cx = restrained_columns(ctx, 0, self.rank)
        cy = restrained_columns(ctx, 1, self.rank)
        for x, y, (jx, jy, kx, ky) in self._candidates(s)[0]:
            both_x = meets(ctx, 0, jx, cx) and meets(ctx, 0, jy, cx)
            both_y = meets(ctx, 1, kx, cy) and meets(ctx, 1, ky, cy)
            matched = ctx.eq(0, jx, jy) and ctx.eq(1, kx, ky)
            if not (both_x or both_y or matched):
                return False
        return True

    def verify(self, ctx: Context) -> str | None:
        if self.found is None:
            return None
        return "" if self.mismatch(ctx) else f"no mismatch on {self.found['x']},{self.found['y']}"


class AuxiliaryCollapser(Requirement):
    """Owner of the auxiliary collapses, ranked below every real requirement."""

    kind = "A"
    injurable = False

    def attend(self, ctx: Context, s: int) -> bool:
        self.wake = NEVER
        return False


class ExactPairStep:
    """The second half of every stage: appoint a column for the least Q
    without one, collapse unrestrained parts of smaller idle columns, code."""

    def __init__(self, coders: Sequence[ColumnCoder], aux: AuxiliaryCollapser, bound: int):
        self.coders = list(coders)
        self.aux = aux
        self.bound = bound
        self._seen_events = 0
        self.last_source_stage = -1

    def _appoint(self, ctx: Context, q: ColumnCoder) -> None:
        z = ctx.fresh(q, "c", lambda v: unpair(v)[1] != 0)
        q.column = unpair(z)[0]
        for l in (0, 1):
            ctx.restrain(q, ColumnBlock((q.column,), l))

    def _aux(self, ctx: Context) -> None:
        coding = {q.column for q in self.coders if q.column is not None}
        if not coding:
            return
        top = max(coding)
        for l in (0, 1):
            cols = restrained_columns(ctx, l, NEVER)
            for k in range(top):
                if k in coding:
                    continue
                free = [pair(k, u) for u in range(self.bound)
                        if not meets(ctx, l, pair(k, u), cols)]
                for z in free[1:]:
                    if not ctx.eq(l, free[0], z):
                        ctx.collapse(self.aux, l, free[0], z, aux=True)

    def _code(self, ctx: Context, q: ColumnCoder, s: int) -> None:
        first: dict[Hashable, int] = {}
        merges = []
        for u in range(min(s + 1, self.bound)):
            rep = first.setdefault(q.A.key(s, u), u)
            if rep != u:
                merges.append((rep, u))
        if merges == q.coded:
            return
        q.coded = merges
        for l in (0, 1):
            for a, b in merges:
                ctx.code(l, pair(q.column, a), pair(q.column, b), rank=q.rank)

    def __call__(self, ctx: Context, s: int) -> None:
        pending = [q for q in self.coders if q.column is None]
        changed = False
        if pending:
            self._appoint(ctx, pending[0])
            changed = True
        events = ctx.trace.events
        if any(e.kind not in ("CodingMerge", "AuxCollapse") for e in events[self._seen_events:]):
            changed = True
        if changed:
            self._aux(ctx)
        self._seen_events = len(events)
        for q in self.coders:
            if q.column is not None:
                self._code(ctx, q, s)
        self.last_source_stage = s


def _family(family, n: int) -> list[Ceer]:
    if callable(family) and not isinstance(family, Ceer):
        return [family(i) for i in range(n)]
    return list(family)[:n]


def exact_pair(family, n_coded: int | None = None, opponents: Sequence = (), stages: int = 4096,
               dark_mode: bool = False, registry: Registry | None = None, bound: int = 24,
               window: int = 12, step_budget: int = 10**5, seed_universe: int = 0) -> ConstructionResult:
    """X, Y with every A_n (n < n_coded) coded in a column of both, and no ceer
    reducing to both via the listed opponent pairs beyond the coded ones.

    Columns hold <k, u> for u below ``bound``; ``dark_mode`` adds darkness
    requirements for both ceers.
    """
    if n_coded is None:
        n_coded = len(family)
    As = _family(family, n_coded)
    progs = resolve_all(opponents, registry)
    Ws = domains(progs, step_budget)
    coders = [ColumnCoder(f"Q[{n}]", n, A) for n, A in enumerate(As)]
    reqs: list[Requirement] = []
    o = len(progs)
    top = max([n_coded] + ([pair(o - 1, o - 1) + 1] if o else []))
    for m in range(top):
        if m < n_coded:
            reqs.append(coders[m])
        j, k = unpair(m)
        if j < o and k < o:
            reqs.append(ColumnMismatch(f"P[{j},{k}]", progs[j], progs[k], window, step_budget))
        if dark_mode and m < o:
            for l, tag in ((0, "X"), (1, "Y")):
                reqs.append(DarkCollapse(f"D{tag}[{m}]", l, Ws[m]))
    aux = AuxiliaryCollapser("aux", 0)
    reqs.append(aux)
    step = ExactPairStep(coders, aux, bound)
    res = execute("exact_pair", reqs, 2, stages, labels=["X", "Y"], step_budget=step_budget,
                  seed_universe=seed_universe, after=[step], extras={"family": As, "bound": bound})
    res.extras["step"] = step
    return res


@dataclass
class ColumnReport:
    fidelity: dict[int, dict[int, bool]]
    retired: dict[int, tuple[int, int]]          # column -> (classes, bound)
    restrained_retired: list[int]

    @property
    def ok(self) -> bool:
        return (all(all(v.values()) for v in self.fidelity.values())
                and all(c <= b for c, b in self.retired.values()))


def exact_pair_report(result: ConstructionResult) -> ColumnReport:
    """Per-column checks: coding columns copy their ceer at the last coded
    stage; retired unrestrained columns have at most 1 + (classes holding a
    requirement's merge endpoint) classes."""
    ctx = result.ctx
    bound = result.extras["bound"]
    step: ExactPairStep = result.extras["step"]
    s = step.last_source_stage
    fidelity = {}
    for q in step.coders:
        if q.column is None:
            continue
        want = ceer_partition(q.A, s, min(s + 1, bound))
        cells = [pair(q.column, u) for u in range(min(s + 1, bound))]
        fidelity[q.n] = {l: partition_of(ctx.parts[l], cells) == want for l in (0, 1)}
    active = {q.column for q in step.coders if q.column is not None}
    retired_cols = sorted({c for q in step.coders for c in q.retired} - active)
    endpoints = {l: {ctx.parts[l].find(z) for e in result.trace if e.kind == "Collapse"
                     and e.payload[0] == l for z in e.payload[1:]} for l in (0, 1)}
    retired, restrained = {}, []
    for c in retired_cols:
        if any(c in restrained_columns(ctx, l, NEVER) for l in (0, 1)):
            restrained.append(c)
            continue
        worst = (0, 0)
        for l in (0, 1):
            roots = {ctx.parts[l].find(pair(c, u)) for u in range(bound)}
            allowed = 1 + len(roots & endpoints[l])
            if len(roots) - allowed >= worst[0] - worst[1]:
                worst = (len(roots), allowed)
        retired[c] = worst
    return ColumnReport(fidelity, retired, restrained)


# ---------------------------------------------------------------- minimal tuples

def tuple_components(n: int) -> list[frozenset[int]]:
    """The (n-1)-subsets of {1..n}, ordered by canonical index."""
    subsets = [frozenset(c) for c in combinations(range(1, n + 1), n - 1)]
    return sorted(subsets, key=lambda X: sum(1 << (i - 1) for i in X))


def tuple_assembly(n: int) -> dict[int, list[int]]:
    """For each i, the component indices summed (in order) to give R_i."""
    comps = tuple_components(n)
    return {i: [c for c, X in enumerate(comps) if i in X] for i in range(1, n + 1)}


class TupleDiagonal(Requirement):
    """No Z reduces to every R_k via the given opponents unless Z is finite."""

    kind = "P"

    def __init__(self, name: str, progs: Sequence[Program], layouts: dict[int, Layout],
                 comps: Sequence[frozenset[int]], window: int = 12, step_budget: int = 10**5):
        super().__init__(name, 0)
        self.progs = list(progs)
        self.layouts = layouts
        self.comps = list(comps)
        self.window = window
        self.step_budget = step_budget
        self.outcome = ""
        self._cache: dict[tuple[int, int], tuple[int | None, float]] = {}

    def reset(self) -> None:
        super().reset()
        self.outcome = ""

    def _image(self, k: int, x: int) -> tuple[int | None, float]:
        key = (k, x)
        if key not in self._cache:
            out = self.progs[k - 1].evaluate(x, self.step_budget)
            self._cache[key] = (out.value, out.steps) if isinstance(out, Converged) else (None, NEVER)
        return self._cache[key]

    def attend(self, ctx: Context, s: int) -> bool:
        if self.outcome:
            self.wake = NEVER
            return False
        first = self.layouts[1]
        if self.state == INITIALIZED:
            wake = NEVER
            for y in range(1, self.window):
                for x in range(y):
                    (fx, sx), (fy, sy) = self._image(1, x), self._image(1, y)
                    if max(sx, sy) > s:
                        wake = min(wake, max(sx, sy))
                        continue
                    m = first.merge_pair(fx, fy)
                    if m is None or ctx.eq(*m) or ctx.blocking(self.rank, *m) is not None:
                        continue
                    ctx.restrain(self, PairKeepApart(m[1], m[2], m[0]))
                    X = self.comps[m[0]]
                    j = min(set(range(1, len(self.comps) + 1)) - X)
                    self.params.update(x=x, y=y, j=j)
                    self.state = WAITING
                    return True
            self.wake = wake
            return False
        x, y, j = self.params["x"], self.params["y"], self.params["j"]
        (gx, sx), (gy, sy) = self._image(j, x), self._image(j, y)
        if max(sx, sy) > s:
            self.wake = max(sx, sy)
            return False
        target = self.layouts[j]
        if target.eq(ctx, gx, gy):
            self.outcome = "kept"
            self.wake = NEVER
            return False
        for r in target.apart(gx, gy):
            ctx.restrain(self, r)
        fx, fy = self._image(1, x)[0], self._image(1, y)[0]
        ctx.collapse(self, *first.merge_pair(fx, fy))
        self.outcome = "collapsed"
        self.state = ACTED_SATISFIED
        return True

    def verify(self, ctx: Context) -> str | None:
        if not self.outcome:
            return None
        x, y, j = self.params["x"], self.params["y"], self.params["j"]
        one = self.layouts[1].eq(ctx, self._image(1, x)[0], self._image(1, y)[0])
        other = self.layouts[j].eq(ctx, self._image(j, x)[0], self._image(j, y)[0])
        return "" if one != other else f"no mismatch on {x},{y}"


class ManyClasses(Requirement):
    """E has at least k classes: k fresh numbers kept pairwise apart."""

    kind = "Q"

    def __init__(self, name: str, ceer: int, k: int):
        super().__init__(name, ceer)
        self.k = k

    def attend(self, ctx: Context, s: int) -> bool:
        if self.state != INITIALIZED:
            self.wake = NEVER
            return False
        xs = [ctx.fresh(self, f"x{i}") for i in range(self.k)]
        for a, b in combinations(xs, 2):
            ctx.restrain(self, PairKeepApart(a, b, self.ceer))
        self.state = ACTED_SATISFIED
        return True

    def verify(self, ctx: Context) -> str | None:
        if self.state == INITIALIZED:
            return None
        xs = [self.params[f"x{i}"] for i in range(self.k)]
        roots = {ctx.parts[self.ceer].find(x) for x in xs}
        return "" if len(roots) == self.k else "tuple collapsed"


def minimal_tuple(n: int, opponents: Sequence = (), stages: int = 4096, classes: int = 4,
                  tuples: Sequence[Sequence[int]] | None = None, registry: Registry | None = None,
                  window: int = 12, step_budget: int = 10**5, seed_universe: int = 0) -> ConstructionResult:
    """Components E_X for the (n-1)-subsets X of {1..n}; R_i sums the E_X with i in X.

    ``tuples`` lists opponent index tuples (i_1..i_n) for the diagonalization
    requirements; by default all tuples over the first few opponents.
    """
    if n < 2:
        raise ValueError("minimal tuples need n >= 2")
    comps = tuple_components(n)
    assembly = tuple_assembly(n)
    leaves = [Leaf(c) for c in range(len(comps))]
    layouts = {i: Layout(*[leaves[c] for c in assembly[i]]) for i in assembly}
    progs = resolve_all(opponents, registry)
    Ws = domains(progs, step_budget)
    if tuples is None:
        tuples = list(product(range(min(len(progs), 3)), repeat=n)) if progs else []
    entries = []
    for t, vec in enumerate(tuples):
        entries.append(((t, 0), TupleDiagonal(f"P{tuple(vec)}", [progs[i] for i in vec], layouts,
                                               comps, window, step_budget)))
    for k in range(1, classes + 1):
        for c in range(len(comps)):
            entries.append(((k, 1, c), ManyClasses(f"Q[{k},{c}]", c, k)))
    for m, W in enumerate(Ws):
        for c in range(len(comps)):
            entries.append(((m, 2, c), DarkCollapse(f"D[{m},{c}]", c, W)))
    reqs = [r for _, r in sorted(entries, key=lambda e: e[0])]
    labels = ["E" + "".join(map(str, sorted(X))) for X in comps]
    res = execute("minimal_tuple", reqs, len(comps), stages, labels=labels,
                  step_budget=step_budget, seed_universe=seed_universe)
    res.extras.update(components=comps, assembly=assembly, layouts=layouts,
                      R={i: oplus_n([res.ceers[c] for c in assembly[i]]) for i in assembly})
    return res


__all__ = ["ColumnCoder", "ColumnMismatch", "AuxiliaryCollapser", "ExactPairStep", "exact_pair",
           "exact_pair_report", "ColumnReport", "tuple_components", "tuple_assembly",
           "TupleDiagonal", "ManyClasses", "minimal_tuple", "restrained_columns"]

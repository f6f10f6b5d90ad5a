"""Strategies and plumbing shared by the priority constructions."""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass, field
from typing import Callable, Hashable, Sequence

from ..ceer import Ceer, PartitionCeer
from ..machine import CeSet, Converged, ExternProgram, Program, ProgramDomain, Registry, DEFAULT_REGISTRY, unpair
from ..partition import StagedPartition
from ..priority import (ACTED_SATISFIED, INITIALIZED, NEVER, WAITING, AuditReport, ConstructionTrace,
                        Context, FreezeClass, KeepFromSet, PairKeepApart, Requirement, Scheduler,
                        StageHook, audit, finitary_diagonalization_step, sub_outcome, universal_ceer)

COLUMN_ZERO = "W"


def in_column_zero(x: int) -> bool:
    return unpair(x)[0] == 0


# ---------------------------------------------------------------- helpers

def next_entry_stage(W: CeSet, s: int, horizon: int = 512) -> int:
    """First stage t > s at which W enumerates something, looking at most ``horizon`` ahead."""
    stages = W.__dict__.setdefault("_nonempty", [])
    probe = W.__dict__.get("_probe", 0)
    target = s + horizon
    while probe < target:
        probe += 1
        if W.new_at(probe):
            stages.append(probe)
    W._probe = probe
    i = bisect_right(stages, s)
    return stages[i] if i < len(stages) else target


def domains(opponents: Sequence[Program], step_budget: int) -> list[CeSet]:
    return [ProgramDomain(p, step_budget) for p in opponents]


def resolve_all(opponents: Sequence, registry: Registry | None = None) -> list[Program]:
    reg = registry or DEFAULT_REGISTRY
    return [reg.resolve(o) for o in opponents]


class LiveCeer(Ceer):
    """The current state of a construction's ceer, as a Ceer.

    Declared static: it only changes when the construction acts, and the
    scheduler rechecks every requirement after any action.
    """

    static = True

    def __init__(self, ctx: Context, l: int):
        self.ctx = ctx
        self.l = l
        self.label = ctx.labels[l]

    def key(self, s: int, x: int) -> Hashable:
        return self.ctx.parts[self.l].find(x)


def priority_order(entries: Sequence[tuple[tuple, Requirement]]) -> list[Requirement]:
    """Sort (key, requirement) entries by key; keys start with the requirement's level."""
    return [req for _, req in sorted(entries, key=lambda e: e[0])]


def partition_of(part: StagedPartition, xs: Sequence[int]) -> list[tuple[int, ...]]:
    """The partition a ceer induces on the listed numbers, as sorted index blocks."""
    blocks: dict[int, list[int]] = {}
    for i, x in enumerate(xs):
        blocks.setdefault(part.find(x), []).append(i)
    return sorted(tuple(b) for b in blocks.values())


def ceer_partition(E: Ceer, s: int, bound: int) -> list[tuple[int, ...]]:
    blocks: dict[Hashable, list[int]] = {}
    for x in range(bound):
        blocks.setdefault(E.key(s, x), []).append(x)
    return sorted(tuple(b) for b in blocks.values())


# ---------------------------------------------------------------- results

@dataclass
class ConstructionResult:
    name: str
    ceers: list[PartitionCeer]
    trace: ConstructionTrace
    ctx: Context
    requirements: list[Requirement]
    stages: int
    extras: dict = field(default_factory=dict)

    def audit(self) -> AuditReport:
        return audit(self.trace, self.requirements, ctx=self.ctx)

    def of_kind(self, kind: str) -> list[Requirement]:
        return [r for r in self.requirements if r.kind == kind]


def execute(name: str, requirements: Sequence[Requirement], ceer_count: int, stages: int,
            hooks: Sequence = (), labels: Sequence[str] | None = None, step_budget: int = 10**5,
            seed_universe: int = 0, sets: dict | None = None, extras: dict | None = None,
            before: Callable[[Context], None] | None = None,
            after: Sequence[Callable[[Context, int], None]] = ()) -> ConstructionResult:
    sched = Scheduler(requirements, ceer_count, hooks, sets=sets, labels=labels,
                      step_budget=step_budget, seed_universe=seed_universe, after=after)
    if before is not None:
        before(sched.ctx)
    ceers, trace = sched.run(stages)
    return ConstructionResult(name, ceers, trace, sched.ctx, list(requirements), stages, extras or {})


# ---------------------------------------------------------------- coding hooks

class CodeIntoColumn(StageHook):
    """Odd stages 2t+1 copy A at stage t onto column zero of the listed ceers.

    Only <0, x> with x below ``bound`` are coded.
    """

    def __init__(self, A: Ceer, ceers: Sequence[int], bound: int = 32, place=None):
        self.A = A
        self.targets = list(ceers)
        self.bound = bound
        self.place = place or (lambda x: x * (x + 1) // 2 + x)  # pair(0, x)
        self.last_source_stage = -1
        self._last_blocks = None

    def __call__(self, ctx: Context, s: int) -> bool:
        if s % 2 == 0:
            return False
        t = (s - 1) // 2
        self.last_source_stage = t
        first: dict[Hashable, int] = {}
        merges = []
        for x in range(self.bound):
            rep = first.setdefault(self.A.key(t, x), x)
            if rep != x:
                merges.append((rep, x))
        if merges != self._last_blocks:
            self._last_blocks = merges
            for l in self.targets:
                for a, b in merges:
                    ctx.code(l, self.place(a), self.place(b))
        return True

    def fidelity(self, ctx: Context) -> dict[int, bool]:
        """Column partition of each target equals A's at the last coded stage."""
        want = ceer_partition(self.A, max(self.last_source_stage, 0), self.bound)
        cells = [self.place(x) for x in range(self.bound)]
        return {l: partition_of(ctx.parts[l], cells) == want for l in self.targets}


# ---------------------------------------------------------------- P: hit the class of j

class HitClass(Requirement):
    """If W meets infinitely many classes, W meets [j]: merge some x in W with j.

    ``avoid`` names a set whose classes are not used as witnesses;
    ``least_only`` makes the requirement vacuous once j is not least in its class.
    """

    kind = "P"
    injurable = False

    def __init__(self, name: str, ceer: int, W: CeSet, j: int, avoid: str | None = None,
                 least_only: bool = False):
        super().__init__(name, ceer)
        self.W = W
        self.j = j
        self.avoid = avoid
        self.least_only = least_only
        self.done = False
        self.how = ""
        self._seen: list[int] = []
        self._upto = -1

    def _extend(self, s: int) -> None:
        while self._upto < s:
            self._upto += 1
            self._seen.extend(self.W.new_at(self._upto))

    def attend(self, ctx: Context, s: int) -> bool:
        if self.done:
            self.wake = NEVER
            return False
        l, j = self.ceer, self.j
        part = ctx.parts[l]
        if self.least_only and part.class_of(j)[0] != j:
            self.done, self.how, self.wake = True, "vacuous", NEVER
            return False
        if any(self.W.contains(s, y) for y in part.class_of(j)):
            self.done, self.how, self.wake = True, "met", NEVER
            return False
        self._extend(s)
        keep = []
        chosen = None
        for x in self._seen:
            if self.avoid is not None and ctx.in_set_class(l, x, self.avoid):
                continue
            keep.append(x)
            if chosen is None and ctx.blocking(self.rank, l, x, j) is None:
                chosen = x
        self._seen = keep
        if chosen is None:
            self.wake = next_entry_stage(self.W, s)
            return False
        ctx.collapse(self, l, chosen, j)
        self.params["x"] = chosen
        self.done, self.how, self.state = True, "acted", ACTED_SATISFIED
        self.wake = NEVER
        return True

    def verify(self, ctx: Context) -> str | None:
        if self.how != "acted":
            return None
        return "" if ctx.eq(self.ceer, self.params["x"], self.j) else "witness separated from j"


# ---------------------------------------------------------------- Q: direct diagonalization

class DirectDiagonal(Requirement):
    """phi is not a reduction of E_src to E_dst: fresh x, y kept apart, merged on demand."""

    kind = "Q"

    def __init__(self, name: str, src: int, dst: int, opponent: Program,
                 avoid: Callable[[int], bool] | None = None):
        super().__init__(name, src)
        self.src, self.dst = src, dst
        self.opponent = opponent
        self.avoid = avoid
        self.outcome = ""

    def reset(self) -> None:
        super().reset()
        self.outcome = ""

    def attend(self, ctx: Context, s: int) -> bool:
        if self.state == INITIALIZED:
            x = ctx.fresh(self, "x", self.avoid)
            y = ctx.fresh(self, "y", self.avoid)
            ctx.restrain(self, PairKeepApart(x, y, self.src))
            self.state = WAITING
            return True
        if self.outcome:
            self.wake = NEVER
            return False
        x, y = self.params["x"], self.params["y"]
        cx, cy = ctx.converged(self.opponent, x, s), ctx.converged(self.opponent, y, s)
        if cx is None or cy is None:
            self.wake = max(ctx.convergence_stage(self.opponent, x),
                            ctx.convergence_stage(self.opponent, y))
            return False
        fx, fy = cx.value, cy.value
        if ctx.eq(self.dst, fx, fy):
            self.outcome = "images equivalent"
            self.wake = NEVER
            return False
        if ctx.blocking(self.rank, self.src, x, y) is not None:
            self.wake = NEVER
            return False
        ctx.collapse(self, self.src, x, y)
        ctx.restrain(self, PairKeepApart(fx, fy, self.dst))
        self.params.update(fx=fx, fy=fy)
        self.outcome = "collapsed"
        self.state = ACTED_SATISFIED
        return True

    def verify(self, ctx: Context) -> str | None:
        if not self.outcome:
            return None
        x, y = self.params["x"], self.params["y"]
        fx = self.opponent(x, ctx.step_budget)
        fy = self.opponent(y, ctx.step_budget)
        left = ctx.eq(self.src, x, y)
        right = ctx.eq(self.dst, fx, fy)
        return "" if left != right else f"no mismatch on {x},{y}"


# ---------------------------------------------------------------- T: finitary diagonalization

class FinitaryDiagonal(Requirement):
    """phi is not a reduction of E_ceer to ``target``: copy T onto fresh a_0, a_1, ...

    With ``escape`` set (a set id), the coded variant also diagonalizes
    directly as soon as two images are not both in the classes of that set.
    """

    kind = "T"

    def __init__(self, name: str, ceer: int, opponent: Program, target: Ceer | int, T: Ceer,
                 avoid: Callable[[int], bool] | None = None, escape: str | None = None,
                 kind: str | None = None):
        super().__init__(name, ceer)
        self.opponent = opponent
        self.target = target
        self.T = T
        self.avoid = avoid
        self.escape = escape
        if kind:
            self.kind = kind
        self.a: list[int] = []
        self.rounds = 0
        self.outcome = ""
        self.escape_pair: tuple[int, int] | None = None

    def reset(self) -> None:
        super().reset()
        self.a = []
        self.rounds = 0
        self.outcome = ""
        self.escape_pair = None

    def _target(self, ctx: Context) -> Ceer:
        if isinstance(self.target, int):
            return LiveCeer(ctx, self.target)
        return self.target

    def _appoint(self, ctx: Context) -> None:
        k = len(self.a)
        x = ctx.fresh(self, f"a{k}", self.avoid)
        for prev in self.a:
            ctx.restrain(self, PairKeepApart(prev, x, self.ceer))
        if self.escape:
            ctx.restrain(self, KeepFromSet(x, self.ceer, self.escape))
        self.a.append(x)

    def attend(self, ctx: Context, s: int) -> bool:
        l = self.ceer
        if self.state == INITIALIZED:
            self._appoint(ctx)
            self._appoint(ctx)
            self.state = sub_outcome(1)
            return True
        if self.outcome:
            self.wake = NEVER
            return False
        if self.escape:
            acted = self._escape(ctx, s)
            if acted is not None:
                return acted
        step = finitary_diagonalization_step(self.a, lambda u, v: ctx.eq(l, u, v), self.T,
                                             self.opponent, self._target(ctx), s, ctx.step_budget)
        if not step.act:
            self.wake = step.wake
            return False
        for u, v in step.pairs:
            if not ctx.eq(l, u, v):
                ctx.collapse(self, l, u, v)
        self._appoint(ctx)
        self.rounds += 1
        self.state = sub_outcome(len(self.a) - 1)
        return True

    def _escape(self, ctx: Context, s: int) -> bool | None:
        dst = self.target
        l = self.ceer
        images = {}
        for i, a in enumerate(self.a):
            c = ctx.converged(self.opponent, a, s)
            if c is not None:
                images[i] = c.value
        idx = sorted(images)
        for p, i in enumerate(idx):
            for j in idx[p + 1:]:
                fi, fj = images[i], images[j]
                if ctx.in_set_class(dst, fi, self.escape) and ctx.in_set_class(dst, fj, self.escape):
                    continue
                if ctx.eq(l, self.a[i], self.a[j]):
                    continue
                self.escape_pair = (i, j)
                if ctx.eq(dst, fi, fj):
                    self.outcome = "images equivalent"
                    self.wake = NEVER
                    return False
                ctx.collapse(self, l, self.a[i], self.a[j])
                ctx.restrain(self, PairKeepApart(fi, fj, dst))
                for f in (fi, fj):
                    if not ctx.in_set_class(dst, f, self.escape):
                        ctx.restrain(self, KeepFromSet(f, dst, self.escape))
                self.outcome = "collapsed"
                self.state = ACTED_SATISFIED
                return True
        return None

    def verify(self, ctx: Context) -> str | None:
        if self.state == INITIALIZED:
            return None
        if self.outcome:
            i, j = self.escape_pair
            fi = self.opponent(self.a[i], ctx.step_budget)
            fj = self.opponent(self.a[j], ctx.step_budget)
            left = ctx.eq(self.ceer, self.a[i], self.a[j])
            right = ctx.eq(self.target, fi, fj)
            return "" if left != right else f"no mismatch on a{i},a{j}"
        k = len(self.a) - 1
        return "" if self.rounds == k - 1 else f"{self.rounds} rounds at sub-outcome {k}"


# ---------------------------------------------------------------- S: inseparability

class Inseparable(Requirement):
    """Sets U, V (meant as complements) do not separate [i] and [j]."""

    kind = "S"

    def __init__(self, name: str, ceer: int, i: int, j: int, U: CeSet, V: CeSet,
                 avoid: Callable[[int], bool] | None = None, escape: str | None = COLUMN_ZERO):
        super().__init__(name, ceer)
        self.i, self.j = i, j
        self.U, self.V = U, V
        self.avoid = avoid
        self.escape = escape
        self.merged_with: int | None = None

    def reset(self) -> None:
        super().reset()
        self.merged_with = None

    def attend(self, ctx: Context, s: int) -> bool:
        l = self.ceer
        if ctx.eq(l, self.i, self.j) or self.merged_with is not None:
            self.wake = NEVER
            return False
        if self.state == INITIALIZED:
            x = ctx.fresh(self, "x", self.avoid)
            ctx.restrain(self, PairKeepApart(self.i, x, l))
            ctx.restrain(self, PairKeepApart(self.j, x, l))
            if self.escape:
                ctx.restrain(self, KeepFromSet(x, l, self.escape))
            self.state = WAITING
            return True
        x = self.params["x"]
        for S, partner in ((self.U, self.j), (self.V, self.i)):
            if S.contains(s, x):
                if ctx.blocking(self.rank, l, x, partner) is not None:
                    continue
                ctx.collapse(self, l, x, partner)
                self.merged_with = partner
                self.state = ACTED_SATISFIED
                return True
        eu, ev = self.U.entry(x), self.V.entry(x)
        waits = [e for e in (eu, ev) if e is not None and e > s]
        self.wake = min(waits) if waits else (NEVER if eu is None and ev is None else s + 1)
        return False

    def verify(self, ctx: Context) -> str | None:
        if self.merged_with is None:
            return None
        return "" if ctx.eq(self.ceer, self.params["x"], self.merged_with) else "parameter separated"


# ---------------------------------------------------------------- F and SF

class FreezeRequirement(Requirement):
    """The class of i stays finite: freeze it against lower priority once for all."""

    kind = "F"
    injurable = False

    def __init__(self, name: str, ceer: int, i: int):
        super().__init__(name, ceer)
        self.i = i

    def setup(self, ctx: Context) -> None:
        ctx.restrain(self, FreezeClass(self.i, self.ceer))

    def attend(self, ctx: Context, s: int) -> bool:
        self.wake = NEVER
        return False


class SelfHit(Requirement):
    """If phi reduces E to itself then im(phi) meets [j].

    Looks for n with [phi^n(j)] not frozen by a higher requirement and
    merges phi^n(j) with some phi^(n+1)(x) outside the avoided set.
    """

    kind = "SF"
    injurable = False

    def __init__(self, name: str, ceer: int, opponent: Program, j: int, avoid: str = COLUMN_ZERO,
                 depth: int = 4, xbound: int = 48):
        super().__init__(name, ceer)
        self.opponent = opponent
        self.j = j
        self.avoid = avoid
        self.depth = depth
        self.xbound = xbound
        self.done = False
        self.how = ""
        self._iter: dict[tuple[int, int], tuple[int, float]] = {}

    def _power(self, n: int, x: int) -> tuple[int, float]:
        """(phi^n(x), stage at which the whole chain has converged)."""
        key = (n, x)
        if key in self._iter:
            return self._iter[key]
        if n == 0:
            out = (x, 0)
        else:
            v, st = self._power(n - 1, x)
            if st == NEVER:
                out = (v, NEVER)
            else:
                c = self.opponent.evaluate(v, 10**5)
                out = (c.value, st + c.steps) if isinstance(c, Converged) else (v, NEVER)
        self._iter[key] = out
        return out

    def attend(self, ctx: Context, s: int) -> bool:
        if self.done:
            self.wake = NEVER
            return False
        l, j = self.ceer, self.j
        part = ctx.parts[l]
        if part.class_of(j)[0] != j:
            self.done, self.how, self.wake = True, "vacuous", NEVER
            return False
        rj = part.find(j)
        wake = NEVER
        for x in range(min(s, self.xbound) + 1):
            v, st = self._power(1, x)
            if st <= s and part.find(v) == rj:
                self.done, self.how, self.wake = True, "met", NEVER
                return False
        for n in range(self.depth):
            target, st = self._power(n, j)
            if st > s:
                wake = min(wake, st)
                break
            frozen = any(isinstance(r, FreezeClass) and r.ceer == l and part.find(r.a) == part.find(target)
                         for owner, rs in ctx.restraints.items() if owner < self.rank for r in rs)
            if frozen:
                continue
            for x in range(self.xbound):
                y, sty = self._power(n + 1, x)
                if sty > s:
                    wake = min(wake, sty)
                    continue
                if part.find(y) == part.find(target) or ctx.in_set_class(l, y, self.avoid):
                    continue
                if ctx.blocking(self.rank, l, target, y) is None:
                    ctx.collapse(self, l, target, y)
                    self.params.update(n=n, x=x, target=target, image=y)
                    self.done, self.how, self.state = True, "acted", ACTED_SATISFIED
                    return True
            break
        self.wake = wake
        return False

    def verify(self, ctx: Context) -> str | None:
        if self.how != "acted":
            return None
        return "" if ctx.eq(self.ceer, self.params["target"], self.params["image"]) else "merge lost"


__all__ = [
    "COLUMN_ZERO", "in_column_zero", "next_entry_stage", "domains", "resolve_all", "LiveCeer",
    "priority_order", "partition_of", "ceer_partition", "ConstructionResult", "execute",
    "CodeIntoColumn", "HitClass", "DirectDiagonal", "FinitaryDiagonal", "Inseparable",
    "FreezeRequirement", "SelfHit", "universal_ceer", "ExternProgram",
]

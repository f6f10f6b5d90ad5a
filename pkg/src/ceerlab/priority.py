"""A finite-injury scheduler with restraints, initialization and an event trace.

Requirements are listed in priority order (index = rank, 0 is highest).
At each acting stage the least requirement that requires attention acts,
and every lower-priority requirement that can be injured is initialized.
Everything the scheduler does is recorded as an event; ``audit`` replays
the trace and checks the bookkeeping independently of the live run.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence, Union

from .algebra import big_oplus
from .ceer import Ceer, IndexedCeer, PartitionCeer
from .machine import Converged, PredicateSet, Program, Registry, unpair, w
from .partition import StagedPartition

NEVER = float("inf")

EVENT_KINDS = ("Collapse", "RestraintSet", "Initialize", "ParameterChoice",
               "CodingMerge", "AuxCollapse")
MERGE_KINDS = ("Collapse", "AuxCollapse", "CodingMerge")
CODING_RANK = -1


# ---------------------------------------------------------------- restraints

@dataclass(frozen=True)
class PairKeepApart:
    """The classes of a and b may not be merged with each other."""
    a: int
    b: int
    ceer: int

    def payload(self) -> tuple:
        return ("pair", self.ceer, self.a, self.b)


@dataclass(frozen=True)
class KeepFromSet:
    """The class of a may not be merged with a class meeting the named set."""
    a: int
    ceer: int
    set_id: str

    def payload(self) -> tuple:
        return ("set", self.ceer, self.a, self.set_id)


@dataclass(frozen=True)
class FreezeClass:
    """The class of a may not be merged with anything. Never cancelled."""
    a: int
    ceer: int

    def payload(self) -> tuple:
        return ("freeze", self.ceer, self.a)


@dataclass(frozen=True)
class ColumnBlock:
    """No merge of two classes that both meet the listed columns.

    Column restraints of all higher-priority owners act jointly: a merge is
    blocked when each side meets some restrained column, not necessarily
    the same owner's.
    """
    columns: tuple
    ceer: int

    def payload(self) -> tuple:
        return ("cols", self.ceer, *self.columns)


Restraint = Union[PairKeepApart, KeepFromSet, FreezeClass, ColumnBlock]


def restraint_from_payload(payload: Sequence) -> Restraint:
    tag = payload[0]
    if tag == "pair":
        return PairKeepApart(int(payload[2]), int(payload[3]), int(payload[1]))
    if tag == "set":
        return KeepFromSet(int(payload[2]), int(payload[1]), str(payload[3]))
    if tag == "freeze":
        return FreezeClass(int(payload[2]), int(payload[1]))
    if tag == "cols":
        return ColumnBlock(tuple(int(c) for c in payload[2:]), int(payload[1]))
    raise ValueError(f"unknown restraint payload {payload!r}")


def protects(r: Restraint, part: StagedPartition, u: int, v: int,
             sets: dict[str, Callable[[int], bool]]) -> bool:
    """Would merging the current classes of u and v break restraint r?"""
    ru, rv = part.find(u), part.find(v)
    if ru == rv:
        return False
    if isinstance(r, ColumnBlock):
        return columns_protect(set(r.columns), part, u, v)
    if isinstance(r, PairKeepApart):
        return {ru, rv} == {part.find(r.a), part.find(r.b)}
    ra = part.find(r.a)
    if isinstance(r, FreezeClass):
        return ra in (ru, rv)
    if ra == ru:
        other = v
    elif ra == rv:
        other = u
    else:
        return False
    member = sets[r.set_id]
    # once a legal merge has put the set into a's class there is nothing left to keep
    if any(member(y) for y in part.class_of(r.a)):
        return False
    return any(member(y) for y in part.class_of(other))


def column_of(x: int) -> int:
    return unpair(x)[0]


def columns_protect(columns: set, part: StagedPartition, u: int, v: int) -> bool:
    """Both classes meet the restrained columns (and are distinct)."""
    if not columns or part.eq(u, v):
        return False
    return all(any(column_of(y) in columns for y in part.class_of(z)) for z in (u, v))


def joint_columns(restraints: dict[int, list], below: float, ceer: int) -> set:
    cols: set = set()
    for owner, rs in restraints.items():
        if owner < below:
            for r in rs:
                if isinstance(r, ColumnBlock) and r.ceer == ceer:
                    cols.update(r.columns)
    return cols


# ---------------------------------------------------------------- states

@dataclass(frozen=True)
class State:
    name: str
    k: int | None = None

    def __str__(self) -> str:
        return self.name if self.k is None else f"{self.name}({self.k})"


INITIALIZED = State("Initialized")
WAITING = State("Waiting")
ACTED_SATISFIED = State("ActedSatisfied")


def sub_outcome(k: int) -> State:
    return State("SubOutcome", k)


# ---------------------------------------------------------------- trace

@dataclass(frozen=True)
class Event:
    stage: int
    rank: int
    kind: str
    payload: tuple

    def line(self) -> str:
        return " ".join([str(self.stage), str(self.rank), self.kind, *map(str, self.payload)])


class ConstructionTrace:
    def __init__(self, events: Iterable[Event] = ()):
        self.events: list[Event] = list(events)

    def __len__(self) -> int:
        return len(self.events)

    def __iter__(self):
        return iter(self.events)

    def of_kind(self, kind: str) -> list[Event]:
        return [e for e in self.events if e.kind == kind]

    def by_rank(self, rank: int) -> list[Event]:
        return [e for e in self.events if e.rank == rank]

    def text(self) -> str:
        return "".join(e.line() + "\n" for e in self.events)


def _atom(tok: str):
    return int(tok) if tok.lstrip("-").isdigit() else tok


def parse_trace(text: str) -> ConstructionTrace:
    events = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) < 3 or parts[2] not in EVENT_KINDS:
            raise ValueError(f"trace line {lineno}: bad record {line!r}")
        events.append(Event(int(parts[0]), int(parts[1]), parts[2],
                            tuple(_atom(p) for p in parts[3:])))
    return ConstructionTrace(events)


# ---------------------------------------------------------------- requirements

class Requirement:
    """Base strategy. Subclasses implement ``attend``.

    ``attend(ctx, s)`` acts and returns True when the requirement requires
    attention at s; otherwise it returns False and may raise ``self.wake``
    to the first stage at which it could need attention again without any
    change to the ceers or restraints.
    """

    kind = "R"
    # Requirements that are never initialized (satisfied once for all).
    injurable = True

    def __init__(self, name: str, ceer: int = 0):
        self.name = name
        self.ceer = ceer
        self.rank = -1
        self.params: dict[str, object] = {}
        self.state = INITIALIZED if self.injurable else WAITING
        self.wake: float = 0
        self.actions = 0

    def setup(self, ctx: "Context") -> None:
        """Stage-0 hook (permanent restraints)."""

    def attend(self, ctx: "Context", s: int) -> bool:
        raise NotImplementedError

    def reset(self) -> None:
        self.params = {}
        self.state = INITIALIZED

    def verify(self, ctx: "Context") -> str | None:
        """Final-stage self-check: None (no claim), "" (ok) or a failure message."""
        return None

    def __repr__(self) -> str:
        return f"<{self.kind} {self.name} rank={self.rank} {self.state}>"


# ---------------------------------------------------------------- context

class Context:
    """Live construction state shared by the scheduler and the strategies."""

    def __init__(self, ceer_count: int, sets: dict[str, Callable[[int], bool]] | None = None,
                 labels: Sequence[str] | None = None, step_budget: int = 10**5,
                 seed_universe: int = 0):
        labels = list(labels) if labels else [f"E{l}" for l in range(ceer_count)]
        self.parts = [StagedPartition(lbl) for lbl in labels]
        self.labels = labels
        self.sets = dict(sets or {})
        self.step_budget = step_budget
        self.trace = ConstructionTrace()
        self.stage = 0
        self.epoch = 0
        # Numbers below the seed universe are treated as already mentioned.
        self.mentioned = seed_universe - 1
        self.restraints: dict[int, list[Restraint]] = {}
        self.param_owner: dict[int, tuple[int, str]] = {}
        self.requirements: list[Requirement] = []
        self.column_restraints = False

    # -- queries

    def eq(self, l: int, a: int, b: int) -> bool:
        return self.parts[l].eq(a, b)

    def class_of(self, l: int, x: int) -> list[int]:
        return self.parts[l].class_of(x)

    def in_set_class(self, l: int, x: int, set_id: str) -> bool:
        member = self.sets[set_id]
        return any(member(y) for y in self.parts[l].class_of(x))

    def blocking(self, rank: int, l: int, u: int, v: int) -> Restraint | None:
        """The first restraint of rank < ``rank`` forbidding an E_l-merge of u, v."""
        part = self.parts[l]
        for owner in sorted(self.restraints):
            if owner >= rank:
                break
            for r in self.restraints[owner]:
                if r.ceer == l and not isinstance(r, ColumnBlock) and protects(r, part, u, v, self.sets):
                    return r
        cols = joint_columns(self.restraints, rank, l) if self.column_restraints else set()
        if columns_protect(cols, part, u, v):
            return ColumnBlock(tuple(sorted(cols)), l)
        return None

    def converged(self, prog: Program, x: int, s: int) -> Converged | None:
        out = prog.evaluate(x, min(s, self.step_budget))
        return out if isinstance(out, Converged) else None

    def convergence_stage(self, prog: Program, x: int) -> float:
        out = prog.evaluate(x, self.step_budget)
        return out.steps if isinstance(out, Converged) else NEVER

    # -- events

    def _emit(self, rank: int, kind: str, payload: tuple) -> None:
        self.trace.events.append(Event(self.stage, rank, kind, payload))
        for p in payload:
            if isinstance(p, int) and p > self.mentioned:
                self.mentioned = p
        self.epoch += 1

    def collapse(self, req: Requirement, l: int, a: int, b: int, aux: bool = False) -> bool:
        if self.parts[l].eq(a, b):
            return False
        blocked = self.blocking(req.rank, l, a, b)
        if blocked is not None:
            raise RuntimeError(f"{req.name} tried to break {blocked}")
        self.parts[l].merge(self.stage, a, b)
        self._emit(req.rank, "AuxCollapse" if aux else "Collapse", (l, a, b))
        return True

    def code(self, l: int, a: int, b: int, rank: int = CODING_RANK) -> bool:
        """A coding merge performed by a stage hook.

        With the default rank it sits outside the priority order; otherwise
        it is attributed to the requirement of that rank.
        """
        if not self.parts[l].merge(self.stage, a, b):
            return False
        self._emit(rank, "CodingMerge", (l, a, b))
        return True

    def restrain(self, req: Requirement, r: Restraint) -> None:
        self.restraints.setdefault(req.rank, []).append(r)
        if isinstance(r, ColumnBlock):
            self.column_restraints = True
        self._emit(req.rank, "RestraintSet", r.payload())

    def fresh(self, req: Requirement, name: str,
              avoid: Callable[[int], bool] | None = None) -> int:
        """A new number: above everything mentioned so far, skipping ``avoid``."""
        x = self.mentioned + 1
        while avoid is not None and avoid(x):
            x += 1
        for part in self.parts:
            part.mention(x)
        self.param_owner[x] = (req.rank, name)
        req.params[name] = x
        self._emit(req.rank, "ParameterChoice", (name, x))
        return x

    def initialize(self, req: Requirement, by: int) -> None:
        kept = [r for r in self.restraints.get(req.rank, []) if isinstance(r, FreezeClass)]
        had = len(self.restraints.get(req.rank, [])) != len(kept)
        if not (req.params or had or req.state != INITIALIZED):
            return
        if kept:
            self.restraints[req.rank] = kept
        else:
            self.restraints.pop(req.rank, None)
        req.reset()
        self._emit(req.rank, "Initialize", (by,))

    def ceers(self) -> list[PartitionCeer]:
        return [PartitionCeer(p) for p in self.parts]


# ---------------------------------------------------------------- hooks

class StageHook:
    """Runs at the start of each stage; returning True consumes the stage."""

    def __call__(self, ctx: Context, s: int) -> bool:
        return False


class ParityCoding(StageHook):
    """Odd stages run ``code(ctx, s)``; even stages are left for requirements."""

    def __init__(self, code: Callable[[Context, int], None]):
        self.code = code

    def __call__(self, ctx: Context, s: int) -> bool:
        if s % 2 == 1:
            self.code(ctx, s)
            return True
        return False


# ---------------------------------------------------------------- scheduler

class Scheduler:
    def __init__(self, requirements: Sequence[Requirement], ceer_count: int = 1,
                 hooks: Sequence[Callable[[Context, int], bool]] = (),
                 sets: dict[str, Callable[[int], bool]] | None = None,
                 labels: Sequence[str] | None = None, step_budget: int = 10**5,
                 seed_universe: int = 0, after: Sequence[Callable[[Context, int], None]] = ()):
        self.ctx = Context(ceer_count, sets, labels, step_budget, seed_universe)
        self.after = list(after)
        self.requirements = list(requirements)
        self.ctx.requirements = self.requirements
        for rank, req in enumerate(self.requirements):
            req.rank = rank
        self.hooks = list(hooks)
        self._heap: list[tuple[float, int]] = []
        self._seen_epoch = -1
        ctx = self.ctx
        ctx.stage = 0
        for req in self.requirements:
            req.setup(ctx)

    def step(self, s: int) -> None:
        ctx = self.ctx
        ctx.stage = s
        consumed = False
        for hook in self.hooks:
            consumed = bool(hook(ctx, s)) or consumed
        if not consumed:
            self._dispatch(s)
        for hook in self.after:
            hook(ctx, s)

    def _dispatch(self, s: int) -> None:
        ctx = self.ctx
        if ctx.epoch != self._seen_epoch:
            candidates = range(len(self.requirements))
            self._heap = []
        else:
            due = set()
            while self._heap and self._heap[0][0] <= s:
                _, rank = heapq.heappop(self._heap)
                if self.requirements[rank].wake <= s:
                    due.add(rank)
            candidates = sorted(due)
        self._seen_epoch = ctx.epoch
        for rank in candidates:
            req = self.requirements[rank]
            req.wake = s + 1
            if req.attend(ctx, s):
                req.actions += 1
                for lower in self.requirements[rank + 1:]:
                    if lower.injurable:
                        ctx.initialize(lower, rank)
                return
            heapq.heappush(self._heap, (req.wake, rank))

    def run(self, stages: int) -> tuple[list[PartitionCeer], ConstructionTrace]:
        for s in range(self.ctx.stage + 1, stages + 1):
            self.step(s)
        self.ctx.stage = max(self.ctx.stage, stages)
        return self.ctx.ceers(), self.ctx.trace


def run(requirements: Sequence[Requirement], hooks: Sequence = (), stages: int = 0,
        ceer_count: int = 1, **kwargs) -> tuple[list[PartitionCeer], ConstructionTrace]:
    return Scheduler(requirements, ceer_count, hooks, **kwargs).run(stages)


# ---------------------------------------------------------------- finitary diagonalization

def universal_ceer(registry: Registry | None = None, step_cap: int = 256,
                   horizon: int = 4096) -> Ceer:
    """The join of all indexed ceers: <z, x> ~ <z, y> iff x R_z y.

    Desk-scale stand-in: column z only sees pair codes below ``horizon``
    whose programs halt within ``step_cap`` steps.
    """
    def member(z: int) -> Ceer:
        W = w(z, registry, step_cap)
        capped = PredicateSet(lambda m: W.entry(m) if m < horizon else None, W.label)
        return IndexedCeer(z, capped)

    return big_oplus(member, "R")


@dataclass
class DiagStep:
    act: bool
    pairs: list[tuple[int, int]] = field(default_factory=list)
    reason: str = ""
    wake: float = NEVER


def finitary_diagonalization_step(params: Sequence[int], same: Callable[[int, int], bool],
                                  T: Ceer, opponent: Program, target: Ceer, stage: int,
                                  step_budget: int = 10**5) -> DiagStep:
    """One check of the parameter-copying strategy against ``opponent``.

    With parameters a_0..a_k the strategy emerges from waiting when the
    opponent converges on every a_i and a_i ~ a_j iff the images are
    target-equivalent; the action then merges a_i, a_j whenever i T j.
    """
    images = []
    for a in params:
        out = opponent.evaluate(a, min(stage, step_budget))
        if not isinstance(out, Converged):
            later = opponent.evaluate(a, step_budget)
            wake = later.steps if isinstance(later, Converged) else NEVER
            return DiagStep(False, reason=f"diverges {a}", wake=wake)
        images.append(out.value)
    n = len(params)
    for i in range(n):
        for j in range(i + 1, n):
            if same(params[i], params[j]) != target.eq_at(stage, images[i], images[j]):
                wake = NEVER if target.static else stage + 1
                return DiagStep(False, reason=f"mismatch {i} {j}", wake=wake)
    pairs = [(params[i], params[j]) for i in range(n) for j in range(i + 1, n)
             if T.eq_at(stage, i, j)]
    return DiagStep(True, pairs)


# ---------------------------------------------------------------- audit

@dataclass
class RequirementReport:
    rank: int
    name: str
    kind: str
    initializations: int = 0
    actions: int = 0
    state: str = ""
    check: str | None = None


@dataclass
class AuditReport:
    rows: list[RequirementReport]
    violations: list[str] = field(default_factory=list)
    coding_conflicts: list[str] = field(default_factory=list)
    injury_failures: list[str] = field(default_factory=list)
    newness_failures: list[str] = field(default_factory=list)
    check_failures: list[str] = field(default_factory=list)

    @property
    def problems(self) -> int:
        return (len(self.violations) + len(self.coding_conflicts) + len(self.injury_failures)
                + len(self.newness_failures) + len(self.check_failures))

    @property
    def ok(self) -> bool:
        return self.problems == 0

    def text(self) -> str:
        out = [f"audit: {len(self.violations)} violations, "
               f"{len(self.coding_conflicts)} coding conflicts, "
               f"{len(self.injury_failures)} injury failures, "
               f"{len(self.newness_failures)} newness failures, "
               f"{len(self.check_failures)} check failures"]
        for msg in (self.violations + self.coding_conflicts + self.injury_failures
                    + self.newness_failures + self.check_failures):
            out.append(f"  ! {msg}")
        for row in self.rows:
            out.append(f"[{row.rank}] {row.kind} {row.name}")
            out.append(f"  initializations {row.initializations}")
            out.append(f"  actions {row.actions}")
            out.append(f"  state {row.state}")
            if row.check is not None:
                out.append(f"  check {'ok' if row.check == '' else row.check}")
        return "\n".join(out) + "\n"


def audit(trace: ConstructionTrace, requirements: Sequence[Requirement] = (),
          sets: dict[str, Callable[[int], bool]] | None = None,
          ctx: Context | None = None, seed_universe: int = 0) -> AuditReport:
    """Replay the trace and check restraint soundness, injury bounds and newness.

    ``requirements`` supplies names and, when ``ctx`` is the live final
    context, each requirement's own final-stage check.
    """
    sets = dict(sets or (ctx.sets if ctx else {}))
    parts: dict[int, StagedPartition] = {}
    active: dict[int, list[Restraint]] = {}
    inits: dict[int, int] = {}
    action_stages: dict[int, set[int]] = {}
    report = AuditReport(rows=[])
    mentioned = seed_universe - 1

    def part(l: int) -> StagedPartition:
        if l not in parts:
            parts[l] = StagedPartition(f"E{l}")
        return parts[l]

    for ev in trace:
        where = f"stage {ev.stage} rank {ev.rank} {ev.kind} {' '.join(map(str, ev.payload))}"
        if ev.kind in MERGE_KINDS:
            l, a, b = ev.payload
            p = part(l)
            # Rank -1 coding sits above the priority order; freezes bind requirements only.
            free_coding = ev.kind == "CodingMerge" and ev.rank < 0
            bucket = report.coding_conflicts if ev.kind == "CodingMerge" else report.violations
            for owner, rs in active.items():
                if not free_coding and owner >= ev.rank:
                    continue
                for r in rs:
                    if free_coding and isinstance(r, FreezeClass):
                        continue
                    if r.ceer == l and not isinstance(r, ColumnBlock) and protects(r, p, a, b, sets):
                        bucket.append(f"{where} breaks {r} of rank {owner}")
            cols = joint_columns(active, NEVER if free_coding else ev.rank, l)
            if columns_protect(cols, p, a, b):
                bucket.append(f"{where} merges two classes meeting restrained columns")
            p.merge(ev.stage, a, b)
        elif ev.kind == "RestraintSet":
            active.setdefault(ev.rank, []).append(restraint_from_payload(ev.payload))
        elif ev.kind == "Initialize":
            inits[ev.rank] = inits.get(ev.rank, 0) + 1
            active[ev.rank] = [r for r in active.get(ev.rank, []) if isinstance(r, FreezeClass)]
        elif ev.kind == "ParameterChoice":
            value = ev.payload[1]
            if value <= mentioned:
                report.newness_failures.append(f"{where} is not above {mentioned}")
        if ev.kind not in ("Initialize", "CodingMerge") and ev.rank >= 0:
            action_stages.setdefault(ev.rank, set()).add(ev.stage)
        for p in ev.payload:
            if isinstance(p, int) and p > mentioned:
                mentioned = p

    actions = {r: len(st) for r, st in action_stages.items()}
    ranks = sorted(set(inits) | set(actions) | {r.rank for r in requirements})
    above = 0
    prev = None
    for rank in ranks:
        if prev is not None:
            above += actions.get(prev, 0)
        prev = rank
        if inits.get(rank, 0) > above:
            report.injury_failures.append(
                f"rank {rank} initialized {inits[rank]} times but ranks above acted {above} times")

    by_rank = {r.rank: r for r in requirements}
    for rank in ranks:
        if rank < 0:
            continue
        req = by_rank.get(rank)
        row = RequirementReport(rank, req.name if req else f"#{rank}", req.kind if req else "?",
                                inits.get(rank, 0), actions.get(rank, 0),
                                str(req.state) if req else "")
        if req is not None and ctx is not None:
            row.check = req.verify(ctx)
            if row.check:
                report.check_failures.append(f"{req.name}: {row.check}")
        report.rows.append(row)
    return report


__all__ = [
    "PairKeepApart", "KeepFromSet", "FreezeClass", "ColumnBlock", "Restraint", "protects",
    "columns_protect", "State",
    "INITIALIZED", "WAITING", "ACTED_SATISFIED", "sub_outcome", "Event", "ConstructionTrace",
    "parse_trace", "Requirement", "Context", "StageHook", "ParityCoding", "Scheduler", "run",
    "universal_ceer", "DiagStep", "finitary_diagonalization_step", "audit", "AuditReport",
    "NEVER", "CODING_RANK",
]

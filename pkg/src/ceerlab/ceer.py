"""Ceers as stage-indexed class-key functions.

A ceer answers ``key(s, x)``: two numbers are equivalent at stage s iff
their keys agree. Keys let derived ceers (joins, quotients, jumps) be
evaluated lazily on the whole of omega without materializing merges.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Hashable, Iterable

from .machine import CeSet, ExternProgram, Program, Registry, DEFAULT_REGISTRY, pair, unpair, w
from .partition import StagedPartition

Decider = Callable[[int], bool]


class Ceer:
    label = "ceer"
    # True when the relation does not depend on the stage.
    static = False
    # Number of classes when known to be finite and fully decided.
    finite_classes: int | None = None

    def key(self, s: int, x: int) -> Hashable:
        raise NotImplementedError

    def eq_at(self, s: int, x: int, y: int) -> bool:
        return x == y or self.key(s, x) == self.key(s, y)

    def change_stages(self, s: int) -> Iterable[int]:
        """Stages <= s at which the relation may change."""
        return [0] if self.static else range(s + 1)

    def class_decider(self, x: int) -> Decider | None:
        """Membership test for [x] when the class is known computable."""
        return None

    def classes_at(self, s: int, bound: int) -> list[list[int]]:
        blocks: dict[Hashable, list[int]] = {}
        for x in range(bound):
            blocks.setdefault(self.key(s, x), []).append(x)
        return list(blocks.values())

    def approx(self, s: int, bound: int) -> StagedPartition:
        """Replay the relation on [0, bound) up to stage s as a merge log."""
        part = StagedPartition(self.label)
        if bound > 0:
            part.mention(bound - 1)
        for t in self.change_stages(s):
            first: dict[Hashable, int] = {}
            for x in range(bound):
                r = first.setdefault(self.key(t, x), x)
                if r != x and not part.eq(r, x):
                    part.merge(t, r, x)
        return part

    @property
    def decided(self) -> bool:
        return self.static and self.finite_classes is not None

    def __repr__(self) -> str:
        return f"<Ceer {self.label}>"


class KeyCeer(Ceer):
    def __init__(self, key_fn: Callable[[int, int], Hashable], label: str, static: bool = False,
                 decider: Callable[[int], Decider] | None = None,
                 finite_classes: int | None = None):
        self._key = key_fn
        self.label = label
        self.static = static
        self._decider = decider
        self.finite_classes = finite_classes

    def key(self, s: int, x: int) -> Hashable:
        return self._key(s, x)

    def class_decider(self, x: int) -> Decider | None:
        return self._decider(x) if self._decider else None


class PartitionCeer(Ceer):
    """A ceer backed by an explicit merge log (construction outputs, imports).

    After the last logged stage the relation is constant, so every class
    is decidable relative to the finished log.
    """

    def __init__(self, partition: StagedPartition, label: str | None = None):
        self.partition = partition
        self.label = label or partition.label

    def key(self, s: int, x: int) -> Hashable:
        return self.partition.find_at(s, x)

    def eq_at(self, s: int, x: int, y: int) -> bool:
        return self.partition.eq_at(s, x, y)

    def change_stages(self, s: int) -> Iterable[int]:
        return sorted({0} | {st for st, _, _ in self.partition.log_until(s)})

    def class_decider(self, x: int) -> Decider | None:
        part = self.partition
        root = part.find(x)
        return lambda y: part.find(y) == root


class LogCeer(Ceer):
    """A ceer whose merges are produced stage by stage by a generator hook."""

    def __init__(self, label: str):
        self.label = label
        self.partition = StagedPartition(label)
        self._done = -1

    def produce(self, t: int) -> Iterable[tuple[int, int]]:
        raise NotImplementedError

    def ensure(self, s: int) -> None:
        while self._done < s:
            self._done += 1
            for a, b in self.produce(self._done):
                self.partition.merge(self._done, a, b)

    def key(self, s: int, x: int) -> Hashable:
        self.ensure(s)
        return self.partition.find_at(s, x)

    def change_stages(self, s: int) -> Iterable[int]:
        self.ensure(s)
        return sorted({0} | {st for st, _, _ in self.partition.log_until(s)})


class IndexedCeer(LogCeer):
    """R_z: the equivalence closure of {unpair(m) : m in W_z}, stagewise."""

    def __init__(self, z: "int | str", W: CeSet, label: str | None = None):
        super().__init__(label or f"R[{z}]")
        self.z = z
        self.W = W

    def produce(self, t: int) -> Iterable[tuple[int, int]]:
        return [unpair(m) for m in self.W.new_at(t)]


# ---------------------------------------------------------------- constructors

def id_ceer() -> Ceer:
    return KeyCeer(lambda s, x: x, "Id", static=True,
                   decider=lambda x: (lambda y: y == x))


def id_n(n: int) -> Ceer:
    if n < 1:
        raise ValueError("Id_n needs n >= 1")
    return KeyCeer(lambda s, x: x % n, f"Id_{n}", static=True,
                   decider=lambda x: (lambda y: y % n == x % n), finite_classes=n)


def finite_ceer(blocks: Iterable[Iterable[int]], label: str | None = None) -> Ceer:
    """A ceer with finitely many classes from a partition of [0, u).

    Numbers x >= u are placed in the block of x mod u, so the partition
    of omega has exactly as many classes as there are blocks.
    """
    blocks = [sorted(b) for b in blocks]
    u = sum(len(b) for b in blocks)
    where = {}
    for i, b in enumerate(sorted(blocks)):
        for x in b:
            where[x] = i
    if sorted(where) != list(range(u)):
        raise ValueError("blocks must partition an initial segment")
    name = label or "F" + "|".join(",".join(map(str, b)) for b in sorted(blocks))
    out = KeyCeer(lambda s, x: where[x % u], name, static=True,
                  decider=lambda x: (lambda y: where[y % u] == where[x % u]),
                  finite_classes=len(blocks))
    out.universe = u
    return out


def r_u(U: CeSet) -> Ceer:
    """x ~ y iff x = y or both are in U (at the stage)."""
    return KeyCeer(lambda s, x: -1 if U.contains(s, x) else x, f"R_U[{U.label}]")


def indexed_ceer(z: "int | str", registry: Registry | None = None, step_cap: int = 10**5) -> Ceer:
    return IndexedCeer(z, w(z, registry, step_cap))


def ceer_from_pairs(W: CeSet, label: str) -> Ceer:
    return IndexedCeer(label, W, label)


def eq_at(E: Ceer, s: int, x: int, y: int) -> bool:
    return E.eq_at(s, x, y)


def classes_at(E: Ceer, s: int, bound: int) -> list[list[int]]:
    return E.classes_at(s, bound)


def canonical(blocks: Iterable[Iterable[int]]) -> list[tuple[int, ...]]:
    """Partition as a sorted list of sorted tuples, for exact comparison."""
    return sorted(tuple(sorted(b)) for b in blocks)


# ---------------------------------------------------------------- witnesses

@dataclass
class ReductionWitness:
    """A candidate reduction f of source to target."""

    f: Program
    source: Ceer
    target: Ceer
    note: str = ""

    def __call__(self, x: int, budget: int = 10**5) -> int | None:
        return self.f(x, budget)


def fn_program(name: str, fn: Callable[[int], object]) -> ExternProgram:
    """An unregistered extern program built from a Python function."""
    return ExternProgram(name, fn)


def witness(fn: Callable[[int], object], source: Ceer, target: Ceer, note: str = "") -> ReductionWitness:
    return ReductionWitness(fn_program(note or f"{source.label}->{target.label}", fn),
                            source, target, note)


# ---------------------------------------------------------------- snapshots

def _clean(label: str) -> str:
    return "".join("_" if ch.isspace() else ch for ch in label) or "ceer"


def snapshot_text(E: Ceer, stage: int, bound: int | None = None) -> str:
    """Header ``ceer <label> <stage> <universe_bound>`` then ``merge`` lines."""
    if bound is None:
        part = getattr(E, "partition", None)
        if part is None:
            raise ValueError("derived ceers need an explicit bound")
        if isinstance(E, LogCeer):
            E.ensure(stage)
        log = part.log_until(stage)
        universe = part.universe_bound
    else:
        part = E.approx(stage, bound)
        log = part.merge_log
        universe = bound
    lines = [f"ceer {_clean(E.label)} {stage} {universe}"]
    lines += [f"merge {st} {a} {b}" for st, a, b in log]
    return "\n".join(lines) + "\n"


def parse_snapshot(text: str) -> tuple[PartitionCeer, int]:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    head = lines[0].split()
    if len(head) != 4 or head[0] != "ceer":
        raise ValueError("snapshot must start with 'ceer <label> <stage> <universe_bound>'")
    label, stage, universe = head[1], int(head[2]), int(head[3])
    part = StagedPartition(label)
    for ln in lines[1:]:
        parts = ln.split()
        if len(parts) != 4 or parts[0] != "merge":
            raise ValueError(f"bad snapshot line {ln!r}")
        st, a, b = map(int, parts[1:])
        if not part.merge(st, a, b):
            raise ValueError(f"redundant merge {ln!r}")
    part.universe_bound = max(part.universe_bound, universe)
    if part.universe_bound != universe:
        raise ValueError("merge log mentions numbers beyond the universe bound")
    return PartitionCeer(part, label), stage


__all__ = [
    "Ceer", "KeyCeer", "PartitionCeer", "LogCeer", "IndexedCeer", "id_ceer", "id_n",
    "finite_ceer", "r_u", "indexed_ceer", "ceer_from_pairs", "eq_at", "classes_at",
    "canonical", "snapshot_text", "parse_snapshot", "pair", "DEFAULT_REGISTRY",
    "ReductionWitness", "fn_program", "witness",
]

"""Stage-indexed partitions: union-find plus a persistent merge log.

The merge log is the source of truth. The live union-find answers
queries at the latest stage; earlier stages are rebuilt from a log
prefix on demand.
"""

from __future__ import annotations

from bisect import bisect_right


class UnionFind:
    """Union by size with path halving over a lazily grown universe."""

    def __init__(self):
        self.parent: dict[int, int] = {}
        self.size: dict[int, int] = {}
        self.members: dict[int, list[int]] = {}

    def find(self, x: int) -> int:
        parent = self.parent
        if x not in parent:
            return x
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def _touch(self, x: int) -> None:
        if x not in self.parent:
            self.parent[x] = x
            self.size[x] = 1
            self.members[x] = [x]

    def union(self, a: int, b: int) -> bool:
        self._touch(a)
        self._touch(b)
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if self.size[ra] < self.size[rb] or (self.size[ra] == self.size[rb] and rb < ra):
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]
        self.members[ra].extend(self.members.pop(rb))
        del self.size[rb]
        return True

    def class_of(self, x: int) -> list[int]:
        r = self.find(x)
        return sorted(self.members.get(r, [x]))


class StagedPartition:
    """A monotone stage-indexed equivalence relation on the naturals.

    At stage 0 (before any logged merge) the relation is equality.
    """

    def __init__(self, label: str = "partition"):
        self.label = label
        self.merge_log: list[tuple[int, int, int]] = []
        self.universe_bound = 0
        self._uf = UnionFind()
        self._stages: list[int] = []
        self._prefix_cache: dict[int, UnionFind] = {}

    # -- mutation

    def mention(self, *xs: int) -> None:
        for x in xs:
            if x + 1 > self.universe_bound:
                self.universe_bound = x + 1

    def merge(self, stage: int, a: int, b: int) -> bool:
        """Collapse a and b at the given stage; returns False if already equivalent."""
        if self._stages and stage < self._stages[-1]:
            raise ValueError("merges must be logged in stage order")
        self.mention(a, b)
        if not self._uf.union(a, b):
            return False
        self.merge_log.append((stage, a, b))
        self._stages.append(stage)
        return True

    # -- queries at the latest stage

    @property
    def last_stage(self) -> int:
        return self._stages[-1] if self._stages else 0

    def find(self, x: int) -> int:
        return self._uf.find(x)

    def eq(self, x: int, y: int) -> bool:
        return x == y or self._uf.find(x) == self._uf.find(y)

    def class_of(self, x: int) -> list[int]:
        return self._uf.class_of(x)

    def class_size(self, x: int) -> int:
        r = self._uf.find(x)
        return self._uf.size.get(r, 1)

    # -- queries at earlier stages

    def _prefix(self, s: int) -> UnionFind | None:
        n = bisect_right(self._stages, s)
        if n == len(self.merge_log):
            return None
        uf = self._prefix_cache.get(n)
        if uf is None:
            uf = UnionFind()
            for _, a, b in self.merge_log[:n]:
                uf.union(a, b)
            if len(self._prefix_cache) > 64:
                self._prefix_cache.clear()
            self._prefix_cache[n] = uf
        return uf

    def find_at(self, s: int, x: int) -> int:
        uf = self._prefix(s)
        return (uf or self._uf).find(x)

    def eq_at(self, s: int, x: int, y: int) -> bool:
        return x == y or self.find_at(s, x) == self.find_at(s, y)

    def classes(self, bound: int, s: int | None = None) -> list[list[int]]:
        """Partition of [0, bound) at stage s (latest if None), blocks sorted by least element."""
        uf = self._uf if s is None else (self._prefix(s) or self._uf)
        blocks: dict[int, list[int]] = {}
        for x in range(bound):
            blocks.setdefault(uf.find(x), []).append(x)
        return list(blocks.values())

    def log_until(self, s: int) -> list[tuple[int, int, int]]:
        return self.merge_log[: bisect_right(self._stages, s)]

    def copy_until(self, s: int) -> "StagedPartition":
        out = StagedPartition(self.label)
        for st, a, b in self.log_until(s):
            out.merge(st, a, b)
        out.universe_bound = max(out.universe_bound, self.universe_bound)
        return out

    def __eq__(self, other: object) -> bool:
        return (isinstance(other, StagedPartition) and self.merge_log == other.merge_log
                and self.universe_bound == other.universe_bound)

"""Uniform gadgets turning a c.e. set into a ceer: an interval gadget whose
ceer has finitely many classes exactly when the set is cofinite, and a
column gadget whose ceer fails self-fullness exactly when a column is infinite."""

from __future__ import annotations

from typing import Sequence

from ..ceer import Ceer, KeyCeer, witness
from ..machine import CeSet, Registry, column, unpair
from ..priority import WAITING, ColumnBlock, Context, Requirement
from ..reductions import verify_reduction
from .common import ConstructionResult, HitClass, domains, execute, next_entry_stage, resolve_all


def cof_gadget(W: CeSet) -> Ceer:
    """u ~ v at s iff u = v or every z in [u, v] is enumerated by stage s."""

    def key(s: int, x: int):
        if not W.contains(s, x):
            return ("out", x)
        u = x
        while u > 0 and W.contains(s, u - 1):
            u -= 1
        return ("run", u)

    return KeyCeer(key, f"cof({getattr(W, 'label', 'W')})")


class SelfEmbedding(Requirement):
    """If column k of W is infinite, build a self-reduction f of E missing [a].

    Acts whenever column k grows: merges f-images of equivalent arguments,
    then defines f on the next argument with a new number of its column.
    """

    kind = "NSF"

    def __init__(self, name: str, k: int, W: CeSet):
        super().__init__(name, 0)
        self.k = k
        self.col = column(W, k)
        self.f: dict[int, int] = {}
        self.column: int | None = None

    def reset(self) -> None:
        super().reset()
        self.f = {}
        self.column = None

    def attend(self, ctx: Context, s: int) -> bool:
        if not self.col.new_at(s):
            self.wake = next_entry_stage(self.col, s)
            return False
        if self.column is None:
            start = ctx.fresh(self, "n", lambda v: unpair(v)[1] != 0)
            a = ctx.fresh(self, "a", lambda v: unpair(v)[1] != 0)
            self.column = unpair(start)[0]
            ctx.restrain(self, ColumnBlock((self.column, unpair(a)[0]), 0))
            self.state = WAITING
        part = ctx.parts[0]
        first: dict[int, int] = {}
        for z in sorted(self.f):
            rep = first.setdefault(part.find(z), z)
            if rep != z and not part.eq(self.f[rep], self.f[z]):
                ctx.collapse(self, 0, self.f[rep], self.f[z])
        z = len(self.f)
        n = self.column
        self.f[z] = ctx.fresh(self, f"f{z}", lambda v: unpair(v)[0] != n)
        return True

    def witness(self, ctx: Context):
        E = ctx.ceers()[0]
        table = dict(self.f)
        return witness(lambda x: table.get(x), E, E, f"{self.name} f")

    def verify(self, ctx: Context) -> str | None:
        if self.column is None or not self.f:
            return None
        verdict = verify_reduction(self.witness(ctx), bound=len(self.f), stage=ctx.stage)
        from ..reductions import ConsistentUpTo
        if not isinstance(verdict, ConsistentUpTo):
            return f"f fails: {verdict}"
        a = self.params["a"]
        part = ctx.parts[0]
        images = {part.find(v) for v in self.f.values()}
        return "" if part.find(a) not in images else "a meets im(f)"


def selffull_gadget(W: CeSet, opponents: Sequence = (), stages: int = 2048, columns: int = 4,
                    targets: int = 4, registry: Registry | None = None, step_budget: int = 10**5,
                    seed_universe: int = 0) -> ConstructionResult:
    """A ceer that is self-full iff every column of W is finite (on the listed opponents)."""
    progs = resolve_all(opponents, registry)
    Ws = domains(progs, step_budget)
    entries = []
    for k in range(columns):
        entries.append(((k, 0, k), SelfEmbedding(f"NSF[{k}]", k, W)))
    for i, Wi in enumerate(Ws):
        for j in range(targets):
            req = HitClass(f"SF[{i},{j}]", 0, Wi, j)
            req.kind = "SF"
            entries.append(((max(i, j), 1, i, j), req))
    reqs = [r for _, r in sorted(entries, key=lambda e: e[0])]
    res = execute("selffull_gadget", reqs, 1, stages, labels=["E"], step_budget=step_budget,
                  seed_universe=seed_universe, extras={"W": W})
    return res


def nsf_actions(result: ConstructionResult) -> dict[str, int]:
    return {r.name: r.actions for r in result.requirements if r.kind == "NSF"}


__all__ = ["cof_gadget", "SelfEmbedding", "selffull_gadget", "nsf_actions"]

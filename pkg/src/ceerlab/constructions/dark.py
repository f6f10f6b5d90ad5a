"""Pairwise incomparable minimal dark ceers avoiding the lower cone of R."""

from __future__ import annotations

from typing import Sequence

from ..ceer import Ceer
from ..machine import ExternProgram, Registry
from ..priority import Context, universal_ceer
from .common import (ConstructionResult, DirectDiagonal, FinitaryDiagonal, HitClass, domains,
                     execute, priority_order, resolve_all)


class ParameterMirror:
    """An opponent that follows the copying strategy for a fixed number of rounds.

    On parameters a_0..a_rounds of a copying requirement it is the identity,
    so against the live ceer it matches every copied pattern; on later
    parameters it returns a_0, forcing a permanent mismatch. On all other
    numbers it is the identity.
    """

    def __init__(self, rounds: int, name: str = "mirror"):
        self.rounds = rounds
        self.ctx: Context | None = None
        self.program = ExternProgram(name, self._value, f"mirror {rounds}")

    def bind(self, ctx: Context) -> None:
        self.ctx = ctx

    def _value(self, x: int) -> int:
        owner = self.ctx.param_owner.get(x) if self.ctx else None
        if owner and owner[1].startswith("a") and owner[1][1:].isdigit():
            if int(owner[1][1:]) > self.rounds:
                return self.ctx.requirements[owner[0]].params["a0"]
        return x


def minimal_dark(R: Ceer, count: int = 3, opponents: Sequence = (), stages: int = 4096,
                 targets: int = 8, registry: Registry | None = None, step_budget: int = 10**5,
                 T: Ceer | None = None, seed_universe: int = 0,
                 mirrors: Sequence[ParameterMirror] = ()) -> ConstructionResult:
    """Requirements P[l,i,j] (W_i meets [j]), Q[l,l2,n] (phi_n not E_l -> E_l2)
    and T[l,o] (phi_o not E_l -> R) over the given opponent list."""
    progs = resolve_all(opponents, registry)
    Ws = domains(progs, step_budget)
    T = T or universal_ceer(registry)
    entries = []
    for l in range(count):
        for i, W in enumerate(Ws):
            for j in range(targets):
                entries.append(((max(l, i, j), 2, l, i, j), HitClass(f"P[{l},{i},{j}]", l, W, j)))
        for o, p in enumerate(progs):
            entries.append(((max(l, o), 1, l, o), FinitaryDiagonal(f"T[{l},{o}]", l, p, R, T)))
        for l2 in range(count):
            if l2 == l:
                continue
            for n, p in enumerate(progs):
                entries.append(((max(l, l2, n), 0, l, l2, n),
                                DirectDiagonal(f"Q[{l},{l2},{n}]", l, l2, p)))
    reqs = priority_order(entries)

    def bind(ctx: Context) -> None:
        for m in mirrors:
            m.bind(ctx)

    return execute("minimal_dark", reqs, count, stages, step_budget=step_budget,
                   seed_universe=seed_universe, before=bind, extras={"R": R, "T": T})

"""Self-full ceers coding A on column zero: the inseparable and finite-class variants."""

from __future__ import annotations

from typing import Sequence

from ..ceer import Ceer
from ..machine import Registry
from ..partition import StagedPartition
from ..priority import FreezeClass, ConstructionTrace, restraint_from_payload, universal_ceer
from .common import (COLUMN_ZERO, CodeIntoColumn, ConstructionResult, FinitaryDiagonal,
                     FreezeRequirement, HitClass, Inseparable, SelfHit, domains, execute,
                     in_column_zero, priority_order, resolve_all)


def _coded_q(name, k, l, prog, T):
    return FinitaryDiagonal(name, k, prog, l, T, avoid=in_column_zero, escape=COLUMN_ZERO, kind="Q")


def self_full_covers(A: Ceer, count: int = 3, opponents: Sequence = (), stages: int = 4096,
                     targets: int = 4, code_bound: int = 32, separators: int = 4,
                     registry: Registry | None = None, step_budget: int = 10**5,
                     T: Ceer | None = None, seed_universe: int = 0) -> ConstructionResult:
    """Requirements P[k,i,j], Q[k,l,i] and S[k,i,j,u,v] with A coded on column zero.

    S-requirements pair the domains of the first ``separators`` opponents
    (ordered pairs u != v) against classes i < j < ``targets``.
    """
    progs = resolve_all(opponents, registry)
    Ws = domains(progs, step_budget)
    T = T or universal_ceer(registry)
    entries = []
    for k in range(count):
        for i, W in enumerate(Ws):
            for j in range(targets):
                entries.append(((max(k, i, j), 2, k, i, j),
                                HitClass(f"P[{k},{i},{j}]", k, W, j, avoid=COLUMN_ZERO)))
        for l in range(count):
            if l == k:
                continue
            for i, p in enumerate(progs):
                entries.append(((max(k, l, i), 0, k, l, i), _coded_q(f"Q[{k},{l},{i}]", k, l, p, T)))
        seps = range(min(separators, len(Ws)))
        for i in range(targets):
            for j in range(i + 1, targets):
                for u in seps:
                    for v in seps:
                        if u != v:
                            entries.append(((max(k, i, j, u, v), 1, k, i, j, u, v),
                                            Inseparable(f"S[{k},{i},{j},{u},{v}]", k, i, j, Ws[u], Ws[v],
                                                        avoid=in_column_zero)))
    hook = CodeIntoColumn(A, range(count), code_bound)
    res = execute("self_full_covers", priority_order(entries), count, stages, hooks=[hook],
                  step_budget=step_budget, seed_universe=seed_universe,
                  sets={COLUMN_ZERO: in_column_zero}, extras={"A": A, "coding": hook, "T": T})
    return res


def self_full_finite_classes(A: Ceer, count: int = 3, opponents: Sequence = (), stages: int = 4096,
                             targets: int = 4, code_bound: int = 32,
                             registry: Registry | None = None, step_budget: int = 10**5,
                             T: Ceer | None = None, seed_universe: int = 0) -> ConstructionResult:
    """Requirements P[l,i,j] (i <= j), SF[l,i,j], Q[k,l,i] and F[l,i].

    Each P[l,i,j] precedes F[l,j] in the priority order.
    """
    progs = resolve_all(opponents, registry)
    Ws = domains(progs, step_budget)
    T = T or universal_ceer(registry)
    entries = []
    for l in range(count):
        for j in range(targets):
            entries.append(((max(l, j), 3, l, j), FreezeRequirement(f"F[{l},{j}]", l, j)))
            for i, W in enumerate(Ws):
                if i <= j:
                    entries.append(((max(l, i, j), 0, l, i, j),
                                    HitClass(f"P[{l},{i},{j}]", l, W, j, avoid=COLUMN_ZERO,
                                             least_only=True)))
                entries.append(((max(l, i, j), 2, l, i, j),
                                SelfHit(f"SF[{l},{i},{j}]", l, progs[i], j)))
        for k in range(count):
            if k == l:
                continue
            for i, p in enumerate(progs):
                entries.append(((max(k, l, i), 1, k, l, i), _coded_q(f"Q[{k},{l},{i}]", k, l, p, T)))
    hook = CodeIntoColumn(A, range(count), code_bound)
    return execute("self_full_finite_classes", priority_order(entries), count, stages, hooks=[hook],
                   step_budget=step_budget, seed_universe=seed_universe,
                   sets={COLUMN_ZERO: in_column_zero}, extras={"A": A, "coding": hook, "T": T})


def frozen_class_report(trace: ConstructionTrace) -> list[dict]:
    """For each freeze: class size at freeze, growth by higher-priority merges, final size.

    A merge into a frozen class is allowed only from a strictly higher
    priority (coding counts as highest); anything else is listed under
    ``illegal``.
    """
    parts: dict[int, StagedPartition] = {}
    freezes = []
    for ev in trace:
        if ev.kind == "RestraintSet":
            r = restraint_from_payload(ev.payload)
            if isinstance(r, FreezeClass):
                p = parts.setdefault(r.ceer, StagedPartition())
                freezes.append({"rank": ev.rank, "ceer": r.ceer, "i": r.a, "at_freeze": p.class_size(r.a),
                                "growth": 0, "illegal": []})
        elif ev.kind in ("Collapse", "AuxCollapse", "CodingMerge"):
            l, a, b = ev.payload
            p = parts.setdefault(l, StagedPartition())
            for fz in freezes:
                if fz["ceer"] != l:
                    continue
                ra, rb, rf = p.find(a), p.find(b), p.find(fz["i"])
                if ra == rb or rf not in (ra, rb):
                    continue
                other = b if rf == ra else a
                if ev.rank < fz["rank"]:
                    fz["growth"] += p.class_size(other)
                else:
                    fz["illegal"].append(ev.line())
            p.merge(ev.stage, a, b)
    for fz in freezes:
        fz["final"] = parts[fz["ceer"]].class_size(fz["i"])
        fz["exact"] = fz["final"] == fz["at_freeze"] + fz["growth"] and not fz["illegal"]
    return freezes

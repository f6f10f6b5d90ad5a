"""Batch front end: run constructions from manifests, audit traces, verify
and combine reductions, query the finite oracle, move snapshots around.

Exit codes: 0 ok, 1 audit failure or failed verification, 2 usage error,
3 a combinator's hypothesis refuted.
"""

from __future__ import annotations

import argparse
import os
import shlex
import sys
from dataclasses import dataclass, field

from .ceer import Ceer, finite_ceer, id_ceer, id_n, indexed_ceer, parse_snapshot, snapshot_text
from .constructions import (ParameterMirror, dark_I_join, dark_join_pair, exact_pair, minimal_dark,
                            minimal_tuple, self_full_covers, self_full_finite_classes,
                            selffull_gadget, sup_not_oplus, cof_gadget)
from .constructions.common import COLUMN_ZERO, execute, in_column_zero
from .machine import Registry, w
from .priority import audit, parse_trace
from .reductions import (ConsistentUpTo, HypothesisRefuted, brute_force_reduction, invert_onto,
                         parse_witness, plus_span, verify_reduction, witness_text)

CONSTRUCTIONS = ("empty", "minimal_dark", "self_full_covers", "self_full_finite_classes",
                 "dark_join_pair", "sup_not_oplus", "dark_I_join", "exact_pair", "minimal_tuple",
                 "selffull_gadget", "cof_gadget")


class UsageError(Exception):
    pass


# ---------------------------------------------------------------- specs

def parse_ceer(spec: str, registry: Registry | None = None) -> Ceer:
    """``id``, ``id_n K``, ``finite 0,1|2|3``, ``indexed NAME`` or ``snapshot PATH``."""
    parts = spec.split()
    if not parts:
        raise UsageError("empty ceer spec")
    kind, args = parts[0], parts[1:]
    try:
        if kind == "id" and not args:
            return id_ceer()
        if kind == "id_n" and len(args) == 1:
            return id_n(int(args[0]))
        if kind == "finite" and len(args) == 1:
            return finite_ceer([[int(x) for x in block.split(",")] for block in args[0].split("|")])
        if kind == "indexed" and len(args) == 1:
            return indexed_ceer(args[0], registry)
        if kind == "snapshot" and len(args) == 1:
            with open(args[0]) as fh:
                return parse_snapshot(fh.read())[0]
    except (ValueError, KeyError) as exc:
        raise UsageError(f"bad ceer spec {spec!r}: {exc}") from exc
    raise UsageError(f"unknown ceer spec {spec!r}")


@dataclass
class RunManifest:
    """Everything a run depends on; equal manifests give byte-identical outputs."""

    construction: str = ""
    ceers: dict[str, str] = field(default_factory=dict)
    members: list[str] = field(default_factory=list)
    opponents: list[str] = field(default_factory=list)
    externs: list[tuple[str, str]] = field(default_factory=list)
    mirrors: list[tuple[str, int]] = field(default_factory=list)
    wset: str | None = None
    stages: int = 4096
    bound: int = 128
    step_budget: int = 10**5
    seed_universe: int = 0
    params: dict[str, int] = field(default_factory=dict)
    out: str = "out"

    @classmethod
    def parse(cls, text: str) -> "RunManifest":
        m = cls()
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            tok = shlex.split(line)
            key, args = tok[0], tok[1:]
            try:
                if key == "construction":
                    (m.construction,) = args
                elif key == "ceer":
                    m.ceers[args[0]] = " ".join(args[1:])
                elif key == "member":
                    m.members.append(" ".join(args))
                elif key == "opponent":
                    m.opponents.extend(args)
                elif key == "extern":
                    m.externs.append((args[0], " ".join(args[1:])))
                    m.opponents.append(args[0])
                elif key == "define":
                    m.externs.append((args[0], " ".join(args[1:])))
                elif key == "mirror":
                    m.mirrors.append((args[0], int(args[1])))
                    m.opponents.append(args[0])
                elif key == "wset":
                    (m.wset,) = args
                elif key in ("stages", "bound", "step_budget", "seed_universe"):
                    setattr(m, key, int(args[0]))
                elif key == "set":
                    m.params[args[0]] = int(args[1])
                elif key == "out":
                    (m.out,) = args
                else:
                    raise UsageError(f"manifest line {lineno}: unknown key {key!r}")
            except (ValueError, IndexError) as exc:
                raise UsageError(f"manifest line {lineno}: {raw.strip()!r}") from exc
        if m.construction not in CONSTRUCTIONS:
            raise UsageError(f"unknown construction {m.construction!r}")
        return m

    def load_opponents(self, text: str) -> None:
        """An opponents file: ``extern NAME KIND ARGS`` lines or bare registered names."""
        for raw in text.splitlines():
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            tok = shlex.split(line)
            if tok[0] == "extern":
                self.externs.append((tok[1], " ".join(tok[2:])))
                self.opponents.append(tok[1])
            else:
                self.opponents.extend(tok)


def _registry(m: RunManifest) -> tuple[Registry, list[ParameterMirror]]:
    reg = Registry()
    try:
        for name, spec in m.externs:
            reg.register_spec(name, spec)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    mirrors = []
    for name, rounds in m.mirrors:
        mir = ParameterMirror(rounds, name)
        reg.register(mir.program)
        mirrors.append(mir)
    for name in m.opponents:
        if not name.isdigit() and name not in reg.names():
            raise UsageError(f"unknown opponent {name!r}")
    return reg, mirrors


def build(m: RunManifest):
    """Run the manifest's construction; returns (ceers, trace or None, result or None)."""
    reg, mirrors = _registry(m)
    common = dict(stages=m.stages, registry=reg, step_budget=m.step_budget,
                  seed_universe=m.seed_universe)
    p = dict(m.params)

    def ceer(name: str, default: str) -> Ceer:
        return parse_ceer(m.ceers.get(name, default), reg)

    c = m.construction
    if c == "cof_gadget":
        if m.wset is None:
            raise UsageError("cof_gadget needs a 'wset' line")
        return [cof_gadget(w(m.wset, reg, m.step_budget))], None, None
    if c == "empty":
        res = execute("empty", [], p.get("count", 1), m.stages, step_budget=m.step_budget,
                      seed_universe=m.seed_universe)
    elif c == "minimal_dark":
        res = minimal_dark(ceer("R", "id"), opponents=m.opponents, mirrors=mirrors, **p, **common)
    elif c == "self_full_covers":
        res = self_full_covers(ceer("A", "id"), opponents=m.opponents, **p, **common)
    elif c == "self_full_finite_classes":
        res = self_full_finite_classes(ceer("A", "id_n 2"), opponents=m.opponents, **p, **common)
    elif c == "dark_join_pair":
        res = dark_join_pair(m.opponents, **p, **common)
    elif c == "sup_not_oplus":
        res = sup_not_oplus(m.opponents, **p, **common)
    elif c == "dark_I_join":
        res = dark_I_join(m.opponents, **p, **common)
    elif c == "exact_pair":
        family = [parse_ceer(s, reg) for s in m.members] or [id_n(1)]
        p["dark_mode"] = bool(p.get("dark_mode", 0))
        res = exact_pair(family, opponents=m.opponents, **p, **common)
    elif c == "minimal_tuple":
        res = minimal_tuple(p.pop("n", 2), m.opponents, **p, **common)
    elif c == "selffull_gadget":
        if m.wset is None:
            raise UsageError("selffull_gadget needs a 'wset' line")
        res = selffull_gadget(w(m.wset, reg, m.step_budget), m.opponents, **p, **common)
    else:  # pragma: no cover - guarded by parse
        raise UsageError(c)
    return res.ceers, res.trace, res


def construction_sets(name: str) -> dict:
    return {COLUMN_ZERO: in_column_zero} if name == "self_full_covers" else {}


# ---------------------------------------------------------------- commands

def _write(path: str, text: str) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(text)


def cmd_run(args) -> int:
    m = _manifest(args)
    ceers, trace, res = build(m)
    os.makedirs(m.out, exist_ok=True)
    written = []
    for i, E in enumerate(ceers):
        label = getattr(E, "label", f"E{i}")
        path = os.path.join(m.out, f"{i}_{label}.snap")
        bound = None if hasattr(E, "partition") else m.bound
        _write(path, snapshot_text(E, m.stages, bound))
        written.append(path)
    if trace is not None:
        path = os.path.join(m.out, "trace.txt")
        _write(path, trace.text())
        written.append(path)
    for path in written:
        print(path)
    if res is not None:
        report = res.audit()
        print(report.text().splitlines()[0])
    return 0


def cmd_audit(args) -> int:
    try:
        with open(args.trace) as fh:
            trace = parse_trace(fh.read())
    except OSError as exc:
        raise UsageError(f"cannot read trace: {exc}") from exc
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    reqs, sets = [], {}
    if args.manifest:
        m = _manifest(args)
        _, _, res = build(m)
        if res is not None:
            reqs = res.requirements
        sets = construction_sets(m.construction)
    report = audit(trace, reqs, sets=sets, seed_universe=args.seed_universe or 0)
    sys.stdout.write(report.text())
    return 0 if report.ok else 1


def _snapshot(path: str) -> Ceer:
    return parse_ceer(f"snapshot {path}")


def cmd_verify(args) -> int:
    src, tgt = _snapshot(args.source), _snapshot(args.target)
    try:
        with open(args.witness) as fh:
            wt = parse_witness(fh.read(), src, tgt)
    except (OSError, ValueError) as exc:
        raise UsageError(str(exc)) from exc
    verdict = verify_reduction(wt, bound=args.bound, stage=args.stage, step_budget=args.step_budget)
    print(verdict)
    return 0 if isinstance(verdict, ConsistentUpTo) else 1


def cmd_oracle(args) -> int:
    E, R = parse_ceer(args.source), parse_ceer(args.target)
    try:
        table = brute_force_reduction(E, R)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    if table is None:
        print("none")
        return 0
    print("exists")
    for x in sorted(table):
        print(f"table {x} {table[x]}")
    return 0


def cmd_compose(args) -> int:
    src, tgt = _snapshot(args.source), _snapshot(args.target)
    try:
        with open(args.witness) as fh:
            wt = parse_witness(fh.read(), src, tgt)
    except (OSError, ValueError) as exc:
        raise UsageError(str(exc)) from exc
    if args.lemma == "invert":
        out = invert_onto(wt, bound=args.bound)
    else:
        points = [int(x) for x in args.points.split(",")] if args.points else []
        if not points:
            raise UsageError("plus-span needs --points")
        out = plus_span(wt, points, stage=args.stage, audit=args.bound)
    text = witness_text(out, bound=args.bound)
    if args.out:
        _write(args.out, text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_snapshot(args) -> int:
    if args.action == "export":
        E = parse_ceer(args.spec)
        bound = None if hasattr(E, "partition") else args.bound
        text = snapshot_text(E, args.stage, bound)
    else:
        try:
            with open(args.spec) as fh:
                E, stage = parse_snapshot(fh.read())
        except (OSError, ValueError) as exc:
            raise UsageError(str(exc)) from exc
        text = snapshot_text(E, stage)
    if args.out:
        _write(args.out, text)
    else:
        sys.stdout.write(text)
    return 0


def _manifest(args) -> RunManifest:
    try:
        with open(args.manifest) as fh:
            m = RunManifest.parse(fh.read())
        if getattr(args, "opponents", None):
            with open(args.opponents) as fh:
                m.load_opponents(fh.read())
    except OSError as exc:
        raise UsageError(f"cannot read: {exc}") from exc
    for key in ("stages", "bound", "step_budget", "seed_universe", "out"):
        value = getattr(args, key, None)
        if value is not None:
            setattr(m, key, value)
    return m


def parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ceerlab", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def budgets(p, out=True):
        p.add_argument("--stages", type=int)
        p.add_argument("--bound", type=int)
        p.add_argument("--step-budget", dest="step_budget", type=int)
        p.add_argument("--seed-universe", dest="seed_universe", type=int)
        p.add_argument("--opponents", help="file of extern lines or registered names")
        if out:
            p.add_argument("--out")

    p = sub.add_parser("run", help="run a construction manifest")
    p.add_argument("manifest")
    budgets(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("audit", help="audit a trace file")
    p.add_argument("trace")
    p.add_argument("manifest", nargs="?")
    budgets(p, out=False)
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("verify", help="verify a witness file between two snapshots")
    p.add_argument("witness")
    p.add_argument("source")
    p.add_argument("target")
    p.add_argument("--bound", type=int, default=128)
    p.add_argument("--stage", type=int, default=4096)
    p.add_argument("--step-budget", dest="step_budget", type=int, default=10**5)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("oracle", help="brute-force reduction between two finite ceer specs")
    p.add_argument("source")
    p.add_argument("target")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("compose", help="apply a lemma combinator to a witness")
    p.add_argument("lemma", choices=("invert", "plus-span"))
    p.add_argument("witness")
    p.add_argument("source")
    p.add_argument("target")
    p.add_argument("--bound", type=int, default=32)
    p.add_argument("--stage", type=int, default=4096)
    p.add_argument("--points", help="comma-separated transversal for plus-span")
    p.add_argument("--out")
    p.set_defaults(func=cmd_compose)

    p = sub.add_parser("snapshot", help="export a ceer spec or normalize a snapshot file")
    p.add_argument("action", choices=("export", "import"))
    p.add_argument("spec")
    p.add_argument("--stage", type=int, default=0)
    p.add_argument("--bound", type=int, default=128)
    p.add_argument("--out")
    p.set_defaults(func=cmd_snapshot)
    return ap


def main(argv: list[str] | None = None) -> int:
    ap = parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except HypothesisRefuted as exc:
        print(f"hypothesis refuted: {exc}", file=sys.stderr)
        return 3


__all__ = ["RunManifest", "parse_ceer", "build", "main", "parser", "CONSTRUCTIONS"]

"""Register machines, pairing, extern programs and c.e. sets.

Every natural number is a program index. Indices below ``EXTERN_BASE``
decode to register-machine programs; indices in the extern band resolve
to registered deterministic functions (test opponents, planted sets).
"""

from __future__ import annotations

import math
import shlex
from dataclasses import dataclass
from typing import Callable, Iterable, Iterator, Union

EXTERN_BASE = 1 << 40


# ---------------------------------------------------------------- pairing

def pair(a: int, b: int) -> int:
    """Cantor pairing."""
    return (a + b) * (a + b + 1) // 2 + b


def unpair(n: int) -> tuple[int, int]:
    w = (math.isqrt(8 * n + 1) - 1) // 2
    b = n - w * (w + 1) // 2
    return w - b, b


def cantor_pairs() -> Iterator[tuple[int, int]]:
    """All pairs of naturals in Cantor order."""
    n = 0
    while True:
        yield unpair(n)
        n += 1


# ---------------------------------------------------------------- outcomes

@dataclass(frozen=True)
class Converged:
    value: int
    steps: int


@dataclass(frozen=True)
class DivergentWithin:
    budget: int


EvalOutcome = Union[Converged, DivergentWithin]


# ---------------------------------------------------------------- machine

@dataclass(frozen=True)
class Inc:
    reg: int


@dataclass(frozen=True)
class DecJz:
    reg: int
    target: int


@dataclass(frozen=True)
class Halt:
    pass


Instruction = Union[Inc, DecJz, Halt]


def decode_instruction(code: int) -> Instruction:
    if code == 0:
        return Halt()
    if code % 2 == 1:
        return Inc((code - 1) // 2)
    reg, target = unpair((code - 2) // 2)
    return DecJz(reg, target)


def encode_instruction(ins: Instruction) -> int:
    if isinstance(ins, Halt):
        return 0
    if isinstance(ins, Inc):
        return 2 * ins.reg + 1
    return 2 * pair(ins.reg, ins.target) + 2


def decode_program(index: int) -> list[Instruction]:
    """0 is the empty program; n+1 is (head, tail) with (head, tail) = unpair(n)."""
    out = []
    while index > 0:
        head, index = unpair(index - 1)
        out.append(decode_instruction(head))
    return out


def encode_program(prog: Iterable[Instruction]) -> int:
    codes = [encode_instruction(i) for i in prog]
    index = 0
    for code in reversed(codes):
        index = pair(code, index) + 1
    return index


def run_machine(prog: list[Instruction], x: int, budget: int) -> EvalOutcome:
    """Run with register 0 = x. Each executed instruction costs one step.

    Falling off the end (including a jump past the last instruction) halts
    without cost.
    """
    regs = {0: x}
    pc = 0
    steps = 0
    n = len(prog)
    while pc < n:
        if steps >= budget:
            return DivergentWithin(budget)
        ins = prog[pc]
        steps += 1
        if isinstance(ins, Halt):
            break
        if isinstance(ins, Inc):
            regs[ins.reg] = regs.get(ins.reg, 0) + 1
            pc += 1
        else:
            v = regs.get(ins.reg, 0)
            if v == 0:
                pc = ins.target
            else:
                regs[ins.reg] = v - 1
                pc += 1
    return Converged(regs.get(0, 0), steps)


# ---------------------------------------------------------------- programs

class Program:
    """A deterministic partial function with step counting."""

    name: str = "program"

    def evaluate(self, x: int, budget: int) -> EvalOutcome:
        raise NotImplementedError

    def __call__(self, x: int, budget: int = 10**5) -> int | None:
        out = self.evaluate(x, budget)
        return out.value if isinstance(out, Converged) else None


class MachineProgram(Program):
    def __init__(self, index: int):
        self.index = index
        self.name = str(index)
        self.instructions = decode_program(index)
        self._cache: dict[int, EvalOutcome] = {}

    def evaluate(self, x: int, budget: int) -> EvalOutcome:
        known = self._cache.get(x)
        if isinstance(known, Converged):
            return known if known.steps <= budget else DivergentWithin(budget)
        if isinstance(known, DivergentWithin) and known.budget >= budget:
            return DivergentWithin(budget)
        # Rerun with a doubled budget so repeated stagewise queries stay linear.
        cap = max(budget, 2 * known.budget) if isinstance(known, DivergentWithin) else budget
        out = run_machine(self.instructions, x, cap)
        self._cache[x] = out
        if isinstance(out, Converged):
            return out if out.steps <= budget else DivergentWithin(budget)
        return DivergentWithin(budget)

    def __repr__(self) -> str:
        return f"MachineProgram({self.index})"


class ExternProgram(Program):
    """Wraps a Python function returning None (diverge), a value, or (value, steps)."""

    def __init__(self, name: str, fn: Callable[[int], object], spec: str = ""):
        self.name = name
        self.fn = fn
        self.spec = spec or name
        self._cache: dict[int, tuple[int, int] | None] = {}

    def _raw(self, x: int) -> tuple[int, int] | None:
        if x in self._cache:
            return self._cache[x]
        r = self.fn(x)
        if r is None:
            out = None
        elif isinstance(r, tuple):
            out = (int(r[0]), int(r[1]))
        else:
            out = (int(r), 1)
        self._cache[x] = out
        return out

    def evaluate(self, x: int, budget: int) -> EvalOutcome:
        r = self._raw(x)
        if r is None or r[1] > budget:
            return DivergentWithin(budget)
        return Converged(r[0], r[1])

    def __repr__(self) -> str:
        return f"ExternProgram({self.name!r})"


def table_program(name: str, table: dict[int, int], default: int | None = None) -> ExternProgram:
    return ExternProgram(name, lambda x: table.get(x, default))


# ---------------------------------------------------------------- registry

def _parse_kind(kind: str, args: list[str]) -> Callable[[int], object]:
    ints = lambda: [int(a) for a in args]  # noqa: E731
    if kind == "identity":
        return lambda x: x
    if kind == "loop":
        return lambda x: None
    if kind == "const":
        (v,) = ints()
        return lambda x: v
    if kind == "affine":
        a, b = ints()
        return lambda x: a * x + b
    if kind == "delay":
        (d,) = ints()
        return lambda x: (x, d)
    if kind == "evens":
        return lambda x: x if x % 2 == 0 else None
    if kind == "mod":
        m, r = ints()
        return lambda x: 0 if x % m == r else None
    if kind == "set":
        members = frozenset(ints())
        return lambda x: 0 if x in members else None
    if kind == "cofinite":
        missing = frozenset(ints())
        return lambda x: None if x in missing else 0
    if kind == "column":
        (k,) = ints()
        return lambda x: 0 if unpair(x)[0] == k else None
    if kind == "table":
        table: dict[int, tuple[int, int]] = {}
        for item in args:
            lhs, rhs = item.split(":")
            steps = 1
            if "@" in rhs:
                rhs, st = rhs.split("@")
                steps = int(st)
            table[int(lhs)] = (int(rhs), steps)
        return lambda x: table.get(x)
    raise ValueError(f"unknown extern kind {kind!r}")


BUILTINS = [
    ("identity", "identity"),
    ("loop", "loop"),
    ("zero", "const 0"),
    ("one", "const 1"),
    ("evens", "evens"),
    ("double", "affine 2 0"),
]


class Registry:
    """Maps extern names to programs in the reserved index band."""

    def __init__(self, builtins: bool = True):
        self._progs: list[ExternProgram] = []
        self._by_name: dict[str, int] = {}
        self._machines: dict[int, MachineProgram] = {}
        if builtins:
            for name, spec in BUILTINS:
                self.register_spec(name, spec)

    def register(self, prog: ExternProgram) -> int:
        if prog.name in self._by_name:
            raise ValueError(f"extern {prog.name!r} already registered")
        self._by_name[prog.name] = len(self._progs)
        self._progs.append(prog)
        return EXTERN_BASE + len(self._progs) - 1

    def register_fn(self, name: str, fn: Callable[[int], object]) -> int:
        return self.register(ExternProgram(name, fn))

    def register_spec(self, name: str, spec: str) -> int:
        parts = spec.split()
        return self.register(ExternProgram(name, _parse_kind(parts[0], parts[1:]), spec))

    def index(self, name: str) -> int:
        return EXTERN_BASE + self._by_name[name]

    def names(self) -> list[str]:
        return [p.name for p in self._progs]

    def resolve(self, ref: "int | str | Program") -> Program:
        if isinstance(ref, Program):
            return ref
        if isinstance(ref, str):
            if ref.isdigit():
                return self.resolve(int(ref))
            return self._progs[self._by_name[ref]]
        slot = ref - EXTERN_BASE
        if 0 <= slot < len(self._progs):
            return self._progs[slot]
        prog = self._machines.get(ref)
        if prog is None:
            prog = self._machines[ref] = MachineProgram(ref)
        return prog

    def load_manifest(self, text: str) -> list[int]:
        """Lines ``extern <name> <kind> <args...>``; blank lines and # comments skipped."""
        out = []
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = shlex.split(line)
            if parts[0] != "extern" or len(parts) < 3:
                raise ValueError(f"line {lineno}: expected 'extern <name> <kind> ...'")
            out.append(self.register_spec(parts[1], " ".join(parts[2:])))
        return out


DEFAULT_REGISTRY = Registry()


def interpret(p: "int | str | Program", x: int, budget: int,
              registry: Registry | None = None) -> EvalOutcome:
    if budget < 0:
        raise ValueError("step budget must be non-negative")
    return (registry or DEFAULT_REGISTRY).resolve(p).evaluate(x, budget)


# ---------------------------------------------------------------- c.e. sets

class CeSet:
    """A monotone enumeration.

    ``entry(x)`` is the stage at which x appears, or None if it never
    appears within the enumeration's step cap. The enumeration at stage s
    is {x <= s : entry(x) <= s}.
    """

    label = "set"

    def __init__(self):
        self._entries: dict[int, int | None] = {}
        self._buckets: dict[int, list[int]] = {}
        self._scanned = -1

    def raw_entry(self, x: int) -> int | None:
        raise NotImplementedError

    def entry(self, x: int) -> int | None:
        if x in self._entries:
            return self._entries[x]
        e = self.raw_entry(x)
        if e is not None:
            e = max(e, x)
        self._entries[x] = e
        return e

    def contains(self, s: int, x: int) -> bool:
        if x > s:
            return False
        e = self.entry(x)
        return e is not None and e <= s

    def enumerated(self, s: int) -> set[int]:
        return {x for x in range(s + 1) if self.contains(s, x)}

    def listing(self, s: int) -> list[int]:
        """Elements enumerated by stage s, in order of appearance."""
        self._scan(s)
        out = []
        for t in range(s + 1):
            out.extend(self._buckets.get(t, ()))
        return out

    def new_at(self, s: int) -> list[int]:
        """Elements entering exactly at stage s, in increasing order."""
        self._scan(s)
        return self._buckets.get(s, [])

    def _scan(self, s: int) -> None:
        while self._scanned < s:
            self._scanned += 1
            x = self._scanned
            e = self.entry(x)
            if e is not None:
                bucket = self._buckets.setdefault(e, [])
                bucket.append(x)
                bucket.sort()

    def __repr__(self) -> str:
        return f"<CeSet {self.label}>"


class ProgramDomain(CeSet):
    def __init__(self, prog: Program, step_cap: int = 10**5):
        super().__init__()
        self.prog = prog
        self.step_cap = step_cap
        self.label = f"W[{prog.name}]"

    def raw_entry(self, x: int) -> int | None:
        out = self.prog.evaluate(x, self.step_cap)
        return out.steps if isinstance(out, Converged) else None


class PredicateSet(CeSet):
    """Set given by an entry-stage function (None = never)."""

    def __init__(self, entry_fn: Callable[[int], int | None], label: str = "set"):
        super().__init__()
        self.entry_fn = entry_fn
        self.label = label

    def raw_entry(self, x: int) -> int | None:
        return self.entry_fn(x)


def finite_set(elements: Iterable[int], label: str | None = None) -> CeSet:
    members = frozenset(elements)
    return PredicateSet(lambda x: 0 if x in members else None,
                        label or "{" + ",".join(map(str, sorted(members))) + "}")


def decidable_set(pred: Callable[[int], bool], label: str = "decidable") -> CeSet:
    return PredicateSet(lambda x: 0 if pred(x) else None, label)


class ColumnSet(CeSet):
    def __init__(self, parent: CeSet, k: int):
        super().__init__()
        self.parent = parent
        self.k = k
        self.label = f"{parent.label}^[{k}]"

    def raw_entry(self, x: int) -> int | None:
        return self.parent.entry(pair(self.k, x))


def w(e: "int | str | Program", registry: Registry | None = None, step_cap: int = 10**5) -> CeSet:
    """W_e: the domain of program e, dovetailed."""
    return ProgramDomain((registry or DEFAULT_REGISTRY).resolve(e), step_cap)


def column(W: CeSet, k: int) -> CeSet:
    return ColumnSet(W, k)


def empty_set() -> CeSet:
    return PredicateSet(lambda x: None, "empty")


def omega() -> CeSet:
    return PredicateSet(lambda x: 0, "omega")

"""The binary-counter case studies: builders, well-formedness, experiments.

A counter is a little-endian list of bits in the heap. Three flavours:

  sequential-bankers  - plain bit cells; every one-bit carries one credit.
  credit-thunked      - each zero-bit's tail is a 1-credit lazy increment
                        thunk; incrementing saves two credits on a fresh
                        thunk and forces it.
  debit-thunked       - each zero-bit's tail is an unaccessed memoised
                        record owing one debit.

Builders lay the binary digits of the value out as cells (least significant
at the root, allocated last), so the potential of a fresh counter is the
one-bit count (sequential) or the zero-bit count (thunked flavours).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, TextIO

from .eval_real import FuncEnv, StuckError, eval_real
from .heap import (
    BANKERS,
    CREDIT,
    Cell,
    CreditAnn,
    DEBIT,
    DebitAnn,
    Heap,
    HeirAnn,
    MemoHV,
    NO_ANN,
    REAL,
    erase,
    potential,
)
from .models import get_model
from .syntax import (
    Call,
    Case,
    Expr,
    FoldHV,
    Force,
    FuncDef,
    HeapLit,
    Inl,
    Inr,
    LazyHV,
    Let,
    Pair,
    Ptr,
    Save,
    Spend,
    Split,
    Unfold,
    UNIT,
    Val,
    Value,
    Var,
)

MAX_COUNTER_BITS = 48

END = Inl(UNIT)
ZERO = Inl(UNIT)
ONE = Inr(UNIT)


def cons(bit: Value, rest: Value) -> Value:
    return Inr(Pair(bit, rest))


class CounterSpec(Enum):
    SEQUENTIAL = "seq"
    CREDIT_THUNKED = "credit"
    DEBIT_THUNKED = "debit"


HOME_MODEL = {
    CounterSpec.SEQUENTIAL: BANKERS,
    CounterSpec.CREDIT_THUNKED: CREDIT,
    CounterSpec.DEBIT_THUNKED: DEBIT,
}


# ---------------------------------------------------------------------------
# Increment sources
# ---------------------------------------------------------------------------


def _seq_env() -> dict[str, FuncDef]:
    # incr(c): flip bits until a zero; save a credit on each created one-bit,
    # spend the flipped one-bit's credit on the recursion.
    body = Let(
        "u",
        Unfold(Var("c")),
        Case(
            Var("u"),
            "e",
            Let("f", HeapLit(FoldHV(cons(ONE, Var("c")))), Save(1, Var("f"))),
            "p",
            Split(
                "n",
                "a",
                Var("p"),
                Case(
                    Var("n"),
                    "z",
                    Let("f", HeapLit(FoldHV(cons(ONE, Var("a")))), Save(1, Var("f"))),
                    "o",
                    Spend(
                        1,
                        Var("c"),
                        Let(
                            "r",
                            Call("incr", Var("a")),
                            HeapLit(FoldHV(cons(ZERO, Var("r")))),
                        ),
                    ),
                ),
            ),
        ),
    )
    return {"incr": FuncDef("c", body)}


def _thunked_env(debit: bool) -> dict[str, FuncDef]:
    # The delayed increment. Zero branch: pay the stored thunk and force it.
    # One branch: delay the carry; the credit flavour funds it with one credit,
    # the debit flavour leaves the single debit in place.
    carry: Expr = Let(
        "t",
        HeapLit(LazyHV("Incr", Var("a"))),
        HeapLit(FoldHV(cons(ZERO, Var("t"))))
        if debit
        else Let("s", Save(1, Var("t")), HeapLit(FoldHV(cons(ZERO, Var("s"))))),
    )
    body = Let(
        "u",
        Unfold(Var("c")),
        Case(
            Var("u"),
            "e",
            HeapLit(FoldHV(cons(ONE, Var("c")))),
            "p",
            Split(
                "n",
                "a",
                Var("p"),
                Case(
                    Var("n"),
                    "z",
                    Let(
                        "s",
                        Save(1, Var("a")),
                        Let("f", Force(Var("s")), HeapLit(FoldHV(cons(ONE, Var("f"))))),
                    ),
                    "o",
                    carry,
                ),
            ),
        ),
    )
    env = {"Incr": FuncDef("c", body)}
    if debit:
        env["hold"] = FuncDef("x", Val(Var("x")))
    return env


def counter_env(spec: CounterSpec) -> dict[str, FuncDef]:
    if spec is CounterSpec.SEQUENTIAL:
        return _seq_env()
    return _thunked_env(debit=spec is CounterSpec.DEBIT_THUNKED)


def incr_expr(spec: CounterSpec, root: Value) -> Expr:
    """One increment of the counter at `root`.

    Sequential: a call (cost 2 under Bankers). Thunked: allocate a delayed
    increment, fund it, force it (cost exactly 2 under credits; dual cost
    (0, <=2) under debits).
    """
    if spec is CounterSpec.SEQUENTIAL:
        return Call("incr", root)
    amount = 1 if spec is CounterSpec.DEBIT_THUNKED else 2
    return Let(
        "t",
        HeapLit(LazyHV("Incr", root)),
        Let("s", Save(amount, Var("t")), Force(Var("s"))),
    )


def thunk_incr_expr(root: Value) -> Expr:
    """The delayed-increment computation itself, as a top-level call."""
    return Call("Incr", root)


# ---------------------------------------------------------------------------
# Builders
# ---------------------------------------------------------------------------


def build_counter(spec: CounterSpec, value: int) -> tuple[Heap, int]:
    """A fresh counter encoding `value` little-endian; counter_wf holds."""
    if value < 0 or value >= 2**MAX_COUNTER_BITS:
        raise ValueError(f"counter values must fit {MAX_COUNTER_BITS} bits")
    seq = spec is CounterSpec.SEQUENTIAL
    zero_ann = CreditAnn(0) if seq else NO_ANN
    heap = Heap.empty()
    heap, ptr = heap.alloc(FoldHV(END), zero_ann)
    bits = []
    v = value
    while v:
        bits.append(v & 1)
        v >>= 1
    for bit in reversed(bits):
        if bit == 1:
            ann = CreditAnn(1) if seq else zero_ann
            heap, ptr = heap.alloc(FoldHV(cons(ONE, Ptr(ptr))), ann)
        elif spec is CounterSpec.SEQUENTIAL:
            heap, ptr = heap.alloc(FoldHV(cons(ZERO, Ptr(ptr))), zero_ann)
        elif spec is CounterSpec.CREDIT_THUNKED:
            heap, thunk = heap.alloc(LazyHV("Incr", Ptr(ptr)), CreditAnn(1))
            heap, ptr = heap.alloc(FoldHV(cons(ZERO, Ptr(thunk))), NO_ANN)
        else:
            mark = heap.counter
            ann = DebitAnn(1, "hold", Ptr(ptr), mark, mark, kreal=1)
            heap, thunk = heap.alloc(MemoHV(Ptr(ptr)), ann)
            heap, ptr = heap.alloc(FoldHV(cons(ZERO, Ptr(thunk))), NO_ANN)
    return heap, ptr


# ---------------------------------------------------------------------------
# Well-formedness
# ---------------------------------------------------------------------------


def counter_wf(
    heap: Heap, root: int, spec: CounterSpec, *, check_annotations: bool = True
) -> bool:
    """Structural walk deriving the counter predicate for `spec`.

    Accepts the images of the predicate under each model's accessibility
    relation: credit thunks may hold extra credits or be memoised already,
    debit records may be part-paid or accessed. The sequential flavour is
    strict (exactly one credit per one-bit), which is the point of the
    persistent-usage failure. `check_annotations=False` walks the erased
    structure only (real-semantics experiments).
    """
    seen: set[int] = set()
    strict = spec is CounterSpec.SEQUENTIAL and check_annotations

    def credits(cell: Cell) -> int:
        return cell.ann.count if isinstance(cell.ann, CreditAnn) else -1

    def walk(ptr: int) -> bool:
        while True:
            if ptr in seen:
                return False
            seen.add(ptr)
            cell = heap.get(ptr)
            if cell is None or not isinstance(cell.hv, FoldHV):
                return False
            match cell.hv.value:
                case Inl():
                    return not strict or credits(cell) == 0
                case Inr(Pair(bit, Ptr(tail))):
                    match bit:
                        case Inr():  # one-bit
                            if strict and credits(cell) != 1:
                                return False
                            ptr = tail
                        case Inl():  # zero-bit
                            if strict and credits(cell) != 0:
                                return False
                            if spec is CounterSpec.SEQUENTIAL:
                                ptr = tail
                                continue
                            nxt = _through_thunk(heap, tail, spec, seen, check_annotations)
                            if nxt is None:
                                return False
                            ptr = nxt
                        case _:
                            return False
                case _:
                    return False

    return walk(root)


def _through_thunk(
    heap: Heap, ptr: int, spec: CounterSpec, seen: set[int], check_annotations: bool
) -> Optional[int]:
    """Check the thunk cell behind a zero-bit; return the tail counter root."""
    if ptr in seen:
        return None
    seen.add(ptr)
    cell = heap.get(ptr)
    if cell is None:
        return None
    if spec is CounterSpec.CREDIT_THUNKED:
        match cell.hv:
            case LazyHV("Incr", Ptr(tail), _):
                if not check_annotations:
                    return tail
                if isinstance(cell.ann, CreditAnn) and cell.ann.count >= 1:
                    return tail
                return None
            case MemoHV(Ptr(tail)):
                # Already forced: the memoised value is the incremented tail,
                # itself a counter; extra credits cannot sit on a memo cell.
                return None if isinstance(cell.ann, CreditAnn) else tail
        return None
    match cell.hv:
        case MemoHV(Ptr(tail)):
            if isinstance(cell.ann, DebitAnn):
                if check_annotations and cell.ann.debits > 1:
                    return None
                return tail
            return tail  # accessed record
        case LazyHV("Incr", Ptr(tail), _) if not check_annotations:
            # Erased view of a debit counter: records revert to lazy.
            return tail
        case LazyHV("hold", Ptr(tail), _) if not check_annotations:
            return tail
    return None


def counter_value(heap: Heap, root: int) -> int:
    """Decode a sequential counter's value (digit-faithful; no thunks)."""
    value = 0
    shift = 0
    ptr = root
    for _ in range(MAX_COUNTER_BITS + 1):
        cell = heap.get(ptr)
        if cell is None or not isinstance(cell.hv, FoldHV):
            raise ValueError(f"not a counter cell at {ptr}")
        match cell.hv.value:
            case Inl():
                return value
            case Inr(Pair(bit, Ptr(rest))):
                if isinstance(bit, Inr):
                    value |= 1 << shift
                shift += 1
                ptr = rest
            case _:
                raise ValueError(f"not a counter cell at {ptr}")
    raise ValueError("counter too long")


def trailing_ones(value: int) -> int:
    count = 0
    while value & 1:
        count += 1
        value >>= 1
    return count


# ---------------------------------------------------------------------------
# Experiments
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentRow:
    step: int
    model_cost: Optional[int]
    real_cost: Optional[int]
    phi: Optional[int]
    wf: bool
    stuck: Optional[str]


@dataclass
class ExperimentReport:
    spec: CounterSpec
    model: str
    usage: str
    rows: list[ExperimentRow] = field(default_factory=list)

    @property
    def total_model_cost(self) -> int:
        return sum(r.model_cost for r in self.rows if r.model_cost is not None)

    @property
    def total_real_cost(self) -> int:
        return sum(r.real_cost for r in self.rows if r.real_cost is not None)

    @property
    def stuck_steps(self) -> list[int]:
        return [r.step for r in self.rows if r.stuck is not None]

    def write_csv(self, out: TextIO) -> None:
        writer = csv.writer(out)
        writer.writerow(["step", "model_cost", "real_cost", "phi", "wf", "stuck"])
        for r in self.rows:
            writer.writerow(
                [
                    r.step,
                    "" if r.model_cost is None else r.model_cost,
                    "" if r.real_cost is None else r.real_cost,
                    "" if r.phi is None else r.phi,
                    int(r.wf),
                    r.stuck or "",
                ]
            )


def run_increment_experiment(
    spec: CounterSpec,
    n_increments: int,
    usage: str = "sequential",
    *,
    start_value: int = 0,
    model: Optional[str] = None,
    real_costs: bool = True,
) -> ExperimentReport:
    """Drive `n_increments` increments and record costs, potential and wf.

    `usage` is "sequential" (thread each result into the next increment) or
    "persistent" (apply every increment to the starting version). Stuck
    increments are report data; the experiment stops at the first one.
    """
    if usage not in ("sequential", "persistent"):
        raise ValueError(f"unknown usage {usage!r}")
    model_name = model or HOME_MODEL[spec]
    cost_model = get_model(model_name)
    env = counter_env(spec)
    heap, root = build_counter(spec, start_value)
    if model_name == REAL:
        heap = erase(heap, HOME_MODEL[spec])
    report = ExperimentReport(spec, model_name, usage)
    for step in range(n_increments):
        expr = incr_expr(spec, Ptr(root))
        real_cost = None
        if real_costs and model_name != REAL:
            real_cost = eval_real(env, cost_model.erase(heap), expr, reuse_heap=True).steps
        try:
            out = cost_model.evaluate(env, heap, expr, reuse_heap=True)
        except StuckError as stuck:
            report.rows.append(
                ExperimentRow(step, None, real_cost, None, wf=False, stuck=stuck.reason)
            )
            break
        if model_name == REAL:
            real_cost = out.steps
        new_root = out.value.ident if isinstance(out.value, Ptr) else None
        wf = new_root is not None and counter_wf(
            out.heap, new_root, spec, check_annotations=model_name != REAL
        )
        phi = None if model_name == REAL else potential(out.heap, model_name)
        report.rows.append(
            ExperimentRow(step, out.cost, real_cost, phi, wf=wf, stuck=None)
        )
        heap = out.heap
        if usage == "sequential" and new_root is not None:
            root = new_root
    return report

"""Annotated heaps shared by all evaluators.

A heap maps integer pointers to annotated heap values and carries its own
allocator counter, so no global mutable state exists. Public update operations
return new heaps; evaluators use a private mutable view (one copy per run).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterator, Optional

from .syntax import (
    FoldHV,
    HeapValue,
    Inl,
    Inr,
    Lam,
    LazyHV,
    MemoHV,
    Pair,
    Ptr,
    Unit,
    Value,
    Var,
)

Pointer = int

REAL = "real"
BANKERS = "bankers"
CREDIT = "credit"
CREDIT_INHERIT = "credit-inherit"
DEBIT = "debit"
DEBIT_INHERIT = "debit-inherit"
DEBIT_UNSOUND = "debit-unsound"

MODELS = (REAL, BANKERS, CREDIT, CREDIT_INHERIT, DEBIT, DEBIT_INHERIT, DEBIT_UNSOUND)

_CREDIT_FAMILY = (CREDIT, CREDIT_INHERIT)
_DEBIT_FAMILY = (DEBIT, DEBIT_INHERIT, DEBIT_UNSOUND)


class HeapError(Exception):
    """A malformed heap operation (dangling pointer, corrupt record...)."""


class NegativePotentialError(HeapError):
    """The debit potential went negative: a broken record invariant, never clamped."""


# ---------------------------------------------------------------------------
# Annotations
# ---------------------------------------------------------------------------


class Annotation:
    __slots__ = ()


@dataclass(frozen=True)
class NoAnn(Annotation):
    pass


NO_ANN = NoAnn()


@dataclass(frozen=True)
class CreditAnn(Annotation):
    count: int

    def __post_init__(self) -> None:
        if self.count < 0:
            raise HeapError("credit counts may not be negative")


@dataclass(frozen=True)
class HeirAnn(Annotation):
    """Credit inheritance: the thunk that receives credits saved on this memo cell."""

    heir: Pointer


@dataclass(frozen=True)
class DebitAnn(Annotation):
    """An unaccessed memoised thunk: its remaining debits (possibly negative),
    the recorded computation, the interval of pointers it allocated, and the
    real cost of the recorded computation from the pre-speculation heap."""

    debits: int
    func: str
    arg: Value
    alloc_lo: Pointer
    alloc_hi: Pointer
    kreal: int


@dataclass(frozen=True)
class Cell:
    hv: HeapValue
    ann: Annotation = NO_ANN


# ---------------------------------------------------------------------------
# Heap
# ---------------------------------------------------------------------------


def _pointers_of(v) -> Iterator[Pointer]:
    match v:
        case Ptr(ident):
            yield ident
        case Inl(inner) | Inr(inner):
            yield from _pointers_of(inner)
        case Pair(left, right):
            yield from _pointers_of(left)
            yield from _pointers_of(right)
        case FoldHV(value) | MemoHV(value):
            yield from _pointers_of(value)
        case LazyHV(_, arg, _):
            yield from _pointers_of(arg)
        case Unit() | Var() | Lam():
            # Lambda bodies contain no pointer literals: pointers only arise
            # from allocation, and source text cannot write them.
            return


@dataclass(frozen=True)
class Heap:
    cells: dict[Pointer, Cell]
    counter: Pointer = 0

    @staticmethod
    def empty() -> "Heap":
        return Heap({}, 0)

    def __contains__(self, ptr: Pointer) -> bool:
        return ptr in self.cells

    def __len__(self) -> int:
        return len(self.cells)

    def get(self, ptr: Pointer) -> Optional[Cell]:
        return self.cells.get(ptr)

    def pointers(self) -> list[Pointer]:
        """Pointers in allocation order (ids increase in allocation order)."""
        return sorted(self.cells)

    def alloc(self, hv: HeapValue, ann: Annotation = NO_ANN) -> tuple["Heap", Pointer]:
        """Allocate at the smallest unused id >= the counter.

        Deterministic given the heap and heap value; two evaluations from equal
        heaps allocate identical pointers.
        """
        for p in _pointers_of(hv):
            if p not in self.cells:
                raise HeapError(f"open heap value: dangling pointer {p}")
        ident = self.counter
        while ident in self.cells:
            ident += 1
        cells = dict(self.cells)
        cells[ident] = Cell(hv, ann)
        return Heap(cells, ident + 1), ident

    def set(self, ptr: Pointer, cell: Cell) -> "Heap":
        if ptr not in self.cells:
            raise HeapError(f"unbound pointer {ptr}")
        cells = dict(self.cells)
        cells[ptr] = cell
        return Heap(cells, self.counter)

    def with_counter(self, counter: Pointer) -> "Heap":
        return Heap(self.cells, counter)

    def same_cells(self, other: "Heap") -> bool:
        """Structural equality of the cell maps; counters are not compared."""
        return self.cells == other.cells

    def check_closed(self) -> None:
        """Debug scan: every pointer inside a stored value is in the domain."""
        for ptr, cell in self.cells.items():
            for p in _pointers_of(cell.hv):
                if p not in self.cells:
                    raise HeapError(f"cell {ptr} references dangling pointer {p}")
            if isinstance(cell.ann, HeirAnn) and cell.ann.heir not in self.cells:
                raise HeapError(f"cell {ptr} names dangling heir {cell.ann.heir}")
            if isinstance(cell.ann, DebitAnn):
                for p in _pointers_of(cell.ann.arg):
                    if p not in self.cells:
                        raise HeapError(f"record at {ptr} references dangling pointer {p}")


# ---------------------------------------------------------------------------
# Erasure and potential
# ---------------------------------------------------------------------------


def erase(heap: Heap, model: str) -> Heap:
    """Embed a model heap into a real (annotation-free) heap.

    Bankers/credit models drop annotations. Debit models additionally revert
    every unaccessed memo record to its lazy computation and remove the
    record's own allocations, outermost record first (nested records fall
    inside the removed interval and disappear with it).
    """
    if model == REAL:
        return Heap(dict(heap.cells), heap.counter)
    if model in _DEBIT_FAMILY:
        return _erase_debit(heap)
    cells = {ptr: Cell(cell.hv, NO_ANN) for ptr, cell in heap.cells.items()}
    return Heap(cells, heap.counter)


def _erase_debit(heap: Heap) -> Heap:
    order = sorted(heap.cells)
    out: dict[Pointer, Cell] = {}
    i = len(order) - 1
    while i >= 0:
        ptr = order[i]
        cell = heap.cells[ptr]
        if isinstance(cell.ann, DebitAnn):
            ann = cell.ann
            if not isinstance(cell.hv, MemoHV):
                raise HeapError(f"debit record at {ptr} is not a memo cell")
            out[ptr] = Cell(LazyHV(ann.func, ann.arg), NO_ANN)
            i -= 1
            while i >= 0 and order[i] >= ann.alloc_lo:
                if order[i] >= ann.alloc_hi:
                    raise HeapError(f"corrupt record at {ptr}: stray pointer {order[i]}")
                i -= 1
        else:
            out[ptr] = Cell(cell.hv, NO_ANN)
            i -= 1
    return Heap(out, heap.counter)


def potential(heap: Heap, model: str) -> int:
    """The potential of a heap under a model.

    Real: 0. Bankers: total credits. Credit models: credits on lazy cells.
    Debit models: sum over unaccessed memo records of (real cost - debits),
    which must be nonnegative; a negative total is reported, never clamped.
    """
    if model == REAL:
        return 0
    if model == BANKERS:
        return sum(
            cell.ann.count for cell in heap.cells.values() if isinstance(cell.ann, CreditAnn)
        )
    if model in _CREDIT_FAMILY:
        return sum(
            cell.ann.count
            for cell in heap.cells.values()
            if isinstance(cell.ann, CreditAnn) and isinstance(cell.hv, LazyHV)
        )
    if model in _DEBIT_FAMILY:
        total = 0
        for ptr, cell in heap.cells.items():
            if isinstance(cell.ann, DebitAnn):
                total += cell.ann.kreal - cell.ann.debits
        if total < 0:
            raise NegativePotentialError(f"debit potential is negative: {total}")
        return total
    raise ValueError(f"unknown model {model!r}")


def validate_heap(heap: Heap, model: str) -> None:
    """Check the model's annotation discipline for every cell."""
    heap.check_closed()
    for ptr, cell in heap.cells.items():
        ann = cell.ann
        if model == REAL:
            if not isinstance(ann, NoAnn):
                raise HeapError(f"real heaps carry no annotations (cell {ptr})")
        elif model == BANKERS:
            if not isinstance(ann, CreditAnn):
                raise HeapError(f"bankers cells carry credit counts (cell {ptr})")
        elif model in _CREDIT_FAMILY:
            if isinstance(cell.hv, LazyHV):
                if not isinstance(ann, CreditAnn):
                    raise HeapError(f"lazy cell {ptr} must carry a credit count")
            elif isinstance(ann, CreditAnn):
                raise HeapError(f"credit count on non-lazy cell {ptr}")
            elif isinstance(ann, HeirAnn):
                if model != CREDIT_INHERIT or not isinstance(cell.hv, MemoHV):
                    raise HeapError(f"heir annotation misplaced on cell {ptr}")
            elif not isinstance(ann, NoAnn):
                raise HeapError(f"bad annotation on cell {ptr}")
        elif model in _DEBIT_FAMILY:
            if isinstance(ann, DebitAnn):
                if not isinstance(cell.hv, MemoHV):
                    raise HeapError(f"debit record on non-memo cell {ptr}")
                if ann.debits > ann.kreal:
                    raise HeapError(
                        f"record at {ptr} owes {ann.debits} debits"
                        f" but its computation costs {ann.kreal}"
                    )
            elif not isinstance(ann, NoAnn):
                raise HeapError(f"bad annotation on cell {ptr}")
        else:
            raise ValueError(f"unknown model {model!r}")


# ---------------------------------------------------------------------------
# JSON dump format
# ---------------------------------------------------------------------------


def _value_to_json(v: Value):
    match v:
        case Ptr(ident):
            return {"ptr": ident}
        case Unit():
            return "unit"
        case Var(name):
            return {"var": name}
        case Inl(inner):
            return {"inl": _value_to_json(inner)}
        case Inr(inner):
            return {"inr": _value_to_json(inner)}
        case Pair(left, right):
            return {"pair": [_value_to_json(left), _value_to_json(right)]}
        case Lam(param, _):
            return {"lam": param}
    raise TypeError(f"not a value: {v!r}")


def _hv_to_json(hv: HeapValue):
    match hv:
        case FoldHV(value):
            return {"fold": _value_to_json(value)}
        case LazyHV(func, arg, 0):
            return {"lazy": func, "arg": _value_to_json(arg)}
        case LazyHV(func, arg, split):
            return {"lazy": func, "arg": _value_to_json(arg), "split": split}
        case MemoHV(value):
            return {"memo": _value_to_json(value)}
    raise TypeError(f"not a heap value: {hv!r}")


def _ann_to_json(ann: Annotation):
    match ann:
        case NoAnn():
            return {"none": True}
        case CreditAnn(count):
            return {"credits": count}
        case HeirAnn(heir):
            return {"heir": heir}
        case DebitAnn(debits, func, arg, lo, hi, kreal):
            return {
                "debits": debits,
                "func": func,
                "arg": _value_to_json(arg),
                "allocs": list(range(lo, hi)),
                "kreal": kreal,
            }
    raise TypeError(f"not an annotation: {ann!r}")


def heap_to_json(heap: Heap) -> list[dict]:
    """The dump format: an array of {ptr, hv, ann} in insertion order."""
    return [
        {"ptr": ptr, "hv": _hv_to_json(cell.hv), "ann": _ann_to_json(cell.ann)}
        for ptr, cell in sorted(heap.cells.items())
    ]

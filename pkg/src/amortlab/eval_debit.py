"""Okasaki-style debit evaluators with speculative thunk evaluation.

Creating a lazy thunk immediately runs its computation, does not pay for it,
and records the unshared cost as debits on the resulting memoised record.
Costs are dual (k, k'): actual steps taken and debits discharged. A record
becomes accessible once its debits reach zero or less; `save` pays debits
down (possibly below zero) at cost (0, m).

Three modes:
  plain        - the whole unshared cost becomes the record's debits;
  inheritance  - `(lazy! k1 F v)` reports k1 of the unshared cost at the
                 creation site and records only the remainder as debits;
  unsound      - the deliberately wrong rule that also buries the discharged
                 debits in the record; exists so the soundness harness can
                 demonstrably reject it.
"""

from __future__ import annotations

from .eval_real import EvalOutcome, FuncEnv, RealEvaluator, _EMPTY, real_cost_of_thunk
from .heap import (
    Cell,
    DEBIT,
    DEBIT_INHERIT,
    DEBIT_UNSOUND,
    DebitAnn,
    Heap,
    NO_ANN,
    Pointer,
)
from .syntax import Expr, HeapValue, LazyHV, MemoHV, Ptr, Value

PLAIN = "plain"
INHERITANCE = "inheritance"
UNSOUND_EXAMPLE2 = "unsound_example2"

_MODE_TO_MODEL = {
    PLAIN: DEBIT,
    INHERITANCE: DEBIT_INHERIT,
    UNSOUND_EXAMPLE2: DEBIT_UNSOUND,
}


class RecordInvariantError(Exception):
    """A record was about to owe more debits than its computation costs;
    outside the unsound mode this is an implementation bug, not analyst error."""


class DebitEvaluator(RealEvaluator):
    def __init__(self, env: FuncEnv, mode: str = PLAIN, **kwargs):
        super().__init__(env, **kwargs)
        if mode not in _MODE_TO_MODEL:
            raise ValueError(f"unknown debit mode {mode!r}")
        self.mode = mode
        self.model = _MODE_TO_MODEL[mode]

    # -- allocation and speculation ------------------------------------------

    def _eval_heaplit(self, hv: HeapValue, e: Expr):
        if not isinstance(hv, LazyHV):
            ptr = self._alloc(hv, NO_ANN)
            self._emit("memo" if isinstance(hv, MemoHV) else "fold", 0, e)
            return Ptr(ptr), 0, 0, _EMPTY
        if hv.func not in self.env:
            raise self._stuck(f"unbound function {hv.func!r}", e)
        if hv.split and self.mode != INHERITANCE:
            raise self._stuck("split-annotation-outside-inheritance-mode", e)
        # The computation runs now, from the current heap, on the same
        # allocator stream; the record's watermark interval is exactly the
        # pointers it allocates.
        snapshot = Heap(dict(self._cells), self._counter)
        lo = self._counter
        w, k, kp, _ = self._run_thunk_body(hv.func, hv.arg, e)
        hi = self._counter
        kreal = real_cost_of_thunk(self.env, snapshot, hv.func, hv.arg, model=self.model)
        if self.mode == UNSOUND_EXAMPLE2:
            reported_k, reported_kp, debits = 0, 0, k + kp
        else:
            k1 = hv.split
            if k1 > k:
                raise self._stuck("split-exceeds-unshared-cost", e)
            reported_k, reported_kp, debits = k1, kp, k - k1
            limit = kreal
            if self.mode == INHERITANCE:
                limit += self._child_kreal_sum(lo, hi)
            if debits > limit:
                raise RecordInvariantError(
                    f"record debits {debits} exceed the recorded cost bound {limit}"
                )
        ann = DebitAnn(debits, hv.func, hv.arg, lo, hi, kreal)
        ptr = self._alloc(MemoHV(w), ann)
        self._emit(
            "lazy", 0, e, debits_before=None, debits_after=debits, k=reported_k, kprime=reported_kp
        )
        return Ptr(ptr), reported_k, reported_kp, _EMPTY

    def _child_kreal_sum(self, lo: Pointer, hi: Pointer) -> int:
        return sum(
            cell.ann.kreal
            for ptr, cell in self._cells.items()
            if lo <= ptr < hi and isinstance(cell.ann, DebitAnn)
        )

    # -- force / save ----------------------------------------------------------

    def _force(self, ident: Pointer, e: Expr):
        cell = self._cells.get(ident)
        if cell is None:
            raise self._stuck("unbound-pointer", e)
        if isinstance(cell.hv, MemoHV):
            if isinstance(cell.ann, DebitAnn):
                if cell.ann.debits > 0:
                    raise self._stuck("debits-remaining", e)
                self._note_force(ident)
                self._cells[ident] = Cell(cell.hv, NO_ANN)
                self._emit(
                    "force", 0, e, debits_before=cell.ann.debits, debits_after=None, k=0, kprime=0
                )
                return cell.hv.value, 0, 0, _EMPTY
            self._emit("recall", 0, e)
            return cell.hv.value, 0, 0, _EMPTY
        # Lazy cells cannot appear in a debit heap: allocation speculates them
        # away. No rule applies to one that was smuggled in.
        raise self._stuck("force-on-non-thunk", e)

    def _save(self, count: int, target: Value, e: Expr):
        match target:
            case Ptr(ident):
                cell = self._cells.get(ident)
                if cell is None:
                    raise self._stuck("unbound-pointer", e)
                if isinstance(cell.hv, MemoHV):
                    if isinstance(cell.ann, DebitAnn):
                        before = cell.ann.debits
                        after = before - count
                        self._cells[ident] = Cell(
                            cell.hv,
                            DebitAnn(
                                after,
                                cell.ann.func,
                                cell.ann.arg,
                                cell.ann.alloc_lo,
                                cell.ann.alloc_hi,
                                cell.ann.kreal,
                            ),
                        )
                        self._emit(
                            "save", 0, e, debits_before=before, debits_after=after, k=0, kprime=count
                        )
                        return target, 0, count, _EMPTY
                    self._emit("waste", 0, e, k=0, kprime=count)
                    return target, 0, count, _EMPTY
                raise self._stuck("save-on-non-thunk", e)
        raise self._stuck("save-on-non-pointer", e)

    def _spend(self, count: int, target: Value, body: Expr, env: dict[str, Value], e: Expr):
        raise self._stuck("spend-outside-bankers-model", e)

    def _pass(self, heir: Value, e: Expr):
        raise self._stuck("pass-outside-inheritance-model", e)


def eval_debit(
    env: FuncEnv,
    heap: Heap,
    expr: Expr,
    mode: str = PLAIN,
    *,
    trace: bool = False,
    record_forces: bool = False,
    reuse_heap: bool = False,
) -> EvalOutcome:
    """Evaluate under the debit semantics in the given mode."""
    return DebitEvaluator(env, mode, trace=trace, record_forces=record_forces).run(heap, expr, reuse_heap=reuse_heap)

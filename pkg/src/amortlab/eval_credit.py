"""The persistent credit evaluators: credit passing and credit inheritance.

Credits live on lazy thunks only. Forcing consumes them: the body must cost
at most (passing) or exactly (inheritance) the stored amount, and the force
itself reports zero steps. Saving onto a memoised thunk wastes the credits
under passing; under inheritance a memoised thunk may carry an heir that
inherits them instead.

The paper's (pass) rule picks the passed amount nondeterministically, pinned
only by the force's exact-spend premise. Here it is deterministic
leftover-passing: a pass forwards precisely the forced thunk's remaining
budget, so a body whose work after the pass is nonzero fails the exact-spend
check and is stuck.
"""

from __future__ import annotations

from dataclasses import dataclass

from .eval_real import EvalOutcome, FuncEnv, RealEvaluator, _EMPTY
from .heap import (
    CREDIT,
    CREDIT_INHERIT,
    Cell,
    CreditAnn,
    Heap,
    HeirAnn,
    NO_ANN,
    Pointer,
)
from .syntax import Expr, HeapValue, LazyHV, MemoHV, Ptr, Value

PASSING = "passing"
INHERITANCE = "inheritance"


@dataclass
class _Frame:
    """Budget of the thunk body currently being forced."""

    budget: int
    spent: int = 0
    passed: bool = False


class CreditEvaluator(RealEvaluator):
    def __init__(self, env: FuncEnv, mode: str = PASSING, **kwargs):
        super().__init__(env, **kwargs)
        if mode not in (PASSING, INHERITANCE):
            raise ValueError(f"unknown credit mode {mode!r}")
        self.mode = mode
        self.model = CREDIT if mode == PASSING else CREDIT_INHERIT
        self._frames: list[_Frame] = []

    # -- cost accounting ----------------------------------------------------

    def _charge(self, amount: int) -> None:
        if self._frames:
            self._frames[-1].spent += amount

    # -- allocation ---------------------------------------------------------

    def _eval_heaplit(self, hv: HeapValue, e: Expr):
        if isinstance(hv, LazyHV):
            if hv.func not in self.env:
                raise self._stuck(f"unbound function {hv.func!r}", e)
            ptr = self._alloc(hv, CreditAnn(0))
            self._emit("lazy", 0, e, credits_after=0)
        else:
            ptr = self._alloc(hv, NO_ANN)
            self._emit("memo" if isinstance(hv, MemoHV) else "fold", 0, e)
        return Ptr(ptr), 0, 0, _EMPTY

    # -- save / waste / inherit ---------------------------------------------

    def _save(self, count: int, target: Value, e: Expr):
        match target:
            case Ptr(ident):
                cell = self._cells.get(ident)
                if cell is None:
                    raise self._stuck("unbound-pointer", e)
                if isinstance(cell.hv, LazyHV):
                    before = cell.ann.count if isinstance(cell.ann, CreditAnn) else 0
                    self._cells[ident] = Cell(cell.hv, CreditAnn(before + count))
                    self._charge(count)
                    self._emit(
                        "save", count, e, credits_before=before, credits_after=before + count
                    )
                    return target, count, 0, _EMPTY
                if isinstance(cell.hv, MemoHV):
                    if self.mode == INHERITANCE and isinstance(cell.ann, HeirAnn):
                        return self._inherit(count, ident, cell.ann.heir, e)
                    self._charge(count)
                    self._emit("waste", count, e)
                    return target, count, 0, _EMPTY
                raise self._stuck("save-on-non-thunk", e)
        raise self._stuck("save-on-non-pointer", e)

    def _inherit(self, count: int, origin: Pointer, heir: Pointer, e: Expr):
        # Heir chains are followed iteratively; the heaps the rules build
        # cannot form a cycle, but corrupted inputs could.
        seen = {origin}
        target = heir
        while True:
            if target in seen:
                raise self._stuck("heir-cycle", e)
            seen.add(target)
            cell = self._cells.get(target)
            if cell is None:
                raise self._stuck("unbound-pointer", e)
            if isinstance(cell.hv, LazyHV):
                before = cell.ann.count if isinstance(cell.ann, CreditAnn) else 0
                self._cells[target] = Cell(cell.hv, CreditAnn(before + count))
                self._charge(count)
                self._emit(
                    "inherit",
                    count,
                    e,
                    heir=target,
                    credits_before=before,
                    credits_after=before + count,
                )
                return Ptr(origin), count, 0, _EMPTY
            if isinstance(cell.hv, MemoHV):
                if isinstance(cell.ann, HeirAnn):
                    target = cell.ann.heir
                    continue
                self._charge(count)
                self._emit("inherit", count, e, heir=target, wasted=True)
                return Ptr(origin), count, 0, _EMPTY
            raise self._stuck("save-on-non-thunk", e)

    # -- force ----------------------------------------------------------------

    def _force(self, ident: Pointer, e: Expr):
        cell = self._cells.get(ident)
        if cell is None:
            raise self._stuck("unbound-pointer", e)
        match cell.hv:
            case MemoHV(value):
                self._emit("recall", 0, e)
                return value, 0, 0, _EMPTY
            case LazyHV(func, arg, _):
                budget = cell.ann.count if isinstance(cell.ann, CreditAnn) else 0
                self._note_force(ident)
                resident = ident < self._initial_top
                del self._cells[ident]
                if resident:
                    self._initial_force_depth += 1
                self._frames.append(_Frame(budget))
                try:
                    w, k, _, heirs = self._run_thunk_body(func, arg, e)
                finally:
                    frame = self._frames.pop()
                    if resident:
                        self._initial_force_depth -= 1
                if self.mode == PASSING:
                    if k > budget:
                        raise self._stuck("insufficient-credits", e)
                    ann = NO_ANN
                else:
                    if k != budget:
                        raise self._stuck("insufficient-credits", e)
                    ann = HeirAnn(next(iter(heirs))) if heirs else NO_ANN
                self._cells[ident] = Cell(MemoHV(w), ann)
                self._emit(
                    "force",
                    0,
                    e,
                    credits_before=budget,
                    credits_after=0,
                    heir=next(iter(heirs)) if heirs else None,
                )
                return w, 0, 0, _EMPTY
        raise self._stuck("force-on-non-thunk", e)

    # -- pass / spend -----------------------------------------------------------

    def _pass(self, heir: Value, e: Expr):
        if self.mode != INHERITANCE:
            raise self._stuck("pass-outside-inheritance-model", e)
        if not self._frames:
            raise self._stuck("pass-outside-thunk", e)
        frame = self._frames[-1]
        if frame.passed:
            raise self._stuck("two-heirs", e)
        match heir:
            case Ptr(ident):
                amount = frame.budget - frame.spent
                if amount < 0:
                    raise self._stuck("insufficient-credits", e)
                frame.passed = True
                v, k, p, _ = self._save(amount, heir, e)
                return v, k, p, frozenset((ident,))
        raise self._stuck("pass-on-non-pointer", e)

    def _spend(self, count: int, target: Value, body: Expr, env: dict[str, Value], e: Expr):
        raise self._stuck("spend-outside-bankers-model", e)


def eval_credit(
    env: FuncEnv,
    heap: Heap,
    expr: Expr,
    mode: str = PASSING,
    *,
    trace: bool = False,
    record_forces: bool = False,
    reuse_heap: bool = False,
) -> EvalOutcome:
    """Evaluate under credit passing (default) or credit inheritance."""
    return CreditEvaluator(env, mode, trace=trace, record_forces=record_forces).run(heap, expr, reuse_heap=reuse_heap)

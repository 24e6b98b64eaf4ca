"""The traditional Bankers-method evaluator: credits on arbitrary heap cells.

`save m a` costs m steps and stores m credits on a's cell; `spend m a e`
removes m credits (stuck when fewer are present) and reports max(k - m, 0)
for a body costing k. Fresh cells carry zero credits; forcing keeps the
cell's credits on the memoised result.
"""

from __future__ import annotations

from .eval_real import EvalOutcome, FuncEnv, RealEvaluator, _EMPTY
from .heap import BANKERS, Cell, CreditAnn, Heap, LazyHV, MemoHV
from .syntax import Expr, HeapValue, Ptr, Value


class BankersEvaluator(RealEvaluator):
    model = BANKERS

    def _eval_heaplit(self, hv: HeapValue, e: Expr):
        if isinstance(hv, LazyHV) and hv.func not in self.env:
            raise self._stuck(f"unbound function {hv.func!r}", e)
        ptr = self._alloc(hv, CreditAnn(0))
        self._emit(
            "lazy" if isinstance(hv, LazyHV) else "memo" if isinstance(hv, MemoHV) else "fold",
            0,
            e,
        )
        return Ptr(ptr), 0, 0, _EMPTY

    def _save(self, count: int, target: Value, e: Expr):
        match target:
            case Ptr(ident):
                cell = self._cells.get(ident)
                if cell is None:
                    raise self._stuck("unbound-pointer", e)
                before = cell.ann.count if isinstance(cell.ann, CreditAnn) else 0
                self._cells[ident] = Cell(cell.hv, CreditAnn(before + count))
                self._emit("save", count, e, credits_before=before, credits_after=before + count)
                return target, count, 0, _EMPTY
        raise self._stuck("save-on-non-pointer", e)

    def _spend(self, count: int, target: Value, body: Expr, env: dict[str, Value], e: Expr):
        match target:
            case Ptr(ident):
                cell = self._cells.get(ident)
                if cell is None:
                    # The rule pattern-matches the cell's presence; absent is stuck,
                    # not a no-op.
                    raise self._stuck("unbound-pointer", e)
                before = cell.ann.count if isinstance(cell.ann, CreditAnn) else 0
                if before < count:
                    raise self._stuck("insufficient-credits", e)
                self._cells[ident] = Cell(cell.hv, CreditAnn(before - count))
                self._emit(
                    "spend", -count, e, credits_before=before, credits_after=before - count
                )
                v, k, p, h = self._eval(body, env)
                return v, max(k - count, 0), p, h
        raise self._stuck("spend-on-non-pointer", e)

    def _pass(self, heir: Value, e: Expr):
        raise self._stuck("pass-outside-inheritance-model", e)


def eval_bankers(
    env: FuncEnv,
    heap: Heap,
    expr: Expr,
    *,
    trace: bool = False,
    record_forces: bool = False,
    reuse_heap: bool = False,
) -> EvalOutcome:
    """Evaluate under the Bankers semantics."""
    return BankersEvaluator(env, trace=trace, record_forces=record_forces).run(heap, expr, reuse_heap=reuse_heap)

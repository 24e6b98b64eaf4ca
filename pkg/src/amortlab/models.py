"""Cost models as pluggable bundles and program instantiation per model.

A cost model packages an evaluator, a potential function, an erasure into
real heaps, and the set of accessibility action kinds its preorder admits.
`instantiate` turns a parsed `Program` into (function environment, heap,
main expression) under a model's annotation conventions.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import partial
from typing import Callable, Mapping

from . import eval_credit, eval_debit
from .eval_bankers import eval_bankers
from .eval_credit import eval_credit as _eval_credit
from .eval_debit import eval_debit as _eval_debit
from .eval_real import EvalOutcome, FuncEnv, eval_real, real_cost_of_thunk
from .heap import (
    BANKERS,
    CREDIT,
    CREDIT_INHERIT,
    Cell,
    CreditAnn,
    DEBIT,
    DEBIT_INHERIT,
    DEBIT_UNSOUND,
    DebitAnn,
    Heap,
    HeapError,
    MODELS,
    NO_ANN,
    REAL,
    erase,
    potential,
    validate_heap,
)
from .syntax import (
    Call,
    Expr,
    FoldHV,
    HeapValue,
    LazyHV,
    MemoHV,
    Program,
    Ptr,
    Value,
    free_vars,
    substitute,
)

Evaluate = Callable[..., EvalOutcome]


@dataclass(frozen=True)
class CostModel:
    """(evaluator, potential, erasure, accessibility action kinds)."""

    name: str
    evaluate: Evaluate
    actions: frozenset[str]
    uniform: bool  # persistence re-runs must take exactly the original cost

    def potential(self, heap: Heap) -> int:
        return potential(heap, self.name)

    def erase(self, heap: Heap) -> Heap:
        return erase(heap, self.name)

    def validate(self, heap: Heap) -> None:
        validate_heap(heap, self.name)


def _credit_eval(mode, env, heap, expr, **kw):
    return _eval_credit(env, heap, expr, mode, **kw)


def _debit_eval(mode, env, heap, expr, **kw):
    return _eval_debit(env, heap, expr, mode, **kw)


COST_MODELS: Mapping[str, CostModel] = {
    REAL: CostModel(REAL, eval_real, frozenset({"alloc", "force"}), uniform=False),
    BANKERS: CostModel(
        BANKERS, eval_bankers, frozenset({"alloc", "save", "spend", "force"}), uniform=False
    ),
    CREDIT: CostModel(
        CREDIT,
        partial(_credit_eval, eval_credit.PASSING),
        frozenset({"alloc", "save", "force"}),
        uniform=True,
    ),
    CREDIT_INHERIT: CostModel(
        CREDIT_INHERIT,
        partial(_credit_eval, eval_credit.INHERITANCE),
        frozenset({"alloc", "save", "force"}),
        uniform=True,
    ),
    DEBIT: CostModel(
        DEBIT,
        partial(_debit_eval, eval_debit.PLAIN),
        frozenset({"alloc", "pay", "access", "lazy_speculate"}),
        uniform=True,
    ),
    DEBIT_INHERIT: CostModel(
        DEBIT_INHERIT,
        partial(_debit_eval, eval_debit.INHERITANCE),
        frozenset({"alloc", "pay", "access", "lazy_speculate"}),
        uniform=True,
    ),
    DEBIT_UNSOUND: CostModel(
        DEBIT_UNSOUND,
        partial(_debit_eval, eval_debit.UNSOUND_EXAMPLE2),
        frozenset({"alloc", "pay", "access", "lazy_speculate"}),
        uniform=True,
    ),
}

DEBIT_FAMILY = (DEBIT, DEBIT_INHERIT, DEBIT_UNSOUND)
CREDIT_FAMILY = (CREDIT, CREDIT_INHERIT)


def get_model(name: str) -> CostModel:
    try:
        return COST_MODELS[name]
    except KeyError:
        raise ValueError(f"unknown model {name!r}; choose from {', '.join(MODELS)}") from None


# ---------------------------------------------------------------------------
# Instantiation
# ---------------------------------------------------------------------------


def _resolve(v: Value, names: Mapping[str, Value]) -> Value:
    resolved = substitute(v, names)
    dangling = free_vars(resolved)
    if dangling:
        raise HeapError(f"heap cell references undefined names {sorted(dangling)}")
    return resolved


def _resolve_hv(hv: HeapValue, names: Mapping[str, Value]) -> HeapValue:
    match hv:
        case FoldHV(value):
            return FoldHV(_resolve(value, names))
        case LazyHV(func, arg, split):
            return LazyHV(func, _resolve(arg, names), split)
        case MemoHV(value):
            return MemoHV(_resolve(value, names))
    raise TypeError(f"not a heap value: {hv!r}")


def instantiate(program: Program, model: str) -> tuple[FuncEnv, Heap, Expr]:
    """Build the initial heap for a model and close main over the block names.

    The count of a block entry is the credit annotation under Bankers (any
    cell) and the credit models (lazy cells; ignored elsewhere). Under debit
    models a lazy entry is speculated on the spot and becomes an unaccessed
    memo record owing `count` debits; `count` may not exceed the computation's
    real cost, which keeps the record invariant honest.
    """
    get_model(model)
    env = dict(program.funcs)
    heap = Heap.empty()
    names: dict[str, Value] = {}
    for cell in program.heap_cells:
        hv = _resolve_hv(cell.hv, names)
        if model == BANKERS:
            heap, ptr = heap.alloc(hv, CreditAnn(cell.count))
        elif model in CREDIT_FAMILY and isinstance(hv, LazyHV):
            heap, ptr = heap.alloc(hv, CreditAnn(cell.count))
        elif model in DEBIT_FAMILY and isinstance(hv, LazyHV):
            heap, ptr = _speculate_block_cell(env, heap, hv, cell.count, model)
        else:
            heap, ptr = heap.alloc(hv, NO_ANN)
        names[cell.name] = Ptr(ptr)
    main = substitute(program.main, names)
    validate_heap(heap, model)
    return env, heap, main


def _speculate_block_cell(
    env: FuncEnv, heap: Heap, hv: LazyHV, debits: int, model: str
) -> tuple[Heap, int]:
    """Run a heap-block thunk now, then pin its debits to the written count."""
    kreal = real_cost_of_thunk(env, heap, hv.func, hv.arg, model=model)
    if debits > kreal:
        raise HeapError(
            f"heap block assigns {debits} debits to a computation of real cost {kreal}"
        )
    lo = heap.counter
    outcome = COST_MODELS[model].evaluate(env, heap, Call(hv.func, hv.arg))
    inner = outcome.heap
    ann = DebitAnn(debits, hv.func, hv.arg, lo, inner.counter, kreal)
    return inner.alloc(MemoHV(outcome.value), ann)

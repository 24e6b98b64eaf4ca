"""The reference big-step evaluator with exact step counting.

Only lambda applications and function calls cost a step. Forcing a lazy thunk
removes the cell, runs the recorded computation (whose function call carries
the +1), and installs the memoised result; recalling a memoised thunk is free.
save/spend/pass are accepted as no-ops so erased programs from every other
model run unchanged.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field
from typing import Mapping, Optional

from .heap import (
    Annotation,
    Cell,
    Heap,
    LazyHV,
    MemoHV,
    NO_ANN,
    Pointer,
    REAL,
    erase,
)
from .parser import print_expr
from .syntax import (
    App,
    Call,
    Case,
    Expr,
    FoldHV,
    Force,
    FuncDef,
    HeapLit,
    HeapValue,
    Inl,
    Inr,
    Lam,
    Let,
    Pair,
    Pass,
    Ptr,
    Save,
    Spend,
    Split,
    Unfold,
    Unit,
    Val,
    Value,
    Var,
    substitute,
)

MAX_STEPS = 2**63 - 1

FuncEnv = Mapping[str, FuncDef]

_EMPTY: frozenset[Pointer] = frozenset()


class StuckError(Exception):
    """No rule applies. Carries the expectation tag, the offending expression
    and a heap snapshot."""

    def __init__(self, reason: str, expr: Optional[Expr], heap: Heap):
        super().__init__(reason)
        self.reason = reason
        self.expr = expr
        self.heap = heap


@dataclass(frozen=True)
class ForceEvent:
    """One force of a lazy cell, for persistence replays: the target, the
    allocator position just before the body ran, and whether the target lived
    in the initial heap outside any enclosing initial-cell force."""

    target: Pointer
    counter_before: Pointer
    initial_resident: bool
    outermost: bool


@dataclass(frozen=True)
class EvalOutcome:
    steps: int
    discharged: int
    heap: Heap
    value: Value
    heirs: frozenset[Pointer] = _EMPTY
    trace: Optional[list] = None
    force_events: Optional[list[ForceEvent]] = None

    @property
    def cost(self) -> int:
        """The model cost: steps plus discharged debits."""
        return self.steps + self.discharged


def _digest(e: Expr) -> str:
    return format(zlib.crc32(print_expr(e).encode()), "08x")


class RealEvaluator:
    """Structural recursion over expressions; subclasses override the hook
    methods for save/spend/force/pass/allocation to realize the other models."""

    model = REAL

    def __init__(self, env: FuncEnv, *, trace: bool = False, record_forces: bool = False):
        self.env = env
        self._trace_on = trace
        self._record_forces = record_forces
        self._cells: dict[Pointer, Cell] = {}
        self._counter: Pointer = 0

    # -- public entry -------------------------------------------------------

    def run(self, heap: Heap, expr: Expr, *, reuse_heap: bool = False) -> EvalOutcome:
        """Evaluate `expr` under `heap`. `reuse_heap=True` transfers ownership
        of the heap's cell map to the evaluator instead of copying it; the
        caller must not use the input heap afterwards."""
        self._cells = heap.cells if reuse_heap else dict(heap.cells)
        self._counter = heap.counter
        self._initial_top = heap.counter
        self._initial_force_depth = 0
        self._trace = [] if self._trace_on else None
        self._forces: Optional[list[ForceEvent]] = [] if self._record_forces else None
        value, k, kp, heirs = self._eval(expr, {})
        if k > MAX_STEPS or kp > MAX_STEPS:
            raise OverflowError("step counter exceeded 64 bits")
        return EvalOutcome(
            k, kp, Heap(self._cells, self._counter), value, heirs, self._trace, self._forces
        )

    # -- internals ----------------------------------------------------------

    def _stuck(self, reason: str, expr: Optional[Expr]) -> StuckError:
        return StuckError(reason, expr, Heap(dict(self._cells), self._counter))

    def _alloc(self, hv: HeapValue, ann: Annotation = NO_ANN) -> Pointer:
        ident = self._counter
        while ident in self._cells:
            ident += 1
        self._cells[ident] = Cell(hv, ann)
        self._counter = ident + 1
        return ident

    def _charge(self, amount: int) -> None:
        """Cost accounting hook; credit inheritance tracks thunk budgets here."""

    def _emit(self, rule: str, cost_delta: int, expr: Expr, **extra) -> None:
        if self._trace is not None:
            row = {
                "rule": rule,
                "cost_delta": cost_delta,
                "expr_digest": _digest(expr),
                "heap_size": len(self._cells),
            }
            row.update(extra)
            self._trace.append(row)

    def _lookup_func(self, name: str, expr: Expr) -> FuncDef:
        fdef = self.env.get(name)
        if fdef is None:
            raise self._stuck(f"unbound function {name!r}", expr)
        return fdef

    def _union_heirs(
        self, a: frozenset[Pointer], b: frozenset[Pointer], expr: Expr
    ) -> frozenset[Pointer]:
        heirs = a | b
        if len(heirs) > 1:
            raise self._stuck("two-heirs", expr)
        return heirs

    def _resolve(self, v: Value, env: dict[str, Value], e: Expr) -> Value:
        """Close a value operand over the evaluation environment.

        Evaluation threads environments instead of copying expression bodies;
        this is observationally the substitution the rules perform, restricted
        to the operand actually consumed.
        """
        match v:
            case Var(name):
                try:
                    return env[name]
                except KeyError:
                    raise self._stuck(f"unbound variable {name!r}", e) from None
            case Ptr() | Unit():
                return v
            case Inl(inner):
                return Inl(self._resolve(inner, env, e))
            case Inr(inner):
                return Inr(self._resolve(inner, env, e))
            case Pair(left, right):
                return Pair(self._resolve(left, env, e), self._resolve(right, env, e))
            case Lam():
                # Lambdas close over the environment by substitution into the
                # body (capture-avoiding); they are rare and small.
                return substitute(v, env)
        raise TypeError(f"not a value: {v!r}")

    def _resolve_hv(self, hv: HeapValue, env: dict[str, Value], e: Expr) -> HeapValue:
        match hv:
            case FoldHV(value):
                return FoldHV(self._resolve(value, env, e))
            case LazyHV(func, arg, split):
                return LazyHV(func, self._resolve(arg, env, e), split)
            case MemoHV(value):
                return MemoHV(self._resolve(value, env, e))
        raise TypeError(f"not a heap value: {hv!r}")

    def _eval(
        self, e: Expr, env: dict[str, Value]
    ) -> tuple[Value, int, int, frozenset[Pointer]]:
        match e:
            case Val(v):
                self._emit("value", 0, e)
                return self._resolve(v, env, e), 0, 0, _EMPTY
            case HeapLit(hv):
                return self._eval_heaplit(self._resolve_hv(hv, env, e), e)
            case Let(name, bound, body):
                v1, k1, p1, h1 = self._eval(bound, env)
                v2, k2, p2, h2 = self._eval(body, {**env, name: v1})
                return v2, k1 + k2, p1 + p2, self._union_heirs(h1, h2, e)
            case Case(scrutinee, ln, lb, rn, rb):
                match self._resolve(scrutinee, env, e):
                    case Inl(inner):
                        self._emit("case", 0, e)
                        return self._eval(lb, {**env, ln: inner})
                    case Inr(inner):
                        self._emit("case", 0, e)
                        return self._eval(rb, {**env, rn: inner})
                raise self._stuck("case-on-non-sum", e)
            case Split(ln, rn, pair, body):
                match self._resolve(pair, env, e):
                    case Pair(left, right):
                        self._emit("split", 0, e)
                        return self._eval(body, {**env, ln: left, rn: right})
                raise self._stuck("split-on-non-pair", e)
            case App(func, arg):
                match self._resolve(func, env, e):
                    case Lam(param, body):
                        self._charge(1)
                        self._emit("app", 1, e)
                        v, k, p, h = self._eval(body, {param: self._resolve(arg, env, e)})
                        return v, k + 1, p, h
                raise self._stuck("apply-non-lambda", e)
            case Call(fname, arg):
                fdef = self._lookup_func(fname, e)
                self._charge(1)
                self._emit("call", 1, e)
                v, k, p, h = self._eval(fdef.body, {fdef.param: self._resolve(arg, env, e)})
                return v, k + 1, p, h
            case Unfold(value):
                match self._resolve(value, env, e):
                    case Ptr(ident):
                        cell = self._cells.get(ident)
                        if cell is None:
                            raise self._stuck("unbound-pointer", e)
                        if isinstance(cell.hv, FoldHV):
                            self._emit("unfold", 0, e)
                            return cell.hv.value, 0, 0, _EMPTY
                        raise self._stuck("unfold-on-non-fold", e)
                raise self._stuck("unfold-on-non-pointer", e)
            case Force(value):
                match self._resolve(value, env, e):
                    case Ptr(ident):
                        return self._force(ident, e)
                raise self._stuck("force-on-non-pointer", e)
            case Save(count, target):
                return self._save(count, self._resolve(target, env, e), e)
            case Spend(count, target, body):
                return self._spend(count, self._resolve(target, env, e), body, env, e)
            case Pass(heir):
                return self._pass(self._resolve(heir, env, e), e)
        raise TypeError(f"not an expression: {e!r}")

    # -- hooks --------------------------------------------------------------

    def _eval_heaplit(self, hv: HeapValue, e: Expr):
        if isinstance(hv, LazyHV) and hv.func not in self.env:
            raise self._stuck(f"unbound function {hv.func!r}", e)
        ptr = self._alloc(hv, NO_ANN)
        self._emit(
            "lazy" if isinstance(hv, LazyHV) else "memo" if isinstance(hv, MemoHV) else "fold",
            0,
            e,
        )
        return Ptr(ptr), 0, 0, _EMPTY

    def _run_thunk_body(self, func: str, arg: Value, e: Expr):
        """Evaluate the recorded computation of a thunk (the call pays the step)."""
        return self._eval(Call(func, arg), {})

    def _note_force(self, ident: Pointer) -> None:
        if self._forces is not None:
            resident = ident < self._initial_top
            self._forces.append(
                ForceEvent(
                    ident, self._counter, resident, resident and self._initial_force_depth == 0
                )
            )

    def _force(self, ident: Pointer, e: Expr):
        cell = self._cells.get(ident)
        if cell is None:
            raise self._stuck("unbound-pointer", e)
        match cell.hv:
            case MemoHV(value):
                self._emit("recall", 0, e)
                return value, 0, 0, _EMPTY
            case LazyHV(func, arg, _):
                self._note_force(ident)
                resident = ident < self._initial_top
                del self._cells[ident]
                if resident:
                    self._initial_force_depth += 1
                try:
                    w, k, p, h = self._run_thunk_body(func, arg, e)
                finally:
                    if resident:
                        self._initial_force_depth -= 1
                self._cells[ident] = Cell(MemoHV(w), cell.ann)
                self._emit("force", 0, e)
                return w, k, p, h
        raise self._stuck("force-on-non-thunk", e)

    def _save(self, count: int, target: Value, e: Expr):
        # No-op in the real model: returns the target at cost 0.
        self._emit("save", 0, e)
        return target, 0, 0, _EMPTY

    def _spend(self, count: int, target: Value, body: Expr, env: dict[str, Value], e: Expr):
        # No-op wrapper in the real model: the body's cost is unadjusted.
        self._emit("spend", 0, e)
        return self._eval(body, env)

    def _pass(self, heir: Value, e: Expr):
        # No-op in the real model: returns the heir value.
        self._emit("pass", 0, e)
        return heir, 0, 0, _EMPTY


def eval_real(
    env: FuncEnv,
    heap: Heap,
    expr: Expr,
    *,
    trace: bool = False,
    record_forces: bool = False,
    reuse_heap: bool = False,
) -> EvalOutcome:
    """Evaluate under the real semantics. Raises StuckError when no rule applies."""
    return RealEvaluator(env, trace=trace, record_forces=record_forces).run(heap, expr, reuse_heap=reuse_heap)


def real_cost_of_thunk(
    env: FuncEnv, heap: Heap, func: str, arg: Value, *, model: str = REAL
) -> int:
    """The real cost of running `func arg` from the erasure of `heap`.

    Deterministic; used for debit records and their potential. Propagates
    StuckError from ill-formed computations.
    """
    return eval_real(env, erase(heap, model), Call(func, arg)).steps

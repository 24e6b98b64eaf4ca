"""Seeded random program generation, one dialect per cost model.

Programs are built so that the annotation discipline is satisfiable by
construction: thunks are funded before they are forced, spends never exceed
statically tracked credits, and debit-model thunk bodies neither allocate nor
force (they may pay debits, unfold, branch and call helpers), which keeps the
erased real twin pointer-exact. Mains still exercise every rule of their
model; helpers are identity chains so result shapes stay known.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Optional

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
    NO_ANN,
    REAL,
)
from .syntax import (
    App,
    Call,
    Case,
    Expr,
    FoldHV,
    Force,
    FuncDef,
    HeapLit,
    Inl,
    Inr,
    Lam,
    LazyHV,
    Let,
    MemoHV,
    Pair,
    Pass,
    Ptr,
    Save,
    Spend,
    Split,
    UNIT,
    Unfold,
    Val,
    Value,
    Var,
)

MAX_WORK = 4


@dataclass
class _Binding:
    name: str
    shape: str  # unit|sum|pair|fold|lazy|memo|record|opaque
    inner: Optional[str] = None  # payload shape for fold/sum/pair results
    bound: int = 0  # exact body cost for thunks
    funded: int = 0  # credits saved (credit models) / debits paid (debit models)
    forced: bool = False
    has_pass: bool = False
    credits: int = 0  # bankers: tracked credits on the cell


@dataclass(frozen=True)
class GeneratedProgram:
    model: str
    seed: int
    env: dict[str, FuncDef]
    heap: Heap
    main: Expr


def _work_env() -> dict[str, FuncDef]:
    env = {"work0": FuncDef("x", Val(Var("x")))}
    for j in range(1, MAX_WORK + 1):
        env[f"work{j}"] = FuncDef("x", Call(f"work{j-1}", Var("x")))
    return env


class _Gen:
    def __init__(self, model: str, seed: int):
        self.model = model
        self.rng = random.Random(seed)
        self.seed = seed
        self.env = _work_env()
        self.heap = Heap.empty()
        self.scope: list[_Binding] = []
        self.steps: list[tuple[str, Expr]] = []
        self.fresh = 0

    # -- small helpers --------------------------------------------------------

    def name(self, prefix: str) -> str:
        self.fresh += 1
        return f"{prefix}{self.fresh}"

    def bind(self, prefix: str, expr: Expr, shape: str, **kw) -> _Binding:
        binding = _Binding(self.name(prefix), shape, **kw)
        self.steps.append((binding.name, expr))
        self.scope.append(binding)
        return binding

    def pick(self, *shapes: str) -> Optional[_Binding]:
        pool = [b for b in self.scope if b.shape in shapes]
        return self.rng.choice(pool) if pool else None

    def small_value(self) -> tuple[Value, str]:
        roll = self.rng.random()
        usable = [b for b in self.scope if b.shape in ("unit", "sum", "pair", "fold")]
        if roll < 0.35 or not usable:
            side = self.rng.random()
            if side < 0.4:
                return UNIT, "unit"
            if side < 0.7:
                return Inl(UNIT), "sum"
            return Inr(UNIT), "sum"
        b = self.rng.choice(usable)
        if self.rng.random() < 0.3:
            return Pair(Var(b.name), UNIT), "pair"
        return Var(b.name), b.shape

    # -- thunk body templates --------------------------------------------------

    def _template(self) -> tuple[str, int, str, bool]:
        """Returns (function name, exact body cost, arg requirement, has_pass).

        arg requirement: "any" | "fold" | "pair-heir" | "pair-record".
        """
        j = self.rng.randrange(0, MAX_WORK)
        debit = self.model in (DEBIT, DEBIT_INHERIT, DEBIT_UNSOUND)
        choices = ["plain", "unfold"]
        if not debit:
            choices.append("alloc")
        if self.model == CREDIT_INHERIT:
            choices += ["pass", "pass"]
        if debit:
            choices.append("payer")
        kind = self.rng.choice(choices)
        fname = self.name("tb")
        if kind == "plain":
            self.env[fname] = FuncDef("x", Call(f"work{j}", Var("x")))
            return fname, j + 2, "any", False
        if kind == "unfold":
            self.env[fname] = FuncDef(
                "x", Let("u", Unfold(Var("x")), Call(f"work{j}", Var("u")))
            )
            return fname, j + 2, "fold", False
        if kind == "alloc":
            self.env[fname] = FuncDef(
                "x", Let("f", HeapLit(FoldHV(Var("x"))), Call(f"work{j}", Var("f")))
            )
            return fname, j + 2, "any", False
        if kind == "pass":
            self.env[fname] = FuncDef(
                "x",
                Split(
                    "p",
                    "h",
                    Var("x"),
                    Let(
                        "r",
                        Call(f"work{j}", Var("p")),
                        Let("g", Pass(Var("h")), Val(Var("r"))),
                    ),
                ),
            )
            return fname, j + 2, "pair-heir", True
        m = self.rng.randrange(0, 3)
        self.env[fname] = FuncDef(
            "x",
            Split(
                "p",
                "q",
                Var("x"),
                Let("s", Save(m, Var("q")), Call(f"work{j}", Var("p"))),
            ),
        )
        return fname, j + 2, "pair-record", False

    def _thunk_arg(self, requirement: str) -> Optional[Value]:
        if requirement == "any":
            return self.small_value()[0]
        if requirement == "fold":
            b = self.pick("fold")
            return Var(b.name) if b else None
        if requirement == "pair-heir":
            b = self.pick("lazy", "memo", "record")
            if b is None:
                return None
            return Pair(self.small_value()[0], Var(b.name))
        b = self.pick("record", "memo")
        if b is None:
            return None
        return Pair(self.small_value()[0], Var(b.name))

    # -- main ops ---------------------------------------------------------------

    def op_value(self) -> None:
        v, shape = self.small_value()
        self.bind("v", Val(v), shape)

    def op_fold(self) -> None:
        v, shape = self.small_value()
        self.bind("f", HeapLit(FoldHV(v)), "fold", inner=shape)

    def op_unfold(self) -> None:
        b = self.pick("fold")
        if b:
            self.bind("u", Unfold(Var(b.name)), b.inner or "opaque")

    def op_case(self) -> None:
        b = self.pick("sum")
        if b is None:
            return
        w, _ = self.small_value()
        self.bind(
            "c",
            Case(Var(b.name), "l", Val(w), "r", Val(w)),
            "opaque",
        )

    def op_split(self) -> None:
        b = self.pick("pair")
        if b is None:
            return
        side = self.rng.choice(("a", "b"))
        self.bind("s", Split("a", "b", Var(b.name), Val(Var(side))), "opaque")

    def op_app(self) -> None:
        v, shape = self.small_value()
        self.bind("ap", App(Lam("z", Val(Var("z"))), v), shape)

    def op_call(self) -> None:
        v, shape = self.small_value()
        j = self.rng.randrange(0, MAX_WORK + 1)
        self.bind("w", Call(f"work{j}", v), shape)

    def op_memo(self) -> None:
        v, _ = self.small_value()
        b = self.bind("m", HeapLit(MemoHV(v)), "memo")
        if self.rng.random() < 0.6:
            self.bind("r", Force(Var(b.name)), "opaque")
            b.forced = True

    def op_lazy(self) -> None:
        fname, bound, requirement, has_pass = self._template()
        value = self._thunk_arg(requirement)
        if value is None:
            del self.env[fname]
            return
        split = 0
        if self.model == DEBIT_INHERIT and self.rng.random() < 0.5:
            split = 1
        hv = LazyHV(fname, value, split)
        self.bind(
            "t",
            HeapLit(hv),
            "record" if self.model in (DEBIT, DEBIT_INHERIT, DEBIT_UNSOUND) else "lazy",
            bound=bound - split,
            has_pass=has_pass,
        )

    def op_save(self) -> None:
        if self.model == BANKERS:
            b = self.pick("fold", "lazy", "memo")
            if b is None:
                return
            m = self.rng.randrange(0, 5)
            self.bind("sv", Save(m, Var(b.name)), "opaque")
            b.credits += m
            return
        if self.model in (CREDIT, CREDIT_INHERIT, REAL):
            b = self.pick("lazy", "memo")
            if b is None:
                return
            m = self.rng.randrange(0, 4)
            self.bind("sv", Save(m, Var(b.name)), "opaque")
            if b.shape == "lazy" and not b.forced:
                b.funded += m
            return
        b = self.pick("record", "memo")
        if b is None:
            return
        m = self.rng.randrange(0, 4)
        self.bind("sv", Save(m, Var(b.name)), "opaque")
        if b.shape == "record" and not b.forced:
            b.funded += m

    def op_spend(self) -> None:
        pool = [b for b in self.scope if b.shape in ("fold", "lazy", "memo") and b.credits > 0]
        if not pool:
            return
        b = self.rng.choice(pool)
        m = self.rng.randrange(1, b.credits + 1)
        b.credits -= m
        v, shape = self.small_value()
        body: Expr = Val(v) if self.rng.random() < 0.5 else Call("work1", v)
        self.bind("sp", Spend(m, Var(b.name), body), shape)

    def op_force(self) -> None:
        pool = [b for b in self.scope if b.shape in ("lazy", "record") and not b.forced]
        if not pool:
            return
        b = self.rng.choice(pool)
        needs_funding = self.model in (CREDIT, CREDIT_INHERIT, DEBIT, DEBIT_INHERIT)
        if needs_funding and b.funded < b.bound:
            top_up = b.bound - b.funded
            if self.model == CREDIT_INHERIT and not b.has_pass and b.funded > b.bound:
                return
            self.bind("fd", Save(top_up, Var(b.name)), "opaque")
            b.funded += top_up
        if self.model == CREDIT_INHERIT and not b.has_pass and b.funded != b.bound:
            return
        self.bind("fc", Force(Var(b.name)), "opaque")
        b.forced = True

    # -- initial heap -----------------------------------------------------------

    def seed_heap(self) -> None:
        heap = self.heap
        if self.model == BANKERS:
            for _ in range(self.rng.randrange(1, 4)):
                credits = self.rng.randrange(0, 6)
                heap, ptr = heap.alloc(FoldHV(UNIT), CreditAnn(credits))
                self.scope.append(
                    _Binding(self.name("h"), "fold", inner="unit", credits=credits)
                )
                self.steps.append((self.scope[-1].name, Val(Ptr(ptr))))
        elif self.model in (CREDIT, CREDIT_INHERIT, REAL):
            heap, ptr = heap.alloc(FoldHV(UNIT), NO_ANN)
            self.scope.append(_Binding(self.name("h"), "fold", inner="unit"))
            self.steps.append((self.scope[-1].name, Val(Ptr(ptr))))
            for _ in range(self.rng.randrange(1, 3)):
                fname, bound, requirement, has_pass = self._template()
                if requirement != "any":
                    self.env[fname] = FuncDef("x", Call("work0", Var("x")))
                    bound, has_pass = 2, False
                credits = self.rng.randrange(0, 3)
                ann = CreditAnn(credits) if self.model != REAL else NO_ANN
                heap, ptr = heap.alloc(LazyHV(fname, UNIT), ann)
                self.scope.append(
                    _Binding(
                        self.name("h"), "lazy", bound=bound, funded=credits, has_pass=has_pass
                    )
                )
                self.steps.append((self.scope[-1].name, Val(Ptr(ptr))))
        else:
            heap, ptr = heap.alloc(FoldHV(UNIT), NO_ANN)
            self.scope.append(_Binding(self.name("h"), "fold", inner="unit"))
            self.steps.append((self.scope[-1].name, Val(Ptr(ptr))))
            j = self.rng.randrange(0, MAX_WORK)
            debits = self.rng.randrange(0, j + 2)
            mark = heap.counter
            ann = DebitAnn(debits, f"work{j}", UNIT, mark, mark, kreal=j + 1)
            heap, ptr = heap.alloc(MemoHV(UNIT), ann)
            self.scope.append(
                _Binding(self.name("h"), "record", bound=debits, funded=0)
            )
            self.steps.append((self.scope[-1].name, Val(Ptr(ptr))))
        self.heap = heap

    # -- assembly -----------------------------------------------------------------

    def build(self, length: Optional[int] = None) -> GeneratedProgram:
        self.seed_heap()
        ops = {
            "value": (self.op_value, 1.0),
            "fold": (self.op_fold, 1.5),
            "unfold": (self.op_unfold, 1.0),
            "case": (self.op_case, 0.7),
            "split": (self.op_split, 0.7),
            "app": (self.op_app, 0.5),
            "call": (self.op_call, 1.0),
            "memo": (self.op_memo, 0.8),
            "lazy": (self.op_lazy, 1.6),
            "save": (self.op_save, 1.2),
            "force": (self.op_force, 1.6),
        }
        if self.model == BANKERS:
            ops["spend"] = (self.op_spend, 1.6)
        names = list(ops)
        weights = [ops[n][1] for n in names]
        n_ops = length if length is not None else self.rng.randrange(5, 13)
        for _ in range(n_ops):
            op = self.rng.choices(names, weights)[0]
            ops[op][0]()
        result = self.rng.choice(self.scope)
        main: Expr = Val(Var(result.name))
        for name, expr in reversed(self.steps):
            main = Let(name, expr, main)
        return GeneratedProgram(self.model, self.seed, dict(self.env), self.heap, main)


def generate_program(model: str, seed: int, *, length: Optional[int] = None) -> GeneratedProgram:
    """A deterministic random program legal for `model` (same seed, same program)."""
    return _Gen(model, seed).build(length)

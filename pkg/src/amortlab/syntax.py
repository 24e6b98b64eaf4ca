"""Abstract syntax for the calculus: values, heap values, expressions, programs.

The grammar is fine-grain call-by-value: every operand position that takes a
value holds a `Value`, never a sub-expression. Sequencing happens exclusively
through `Let`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Mapping, Optional, Union


class SyntaxError_(Exception):
    """An ill-formed program construct (duplicate binders, unknown function...)."""


# ---------------------------------------------------------------------------
# Values
# ---------------------------------------------------------------------------


class Value:
    """Base class for value forms."""

    __slots__ = ()


@dataclass(frozen=True)
class Var(Value):
    name: str


@dataclass(frozen=True)
class Ptr(Value):
    """A heap pointer. Never appears in source text; created by allocation."""

    ident: int


@dataclass(frozen=True)
class Unit(Value):
    pass


UNIT = Unit()


@dataclass(frozen=True)
class Inl(Value):
    inner: Value


@dataclass(frozen=True)
class Inr(Value):
    inner: Value


@dataclass(frozen=True)
class Pair(Value):
    left: Value
    right: Value


@dataclass(frozen=True)
class Lam(Value):
    param: str
    body: "Expr"


# ---------------------------------------------------------------------------
# Heap values
# ---------------------------------------------------------------------------


class HeapValue:
    """Base class for heap value forms."""

    __slots__ = ()


@dataclass(frozen=True)
class FoldHV(HeapValue):
    value: Value


@dataclass(frozen=True)
class LazyHV(HeapValue):
    """A delayed computation: apply top-level function `func` to `arg`.

    `split` is the debit-inheritance annotation from `(lazy! k F v)` source
    syntax: the portion of the unshared cost reported at creation instead of
    recorded as debits. It is 0 for plain `(lazy F v)` and ignored by every
    model except debit inheritance.
    """

    func: str
    arg: Value
    split: int = 0


@dataclass(frozen=True)
class MemoHV(HeapValue):
    value: Value


# ---------------------------------------------------------------------------
# Expressions
# ---------------------------------------------------------------------------


class Expr:
    """Base class for expression forms."""

    __slots__ = ()


@dataclass(frozen=True)
class Val(Expr):
    value: Value


@dataclass(frozen=True)
class HeapLit(Expr):
    """A heap-value literal in expression position; evaluating it allocates."""

    hv: HeapValue


@dataclass(frozen=True)
class Let(Expr):
    name: str
    bound: Expr
    body: Expr


@dataclass(frozen=True)
class Case(Expr):
    scrutinee: Value
    left_name: str
    left_branch: Expr
    right_name: str
    right_branch: Expr


@dataclass(frozen=True)
class Split(Expr):
    left_name: str
    right_name: str
    pair: Value
    body: Expr

    def __post_init__(self) -> None:
        if self.left_name == self.right_name:
            raise SyntaxError_(f"split binders must be distinct: {self.left_name}")


@dataclass(frozen=True)
class App(Expr):
    func: Value
    arg: Value


@dataclass(frozen=True)
class Call(Expr):
    func: str
    arg: Value


@dataclass(frozen=True)
class Unfold(Expr):
    value: Value


@dataclass(frozen=True)
class Force(Expr):
    value: Value


@dataclass(frozen=True)
class Save(Expr):
    count: int
    target: Value

    def __post_init__(self) -> None:
        if self.count < 0:
            raise SyntaxError_("save count must be nonnegative")


@dataclass(frozen=True)
class Spend(Expr):
    count: int
    target: Value
    body: Expr

    def __post_init__(self) -> None:
        if self.count < 0:
            raise SyntaxError_("spend count must be nonnegative")


@dataclass(frozen=True)
class Pass(Expr):
    heir: Value


Node = Union[Value, HeapValue, Expr]


# ---------------------------------------------------------------------------
# Free variables and substitution
# ---------------------------------------------------------------------------


def free_vars(node: Node) -> frozenset[str]:
    """The set of free variable names of a value, heap value or expression."""
    match node:
        case Var(name):
            return frozenset((name,))
        case Ptr() | Unit():
            return frozenset()
        case Inl(inner) | Inr(inner):
            return free_vars(inner)
        case Pair(left, right):
            return free_vars(left) | free_vars(right)
        case Lam(param, body):
            return free_vars(body) - {param}
        case FoldHV(value) | MemoHV(value):
            return free_vars(value)
        case LazyHV(_, arg, _):
            return free_vars(arg)
        case Val(value):
            return free_vars(value)
        case HeapLit(hv):
            return free_vars(hv)
        case Let(name, bound, body):
            return free_vars(bound) | (free_vars(body) - {name})
        case Case(scrutinee, ln, lb, rn, rb):
            return (
                free_vars(scrutinee)
                | (free_vars(lb) - {ln})
                | (free_vars(rb) - {rn})
            )
        case Split(ln, rn, pair, body):
            return free_vars(pair) | (free_vars(body) - {ln, rn})
        case App(func, arg):
            return free_vars(func) | free_vars(arg)
        case Call(_, arg):
            return free_vars(arg)
        case Unfold(value) | Force(value):
            return free_vars(value)
        case Save(_, target):
            return free_vars(target)
        case Spend(_, target, body):
            return free_vars(target) | free_vars(body)
        case Pass(heir):
            return free_vars(heir)
    raise TypeError(f"not a syntax node: {node!r}")


def _fresh_name(base: str, avoid: frozenset[str]) -> str:
    """A name derived from `base` by a `$n` suffix, not in `avoid`.

    The counter starts at the smallest unused suffix, so renaming is a pure
    function of its inputs and two identical substitutions rename identically.
    """
    root = base.split("$", 1)[0]
    n = 0
    while f"{root}${n}" in avoid:
        n += 1
    return f"{root}${n}"


def _subst_binder(
    names: tuple[str, ...], body: Expr, binding: Mapping[str, Value]
) -> tuple[tuple[str, ...], Expr]:
    """Adjust binders before substituting under them.

    Drops bound names from the binding and alpha-renames any binder that would
    capture a free variable of a substituted value.
    """
    inner = {x: v for x, v in binding.items() if x not in names}
    if not inner:
        return names, body
    incoming = frozenset().union(*(free_vars(v) for v in inner.values()))
    if not incoming & set(names):
        return names, substitute(body, inner)
    renaming: dict[str, Value] = {}
    new_names = []
    avoid = incoming | free_vars(body) | set(names)
    for name in names:
        if name in incoming:
            fresh = _fresh_name(name, avoid)
            avoid = avoid | {fresh}
            renaming[name] = Var(fresh)
            new_names.append(fresh)
        else:
            new_names.append(name)
    return tuple(new_names), substitute(substitute(body, renaming), inner)


def substitute(node: Node, binding: Mapping[str, Value]) -> Node:
    """Capture-avoiding substitution of values for free variables.

    Total: names absent from `node` are ignored, bound occurrences untouched,
    and colliding binders are alpha-renamed with a deterministic `$n` suffix.
    """
    if not binding:
        return node
    match node:
        case Var(name):
            return binding.get(name, node)
        case Ptr() | Unit():
            return node
        case Inl(inner):
            return Inl(substitute(inner, binding))
        case Inr(inner):
            return Inr(substitute(inner, binding))
        case Pair(left, right):
            return Pair(substitute(left, binding), substitute(right, binding))
        case Lam(param, body):
            (param2,), body2 = _subst_binder((param,), body, binding)
            return Lam(param2, body2)
        case FoldHV(value):
            return FoldHV(substitute(value, binding))
        case MemoHV(value):
            return MemoHV(substitute(value, binding))
        case LazyHV(func, arg, split):
            return LazyHV(func, substitute(arg, binding), split)
        case Val(value):
            return Val(substitute(value, binding))
        case HeapLit(hv):
            return HeapLit(substitute(hv, binding))
        case Let(name, bound, body):
            (name2,), body2 = _subst_binder((name,), body, binding)
            return Let(name2, substitute(bound, binding), body2)
        case Case(scrutinee, ln, lb, rn, rb):
            (ln2,), lb2 = _subst_binder((ln,), lb, binding)
            (rn2,), rb2 = _subst_binder((rn,), rb, binding)
            return Case(substitute(scrutinee, binding), ln2, lb2, rn2, rb2)
        case Split(ln, rn, pair, body):
            (ln2, rn2), body2 = _subst_binder((ln, rn), body, binding)
            return Split(ln2, rn2, substitute(pair, binding), body2)
        case App(func, arg):
            return App(substitute(func, binding), substitute(arg, binding))
        case Call(func, arg):
            return Call(func, substitute(arg, binding))
        case Unfold(value):
            return Unfold(substitute(value, binding))
        case Force(value):
            return Force(substitute(value, binding))
        case Save(count, target):
            return Save(count, substitute(target, binding))
        case Spend(count, target, body):
            return Spend(count, substitute(target, binding), substitute(body, binding))
        case Pass(heir):
            return Pass(substitute(heir, binding))
    raise TypeError(f"not a syntax node: {node!r}")


# ---------------------------------------------------------------------------
# Programs
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FuncDef:
    param: str
    body: Expr


@dataclass(frozen=True)
class HeapCell:
    """One `(name count hv)` entry of a source heap block.

    `hv` may reference earlier cells of the block through `Var` occurrences of
    their names; resolution to pointers happens at instantiation.
    """

    name: str
    count: int
    hv: HeapValue


@dataclass(frozen=True)
class Program:
    funcs: Mapping[str, FuncDef]
    main: Expr
    heap_cells: tuple[HeapCell, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "funcs", dict(self.funcs))


def _called_functions(node: Node) -> Iterator[str]:
    match node:
        case Call(func, arg):
            yield func
            yield from _called_functions(arg)
        case LazyHV(func, arg, _):
            yield func
            yield from _called_functions(arg)
        case Lam(_, body) | FoldHV(Lam(_, body)) | MemoHV(Lam(_, body)):
            yield from _called_functions(body)
        case Val(v):
            yield from _called_functions(v)
        case HeapLit(hv):
            yield from _called_functions(hv)
        case Let(_, bound, body):
            yield from _called_functions(bound)
            yield from _called_functions(body)
        case Case(scrutinee, _, lb, _, rb):
            yield from _called_functions(scrutinee)
            yield from _called_functions(lb)
            yield from _called_functions(rb)
        case Split(_, _, pair, body):
            yield from _called_functions(pair)
            yield from _called_functions(body)
        case App(func, arg):
            yield from _called_functions(func)
            yield from _called_functions(arg)
        case Spend(_, target, body):
            yield from _called_functions(target)
            yield from _called_functions(body)
        case Unfold(v) | Force(v) | Save(_, v) | Pass(v):
            yield from _called_functions(v)
        case Inl(v) | Inr(v):
            yield from _called_functions(v)
        case Pair(left, right):
            yield from _called_functions(left)
            yield from _called_functions(right)
        case _:
            return


def validate_program(program: Program) -> None:
    """Check the closed-world conditions: every called function is defined,
    function bodies close over their parameter only, and main closes over the
    heap block's names."""
    for fname, fdef in program.funcs.items():
        for callee in _called_functions(fdef.body):
            if callee not in program.funcs:
                raise SyntaxError_(f"unknown function {callee!r} called in {fname!r}")
        extra = free_vars(fdef.body) - {fdef.param}
        if extra:
            raise SyntaxError_(f"function {fname!r} has free variables {sorted(extra)}")
    heap_names: set[str] = set()
    for cell in program.heap_cells:
        if cell.name in heap_names:
            raise SyntaxError_(f"duplicate heap cell name {cell.name!r}")
        for callee in _called_functions(cell.hv):
            if callee not in program.funcs:
                raise SyntaxError_(f"unknown function {callee!r} in heap cell {cell.name!r}")
        extra = free_vars(cell.hv) - heap_names
        if extra:
            raise SyntaxError_(
                f"heap cell {cell.name!r} references undefined names {sorted(extra)}"
            )
        heap_names.add(cell.name)
    for callee in _called_functions(program.main):
        if callee not in program.funcs:
            raise SyntaxError_(f"unknown function {callee!r} called in main")
    extra = free_vars(program.main) - heap_names
    if extra:
        raise SyntaxError_(f"main has free variables {sorted(extra)}")

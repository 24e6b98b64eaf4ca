"""Concrete syntax: a fully parenthesized prefix form, one s-expression per
construct. `parse` and `print_program` are mutually inverse up to whitespace.
"""

from __future__ import annotations

from dataclasses import dataclass

from .syntax import (
    App,
    Call,
    Case,
    Expr,
    FoldHV,
    Force,
    FuncDef,
    HeapCell,
    HeapLit,
    HeapValue,
    Inl,
    Inr,
    Lam,
    LazyHV,
    Let,
    MemoHV,
    Pair,
    Pass,
    Program,
    Ptr,
    Save,
    Spend,
    Split,
    Unfold,
    Unit,
    Val,
    Value,
    Var,
    validate_program,
)


class ParseError(Exception):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {message}")
        self.line = line
        self.col = col


# ---------------------------------------------------------------------------
# Reader
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _Token:
    text: str
    line: int
    col: int


@dataclass(frozen=True)
class _SList:
    items: tuple
    line: int
    col: int


_Sexpr = "_Token | _SList"


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    line, col = 1, 1
    i = 0
    while i < len(text):
        c = text[i]
        if c == "\n":
            line += 1
            col = 1
            i += 1
        elif c.isspace():
            col += 1
            i += 1
        elif c == ";":
            while i < len(text) and text[i] != "\n":
                i += 1
        elif c in "()":
            tokens.append(_Token(c, line, col))
            col += 1
            i += 1
        else:
            start = i
            start_col = col
            while i < len(text) and not text[i].isspace() and text[i] not in "();":
                i += 1
                col += 1
            tokens.append(_Token(text[start:i], line, start_col))
    return tokens


def _read_all(text: str) -> list:
    tokens = _tokenize(text)
    forms = []
    pos = 0

    def read() -> object:
        nonlocal pos
        if pos >= len(tokens):
            raise ParseError("unexpected end of input", 0, 0)
        tok = tokens[pos]
        pos += 1
        if tok.text == "(":
            items = []
            while True:
                if pos >= len(tokens):
                    raise ParseError("unclosed parenthesis", tok.line, tok.col)
                if tokens[pos].text == ")":
                    pos += 1
                    return _SList(tuple(items), tok.line, tok.col)
                items.append(read())
        if tok.text == ")":
            raise ParseError("unbalanced ')'", tok.line, tok.col)
        return tok

    while pos < len(tokens):
        forms.append(read())
    return forms


def _where(form) -> tuple[int, int]:
    return (form.line, form.col)


def _ident(form, what: str) -> str:
    if not isinstance(form, _Token) or form.text in ("(", ")"):
        raise ParseError(f"expected {what}", *_where(form))
    if form.text[0].isdigit() or form.text[0] == "-":
        raise ParseError(f"expected {what}, got number {form.text!r}", *_where(form))
    return form.text


def _number(form, what: str) -> int:
    if isinstance(form, _Token):
        try:
            return int(form.text)
        except ValueError:
            pass
    raise ParseError(f"expected {what}", *_where(form))


def _arity(form: _SList, n: int, head: str) -> None:
    if len(form.items) != n + 1:
        raise ParseError(f"{head} takes {n} arguments", form.line, form.col)


_EXPR_HEADS = frozenset(
    ["let", "case", "split", "app", "call", "unfold", "force", "save", "spend", "pass"]
)
_HV_HEADS = frozenset(["fold", "lazy", "lazy!", "memo"])


def _parse_value(form) -> Value:
    if isinstance(form, _Token):
        if form.text == "unit":
            return Unit()
        return Var(_ident(form, "a value"))
    head_tok = form.items[0] if form.items else None
    head = head_tok.text if isinstance(head_tok, _Token) else None
    if head in _EXPR_HEADS or head in _HV_HEADS:
        raise ParseError(
            f"expression form ({head} ...) in value position", form.line, form.col
        )
    match head:
        case "inl":
            _arity(form, 1, "inl")
            return Inl(_parse_value(form.items[1]))
        case "inr":
            _arity(form, 1, "inr")
            return Inr(_parse_value(form.items[1]))
        case "pair":
            _arity(form, 2, "pair")
            return Pair(_parse_value(form.items[1]), _parse_value(form.items[2]))
        case "lam":
            _arity(form, 2, "lam")
            return Lam(_ident(form.items[1], "a binder"), _parse_expr(form.items[2]))
    raise ParseError(f"unknown value form {head!r}", form.line, form.col)


def _parse_hv(form) -> HeapValue:
    if not isinstance(form, _SList) or not form.items:
        raise ParseError("expected a heap value", *_where(form))
    head = form.items[0].text if isinstance(form.items[0], _Token) else None
    match head:
        case "fold":
            _arity(form, 1, "fold")
            return FoldHV(_parse_value(form.items[1]))
        case "lazy":
            _arity(form, 2, "lazy")
            return LazyHV(_ident(form.items[1], "a function name"), _parse_value(form.items[2]))
        case "lazy!":
            _arity(form, 3, "lazy!")
            split = _number(form.items[1], "a split amount")
            if split < 0:
                raise ParseError("split amount must be nonnegative", form.line, form.col)
            return LazyHV(
                _ident(form.items[2], "a function name"), _parse_value(form.items[3]), split
            )
        case "memo":
            _arity(form, 1, "memo")
            return MemoHV(_parse_value(form.items[1]))
    raise ParseError(f"expected a heap value, got {head!r}", *_where(form))


def _parse_branch(form, tag: str) -> tuple[str, Expr]:
    if (
        not isinstance(form, _SList)
        or len(form.items) != 3
        or not isinstance(form.items[0], _Token)
        or form.items[0].text != tag
    ):
        raise ParseError(f"expected ({tag} x e) branch", *_where(form))
    return _ident(form.items[1], "a binder"), _parse_expr(form.items[2])


def _parse_expr(form) -> Expr:
    if isinstance(form, _Token):
        return Val(_parse_value(form))
    if not form.items:
        raise ParseError("empty form", form.line, form.col)
    head = form.items[0].text if isinstance(form.items[0], _Token) else None
    if head in _HV_HEADS:
        return HeapLit(_parse_hv(form))
    match head:
        case "inl" | "inr" | "pair" | "lam":
            return Val(_parse_value(form))
        case "let":
            _arity(form, 3, "let")
            return Let(
                _ident(form.items[1], "a binder"),
                _parse_expr(form.items[2]),
                _parse_expr(form.items[3]),
            )
        case "case":
            _arity(form, 3, "case")
            ln, lb = _parse_branch(form.items[2], "inl")
            rn, rb = _parse_branch(form.items[3], "inr")
            return Case(_parse_value(form.items[1]), ln, lb, rn, rb)
        case "split":
            _arity(form, 3, "split")
            binders = form.items[1]
            if not isinstance(binders, _SList) or len(binders.items) != 2:
                raise ParseError("expected (x y) binder pair", *_where(form.items[1]))
            ln = _ident(binders.items[0], "a binder")
            rn = _ident(binders.items[1], "a binder")
            if ln == rn:
                raise ParseError(f"split binders must be distinct: {ln}", *_where(binders))
            return Split(ln, rn, _parse_value(form.items[2]), _parse_expr(form.items[3]))
        case "app":
            _arity(form, 2, "app")
            return App(_parse_value(form.items[1]), _parse_value(form.items[2]))
        case "call":
            _arity(form, 2, "call")
            return Call(_ident(form.items[1], "a function name"), _parse_value(form.items[2]))
        case "unfold":
            _arity(form, 1, "unfold")
            return Unfold(_parse_value(form.items[1]))
        case "force":
            _arity(form, 1, "force")
            return Force(_parse_value(form.items[1]))
        case "save":
            _arity(form, 2, "save")
            return Save(_number(form.items[1], "a count"), _parse_value(form.items[2]))
        case "spend":
            _arity(form, 3, "spend")
            return Spend(
                _number(form.items[1], "a count"),
                _parse_value(form.items[2]),
                _parse_expr(form.items[3]),
            )
        case "pass":
            _arity(form, 1, "pass")
            return Pass(_parse_value(form.items[1]))
    raise ParseError(f"unknown expression form {head!r}", form.line, form.col)


def parse(text: str) -> Program:
    """Parse a program: `(def F x e)*`, optional `(heap (a n hv) ...)`, `(main e)`."""
    funcs: dict[str, FuncDef] = {}
    heap_cells: list[HeapCell] = []
    main: Expr | None = None
    for form in _read_all(text):
        if not isinstance(form, _SList) or not form.items:
            raise ParseError("expected a top-level (def ...), (heap ...) or (main ...)", *_where(form))
        head = form.items[0].text if isinstance(form.items[0], _Token) else None
        if head == "def":
            _arity(form, 3, "def")
            name = _ident(form.items[1], "a function name")
            if name in funcs:
                raise ParseError(f"duplicate definition of {name!r}", form.line, form.col)
            funcs[name] = FuncDef(
                _ident(form.items[2], "a parameter"), _parse_expr(form.items[3])
            )
        elif head == "heap":
            for entry in form.items[1:]:
                if not isinstance(entry, _SList) or len(entry.items) != 3:
                    raise ParseError("expected (name count hv) heap entry", *_where(entry))
                heap_cells.append(
                    HeapCell(
                        _ident(entry.items[0], "a cell name"),
                        _number(entry.items[1], "an annotation count"),
                        _parse_hv(entry.items[2]),
                    )
                )
        elif head == "main":
            _arity(form, 1, "main")
            if main is not None:
                raise ParseError("duplicate (main ...)", form.line, form.col)
            main = _parse_expr(form.items[1])
        else:
            raise ParseError(f"unknown top-level form {head!r}", form.line, form.col)
    if main is None:
        raise ParseError("program has no (main ...)", 0, 0)
    program = Program(funcs, main, tuple(heap_cells))
    try:
        validate_program(program)
    except Exception as exc:
        raise ParseError(str(exc), 0, 0) from exc
    return program


def parse_expr(text: str) -> Expr:
    """Parse a single expression (handy in tests and the action builder)."""
    forms = _read_all(text)
    if len(forms) != 1:
        raise ParseError("expected exactly one expression", 0, 0)
    return _parse_expr(forms[0])


# ---------------------------------------------------------------------------
# Printer
# ---------------------------------------------------------------------------


def print_value(v: Value) -> str:
    match v:
        case Var(name):
            return name
        case Ptr(ident):
            # Pointers have no parseable source form; `#n` is debug notation.
            return f"#{ident}"
        case Unit():
            return "unit"
        case Inl(inner):
            return f"(inl {print_value(inner)})"
        case Inr(inner):
            return f"(inr {print_value(inner)})"
        case Pair(left, right):
            return f"(pair {print_value(left)} {print_value(right)})"
        case Lam(param, body):
            return f"(lam {param} {print_expr(body)})"
    raise TypeError(f"not a value: {v!r}")


def print_hv(hv: HeapValue) -> str:
    match hv:
        case FoldHV(value):
            return f"(fold {print_value(value)})"
        case LazyHV(func, arg, 0):
            return f"(lazy {func} {print_value(arg)})"
        case LazyHV(func, arg, split):
            return f"(lazy! {split} {func} {print_value(arg)})"
        case MemoHV(value):
            return f"(memo {print_value(value)})"
    raise TypeError(f"not a heap value: {hv!r}")


def print_expr(e: Expr) -> str:
    match e:
        case Val(value):
            return print_value(value)
        case HeapLit(hv):
            return print_hv(hv)
        case Let(name, bound, body):
            return f"(let {name} {print_expr(bound)} {print_expr(body)})"
        case Case(scrutinee, ln, lb, rn, rb):
            return (
                f"(case {print_value(scrutinee)}"
                f" (inl {ln} {print_expr(lb)})"
                f" (inr {rn} {print_expr(rb)}))"
            )
        case Split(ln, rn, pair, body):
            return f"(split ({ln} {rn}) {print_value(pair)} {print_expr(body)})"
        case App(func, arg):
            return f"(app {print_value(func)} {print_value(arg)})"
        case Call(func, arg):
            return f"(call {func} {print_value(arg)})"
        case Unfold(value):
            return f"(unfold {print_value(value)})"
        case Force(value):
            return f"(force {print_value(value)})"
        case Save(count, target):
            return f"(save {count} {print_value(target)})"
        case Spend(count, target, body):
            return f"(spend {count} {print_value(target)} {print_expr(body)})"
        case Pass(heir):
            return f"(pass {print_value(heir)})"
    raise TypeError(f"not an expression: {e!r}")


def print_program(program: Program) -> str:
    """Render a program; `parse(print_program(p))` is structurally `p`."""
    lines = [
        f"(def {name} {fdef.param} {print_expr(fdef.body)})"
        for name, fdef in program.funcs.items()
    ]
    if program.heap_cells:
        entries = " ".join(
            f"({cell.name} {cell.count} {print_hv(cell.hv)})" for cell in program.heap_cells
        )
        lines.append(f"(heap {entries})")
    lines.append(f"(main {print_expr(program.main)})")
    return "\n".join(lines) + "\n"

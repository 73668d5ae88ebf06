"""Text grammar for expressions, and the canonical printer.

Grammar (EBNF)::

    expr     := term (("+"|"-") term)*
    term     := unary (("*"|"/") unary)*
    unary    := "-" unary | pow
    pow      := atom ("^" exponent)?
    exponent := signed-rational | "(" constant-expr ")"
    atom     := integer | name | name "(" args ")" | jet | "(" expr ")"
              | "D" "(" application ("," argname)+ ")"

Jets are written u, u_t, u_x, u_y, u_xy, u_tt, ... (suffix letters in any
order).  Derivatives of declared functions are written D(f(x), x) or, for
unary functions, f'(x).  exp(z) denotes the natural exponential and is
represented as a power of a reserved base constant.  "/" binds like "*"
(left associative) and "^" binds tighter than unary minus.

``print_canonical`` emits a deterministic spelling of the canonical form;
``parse(print_canonical(e))`` structurally equals ``normalize(e)``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction

from .expr import (
    EULER,
    Const,
    Expr,
    FunApp,
    IPow,
    Jet,
    Prod,
    Rat,
    RPow,
    Sum,
    SymbolTable,
    Var,
    is_constant_expr,
    normalize,
)


@dataclass(frozen=True)
class SourceSpan:
    start: int
    end: int


class ParseError(Exception):
    def __init__(self, message: str, span: SourceSpan):
        super().__init__(f"{message} at {span.start}..{span.end}")
        self.message = message
        self.span = span


_TOKEN_RE = re.compile(
    r"\s*(?:(?P<int>\d+)|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)(?P<primes>'+)?"
    r"|(?P<op>[+\-*/^(),]))"
)


@dataclass(frozen=True)
class _Tok:
    kind: str  # int | ident | op | end
    text: str
    span: SourceSpan
    primes: int = 0


def _lex(text: str):
    toks = []
    pos = 0
    n = len(text)
    while pos < n:
        m = _TOKEN_RE.match(text, pos)
        if m is None or m.end() == pos:
            stripped = text[pos:].lstrip()
            if not stripped:
                break
            at = n - len(stripped)
            raise ParseError("unexpected character", SourceSpan(at, at + 1))
        pos = m.end()
        if m.group("int") is not None:
            toks.append(_Tok("int", m.group("int"),
                             SourceSpan(m.start("int"), m.end("int"))))
        elif m.group("ident") is not None:
            primes = len(m.group("primes") or "")
            toks.append(_Tok("ident", m.group("ident"),
                             SourceSpan(m.start("ident"), m.end()), primes))
        else:
            toks.append(_Tok("op", m.group("op"),
                             SourceSpan(m.start("op"), m.end("op"))))
    toks.append(_Tok("end", "", SourceSpan(n, n)))
    return toks


class _Parser:
    def __init__(self, text: str, symbols: SymbolTable):
        self.text = text
        self.symbols = symbols
        self.toks = _lex(text)
        self.i = 0

    def peek(self) -> _Tok:
        return self.toks[self.i]

    def next(self) -> _Tok:
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def expect_op(self, op: str) -> _Tok:
        tok = self.peek()
        if tok.kind != "op" or tok.text != op:
            raise ParseError(f"expected '{op}'", tok.span)
        return self.next()

    def at_op(self, *ops: str) -> bool:
        tok = self.peek()
        return tok.kind == "op" and tok.text in ops

    # expr := term (("+"|"-") term)*
    def expr(self) -> Expr:
        terms = [self.term()]
        while self.at_op("+", "-"):
            op = self.next().text
            t = self.term()
            terms.append(t if op == "+" else Prod((Rat(-1), t)))
        return terms[0] if len(terms) == 1 else Sum(tuple(terms))

    # term := unary (("*"|"/") unary)*
    def term(self) -> Expr:
        factors = [self.unary()]
        while self.at_op("*", "/"):
            op = self.next().text
            f = self.unary()
            factors.append(f if op == "*" else IPow(f, -1))
        return factors[0] if len(factors) == 1 else Prod(tuple(factors))

    # unary := "-" unary | pow
    def unary(self) -> Expr:
        if self.at_op("-"):
            self.next()
            return Prod((Rat(-1), self.unary()))
        return self.pow()

    # pow := atom ("^" exponent)?
    def pow(self) -> Expr:
        base = self.atom()
        if not self.at_op("^"):
            return base
        self.next()
        expo, span = self.exponent()
        if isinstance(expo, Fraction):
            if expo.denominator == 1:
                return IPow(base, int(expo))
            return RPow(base, Rat(expo))
        if not is_constant_expr(expo):
            raise ParseError("exponent must be rational", span)
        return RPow(base, expo)

    def exponent(self):
        tok = self.peek()
        if tok.kind == "op" and tok.text == "(":
            self.next()
            start = tok.span.start
            e = self.expr()
            close = self.expect_op(")")
            return e, SourceSpan(start, close.span.end)
        sign = 1
        if tok.kind == "op" and tok.text == "-":
            self.next()
            tok = self.peek()
            sign = -1
        if tok.kind != "int":
            raise ParseError("exponent must be rational", tok.span)
        num = self.next()
        value = Fraction(sign * int(num.text))
        if self.at_op("/"):
            save = self.i
            self.next()
            den = self.peek()
            if den.kind == "int":
                self.next()
                value = Fraction(sign * int(num.text), int(den.text))
            else:
                self.i = save
        return value, num.span

    def atom(self) -> Expr:
        tok = self.peek()
        if tok.kind == "int":
            self.next()
            return Rat(int(tok.text))
        if tok.kind == "op" and tok.text == "(":
            self.next()
            e = self.expr()
            self.expect_op(")")
            return e
        if tok.kind == "ident":
            return self.name_atom()
        raise ParseError("expected an expression", tok.span)

    def name_atom(self) -> Expr:
        tok = self.next()
        name = tok.text
        dep = self.symbols.dependent
        if name == "D":
            if tok.primes:
                raise ParseError("bad derivative index", tok.span)
            return self.d_form(tok)
        if name == dep or name.startswith(dep + "_"):
            if tok.primes:
                raise ParseError("bad derivative index", tok.span)
            return self.jet_atom(tok)
        if name == "exp":
            self.expect_op("(")
            arg = self.expr()
            self.expect_op(")")
            return RPow(EULER, arg)
        func = self.symbols.functions.get(name)
        if func is not None:
            self.expect_op("(")
            args = [self.expr()]
            while self.at_op(","):
                self.next()
                args.append(self.expr())
            self.expect_op(")")
            if len(args) != func.arity:
                raise ParseError(
                    f"{name} expects {func.arity} argument(s)", tok.span)
            deriv = (0,) * func.arity
            if tok.primes:
                if func.arity != 1:
                    raise ParseError("bad derivative index", tok.span)
                deriv = (tok.primes,)
            return FunApp(func, tuple(args), deriv)
        if tok.primes:
            raise ParseError("undeclared symbol", tok.span)
        if name in self.symbols.constants:
            return self.symbols.constants[name]
        if name in self.symbols.variables:
            return self.symbols.variables[name]
        raise ParseError("undeclared symbol", tok.span)

    def jet_atom(self, tok: _Tok) -> Expr:
        dep = self.symbols.dependent
        if tok.text == dep:
            return Jet(dep, (0, 0, 0))
        suffix = tok.text[len(dep) + 1:]
        at = tok.span.start + len(dep)
        if not suffix or any(c not in "txy" for c in suffix):
            raise ParseError("bad derivative index", SourceSpan(at, tok.span.end))
        return Jet(dep, (suffix.count("t"), suffix.count("x"), suffix.count("y")))

    def d_form(self, tok: _Tok) -> Expr:
        self.expect_op("(")
        inner = self.expr()
        inner_n = inner
        if not isinstance(inner_n, FunApp):
            inner_n = normalize(inner)
        if not isinstance(inner_n, FunApp):
            raise ParseError("D(...) requires a function application", tok.span)
        deriv = list(inner_n.deriv)
        params = inner_n.func.params
        saw = False
        while self.at_op(","):
            self.next()
            vtok = self.peek()
            if vtok.kind != "ident" or vtok.text not in params:
                raise ParseError("bad derivative index", vtok.span)
            self.next()
            deriv[params.index(vtok.text)] += 1
            saw = True
        close = self.expect_op(")")
        if not saw:
            raise ParseError("bad derivative index", close.span)
        return FunApp(inner_n.func, inner_n.args, tuple(deriv))


def parse(text: str, symbols: SymbolTable) -> Expr:
    """Parse ``text`` against the declared symbols; returns the canonical
    form.  All errors carry a SourceSpan into the input."""
    p = _Parser(text, symbols)
    e = p.expr()
    end = p.peek()
    if end.kind != "end":
        raise ParseError("unexpected trailing input", end.span)
    return normalize(e)


# ---------------------------------------------------------------------------
# canonical printer


def _frac_str(q: Fraction) -> str:
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


def _print_funapp(e: FunApp) -> str:
    args = ", ".join(_print(a) for a in e.args)
    head = f"{e.func.name}({args})"
    k = sum(e.deriv)
    if k == 0:
        return head
    if e.func.arity == 1 and k <= 3:
        primes = "'" * k
        return f"{e.func.name}{primes}({args})"
    vars_part = ", ".join(
        name for name, n in zip(e.func.params, e.deriv) for _ in range(n))
    return f"D({head}, {vars_part})"


def _base_str(base: Expr) -> str:
    t = type(base)
    if t in (Const, Var):
        if base == EULER:
            return "exp(1)"
        return base.name
    if t is Jet:
        return _print(base)
    if t is FunApp:
        return _print_funapp(base)
    if t is Rat and base.value >= 0:
        return _frac_str(base.value)
    return f"({_print(base)})"


def _expo_str(expo: Expr) -> str:
    if type(expo) is Rat and expo.value.denominator == 1:
        return str(expo.value.numerator)
    return f"({_print(expo)})"


def _factor_str(f: Expr) -> str:
    t = type(f)
    if t is IPow:
        if f.base == EULER:
            return f"exp({f.exp})"
        return f"{_base_str(f.base)}^{f.exp}"
    if t is RPow:
        if f.base == EULER:
            return f"exp({_print(f.expo)})"
        return f"{_base_str(f.base)}^{_expo_str(f.expo)}"
    if t in (Const, Var):
        if f == EULER:
            return "exp(1)"
        return f.name
    if t is Jet:
        idx = f.index
        suffix = "t" * idx[0] + "x" * idx[1] + "y" * idx[2]
        return f.dep if not suffix else f"{f.dep}_{suffix}"
    if t is FunApp:
        return _print_funapp(f)
    if t is Rat:
        return _frac_str(f.value) if f.value >= 0 else f"({_frac_str(f.value)})"
    return f"({_print(f)})"


def _term_parts(term: Expr):
    """Render one canonical monomial as (negative?, body)."""
    if type(term) is Rat:
        return term.value < 0, _frac_str(abs(term.value))
    if type(term) is Prod:
        factors = list(term.factors)
        coeff = Fraction(1)
        if factors and type(factors[0]) is Rat:
            coeff = factors[0].value
            factors = factors[1:]
        body = "*".join(_factor_str(f) for f in factors)
        if abs(coeff) != 1:
            body = f"{_frac_str(abs(coeff))}*{body}"
        return coeff < 0, body
    return False, _factor_str(term)


def _print(e: Expr) -> str:
    if type(e) is Sum:
        out = []
        for i, term in enumerate(e.terms):
            negative, body = _term_parts(term)
            if i == 0:
                out.append(f"-{body}" if negative else body)
            else:
                out.append(f" - {body}" if negative else f" + {body}")
        return "".join(out)
    negative, body = _term_parts(e)
    return f"-{body}" if negative else body


def print_canonical(e: Expr) -> str:
    """Deterministic text for the canonical form of e."""
    return _print(normalize(e))

"""Parser for prenex HyperLTL.

Syntax: a quantifier prefix `forall p.` / `exists q.` (optionally binding a
machine with `forall p : machineName.`), followed by an LTL body whose atoms
are trace-indexed variable tests: `a[p]` for Booleans, `v=3[p]` or
`v=lit[p]` for enumerated/integer variables. Operators: ! & | -> <-> and
G F X U R W.
"""

import re

from ..boolexpr import VarIs
from .. import ltl as M
from .spec_parser import ParseError

FORALL_KW, EXISTS_KW = "forall", "exists"

_TOKEN = re.compile(
    r"""
      (?P<ws>\s+)
    | (?P<comment>//[^\n]*|--[^\n]*)
    | (?P<num>\d+)
    | (?P<id>[A-Za-z_][A-Za-z0-9_\#$]*)
    | (?P<sym><->|->|[()\[\].:!&|=])
    """,
    re.VERBOSE,
)


class _HltlParser:
    def __init__(self, text, machines=None):
        self.toks = []
        pos, line, linestart = 0, 1, 0
        while pos < len(text):
            m = _TOKEN.match(text, pos)
            if not m:
                raise ParseError(f"unexpected character {text[pos]!r}",
                                 line, pos - linestart + 1)
            if m.lastgroup not in ("ws", "comment"):
                self.toks.append((m.lastgroup, m.group(), line,
                                  m.start() - linestart + 1))
            nl = m.group().count("\n")
            if nl:
                line += nl
                linestart = m.start() + m.group().rfind("\n") + 1
            pos = m.end()
        self.toks.append(("eof", "", line, 0))
        self.pos = 0
        self.machines = machines
        self.trace_machines = {}

    def peek(self, ahead=0):
        return self.toks[min(self.pos + ahead, len(self.toks) - 1)]

    def next(self):
        t = self.toks[self.pos]
        self.pos += 1
        return t

    def at(self, v):
        return self.peek()[1] == v

    def expect(self, v):
        k, got, line, col = self.next()
        if got != v:
            raise ParseError(f"expected {v!r}, found {got!r}", line, col)

    def parse(self):
        prefix = []
        while self.peek()[1] in (FORALL_KW, EXISTS_KW):
            pol = M.FORALL if self.next()[1] == FORALL_KW else M.EXISTS
            k, var, line, col = self.next()
            if k != "id":
                raise ParseError("expected a trace variable", line, col)
            machine = None
            if self.at(":"):
                self.next()
                machine = self.next()[1]
            self.expect(".")
            if any(v == var for _, v, _ in prefix):
                raise ParseError(f"duplicate trace variable {var}",
                                 line, col)
            prefix.append((pol, var, machine))
            self.trace_machines[var] = machine
        body = self.iff_f()
        k, v, line, col = self.peek()
        if k != "eof":
            raise ParseError(f"trailing input {v!r}", line, col)
        used = M.traces_of(body)
        bound = {v for _, v, _ in prefix}
        if used - bound:
            raise ParseError(
                "unquantified trace variables: " + ", ".join(sorted(used - bound))
            )
        return M.HyperLtlSpec(tuple(prefix), body)

    def iff_f(self):
        f = self.implies_f()
        while self.at("<->"):
            self.next()
            g = self.implies_f()
            f = M.LOr(M.LAnd(f, g), M.LAnd(M.lnot(f), M.lnot(g)))
        return f

    def implies_f(self):
        f = self.or_f()
        if self.at("->"):
            self.next()
            return M.lor(M.lnot(f), self.implies_f())
        return f

    def or_f(self):
        f = self.and_f()
        while self.at("|"):
            self.next()
            f = M.LOr(f, self.and_f())
        return f

    def and_f(self):
        f = self.until_f()
        while self.at("&"):
            self.next()
            f = M.LAnd(f, self.until_f())
        return f

    def until_f(self):
        f = self.unary_f()
        while self.peek()[1] in ("U", "R", "W", "S"):
            op = self.next()[1]
            g = self.unary_f()
            if op == "U":
                f = M.LUntil(f, g)
            elif op == "R":
                f = M.LRelease(f, g)
            elif op == "S":
                f = M.LSince(f, g)
            else:
                f = M.LOr(M.LUntil(f, g), M.LAlways(f))
        return f

    def unary_f(self):
        v = self.peek()[1]
        if v == "!":
            self.next()
            return M.lnot(self.unary_f())
        if v in ("G", "F", "X", "Y", "O", "H"):
            self.next()
            body = self.unary_f()
            return {"G": M.LAlways, "F": M.LEventually, "X": M.LNext,
                    "Y": M.LBefore, "O": M.LOnce, "H": M.LHist}[v](body)
        if v == "(":
            self.next()
            f = self.iff_f()
            self.expect(")")
            return f
        return self.atom()

    def atom(self):
        k, name, line, col = self.next()
        if k != "id":
            raise ParseError(f"expected an atom, found {name!r}", line, col)
        if name in ("TRUE", "FALSE") and not self.at("=") and not self.at("["):
            return M.LTrue() if name == "TRUE" else M.LFalse()
        value = True
        boolean = True
        if self.at("="):
            self.next()
            kk, lit, l2, c2 = self.next()
            if kk == "num":
                value = int(lit)
                boolean = False
            elif lit in ("TRUE", "FALSE"):
                value = lit == "TRUE"
            else:
                value = lit
                boolean = False
        self.expect("[")
        kk, trace, l2, c2 = self.next()
        if kk != "id":
            raise ParseError("expected a trace variable", l2, c2)
        self.expect("]")
        self._check_var(name, value, boolean, trace, line, col)
        return M.LAtom(trace, VarIs(name, value))

    def _check_var(self, name, value, boolean, trace, line, col):
        if self.machines is None:
            return
        mname = self.trace_machines.get(trace)
        m = None
        if mname is not None and mname in self.machines:
            m = self.machines[mname]
        elif len(self.machines) == 1:
            m = next(iter(self.machines.values()))
        if m is None:
            return
        try:
            decl = m.var(name)
        except KeyError:
            raise ParseError(
                f"variable {name} not declared in machine {m.name}",
                line, col)
        if value not in decl.values:
            raise ParseError(
                f"value {value!r} outside the domain of {name}", line, col)


def parse_hyperltl(text, machines=None):
    return _HltlParser(text, machines).parse()


# ---------------------------------------------------------------------------
# Emission (deterministic, re-parseable)


def _fmt_val(v):
    if v is True:
        return "TRUE"
    if v is False:
        return "FALSE"
    return str(v)


def _emit_bexpr(b, trace):
    from ..boolexpr import BAnd, BNot, BOr, BTrue, BFalse

    if isinstance(b, BTrue):
        return "TRUE"
    if isinstance(b, BFalse):
        return "FALSE"
    if isinstance(b, VarIs):
        if b.value is True:
            s = f"{b.name}[{trace}]"
        elif b.value is False:
            s = f"!{b.name}[{trace}]"
        else:
            s = f"{b.name}={_fmt_val(b.value)}[{trace}]"
        # a primed test is the same test one step later; X distributes over
        # every Boolean connective, so rewriting the leaf alone is sound
        return f"X {s}" if b.primed else s
    if isinstance(b, BNot):
        return f"!({_emit_bexpr(b.body, trace)})"
    if isinstance(b, (BAnd, BOr)):
        op = " & " if isinstance(b, BAnd) else " | "
        return "(" + op.join(_emit_bexpr(a, trace) for a in b.args) + ")"
    raise TypeError(type(b))


def print_hyperltl(spec):
    """Serialize a prenex spec in the syntax read by parse_hyperltl."""

    def f(x):
        if isinstance(x, M.LTrue):
            return "TRUE"
        if isinstance(x, M.LFalse):
            return "FALSE"
        if isinstance(x, M.LAtom):
            return _emit_bexpr(x.expr, x.trace)
        if isinstance(x, M.LNot):
            return f"!({f(x.body)})"
        if isinstance(x, M.LAnd):
            return f"({f(x.left)} & {f(x.right)})"
        if isinstance(x, M.LOr):
            return f"({f(x.left)} | {f(x.right)})"
        unary = {M.LNext: "X", M.LAlways: "G", M.LEventually: "F",
                 M.LBefore: "Y", M.LOnce: "O", M.LHist: "H"}
        for cls, op in unary.items():
            if isinstance(x, cls):
                return f"{op} ({f(x.body)})"
        binary = {M.LUntil: "U", M.LRelease: "R", M.LSince: "S"}
        for cls, op in binary.items():
            if isinstance(x, cls):
                return f"(({f(x.left)}) {op} ({f(x.right)}))"
        raise TypeError(type(x))

    quants = " ".join(
        (f"{'forall' if pol == M.FORALL else 'exists'} {var}"
         + (f" : {mname}" if mname else "") + ".")
        for pol, var, mname in spec.prefix
    )
    body = f(spec.body)
    return (quants + "\n" + body + "\n") if quants else body + "\n"

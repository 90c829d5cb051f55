"""Parser for a declarative SMV subset.

Supports `MODULE main` with VAR (boolean, enumerated, bounded-integer),
INIT/INVAR/TRANS sections, and an optional LTLSPEC. Imperative constructs
(ASSIGN, processes, extra modules) are rejected with an explicit
"unsupported construct" diagnostic. Expressions are translated into Boolean
trees over value tests; bounded-integer arithmetic is expanded by
enumerating the valuations of its support variables.
"""

import itertools
import re
from dataclasses import dataclass

from ..boolexpr import FALSE, TRUE, VarDecl, VarIs, band, biff, bnot, bor
from .. import ltl as M
from .spec_parser import ParseError


@dataclass(frozen=True)
class SmvSource:
    name: str
    variables: tuple  # of VarDecl (with explicit domains)
    init: tuple
    invar: tuple
    trans: tuple
    ltlspec: tuple  # of machine-level LTL formulas

    def machine(self, trace_var=None):
        from ..boolexpr import StateMachine

        gmap = {}
        for v in self.variables:
            if v.boolean:
                gmap[(v.name, ())] = ("bool", v.name)
            else:
                for val in v.values:
                    gmap[(v.name, (val,))] = ("int", v.name, val)
        return StateMachine(self.name, self.variables, self.init,
                            self.invar, self.trans, gmap, trace_var)


_SMV_TOKEN = re.compile(
    r"""
      (?P<ws>\s+)
    | (?P<comment>--[^\n]*)
    | (?P<num>\d+)
    | (?P<id>[A-Za-z_][A-Za-z0-9_.\#$]*)
    | (?P<sym><->|->|<=|>=|!=|\.\.|[{}();,:=<>!&|+\-\[\]])
    """,
    re.VERBOSE,
)

_UNSUPPORTED = ("ASSIGN", "DEFINE", "FAIRNESS", "JUSTICE", "COMPASSION",
                "SPEC", "CTLSPEC", "process", "FROZENVAR", "IVAR")

_SECTIONS = ("VAR", "INIT", "INVAR", "TRANS", "LTLSPEC", "MODULE")


def _tokenize(text):
    toks, pos, line, linestart = [], 0, 1, 0
    while pos < len(text):
        m = _SMV_TOKEN.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}",
                             line, pos - linestart + 1)
        if m.lastgroup not in ("ws", "comment"):
            toks.append((m.lastgroup, m.group(), line,
                         m.start() - linestart + 1))
        nl = m.group().count("\n")
        if nl:
            line += nl
            linestart = m.start() + m.group().rfind("\n") + 1
        pos = m.end()
    toks.append(("eof", "", line, 0))
    return toks


class _Term:
    """An SMV arithmetic/value term: finite map from support assignments to
    values, represented lazily as (support variables, evaluator)."""

    def __init__(self, support, fn):
        self.support = tuple(support)  # of (VarDecl, primed)
        self.fn = fn  # assignment dict (name, primed)->value -> value


class _SmvParser:
    def __init__(self, text):
        self.toks = _tokenize(text)
        self.pos = 0
        self.vars = {}

    def peek(self, ahead=0):
        return self.toks[min(self.pos + ahead, len(self.toks) - 1)]

    def next(self):
        t = self.toks[self.pos]
        self.pos += 1
        return t

    def at(self, value):
        return self.peek()[1] == value

    def expect(self, value):
        k, v, line, col = self.next()
        if v != value:
            raise ParseError(f"expected {value!r}, found {v!r}", line, col)

    def fail(self, msg):
        _, v, line, col = self.peek()
        raise ParseError(msg, line, col)

    def parse(self):
        name = "main"
        if self.at("MODULE"):
            self.next()
            _, name, line, col = self.next()
            if name != "main":
                raise ParseError(
                    "unsupported construct: module other than main",
                    line, col)
        init, invar, trans, spec = [], [], [], []
        while self.peek()[0] != "eof":
            k, v, line, col = self.peek()
            if v in _UNSUPPORTED:
                raise ParseError(f"unsupported construct: {v}", line, col)
            if v == "VAR":
                self.next()
                self.var_section()
            elif v in ("INIT", "INVAR", "TRANS"):
                self.next()
                e = self.bool_expr()
                if self.at(";"):
                    self.next()
                if v == "TRANS":
                    trans.append(e)
                elif v == "INIT":
                    init.append(e)
                else:
                    invar.append(e)
            elif v == "LTLSPEC":
                self.next()
                spec.append(self.ltl_expr())
                if self.at(";"):
                    self.next()
            else:
                self.fail(f"expected a section keyword, found {v!r}")
        return SmvSource(name, tuple(self.vars.values()), tuple(init),
                         tuple(invar), tuple(trans), tuple(spec))

    def var_section(self):
        while self.peek()[0] == "id" and self.peek()[1] not in _SECTIONS \
                and self.peek(1)[1] == ":":
            k, name, line, col = self.next()
            self.expect(":")
            if name in self.vars:
                raise ParseError(f"duplicate variable {name}", line, col)
            self.vars[name] = self.var_domain(name)
            self.expect(";")

    def var_domain(self, name):
        k, v, line, col = self.next()
        if v == "boolean":
            return VarDecl(name, 2, boolean=True)
        if v == "{":
            values = []
            while True:
                kk, vv, _, _ = self.next()
                values.append(int(vv) if kk == "num" else vv)
                if self.at("}"):
                    self.next()
                    break
                self.expect(",")
            return VarDecl(name, len(values), boolean=False,
                           domain=tuple(values))
        if k == "num":
            self.expect("..")
            kk, hi, l2, c2 = self.next()
            if kk != "num":
                raise ParseError("expected an upper range bound", l2, c2)
            lo, hi = int(v), int(hi)
            return VarDecl(name, hi - lo + 1, boolean=False,
                           domain=tuple(range(lo, hi + 1)))
        raise ParseError(f"unsupported variable domain {v!r}", line, col)

    # -- Boolean expressions ----------------------------------------------

    def bool_expr(self):
        return self.iff_e()

    def iff_e(self):
        e = self.implies_e()
        while self.at("<->"):
            self.next()
            e = biff(e, self.implies_e())
        return e

    def implies_e(self):
        e = self.or_e()
        if self.at("->"):
            self.next()
            return bor(bnot(e), self.implies_e())
        return e

    def or_e(self):
        e = self.and_e()
        while self.at("|"):
            self.next()
            e = bor(e, self.and_e())
        return e

    def and_e(self):
        e = self.not_e()
        while self.at("&"):
            self.next()
            e = band(e, self.not_e())
        return e

    def not_e(self):
        if self.at("!"):
            self.next()
            return bnot(self.not_e())
        return self.atom_e()

    def atom_e(self):
        mark = self.pos
        if self.at("("):
            self.next()
            try:
                e = self.bool_expr()
                self.expect(")")
                if self.peek()[1] in ("=", "!=", "<", "<=", ">", ">="):
                    raise ParseError("term context", 0, 0)
                return e
            except ParseError:
                self.pos = mark
        left = self.term()
        op = self.peek()[1]
        if op in ("=", "!=", "<", "<=", ">", ">="):
            self.next()
            right = self.term()
            return self.compare(op, left, right)
        return self.term_as_bool(left)

    def compare(self, op, l, r):
        test = {
            "=": lambda a, b: a == b, "!=": lambda a, b: a != b,
            "<": lambda a, b: a < b, "<=": lambda a, b: a <= b,
            ">": lambda a, b: a > b, ">=": lambda a, b: a >= b,
        }[op]
        support = {(v.name, p): (v, p) for v, p in l.support + r.support}
        decls = list(support.values())
        if not decls:
            return TRUE if test(l.fn({}), r.fn({})) else FALSE
        out = []
        for combo in itertools.product(*(v.values for v, _ in decls)):
            env = {(v.name, p): val
                   for (v, p), val in zip(decls, combo)}
            if test(l.fn(env), r.fn(env)):
                out.append(band(*(VarIs(v.name, val, p)
                                  for (v, p), val in zip(decls, combo))))
        return bor(*out)

    def term_as_bool(self, t):
        if len(t.support) == 1 and t.support[0][0].boolean:
            v, p = t.support[0]
            probe = t.fn({(v.name, p): True})
            if probe is True and t.fn({(v.name, p): False}) is False:
                return VarIs(v.name, True, p)
        if not t.support:
            val = t.fn({})
            if isinstance(val, bool):
                return TRUE if val else FALSE
        self.fail("expected a Boolean expression")

    # -- terms -------------------------------------------------------------

    def term(self):
        t = self.term_atom()
        while self.peek()[1] in ("+", "-"):
            op = self.next()[1]
            r = self.term_atom()
            t = self._arith(op, t, r)
        return t

    def _arith(self, op, l, r):
        fn = (lambda a, b: a + b) if op == "+" else (lambda a, b: a - b)
        support = l.support + tuple(
            s for s in r.support if s not in l.support
        )
        return _Term(support, lambda env: fn(l.fn(env), r.fn(env)))

    def term_atom(self):
        k, v, line, col = self.next()
        if v == "(":
            t = self.term()
            self.expect(")")
            return t
        if v == "-":
            t = self.term_atom()
            return _Term(t.support, lambda env: -t.fn(env))
        if v == "!":
            t = self.term_atom()
            return _Term(t.support, lambda env: not t.fn(env))
        if k == "num":
            n = int(v)
            return _Term((), lambda env: n)
        if v == "TRUE":
            return _Term((), lambda env: True)
        if v == "FALSE":
            return _Term((), lambda env: False)
        if v == "next":
            self.expect("(")
            kk, name, l2, c2 = self.next()
            if name not in self.vars:
                raise ParseError(f"unknown variable {name}", l2, c2)
            self.expect(")")
            return self._var_term(self.vars[name], True)
        if k == "id":
            if v in self.vars:
                return self._var_term(self.vars[v], False)
            # enum literal used as a constant
            return _Term((), lambda env, _v=v: _v)
        raise ParseError(f"expected a term, found {v!r}", line, col)

    def _var_term(self, decl, primed):
        key = (decl.name, primed)
        return _Term(((decl, primed),), lambda env: env[key])

    # -- LTL ----------------------------------------------------------------

    def ltl_expr(self):
        return self.ltl_iff()

    def ltl_iff(self):
        f = self.ltl_implies()
        while self.at("<->"):
            self.next()
            g = self.ltl_implies()
            f = M.LOr(M.LAnd(f, g), M.LAnd(M.lnot(f), M.lnot(g)))
        return f

    def ltl_implies(self):
        f = self.ltl_or()
        if self.at("->"):
            self.next()
            return M.lor(M.lnot(f), self.ltl_implies())
        return f

    def ltl_or(self):
        f = self.ltl_and()
        while self.at("|"):
            self.next()
            f = M.LOr(f, self.ltl_and())
        return f

    def ltl_and(self):
        f = self.ltl_until()
        while self.at("&"):
            self.next()
            f = M.LAnd(f, self.ltl_until())
        return f

    def ltl_until(self):
        f = self.ltl_unary()
        while self.peek()[1] in ("U", "R", "V", "W", "S"):
            op = self.next()[1]
            g = self.ltl_unary()
            f = _ltl_binary(op, f, g)
        return f

    def ltl_unary(self):
        v = self.peek()[1]
        if v == "!":
            self.next()
            return M.lnot(self.ltl_unary())
        if v in ("G", "F", "X", "O", "H", "Y"):
            self.next()
            body = self.ltl_unary()
            return {
                "G": M.LAlways, "F": M.LEventually, "X": M.LNext,
                "O": M.LOnce, "H": M.LHist, "Y": M.LBefore,
            }[v](body)
        mark = self.pos
        if v == "(":
            self.next()
            try:
                f = self.ltl_expr()
                self.expect(")")
                if self.peek()[1] in ("=", "!=", "<", "<=", ">", ">="):
                    raise ParseError("term context", 0, 0)
                return f
            except ParseError:
                self.pos = mark
        return M.LAtom(None, self.atom_e())

    def parse_formula_only(self):
        f = self.ltl_expr()
        if self.peek()[0] != "eof":
            self.fail("trailing input after formula")
        return f


def _ltl_binary(op, f, g):
    if op == "U":
        return M.LUntil(f, g)
    if op in ("R", "V"):
        return M.LRelease(f, g)
    if op == "W":
        return M.LOr(M.LUntil(f, g), M.LAlways(f))
    return M.LSince(f, g)


def parse_smv(text):
    return _SmvParser(text).parse()

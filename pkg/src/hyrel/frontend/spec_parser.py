"""Parser for the relational modeling language.

The surface syntax is a compact Alloy-style language: signatures with
multiplicity-annotated fields (optionally mutable via `var`), enumerations,
predicates and functions, assertions, and run/check commands with scopes.
Signatures marked `trace` may be quantified over as traces. The parser is a
hand-rolled recursive-descent with line/column diagnostics, paired with a
printer whose output re-parses to an equal model.
"""

import re
from dataclasses import dataclass


class ParseError(Exception):
    def __init__(self, message, line=None, col=None):
        where = f" at {line}:{col}" if line is not None else ""
        super().__init__(f"{message}{where}")
        self.line = line
        self.col = col


# ---------------------------------------------------------------------------
# Surface AST


@dataclass(frozen=True)
class SName:
    name: str


@dataclass(frozen=True)
class SConst:
    kind: str  # "univ" | "none" | "iden"


@dataclass(frozen=True)
class SBinary:
    op: str  # + - & . <: :>
    left: object
    right: object


@dataclass(frozen=True)
class SArrow:
    left: object
    ml: str  # set one lone some no
    mr: str
    right: object


@dataclass(frozen=True)
class SUnary:
    op: str  # ~ ^ *
    expr: object


@dataclass(frozen=True)
class SPrimeE:
    expr: object


@dataclass(frozen=True)
class SMultSet:
    mult: str  # set one lone some
    expr: object


@dataclass(frozen=True)
class SCall:
    name: str
    args: tuple


@dataclass(frozen=True)
class SCompare:
    op: str  # = != in !in
    left: object
    right: object


@dataclass(frozen=True)
class SCard:
    mult: str  # some no lone one
    expr: object


@dataclass(frozen=True)
class SNot:
    body: object


@dataclass(frozen=True)
class SAndF:
    left: object
    right: object


@dataclass(frozen=True)
class SOrF:
    left: object
    right: object


@dataclass(frozen=True)
class SImpliesF:
    left: object
    right: object


@dataclass(frozen=True)
class SIffF:
    left: object
    right: object


@dataclass(frozen=True)
class STempU:
    op: str  # always eventually after once historically before
    body: object


@dataclass(frozen=True)
class STempB:
    op: str  # until releases since
    left: object
    right: object


@dataclass(frozen=True)
class SQuant:
    q: str  # all some
    decls: tuple  # of (names tuple, domain expr)
    body: object


@dataclass(frozen=True)
class STrueF:
    pass


# Paragraphs


@dataclass(frozen=True)
class Field:
    name: str
    mutable: bool
    type: object


@dataclass(frozen=True)
class Sig:
    names: tuple
    one: bool = False
    trace: bool = False
    parent: object = None  # (kind "in"|"extends", name) | None
    fields: tuple = ()


@dataclass(frozen=True)
class Enum:
    name: str
    members: tuple


@dataclass(frozen=True)
class Pred:
    name: str
    params: tuple  # of (name, type expr)
    body: object


@dataclass(frozen=True)
class Fun:
    name: str
    params: tuple
    rtype: object
    body: object


@dataclass(frozen=True)
class Assert:
    name: str
    body: object


@dataclass(frozen=True)
class Fact:
    name: object  # str | None
    body: object


@dataclass(frozen=True)
class Command:
    kind: str  # run | check
    name: str
    body: object = None  # inline formula for run
    scopes: tuple = ()  # of (int, signame)
    k: object = None
    sem: object = None
    backend: object = None


@dataclass(frozen=True)
class SpecModel:
    paragraphs: tuple

    def sigs(self):
        return [p for p in self.paragraphs if isinstance(p, Sig)]

    def enums(self):
        return [p for p in self.paragraphs if isinstance(p, Enum)]

    def preds(self):
        return {p.name: p for p in self.paragraphs if isinstance(p, Pred)}

    def funs(self):
        return {p.name: p for p in self.paragraphs if isinstance(p, Fun)}

    def asserts(self):
        return {p.name: p for p in self.paragraphs if isinstance(p, Assert)}

    def facts(self):
        return [p for p in self.paragraphs if isinstance(p, Fact)]

    def commands(self):
        return {p.name: p for p in self.paragraphs if isinstance(p, Command)}


# ---------------------------------------------------------------------------
# Tokenizer

_TOKEN_RE = re.compile(
    r"""
      (?P<ws>\s+)
    | (?P<comment>//[^\n]*|--[^\n]*|/\*.*?\*/)
    | (?P<num>\d+)
    | (?P<id>[A-Za-z_][A-Za-z0-9_$]*)
    | (?P<sym><:|:>|->|!=|!in|[{}\[\](),:|.'+\-&~^*=!])
    """,
    re.VERBOSE | re.DOTALL,
)

MULTS = ("set", "one", "lone", "some", "no")
UNARY_TEMPS = ("always", "eventually", "after", "once", "historically",
               "before")
BINARY_TEMPS = ("until", "releases", "since")


@dataclass
class Tok:
    kind: str  # num | id | sym | eof
    value: str
    line: int
    col: int


def tokenize(text):
    toks = []
    pos, line, linestart = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise ParseError(
                f"unexpected character {text[pos]!r}", line, pos - linestart + 1
            )
        kind = m.lastgroup
        value = m.group()
        if kind not in ("ws", "comment"):
            toks.append(Tok(kind, value, line, m.start() - linestart + 1))
        nl = value.count("\n")
        if nl:
            line += nl
            linestart = m.start() + value.rfind("\n") + 1
        pos = m.end()
    toks.append(Tok("eof", "", line, pos - linestart + 1))
    return toks


# ---------------------------------------------------------------------------
# Parser


class _Parser:
    def __init__(self, text):
        self.toks = tokenize(text)
        self.pos = 0

    def peek(self, ahead=0):
        return self.toks[min(self.pos + ahead, len(self.toks) - 1)]

    def at(self, value):
        return self.peek().value == value and self.peek().kind != "num"

    def next(self):
        t = self.toks[self.pos]
        self.pos += 1
        return t

    def expect(self, value):
        t = self.next()
        if t.value != value:
            raise ParseError(f"expected {value!r}, found {t.value!r}",
                             t.line, t.col)
        return t

    def ident(self):
        t = self.next()
        if t.kind != "id":
            raise ParseError(f"expected identifier, found {t.value!r}",
                             t.line, t.col)
        return t.value

    def fail(self, msg):
        t = self.peek()
        raise ParseError(msg, t.line, t.col)

    # -- paragraphs -------------------------------------------------------

    def model(self):
        out = []
        while self.peek().kind != "eof":
            out.append(self.paragraph())
        return SpecModel(tuple(out))

    def paragraph(self):
        if self.at("enum"):
            return self.enum_decl()
        if self.at("pred"):
            return self.pred_decl()
        if self.at("fun"):
            return self.fun_decl()
        if self.at("assert"):
            return self.assert_decl()
        if self.at("fact"):
            return self.fact_decl()
        if self.at("run") or self.at("check"):
            return self.command()
        if self.at("sig") or self.at("one") or self.at("trace") \
                or self.at("var"):
            return self.sig_decl()
        self.fail(f"expected a declaration, found {self.peek().value!r}")

    def sig_decl(self):
        one = trace = False
        while True:
            if self.at("one"):
                self.next()
                one = True
            elif self.at("trace"):
                self.next()
                trace = True
            else:
                break
        self.expect("sig")
        names = [self.ident()]
        while self.at(","):
            self.next()
            names.append(self.ident())
        parent = None
        if self.at("in") or self.at("extends"):
            kind = self.next().value
            parent = (kind, self.ident())
        self.expect("{")
        fields = []
        while not self.at("}"):
            fields.extend(self.field_decl())
            if self.at(","):
                self.next()
        self.expect("}")
        return Sig(tuple(names), one, trace, parent, tuple(fields))

    def field_decl(self):
        mutable = False
        if self.at("var"):
            self.next()
            mutable = True
        names = [self.ident()]
        while self.at(","):
            self.next()
            names.append(self.ident())
        self.expect(":")
        t = self.type_expr()
        return [Field(n, mutable, t) for n in names]

    def type_expr(self):
        # arrow types are right-associative; a leading multiplicity applies
        # to a unary type
        if self.peek().value in ("set", "one", "lone", "some") and \
                self.peek(1).kind == "id":
            mult = self.next().value
            return SMultSet(mult, self.expr())
        left = self.expr()
        if self.peek().value in MULTS and self.peek(1).value == "->":
            ml = self.next().value
            self.expect("->")
        elif self.at("->"):
            self.next()
            ml = "set"
        else:
            return left
        if self.peek().value in MULTS:
            mr = self.next().value
        else:
            mr = "set"
        right = self.type_expr()
        return SArrow(left, ml, mr, right)

    def enum_decl(self):
        self.expect("enum")
        name = self.ident()
        self.expect("{")
        members = [self.ident()]
        while self.at(","):
            self.next()
            members.append(self.ident())
        self.expect("}")
        return Enum(name, tuple(members))

    def params(self):
        self.expect("[")
        out = []
        while not self.at("]"):
            names = [self.ident()]
            while self.at(","):
                self.next()
                names.append(self.ident())
            self.expect(":")
            t = self.type_expr()
            out.extend((n, t) for n in names)
            if self.at(","):
                self.next()
        self.expect("]")
        return tuple(out)

    def pred_decl(self):
        self.expect("pred")
        name = self.ident()
        ps = self.params() if self.at("[") else ()
        body = self.block()
        return Pred(name, ps, body)

    def fun_decl(self):
        self.expect("fun")
        name = self.ident()
        ps = self.params() if self.at("[") else ()
        self.expect(":")
        rtype = self.type_expr()
        self.expect("{")
        body = self.expr()
        self.expect("}")
        return Fun(name, ps, rtype, body)

    def assert_decl(self):
        self.expect("assert")
        name = self.ident()
        return Assert(name, self.block())

    def fact_decl(self):
        self.expect("fact")
        name = self.ident() if self.peek().kind == "id" else None
        return Fact(name, self.block())

    def block(self):
        self.expect("{")
        out = None
        while not self.at("}"):
            f = self.formula()
            out = f if out is None else SAndF(out, f)
        self.expect("}")
        return out if out is not None else STrueF()

    def command(self):
        kind = self.next().value
        name = self.ident()
        body = self.block() if self.at("{") else None
        scopes = []
        if self.at("for"):
            self.next()
            scopes.append(self.scope())
            while self.at(",") or self.at("but"):
                self.next()
                scopes.append(self.scope())
        k = sem = backend = None
        while self.peek().kind == "id" and \
                self.peek().value in ("k", "sem", "backend"):
            opt = self.next().value
            if opt == "k":
                t = self.next()
                if t.kind != "num":
                    raise ParseError("expected a number after 'k'",
                                     t.line, t.col)
                k = int(t.value)
            elif opt == "sem":
                sem = self.ident()
            else:
                backend = self.ident()
        return Command(kind, name, body, tuple(scopes), k, sem, backend)

    def scope(self):
        t = self.next()
        if t.kind != "num":
            raise ParseError("expected a scope number", t.line, t.col)
        return (int(t.value), self.ident())

    # -- formulas ---------------------------------------------------------

    def formula(self):
        return self.iff_f()

    def iff_f(self):
        f = self.implies_f()
        while self.at("iff"):
            self.next()
            f = SIffF(f, self.implies_f())
        return f

    def implies_f(self):
        f = self.or_f()
        if self.at("implies"):
            self.next()
            return SImpliesF(f, self.implies_f())
        return f

    def or_f(self):
        f = self.and_f()
        while self.at("or"):
            self.next()
            f = SOrF(f, self.and_f())
        return f

    def and_f(self):
        f = self.binary_temp_f()
        while self.at("and"):
            self.next()
            f = SAndF(f, self.binary_temp_f())
        return f

    def binary_temp_f(self):
        f = self.unary_f()
        while self.peek().value in BINARY_TEMPS:
            op = self.next().value
            f = STempB(op, f, self.unary_f())
        return f

    def unary_f(self):
        t = self.peek()
        if t.value == "not":
            self.next()
            return SNot(self.unary_f())
        if t.value in UNARY_TEMPS:
            self.next()
            return STempU(t.value, self.unary_f())
        if t.value in ("all", "some", "no", "lone", "one") and t.kind == "id":
            return self.quant_or_card(t.value)
        return self.atom_f()

    def quant_or_card(self, word):
        mark = self.pos
        self.next()
        if word in ("all", "some") and self.peek().kind == "id":
            try:
                decls = self.quant_decls()
                self.expect("|")
                return SQuant(word, decls, self.formula())
            except ParseError:
                self.pos = mark + 1
        # cardinality form: `some expr`, `no expr`, ...
        return SCard(word, self.expr())

    def quant_decls(self):
        out = []
        while True:
            names = [self.ident()]
            while self.at(","):
                self.next()
                names.append(self.ident())
            self.expect(":")
            dom = self.expr()
            out.append((tuple(names), dom))
            if self.at(","):
                self.next()
                continue
            return tuple(out)

    def atom_f(self):
        if self.at("("):
            mark = self.pos
            self.next()
            try:
                f = self.formula()
                self.expect(")")
                return f
            except ParseError:
                self.pos = mark
        if self.peek().kind == "id" and self.peek(1).value == "[":
            mark = self.pos
            name = self.ident()
            self.next()
            args = [self.expr()]
            while self.at(","):
                self.next()
                args.append(self.expr())
            self.expect("]")
            return SCall(name, tuple(args))
        return self.compare_f()

    def compare_f(self):
        left = self.expr()
        t = self.peek()
        if t.value in ("=", "!=", "in", "!in"):
            self.next()
            return SCompare(t.value, left, self.expr())
        if t.value == "not" and self.peek(1).value == "in":
            self.next()
            self.next()
            return SCompare("!in", left, self.expr())
        self.fail("expected a comparison operator")

    # -- expressions ------------------------------------------------------

    def expr(self):
        return self.union_e()

    def union_e(self):
        e = self.inter_e()
        while self.at("+") or self.at("-"):
            op = self.next().value
            e = SBinary(op, e, self.inter_e())
        return e

    def inter_e(self):
        e = self.arrow_e()
        while self.at("&"):
            self.next()
            e = SBinary("&", e, self.arrow_e())
        return e

    def arrow_e(self):
        e = self.restrict_e()
        if self.peek().value in MULTS and self.peek(1).value == "->":
            ml = self.next().value
            self.expect("->")
            mr = self.next().value if self.peek().value in MULTS else "set"
            return SArrow(e, ml, mr, self.arrow_e())
        if self.at("->"):
            self.next()
            mr = self.next().value if self.peek().value in MULTS else "set"
            return SArrow(e, "set", mr, self.arrow_e())
        return e

    def restrict_e(self):
        e = self.join_e()
        while self.at("<:") or self.at(":>"):
            op = self.next().value
            e = SBinary(op, e, self.join_e())
        return e

    def join_e(self):
        e = self.prime_e()
        while self.at("."):
            self.next()
            e = SBinary(".", e, self.prime_e())
        return e

    def prime_e(self):
        e = self.unary_e()
        while self.at("'"):
            self.next()
            e = SPrimeE(e)
        return e

    def unary_e(self):
        t = self.peek()
        if t.value in ("~", "^", "*"):
            self.next()
            return SUnary(t.value, self.unary_e())
        return self.base_e()

    def base_e(self):
        t = self.next()
        if t.value == "(":
            e = self.expr()
            self.expect(")")
            return e
        if t.kind == "id":
            if t.value in ("univ", "none", "iden"):
                return SConst(t.value)
            if self.at("["):
                self.next()
                args = [self.expr()]
                while self.at(","):
                    self.next()
                    args.append(self.expr())
                self.expect("]")
                return SCall(t.value, tuple(args))
            return SName(t.value)
        raise ParseError(f"expected an expression, found {t.value!r}",
                         t.line, t.col)


def parse_spec(text):
    m = _Parser(text).model()
    _check_names(m)
    return m


def _check_names(m):
    declared = set()
    callables = {"max"}

    def declare(name):
        if name in declared or name in callables:
            raise ParseError(f"duplicate declaration {name}")
        declared.add(name)

    for p in m.paragraphs:
        if isinstance(p, Sig):
            for n in p.names:
                declare(n)
            for f in p.fields:
                declare(f.name)
        elif isinstance(p, Enum):
            declare(p.name)
            for member in p.members:
                declare(member)
        elif isinstance(p, (Pred, Fun)):
            if p.name in callables:
                raise ParseError(f"duplicate declaration {p.name}")
            callables.add(p.name)

    def expr(e, scope):
        if isinstance(e, SName):
            if e.name not in declared and e.name not in scope:
                raise ParseError(f"unknown identifier {e.name}")
        elif isinstance(e, SConst):
            pass
        elif isinstance(e, (SUnary, SPrimeE, SMultSet)):
            expr(e.expr, scope)
        elif isinstance(e, (SBinary, SArrow)):
            expr(e.left, scope)
            expr(e.right, scope)
        elif isinstance(e, SCall):
            if e.name not in callables:
                raise ParseError(f"unknown identifier {e.name}")
            for a in e.args:
                expr(a, scope)
        else:
            raise ParseError(f"unexpected expression {type(e).__name__}")

    def formula(f, scope):
        if isinstance(f, (STrueF,)):
            return
        if isinstance(f, SNot):
            formula(f.body, scope)
        elif isinstance(f, (SAndF, SOrF, SImpliesF, SIffF, STempB)):
            formula(f.left, scope)
            formula(f.right, scope)
        elif isinstance(f, STempU):
            formula(f.body, scope)
        elif isinstance(f, (SCompare,)):
            expr(f.left, scope)
            expr(f.right, scope)
        elif isinstance(f, SCard):
            expr(f.expr, scope)
        elif isinstance(f, SQuant):
            inner = set(scope)
            for names, dom in f.decls:
                expr(dom, inner)
                inner.update(names)
            formula(f.body, inner)
        elif isinstance(f, SCall):
            if f.name not in callables:
                raise ParseError(f"unknown identifier {f.name}")
            for a in f.args:
                expr(a, scope)
        else:
            raise ParseError(f"unexpected formula {type(f).__name__}")

    for p in m.paragraphs:
        if isinstance(p, Sig):
            if p.parent is not None and p.parent[1] not in declared:
                raise ParseError(f"unknown identifier {p.parent[1]}")
            for f in p.fields:
                expr(f.type, set())
        elif isinstance(p, (Pred, Fun)):
            scope = set()
            for n, t in p.params:
                expr(t, scope)
                scope.add(n)
            if isinstance(p, Fun):
                expr(p.rtype, scope)
                expr(p.body, scope)
            else:
                formula(p.body, scope)
        elif isinstance(p, (Assert, Fact)):
            formula(p.body, set())
        elif isinstance(p, Command):
            if p.body is not None:
                formula(p.body, set())
            for _, signame in p.scopes:
                if signame not in declared:
                    raise ParseError(f"unknown identifier {signame}")


# ---------------------------------------------------------------------------
# Printer


def print_spec(m):
    return "\n\n".join(_para(p) for p in m.paragraphs) + "\n"


def _para(p):
    if isinstance(p, Sig):
        head = ("one " if p.one else "") + ("trace " if p.trace else "")
        head += "sig " + ", ".join(p.names)
        if p.parent:
            head += f" {p.parent[0]} {p.parent[1]}"
        if not p.fields:
            return head + " {}"
        fields = ",\n  ".join(
            ("var " if f.mutable else "") + f"{f.name} : {_e(f.type)}"
            for f in p.fields
        )
        return head + " {\n  " + fields + " }"
    if isinstance(p, Enum):
        return f"enum {p.name} {{ " + ", ".join(p.members) + " }"
    if isinstance(p, Pred):
        return f"pred {p.name}{_params(p.params)} " + _block(p.body)
    if isinstance(p, Fun):
        ps = _params(p.params)
        return f"fun {p.name}{ps} : {_e(p.rtype)} {{\n  " + _e(p.body) + " }"
    if isinstance(p, Assert):
        return f"assert {p.name} " + _block(p.body)
    if isinstance(p, Fact):
        name = f" {p.name}" if p.name else ""
        return f"fact{name} " + _block(p.body)
    if isinstance(p, Command):
        out = f"{p.kind} {p.name}"
        if p.body is not None:
            out += " " + _block(p.body)
        if p.scopes:
            out += " for " + ", ".join(f"{n} {s}" for n, s in p.scopes)
        if p.k is not None:
            out += f" k {p.k}"
        if p.sem is not None:
            out += f" sem {p.sem}"
        if p.backend is not None:
            out += f" backend {p.backend}"
        return out
    raise TypeError(type(p))


def _params(ps):
    if not ps:
        return ""
    return "[" + ", ".join(f"{n} : {_e(t)}" for n, t in ps) + "]"


def _block(body):
    if isinstance(body, STrueF):
        return "{ }"
    return "{\n  " + _f(body) + " }"


def _f(f):
    if isinstance(f, SCompare):
        return f"{_e(f.left)} {f.op} {_e(f.right)}"
    if isinstance(f, SCard):
        return f"{f.mult} {_e(f.expr)}"
    if isinstance(f, SNot):
        return f"not ({_f(f.body)})"
    if isinstance(f, SAndF):
        return f"({_f(f.left)} and {_f(f.right)})"
    if isinstance(f, SOrF):
        return f"({_f(f.left)} or {_f(f.right)})"
    if isinstance(f, SImpliesF):
        return f"({_f(f.left)} implies {_f(f.right)})"
    if isinstance(f, SIffF):
        return f"({_f(f.left)} iff {_f(f.right)})"
    if isinstance(f, STempU):
        return f"{f.op} ({_f(f.body)})"
    if isinstance(f, STempB):
        return f"({_f(f.left)} {f.op} {_f(f.right)})"
    if isinstance(f, SQuant):
        ds = ", ".join(
            ", ".join(names) + " : " + _e(dom) for names, dom in f.decls
        )
        return f"{f.q} {ds} | ({_f(f.body)})"
    if isinstance(f, SCall):
        return f.name + "[" + ", ".join(_e(a) for a in f.args) + "]"
    raise TypeError(type(f))


def _e(e):
    if isinstance(e, SName):
        return e.name
    if isinstance(e, SConst):
        return e.kind
    if isinstance(e, SBinary):
        return f"({_e(e.left)} {e.op} {_e(e.right)})"
    if isinstance(e, SArrow):
        ml = "" if e.ml == "set" else e.ml + " "
        mr = "" if e.mr == "set" else e.mr + " "
        return f"({_e(e.left)} {ml}-> {mr}{_e(e.right)})"
    if isinstance(e, SUnary):
        return f"{e.op}({_e(e.expr)})"
    if isinstance(e, SPrimeE):
        return f"({_e(e.expr)})'"
    if isinstance(e, SMultSet):
        return f"{e.mult} {_e(e.expr)}"
    if isinstance(e, SCall):
        return e.name + "[" + ", ".join(_e(a) for a in e.args) + "]"
    raise TypeError(type(e))

"""Explicit-state backend.

Builds explicit transition systems from grounded machines via decision
diagrams, compresses them with single-trace formula absorption and
bisimulation quotients, optionally splits on static-variable valuations, and
decides the quantified formula by recursive bounded lasso enumeration with
exact loop-aware evaluation.

Conclusiveness: a SAT result is conclusive when every universally
quantified machine's trace set was exhaustively covered within the bound
(empty, acyclic, or deterministic systems whose runs close early); an UNSAT
result symmetrically requires the existential levels (including the implicit
outer search) to be exhausted. Everything else is reported inconclusive,
with the bounded outcome kept in the stats.
"""

from collections import defaultdict, deque
from dataclasses import dataclass, field

from . import ltl as M
from .boolexpr import VarIs, band, beval, bvars, has_primed, map_leaves
from .core.ast import HyrelError
from .ltl import EXISTS, FORALL, MachineLasso, eval_ltl
from .mvdd import DdManager, interleaved_order

DEFAULT_CEILING = 1 << 22


class ResourceError(HyrelError):
    """State count or diagram ceiling exceeded."""


@dataclass
class ExplicitSystem:
    """Reachable fragment of a machine: full variable assignments, BFS-order
    state numbering from lexicographically sorted initial states."""

    variables: tuple
    states: list  # dict name -> value
    initial: list  # state indices
    succs: list  # adjacency lists, sorted
    aps: tuple = ()
    labels: list = field(default_factory=list)

    @property
    def size(self):
        return len(self.states)


@dataclass
class Verdict:
    outcome: str  # "SAT" | "UNSAT" | "INCONCLUSIVE"
    conclusive: bool
    witness: dict  # trace var (None = outer) -> MachineLasso, or None
    stats: dict
    warnings: tuple = ()


# ---------------------------------------------------------------------------
# Explicit system construction


def build_explicit(m, reachable_only=True, ceiling=DEFAULT_CEILING):
    """Enumerate the machine's states and transitions; deterministic
    numbering (BFS from lexicographically sorted initial states)."""
    mgr = DdManager(interleaved_order(m.variables))
    invar = m.invar_expr()
    init_dd = mgr.from_bexpr(band(m.init_expr(), invar))
    invar_next = map_leaves(invar, lambda v: VarIs(v.name, v.value, True))
    trans_dd = mgr.from_bexpr(band(m.trans_expr(), invar_next))
    invar_dd = mgr.from_bexpr(invar)
    cur_idx = [i for i, (key, _) in enumerate(mgr.order) if not key[1]]
    nxt_idx = [i for i, (key, _) in enumerate(mgr.order) if key[1]]

    def sort_key(s):
        return tuple(v.values.index(s[v.name]) for v in m.variables)

    def assignments(u, idxs):
        out = [
            {name: val for (name, _), val in a.items()}
            for a in mgr.sat_assignments(u, idxs)
        ]
        out.sort(key=sort_key)
        return out

    states, index, succ_of = [], {}, {}

    def intern(s):
        k = sort_key(s)
        i = index.get(k)
        if i is None:
            i = len(states)
            if i >= ceiling:
                raise ResourceError(
                    f"state ceiling {ceiling} exceeded building {m.name}")
            index[k] = i
            states.append(s)
        return i

    def successors(s):
        u = trans_dd
        for v in m.variables:
            u = mgr.restrict(u, v.name, s[v.name], primed=False)
        return assignments(u, nxt_idx)

    initial = []
    if reachable_only:
        queue = deque()
        for s in assignments(init_dd, cur_idx):
            i = intern(s)
            initial.append(i)
            queue.append(i)
        seen = set(initial)
        while queue:
            i = queue.popleft()
            ids = []
            for t in successors(states[i]):
                j = intern(t)
                ids.append(j)
                if j not in seen:
                    seen.add(j)
                    queue.append(j)
            succ_of[i] = ids
    else:
        for s in assignments(invar_dd, cur_idx):
            intern(s)
        for s in assignments(init_dd, cur_idx):
            initial.append(index[sort_key(s)])
        for i, s in enumerate(states):
            succ_of[i] = sorted(index[sort_key(t)] for t in successors(s))
    succs = [succ_of.get(i, []) for i in range(len(states))]
    return ExplicitSystem(tuple(m.variables), states, initial, succs)


def compute_labels(s, aps):
    s.aps = tuple(aps)
    s.labels = [tuple(beval(a, st) for a in s.aps) for st in s.states]


# ---------------------------------------------------------------------------
# Bisimulation quotient


def bisim_reduce(s, aps=None):
    """Coarsest partition stable under transitions and AP labels; returns
    the quotient (representative = least member) and the state map."""
    if aps is not None:
        compute_labels(s, aps)
    if not s.labels and s.states:
        compute_labels(s, s.aps)
    n = len(s.states)
    if n == 0:
        return s, []
    block = {}
    ids = {}
    for i in range(n):
        block[i] = ids.setdefault(s.labels[i], len(ids))
    while True:
        sigs = {}
        new_block = {}
        for i in range(n):
            sig = (block[i], frozenset(block[j] for j in s.succs[i]))
            new_block[i] = sigs.setdefault(sig, len(sigs))
        if len(sigs) == len(ids):
            break
        block, ids = new_block, sigs
    # deterministic numbering: blocks ordered by least member
    members = defaultdict(list)
    for i in range(n):
        members[block[i]].append(i)
    order = sorted(members, key=lambda b: members[b][0])
    renum = {b: k for k, b in enumerate(order)}
    statemap = [renum[block[i]] for i in range(n)]
    reps = [members[b][0] for b in order]
    red = ExplicitSystem(
        s.variables,
        [s.states[r] for r in reps],
        sorted({statemap[i] for i in s.initial}),
        [sorted({statemap[j] for j in s.succs[r]}) for r in reps],
        s.aps,
        [s.labels[r] for r in reps],
    )
    return red, statemap


def lift_lasso(seq, loop, orig, statemap):
    """Expand a lasso over quotient states into a lasso over original
    states visiting the same block sequence (loops may unroll)."""
    members = defaultdict(list)
    for i, b in enumerate(statemap):
        members[b].append(i)
    path = [min(i for i in orig.initial if statemap[i] == seq[0])]
    for b in seq[1:]:
        path.append(min(j for j in orig.succs[path[-1]]
                        if statemap[j] == b))
    cycle = seq[loop:]
    seen = {}
    for idx in range(loop, len(path)):
        seen[(path[idx], (idx - loop) % len(cycle))] = idx
    phase = (len(path) - 1 - loop) % len(cycle)
    while True:
        phase = (phase + 1) % len(cycle)
        nxt = min(j for j in orig.succs[path[-1]]
                  if statemap[j] == cycle[phase])
        key = (nxt, phase)
        if key in seen:
            return [orig.states[i] for i in path], seen[key]
        seen[key] = len(path)
        path.append(nxt)


# ---------------------------------------------------------------------------
# Formula absorption


def _tags(f):
    if isinstance(f, M.LAtom):
        return {f.trace}
    out = set()
    for c in M.children(f):
        out |= _tags(c)
    return out


def _expand_neg_conj(d):
    """Rewrite a disjunct ¬(a ∧ b) as the disjuncts ¬a, ¬b."""
    if isinstance(d, M.LNot) and isinstance(d.body, M.LAnd):
        return (_expand_neg_conj(M.lnot(d.body.left))
                + _expand_neg_conj(M.lnot(d.body.right)))
    return [d]


def _absorb_into(m, f):
    from . import rl2ltl

    init, invar, trans, spec = rl2ltl.classify_conjuncts(f)
    residual = M.land(m.residual if m.residual is not None else M.LTrue(),
                      *spec)
    if isinstance(residual, M.LTrue):
        residual = None
    return m.replaced(
        init=m.init + tuple(init), invar=m.invar + tuple(invar),
        trans=m.trans + tuple(trans), residual=residual)


def absorb_formula(spec, machines):
    """Move single-trace parts of the body into machine acceptance,
    polarity-correctly: positive top-level conjuncts of existentially
    quantified traces (and the outer search), and negated top-level
    disjuncts of universally quantified traces (assumptions). Returns the
    rewritten spec, updated machines, and the number of parts moved."""
    pol = {None: EXISTS}
    for p, v, _ in spec.prefix:
        pol[v] = p
    machines = dict(machines)
    body = spec.body
    moved = 0
    changed = True
    while changed:
        changed = False
        new_conjs = []
        for c in M.conjuncts(body):
            ctags = _tags(c)
            if len(ctags) == 1:
                (tag,) = ctags
                if pol.get(tag) == EXISTS and tag in machines:
                    machines[tag] = _absorb_into(machines[tag], c)
                    moved += 1
                    changed = True
                    continue
            parts = [
                d for x in M.disjuncts(c) for d in _expand_neg_conj(x)
            ]
            keep = []
            for d in parts:
                dtags = _tags(d)
                if len(dtags) == 1:
                    (tag,) = dtags
                    if pol.get(tag) == FORALL and tag in machines:
                        machines[tag] = _absorb_into(machines[tag],
                                                     M.lnot(d))
                        moved += 1
                        changed = True
                        continue
                keep.append(d)
            new_conjs.append(M.lor(*keep))
        body = M.land(*new_conjs)
    return M.HyperLtlSpec(spec.prefix, body), machines, moved


# ---------------------------------------------------------------------------
# Static-valuation splitting


def split_init(m, ceiling=DEFAULT_CEILING):
    """One machine per initial valuation of the frozen variables; the union
    of the splits' instance sets equals the original's."""
    frozen = [v for v in m.variables if v.frozen]
    if not frozen:
        return [m]
    mgr = DdManager(interleaved_order(m.variables, primed=False))
    init_dd = mgr.from_bexpr(band(m.init_expr(), m.invar_expr()))
    idxs = [mgr.index[(v.name, False)] for v in frozen]
    vals = set()
    for a in mgr.sat_assignments(init_dd):
        vals.add(tuple(a[(v.name, False)] for v in frozen))
        if len(vals) > ceiling:
            raise ResourceError("too many static valuations")
    out = []
    for tup in sorted(vals, key=lambda t: [v.values.index(x)
                                           for v, x in zip(frozen, t)]):
        pins = tuple(VarIs(v.name, x) for v, x in zip(frozen, tup))
        out.append(m.replaced(init=m.init + pins,
                              name=f"{m.name}#{len(out)}"))
    return out


# ---------------------------------------------------------------------------
# Lasso enumeration and coverage


def enumerate_system_lassos(s, bound):
    """All lassos (walks with a closing edge) of length <= bound, shorter
    first, BFS state order; yields (state-index sequence, loop index)."""
    edge = [set(sc) for sc in s.succs]
    for length in range(1, bound + 1):
        def walk(seq):
            if len(seq) == length:
                for j in range(length):
                    if seq[j] in edge[seq[-1]]:
                        yield list(seq), j
                return
            for t in s.succs[seq[-1]]:
                yield from walk(seq + [t])
        for i in s.initial:
            yield from walk([i])


def lasso_coverage(s, bound):
    """True when lassos of length <= bound represent every infinite path:
    the system is empty/acyclic, or deterministic with all runs closing
    within the bound."""
    if not s.initial:
        return True
    if all(len(sc) <= 1 for sc in s.succs):
        for i in s.initial:
            seen = set()
            cur, steps = i, 0
            while cur is not None and cur not in seen:
                seen.add(cur)
                cur = s.succs[cur][0] if s.succs[cur] else None
                steps += 1
            if cur is not None and steps > bound:
                return False
        return True
    return _acyclic(s)


def _acyclic(s):
    color = {}

    def visit(i):
        color[i] = 1
        for j in s.succs[i]:
            c = color.get(j)
            if c == 1:
                return False
            if c is None and not visit(j):
                return False
        color[i] = 2
        return True

    return all(visit(i) for i in s.initial if i not in color)


# ---------------------------------------------------------------------------
# AP selection


def _collect_atoms(f, out):
    if isinstance(f, M.LAtom):
        out.append(f)
    for c in M.children(f):
        _collect_atoms(c, out)


def choose_aps(spec, machine, tag, heuristic="atoms"):
    """Default heuristic: the body's maximal single-trace atoms; variables
    referenced under primes contribute full-value indicator APs (so labels
    still determine next-state atom values after reduction)."""
    atoms = []
    _collect_atoms(spec.body, atoms)
    if machine.residual is not None:
        _collect_atoms(machine.residual, atoms)
    var_by_name = {v.name: v for v in machine.variables}

    def indicators(names):
        out = []
        for name in names:
            v = var_by_name[name]
            out.extend(VarIs(v.name, val) for val in v.values)
        return out

    aps = []
    if heuristic == "vars":
        aps = indicators([v.name for v in machine.variables])
    else:
        for a in atoms:
            if a.trace != tag:
                continue
            if has_primed(a.expr):
                aps.extend(indicators(sorted(
                    {n for n, _ in bvars(a.expr)})))
            else:
                aps.append(a.expr)
    seen, uniq = set(), []
    for a in aps:
        if a not in seen:
            seen.add(a)
            uniq.append(a)
    return tuple(uniq)


# ---------------------------------------------------------------------------
# The check


def check(lp, bound, *, absorb=True, reduce=True, split=False,
          ceiling=DEFAULT_CEILING, ap_heuristic="atoms"):
    """Decide the lowered problem's spec by recursive lasso enumeration,
    treating the outer machine as an implicit outermost existential."""
    stats = {"sizes": {}, "lassos": 0, "absorbed": 0}
    if lp.vacuous:
        return Verdict("UNSAT", True, None, {"vacuous": True}, lp.warnings)
    spec = lp.spec
    machines = {None: lp.outer}
    for m in lp.machines[1:]:
        machines[m.trace_var] = m
    orig = (spec, machines)
    if absorb:
        spec, machines, moved = absorb_formula(spec, machines)
        stats["absorbed"] = moved

    def run(spec, machines, require_nonempty):
        outer_splits = (split_init(machines[None], ceiling) if split
                        else [machines[None]])
        out = []
        for om in outer_splits:
            ms = dict(machines)
            ms[None] = om
            out.append(_check_once(spec, ms, bound, reduce, ceiling,
                                   ap_heuristic, stats,
                                   require_nonempty=require_nonempty))
        return out

    try:
        results = run(spec, machines, stats["absorbed"] > 0)
    except _EmptyDomain:
        # Absorption hoisted body parts across a quantifier whose
        # admissible lasso set is empty within the bound; that hoist is
        # only an equivalence over nonempty domains, so re-run with the
        # original body (the recursion handles empty levels natively).
        stats["absorbed"] = 0
        results = run(orig[0], orig[1], False)
    # existential combination across splits
    verdict = None
    for v in results:
        if v.outcome == "SAT" or (v.outcome == "INCONCLUSIVE"
                                  and v.stats.get("bounded") == "SAT"):
            verdict = v
            break
    if verdict is None:
        conclusive = all(v.conclusive for v in results)
        if not conclusive:
            stats["bounded"] = "UNSAT"
        verdict = Verdict("UNSAT" if conclusive else "INCONCLUSIVE",
                          conclusive, None, stats, lp.warnings)
    else:
        verdict = Verdict(verdict.outcome, verdict.conclusive,
                          verdict.witness, stats,
                          lp.warnings + verdict.warnings)
    return verdict


class _EmptyDomain(Exception):
    """A quantifier level has no admissible lasso within the bound."""


def _check_once(spec, machines, bound, reduce, ceiling, ap_heuristic, stats,
                require_nonempty=False):
    order = [(EXISTS, None)] + [(pol, var) for pol, var, _ in spec.prefix]
    systems = {}
    for tag, m in machines.items():
        sys = build_explicit(m, ceiling=ceiling)
        aps = choose_aps(spec, m, tag, ap_heuristic)
        compute_labels(sys, aps)
        orig, smap = sys, list(range(sys.size))
        if reduce:
            sys, smap = bisim_reduce(sys)
        stats["sizes"][tag if tag is not None else "outer"] = (
            orig.size, sys.size)
        systems[tag] = (sys, orig, smap, m)

    visited = set()
    body = spec.body

    def residual_ok(m, tag, lasso):
        if m.residual is None or isinstance(m.residual, M.LTrue):
            return True
        return eval_ltl(m.residual, {tag: lasso})

    if require_nonempty:
        for _, tag in order:
            sys, _, _, m = systems[tag]
            if not any(
                residual_ok(m, tag,
                            MachineLasso([sys.states[j] for j in seq], loop))
                for seq, loop in enumerate_system_lassos(sys, bound)
            ):
                raise _EmptyDomain(tag)

    def level(i, assignment, idx_assignment):
        if i == len(order):
            return eval_ltl(body, assignment), dict(idx_assignment)
        pol, tag = order[i]
        visited.add(tag)
        sys, _, _, m = systems[tag]
        for seq, loop in enumerate_system_lassos(sys, bound):
            stats["lassos"] += 1
            lasso = MachineLasso([sys.states[j] for j in seq], loop)
            if not residual_ok(m, tag, lasso):
                continue
            r, chosen = level(i + 1, {**assignment, tag: lasso},
                              {**idx_assignment, tag: (seq, loop)})
            if pol == EXISTS and r:
                return True, chosen
            if pol == FORALL and not r:
                return False, chosen
        return (pol == FORALL), None

    result, chosen = level(0, {}, {})
    dangerous = FORALL if result else EXISTS
    conclusive = all(
        lasso_coverage(systems[tag][0], bound)
        for pol, tag in order
        if pol == dangerous and tag in visited
    )
    witness = None
    if chosen is not None:
        witness = {}
        for tag, (seq, loop) in chosen.items():
            sys, orig, smap, m = systems[tag]
            states, loop2 = lift_lasso(seq, loop, orig, smap)
            witness[tag] = MachineLasso(states, loop2)
    outcome = "SAT" if result else "UNSAT"
    if not conclusive:
        stats["bounded"] = outcome
        outcome = "INCONCLUSIVE"
    return Verdict(outcome, conclusive, witness, stats)

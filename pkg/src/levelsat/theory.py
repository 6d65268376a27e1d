"""Theory plugins: axioms plus a one-step extension oracle.

A plugin owns a relational signature, the universal axioms of its theory,
and a list of AE axioms (forall x-bar exists y-bar, quantifier-free matrix).
Its oracle answers: given a structure M satisfying the universal axioms and
a quantifier-free constraint phi(x-bar, y-bar) with x-bar bound in M, is
there an extension of M, still satisfying the universal axioms and embeddable
in a model of the theory, that realizes phi? If yes it returns a minimal
witness extension; if no, that answer is final for every later stage as well,
because growing M only adds constraints.

All four bundled theories have quantifier elimination and free-ish
amalgamation, so realizability reduces to a finite pattern search over which
new points to add and how they relate to the old ones. Minimality: fewest new
elements first, then a fixed lexicographic tie-break (old ids ascending before
fresh slots, fresh attributes in canonical order, edge valuations
false-before-true). Two calls with equal arguments return equal results.
"""

from __future__ import annotations

import abc
import itertools
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

from .evaluator import evaluate
from .formula import (
    And,
    Eq,
    Formula,
    LevelOrdinal,
    Not,
    Or,
    RelAtom,
    Signature,
    conjoin,
    conjuncts,
    free_vars,
    is_quantifier_free,
    parse,
    rename_vars,
    split_vars,
)
from .structures import ExtensionDelta, FinStructure


class OracleError(ValueError):
    """Misuse of the oracle interface: bad formula shape, dangling ids."""


@dataclass(frozen=True)
class Axiom:
    name: str
    formula: Formula
    x_vars: tuple[str, ...]
    y_vars: tuple[str, ...]


@dataclass(frozen=True)
class AxiomViolation:
    axiom: str
    elements: tuple[int, ...]


@dataclass(frozen=True)
class WitnessExtension:
    """delta: what to add to M. witness: ids for the y variables, aligned
    with the y_vars order; ids of new elements refer into the delta."""

    delta: ExtensionDelta
    witness: tuple[int, ...]


def _axiom(name: str, text: str, sig: Signature) -> Axiom:
    f = parse(text, sig)
    xs, ys = split_vars(f)
    return Axiom(name, f, xs, ys)


def _eval3(f: Formula, env: dict[str, int], atom_fn) -> Optional[bool]:
    """Three-valued evaluation over resolved terms. atom_fn may return None
    for atoms whose truth is not yet pinned down; None propagates Kleene-style."""
    if isinstance(f, RelAtom):
        return atom_fn(f.rel, tuple(env[a] for a in f.args))
    if isinstance(f, Eq):
        return env[f.left] == env[f.right]
    if isinstance(f, Not):
        v = _eval3(f.body, env, atom_fn)
        return None if v is None else not v
    if isinstance(f, And):
        l = _eval3(f.left, env, atom_fn)
        if l is False:
            return False
        r = _eval3(f.right, env, atom_fn)
        if r is False:
            return False
        if l is True and r is True:
            return True
        return None
    if isinstance(f, Or):
        l = _eval3(f.left, env, atom_fn)
        if l is True:
            return True
        r = _eval3(f.right, env, atom_fn)
        if r is True:
            return True
        if l is False and r is False:
            return False
        return None
    raise OracleError(f"oracle formulas must be quantifier-free: {f!r}")


class TheoryPlugin(abc.ABC):
    """Shared oracle machinery; concrete theories fill in the two hooks."""

    name: str = ""
    signature: Signature = Signature(())
    universal_axioms: tuple[Axiom, ...] = ()
    ae_axioms: tuple[Axiom, ...] = ()

    # -- axioms --------------------------------------------------------------

    @property
    def witness_bound(self) -> int:
        return max((len(ax.y_vars) for ax in self.ae_axioms), default=0)

    def seeds(self) -> tuple[tuple[Formula, tuple[str, ...], tuple[str, ...]], ...]:
        return tuple((ax.formula, ax.x_vars, ax.y_vars) for ax in self.ae_axioms)

    def validate_t_forall(self, M: FinStructure) -> list[AxiomViolation]:
        """All violations of the universal axioms in M; empty means M is a
        legal partial model."""
        out = []
        for ax in self.universal_axioms:
            for tup in itertools.product(M.universe, repeat=len(ax.x_vars)):
                env = dict(zip(ax.x_vars, tup))
                if not evaluate(M, ax.formula, env):
                    out.append(AxiomViolation(ax.name, tup))
        return out

    # -- oracle entry points ---------------------------------------------------

    def extends_with_witness(
        self,
        M: FinStructure,
        phi: Formula,
        a_tuple: tuple[int, ...],
        level_for_new: LevelOrdinal,
        *,
        x_vars: Optional[tuple[str, ...]] = None,
        y_vars: Optional[tuple[str, ...]] = None,
        allowed_old: Optional[Sequence[int]] = None,
        max_new: Optional[int] = None,
    ) -> Optional[WitnessExtension]:
        """Minimal extension of M realizing phi(a_tuple, y-bar), or None if
        no extension inside the theory realizes it (final: stays None for
        every extension of M).

        Old elements used as witness components are drawn from allowed_old
        when given (default: the whole universe); new elements enter at
        level_for_new. A None result never depends on allowed_old: if phi is
        realizable at all, it is realizable with all old components replaced
        by fresh ones, so the restriction only shapes which witness comes
        back, not whether one exists.
        """
        if x_vars is None or y_vars is None:
            xs, ys = split_vars(phi)
            x_vars = xs if x_vars is None else x_vars
            y_vars = ys if y_vars is None else y_vars
        if not is_quantifier_free(phi):
            raise OracleError("oracle constraints must be quantifier-free")
        if len(x_vars) != len(a_tuple):
            raise OracleError(f"need {len(x_vars)} parameters, got {len(a_tuple)}")
        uni = set(M.universe)
        for e in a_tuple:
            if e not in uni:
                raise OracleError(f"parameter {e} not in the universe")
        leftover = free_vars(phi) - set(x_vars) - set(y_vars)
        if leftover:
            raise OracleError(f"unsplit variables {sorted(leftover)}")
        if allowed_old is None:
            pool: tuple[int, ...] = M.universe
        else:
            pool = tuple(sorted(set(allowed_old)))
            for e in pool:
                if e not in uni:
                    raise OracleError(f"allowed_old id {e} not in the universe")
        kmax = len(y_vars) if max_new is None else min(max_new, len(y_vars))
        env0 = dict(zip(x_vars, a_tuple))
        hit = self._search(M, phi, env0, tuple(y_vars), pool, kmax)
        if hit is None:
            return None
        facts, env = hit
        base = M.max_id + 1
        def resolve(t: int) -> int:
            return t if t >= 0 else base + (-t - 1)
        k = -min((t for t in env.values() if t < 0), default=0)
        delta = ExtensionDelta(
            tuple((base + j, level_for_new) for j in range(k)),
            tuple((rel, tuple(resolve(t) for t in terms)) for rel, terms in facts),
        )
        return WitnessExtension(delta, tuple(resolve(env[y]) for y in y_vars))

    def jointly_realizable(
        self,
        M: FinStructure,
        x_vars: tuple[str, ...],
        constraints: Sequence[tuple[Formula, dict[str, int]]],
    ) -> bool:
        """Whether one assignment of x_vars (into M or a one-step extension
        inside the theory) satisfies every constraint at once. Constraint
        parameter variables are private per constraint; x_vars are shared."""
        uni = set(M.universe)
        parts: list[Formula] = []
        env: dict[str, int] = {}
        for i, (phi, params) in enumerate(constraints):
            if not is_quantifier_free(phi):
                raise OracleError("constraints must be quantifier-free")
            others = free_vars(phi) - set(x_vars)
            mapping = {v: f"c{i}_{v}" for v in sorted(others)}
            for v, eid in sorted(params.items()):
                if v in x_vars:
                    raise OracleError(f"parameter {v!r} collides with a shared variable")
                if v not in others:
                    raise OracleError(f"parameter {v!r} is not free in constraint {i}")
                if eid not in uni:
                    raise OracleError(f"parameter id {eid} not in the universe")
                env[mapping[v]] = eid
            missing = {mapping[v] for v in others} - set(env)
            if missing:
                raise OracleError(f"unbound parameters in constraint {i}: {sorted(missing)}")
            parts.append(rename_vars(phi, mapping))
        if not parts:
            return True
        big = conjoin(parts)
        return self._search(M, big, env, tuple(x_vars), M.universe, len(x_vars)) is not None

    # -- the pattern search ------------------------------------------------------

    def _search(
        self,
        M: FinStructure,
        phi: Formula,
        env0: dict[str, int],
        y_vars: tuple[str, ...],
        pool: tuple[int, ...],
        kmax: int,
    ) -> Optional[tuple[list[tuple[str, tuple[int, ...]]], dict[str, int]]]:
        """Backtracking over slot assignments. Fresh slots are negative
        markers -1, -2, ... introduced in first-use order; iteration k admits
        exactly k distinct markers, so fewer-new-element witnesses win.
        Returns (new facts over terms, full term environment) or None."""
        parts = conjuncts(phi)
        fvs = [free_vars(p) for p in parts]
        yset = set(y_vars)

        def slot_atom(rel: str, terms: tuple[int, ...]) -> Optional[bool]:
            return self._slot_atom(M, rel, terms)

        # conjuncts not mentioning any witness variable are fixed by env0
        for p, fv in zip(parts, fvs):
            if not (fv & yset):
                if _eval3(p, env0, slot_atom) is False:
                    return None

        for k in range(kmax + 1):
            env = dict(env0)

            def rec(i: int, used: int) -> Optional[tuple[list, dict[str, int]]]:
                if k - used > len(y_vars) - i:
                    return None  # cannot introduce the remaining markers
                if i == len(y_vars):
                    if used < k:
                        return None  # explored already at a smaller k
                    facts = self._complete(M, parts, env)
                    if facts is None:
                        return None
                    return facts, dict(env)
                var = y_vars[i]
                candidates = list(pool) + [-(j + 1) for j in range(used)]
                if used < k:
                    candidates.append(-(used + 1))
                for t in candidates:
                    env[var] = t
                    ok = True
                    for p, fv in zip(parts, fvs):
                        if var in fv and fv <= env.keys():
                            if _eval3(p, env, slot_atom) is False:
                                ok = False
                                break
                    if ok:
                        hit = rec(i + 1, used + (1 if t == -(used + 1) else 0))
                        if hit is not None:
                            return hit
                env.pop(var, None)
                return None

            hit = rec(0, 0)
            if hit is not None:
                return hit
        return None

    # -- hooks -------------------------------------------------------------------

    @abc.abstractmethod
    def _slot_atom(self, M: FinStructure, rel: str, terms: tuple[int, ...]) -> Optional[bool]:
        """Truth of a relation atom over terms (old ids >= 0, fresh markers
        < 0) insofar as it is already forced; None if a later choice decides."""

    @abc.abstractmethod
    def _complete(
        self, M: FinStructure, parts: Sequence[Formula], env: dict[str, int]
    ) -> Optional[list[tuple[str, tuple[int, ...]]]]:
        """Given a full slot assignment, choose the remaining relational
        structure on fresh markers, or report impossibility. Returns the new
        facts (over terms) needed, closed under the universal axioms."""


# ---------------------------------------------------------------------------
# the pure-equality theory


class InfiniteSetTheory(TheoryPlugin):
    """Infinite sets with no structure. Every equality pattern with enough
    fresh points is realizable."""

    name = "infinite_set"
    signature = Signature(())

    def __init__(self) -> None:
        sig = self.signature
        self.universal_axioms = ()
        self.ae_axioms = (
            _axiom("another", "!(y0 = x0)", sig),
            _axiom("third", "!(y0 = x0) & !(y0 = x1)", sig),
        )

    def _slot_atom(self, M, rel, terms):
        raise OracleError(f"no relation {rel!r} in the empty signature")

    def _complete(self, M, parts, env):
        for p in parts:
            if _eval3(p, env, self._no_atoms) is not True:
                return None
        return []

    @staticmethod
    def _no_atoms(rel, terms):
        raise OracleError(f"no relation {rel!r} in the empty signature")


# ---------------------------------------------------------------------------
# graphs


class _GraphTheory(TheoryPlugin):
    """Shared oracle for symmetric irreflexive graph-like theories. Fresh
    edges are chosen per unordered pair; _edges_ok vetoes forbidden
    configurations (triangle-freeness for the Henson theory)."""

    rel = "R"

    def _slot_atom(self, M, rel, terms):
        a, b = terms
        if a == b:
            return False  # irreflexive, and distinct fresh markers differ
        if a >= 0 and b >= 0:
            return M.has_fact(rel, (a, b))
        return None

    def _complete(self, M, parts, env):
        pairs: set[tuple[int, int]] = set()
        for p in parts:
            for atom in _rel_atoms(p):
                terms = tuple(env[v] for v in atom.args)
                a, b = terms
                if a != b and (a < 0 or b < 0):
                    pairs.add((min(a, b), max(a, b)))
        order = sorted(pairs)
        for choice in itertools.product((False, True), repeat=len(order)):
            val = dict(zip(order, choice))

            def atom_fn(rel, terms):
                a, b = terms
                if a == b:
                    return False
                if a >= 0 and b >= 0:
                    return M.has_fact(rel, (a, b))
                return val[(min(a, b), max(a, b))]

            if not self._edges_ok(M, env, val):
                continue
            if all(_eval3(p, env, atom_fn) is True for p in parts):
                facts = []
                for (a, b), v in sorted(val.items()):
                    if v:
                        facts.append((self.rel, (a, b)))
                        facts.append((self.rel, (b, a)))
                return facts
        return None

    def _edges_ok(self, M, env, val) -> bool:
        return True


def _rel_atoms(f: Formula) -> Iterable[RelAtom]:
    if isinstance(f, RelAtom):
        yield f
    elif isinstance(f, Not):
        yield from _rel_atoms(f.body)
    elif isinstance(f, (And, Or)):
        yield from _rel_atoms(f.left)
        yield from _rel_atoms(f.right)


class RandomGraphTheory(_GraphTheory):
    """The random graph: any fresh adjacency pattern at all is fine."""

    name = "random_graph"
    signature = Signature((("R", 2),))

    def __init__(self) -> None:
        sig = self.signature
        self.universal_axioms = (
            _axiom("irreflexive", "!R(x0, x0)", sig),
            _axiom("symmetric", "!R(x0, x1) | R(x1, x0)", sig),
        )
        self.ae_axioms = (
            _axiom("neighbor", "R(x0, y0)", sig),
            _axiom("non_neighbor", "!R(x0, y0) & !(y0 = x0)", sig),
            _axiom("common_neighbor", "R(x0, y0) & R(x1, y0)", sig),
        )


class HensonTriangleFreeTheory(_GraphTheory):
    """The generic triangle-free graph. Same pattern search as the random
    graph, but candidate fresh edges must not close a triangle."""

    name = "henson_triangle_free"
    signature = Signature((("R", 2),))

    def __init__(self) -> None:
        sig = self.signature
        self.universal_axioms = (
            _axiom("irreflexive", "!R(x0, x0)", sig),
            _axiom("symmetric", "!R(x0, x1) | R(x1, x0)", sig),
            _axiom("triangle_free", "!R(x0, x1) | !R(x1, x2) | !R(x0, x2)", sig),
        )
        self.ae_axioms = (
            _axiom("neighbor", "R(x0, y0)", sig),
            _axiom("non_neighbor", "!R(x0, y0) & !(y0 = x0)", sig),
            _axiom("spread_pair", "R(x0, x1) | (R(y0, x0) & R(y0, x1))", sig),
        )

    def _edges_ok(self, M, env, val) -> bool:
        def edge(a: int, b: int) -> bool:
            if a == b:
                return False
            if a >= 0 and b >= 0:
                return M.has_fact("R", (a, b))
            return val.get((min(a, b), max(a, b)), False)

        true_pairs = [p for p, v in val.items() if v]
        if not true_pairs:
            return True
        markers = sorted({t for t in env.values() if t < 0}, key=abs)
        vertices = list(M.universe) + markers
        for a, b in true_pairs:
            for w in vertices:
                if w != a and w != b and edge(a, w) and edge(b, w):
                    return False
        return True


# ---------------------------------------------------------------------------
# one equivalence relation with many classes


class GenericEquivalenceTheory(TheoryPlugin):
    """An equivalence relation with unboundedly many unbounded classes.
    Fresh points choose a class: one of the classes already mentioned by the
    constraint, or a brand-new class. Classes of M that the constraint never
    mentions behave exactly like a new class with respect to its atoms, so
    these options are exhaustive."""

    name = "generic_equivalence"
    signature = Signature((("E", 2),))

    def __init__(self) -> None:
        sig = self.signature
        self.universal_axioms = (
            _axiom("reflexive", "E(x0, x0)", sig),
            _axiom("symmetric", "!E(x0, x1) | E(x1, x0)", sig),
            _axiom("transitive", "!E(x0, x1) | !E(x1, x2) | E(x0, x2)", sig),
        )
        spread = []
        ys = [f"y{i}" for i in range(8)]
        for y in ys:
            spread.append(Not(RelAtom("E", ("x0", y))))
        for i in range(8):
            for j in range(i + 1, 8):
                spread.append(Not(RelAtom("E", (ys[i], ys[j]))))
        self.ae_axioms = (
            _axiom("classmate", "E(x0, y0) & !(y0 = x0)", sig),
            Axiom("class_spread8", conjoin(spread), ("x0",), tuple(ys)),
            _axiom("classmate_avoiding", "E(x0, y0) & !(y0 = x0) & !(y0 = x1)", sig),
        )

    def _class_label(self, M: FinStructure, e: int) -> tuple[str, int]:
        members = [u for u in M.universe if M.has_fact("E", (u, e))]
        rep = min(members) if members else e
        return ("old", rep)

    def _slot_atom(self, M, rel, terms):
        a, b = terms
        if a == b:
            return True  # reflexive
        if a >= 0 and b >= 0:
            return M.has_fact(rel, (a, b))
        return None

    def _complete(self, M, parts, env):
        markers = sorted({t for t in env.values() if t < 0}, key=abs)
        if not markers:
            def atom_fn(rel, terms):
                v = self._slot_atom(M, rel, terms)
                if v is None:
                    raise OracleError("unresolved atom with no fresh markers")
                return v

            if all(_eval3(p, env, atom_fn) is True for p in parts):
                return []
            return None

        mentioned = sorted({t for t in env.values() if t >= 0})
        old_labels = sorted({self._class_label(M, e) for e in mentioned})
        attrs: dict[int, tuple[str, int]] = {}

        def atom_fn(rel, terms):
            a, b = terms
            if a == b:
                return True
            la = self._class_label(M, a) if a >= 0 else attrs.get(a)
            lb = self._class_label(M, b) if b >= 0 else attrs.get(b)
            if la is None or lb is None:
                return None
            return la == lb

        def rec(j: int, new_used: int):
            if j == len(markers):
                if all(_eval3(p, env, atom_fn) is True for p in parts):
                    return self._equiv_facts(M, markers, attrs)
                return None
            options: list[tuple[str, int]] = list(old_labels)
            options += [("new", t) for t in range(new_used + 1)]
            for label in options:
                attrs[markers[j]] = label
                bad = any(_eval3(p, env, atom_fn) is False for p in parts)
                if not bad:
                    hit = rec(j + 1, max(new_used, label[1] + 1) if label[0] == "new" else new_used)
                    if hit is not None:
                        return hit
            del attrs[markers[j]]
            return None

        return rec(0, 0)

    def _equiv_facts(self, M, markers, attrs):
        facts = []
        for idx, m in enumerate(markers):
            label = attrs[m]
            facts.append(("E", (m, m)))
            if label[0] == "old":
                rep = label[1]
                for u in M.universe:
                    if M.has_fact("E", (u, rep)):
                        facts.append(("E", (m, u)))
                        facts.append(("E", (u, m)))
            for m2 in markers[:idx]:
                if attrs[m2] == label:
                    facts.append(("E", (m, m2)))
                    facts.append(("E", (m2, m)))
        return facts


PLUGINS: dict[str, TheoryPlugin] = {
    p.name: p
    for p in (
        InfiniteSetTheory(),
        RandomGraphTheory(),
        GenericEquivalenceTheory(),
        HensonTriangleFreeTheory(),
    )
}


def get_plugin(name: str) -> TheoryPlugin:
    try:
        return PLUGINS[name]
    except KeyError:
        raise ValueError(f"unknown theory {name!r}; known: {', '.join(sorted(PLUGINS))}") from None

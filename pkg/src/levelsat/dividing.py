"""Dividing certificates, the dimension-drop survey, and the covering bound.

A formula phi(x-bar; y-bar) divides along the type of b-bar when some family
of instances phi(x-bar; c-bar_i), all c-bar_i of the same quantifier-free
type as b-bar over the fixed parameters, is k-inconsistent: no k of them are
jointly realizable. Joint unrealizability is decided by the theory oracle,
and since it depends only on the quantifier-free type of the parameters
involved, a certificate obtained at one stage stays valid in every later or
extended structure.

certify_dividing is sound but not complete: a None return means this search
did not find a certificate, not that none exists.
"""

from __future__ import annotations

import itertools
import math
import random
from dataclasses import dataclass
from typing import Optional

from .construction import InternalFaultError, StageChain
from .dimension import DIVERGES_NEG, DimCompareResult, dim_compare, trend
from .evaluator import DefinableSet, diag_key, qf_type_equal, solutions
from .formula import (
    Eq,
    Formula,
    Not,
    RelAtom,
    conjoin,
    fin,
    free_vars,
    render,
    var_sort_key,
)
from .structures import FinStructure, apply_delta
from .theory import TheoryPlugin


def _roles(phi: Formula) -> tuple[tuple[str, ...], tuple[str, ...], tuple[str, ...]]:
    """Free variables of phi by role: x* are solution slots, y* are instance
    slots, anything else is a fixed parameter slot."""
    xs, ys, rest = [], [], []
    for v in sorted(free_vars(phi), key=var_sort_key):
        if v.startswith("x"):
            xs.append(v)
        elif v.startswith("y"):
            ys.append(v)
        else:
            rest.append(v)
    return tuple(xs), tuple(ys), tuple(rest)


def _matching_tuples(
    M: FinStructure,
    a_ids: tuple[int, ...],
    b_ids: tuple[int, ...],
    max_pool: int,
    seed: int,
) -> list[tuple[int, ...]]:
    """All tuples with the quantifier-free type of b_ids over a_ids, in
    ascending order; a seeded sample (always keeping b_ids) when there are
    more than max_pool."""
    target = diag_key(M, a_ids + b_ids)
    pool = [
        c
        for c in itertools.product(M.universe, repeat=len(b_ids))
        if diag_key(M, a_ids + c) == target
    ]
    if len(pool) > max_pool:
        rng = random.Random(seed)
        keep = set(rng.sample(range(len(pool)), max_pool - 1))
        keep.add(pool.index(b_ids))
        pool = [c for i, c in enumerate(pool) if i in keep]
    return pool


@dataclass(frozen=True)
class DividesWitness:
    """A verified k-inconsistent family. instances are the parameter tuples,
    type_confirmations records each instance's type equality against the
    first (over a_ids), confirmations the k-subsets (as index tuples) checked
    jointly unrealizable, grown how many instances came from oracle growth
    after the greedy pass, structure the structure the certificate lives
    in."""

    formula_text: str
    k: int
    a_ids: tuple[int, ...]
    instances: tuple[tuple[int, ...], ...]
    type_confirmations: tuple[bool, ...]
    confirmations: tuple[tuple[int, ...], ...]
    grown: int
    structure: FinStructure


def _next_fin_level(M: FinStructure):
    top = -1
    for e in M.universe:
        lv = M.level_of(e)
        if lv.tag == "fin":
            top = max(top, lv.index)
    return fin(top + 1)


def _apartness_extension_formula(
    M: FinStructure,
    a_ids: tuple[int, ...],
    b_ids: tuple[int, ...],
    family_ids: tuple[int, ...],
) -> tuple[Formula, tuple[str, ...], tuple[str, ...], tuple[int, ...]]:
    """A formula asking for a fresh copy of b_ids over a_ids, apart from the
    listed family elements: the copy repeats b's diagram over a exactly and
    carries no relation to, and no equality with, any family element.

    Returns (formula, param_vars, witness_vars, param_ids)."""
    p_vars = tuple(f"p{i}" for i in range(len(a_ids)))
    w_vars = tuple(f"w{i}" for i in range(len(b_ids)))
    f_vars = tuple(f"f{i}" for i in range(len(family_ids)))
    parts: list[Formula] = []
    # equality pattern of b within itself and against a
    for i, bi in enumerate(b_ids):
        for j in range(i + 1, len(b_ids)):
            lit = Eq(w_vars[i], w_vars[j])
            parts.append(lit if bi == b_ids[j] else Not(lit))
        for aj, pv in zip(a_ids, p_vars):
            lit = Eq(w_vars[i], pv)
            parts.append(lit if bi == aj else Not(lit))
    # relational diagram of (a, b); tuples living wholly on the a slots are
    # already facts of M and add nothing
    combined = list(zip(a_ids, p_vars)) + list(zip(b_ids, w_vars))
    n_a = len(a_ids)
    for rel, arity in sorted(M.signature.relations):
        for picks in itertools.product(range(len(combined)), repeat=arity):
            if all(p < n_a for p in picks):
                continue
            ids = tuple(combined[p][0] for p in picks)
            atom = RelAtom(rel, tuple(combined[p][1] for p in picks))
            parts.append(atom if M.has_fact(rel, ids) else Not(atom))
    # apartness from the family: no equality, no relation in either direction
    for wv in w_vars:
        for fv in f_vars:
            parts.append(Not(Eq(wv, fv)))
    for rel, arity in sorted(M.signature.relations):
        if arity < 2:
            continue
        slots = list(w_vars) + list(f_vars)
        for picks in itertools.product(slots, repeat=arity):
            if any(s in w_vars for s in picks) and any(s in f_vars for s in picks):
                parts.append(Not(RelAtom(rel, tuple(picks))))
    if not parts:
        parts.append(Eq(w_vars[0], w_vars[0]))
    return conjoin(parts), p_vars + f_vars, w_vars, a_ids + family_ids


def certify_dividing(
    plugin: TheoryPlugin,
    chain: StageChain,
    phi: Formula,
    a_ids: tuple[int, ...],
    b_ids: tuple[int, ...],
    k: int,
    L: int,
    *,
    max_pool: int = 10_000,
    seed: int = 0,
) -> Optional[DividesWitness]:
    """Search for a k-inconsistent family of L instances of phi along the
    type of b_ids over a_ids. Greedy pass over same-type tuples in the final
    stage first; if that stalls, grow the structure one fresh copy of the
    type at a time (apart from the family found so far) until L instances
    are confirmed or a growth step fails. None means no certificate found.
    k = 1 is the degenerate reading: every instance alone unrealizable."""
    xs, ys, rest = _roles(phi)
    if len(rest) != len(a_ids):
        raise ValueError(f"phi has {len(rest)} parameter slots, got {len(a_ids)} ids")
    if len(ys) != len(b_ids):
        raise ValueError(f"phi has {len(ys)} instance slots, got {len(b_ids)} ids")
    if not ys or not xs:
        raise ValueError("phi needs at least one x and one y variable")
    if k < 1 or L < k:
        raise ValueError("need k >= 1 and L >= k")
    M = chain.final
    base = tuple(zip(rest, a_ids))

    def constraint(c: tuple[int, ...]) -> tuple[Formula, dict[str, int]]:
        return phi, dict(base + tuple(zip(ys, c)))

    family: list[tuple[int, ...]] = []
    confirmations: list[tuple[int, ...]] = []

    def admit(c: tuple[int, ...], M_now: FinStructure) -> bool:
        """True iff every k-subset formed with c is jointly unrealizable;
        records the confirmed subsets. Rejection leaves no record."""
        fresh: list[tuple[int, ...]] = []
        for S in itertools.combinations(range(len(family)), k - 1):
            cons = [constraint(family[i]) for i in S] + [constraint(c)]
            if plugin.jointly_realizable(M_now, xs, cons):
                return False
            fresh.append(S + (len(family),))
        confirmations.extend(fresh)
        return True

    for c in _matching_tuples(M, a_ids, b_ids, max_pool, seed):
        if admit(c, M):
            family.append(c)
            if len(family) >= L:
                break

    grown = 0
    target = diag_key(M, a_ids + b_ids)
    while len(family) < L:
        fam_ids = tuple(sorted({e for c in family for e in c if e not in a_ids}))
        chi, p_vars, w_vars, p_ids = _apartness_extension_formula(M, a_ids, b_ids, fam_ids)
        ext = plugin.extends_with_witness(
            M,
            chi,
            p_ids,
            _next_fin_level(M),
            x_vars=p_vars,
            y_vars=w_vars,
            max_new=len(w_vars),
        )
        if ext is None:
            return None
        M = apply_delta(M, ext.delta)
        c = ext.witness
        if diag_key(M, a_ids + c) != target:
            raise InternalFaultError("grown instance has the wrong type")
        if not admit(c, M):
            return None
        family.append(c)
        grown += 1

    types_ok = tuple(qf_type_equal(M, c, family[0], over=a_ids) for c in family)
    return DividesWitness(
        render(phi), k, a_ids, tuple(family), types_ok, tuple(confirmations), grown, M
    )


# ---------------------------------------------------------------------------
# dimension-drop survey


@dataclass(frozen=True)
class DropEntry:
    instance: tuple[int, ...]
    result: DimCompareResult

    def rank(self) -> tuple[int, float]:
        """Most negative first: instances whose set goes empty inside the
        window beat any finite gap."""
        if self.result.verdict == DIVERGES_NEG and None in self.result.ds:
            return (0, 0.0)
        d = self.result.d_final
        return (1, d if d is not None else 0.0)


@dataclass(frozen=True)
class DropReport:
    psi_label: str
    phi_text: str
    base_instance: tuple[int, ...]
    window: int
    bound: float
    candidates_total: int
    skipped_late: tuple[tuple[int, ...], ...]
    entries: tuple[DropEntry, ...]

    @property
    def diverging(self) -> tuple[DropEntry, ...]:
        return tuple(e for e in self.entries if e.result.verdict == DIVERGES_NEG)

    @property
    def any_diverges_neg(self) -> bool:
        return bool(self.diverging)

    @property
    def best(self) -> Optional[DropEntry]:
        return min(self.diverging, key=DropEntry.rank, default=None)


def find_dimension_drop(
    chain: StageChain,
    psi: DefinableSet,
    phi: Formula,
    a_ids: tuple[int, ...],
    b_ids: tuple[int, ...],
    *,
    window: int = 10,
    bound: float = 2.0,
    max_candidates: int = 10_000,
    seed: int = 0,
) -> DropReport:
    """Compare the growth of phi(x; c) against the ambient set psi for every
    tuple c with the type of b_ids over a_ids in the final stage. Candidates
    whose parameters appear too late to cover the comparison window are
    skipped and listed. Raises ValueError if the base instance ever leaves
    psi, since the gap is only a dimension drop for subsets."""
    xs, ys, rest = _roles(phi)
    if len(rest) != len(a_ids) or len(ys) != len(b_ids):
        raise ValueError("parameter ids do not fit phi's slots")
    if xs != psi.vars:
        raise ValueError("phi and psi must share solution variables")
    base = tuple(zip(rest, a_ids))

    def dset(c: tuple[int, ...]) -> DefinableSet:
        return DefinableSet(phi, xs, base + tuple(zip(ys, c)), psi.cap)

    t2 = trend(chain, psi)
    tb = trend(chain, dset(b_ids))
    for stage in range(tb.start_stage, tb.end_stage + 1):
        M = chain.stages[stage]
        inside = set(solutions(M, psi))
        for sol in solutions(M, dset(b_ids)):
            if sol not in inside:
                raise ValueError(f"base instance leaves the ambient set at stage {stage}")

    final = chain.final
    window_start = t2.end_stage - window + 1
    entries: list[DropEntry] = []
    skipped: list[tuple[int, ...]] = []
    pool = _matching_tuples(final, a_ids, b_ids, max_candidates, seed)
    for c in pool:
        t1 = trend(chain, dset(c))
        if t1.start_stage > window_start:
            skipped.append(c)
            continue
        entries.append(DropEntry(c, dim_compare(t1, t2, window, bound)))
    return DropReport(
        t2.label,
        render(phi),
        b_ids,
        window,
        bound,
        len(pool),
        tuple(skipped),
        tuple(entries),
    )


# ---------------------------------------------------------------------------
# covering bound


def covering_bound(K: int, k: int) -> int:
    """Least L such that every family of L large subsets of a K-coverable
    set has k members with a common point: L = (k - 1) K + 1."""
    if K < 1 or k < 1:
        raise ValueError("need K >= 1 and k >= 1")
    return (k - 1) * K + 1


def _family_has_k_sharing(family: list[tuple[int, ...]], k: int) -> bool:
    mult: dict[int, int] = {}
    for s in family:
        for p in s:
            mult[p] = mult.get(p, 0) + 1
    return bool(mult) and max(mult.values()) >= k


@dataclass(frozen=True)
class CoveringReport:
    """Evidence that the covering bound holds on a ground set of s_size
    points split into K parts: counting certificate, exhaustive search for a
    counterexample family, a literal enumeration when small enough, seeded
    random families, and the tight family one below the bound when K divides
    s_size."""

    s_size: int
    K: int
    k: int
    m: int
    L: int
    max_family_without_sharing: int
    counterexample: Optional[tuple[tuple[int, ...], ...]]
    literal_checked: int
    samples_checked: int
    sharp_family: Optional[tuple[tuple[int, ...], ...]]
    sharp_family_ok: bool

    @property
    def ok(self) -> bool:
        return (
            self.max_family_without_sharing < self.L
            and self.counterexample is None
            and self.sharp_family_ok
        )


def covering_check(
    s_size: int,
    K: int,
    k: int,
    *,
    literal_cap: int = 300_000,
    samples: int = 200,
    seed: int = 0,
) -> CoveringReport:
    """Verify the covering bound on {0, .., s_size - 1} with part size
    m = ceil(s_size / K).

    The counting certificate: a family in which no point lies in k members
    has at most (k - 1) s_size incidences, so at most
    floor((k - 1) s_size / m) members, always fewer than L. The exhaustive
    search mirrors that argument: it looks for L size-m subsets with every
    point used at most k - 1 times, pruning branches whose remaining demand
    exceeds the free incidence slots (a counterexample family of larger
    subsets restricts to one of exact size m, so size m is enough). The
    literal enumeration, when the multiset space is small, re-checks the
    statement with no reduction at all."""
    if s_size < 1:
        raise ValueError("need at least one point")
    L = covering_bound(K, k)
    m = -(-s_size // K)
    cap = (k - 1) * s_size
    max_family = cap // m

    counterexample = _search_counterexample(s_size, m, k, L, cap)

    n_subsets = math.comb(s_size, m)
    literal_checked = 0
    if math.comb(n_subsets + L - 1, L) <= literal_cap:
        all_subsets = list(itertools.combinations(range(s_size), m))
        for fam in itertools.combinations_with_replacement(all_subsets, L):
            if not _family_has_k_sharing(list(fam), k):
                return CoveringReport(
                    s_size, K, k, m, L, max_family, tuple(fam), literal_checked,
                    0, None, False,
                )
            literal_checked += 1

    rng = random.Random(seed)
    samples_checked = 0
    for _ in range(samples):
        fam = [tuple(sorted(rng.sample(range(s_size), m))) for _ in range(L)]
        if not _family_has_k_sharing(fam, k):
            return CoveringReport(
                s_size, K, k, m, L, max_family, tuple(fam), literal_checked,
                samples_checked, None, False,
            )
        samples_checked += 1

    sharp: Optional[tuple[tuple[int, ...], ...]] = None
    sharp_ok = True
    if s_size % K == 0:
        block = s_size // K
        parts = [tuple(range(i * block, (i + 1) * block)) for i in range(K)]
        sharp = tuple(p for p in parts for _ in range(k - 1))
        sharp_ok = len(sharp) == L - 1 and not _family_has_k_sharing(list(sharp), k)

    return CoveringReport(
        s_size, K, k, m, L, max_family, counterexample, literal_checked,
        samples_checked, sharp, sharp_ok,
    )


def _search_counterexample(
    s_size: int, m: int, k: int, L: int, cap: int
) -> Optional[tuple[tuple[int, ...], ...]]:
    """Exhaustive multiset search for L size-m subsets with all point
    multiplicities <= k - 1. Returns one if it exists (it never does; the
    capacity prune is the counting argument made executable)."""
    subsets = list(itertools.combinations(range(s_size), m))
    mult = [0] * s_size
    chosen: list[tuple[int, ...]] = []

    def rec(start: int, used: int) -> Optional[tuple[tuple[int, ...], ...]]:
        if len(chosen) == L:
            return tuple(chosen)
        if (L - len(chosen)) * m > cap - used:
            return None
        for i in range(start, len(subsets)):
            s = subsets[i]
            if all(mult[p] < k - 1 for p in s):
                for p in s:
                    mult[p] += 1
                chosen.append(s)
                found = rec(i, used + m)
                chosen.pop()
                for p in s:
                    mult[p] -= 1
                if found:
                    return found
        return None

    return rec(0, 0)

"""Evaluation of formulas on finite structures and definable-set counting.

A DefinableSet packages a formula with its solution variables, parameter
bindings, and an optional level cap. Solutions are tuples over V_cap,
enumerated in lexicographic id order; counts are exact ints.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .formula import (
    And,
    Eq,
    Exists,
    Formula,
    LevelOrdinal,
    Not,
    Or,
    RelAtom,
    conjuncts,
    free_vars,
)
from .structures import FinStructure


class EvalError(ValueError):
    pass


@dataclass(frozen=True)
class DefinableSet:
    """phi(vars; params) relativized to V_cap. cap None means the whole
    universe. params maps the remaining free variables to element ids."""

    formula: Formula
    vars: tuple[str, ...]
    params: tuple[tuple[str, int], ...] = ()
    cap: Optional[LevelOrdinal] = None

    def env(self) -> dict[str, int]:
        return dict(self.params)


def evaluate(structure: FinStructure, formula: Formula, env: dict[str, int]) -> bool:
    """Truth of formula under env. Every free variable must be bound; bound
    variables of an Exists range over its own cap (or the whole universe)."""
    if isinstance(formula, RelAtom):
        try:
            tup = tuple(env[a] for a in formula.args)
        except KeyError as e:
            raise EvalError(f"unbound variable {e.args[0]!r}") from None
        return structure.has_fact(formula.rel, tup)
    if isinstance(formula, Eq):
        try:
            return env[formula.left] == env[formula.right]
        except KeyError as e:
            raise EvalError(f"unbound variable {e.args[0]!r}") from None
    if isinstance(formula, Not):
        return not evaluate(structure, formula.body, env)
    if isinstance(formula, And):
        return evaluate(structure, formula.left, env) and evaluate(structure, formula.right, env)
    if isinstance(formula, Or):
        return evaluate(structure, formula.left, env) or evaluate(structure, formula.right, env)
    if isinstance(formula, Exists):
        domain = structure.v_ids(formula.level_cap) if formula.level_cap else structure.universe
        return _eval_exists(structure, formula.bound, formula.body, env, domain, 0)
    raise TypeError(f"not a formula: {formula!r}")


def _eval_exists(structure, bound, body, env, domain, i) -> bool:
    if i == len(bound):
        return evaluate(structure, body, env)
    for e in domain:
        env2 = dict(env)
        env2[bound[i]] = e
        if _eval_exists(structure, bound, body, env2, domain, i + 1):
            return True
    return False


def _domain(structure: FinStructure, cap: Optional[LevelOrdinal]) -> tuple[int, ...]:
    return structure.v_ids(cap) if cap is not None else structure.universe


def solutions(structure: FinStructure, dset: DefinableSet) -> list[tuple[int, ...]]:
    """All solution tuples, lexicographic in ids. Unbound leftover variables
    raise EvalError via evaluate."""
    domain = _domain(structure, dset.cap)
    base = dset.env()
    out = []
    # plain nested product; pruning lives in find_witness where it matters
    for prefix in _product(domain, len(dset.vars)):
        env = dict(base)
        for v, e in zip(dset.vars, prefix):
            env[v] = e
        if evaluate(structure, dset.formula, env):
            out.append(prefix)
    return out


def _product(domain: tuple[int, ...], n: int):
    if n == 0:
        yield ()
        return
    for head in domain:
        for rest in _product(domain, n - 1):
            yield (head,) + rest


def count(structure: FinStructure, dset: DefinableSet) -> int:
    return len(solutions(structure, dset))


def find_witness(
    structure: FinStructure,
    formula: Formula,
    env: dict[str, int],
    witness_vars: tuple[str, ...],
    cap: Optional[LevelOrdinal],
) -> Optional[tuple[int, ...]]:
    """First tuple over V_cap (lexicographic) satisfying formula, or None.

    Same answer as scanning solutions() of the capped set, but prunes early:
    variables are assigned left to right, and any top-level conjunct whose
    free variables are all bound is checked immediately.
    """
    parts = conjuncts(formula)
    needed = [free_vars(p) for p in parts]
    domain = _domain(structure, cap)
    order = list(witness_vars)

    def rec(i: int, env_now: dict[str, int]) -> Optional[tuple[int, ...]]:
        if i == len(order):
            return tuple(env_now[v] for v in order)
        for e in domain:
            env_now[order[i]] = e
            bound_now = set(env_now)
            ok = True
            for part, fv in zip(parts, needed):
                if order[i] in fv and fv <= bound_now:
                    if not evaluate(structure, part, env_now):
                        ok = False
                        break
            if ok:
                hit = rec(i + 1, env_now)
                if hit is not None:
                    return hit
        env_now.pop(order[i], None)
        return None

    start = dict(env)
    unbound = free_vars(formula) - set(env) - set(witness_vars)
    if unbound:
        raise EvalError(f"unbound variables {sorted(unbound)}")
    # conjuncts with no witness variable never trigger the incremental check
    for part, fv in zip(parts, needed):
        if not (fv & set(order)) and not evaluate(structure, part, start):
            return None
    return rec(0, start)


def diag_key(structure: FinStructure, tup: tuple[int, ...]) -> tuple:
    """Atomic diagram of a tuple: equality pattern plus the truth of every
    relation atom over positions. Two tuples get the same key iff they satisfy
    the same quantifier-free formulas in the variables of their positions."""
    eqpat = tuple(
        tuple(int(tup[i] == tup[j]) for j in range(len(tup))) for i in range(len(tup))
    )
    rows = []
    for rel, ar in structure.signature.relations:
        cells = []
        for pos in _product(tuple(range(len(tup))), ar):
            cells.append(int(structure.has_fact(rel, tuple(tup[p] for p in pos))))
        rows.append((rel, tuple(cells)))
    return (eqpat, tuple(rows))


def qf_type_equal(
    structure: FinStructure,
    left: tuple[int, ...],
    right: tuple[int, ...],
    over: tuple[int, ...] = (),
) -> bool:
    """Whether left and right satisfy the same quantifier-free formulas with
    parameters from `over`. Exact: compares atomic diagrams of over+left vs
    over+right, which determine all quantifier-free truth."""
    if len(left) != len(right):
        return False
    return diag_key(structure, over + left) == diag_key(structure, over + right)

"""The staged construction: schedules in, audited stage chains out.

Stage n takes the first n schedule entries, sorts them by level (stable in
schedule position), and processes each entry against the current structure.
For an entry (phi, x-bar, y-bar, alpha) and each parameter tuple a-bar over
V_alpha (snapshot taken when the entry's turn starts, lexicographic order):

  case 1: some witness for phi(a-bar, y-bar) already lies inside V_{alpha+1};
          the structure is unchanged.
  case 2: no internal witness, but the theory oracle can realize phi in an
          extension; its witness is applied, new elements entering at exactly
          alpha+1, old witness components restricted to V_{alpha+1} so the
          witness itself lies inside V_{alpha+1}.
  case 3: the oracle reports phi(a-bar, y-bar) unrealizable; unchanged. This
          verdict is final: extensions only shrink what is realizable.

Levels are frozen: an element's level never changes once assigned, and
witnesses at level alpha+1 can never land inside any V_beta with beta <=
alpha, so the V_alpha sets only grow by earlier-level processing. That is
also why the per-entry frontier cache is sound: a parameter tuple processed
once never needs reprocessing, because quantifier-free truth over old
elements is permanent and case-3 answers are final.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional

from .evaluator import diag_key, evaluate, find_witness
from .formula import (
    Eq,
    Formula,
    LevelOrdinal,
    Not,
    RelAtom,
    ScheduleEntry,
    conjoin,
    fin,
    parse,
    parse_level,
    render,
    seeded_schedule,
)
from .structures import FinStructure, apply_delta, canonical_json
from .theory import TheoryPlugin


class InternalFaultError(RuntimeError):
    """The construction caught itself misbehaving (nondeterministic oracle,
    witness that fails its own constraint). Not a user error."""


class ConstructionError(ValueError):
    pass


@dataclass(frozen=True)
class CaseRecord:
    a_tuple: tuple[int, ...]
    case: int  # 1 internal witness, 2 oracle extension, 3 unrealizable
    witness: Optional[tuple[int, ...]]
    new_ids: tuple[int, ...] = ()


@dataclass(frozen=True)
class EntryAudit:
    position: int
    level: LevelOrdinal
    v_before: tuple[int, ...]
    skipped: int
    records: tuple[CaseRecord, ...]


@dataclass(frozen=True)
class StageAudit:
    stage: int
    entries: tuple[EntryAudit, ...]


@dataclass(frozen=True)
class StageChain:
    """stages[i] is M_i; audits[i] describes the work of stage i+1."""

    plugin_name: str
    schedule: tuple[ScheduleEntry, ...]
    stages: tuple[FinStructure, ...]
    audits: tuple[StageAudit, ...]

    @property
    def final(self) -> FinStructure:
        return self.stages[-1]

    @property
    def n_stages(self) -> int:
        return len(self.stages) - 1

    def with_final(self, M: FinStructure) -> "StageChain":
        return StageChain(self.plugin_name, self.schedule, self.stages[:-1] + (M,), self.audits)


def build_m0(plugin: TheoryPlugin) -> FinStructure:
    """One element at level fin0 carrying exactly the facts forced by the
    universal axioms: the intersection of all single-element fact sets that
    satisfy them. Errors out if no fact set does."""
    slots = []
    for rel, ar in plugin.signature.relations:
        slots.append((rel, (0,) * ar))
    passing = []
    for bits in itertools.product((False, True), repeat=len(slots)):
        facts = tuple(s for s, b in zip(slots, bits) if b)
        M = FinStructure(plugin.signature, ((0, fin(0)),), facts)
        if not plugin.validate_t_forall(M):
            passing.append(set(facts))
    if not passing:
        raise ConstructionError(f"theory {plugin.name} admits no one-element structure")
    forced = set.intersection(*passing)
    M0 = FinStructure(plugin.signature, ((0, fin(0)),), tuple(sorted(forced)))
    if plugin.validate_t_forall(M0):
        raise ConstructionError(f"theory {plugin.name} has no forced one-element structure")
    return M0


def build_stage(
    plugin: TheoryPlugin,
    prev: FinStructure,
    entries: tuple[ScheduleEntry, ...],
    stage: int,
    frontier: dict,
    check_oracle: bool = True,
) -> tuple[FinStructure, StageAudit]:
    """Process the given schedule entries (stable-sorted by level) against
    prev. frontier maps entry keys to the parameter ids already covered; it
    is updated in place. Returns the new structure and the stage audit."""
    M = prev
    ordered = sorted(entries, key=lambda e: (e.level._key(), e.position))
    audits = []
    for entry in ordered:
        key = entry.key()
        alpha = entry.level
        succ = alpha.successor()
        v_now = M.v_ids(alpha)
        covered = frontier.get(key, frozenset())
        records = []
        skipped = 0
        for a_bar in itertools.product(v_now, repeat=len(entry.x_vars)):
            if covered and all(e in covered for e in a_bar):
                skipped += 1
                continue
            env = dict(zip(entry.x_vars, a_bar))
            internal = find_witness(M, entry.formula, env, entry.y_vars, succ)
            if internal is not None:
                records.append(CaseRecord(a_bar, 1, internal))
                continue
            ext = plugin.extends_with_witness(
                M,
                entry.formula,
                a_bar,
                succ,
                x_vars=entry.x_vars,
                y_vars=entry.y_vars,
                allowed_old=M.v_ids(succ),
            )
            if check_oracle:
                again = plugin.extends_with_witness(
                    M,
                    entry.formula,
                    a_bar,
                    succ,
                    x_vars=entry.x_vars,
                    y_vars=entry.y_vars,
                    allowed_old=M.v_ids(succ),
                )
                if again != ext:
                    raise InternalFaultError(
                        f"oracle nondeterminism on {render(entry.formula)} at {a_bar}"
                    )
            if ext is None:
                records.append(CaseRecord(a_bar, 3, None))
                continue
            M = apply_delta(M, ext.delta)
            wenv = dict(env)
            wenv.update(zip(entry.y_vars, ext.witness))
            if not evaluate(M, entry.formula, wenv):
                raise InternalFaultError(
                    f"oracle witness fails {render(entry.formula)} at {a_bar}"
                )
            records.append(
                CaseRecord(a_bar, 2, ext.witness, tuple(e for e, _ in ext.delta.new_elements))
            )
        frontier[key] = covered | set(v_now)
        audits.append(EntryAudit(entry.position, alpha, v_now, skipped, tuple(records)))
    return M, StageAudit(stage, tuple(audits))


def build_chain(
    plugin: TheoryPlugin,
    n_stages: int,
    *,
    schedule: Optional[tuple[ScheduleEntry, ...]] = None,
    horizon: int = 4,
    check_oracle: bool = True,
) -> StageChain:
    """M_0 through M_n under the plugin's seeded schedule (or a caller-built
    one). Deterministic: equal inputs give equal chains, byte for byte."""
    if n_stages < 0:
        raise ConstructionError("n_stages must be >= 0")
    if schedule is None:
        schedule = tuple(
            seeded_schedule(plugin.signature, plugin.seeds(), n_stages, horizon)
        )
    if len(schedule) < n_stages:
        raise ConstructionError(f"schedule has {len(schedule)} entries, need {n_stages}")
    stages = [build_m0(plugin)]
    audits = []
    frontier: dict = {}
    for n in range(1, n_stages + 1):
        M, audit = build_stage(
            plugin, stages[-1], schedule[:n], n, frontier, check_oracle=check_oracle
        )
        stages.append(M)
        audits.append(audit)
    return StageChain(plugin.name, tuple(schedule), tuple(stages), tuple(audits))


# ---------------------------------------------------------------------------
# satisfaction checks


def strong_satisfaction_failures(
    plugin: TheoryPlugin, M: FinStructure, entry: ScheduleEntry
) -> list[tuple[int, ...]]:
    """Parameter tuples in V_level witnessing a strong-satisfaction failure:
    the theory can realize the constraint somewhere past M, yet no witness
    lies inside V_{level+1}."""
    succ = entry.level.successor()
    bad = []
    for a_bar in itertools.product(M.v_ids(entry.level), repeat=len(entry.x_vars)):
        env = dict(zip(entry.x_vars, a_bar))
        if find_witness(M, entry.formula, env, entry.y_vars, succ) is not None:
            continue
        if (
            plugin.extends_with_witness(
                M, entry.formula, a_bar, succ, x_vars=entry.x_vars, y_vars=entry.y_vars
            )
            is not None
        ):
            bad.append(a_bar)
    return bad


def strongly_satisfies(plugin: TheoryPlugin, M: FinStructure, entry: ScheduleEntry) -> bool:
    return not strong_satisfaction_failures(plugin, M, entry)


@dataclass(frozen=True)
class AxiomLevelReport:
    checked: tuple[tuple[str, LevelOrdinal], ...]
    failures: tuple[tuple[str, LevelOrdinal, tuple[int, ...]], ...]

    @property
    def ok(self) -> bool:
        return not self.failures


def processed_axiom_levels(
    plugin: TheoryPlugin, chain: StageChain
) -> list[tuple[str, LevelOrdinal]]:
    """(axiom name, level) pairs the chain has processed, i.e. schedule
    entries among the first n whose formula matches a plugin AE axiom."""
    by_matrix = {
        (render(ax.formula), ax.x_vars, ax.y_vars): ax.name for ax in plugin.ae_axioms
    }
    seen = []
    for entry in chain.schedule[: chain.n_stages]:
        name = by_matrix.get((render(entry.formula), entry.x_vars, entry.y_vars))
        if name is not None and (name, entry.level) not in seen:
            seen.append((name, entry.level))
    return seen


def verify_axioms_on_levels(
    plugin: TheoryPlugin,
    M: FinStructure,
    pairs: list[tuple[str, LevelOrdinal]],
) -> AxiomLevelReport:
    """Relativized axiom check: for each (axiom, alpha), every a-bar over
    V_alpha must have an internal witness inside V_{alpha+1}."""
    by_name = {ax.name: ax for ax in plugin.ae_axioms}
    failures = []
    for name, alpha in pairs:
        ax = by_name[name]
        succ = alpha.successor()
        for a_bar in itertools.product(M.v_ids(alpha), repeat=len(ax.x_vars)):
            env = dict(zip(ax.x_vars, a_bar))
            if find_witness(M, ax.formula, env, ax.y_vars, succ) is None:
                failures.append((name, alpha, a_bar))
    return AxiomLevelReport(tuple(pairs), tuple(failures))


def check_level_freeze(chain: StageChain) -> list[tuple[int, int, str, str]]:
    """Level changes between consecutive stages: (stage, element, before,
    after). Always empty for chains built here; the check recomputes it from
    the stage structures rather than trusting the builder."""
    out = []
    for n in range(1, len(chain.stages)):
        prev, cur = chain.stages[n - 1], chain.stages[n]
        for e in prev.universe:
            a, b = prev.level_of(e), cur.level_of(e)
            if a != b:
                out.append((n, e, a.render(), b.render()))
    return out


# ---------------------------------------------------------------------------
# embeddings


def embed_model(
    plugin: TheoryPlugin, A: FinStructure, chain: StageChain
) -> Optional[tuple[dict[int, int], StageChain]]:
    """Embed the finite structure A into the chain's final stage, the image
    of A's i-th element landing inside V_{fin(i+1)}. Existing elements are
    preferred; otherwise the final stage is extended by one oracle witness
    carrying the full atomic diagram. Returns (mapping, chain with the final
    stage possibly extended), or None when the theory refuses some step."""
    if A.signature != plugin.signature:
        raise ConstructionError("signature mismatch")
    M = chain.final
    mapping: dict[int, int] = {}
    placed: list[int] = []
    sources = list(A.universe)
    for i, a in enumerate(sources):
        bound = fin(i + 1)
        x_vars = tuple(f"p{j}" for j in range(i))
        yv = "y0"
        lits: list[Formula] = []
        names = list(x_vars) + [yv]
        prefix = sources[:i]
        for rel, ar in A.signature.relations:
            for pos in itertools.product(range(i + 1), repeat=ar):
                if all(p < i for p in pos):
                    continue
                args = tuple(names[p] for p in pos)
                holds = A.has_fact(rel, tuple((prefix + [a])[p] for p in pos))
                lits.append(RelAtom(rel, args) if holds else Not(RelAtom(rel, args)))
        for j in range(i):
            lits.append(Not(Eq(yv, names[j])))
        phi = conjoin(lits) if lits else Eq(yv, yv)
        ext = plugin.extends_with_witness(
            M,
            phi,
            tuple(mapping[p] for p in prefix),
            bound,
            x_vars=x_vars,
            y_vars=(yv,),
            allowed_old=M.v_ids(bound),
        )
        if ext is None:
            return None
        if not ext.delta.is_empty():
            M = apply_delta(M, ext.delta)
        img = ext.witness[0]
        mapping[a] = img
        placed.append(a)
        got = diag_key(M, tuple(mapping[s] for s in sources[: i + 1]))
        want = diag_key(A, tuple(sources[: i + 1]))
        if got != want:
            raise InternalFaultError("embedding image has the wrong atomic diagram")
    return mapping, chain.with_final(M)


# ---------------------------------------------------------------------------
# serialization


def chain_to_doc(chain: StageChain) -> dict:
    return {
        "plugin": chain.plugin_name,
        "schedule": [
            {
                "position": e.position,
                "formula": render(e.formula),
                "x_vars": list(e.x_vars),
                "y_vars": list(e.y_vars),
                "level": e.level.render(),
            }
            for e in chain.schedule
        ],
        "stages": [s.to_doc() for s in chain.stages],
        "audits": [
            {
                "stage": a.stage,
                "entries": [
                    {
                        "position": ea.position,
                        "level": ea.level.render(),
                        "v_before": list(ea.v_before),
                        "skipped": ea.skipped,
                        "records": [
                            {
                                "a": list(r.a_tuple),
                                "case": r.case,
                                "witness": list(r.witness) if r.witness is not None else None,
                                "new_ids": list(r.new_ids),
                            }
                            for r in ea.records
                        ],
                    }
                    for ea in a.entries
                ],
            }
            for a in chain.audits
        ],
    }


def serialize_chain(chain: StageChain) -> str:
    return canonical_json(chain_to_doc(chain))


def chain_from_doc(doc: dict) -> StageChain:
    stages = tuple(FinStructure.from_doc(d) for d in doc["stages"])
    sig = stages[0].signature
    schedule = tuple(
        ScheduleEntry(
            parse(d["formula"], sig),
            tuple(d["x_vars"]),
            tuple(d["y_vars"]),
            parse_level(d["level"]),
            d["position"],
        )
        for d in doc["schedule"]
    )
    audits = tuple(
        StageAudit(
            a["stage"],
            tuple(
                EntryAudit(
                    ea["position"],
                    parse_level(ea["level"]),
                    tuple(ea["v_before"]),
                    ea["skipped"],
                    tuple(
                        CaseRecord(
                            tuple(r["a"]),
                            r["case"],
                            tuple(r["witness"]) if r["witness"] is not None else None,
                            tuple(r["new_ids"]),
                        )
                        for r in ea["records"]
                    ),
                )
                for ea in a["entries"]
            ),
        )
        for a in doc["audits"]
    )
    return StageChain(doc["plugin"], schedule, stages, audits)


def load_chain(text: str) -> StageChain:
    import json

    return chain_from_doc(json.loads(text))

"""The staged construction: M0, the three-case stage pass, invariants,
serialization, and finite model embedding."""

import itertools

import pytest

from levelsat.construction import (
    InternalFaultError,
    build_chain,
    build_m0,
    build_stage,
    check_level_freeze,
    embed_model,
    load_chain,
    processed_axiom_levels,
    serialize_chain,
    strongly_satisfies,
    verify_axioms_on_levels,
)
from levelsat.evaluator import diag_key, evaluate
from levelsat.formula import ScheduleEntry, Signature, fin, omega_plus, parse
from levelsat.structures import FinStructure
from levelsat.theory import PLUGINS, RandomGraphTheory, get_plugin

from equivalence_reference import level_key, replay

EQUIV = get_plugin("generic_equivalence")
RADO = get_plugin("random_graph")
ISET = get_plugin("infinite_set")


def _entry(plugin, text, level, position=0):
    f = parse(text, plugin.signature)
    from levelsat.formula import split_vars

    xs, ys = split_vars(f)
    return ScheduleEntry(f, xs, ys, level, position)


# -- M0 ------------------------------------------------------------------------


def test_m0_equivalence_forced_loop():
    M0 = build_m0(EQUIV)
    assert M0.universe == (0,)
    assert M0.level_of(0) == fin(0)
    assert M0.facts("E") == {(0, 0)}


def test_m0_random_graph_edgeless():
    M0 = build_m0(RADO)
    assert M0.universe == (0,)
    assert not M0.facts("R")


def test_m0_infinite_set_bare():
    M0 = build_m0(ISET)
    assert M0.universe == (0,)
    assert M0.level_of(0) == fin(0)


# -- strong satisfaction -----------------------------------------------------------


def test_m0_strongly_satisfies_classmate_seeking():
    M0 = build_m0(EQUIV)
    entry = _entry(EQUIV, "E(x0, y0)", fin(0))
    assert strongly_satisfies(EQUIV, M0, entry)  # y0 = e0 is internal


def test_unrealizable_entry_vacuously_strong():
    M0 = build_m0(RADO)
    entry = _entry(RADO, "R(y0, y0)", fin(0))
    assert strongly_satisfies(RADO, M0, entry)


def test_m0_fails_proper_classmate_before_processing():
    M0 = build_m0(EQUIV)
    entry = _entry(EQUIV, "E(x0, y0) & !(y0 = x0)", fin(0))
    assert not strongly_satisfies(EQUIV, M0, entry)


# -- one stage ---------------------------------------------------------------------


def test_case2_adds_classmate_at_next_level():
    M0 = build_m0(EQUIV)
    entry = _entry(EQUIV, "E(x0, y0) & !(y0 = x0)", fin(0))
    M1, audit = build_stage(EQUIV, M0, (entry,), 1, {})
    assert M1.size() == 2
    assert M1.level_of(1) == fin(1)
    assert M1.has_fact("E", (0, 1)) and M1.has_fact("E", (1, 0))
    (ea,) = audit.entries
    assert [r.case for r in ea.records] == [2]
    assert ea.records[0].new_ids == (1,)


def test_reprocessing_fires_case1():
    M0 = build_m0(EQUIV)
    entry = _entry(EQUIV, "E(x0, y0) & !(y0 = x0)", fin(0))
    frontier: dict = {}
    M1, _ = build_stage(EQUIV, M0, (entry,), 1, frontier)
    # full reprocessing (fresh frontier): the witness is found internally
    M2, audit = build_stage(EQUIV, M1, (entry,), 2, {})
    assert M2 == M1
    (ea,) = audit.entries
    assert ea.skipped == 0
    assert [r.case for r in ea.records] == [1]
    # the skip cache shortcuts the same tuple with the same outcome
    M3, audit3 = build_stage(EQUIV, M1, (entry,), 2, frontier)
    assert M3 == M1
    (ea3,) = audit3.entries
    assert ea3.skipped == 1 and ea3.records == ()


def test_unrealizable_entry_fires_case3_everywhere():
    M0 = build_m0(RADO)
    entry = _entry(RADO, "R(y0, y0)", fin(0))
    M1, audit = build_stage(RADO, M0, (entry,), 1, {})
    assert M1 == M0
    (ea,) = audit.entries
    assert [r.case for r in ea.records] == [3]


def test_nondeterministic_oracle_is_a_fault():
    class FlipFlop(RandomGraphTheory):
        def __init__(self) -> None:
            super().__init__()
            self.calls = 0

        def extends_with_witness(self, *args, **kwargs):
            self.calls += 1
            if self.calls % 2 == 0:
                return None
            return super().extends_with_witness(*args, **kwargs)

    plugin = FlipFlop()
    entry = _entry(plugin, "R(x0, y0)", fin(0))
    with pytest.raises(InternalFaultError):
        build_stage(plugin, build_m0(plugin), (entry,), 1, {})


# -- chains ------------------------------------------------------------------------


def test_zero_stage_chain_is_m0():
    chain = build_chain(EQUIV, 0)
    assert len(chain.stages) == 1
    assert chain.stages[0] == build_m0(EQUIV)
    assert chain.audits == ()


def test_chain_monotone_and_valid(chains12):
    for name, chain in chains12.items():
        plugin = get_plugin(name)
        for prev, cur in zip(chain.stages, chain.stages[1:]):
            old = set(prev.universe)
            assert old <= set(cur.universe)
            for e in prev.universe:
                assert cur.level_of(e) == prev.level_of(e)
            for rel in prev.signature.names():
                assert {t for t in cur.facts(rel) if set(t) <= old} == set(
                    prev.facts(rel)
                )
        for M in chain.stages:
            assert plugin.validate_t_forall(M) == []


def test_witnesses_enter_at_successor_level(chains12):
    for name, chain in chains12.items():
        for audit, M in zip(chain.audits, chain.stages[1:]):
            for ea in audit.entries:
                succ = ea.level.successor()
                for r in ea.records:
                    for e in r.new_ids:
                        assert M.level_of(e) == succ


def test_stage_entries_sorted_by_level_then_position(chains12):
    for chain in chains12.values():
        by_pos = {e.position: e for e in chain.schedule}
        for audit in chain.audits:
            keys = [(ea.level._key(), ea.position) for ea in audit.entries]
            assert keys == sorted(keys)
            for ea in audit.entries:
                assert by_pos[ea.position].level == ea.level


def test_level_sets_frozen_while_their_level_processes(chains12):
    """Within a stage, all entries sharing a level see the same V_alpha, and
    nothing they add lands inside it."""
    for chain in chains12.values():
        for audit in chain.audits:
            for prev_ea, ea in zip(audit.entries, audit.entries[1:]):
                if prev_ea.level == ea.level:
                    assert prev_ea.v_before == ea.v_before


def test_no_level_ever_changes(chains12):
    for chain in chains12.values():
        assert check_level_freeze(chain) == []


def test_early_strong_satisfaction_spot_check():
    chain = build_chain(EQUIV, 5)
    for entry in chain.schedule[:5]:
        assert strongly_satisfies(EQUIV, chain.final, entry)


def test_existential_truth_persists_along_chain(chains12):
    chain = chains12["generic_equivalence"]
    f = parse("exists y0. E(x0, y0) & !(y0 = x0)", EQUIV.signature)
    first_true = None
    for n, M in enumerate(chain.stages):
        if evaluate(M, f, {"x0": 0}):
            first_true = n
            break
    assert first_true is not None
    for M in chain.stages[first_true:]:
        assert evaluate(M, f, {"x0": 0})


# -- relativized axiom verification ----------------------------------------------------


def test_nothing_processed_nothing_checked():
    chain = build_chain(EQUIV, 0)
    report = verify_axioms_on_levels(EQUIV, chain.final, [])
    assert report.ok and report.checked == ()


def test_processed_axiom_levels_hold(chains12):
    for name, chain in chains12.items():
        plugin = get_plugin(name)
        pairs = processed_axiom_levels(plugin, chain)
        report = verify_axioms_on_levels(plugin, chain.final, pairs)
        assert report.ok, report.failures
        if name == "generic_equivalence":
            assert ("classmate", omega_plus(1)) in pairs


def test_corrupted_level_is_detected(chains12):
    chain = chains12["generic_equivalence"]
    pairs = processed_axiom_levels(EQUIV, chain)
    M = chain.final
    # push the first fin1 element far up the chain; its classmate duties
    # toward V_fin0 elements can no longer be met inside V_fin1
    doc = M.to_doc()
    b = min(e for e in M.universe if M.level_of(e) == fin(1))
    doc["elements"] = [
        [eid, "omega+9" if eid == b else lvl] for eid, lvl in doc["elements"]
    ]
    corrupt = FinStructure.from_doc(doc)
    report = verify_axioms_on_levels(EQUIV, corrupt, pairs)
    assert not report.ok


# -- determinism and serialization ------------------------------------------------------


def test_chain_serialization_round_trip(chains12):
    chain = chains12["henson_triangle_free"]
    text = serialize_chain(chain)
    back = load_chain(text)
    assert back.plugin_name == chain.plugin_name
    assert back.stages == chain.stages
    assert back.audits == chain.audits
    assert [e.key() for e in back.schedule] == [e.key() for e in chain.schedule]
    assert serialize_chain(back) == text


def test_build_chain_deterministic():
    a = serialize_chain(build_chain(EQUIV, 8))
    b = serialize_chain(build_chain(EQUIV, 8))
    assert a == b


# -- independent replay of the equivalence chain ------------------------------------------


def test_equivalence_chain_matches_independent_replay(equiv30):
    """Pure class-bookkeeping simulator agrees with the machine on every
    stage: universe ids, levels, and the whole class partition."""
    sizes, psi, phi, b, sim = replay(equiv30.schedule, 30)
    assert b == 3
    assert sizes == [len(M.universe) for M in equiv30.stages]
    M = equiv30.final
    assert {e: (M.level_of(e).tag, M.level_of(e).index) for e in M.universe} == sim.level
    def machine_partition(M):
        parts = {}
        for e in M.universe:
            rep = min(u for u in M.universe if M.has_fact("E", (u, e)))
            parts.setdefault(rep, set()).add(e)
        return sorted(frozenset(s) for s in parts.values())
    assert machine_partition(M) == sorted(
        frozenset(m) for m in sim.members.values() if m
    )
    assert psi[28:] == [35, 35, 35]
    assert psi[16] == 27
    assert phi[8:] == [3] * 23


def test_replay_rejects_unknown_obligations():
    from equivalence_reference import EquivSim

    sim = EquivSim()
    with pytest.raises(AssertionError):
        sim.process_entry("E(x0, y0) | E(y0, y0)", 1, 1, ("fin", 0), ("?", ("fin", 0)))


# -- embedding ---------------------------------------------------------------------------


def test_embed_single_element(chains12):
    chain = chains12["infinite_set"]
    A = FinStructure(ISET.signature, ((0, fin(0)),), ())
    hit = embed_model(ISET, A, chain)
    assert hit is not None
    mapping, chain2 = hit
    img = mapping[0]
    assert chain2.final.level_of(img) <= fin(1)


def test_embed_edge_into_random_graph_chain(chains12):
    chain = chains12["random_graph"]
    A = FinStructure(
        RADO.signature,
        ((0, fin(0)), (1, fin(0))),
        (("R", (0, 1)), ("R", (1, 0))),
    )
    hit = embed_model(RADO, A, chain)
    assert hit is not None
    mapping, chain2 = hit
    M = chain2.final
    assert mapping[0] != mapping[1]
    assert M.has_fact("R", (mapping[0], mapping[1]))
    assert M.level_of(mapping[0]) <= fin(1)
    assert M.level_of(mapping[1]) <= fin(2)
    assert diag_key(M, (mapping[0], mapping[1])) == diag_key(A, (0, 1))


def test_embed_two_classes_into_equivalence_chain(chains12):
    chain = chains12["generic_equivalence"]
    facts = []
    for u, v in itertools.product((0, 1), repeat=2):
        facts.append(("E", (u, v)))
    facts.append(("E", (2, 2)))
    A = FinStructure(
        EQUIV.signature, ((0, fin(0)), (1, fin(0)), (2, fin(0))), tuple(facts)
    )
    hit = embed_model(EQUIV, A, chain)
    assert hit is not None
    mapping, chain2 = hit
    M = chain2.final
    imgs = [mapping[i] for i in (0, 1, 2)]
    assert len(set(imgs)) == 3
    assert M.has_fact("E", (imgs[0], imgs[1]))
    assert not M.has_fact("E", (imgs[0], imgs[2]))
    assert diag_key(M, tuple(imgs)) == diag_key(A, (0, 1, 2))
    for i, a in enumerate((0, 1, 2)):
        assert M.level_of(mapping[a]) <= fin(i + 1)


def test_embed_signature_mismatch_rejected(chains12):
    chain = chains12["random_graph"]
    A = FinStructure(Signature((("Q", 1),)), ((0, fin(0)),), ())
    with pytest.raises(ValueError):
        embed_model(RADO, A, chain)

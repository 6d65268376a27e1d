"""Truth evaluation, definable sets, counting, and atomic-type equality."""

import pytest

from levelsat.evaluator import (
    DefinableSet,
    EvalError,
    count,
    diag_key,
    evaluate,
    find_witness,
    qf_type_equal,
    solutions,
)
from levelsat.formula import Signature, fin, omega_plus, parse
from levelsat.structures import ExtensionDelta, FinStructure, apply_delta

SIG = Signature((("E", 2),))


def _graph(n_edges: tuple[tuple[int, int], ...], levels) -> FinStructure:
    facts = []
    for a, b in n_edges:
        facts.append(("E", (a, b)))
        facts.append(("E", (b, a)))
    return FinStructure(SIG, tuple(levels), tuple(facts))


# -- evaluate -------------------------------------------------------------------


def test_atom_lookup():
    M = _graph(((0, 1),), ((0, fin(0)), (1, fin(0))))
    f = parse("E(x0, x1)", SIG)
    assert evaluate(M, f, {"x0": 0, "x1": 1})
    assert not evaluate(M, f, {"x0": 0, "x1": 0})


def test_equality_reflexive():
    M = _graph((), ((0, fin(0)), (1, fin(3))))
    f = parse("x0 = x0", SIG)
    for e in M.universe:
        assert evaluate(M, f, {"x0": e})


def test_exists_false_without_neighbor():
    M = _graph((), ((0, fin(0)),))
    f = parse("exists y0. E(x0, y0)", SIG)
    assert not evaluate(M, f, {"x0": 0})


def test_exists_scans_universe():
    M = _graph(((0, 2),), ((0, fin(0)), (1, fin(0)), (2, omega_plus(1))))
    f = parse("exists y0. E(x0, y0)", SIG)
    assert evaluate(M, f, {"x0": 0})
    assert not evaluate(M, f, {"x0": 1})


def test_unbound_variable_raises():
    M = _graph((), ((0, fin(0)),))
    with pytest.raises(EvalError):
        evaluate(M, parse("E(x0, x1)", SIG), {"x0": 0})
    with pytest.raises(EvalError):
        evaluate(M, parse("x0 = x1", SIG), {"x1": 0})


# -- solutions / count ------------------------------------------------------------


def test_full_set_is_whole_universe():
    M = _graph((), ((0, fin(0)), (1, fin(1)), (2, omega_plus(0))))
    D = DefinableSet(parse("x0 = x0", SIG), ("x0",))
    assert solutions(M, D) == [(0,), (1,), (2,)]
    assert count(M, D) == 3


def test_contradiction_is_empty():
    M = _graph((), ((0, fin(0)), (1, fin(1))))
    D = DefinableSet(parse("x0 = x0 & !(x0 = x0)", SIG), ("x0",))
    assert solutions(M, D) == []
    assert count(M, D) == 0


def test_cap_excludes_high_level_neighbor():
    # b has two neighbors; the one above level omega is cut out by the cap
    M = _graph(
        ((0, 1), (0, 2)),
        ((0, fin(0)), (1, fin(1)), (2, omega_plus(2))),
    )
    D = DefinableSet(parse("E(x0, y0)", SIG), ("x0",), (("y0", 0),), omega_plus(0))
    assert solutions(M, D) == [(1,)]
    uncapped = DefinableSet(parse("E(x0, y0)", SIG), ("x0",), (("y0", 0),))
    assert solutions(M, uncapped) == [(1,), (2,)]


def test_cap_monotone():
    M = _graph(
        ((0, 1), (0, 2), (0, 3)),
        ((0, fin(0)), (1, fin(1)), (2, omega_plus(0)), (3, omega_plus(2))),
    )
    f = parse("E(x0, y0)", SIG)
    caps = [fin(0), fin(1), omega_plus(0), omega_plus(2), None]
    sols = [
        set(solutions(M, DefinableSet(f, ("x0",), (("y0", 0),), c))) for c in caps
    ]
    for earlier, later in zip(sols, sols[1:]):
        assert earlier <= later


def test_count_product_identity():
    M = _graph(((0, 1), (1, 2)), ((0, fin(0)), (1, fin(0)), (2, fin(1))))
    phi = DefinableSet(parse("E(x0, y0)", SIG), ("x0",), (("y0", 1),))
    psi = DefinableSet(parse("!(x1 = y1)", SIG), ("x1",), (("y1", 0),))
    rho = DefinableSet(
        parse("E(x0, y0) & !(x1 = y1)", SIG),
        ("x0", "x1"),
        (("y0", 1), ("y1", 0)),
    )
    assert count(M, rho) == count(M, phi) * count(M, psi)


def test_existential_truth_persists_under_extension():
    M = _graph(((0, 1),), ((0, fin(0)), (1, fin(1))))
    f = parse("exists y0. E(x0, y0)", SIG)
    assert evaluate(M, f, {"x0": 0})
    M2 = apply_delta(M, ExtensionDelta(((2, fin(2)),), (("E", (1, 2)), ("E", (2, 1)))))
    assert evaluate(M2, f, {"x0": 0})
    # quantifier-free solutions over the old universe survive verbatim
    D = DefinableSet(parse("E(x0, y0)", SIG), ("x0",), (("y0", 1),))
    assert set(solutions(M, D)) <= set(solutions(M2, D))


# -- find_witness -----------------------------------------------------------------


def test_find_witness_first_lexicographic():
    M = _graph(((0, 1), (0, 2)), ((0, fin(0)), (1, fin(0)), (2, fin(0))))
    got = find_witness(M, parse("E(x0, y0)", SIG), {"x0": 0}, ("y0",), None)
    assert got == (1,)


def test_find_witness_respects_cap():
    M = _graph(((0, 2),), ((0, fin(0)), (1, fin(0)), (2, omega_plus(1))))
    f = parse("E(x0, y0)", SIG)
    assert find_witness(M, f, {"x0": 0}, ("y0",), omega_plus(0)) is None
    assert find_witness(M, f, {"x0": 0}, ("y0",), omega_plus(1)) == (2,)


def test_find_witness_matches_solution_scan():
    M = _graph(((0, 1), (1, 2)), ((0, fin(0)), (1, fin(1)), (2, fin(2))))
    f = parse("E(x0, y0) & !(y0 = x0)", SIG)
    for cap in [fin(0), fin(1), fin(2), None]:
        for a in M.universe:
            w = find_witness(M, f, {"x0": a}, ("y0",), cap)
            sols = solutions(
                M, DefinableSet(f, ("y0",), (("x0", a),), cap)
            )
            assert (w is None) == (not sols)
            if sols:
                assert w == sols[0]


# -- atomic types -----------------------------------------------------------------


def test_type_equal_identity():
    M = _graph(((0, 1),), ((0, fin(0)), (1, fin(0))))
    assert qf_type_equal(M, (0, 1), (0, 1))


def test_type_equal_rejects_length_mismatch():
    M = _graph((), ((0, fin(0)), (1, fin(0))))
    assert not qf_type_equal(M, (0,), (0, 1))


def test_singletons_in_distinct_classes_share_empty_param_type():
    # two equivalence classes; over no parameters both elements look alike
    M = FinStructure(
        SIG,
        ((0, fin(0)), (1, fin(0))),
        (("E", (0, 0)), ("E", (1, 1))),
    )
    assert qf_type_equal(M, (0,), (1,))


def test_differing_atom_over_parameter():
    M = _graph(((0, 1),), ((0, fin(0)), (1, fin(0)), (2, fin(0))))
    assert not qf_type_equal(M, (1,), (2,), over=(0,))


def test_diag_key_separates_equality_patterns():
    M = _graph((), ((0, fin(0)), (1, fin(0))))
    assert diag_key(M, (0, 0)) != diag_key(M, (0, 1))
    assert diag_key(M, (0, 0)) == diag_key(M, (1, 1))

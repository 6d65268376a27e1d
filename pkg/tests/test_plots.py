"""SVG trend figures: well-formed output, gap notes, window shading."""

from xml.dom import minidom

import pytest

from levelsat.dimension import trend
from levelsat.evaluator import DefinableSet
from levelsat.formula import omega_plus, parse
from levelsat.plots import trend_plot_svg
from levelsat.theory import get_plugin

ESIG = get_plugin("generic_equivalence").signature
OMEGA = omega_plus(0)

AMBIENT = DefinableSet(parse("x0 = x0", ESIG), ("x0",), (), OMEGA)
CLASS_B = DefinableSet(parse("E(x0, y0)", ESIG), ("x0",), (("y0", 3),), OMEGA)
NOTHING = DefinableSet(parse("!(x0 = x0)", ESIG), ("x0",), (), OMEGA)


def test_svg_is_well_formed_xml(equiv30):
    trends = [trend(equiv30, AMBIENT), trend(equiv30, CLASS_B)]
    svg = trend_plot_svg(trends, window=10, caption="gap over the final window")
    doc = minidom.parseString(svg)
    assert doc.documentElement.tagName == "svg"
    assert svg.count("<polyline") >= 2


def test_legend_marks_empty_stage_gaps(equiv30):
    with_gap = trend(equiv30, NOTHING, label="empty class")
    svg = trend_plot_svg([trend(equiv30, AMBIENT), with_gap])
    assert "empty class (gaps: empty set)" in svg
    minidom.parseString(svg)


def test_window_shading_only_when_asked(equiv30):
    t = trend(equiv30, AMBIENT)
    assert "#dbe7f5" in trend_plot_svg([t], window=10)
    assert "#dbe7f5" not in trend_plot_svg([t])


def test_caption_is_escaped(equiv30):
    svg = trend_plot_svg([trend(equiv30, AMBIENT)], caption="counts < caps & logs")
    minidom.parseString(svg)
    assert "counts &lt; caps &amp; logs" in svg


def test_plot_is_deterministic(equiv30):
    trends = [trend(equiv30, AMBIENT), trend(equiv30, CLASS_B)]
    assert trend_plot_svg(trends, window=10) == trend_plot_svg(trends, window=10)


def test_empty_plot_rejected():
    with pytest.raises(ValueError):
        trend_plot_svg([])

from __future__ import annotations

import pytest

from gtrmol.errors import MolfileError
from gtrmol.graph import BondDisplay, BondOrder, make_graph
from gtrmol.metrics import graph_match
from gtrmol.molfile import parse_molfile, split_sdf, unsupported_properties, write_molfile

ETHANOL = """ethanol
  hand          2D

  3  2  0  0  0  0  0  0  0  0999 V2000
    0.0000    0.0000    0.0000 C   0  0  0  0  0  0  0  0  0  0  0  0
    1.2990    0.7500    0.0000 C   0  0  0  0  0  0  0  0  0  0  0  0
    2.5981    0.0000    0.0000 O   0  0  0  0  0  0  0  0  0  0  0  0
  1  2  1  0
  2  3  1  0
M  END
"""


def test_parse_basic():
    doc = parse_molfile(ETHANOL)
    assert doc.title == "ethanol"
    assert doc.counts == (3, 2)
    assert [a.label for a in doc.graph.atoms] == ["C", "C", "O"]
    assert doc.graph.atoms[1].coords == pytest.approx((1.299, 0.75))


def test_round_trip_keeps_everything():
    g = make_graph(
        ["C", "C", "Ph", "N"],
        [(0, 1), (1, 2, "single", "wedge"), (1, 3, "single", "dash")],
        [(0, 0), (1.5, 0), (2.2, 1.3), (2.2, -1.3)],
        formal_charge={3: 1},
        explicit_h={3: 3},
        isotope={0: 13},
    )
    back = parse_molfile(write_molfile(g, title="x")).graph
    assert graph_match(back, g)
    assert back.atoms[2].label == "Ph"
    assert back.bonds[1].display is BondDisplay.BEGIN_WEDGE
    assert back.bonds[2].display is BondDisplay.BEGIN_DASH
    assert back.atoms[0].isotope == 13
    assert back.atoms[3].explicit_h == 3
    for a, b in zip(back.atoms, g.atoms):
        assert a.coords == pytest.approx(b.coords, abs=1e-4)


def test_legacy_charge_column_used_without_chg_block():
    text = ETHANOL.replace("O   0  0", "O   0  5")
    assert parse_molfile(text).graph.atoms[2].formal_charge == -1


def test_aromatic_bond_type_four():
    text = ETHANOL.replace("  2  3  1  0", "  2  3  4  0")
    g = parse_molfile(text).graph
    assert g.bonds[1].order is BondOrder.AROMATIC


def test_corpus_round_trip(molecules):
    for g in molecules:
        assert graph_match(parse_molfile(write_molfile(g)).graph, g)


@pytest.mark.parametrize(
    "mutate,line,fragment",
    [
        (lambda t: "\n".join(t.splitlines()[:3]), 4, "counts line"),
        (lambda t: t.replace("  1  2  1  0", "  1  9  1  0"), 8, "out of range"),
        (lambda t: t.replace("  1  2  1  0", "  1  1  1  0"), 8, "itself"),
        (lambda t: t.replace("  1  2  1  0", "  1  2  7  0"), 8, "bond type"),
        (lambda t: t.replace("M  END\n", ""), 10, "M  END"),
        (lambda t: t.replace("V2000", "V3000"), 4, "V3000"),
        (lambda t: t.replace("  3  2  0", "  x  2  0"), 4, "malformed"),
        (lambda t: t.replace("  2  3  1  0", "  3  2  1  0") + "", None, None),
    ],
)
def test_errors_carry_line_numbers(mutate, line, fragment):
    text = mutate(ETHANOL)
    if line is None:
        parse_molfile(text)  # reversed bond direction is legal
        return
    with pytest.raises(MolfileError) as info:
        parse_molfile(text)
    assert info.value.position == line
    assert fragment in str(info.value)


def test_duplicate_bond_rejected():
    text = ETHANOL.replace("  2  3  1  0\n", "  2  3  1  0\n  3  2  1  0\n").replace("  3  2  0  0", "  3  3  0  0")
    with pytest.raises(MolfileError, match="duplicate"):
        parse_molfile(text)


def test_sgroup_blocks_are_reported():
    text = ETHANOL.replace("M  END", "M  STY  1   1 SUP\nM  END")
    doc = parse_molfile(text)
    assert unsupported_properties(doc)


def test_write_requires_coordinates():
    with pytest.raises(ValueError):
        write_molfile(make_graph(["C"]))


def test_split_sdf():
    text = ETHANOL + "$$$$\n" + ETHANOL + "$$$$\n"
    parts = split_sdf(text)
    assert len(parts) == 2
    assert all(parse_molfile(p).counts == (3, 2) for p in parts)


ETHANE = """ethane


  2  1  0  0  0  0  0  0  0  0999 V2000
    0.0000    0.0000    0.0000 C   0  0  0  0  0  0  0  0  0  0  0  0
    1.5400    0.0000    0.0000 C   0  0  0  0  0  0  0  0  0  0  0  0
  1  2  1  0  0  0  0
M  END
"""


def test_hand_built_ethane():
    g = parse_molfile(ETHANE).graph
    assert [a.label for a in g.atoms] == ["C", "C"]
    assert g.bonds[0].order is BondOrder.SINGLE
    assert g.atoms[1].coords == (1.54, 0.0)


def test_ethane_round_trip_is_identical_document():
    doc = parse_molfile(ETHANE)
    again = parse_molfile(write_molfile(doc))
    assert again == doc
    assert write_molfile(again) == write_molfile(doc)


def test_empty_molfile():
    text = "empty\n\n\n  0  0  0  0  0  0  0  0  0  0999 V2000\nM  END\n"
    assert parse_molfile(text).graph.num_atoms == 0
    out = write_molfile(make_graph([]))
    assert "  0  0  0" in out and out.rstrip().endswith("M  END")
    assert parse_molfile(out).graph.num_atoms == 0


def test_stereo_six_is_dash():
    g = parse_molfile(ETHANE.replace("  1  2  1  0  0  0  0", "  1  2  1  6  0  0  0")).graph
    assert g.bonds[0].display is BondDisplay.BEGIN_DASH


def test_negative_charge_writes_chg_line():
    g = make_graph(["C", "O"], [(0, 1)], [(0, 0), (1.4, 0)], formal_charge={1: -1})
    assert "M  CHG  1   2  -1" in write_molfile(g)

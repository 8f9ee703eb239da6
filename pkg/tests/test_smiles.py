from __future__ import annotations

import pytest

from gtrmol.errors import SmilesError
from gtrmol.fixtures import strip_for_smiles
from gtrmol.graph import BondOrder, make_graph
from gtrmol.metrics import graph_match
from gtrmol.smiles import implicit_h_count, parse_smiles, superatom_label_ok, write_smiles


def labels(g):
    return [a.label for a in g.atoms]


def test_ring_closure():
    g = parse_smiles("C1CCCC1")
    assert g.num_atoms == 5 and g.num_bonds == 5


def test_branch():
    g = parse_smiles("CC(C)O")
    assert labels(g) == ["C", "C", "C", "O"]
    assert sorted(b.pair for b in g.bonds) == [(0, 1), (1, 2), (1, 3)]


def test_aromatic_ring():
    g = parse_smiles("c1ccccc1")
    assert all(a.aromatic for a in g.atoms)
    assert {b.order for b in g.bonds} == {BondOrder.AROMATIC}


def test_triple_bond():
    g = parse_smiles("C#C")
    assert g.bonds[0].order is BondOrder.TRIPLE


def test_superatom_bracket():
    g = parse_smiles("CC[Ph]")
    assert labels(g) == ["C", "C", "Ph"]
    assert g.atoms[2].is_superatom


def test_bracket_atoms():
    g = parse_smiles("[13CH3][NH3+].[O-]")
    c, n, o = g.atoms
    assert (c.isotope, c.explicit_h) == (13, 3)
    assert (n.formal_charge, n.explicit_h) == (1, 3)
    assert (o.formal_charge, o.explicit_h) == (-1, 0)


def test_two_letter_elements_and_superatom_fallback():
    g = parse_smiles("[Cl-].[Na+].[Boc][R1]")
    assert labels(g) == ["Cl", "Na", "Boc", "R1"]
    assert not g.atoms[0].is_superatom


def test_chirality_is_kept():
    g = parse_smiles("N[C@@H](C)O")
    assert g.atoms[1].chirality == "@@"


@pytest.mark.parametrize(
    "text,offset",
    [
        ("C1CC", 1),
        ("CC)", 2),
        ("C(C", 1),
        ("", 0),
        ("C=", 1),
        ("C((C))", 2),
        ("C[", 1),
        ("C..C", 2),
    ],
)
def test_positioned_errors(text, offset):
    with pytest.raises(SmilesError) as info:
        parse_smiles(text)
    assert info.value.position == offset


def test_error_messages_name_the_problem():
    with pytest.raises(SmilesError, match="unmatched ring"):
        parse_smiles("C1CC")
    with pytest.raises(SmilesError, match="empty"):
        parse_smiles("")


def test_duplicate_bond_via_ring_closure():
    with pytest.raises(SmilesError):
        parse_smiles("C1C1")


@pytest.mark.parametrize(
    "text",
    ["C1CCCC1", "CC(C)O", "c1ccccc1", "C#C", "CC[Ph]", "[13CH3]C(=O)[O-].[Na+]", "c1ccc2ccccc2c1", "C%12CC%12"],
)
def test_write_parse_round_trip(text):
    g = parse_smiles(text)
    assert graph_match(parse_smiles(write_smiles(g)), g)


def test_write_uses_two_digit_ring_labels_when_needed():
    n = 12
    bonds = [(i, (i + 1) % 3 + 3 * (i // 3)) for i in range(n)]
    # four triangles joined in a chain, plus extra rings to exceed nine open digits
    g = make_graph(["C"] * n, [(0, 1), (1, 2), (2, 0)] + [(i, i + 1) for i in range(2, n - 1)] + [(0, k) for k in range(3, n)])
    text = write_smiles(g)
    assert graph_match(parse_smiles(text), g)
    del bonds


def test_single_bond_between_aromatic_atoms_is_explicit():
    g = parse_smiles("c1ccccc1-c1ccccc1")
    text = write_smiles(g)
    assert "-" in text
    assert graph_match(parse_smiles(text), g)


def test_corpus_round_trip(molecules):
    for g in molecules:
        s = strip_for_smiles(g)
        assert graph_match(parse_smiles(write_smiles(s)), s)


def test_implicit_hydrogens():
    g = parse_smiles("CC(=O)O")
    assert [implicit_h_count(i, g) for i in range(4)] == [3, 0, 0, 1]
    assert implicit_h_count(0, parse_smiles("[CH2]")) == 2
    assert implicit_h_count(1, parse_smiles("C[Ph]")) == 0


def test_superatom_label_ok():
    assert superatom_label_ok("Ph")
    assert superatom_label_ok("R1'")
    assert not superatom_label_ok("C")
    assert not superatom_label_ok("a b")
    assert not superatom_label_ok("")


def test_bytes_input():
    assert parse_smiles(b"CCO").num_atoms == 3
    with pytest.raises(SmilesError):
        parse_smiles(b"\xff\xfe")


def test_writer_examples():
    assert write_smiles(parse_smiles("C")) == "C"
    assert write_smiles(make_graph(["C", "C", "O"], [(0, 1), (1, 2)])) == "CCO"
    assert write_smiles(make_graph(["C", "C", "Ph"], [(0, 1), (1, 2)])) == "CC[Ph]"


def test_implicit_h_examples():
    assert implicit_h_count(0, parse_smiles("C")) == 4
    benzene = parse_smiles("c1ccccc1")
    assert [implicit_h_count(i, benzene) for i in range(6)] == [1] * 6
    assert implicit_h_count(0, parse_smiles("[Ph]")) == 0


def test_superatom_parse_agrees_with_rectified_ethylbenzene():
    from gtrmol.rectify import OcrToken, default_superatom_table, rectify_sample

    ring = [(2.0 + 1.5 * __import__("math").cos(k * 1.0472), 1.5 * __import__("math").sin(k * 1.0472)) for k in range(6)]
    g = make_graph(["C", "C"] + ["c"] * 6,
                   [(0, 1), (1, 2)] + [(2 + k, 2 + (k + 1) % 6, "aromatic") for k in range(6)],
                   [(-2.5, 0), (-1.0, 0)] + [(x + 1.5, y) for x, y in ring])
    cx, cy = g.atoms[5].coords
    res = rectify_sample(g, [OcrToken("Ph", (cx - 1.6, cy - 0.3, cx - 1.4, cy + 0.3))], default_superatom_table())
    assert res.ok
    assert graph_match(res.graph, parse_smiles("CC[Ph]"))

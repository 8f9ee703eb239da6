from __future__ import annotations

import random

from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from gtrmol.canon import canonicalize_graph
from gtrmol.cot import decode_cot, encode_atoms_then_bonds, encode_cot, render_cot_text
from gtrmol.errors import ParseError
from gtrmol.fixtures import random_molecule, strip_for_smiles
from gtrmol.graph import connected_components, permute
from gtrmol.metrics import graph_match
from gtrmol.molfile import parse_molfile, write_molfile
from gtrmol.smiles import parse_smiles, write_smiles

seeds = st.integers(min_value=0, max_value=2**32 - 1)
fast = settings(max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])


def molecule(seed, lo=2, hi=14):
    return random_molecule(random.Random(seed), lo, hi)


@fast
@given(seeds, st.randoms(use_true_random=False))
def test_canonical_smiles_is_permutation_invariant(seed, r):
    g = strip_for_smiles(molecule(seed))
    perm = list(range(g.num_atoms))
    r.shuffle(perm)
    assert canonicalize_graph(permute(g, perm)).canonical_smiles == canonicalize_graph(g).canonical_smiles


@fast
@given(seeds)
def test_smiles_round_trip(seed):
    g = strip_for_smiles(molecule(seed))
    assert graph_match(parse_smiles(write_smiles(g)), g)


@fast
@given(seeds)
def test_molfile_round_trip(seed):
    g = molecule(seed)
    assert graph_match(parse_molfile(write_molfile(g)).graph, g)


@fast
@given(seeds)
def test_cot_round_trips_and_ring_count(seed):
    g = molecule(seed)
    script = encode_cot(g)
    rings = sum(1 for s in script.steps if getattr(s, "closes_ring", False))
    assert rings == g.num_bonds - g.num_atoms + len(connected_components(g))
    assert graph_match(decode_cot(render_cot_text(script)), g)
    assert graph_match(decode_cot(encode_atoms_then_bonds(g)), g)


def _ok_or_positioned(fn, data):
    try:
        fn(data)
    except ParseError as exc:
        assert exc.position is not None and exc.position >= 0


@settings(max_examples=300, deadline=None)
@given(st.binary(max_size=80))
def test_parsers_never_crash_on_bytes(data):
    for fn in (parse_smiles, parse_molfile, decode_cot):
        _ok_or_positioned(fn, data)


@settings(max_examples=300, deadline=None)
@given(st.text(alphabet="CNOcn()[]=#@+-123%.Ph*/\\", max_size=40))
def test_smiles_parser_on_smiles_like_text(text):
    _ok_or_positioned(parse_smiles, text)


@settings(max_examples=200, deadline=None)
@given(seeds, st.integers(min_value=0, max_value=10_000), st.characters())
def test_cot_parser_on_mutated_scripts(seed, where, ch):
    text = render_cot_text(encode_cot(molecule(seed)))
    k = where % (len(text) + 1)
    _ok_or_positioned(decode_cot, text[:k] + ch + text[k + 1:])

"""Slow, obviously-correct reference implementations used to check the library.

None of these share code with gtrmol's own algorithms.
"""

from __future__ import annotations

import itertools
from collections import Counter
from dataclasses import replace

from gtrmol.graph import BondDisplay, BondOrder, MolGraph


def _atom_sig(atom) -> tuple:
    return (atom.label, atom.formal_charge, atom.isotope or 0, atom.aromatic)


def _edge_table(g: MolGraph, relaxed_display: bool) -> dict[frozenset, tuple]:
    table = {}
    for b in g.bonds:
        if relaxed_display or b.display is BondDisplay.PLAIN:
            val = (b.order, BondDisplay.PLAIN, None)
        else:
            val = (b.order, b.display, b.from_idx)
        table[frozenset((b.from_idx, b.to_idx))] = val
    return table


def brute_force_isomorphic(a: MolGraph, b: MolGraph, relaxed_display: bool = False) -> bool:
    """Try every bijection that keeps atom signatures; compare full edge tables."""
    n = a.num_atoms
    if n != b.num_atoms or a.num_bonds != b.num_bonds:
        return False
    if Counter(_atom_sig(x) for x in a.atoms) != Counter(_atom_sig(x) for x in b.atoms):
        return False
    ea, eb = _edge_table(a, relaxed_display), _edge_table(b, relaxed_display)
    # group atoms by signature; permute only within groups
    groups: dict[tuple, tuple[list[int], list[int]]] = {}
    for i, x in enumerate(a.atoms):
        groups.setdefault(_atom_sig(x), ([], []))[0].append(i)
    for j, y in enumerate(b.atoms):
        groups[_atom_sig(y)][1].append(j)
    keys = list(groups)
    choices = [list(itertools.permutations(groups[k][1])) for k in keys]
    for combo in itertools.product(*choices):
        m = [0] * n
        for k, images in zip(keys, combo):
            for src, dst in zip(groups[k][0], images):
                m[src] = dst
        if any(
            a.atoms[i].explicit_h is not None
            and b.atoms[m[i]].explicit_h is not None
            and a.atoms[i].explicit_h != b.atoms[m[i]].explicit_h
            for i in range(n)
        ):
            continue
        ok = True
        for pair, (order, disp, src) in ea.items():
            u, v = tuple(pair)
            got = eb.get(frozenset((m[u], m[v])))
            if got is None or got[0] != order or got[1] != disp:
                ok = False
                break
            if src is not None and got[2] != m[src]:
                ok = False
                break
        if ok:
            return True
    return False


def bfs_components(g: MolGraph) -> list[set[int]]:
    nbrs = {i: set() for i in range(g.num_atoms)}
    for b in g.bonds:
        nbrs[b.from_idx].add(b.to_idx)
        nbrs[b.to_idx].add(b.from_idx)
    seen: set[int] = set()
    out = []
    for s in range(g.num_atoms):
        if s in seen:
            continue
        comp = {s}
        frontier = [s]
        while frontier:
            x = frontier.pop()
            for y in nbrs[x]:
                if y not in comp:
                    comp.add(y)
                    frontier.append(y)
        seen |= comp
        out.append(comp)
    return out


def exhaustive_rooted_matches(graph: MolGraph, pattern: MolGraph, root: int) -> set[frozenset[int]]:
    """Every atom set onto which ``pattern`` embeds as an induced subgraph
    with exactly one bond leaving the set, attached at the image of ``root``."""
    found = set()
    s = pattern.num_atoms
    pedges = {frozenset((b.from_idx, b.to_idx)): b.order for b in pattern.bonds}
    gedges = {frozenset((b.from_idx, b.to_idx)): b.order for b in graph.bonds}
    for image in itertools.permutations(range(graph.num_atoms), s):
        if any(_atom_sig(pattern.atoms[i]) != _atom_sig(graph.atoms[image[i]]) for i in range(s)):
            continue
        chosen = set(image)
        inside = {e: o for e, o in gedges.items() if e <= chosen}
        mapped = {frozenset(image[i] for i in e): o for e, o in pedges.items()}
        if inside != mapped:
            continue
        leaving = [e for e in gedges if len(e & chosen) == 1]
        if len(leaving) == 1 and image[root] in leaving[0]:
            found.add(frozenset(chosen))
    return found


def near_miss(g: MolGraph, rng) -> MolGraph:
    """Copy of ``g`` with one atom label or one bond order changed."""
    plain = [k for k, b in enumerate(g.bonds) if b.display is BondDisplay.PLAIN and b.order is not BondOrder.AROMATIC]
    if plain and rng.random() < 0.5:
        k = rng.choice(plain)
        b = g.bonds[k]
        new = BondOrder.DOUBLE if b.order is BondOrder.SINGLE else BondOrder.SINGLE
        bonds = g.bonds[:k] + (replace(b, order=new),) + g.bonds[k + 1:]
        return MolGraph(g.atoms, bonds)
    i = rng.randrange(g.num_atoms)
    a = g.atoms[i]
    label = "S" if a.label != "S" else "Se"
    atoms = g.atoms[:i] + (replace(a, label=label, aromatic=False, isotope=None),) + g.atoms[i + 1:]
    return MolGraph(atoms, g.bonds)

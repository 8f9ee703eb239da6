"""Canonical atom ranking and canonical SMILES.

Ranks come from iterative neighborhood refinement of per-atom invariants.
Ties left after refinement are resolved by individualizing each candidate
of the first tied cell and keeping the branch whose relabeled graph is
lexicographically smallest, so the result does not depend on the input
numbering even when tied atoms are not symmetry-equivalent. Automorphisms
found along the way prune equivalent branches.

``plain_superatom_rank=True`` switches to label-blind superatom invariants
and plain lowest-index tie breaking, which reproduces the endpoint
ambiguity of label-blind canonicalizers on purpose.
"""

from __future__ import annotations

from dataclasses import dataclass

from .graph import MolGraph, ORDER_CODE, ORDER_X2, ensure_valid
from .smiles import parse_smiles, write_ordered


@dataclass(frozen=True)
class CanonicalForm:
    canonical_smiles: str
    ranks: tuple[int, ...]


def _atom_invariants(graph: MolGraph, plain_superatom: bool) -> list[tuple]:
    out = []
    for atom, nbrs in zip(graph.atoms, graph.adjacency):
        label = atom.label
        if plain_superatom and atom.is_superatom:
            label = "*"
        out.append((
            len(nbrs),
            label,
            atom.formal_charge,
            atom.isotope or 0,
            atom.aromatic,
            sum(ORDER_X2[b.order] for _, b in nbrs),
            -1 if atom.explicit_h is None else atom.explicit_h,
        ))
    return out


def _dense(keys: list) -> list[int]:
    """Map keys to 0..k-1 preserving sort order."""
    table = {k: i for i, k in enumerate(sorted(set(keys)))}
    return [table[k] for k in keys]


def refine(colors: list[int], nbrs: list[list[tuple[int, int]]]) -> list[int]:
    """Refine a coloring until neighbor color multisets stop splitting cells.

    Colors are dense and order-consistent with the input coloring.
    """
    count = len(set(colors))
    n = len(colors)
    while count < n:
        keys = [(colors[v], tuple(sorted((colors[u], code) for u, code in nbrs[v]))) for v in range(n)]
        new = _dense(keys)
        new_count = max(new) + 1 if new else 0
        if new_count == count:
            break
        colors, count = new, new_count
    return colors


def _individualize(colors: list[int], v: int) -> list[int]:
    c = colors[v]
    return _dense([2 * x + (1 if x == c and i != v else 0) for i, x in enumerate(colors)])


def _target_cell(colors: list[int]) -> list[int] | None:
    sizes: dict[int, int] = {}
    for c in colors:
        sizes[c] = sizes.get(c, 0) + 1
    tied = [c for c, k in sizes.items() if k > 1]
    if not tied:
        return None
    c = min(tied)
    return [i for i, x in enumerate(colors) if x == c]


class _Search:
    def __init__(self, graph: MolGraph, nbrs, atom_keys):
        self.graph = graph
        self.nbrs = nbrs
        self.atom_keys = atom_keys
        self.best_cert = None
        self.best_ranks: list[int] | None = None
        self.autos: list[list[int]] = []

    def certificate(self, ranks: list[int]):
        n = len(ranks)
        inv = [0] * n
        for atom, r in enumerate(ranks):
            inv[r] = atom
        atoms = tuple(self.atom_keys[inv[r]] for r in range(n))
        edges = []
        for b in self.graph.bonds:
            ra, rb = ranks[b.from_idx], ranks[b.to_idx]
            if ra > rb:
                ra, rb = rb, ra
            edges.append((ra, rb, ORDER_CODE[b.order]))
        edges.sort()
        return atoms, tuple(edges)

    def leaf(self, ranks: list[int]):
        cert = self.certificate(ranks)
        if self.best_cert is None or cert < self.best_cert:
            self.best_cert, self.best_ranks = cert, ranks
        elif cert == self.best_cert:
            # same relabeled graph: best^-1 o ranks is an automorphism
            inv_best = [0] * len(ranks)
            for atom, r in enumerate(self.best_ranks):
                inv_best[r] = atom
            self.autos.append([inv_best[ranks[a]] for a in range(len(ranks))])

    def orbit_root(self, fixed: list[int]):
        """Union-find over automorphisms that fix every atom in ``fixed``."""
        parent = list(range(len(self.atom_keys)))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for g in self.autos:
            if all(g[f] == f for f in fixed):
                for a, b in enumerate(g):
                    ra, rb = find(a), find(b)
                    if ra != rb:
                        parent[max(ra, rb)] = min(ra, rb)
        return find

    def run(self, colors: list[int], fixed: list[int]):
        colors = refine(colors, self.nbrs)
        cell = _target_cell(colors)
        if cell is None:
            self.leaf(colors)
            return
        tried: list[int] = []
        for v in cell:
            if tried:
                find = self.orbit_root(fixed)
                if any(find(v) == find(t) for t in tried):
                    continue
            tried.append(v)
            self.run(_individualize(colors, v), fixed + [v])


def _neighbor_codes(graph: MolGraph) -> list[list[tuple[int, int]]]:
    return [[(u, ORDER_CODE[b.order]) for u, b in nb] for nb in graph.adjacency]


def canonical_ranks(graph: MolGraph, plain_superatom_rank: bool = False) -> list[int]:
    """Canonical rank for every atom (a permutation of ``0..p-1``)."""
    ensure_valid(graph)
    n = len(graph.atoms)
    if n == 0:
        return []
    nbrs = _neighbor_codes(graph)
    invariants = _atom_invariants(graph, plain_superatom_rank)
    colors = _dense(invariants)
    if plain_superatom_rank:
        # label-blind mode: first tied atom by input index wins every tie
        colors = refine(colors, nbrs)
        while (cell := _target_cell(colors)) is not None:
            colors = refine(_individualize(colors, min(cell)), nbrs)
        return colors
    atom_keys = [
        inv + (atom.chirality or "",)
        for inv, atom in zip(invariants, graph.atoms)
    ]
    search = _Search(graph, nbrs, atom_keys)
    search.run(colors, [])
    return search.best_ranks


def canonicalize_graph(graph: MolGraph, plain_superatom_rank: bool = False) -> CanonicalForm:
    ranks = canonical_ranks(graph, plain_superatom_rank)
    return CanonicalForm(write_ordered(graph, ranks), tuple(ranks))


def canonicalize_smiles(text: str, plain_superatom_rank: bool = False) -> str:
    return canonicalize_graph(parse_smiles(text), plain_superatom_rank).canonical_smiles

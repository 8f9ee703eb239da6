"""Molecular graph data model: atoms (elements or superatoms) and typed bonds.

Graphs are immutable. Atom ``index`` always equals the atom's position in
``MolGraph.atoms``; bonds reference atoms by index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import cached_property
from typing import Iterable, Sequence

from .elements import AROMATIC_ELEMENTS, is_superatom
from .errors import GraphError


class BondOrder(str, Enum):
    SINGLE = "single"
    DOUBLE = "double"
    TRIPLE = "triple"
    AROMATIC = "aromatic"


class BondDisplay(str, Enum):
    PLAIN = "plain"
    BEGIN_WEDGE = "wedge"
    BEGIN_DASH = "dash"


# bond orders doubled so aromatic stays integral
ORDER_X2 = {
    BondOrder.SINGLE: 2,
    BondOrder.DOUBLE: 4,
    BondOrder.TRIPLE: 6,
    BondOrder.AROMATIC: 3,
}

ORDER_CODE = {
    BondOrder.SINGLE: 1,
    BondOrder.DOUBLE: 2,
    BondOrder.TRIPLE: 3,
    BondOrder.AROMATIC: 4,
}


@dataclass(frozen=True)
class AtomNode:
    index: int
    label: str
    formal_charge: int = 0
    isotope: int | None = None
    explicit_h: int | None = None
    aromatic: bool = False
    coords: tuple[float, float] | None = None
    chirality: str | None = None

    @property
    def is_superatom(self) -> bool:
        return is_superatom(self.label)


@dataclass(frozen=True)
class BondEdge:
    from_idx: int
    to_idx: int
    order: BondOrder = BondOrder.SINGLE
    display: BondDisplay = BondDisplay.PLAIN

    @property
    def pair(self) -> tuple[int, int]:
        a, b = self.from_idx, self.to_idx
        return (a, b) if a < b else (b, a)

    def other(self, idx: int) -> int:
        return self.to_idx if idx == self.from_idx else self.from_idx


@dataclass(frozen=True)
class MolGraph:
    atoms: tuple[AtomNode, ...] = ()
    bonds: tuple[BondEdge, ...] = ()

    def __post_init__(self):
        # accept lists for convenience, store tuples
        if not isinstance(self.atoms, tuple):
            object.__setattr__(self, "atoms", tuple(self.atoms))
        if not isinstance(self.bonds, tuple):
            object.__setattr__(self, "bonds", tuple(self.bonds))

    @property
    def num_atoms(self) -> int:
        return len(self.atoms)

    @property
    def num_bonds(self) -> int:
        return len(self.bonds)

    @property
    def has_coords(self) -> bool:
        return bool(self.atoms) and all(a.coords is not None for a in self.atoms)

    @cached_property
    def adjacency(self) -> tuple[tuple[tuple[int, BondEdge], ...], ...]:
        """Per atom, ``(neighbor, bond)`` pairs in bond-list order.

        Only meaningful for graphs whose bond endpoints are in range.
        """
        adj: list[list[tuple[int, BondEdge]]] = [[] for _ in self.atoms]
        for b in self.bonds:
            adj[b.from_idx].append((b.to_idx, b))
            adj[b.to_idx].append((b.from_idx, b))
        return tuple(tuple(x) for x in adj)

    @cached_property
    def bond_map(self) -> dict[tuple[int, int], BondEdge]:
        return {b.pair: b for b in self.bonds}

    def bond_between(self, a: int, b: int) -> BondEdge | None:
        return self.bond_map.get((a, b) if a < b else (b, a))

    def degree(self, idx: int) -> int:
        return len(self.adjacency[idx])


def make_graph(
    labels: Sequence[str],
    bonds: Iterable[tuple] = (),
    coords: Sequence[tuple[float, float]] | None = None,
    **per_atom,
) -> MolGraph:
    """Terse constructor, mostly for tests.

    ``bonds`` items are ``(a, b)``, ``(a, b, order)`` or ``(a, b, order, display)``
    where order/display may be enum members or their string values.
    ``per_atom`` maps AtomNode field names to ``{index: value}`` dicts.
    """
    atoms = []
    for i, label in enumerate(labels):
        aromatic = False
        if label in ("b", "c", "n", "o", "p", "s", "se", "as"):
            label = label.capitalize()
            aromatic = True
        kw = {name: values[i] for name, values in per_atom.items() if i in values}
        kw.setdefault("aromatic", aromatic)
        atoms.append(AtomNode(i, label, coords=coords[i] if coords else None, **kw))
    edges = []
    for item in bonds:
        a, b = item[0], item[1]
        order = BondOrder(item[2]) if len(item) > 2 else BondOrder.SINGLE
        display = BondDisplay(item[3]) if len(item) > 3 else BondDisplay.PLAIN
        edges.append(BondEdge(a, b, order, display))
    return MolGraph(tuple(atoms), tuple(edges))


@dataclass(frozen=True)
class Violation:
    kind: str
    message: str
    atom: int | None = None
    bond: int | None = None


def validate(graph: MolGraph) -> list[Violation]:
    """Every invariant violation in ``graph``; an empty list means valid."""
    from .smiles import superatom_label_ok

    out: list[Violation] = []
    n = len(graph.atoms)
    with_coords = 0
    for pos, atom in enumerate(graph.atoms):
        if atom.index != pos:
            out.append(Violation("index", f"atom at position {pos} has index {atom.index}", atom=pos))
        if not atom.label:
            out.append(Violation("label", f"empty label at atom {pos}", atom=pos))
            continue
        if atom.is_superatom:
            if atom.aromatic:
                out.append(Violation("aromatic", f"superatom {atom.label!r} flagged aromatic at atom {pos}", atom=pos))
            if atom.isotope is not None:
                out.append(Violation("isotope", f"superatom {atom.label!r} carries an isotope at atom {pos}", atom=pos))
            if not superatom_label_ok(atom.label):
                out.append(Violation("label", f"superatom label {atom.label!r} not representable at atom {pos}", atom=pos))
        elif atom.aromatic and atom.label not in AROMATIC_ELEMENTS:
            out.append(Violation("aromatic", f"element {atom.label} cannot be aromatic at atom {pos}", atom=pos))
        if atom.isotope is not None and atom.isotope <= 0:
            out.append(Violation("isotope", f"non-positive isotope at atom {pos}", atom=pos))
        if atom.explicit_h is not None and atom.explicit_h < 0:
            out.append(Violation("hydrogens", f"negative hydrogen count at atom {pos}", atom=pos))
        if atom.chirality not in (None, "@", "@@"):
            out.append(Violation("chirality", f"unknown chirality mark at atom {pos}", atom=pos))
        if atom.coords is not None:
            with_coords += 1
            if len(atom.coords) != 2 or not all(math.isfinite(c) for c in atom.coords):
                out.append(Violation("coords", f"non-finite coordinates at atom {pos}", atom=pos))
    if 0 < with_coords < n:
        out.append(Violation("coords", f"mixed coordinate presence ({with_coords} of {n} atoms)"))

    seen: dict[tuple[int, int], int] = {}
    for k, bond in enumerate(graph.bonds):
        a, b = bond.from_idx, bond.to_idx
        if not (0 <= a < n and 0 <= b < n):
            out.append(Violation("range", f"bond {k} references a missing atom", bond=k))
            continue
        if a == b:
            out.append(Violation("self_loop", f"self-loop at bond {k}", bond=k))
            continue
        if bond.display is not BondDisplay.PLAIN and bond.order is not BondOrder.SINGLE:
            out.append(Violation("display", f"display requires single order at bond {k}", bond=k))
        if bond.pair in seen:
            out.append(Violation("duplicate", f"bond {k} duplicates bond {seen[bond.pair]}", bond=k))
        else:
            seen[bond.pair] = k
    return out


def ensure_valid(graph: MolGraph) -> MolGraph:
    problems = validate(graph)
    if problems:
        raise GraphError(problems[0].message)
    return graph


def connected_components(graph: MolGraph) -> list[set[int]]:
    """Atom-index sets joined by bonds, ordered by smallest member."""
    parent = list(range(len(graph.atoms)))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for b in graph.bonds:
        ra, rb = find(b.from_idx), find(b.to_idx)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)
    groups: dict[int, set[int]] = {}
    for i in range(len(graph.atoms)):
        groups.setdefault(find(i), set()).add(i)
    return sorted(groups.values(), key=min)


def permute(graph: MolGraph, perm: Sequence[int]) -> MolGraph:
    """Renumber atoms so old atom ``i`` becomes new atom ``perm[i]``.

    Bond list order is kept; bond endpoints (and wedge direction) follow
    their atoms.
    """
    n = len(graph.atoms)
    if len(perm) != n or sorted(perm) != list(range(n)):
        raise ValueError("perm is not a bijection on atom indices")
    atoms: list[AtomNode | None] = [None] * n
    for old, a in enumerate(graph.atoms):
        new = perm[old]
        atoms[new] = AtomNode(
            new, a.label, a.formal_charge, a.isotope, a.explicit_h, a.aromatic, a.coords, a.chirality
        )
    bonds = tuple(BondEdge(perm[b.from_idx], perm[b.to_idx], b.order, b.display) for b in graph.bonds)
    return MolGraph(tuple(atoms), bonds)


def inverse_permutation(perm: Sequence[int]) -> list[int]:
    inv = [0] * len(perm)
    for i, p in enumerate(perm):
        inv[p] = i
    return inv


def strip_coords(graph: MolGraph) -> MolGraph:
    return MolGraph(tuple(replace(a, coords=None) for a in graph.atoms), graph.bonds)


def median_bond_length(graph: MolGraph) -> float:
    """Median 2D bond length; 1.0 when there are no bonds or no coordinates."""
    if not graph.has_coords or not graph.bonds:
        return 1.0
    lengths = sorted(
        math.dist(graph.atoms[b.from_idx].coords, graph.atoms[b.to_idx].coords) for b in graph.bonds
    )
    mid = len(lengths) // 2
    if len(lengths) % 2:
        return lengths[mid]
    return (lengths[mid - 1] + lengths[mid]) / 2


# JSON-friendly record form used by the CLI schemas.

def graph_to_dict(graph: MolGraph) -> dict:
    atoms = []
    for a in graph.atoms:
        rec: dict = {"label": a.label}
        if a.formal_charge:
            rec["charge"] = a.formal_charge
        if a.isotope is not None:
            rec["isotope"] = a.isotope
        if a.explicit_h is not None:
            rec["explicit_h"] = a.explicit_h
        if a.aromatic:
            rec["aromatic"] = True
        if a.chirality:
            rec["chirality"] = a.chirality
        if a.coords is not None:
            rec["x"], rec["y"] = a.coords
        atoms.append(rec)
    bonds = []
    for b in graph.bonds:
        rec = {"from": b.from_idx, "to": b.to_idx, "order": b.order.value}
        if b.display is not BondDisplay.PLAIN:
            rec["display"] = b.display.value
        bonds.append(rec)
    return {"atoms": atoms, "bonds": bonds}


def graph_from_dict(data: dict) -> MolGraph:
    """Inverse of :func:`graph_to_dict`. Raises GraphError on malformed records."""
    try:
        atoms = []
        for i, rec in enumerate(data.get("atoms", [])):
            coords = None
            if "x" in rec or "y" in rec:
                coords = (float(rec["x"]), float(rec["y"]))
            atoms.append(
                AtomNode(
                    index=i,
                    label=str(rec["label"]),
                    formal_charge=int(rec.get("charge", 0)),
                    isotope=None if rec.get("isotope") is None else int(rec["isotope"]),
                    explicit_h=None if rec.get("explicit_h") is None else int(rec["explicit_h"]),
                    aromatic=bool(rec.get("aromatic", False)),
                    coords=coords,
                    chirality=rec.get("chirality"),
                )
            )
        bonds = [
            BondEdge(
                int(rec["from"]),
                int(rec["to"]),
                BondOrder(rec.get("order", "single")),
                BondDisplay(rec.get("display", "plain")),
            )
            for rec in data.get("bonds", [])
        ]
    except (KeyError, TypeError, ValueError) as exc:
        raise GraphError(f"malformed graph record: {exc}") from exc
    return ensure_valid(MolGraph(tuple(atoms), tuple(bonds)))

"""Seeded synthetic molecules for tests, benchmarks and dataset builds.

Molecules grow on a honeycomb lattice with unit bond length, so every
fixture carries plausible 2D coordinates. Hexagons closed during growth
may become aromatic rings. Each generated graph keeps the conventions the
file formats rely on: an atom is aromatic exactly when it touches an
aromatic bond, charged and isotopic atoms carry a fixed hydrogen count,
and there is no chirality (molfiles do not store it).
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, replace

from .graph import AtomNode, BondDisplay, BondEdge, BondOrder, MolGraph, ensure_valid, permute
from .rectify import OcrToken, SuperatomTable, default_superatom_table, expand_all

FIXTURE_SUPERATOMS = ("Ph", "Me", "Et", "Boc", "Cbz", "R1", "OMe", "CF3", "tBu", "Bn")
RECTIFIER_LABELS = ("Ph", "Et", "Pr", "Bu", "Ac", "Cbz", "COOH")

_S3 = math.sqrt(3) / 2
_DIRS = ((0.0, 1.0), (_S3, -0.5), (-_S3, -0.5))
_VALENCE = {"C": 4, "N": 3, "O": 2, "S": 2, "F": 1, "Cl": 1, "Br": 1}
_X2 = {BondOrder.SINGLE: 2, BondOrder.DOUBLE: 4, BondOrder.TRIPLE: 6, BondOrder.AROMATIC: 3}


def _key(p: tuple[float, float]) -> tuple[int, int]:
    return (round(p[0] * 1000), round(p[1] * 1000))


class _Lattice:
    """Occupied honeycomb vertices; sublattice sign flips the neighbor directions."""

    def __init__(self):
        self.pos: list[tuple[float, float]] = []
        self.sign: list[int] = []
        self.occ: dict[tuple[int, int], int] = {}

    def add(self, p, sign) -> int:
        self.pos.append(p)
        self.sign.append(sign)
        self.occ[_key(p)] = len(self.pos) - 1
        return len(self.pos) - 1

    def neighbor_points(self, i):
        x, y = self.pos[i]
        s = self.sign[i]
        return [(x + s * dx, y + s * dy) for dx, dy in _DIRS]

    def free_points(self, i):
        return [p for p in self.neighbor_points(i) if _key(p) not in self.occ]


def _hexagons(lat: _Lattice, bonds: set[tuple[int, int]]) -> list[tuple[int, ...]]:
    """Fully bonded lattice hexagons, as cyclic vertex tuples."""
    found = {}
    for i, (x, y) in enumerate(lat.pos):
        s = lat.sign[i]
        for dx, dy in _DIRS:
            cx, cy = x - s * dx, y - s * dy
            ring = []
            for k in range(6):
                ang = math.radians(30 + 60 * k)
                idx = lat.occ.get(_key((cx + math.cos(ang), cy + math.sin(ang))))
                if idx is None:
                    break
                ring.append(idx)
            else:
                edges = [tuple(sorted((ring[k], ring[(k + 1) % 6]))) for k in range(6)]
                if all(e in bonds for e in edges):
                    found[frozenset(ring)] = tuple(ring)
    return [found[k] for k in sorted(found, key=sorted)]


def _grow(rng: random.Random, n: int, closure_p: float) -> tuple[_Lattice, set[tuple[int, int]]]:
    lat = _Lattice()
    lat.add((0.0, 0.0), 1)
    bonds: set[tuple[int, int]] = set()
    while len(lat.pos) < n:
        options = [(i, p) for i in range(len(lat.pos)) for p in lat.free_points(i)]
        v, p = rng.choice(options)
        w = lat.add(p, -lat.sign[v])
        bonds.add((v, w))
        for q in lat.neighbor_points(w):
            u = lat.occ.get(_key(q))
            if u is not None and u != v and rng.random() < closure_p:
                bonds.add((min(u, w), max(u, w)))
    return lat, bonds


def random_molecule(
    rng: random.Random,
    min_atoms: int = 5,
    max_atoms: int = 20,
    superatom_p: float = 0.15,
    extra_component_p: float = 0.08,
    stereo_p: float = 0.12,
) -> MolGraph:
    """One random valid molecule with coordinates.

    Covers superatoms, aromatic rings, double/triple bonds, wedge/dash
    bonds, formal charges, isotopes and (sometimes) a counter-ion.
    """
    extra = rng.random() < extra_component_p and max_atoms >= 3  # the ion needs room
    n = rng.randint(max(2, min_atoms - extra), max_atoms - extra)
    lat, bond_set = _grow(rng, n, closure_p=0.45)
    degree = [0] * n
    for a, b in bond_set:
        degree[a] += 1
        degree[b] += 1

    order = {e: BondOrder.SINGLE for e in bond_set}
    aromatic = [False] * n
    for ring in _hexagons(lat, bond_set):
        if rng.random() < 0.5:
            for k in range(6):
                order[tuple(sorted((ring[k], ring[(k + 1) % 6])))] = BondOrder.AROMATIC
                aromatic[ring[k]] = True

    labels: list[str] = []
    for i in range(n):
        d = degree[i]
        if aromatic[i]:
            labels.append("N" if d == 2 and rng.random() < 0.15 else "C")
        elif d == 1 and rng.random() < superatom_p and n > 2:
            labels.append(rng.choice(FIXTURE_SUPERATOMS))
        elif d >= 3:
            labels.append("C" if d == 4 or rng.random() < 0.85 else "N")
        elif d == 2:
            labels.append(rng.choices(["C", "N", "O", "S"], [70, 12, 12, 6])[0])
        else:
            labels.append(rng.choices(["C", "N", "O", "F", "Cl", "Br"], [50, 12, 18, 8, 6, 6])[0])

    def used(i: int) -> int:
        return sum(_X2[o] for e, o in order.items() if i in e)

    def spare(i: int) -> int:
        if labels[i] not in _VALENCE:
            return 0
        return (2 * _VALENCE[labels[i]] - used(i)) // 2

    for e in sorted(bond_set):
        a, b = e
        if order[e] is not BondOrder.SINGLE or aromatic[a] or aromatic[b]:
            continue
        room = min(spare(a), spare(b))
        r = rng.random()
        if room >= 2 and r < 0.05:
            order[e] = BondOrder.TRIPLE
        elif room >= 1 and r < 0.2:
            order[e] = BondOrder.DOUBLE

    charge = [0] * n
    explicit_h: list[int | None] = [None] * n
    isotope: list[int | None] = [None] * n
    for i in range(n):
        if aromatic[i] or labels[i] not in _VALENCE:
            continue
        r = rng.random()
        if labels[i] == "N" and r < 0.12:
            charge[i] = 1
            explicit_h[i] = 4 - used(i) // 2
        elif labels[i] == "O" and degree[i] == 1 and used(i) == 2 and r < 0.2:
            charge[i] = -1
            explicit_h[i] = 0
        elif labels[i] == "C" and r < 0.04:
            isotope[i] = 13
            explicit_h[i] = spare(i)

    display = {}
    for e in sorted(bond_set):
        if order[e] is BondOrder.SINGLE and rng.random() < stereo_p:
            kind = BondDisplay.BEGIN_WEDGE if rng.random() < 0.5 else BondDisplay.BEGIN_DASH
            display[e] = (kind, rng.random() < 0.5)

    atoms = [
        AtomNode(
            i, labels[i], charge[i], isotope[i], explicit_h[i], aromatic[i],
            (round(lat.pos[i][0], 4), round(lat.pos[i][1], 4)),
        )
        for i in range(n)
    ]
    bonds = []
    for e in sorted(bond_set):
        a, b = e
        kind, flip = display.get(e, (BondDisplay.PLAIN, False))
        if flip:
            a, b = b, a
        bonds.append(BondEdge(a, b, order[e], kind))
    if extra:
        x = round(max(p[0] for p in lat.pos) + 1.5, 4)
        label, q = rng.choice([("Cl", -1), ("Na", 1), ("Br", -1)])
        atoms.append(AtomNode(n, label, q, None, 0, False, (x, 0.0)))
    # shuffle atom order so index order carries no structure
    perm = list(range(len(atoms)))
    rng.shuffle(perm)
    return ensure_valid(permute(MolGraph(tuple(atoms), tuple(bonds)), perm))


def corpus(seed: int, count: int, min_atoms: int = 5, max_atoms: int = 20) -> list[MolGraph]:
    rng = random.Random(seed)
    return [random_molecule(rng, min_atoms, max_atoms) for _ in range(count)]


@dataclass(frozen=True)
class RectifierFixture:
    expanded: MolGraph
    tokens: tuple[OcrToken, ...]
    expected: MolGraph
    reject_reason: str | None = None


def _free_lattice_points(graph: MolGraph, i: int, occupied) -> list[tuple[float, float]]:
    """Unoccupied lattice vertices next to atom ``i`` (sublattice read off a bonded neighbor)."""
    x, y = graph.atoms[i].coords
    nbrs = graph.adjacency[i]
    if not nbrs:
        return []
    ox, oy = graph.atoms[nbrs[0][0]].coords
    sign = 1
    if any(abs(ox - x + dx) < 1e-3 and abs(oy - y + dy) < 1e-3 for dx, dy in _DIRS):
        sign = -1
    points = [(round(x + sign * dx, 4), round(y + sign * dy, 4)) for dx, dy in _DIRS]
    return [p for p in points if _key(p) not in occupied]


def _attach_superatoms(rng: random.Random, base: MolGraph, labels: list[str]) -> MolGraph | None:
    """Hang each label off a distinct atom with spare valence, on a free lattice vertex."""
    occupied = {_key(a.coords) for a in base.atoms}
    atoms = list(base.atoms)
    bonds = list(base.bonds)
    taken: set[int] = set()
    for label in labels:
        options = []
        for a in base.atoms:
            if a.index in taken or a.aromatic or a.formal_charge or a.isotope is not None:
                continue
            if a.label not in _VALENCE or a.label in ("F", "Cl", "Br"):
                continue
            used = sum(_X2[b.order] for _, b in base.adjacency[a.index]) // 2
            if used >= _VALENCE[a.label] or base.degree(a.index) >= 3:
                continue
            for p in _free_lattice_points(base, a.index, occupied):
                options.append((a.index, p))
        if not options:
            return None
        host, p = rng.choice(sorted(options))
        taken.add(host)
        occupied.add(_key(p))
        k = len(atoms)
        atoms.append(AtomNode(k, label, coords=p))
        bonds.append(BondEdge(host, k))
    return ensure_valid(MolGraph(tuple(atoms), tuple(bonds)))


def rectifier_fixture(
    rng: random.Random,
    table: SuperatomTable | None = None,
    labels: tuple[str, ...] = RECTIFIER_LABELS,
    multi_component: bool = False,
) -> RectifierFixture:
    """An expanded graph with planted OCR tokens and the expected rectified graph."""
    table = table or default_superatom_table()
    while True:
        base = random_molecule(rng, 4, 12, superatom_p=0.0, extra_component_p=0.0)
        chosen = [rng.choice(labels) for _ in range(rng.choice((1, 1, 2)))]
        expected = _attach_superatoms(rng, base, chosen)
        if expected is not None:
            break
    expanded = expand_all(expected, table)
    tokens = []
    for a in expected.atoms:
        if a.label in table:
            x, y = a.coords
            tokens.append(OcrToken(a.label, (x - 0.25, y - 0.2, x + 0.25, y + 0.2), 0.9))
    reason = None
    if multi_component:
        x = max(a.coords[0] for a in expanded.atoms) + 2.0
        ion = AtomNode(expanded.num_atoms, "Na", 1, None, 0, False, (x, 0.0))
        expanded = MolGraph(expanded.atoms + (ion,), expanded.bonds)
        reason = "multiple structures: 2"
    return RectifierFixture(expanded, tuple(tokens), expected, reason)


def endpoint_superatom_family(count: int = 12) -> list[tuple[MolGraph, MolGraph]]:
    """Chains capped by two different superatoms, paired with a reversed-numbering copy.

    Both members of a pair are the same molecule; a canonicalizer that
    ignores superatom labels may still number them differently.
    """
    pairs = [("Ph", "Et"), ("Me", "Boc"), ("R1", "Ph"), ("Cbz", "OMe"), ("tBu", "Bn"), ("CF3", "Ph")]
    out = []
    k = 0
    while len(out) < count:
        left, right = pairs[k % len(pairs)]
        chain = 1 + (k // len(pairs)) % 4 + (k % 2)
        labels = [left] + ["C"] * chain + [right]
        atoms = tuple(
            AtomNode(i, lab, coords=(float(i) * _S3 * 2, 0.5 * (i % 2))) for i, lab in enumerate(labels)
        )
        bonds = tuple(BondEdge(i, i + 1) for i in range(len(labels) - 1))
        gt = MolGraph(atoms, bonds)
        pred = permute(gt, list(reversed(range(len(labels)))))
        out.append((gt, pred))
        k += 1
    return out


def strip_for_smiles(graph: MolGraph) -> MolGraph:
    """Copy without coordinates and with plain bond display (what SMILES can carry)."""
    atoms = tuple(replace(a, coords=None) for a in graph.atoms)
    bonds = tuple(replace(b, display=BondDisplay.PLAIN) for b in graph.bonds)
    return MolGraph(atoms, bonds)

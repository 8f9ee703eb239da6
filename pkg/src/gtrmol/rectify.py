"""Ground-truth rectification: screen multi-molecule samples and collapse
expanded functional groups into superatoms where an OCR token says the
drawing shows an abbreviation.

Token boxes are in the same frame as the graph coordinates (chemical
frame, y up). Matching is local: only atoms within ``radius`` of the box
center can anchor a match.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from importlib import resources
from typing import Iterable, Iterator

from .canon import canonicalize_graph
from .errors import SmilesError, TableError
from .graph import AtomNode, BondEdge, MolGraph, connected_components, ensure_valid, median_bond_length
from .smiles import parse_smiles

RADIUS_FACTOR = 1.5


@dataclass(frozen=True)
class SuperatomEntry:
    abbreviation: str
    expansion: str
    attachment_count: int = 1

    @property
    def pattern(self) -> "_Pattern":
        return _pattern_for(self.expansion)

    @property
    def size(self) -> int:
        """Heavy atoms in the expansion (marker excluded)."""
        return self.pattern.graph.num_atoms


@dataclass(frozen=True)
class _Pattern:
    graph: MolGraph  # expansion without the marker
    root: int
    attach_order: object


_PATTERN_CACHE: dict[str, _Pattern] = {}


def _pattern_for(expansion: str) -> _Pattern:
    cached = _PATTERN_CACHE.get(expansion)
    if cached is not None:
        return cached
    g = parse_smiles(expansion)
    stars = [a.index for a in g.atoms if a.label == "*"]
    if len(stars) != 1:
        raise ValueError(f"expansion must contain exactly one '*', found {len(stars)}")
    star = stars[0]
    if g.degree(star) != 1:
        raise ValueError("attachment marker must have exactly one neighbor")
    (root, bond), = g.adjacency[star]
    keep = [i for i in range(g.num_atoms) if i != star]
    new = {old: k for k, old in enumerate(keep)}
    atoms = tuple(replace(g.atoms[old], index=new[old]) for old in keep)
    bonds = tuple(
        replace(b, from_idx=new[b.from_idx], to_idx=new[b.to_idx]) for b in g.bonds if star not in b.pair
    )
    pat = _Pattern(MolGraph(atoms, bonds), new[root], bond.order)
    if len(connected_components(pat.graph)) != 1:
        raise ValueError("expansion must be connected")
    _PATTERN_CACHE[expansion] = pat
    return pat


@dataclass
class SuperatomTable:
    entries: dict[str, SuperatomEntry] = field(default_factory=dict)

    def __contains__(self, abbreviation: str) -> bool:
        return abbreviation in self.entries

    def __getitem__(self, abbreviation: str) -> SuperatomEntry:
        return self.entries[abbreviation]

    def __iter__(self) -> Iterator[SuperatomEntry]:
        return iter(self.entries.values())

    def __len__(self) -> int:
        return len(self.entries)

    def get(self, abbreviation: str) -> SuperatomEntry | None:
        return self.entries.get(abbreviation)


def load_superatom_table(source: str) -> SuperatomTable:
    """Parse ``abbrev<TAB>expansion[<TAB>attachment_count]`` lines.

    Blank lines and ``#`` comments are skipped.
    """
    table = SuperatomTable()
    for lineno, raw in enumerate(source.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        cols = [c.strip() for c in line.split("\t")]
        if len(cols) not in (2, 3) or not all(cols):
            raise TableError("expected 'abbreviation<TAB>expansion'", lineno)
        abbrev, expansion = cols[0], cols[1]
        count = 1
        if len(cols) == 3:
            try:
                count = int(cols[2])
            except ValueError:
                raise TableError(f"malformed attachment count {cols[2]!r}", lineno) from None
        if count != 1:
            raise TableError(f"only single-attachment groups are supported ({abbrev}: {count})", lineno)
        if abbrev in table.entries:
            raise TableError(f"duplicate abbreviation {abbrev!r}", lineno)
        try:
            _pattern_for(expansion)
        except (SmilesError, ValueError) as exc:
            raise TableError(f"bad expansion for {abbrev!r}: {exc}", lineno) from None
        table.entries[abbrev] = SuperatomEntry(abbrev, expansion, count)
    return table


def default_table_text() -> str:
    return resources.files("gtrmol").joinpath("data/superatoms.tsv").read_text(encoding="utf-8")


def default_superatom_table() -> SuperatomTable:
    return load_superatom_table(default_table_text())


@dataclass(frozen=True)
class OcrToken:
    text: str
    bbox: tuple[float, float, float, float]
    confidence: float | None = None

    def __post_init__(self):
        x0, y0, x1, y1 = self.bbox
        if x0 > x1 or y0 > y1:
            raise ValueError("bbox must satisfy x0 <= x1 and y0 <= y1")
        if self.confidence is not None and not 0.0 <= self.confidence <= 1.0:
            raise ValueError("confidence must be in [0, 1]")

    @property
    def center(self) -> tuple[float, float]:
        x0, y0, x1, y1 = self.bbox
        return ((x0 + x1) / 2, (y0 + y1) / 2)


@dataclass(frozen=True)
class ScreenResult:
    accepted: bool
    reason: str | None = None


def screen_single_molecule(graph: MolGraph) -> ScreenResult:
    k = len(connected_components(graph))
    if k == 1:
        return ScreenResult(True)
    return ScreenResult(False, f"multiple structures: {k}")


@dataclass(frozen=True)
class AbbreviationMatch:
    atoms: frozenset[int]
    attachment: int  # graph atom bonded to the rest of the molecule
    mapping: tuple[int, ...]  # pattern atom -> graph atom


def _atoms_compatible(p: AtomNode, g: AtomNode) -> bool:
    return (
        p.label == g.label
        and p.formal_charge == g.formal_charge
        and p.aromatic == g.aromatic
        and p.isotope == g.isotope
    )


def _rooted_matches(graph: MolGraph, pat: _Pattern, root: int) -> Iterator[tuple[int, ...]]:
    """All embeddings of the pattern with its root on ``root`` whose only
    bond leaving the matched set is one at the root."""
    pg = pat.graph
    if not _atoms_compatible(pg.atoms[pat.root], graph.atoms[root]):
        return
    if graph.degree(root) != pg.degree(pat.root) + 1:
        return
    order = [pat.root]
    parent = {pat.root: -1}
    for x in order:
        for y, _ in pg.adjacency[x]:
            if y not in parent:
                parent[y] = x
                order.append(y)
    m = len(order)
    mapping = [-1] * pg.num_atoms
    used: set[int] = set()
    mapping[pat.root] = root
    used.add(root)

    def extend(k: int) -> Iterator[tuple[int, ...]]:
        if k == m:
            yield tuple(mapping)
            return
        x = order[k]
        gp = mapping[parent[x]]
        for cand, _ in graph.adjacency[gp]:
            if cand in used:
                continue
            if not _atoms_compatible(pg.atoms[x], graph.atoms[cand]):
                continue
            if graph.degree(cand) != pg.degree(x):
                continue
            ok = True
            for y, pb in pg.adjacency[x]:
                gy = mapping[y]
                if gy < 0:
                    continue
                gb = graph.bond_between(cand, gy)
                if gb is None or gb.order != pb.order:
                    ok = False
                    break
            if not ok:
                continue
            mapping[x] = cand
            used.add(cand)
            yield from extend(k + 1)
            mapping[x] = -1
            used.discard(cand)

    for found in extend(1):
        # degree equalities leave exactly one external bond, at the root
        ext = [b for nb, b in graph.adjacency[root] if nb not in set(found)]
        if len(ext) == 1 and ext[0].order == pat.attach_order:
            yield found


def match_abbreviation(
    graph: MolGraph,
    entry: SuperatomEntry,
    token: OcrToken,
    radius: float | None = None,
) -> AbbreviationMatch | None:
    """First embedding of ``entry`` that contains an atom near the token.

    Anchors (atoms within ``radius`` of the box center) are tried nearest
    first; for each anchor, roots are tried in order of distance from the
    center.
    """
    if not graph.atoms:
        return None
    if not graph.has_coords:
        raise ValueError("abbreviation matching needs coordinates on every atom")
    if radius is None:
        radius = RADIUS_FACTOR * median_bond_length(graph)
    cx, cy = token.center
    dist = [math.hypot(a.coords[0] - cx, a.coords[1] - cy) for a in graph.atoms]
    by_distance = sorted(range(graph.num_atoms), key=lambda i: (dist[i], i))
    anchors = [i for i in by_distance if dist[i] <= radius]
    pat = entry.pattern
    for anchor in anchors:
        for root in by_distance:
            for mapping in _rooted_matches(graph, pat, root):
                if anchor in mapping:
                    return AbbreviationMatch(frozenset(mapping), root, mapping)
    return None


def collapse_superatom(
    graph: MolGraph,
    matched: Iterable[int],
    label: str,
    anchor: tuple[float, float] | None,
) -> MolGraph:
    """Replace ``matched`` by one superatom node placed at ``anchor``.

    The new node takes the attachment atom's place in the atom order; other
    atoms keep their relative order.
    """
    matched = set(matched)
    if not matched or not matched <= set(range(graph.num_atoms)):
        raise ValueError("matched set must be non-empty and index existing atoms")
    external = [b for b in graph.bonds if (b.from_idx in matched) != (b.to_idx in matched)]
    if len(external) != 1:
        raise ValueError(f"ambiguous attachment: {len(external)} external bonds")
    ext = external[0]
    root = ext.from_idx if ext.from_idx in matched else ext.to_idx
    new_index: dict[int, int] = {}
    atoms: list[AtomNode] = []
    for a in graph.atoms:
        if a.index in matched and a.index != root:
            continue
        k = len(atoms)
        new_index[a.index] = k
        if a.index == root:
            atoms.append(AtomNode(k, label, coords=anchor))
        else:
            atoms.append(replace(a, index=k))
    bonds: list[BondEdge] = []
    for b in graph.bonds:
        if b.from_idx in matched and b.to_idx in matched:
            continue
        bonds.append(replace(b, from_idx=new_index[b.from_idx], to_idx=new_index[b.to_idx]))
    return ensure_valid(MolGraph(tuple(atoms), tuple(bonds)))


@dataclass(frozen=True)
class Replacement:
    abbreviation: str
    collapsed_atoms: int
    anchor: tuple[float, float]


@dataclass(frozen=True)
class RectifiedSample:
    graph: MolGraph
    smiles: str
    replacements: tuple[Replacement, ...] = ()
    status: str = "ok"
    reason: str | None = None

    @property
    def ok(self) -> bool:
        return self.status == "ok"


def _already_rectified(graph: MolGraph, label: str, token: OcrToken, radius: float) -> bool:
    cx, cy = token.center
    return any(
        a.label == label and math.hypot(a.coords[0] - cx, a.coords[1] - cy) <= radius
        for a in graph.atoms
    )


def rectify_sample(
    graph: MolGraph,
    ocr: Iterable[OcrToken],
    table: SuperatomTable,
    radius: float | None = None,
) -> RectifiedSample:
    """Screen, then collapse every table-known token's group.

    Any known token that cannot be matched rejects the whole sample.
    """
    screen = screen_single_molecule(graph)
    if not screen.accepted:
        return RectifiedSample(graph, "", status="rejected", reason=screen.reason)
    ensure_valid(graph)
    if not graph.has_coords:
        return RectifiedSample(graph, "", status="rejected", reason="missing coordinates")
    if radius is None:
        radius = RADIUS_FACTOR * median_bond_length(graph)
    current = graph
    done: list[Replacement] = []
    for token in ocr:
        text = token.text.strip()
        entry = table.get(text)
        if entry is None:
            continue
        if _already_rectified(current, text, token, radius):
            continue
        match = match_abbreviation(current, entry, token, radius)
        if match is None:
            return RectifiedSample(graph, "", status="rejected", reason=f"unmatched abbreviation: {text}")
        current = collapse_superatom(current, match.atoms, text, token.center)
        done.append(Replacement(text, len(match.atoms), token.center))
    smiles = canonicalize_graph(current).canonical_smiles
    return RectifiedSample(current, smiles, tuple(done))


def expand_superatom(
    graph: MolGraph,
    atom_index: int,
    entry: SuperatomEntry,
    spacing: float = 0.3,
) -> MolGraph:
    """Inverse of a collapse: replace a terminal superatom by its expansion.

    The root takes the superatom's slot and coordinates; the other group
    atoms are appended and laid out on a small spiral around it.
    """
    atom = graph.atoms[atom_index]
    if graph.degree(atom_index) != 1:
        raise ValueError("only terminal superatoms can be expanded")
    pat = entry.pattern
    pg = pat.graph
    others = [i for i in range(pg.num_atoms) if i != pat.root]
    slot = {pat.root: atom_index}
    slot.update({i: graph.num_atoms + k for k, i in enumerate(others)})
    atoms = list(graph.atoms)
    atoms[atom_index] = replace(pg.atoms[pat.root], index=atom_index, coords=atom.coords)
    for k, i in enumerate(others, start=1):
        coords = None
        if atom.coords is not None:
            angle = 2.399963 * k  # golden angle keeps the points apart
            r = spacing * math.sqrt(k)
            coords = (
                round(atom.coords[0] + r * math.cos(angle), 4),
                round(atom.coords[1] + r * math.sin(angle), 4),
            )
        atoms.append(replace(pg.atoms[i], index=slot[i], coords=coords))
    bonds = list(graph.bonds)
    bonds.extend(replace(b, from_idx=slot[b.from_idx], to_idx=slot[b.to_idx]) for b in pg.bonds)
    return ensure_valid(MolGraph(tuple(atoms), tuple(bonds)))


def expand_all(graph: MolGraph, table: SuperatomTable) -> MolGraph:
    """Expand every terminal atom whose label is in the table.

    Expansions only introduce element atoms that are not table keys, so
    the loop ends after one pass per superatom.
    """
    current = graph
    while True:
        target = next(
            (a.index for a in current.atoms if a.label in table and current.degree(a.index) == 1),
            None,
        )
        if target is None:
            return current
        current = expand_superatom(current, target, table[current.atoms[target].label])

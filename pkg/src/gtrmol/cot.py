"""Graph-traversal chain-of-thought text: encode, render, parse, decode.

Line grammar (full definition in docs/cot_grammar.md)::

    <graph>
    [mode atoms-then-bonds]
    atom <idx> [<isotope>]<label>[+n|-n] [H<n>] [@|@@] [(<x>,<y>)]
    bond <kind> <from>-><to> [ring] [rev]
    </graph>
    SMILES: <canonical smiles>

Aromatic atoms use lowercase element labels (``c``, ``n``, ``se``).
``kind`` is one of single/double/triple/aromatic/wedge/dash. In traversal
order ``from->to`` follows the walk; ``rev`` marks a wedge or dash whose
narrow end is at ``to``. Coordinates are quantized to a 0..999 grid with
y growing downward (reading order).
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Union

from .errors import CotError
from .graph import AtomNode, BondDisplay, BondEdge, BondOrder, MolGraph, ensure_valid

GRID = 999
MODE_ATOMS_THEN_BONDS = "atoms-then-bonds"

_KIND_OF = {
    (BondOrder.SINGLE, BondDisplay.PLAIN): "single",
    (BondOrder.DOUBLE, BondDisplay.PLAIN): "double",
    (BondOrder.TRIPLE, BondDisplay.PLAIN): "triple",
    (BondOrder.AROMATIC, BondDisplay.PLAIN): "aromatic",
    (BondOrder.SINGLE, BondDisplay.BEGIN_WEDGE): "wedge",
    (BondOrder.SINGLE, BondDisplay.BEGIN_DASH): "dash",
}
_KIND_TO = {v: k for k, v in _KIND_OF.items()}
_AROMATIC_LABELS = {"b", "c", "n", "o", "p", "s", "se", "as"}

_ATOM_RE = re.compile(r"atom\s+(\d+)\s+(\S+)(.*)\Z")
_BOND_RE = re.compile(r"bond\s+(\S+)\s+(\d+)\s*->\s*(\d+)(.*)\Z")
_COORD_RE = re.compile(r"\(\s*([^,()]*?)\s*,\s*([^,()]*?)\s*\)\s*\Z")
_LABEL_RE = re.compile(r"(?P<iso>\d+)?(?P<label>\*|[A-Za-z][A-Za-z0-9']*?)(?P<chg>[+-]\d+)?\Z")


@dataclass(frozen=True)
class VisitAtom:
    atom_index: int
    label: str
    charge: int = 0
    coords: tuple[int, int] | None = None
    isotope: int | None = None
    explicit_h: int | None = None
    aromatic: bool = False
    chirality: str | None = None


@dataclass(frozen=True)
class TraverseBond:
    kind: str
    from_index: int
    to_index: int
    closes_ring: bool = False
    reversed_stereo: bool = False


TraversalStep = Union[VisitAtom, TraverseBond]


@dataclass(frozen=True)
class CotScript:
    steps: tuple[TraversalStep, ...] = ()
    atoms_then_bonds: bool = False


@dataclass(frozen=True)
class ResponseText:
    cot_block: str
    smiles_line: str

    @property
    def text(self) -> str:
        if not self.cot_block:
            return self.smiles_line
        return f"{self.cot_block}\n{self.smiles_line}"


def quantize(graph: MolGraph) -> list[tuple[int, int]] | None:
    """Per-atom grid coordinates, or None for coordinate-free graphs.

    One scale for both axes (aspect preserved), each axis centered on the
    grid, y flipped so the top of the drawing has the smallest value.
    """
    if not graph.has_coords:
        return None
    xs = [a.coords[0] for a in graph.atoms]
    ys = [a.coords[1] for a in graph.atoms]
    span = max(max(xs) - min(xs), max(ys) - min(ys))
    cx = (max(xs) + min(xs)) / 2
    cy = (max(ys) + min(ys)) / 2
    half = GRID / 2
    if span == 0:
        return [(round(half), round(half)) for _ in graph.atoms]
    scale = GRID / span
    return [
        (
            min(GRID, max(0, round(half + (x - cx) * scale))),
            min(GRID, max(0, round(half - (y - cy) * scale))),
        )
        for x, y in zip(xs, ys)
    ]


def _visit_keys(graph: MolGraph, grid) -> list[tuple]:
    if grid is not None:
        return [(qy, qx) for qx, qy in grid]
    from .canon import canonical_ranks

    # coordinate-free graphs: canonical ranks stand in for reading order
    return [(r,) for r in canonical_ranks(graph)]


def _atom_step(atom: AtomNode, new_index: int, grid) -> VisitAtom:
    return VisitAtom(
        atom_index=new_index,
        label=atom.label,
        charge=atom.formal_charge,
        coords=None if grid is None else grid[atom.index],
        isotope=atom.isotope,
        explicit_h=atom.explicit_h,
        aromatic=atom.aromatic,
        chirality=atom.chirality,
    )


def _bond_step(bond: BondEdge, u: int, new_u: int, new_v: int, ring: bool) -> TraverseBond:
    rev = bond.display is not BondDisplay.PLAIN and bond.from_idx != u
    return TraverseBond(_KIND_OF[(bond.order, bond.display)], new_u, new_v, ring, rev)


def encode_cot(graph: MolGraph) -> CotScript:
    """Depth-first walk emitting interleaved atom and bond steps.

    Starts at the top-left atom; neighbors are explored in reading order
    (grid y, then x). A bond back to an already visited atom is emitted as
    a ring closure when first met. Atoms are renumbered in visit order.
    """
    ensure_valid(graph)
    n = graph.num_atoms
    grid = quantize(graph)
    keys = _visit_keys(graph, grid)
    adj = [sorted(graph.adjacency[i], key=lambda nb: (keys[nb[0]], nb[0])) for i in range(n)]
    new_index = [-1] * n
    emitted: set[tuple[int, int]] = set()
    steps: list[TraversalStep] = []
    counter = 0
    for start in sorted(range(n), key=lambda i: (keys[i], i)):
        if new_index[start] >= 0:
            continue
        new_index[start] = counter
        counter += 1
        steps.append(_atom_step(graph.atoms[start], new_index[start], grid))
        stack = [(start, iter(adj[start]))]
        while stack:
            u, it = stack[-1]
            for v, bond in it:
                if bond.pair in emitted:
                    continue
                emitted.add(bond.pair)
                if new_index[v] >= 0:
                    steps.append(_bond_step(bond, u, new_index[u], new_index[v], True))
                    continue
                new_index[v] = counter
                counter += 1
                steps.append(_bond_step(bond, u, new_index[u], new_index[v], False))
                steps.append(_atom_step(graph.atoms[v], new_index[v], grid))
                stack.append((v, iter(adj[v])))
                break
            else:
                stack.pop()
    return CotScript(tuple(steps))


def atoms_then_bonds_script(graph: MolGraph) -> CotScript:
    ensure_valid(graph)
    grid = quantize(graph)
    steps: list[TraversalStep] = [_atom_step(a, a.index, grid) for a in graph.atoms]
    bond_steps = []
    for b in graph.bonds:
        if b.display is BondDisplay.PLAIN:
            u, v = sorted((b.from_idx, b.to_idx))
        else:
            u, v = b.from_idx, b.to_idx
        bond_steps.append(TraverseBond(_KIND_OF[(b.order, b.display)], u, v))
    bond_steps.sort(key=lambda s: (s.from_index, s.to_index))
    return CotScript(tuple(steps + bond_steps), atoms_then_bonds=True)


def _label_text(step: VisitAtom) -> str:
    label = step.label.lower() if step.aromatic else step.label
    iso = "" if step.isotope is None else str(step.isotope)
    charge = f"{step.charge:+d}" if step.charge else ""
    return f"{iso}{label}{charge}"


def render_step(step: TraversalStep) -> str:
    if isinstance(step, VisitAtom):
        parts = ["atom", str(step.atom_index), _label_text(step)]
        if step.explicit_h is not None:
            parts.append(f"H{step.explicit_h}")
        if step.chirality:
            parts.append(step.chirality)
        if step.coords is not None:
            parts.append(f"({step.coords[0]},{step.coords[1]})")
        return " ".join(parts)
    line = f"bond {step.kind} {step.from_index}->{step.to_index}"
    if step.closes_ring:
        line += " ring"
    if step.reversed_stereo:
        line += " rev"
    return line


def render_cot_text(script: CotScript) -> str:
    lines = ["<graph>"]
    if script.atoms_then_bonds:
        lines.append(f"mode {MODE_ATOMS_THEN_BONDS}")
    lines.extend(render_step(s) for s in script.steps)
    lines.append("</graph>")
    return "\n".join(lines)


def encode_atoms_then_bonds(graph: MolGraph) -> str:
    """All atoms in index order, then all bonds in (from, to) order."""
    return render_cot_text(atoms_then_bonds_script(graph))


def _parse_int(text: str, lineno: int, what: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise CotError(f"non-integer {what} {text!r}", lineno) from None


def _parse_atom_line(line: str, lineno: int) -> VisitAtom:
    m = _ATOM_RE.match(line)
    if m is None:
        raise CotError("malformed atom line", lineno)
    idx = int(m.group(1))
    rest = m.group(3)
    coords = None
    c = _COORD_RE.search(rest)
    if c is not None:
        coords = (_parse_int(c.group(1), lineno, "coordinate"), _parse_int(c.group(2), lineno, "coordinate"))
        rest = rest[: c.start()]
    elif "(" in rest or ")" in rest:
        raise CotError("malformed coordinates", lineno)
    lab = _LABEL_RE.match(m.group(2))
    if lab is None:
        raise CotError(f"malformed atom label {m.group(2)!r}", lineno)
    label = lab.group("label")
    aromatic = label in _AROMATIC_LABELS
    if aromatic:
        label = label.capitalize()
    explicit_h = None
    chirality = None
    for tok in rest.split():
        if tok in ("@", "@@") and chirality is None:
            chirality = tok
        elif re.fullmatch(r"H\d+", tok) and explicit_h is None:
            explicit_h = int(tok[1:])
        else:
            raise CotError(f"unexpected token {tok!r} in atom line", lineno)
    iso = lab.group("iso")
    chg = lab.group("chg")
    return VisitAtom(
        atom_index=idx,
        label=label,
        charge=int(chg) if chg else 0,
        coords=coords,
        isotope=int(iso) if iso else None,
        explicit_h=explicit_h,
        aromatic=aromatic,
        chirality=chirality,
    )


def _parse_bond_line(line: str, lineno: int) -> TraverseBond:
    m = _BOND_RE.match(line)
    if m is None:
        raise CotError("malformed bond line", lineno)
    kind = m.group(1).lower()
    if kind not in _KIND_TO:
        raise CotError(f"unknown bond kind {m.group(1)!r}", lineno)
    flags = m.group(4).split()
    for f in flags:
        if f not in ("ring", "rev"):
            raise CotError(f"unexpected token {f!r} in bond line", lineno)
    return TraverseBond(kind, int(m.group(2)), int(m.group(3)), "ring" in flags, "rev" in flags)


def _step_lines(text: str) -> tuple[list[tuple[int, str]], bool]:
    """Numbered step lines of the graph block and whether a block was found."""
    lines = text.splitlines()
    stripped = [ln.strip() for ln in lines]
    if "<graph>" in stripped:
        start = stripped.index("<graph>")
        try:
            end = stripped.index("</graph>", start + 1)
        except ValueError:
            raise CotError("unterminated <graph> block", len(lines)) from None
        body = [(i + 1, stripped[i]) for i in range(start + 1, end)]
        return [(n, s) for n, s in body if s], True
    body = []
    for i, s in enumerate(stripped):
        if not s or s.upper().startswith("SMILES:") or s == "</graph>":
            continue
        body.append((i + 1, s))
    return body, False


def parse_cot_text(text: str | bytes) -> CotScript:
    """Parse CoT text into steps. Lines outside the graph block are ignored."""
    if isinstance(text, bytes):
        text = text.decode("utf-8", errors="replace")
    body, has_block = _step_lines(text)
    if not body and not has_block:
        raise CotError("no steps", 1)
    return _parse_with_lines(body)[0]


def decode_cot(text: str | bytes, warnings: list[str] | None = None) -> MolGraph:
    """Rebuild a MolGraph from CoT text.

    Structural problems raise CotError naming the line. Recoverable issues
    (duplicate bond lines, a tree bond to an already visited atom) are
    appended to ``warnings`` when a list is given.
    """
    if isinstance(text, bytes):
        text = text.decode("utf-8", errors="replace")
    body, has_block = _step_lines(text)
    if not body and not has_block:
        raise CotError("no steps", 1)
    script, linenos = _parse_with_lines(body)
    return _replay(script, linenos, warnings if warnings is not None else [])


def _parse_with_lines(body: list[tuple[int, str]]) -> tuple[CotScript, list[int]]:
    atb = False
    steps: list[TraversalStep] = []
    linenos: list[int] = []
    for k, (lineno, line) in enumerate(body):
        keyword = line.split(None, 1)[0].lower()
        if keyword == "mode":
            if k != 0 or line.split() != ["mode", MODE_ATOMS_THEN_BONDS]:
                raise CotError("mode header must be the first line and name a known mode", lineno)
            atb = True
            continue
        if keyword == "atom":
            steps.append(_parse_atom_line(line, lineno))
        elif keyword == "bond":
            steps.append(_parse_bond_line(line, lineno))
        else:
            raise CotError(f"unknown step keyword {keyword!r}", lineno)
        linenos.append(lineno)
    return CotScript(tuple(steps), atb), linenos


def _replay(script: CotScript, linenos: list[int], warnings: list[str]) -> MolGraph:
    atoms: dict[int, tuple[VisitAtom, int]] = {}
    bonds: dict[tuple[int, int], BondEdge] = {}
    bond_lines: list[tuple[TraverseBond, int]] = []
    expect_atom: int | None = None
    steps = script.steps
    for k, step in enumerate(steps):
        lineno = linenos[k]
        if isinstance(step, VisitAtom):
            if step.atom_index in atoms:
                raise CotError(f"atom {step.atom_index} declared twice", lineno)
            if expect_atom is not None and step.atom_index != expect_atom:
                raise CotError(f"expected atom {expect_atom} after its bond, got atom {step.atom_index}", lineno)
            atoms[step.atom_index] = (step, lineno)
            expect_atom = None
            continue
        if script.atoms_then_bonds:
            bond_lines.append((step, lineno))
            continue
        if not atoms:
            raise CotError("the first step must be an atom", lineno)
        if expect_atom is not None:
            raise CotError(f"bond must be followed by atom {expect_atom}", lineno)
        if step.from_index not in atoms:
            raise CotError(f"bond from undeclared atom {step.from_index}", lineno)
        if step.closes_ring:
            if step.to_index not in atoms:
                raise CotError(f"ring bond to undeclared atom {step.to_index}", lineno)
        elif step.to_index in atoms:
            warnings.append(f"line {lineno}: tree bond to visited atom {step.to_index}; read as ring closure")
        else:
            expect_atom = step.to_index
        bond_lines.append((step, lineno))
    if expect_atom is not None:
        raise CotError(f"bond must be followed by atom {expect_atom}", linenos[-1])

    n = len(atoms)
    if sorted(atoms) != list(range(n)):
        missing = next(i for i in range(n + 1) if i not in atoms)
        raise CotError(f"atom indices are not contiguous (missing {missing})", linenos[-1])
    with_coords = [atoms[i][0].coords is not None for i in range(n)]
    if any(with_coords) and not all(with_coords):
        bad = with_coords.index(not with_coords[0])
        raise CotError("mixed coordinate presence", atoms[bad][1])

    for step, lineno in bond_lines:
        u, v = step.from_index, step.to_index
        for idx in (u, v):
            if idx not in atoms:
                raise CotError(f"bond references undeclared atom {idx}", lineno)
        if u == v:
            raise CotError(f"bond joins atom {u} to itself", lineno)
        key = (u, v) if u < v else (v, u)
        if key in bonds:
            warnings.append(f"line {lineno}: duplicate bond {u}-{v} skipped")
            continue
        order, display = _KIND_TO[step.kind]
        if display is not BondDisplay.PLAIN and step.reversed_stereo:
            u, v = v, u
        bonds[key] = BondEdge(u, v, order, display)

    out_atoms = []
    for i in range(n):
        s = atoms[i][0]
        coords = None if s.coords is None else (float(s.coords[0]), float(GRID - s.coords[1]))
        out_atoms.append(
            AtomNode(i, s.label, s.charge, s.isotope, s.explicit_h, s.aromatic, coords, s.chirality)
        )
    return MolGraph(tuple(out_atoms), tuple(bonds.values()))


def render_response(graph: MolGraph, mode: str = "graph-traversal") -> ResponseText:
    """CoT block followed by the SMILES line.

    ``mode`` is graph-traversal, atoms-then-bonds or direct-smiles (no CoT).
    """
    from .canon import canonicalize_graph

    smiles_line = "SMILES: " + canonicalize_graph(graph).canonical_smiles
    if mode == "graph-traversal":
        block = render_cot_text(encode_cot(graph))
    elif mode == MODE_ATOMS_THEN_BONDS:
        block = encode_atoms_then_bonds(graph)
    elif mode == "direct-smiles":
        block = ""
    else:
        raise ValueError(f"unknown CoT mode {mode!r}")
    return ResponseText(block, smiles_line)


def extract_smiles(text: str) -> str | None:
    """The SMILES from the last ``SMILES:`` line of a response, if any."""
    found = None
    for line in text.splitlines():
        s = line.strip()
        if s.upper().startswith("SMILES:"):
            found = s[len("SMILES:"):].strip()
    return found

"""MDL MOL V2000 connection tables.

Writer layout (fixed columns, one record per line)::

    <title>
      gtrmol          2D
    <blank comment>
    aaabbb  0  0  0  0  0  0  0  0999 V2000
    xxxxx.xxxxyyyyy.yyyyzzzzz.zzzz sss dd ccc  0  hhh  0  0  0  0  0  0  0  0  0
    111222tttsss  0  0  0
    M  CHGnn8 aaa vvv ...
    M  ISOnn8 aaa vvv ...
    A  aaa
    <alias text>
    M  END

Superatoms are written with symbol ``*`` plus an alias record. A fixed
hydrogen count is stored in the hhh column as count + 1. z is written as 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from .elements import AROMATIC_ELEMENTS, is_superatom
from .errors import MolfileError
from .graph import AtomNode, BondDisplay, BondEdge, BondOrder, MolGraph, validate

_ORDER_IN = {1: BondOrder.SINGLE, 2: BondOrder.DOUBLE, 3: BondOrder.TRIPLE, 4: BondOrder.AROMATIC}
_ORDER_OUT = {v: k for k, v in _ORDER_IN.items()}
_STEREO_IN = {0: BondDisplay.PLAIN, 1: BondDisplay.BEGIN_WEDGE, 6: BondDisplay.BEGIN_DASH}
_STEREO_OUT = {v: k for k, v in _STEREO_IN.items()}
_LEGACY_CHARGE = {0: 0, 1: 3, 2: 2, 3: 1, 4: 0, 5: -1, 6: -2, 7: -3}
_LEGACY_CODE = {3: 1, 2: 2, 1: 3, -1: 5, -2: 6, -3: 7}


@dataclass(frozen=True)
class MolfileDocument:
    title: str
    graph: MolGraph
    properties: tuple[str, ...] = field(default=())

    @property
    def counts(self) -> tuple[int, int]:
        return self.graph.num_atoms, self.graph.num_bonds


def _int_field(line: str, start: int, stop: int, lineno: int, what: str, default: int | None = None) -> int:
    raw = line[start:stop].strip()
    if not raw:
        if default is not None:
            return default
        raise MolfileError(f"missing {what}", lineno)
    try:
        return int(raw)
    except ValueError:
        raise MolfileError(f"malformed {what} {raw!r}", lineno) from None


def _float_field(line: str, start: int, stop: int, lineno: int, what: str) -> float:
    raw = line[start:stop].strip()
    try:
        value = float(raw)
    except ValueError:
        raise MolfileError(f"malformed {what} {raw!r}", lineno) from None
    if not math.isfinite(value):
        raise MolfileError(f"non-finite {what}", lineno)
    return value


def _pairs(line: str, lineno: int) -> list[tuple[int, int]]:
    """Entries of an ``M  CHG``/``M  ISO`` style line."""
    count = _int_field(line, 6, 9, lineno, "entry count")
    if not 0 <= count <= 8:
        raise MolfileError(f"entry count {count} out of range", lineno)
    out = []
    for k in range(count):
        base = 9 + 8 * k
        atom = _int_field(line, base, base + 4, lineno, "atom number")
        value = _int_field(line, base + 4, base + 8, lineno, "property value")
        out.append((atom, value))
    return out


def parse_molfile(text: str | bytes) -> MolfileDocument:
    """Read one V2000 record. Errors carry 1-based line numbers."""
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError:
            text = text.decode("latin-1")
    lines = text.splitlines()
    if len(lines) < 4:
        raise MolfileError("truncated header: counts line missing", 4)
    title = lines[0]
    counts = lines[3]
    if "V3000" in counts:
        raise MolfileError("V3000 molfiles are not supported", 4)
    natoms = _int_field(counts, 0, 3, 4, "atom count")
    nbonds = _int_field(counts, 3, 6, 4, "bond count")
    if natoms < 0 or nbonds < 0:
        raise MolfileError("negative counts", 4)
    if len(lines) < 4 + natoms + nbonds:
        raise MolfileError("truncated atom/bond block", len(lines) + 1)

    atoms: list[AtomNode] = []
    legacy: list[int] = []
    for k in range(natoms):
        lineno = 5 + k
        line = lines[4 + k]
        x = _float_field(line, 0, 10, lineno, "x coordinate")
        y = _float_field(line, 10, 20, lineno, "y coordinate")
        symbol = line[31:34].strip()
        if not symbol:
            raise MolfileError("missing atom symbol", lineno)
        code = _int_field(line, 36, 39, lineno, "charge code", default=0)
        if code not in _LEGACY_CHARGE:
            raise MolfileError(f"charge code {code} out of range", lineno)
        legacy.append(_LEGACY_CHARGE[code])
        hhh = _int_field(line, 42, 45, lineno, "hydrogen count", default=0)
        if hhh < 0:
            raise MolfileError("negative hydrogen count", lineno)
        atoms.append(AtomNode(k, symbol, coords=(x, y), explicit_h=hhh - 1 if hhh else None))

    bonds: list[BondEdge] = []
    seen: set[tuple[int, int]] = set()
    for k in range(nbonds):
        lineno = 5 + natoms + k
        line = lines[4 + natoms + k]
        a = _int_field(line, 0, 3, lineno, "first atom")
        b = _int_field(line, 3, 6, lineno, "second atom")
        if not (1 <= a <= natoms and 1 <= b <= natoms):
            raise MolfileError(f"bond references atom out of range ({a}, {b})", lineno)
        if a == b:
            raise MolfileError("bond joins an atom to itself", lineno)
        kind = _int_field(line, 6, 9, lineno, "bond type")
        if kind not in _ORDER_IN:
            raise MolfileError(f"unsupported bond type {kind}", lineno)
        stereo = _int_field(line, 9, 12, lineno, "bond stereo", default=0)
        display = _STEREO_IN.get(stereo, BondDisplay.PLAIN)
        order = _ORDER_IN[kind]
        if display is not BondDisplay.PLAIN and order is not BondOrder.SINGLE:
            display = BondDisplay.PLAIN
        pair = (min(a, b), max(a, b))
        if pair in seen:
            raise MolfileError("duplicate bond", lineno)
        seen.add(pair)
        bonds.append(BondEdge(a - 1, b - 1, order, display))

    charges: dict[int, int] | None = None
    isotopes: dict[int, int] = {}
    aliases: dict[int, str] = {}
    properties: list[str] = []
    i = 4 + natoms + nbonds
    ended = False
    while i < len(lines):
        line = lines[i]
        lineno = i + 1
        if line.startswith("M  END"):
            ended = True
            break
        if line.startswith("M  CHG"):
            charges = charges or {}
            for atom, value in _pairs(line, lineno):
                if not 1 <= atom <= natoms:
                    raise MolfileError(f"charge on atom {atom} out of range", lineno)
                charges[atom - 1] = value
        elif line.startswith("M  ISO"):
            for atom, value in _pairs(line, lineno):
                if not 1 <= atom <= natoms:
                    raise MolfileError(f"isotope on atom {atom} out of range", lineno)
                if value <= 0:
                    raise MolfileError("isotope must be positive", lineno)
                isotopes[atom - 1] = value
        elif line.startswith("A  "):
            atom = _int_field(line, 3, 6, lineno, "alias atom number")
            if not 1 <= atom <= natoms:
                raise MolfileError(f"alias on atom {atom} out of range", lineno)
            if i + 1 >= len(lines):
                raise MolfileError("alias record missing its text line", lineno + 1)
            alias = lines[i + 1].strip()
            if not alias:
                raise MolfileError("empty alias text", lineno + 1)
            aliases[atom - 1] = alias
            i += 1
        elif line.strip():
            properties.append(line)
        i += 1
    if not ended:
        raise MolfileError("missing 'M  END'", len(lines) + 1)

    final = []
    for k, atom in enumerate(atoms):
        label = aliases.get(k, atom.label)
        charge = charges.get(k, 0) if charges is not None else legacy[k]
        iso = isotopes.get(k)
        if is_superatom(label):
            iso = None
        final.append(replace(atom, label=label, formal_charge=charge, isotope=iso))
    aromatic_atoms = {
        idx for b in bonds if b.order is BondOrder.AROMATIC for idx in (b.from_idx, b.to_idx)
    }
    final = [
        replace(a, aromatic=True) if a.index in aromatic_atoms and a.label in AROMATIC_ELEMENTS else a
        for a in final
    ]
    return MolfileDocument(title, MolGraph(tuple(final), tuple(bonds)), tuple(properties))


def unsupported_properties(doc: MolfileDocument) -> list[str]:
    """Warnings for property blocks kept only as raw lines (Sgroups and the like)."""
    out = []
    for line in doc.properties:
        tag = line[:6]
        if tag == "M  STY" and "SUP" in line:
            out.append("superatom Sgroup present but not expanded; use atom aliases")
        elif tag.startswith("M  S") or tag == "M  RGP":
            out.append(f"unparsed property block {tag.strip()!r}")
    return sorted(set(out))


def _fmt_coord(v: float) -> str:
    text = f"{v:10.4f}"
    return "    0.0000" if text.strip() == "-0.0000" else text


def write_molfile(doc: MolfileDocument | MolGraph, title: str | None = None) -> str:
    """Serialize to V2000 text. Every atom needs coordinates."""
    if isinstance(doc, MolGraph):
        doc = MolfileDocument(title or "", doc)
    graph = doc.graph
    problems = validate(graph)
    if problems:
        raise ValueError(problems[0].message)
    if graph.atoms and not graph.has_coords:
        raise ValueError("molfile output requires coordinates on every atom")
    if graph.num_atoms > 999 or graph.num_bonds > 999:
        raise ValueError("V2000 is limited to 999 atoms and bonds")
    out = [doc.title.splitlines()[0] if doc.title else "", "  gtrmol          2D", ""]
    out.append(f"{graph.num_atoms:3d}{graph.num_bonds:3d}  0  0  0  0  0  0  0  0999 V2000")
    for atom in graph.atoms:
        x, y = atom.coords
        symbol = "*" if atom.is_superatom else atom.label
        code = _LEGACY_CODE.get(atom.formal_charge, 0)
        hhh = 0 if atom.explicit_h is None else atom.explicit_h + 1
        out.append(
            f"{_fmt_coord(x)}{_fmt_coord(y)}    0.0000 {symbol:<3} 0{code:3d}  0{hhh:3d}"
            "  0  0  0  0  0  0  0  0  0"
        )
    for b in graph.bonds:
        out.append(f"{b.from_idx + 1:3d}{b.to_idx + 1:3d}{_ORDER_OUT[b.order]:3d}{_STEREO_OUT[b.display]:3d}  0  0  0")
    charged = [(a.index + 1, a.formal_charge) for a in graph.atoms if a.formal_charge]
    isotopic = [(a.index + 1, a.isotope) for a in graph.atoms if a.isotope is not None]
    for tag, entries in (("CHG", charged), ("ISO", isotopic)):
        for start in range(0, len(entries), 8):
            chunk = entries[start:start + 8]
            body = "".join(f" {a:3d} {v:3d}" for a, v in chunk)
            out.append(f"M  {tag}{len(chunk):3d}{body}")
    for atom in graph.atoms:
        if atom.is_superatom:
            out.append(f"A  {atom.index + 1:3d}")
            out.append(atom.label)
    out.extend(doc.properties)
    out.append("M  END")
    return "\n".join(out) + "\n"


def split_sdf(text: str) -> list[str]:
    """Split an SD file into molfile blocks (data items are dropped)."""
    blocks = []
    for chunk in text.split("$$$$"):
        if not chunk.strip():
            continue
        chunk = chunk.lstrip("\r\n")
        end = chunk.find("M  END")
        if end >= 0:
            chunk = chunk[: end + len("M  END")] + "\n"
        blocks.append(chunk)
    return blocks

"""SMILES reader/writer with a bracket extension for superatoms (``CC[Ph]``).

The reader covers the organic subset, bracket atoms (isotope, chirality,
hydrogen count, charge, atom class), branches, ring closures including the
``%nn`` form, the ``.`` separator and the bond symbols ``- = # : / \\``.
Directional ``/`` and ``\\`` are read as plain single bonds.
"""

from __future__ import annotations

import heapq
import math
import re
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

from .elements import (
    AROMATIC_ORGANIC,
    DEFAULT_VALENCE,
    ELEMENT_SET,
    ORGANIC_SUBSET,
)
from .errors import GraphError, SmilesError
from .graph import (
    AtomNode,
    BondEdge,
    BondOrder,
    MolGraph,
    ORDER_X2,
    connected_components,
    validate,
)

_BOND_SYMBOLS = {
    "-": BondOrder.SINGLE,
    "=": BondOrder.DOUBLE,
    "#": BondOrder.TRIPLE,
    ":": BondOrder.AROMATIC,
    "/": BondOrder.SINGLE,
    "\\": BondOrder.SINGLE,
}

_BRACKET_AROMATIC = {"b", "c", "n", "o", "p", "s", "se", "as"}

# everything after the element symbol inside a bracket atom
_BRACKET_TAIL = re.compile(
    r"(?P<chir>@@?)?(?P<h>H\d*)?(?P<chg>\+{1,3}|-{1,3}|[+-]\d{1,2})?(?P<cls>:\d+)?\Z"
)
_SUPERATOM_LABEL = re.compile(r"[A-Za-z][A-Za-z0-9']*")
_SUPERATOM = re.compile(r"(?P<label>[A-Za-z][A-Za-z0-9']*)(?P<chg>[+-]\d{0,2})?\Z")


@dataclass(frozen=True)
class SmilesToken:
    kind: str  # atom | bracket | bond | open | close | ring | dot
    payload: str
    position: int


def tokenize(text: str) -> list[SmilesToken]:
    """Split SMILES text into lexemes. Lexemes concatenate back to ``text``."""
    tokens: list[SmilesToken] = []
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c == "[":
            j = text.find("]", i + 1)
            if j < 0:
                raise SmilesError("unclosed bracket atom", i)
            tokens.append(SmilesToken("bracket", text[i:j + 1], i))
            i = j + 1
        elif c in "CB" and text[i:i + 2] in ("Cl", "Br"):
            tokens.append(SmilesToken("atom", text[i:i + 2], i))
            i += 2
        elif c in "BCNOPSFI*" or c in AROMATIC_ORGANIC:
            tokens.append(SmilesToken("atom", c, i))
            i += 1
        elif c in _BOND_SYMBOLS:
            tokens.append(SmilesToken("bond", c, i))
            i += 1
        elif c == "(":
            tokens.append(SmilesToken("open", c, i))
            i += 1
        elif c == ")":
            tokens.append(SmilesToken("close", c, i))
            i += 1
        elif c == ".":
            tokens.append(SmilesToken("dot", c, i))
            i += 1
        elif c.isdigit() and c.isascii():
            tokens.append(SmilesToken("ring", c, i))
            i += 1
        elif c == "%":
            digits = text[i + 1:i + 3]
            if len(digits) != 2 or not (digits.isascii() and digits.isdigit()):
                raise SmilesError("'%' must be followed by two digits", i)
            tokens.append(SmilesToken("ring", text[i:i + 3], i))
            i += 3
        elif c == "$":
            raise SmilesError("quadruple bonds are not supported", i)
        else:
            raise SmilesError(f"unexpected character {c!r}", i)
    return tokens


def _parse_bracket(content: str, pos: int) -> AtomNode:
    """Bracket atom content (without the brackets) to an AtomNode with index -1."""
    if not content:
        raise SmilesError("empty bracket atom", pos)
    if content == "*":
        return AtomNode(-1, "*")
    m = re.match(r"\d+", content)
    isotope = None
    rest = content
    if m:
        isotope = int(m.group())
        rest = content[m.end():]
        if isotope == 0:
            raise SmilesError("isotope must be positive", pos + 1)
    candidates = []
    two, one = rest[:2], rest[:1]
    if two in ELEMENT_SET:
        candidates.append((two, False))
    if two in ("se", "as"):
        candidates.append((two.capitalize(), True))
    if one in ELEMENT_SET:
        candidates.append((one, False))
    if one in AROMATIC_ORGANIC:
        candidates.append((one.upper(), True))
    if one == "*":
        candidates.append(("*", False))
    charge_problem = False
    for symbol, aromatic in candidates:
        width = 1 if symbol == "*" else len(symbol)
        tail = rest[width:]
        t = _BRACKET_TAIL.match(tail)
        if t is None:
            if tail[:1] in ("+", "-") or re.match(r"@{0,2}H?\d*[+-]", tail):
                charge_problem = True
            continue
        chg = t.group("chg")
        charge = 0
        if chg:
            if chg[1:].isdigit():
                charge = int(chg)
            else:
                charge = len(chg) * (1 if chg[0] == "+" else -1)
        h = t.group("h")
        hcount = 0 if not h else (int(h[1:]) if len(h) > 1 else 1)
        return AtomNode(
            -1, symbol, formal_charge=charge, isotope=isotope, explicit_h=hcount,
            aromatic=aromatic, chirality=t.group("chir"),
        )
    if isotope is None:
        s = _SUPERATOM.match(content)
        if s:
            chg = s.group("chg")
            charge = 0
            if chg:
                charge = int(chg) if len(chg) > 1 else (1 if chg == "+" else -1)
            return AtomNode(-1, s.group("label"), formal_charge=charge)
    if charge_problem:
        raise SmilesError(f"invalid charge syntax in [{content}]", pos)
    raise SmilesError(f"invalid bracket atom [{content}]", pos)


@lru_cache(maxsize=4096)
def superatom_label_ok(label: str) -> bool:
    """True when ``[label]`` reads back as a superatom with exactly this label."""
    if label == "*":
        return True
    if not _SUPERATOM_LABEL.fullmatch(label):
        return False
    try:
        atom = _parse_bracket(label, 0)
    except SmilesError:
        return False
    return atom.label == label and atom.formal_charge == 0 and atom.is_superatom


def parse_smiles(text: str | bytes) -> MolGraph:
    """Parse SMILES into a coordinate-free MolGraph.

    Atoms are numbered in order of appearance. Raises SmilesError with the
    character offset of the problem; never returns a partial graph.
    """
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise SmilesError("input is not valid UTF-8", exc.start) from None
    stripped = text.strip()
    lead = len(text) - len(text.lstrip())
    if not stripped:
        raise SmilesError("empty SMILES", 0)
    try:
        tokens = tokenize(stripped)
    except SmilesError as exc:
        raise SmilesError(exc.message, exc.position + lead) from None

    atoms: list[AtomNode] = []
    bonds: dict[tuple[int, int], BondEdge] = {}
    prev: int | None = None
    branch_stack: list[tuple[int, int]] = []  # (atom, position of '(')
    pending: SmilesToken | None = None
    rings: dict[str, tuple[int, SmilesToken | None, int]] = {}
    last_kind = "dot"
    before_bond = "dot"

    def fail(msg: str, pos: int):
        raise SmilesError(msg, pos + lead)

    def add_bond(a: int, b: int, sym: SmilesToken | None, pos: int):
        key = (a, b) if a < b else (b, a)
        if key in bonds:
            fail("duplicate bond between the same atoms", pos)
        if sym is not None:
            order = _BOND_SYMBOLS[sym.payload]
        elif atoms[a].aromatic and atoms[b].aromatic:
            order = BondOrder.AROMATIC
        else:
            order = BondOrder.SINGLE
        bonds[key] = BondEdge(a, b, order)

    for tok in tokens:
        kind = tok.kind
        if kind in ("atom", "bracket"):
            if kind == "atom":
                sym = tok.payload
                if sym == "*":
                    atom = AtomNode(len(atoms), "*")
                elif sym in AROMATIC_ORGANIC:
                    atom = AtomNode(len(atoms), sym.upper(), aromatic=True)
                else:
                    atom = AtomNode(len(atoms), sym)
            else:
                parsed = _parse_bracket(tok.payload[1:-1], tok.position + lead)
                atom = AtomNode(
                    len(atoms), parsed.label, parsed.formal_charge, parsed.isotope,
                    parsed.explicit_h, parsed.aromatic, None, parsed.chirality,
                )
            atoms.append(atom)
            if prev is not None:
                add_bond(prev, atom.index, pending, tok.position)
            elif pending is not None:
                fail("bond symbol without a preceding atom", pending.position)
            pending = None
            prev = atom.index
        elif kind == "bond":
            if prev is None:
                fail("bond symbol without a preceding atom", tok.position)
            if pending is not None:
                fail("consecutive bond symbols", tok.position)
            pending = tok
            before_bond = last_kind
        elif kind == "open":
            if prev is None:
                fail("branch without a preceding atom", tok.position)
            if pending is not None:
                fail("bond symbol before '('", tok.position)
            if last_kind == "open":
                fail("empty branch", tok.position)
            branch_stack.append((prev, tok.position))
        elif kind == "close":
            if not branch_stack:
                fail("unbalanced ')'", tok.position)
            if pending is not None:
                fail("bond symbol before ')'", tok.position)
            if last_kind == "open":
                fail("empty branch", tok.position)
            prev = branch_stack.pop()[0]
        elif kind == "dot":
            if prev is None or last_kind == "open":
                fail("empty component", tok.position)
            if pending is not None:
                fail("bond symbol before '.'", tok.position)
            if branch_stack:
                fail("'.' inside a branch", tok.position)
            prev = None
        elif kind == "ring":
            if prev is None:
                fail("ring-closure digit without a preceding atom", tok.position)
            if last_kind in ("open", "close") or (last_kind == "bond" and before_bond in ("open", "close")):
                fail("ring-closure digit must follow an atom", tok.position)
            label = tok.payload[-2:] if tok.payload.startswith("%") else tok.payload
            if label in rings:
                other, sym, _ = rings.pop(label)
                if other == prev:
                    fail("ring closure to the same atom", tok.position)
                if sym is not None and pending is not None and sym.payload != pending.payload:
                    fail("conflicting ring-closure bond symbols", tok.position)
                add_bond(other, prev, sym if sym is not None else pending, tok.position)
            else:
                rings[label] = (prev, pending, tok.position)
            pending = None
        last_kind = kind

    if pending is not None:
        fail("dangling bond symbol", pending.position)
    if branch_stack:
        fail("unbalanced '('", branch_stack[-1][1])
    if rings:
        pos = min(p for _, _, p in rings.values())
        fail("unmatched ring-closure digit", pos)
    if last_kind == "dot":
        fail("empty component", len(stripped) - 1)
    return MolGraph(tuple(atoms), tuple(bonds.values()))


def implicit_h_count(atom_index: int, graph: MolGraph) -> int:
    """Implicit hydrogens on an organic-subset atom, from default valence.

    Atoms with a fixed hydrogen count return that count; superatoms and
    other elements return 0.
    """
    atom = graph.atoms[atom_index]
    if atom.explicit_h is not None:
        return atom.explicit_h
    valence = DEFAULT_VALENCE.get(atom.label)
    if valence is None or atom.label not in ORGANIC_SUBSET:
        return 0
    used_x2 = sum(ORDER_X2[b.order] for _, b in graph.adjacency[atom_index])
    return max(0, valence - math.floor(used_x2 / 2))


# ---------------------------------------------------------------- writing


def _charge_text(charge: int) -> str:
    if charge == 0:
        return ""
    sign = "+" if charge > 0 else "-"
    return sign if abs(charge) == 1 else f"{sign}{abs(charge)}"


def atom_token(atom: AtomNode) -> str:
    label = atom.label
    if atom.is_superatom:
        if label == "*" and not atom.formal_charge:
            return "*"
        return f"[{label}{_charge_text(atom.formal_charge)}]"
    symbol = label.lower() if atom.aromatic else label
    plain = (
        atom.formal_charge == 0
        and atom.isotope is None
        and atom.explicit_h is None
        and atom.chirality is None
        and label in ORGANIC_SUBSET
        and (not atom.aromatic or symbol in AROMATIC_ORGANIC)
    )
    if plain:
        return symbol
    h = atom.explicit_h or 0
    htext = "" if h == 0 else ("H" if h == 1 else f"H{h}")
    iso = "" if atom.isotope is None else str(atom.isotope)
    return f"[{iso}{symbol}{atom.chirality or ''}{htext}{_charge_text(atom.formal_charge)}]"


def bond_token(bond: BondEdge, graph: MolGraph) -> str:
    both_aromatic = graph.atoms[bond.from_idx].aromatic and graph.atoms[bond.to_idx].aromatic
    order = bond.order
    if order is BondOrder.SINGLE:
        return "-" if both_aromatic else ""
    if order is BondOrder.AROMATIC:
        return "" if both_aromatic else ":"
    return "=" if order is BondOrder.DOUBLE else "#"


def _ring_label(n: int) -> str:
    return str(n) if n < 10 else f"%{n:02d}"


def write_ordered(graph: MolGraph, priority: Sequence[int]) -> str:
    """Depth-first SMILES emission driven by ``priority`` (lower first).

    Each component starts at its lowest-priority atom; neighbors are visited
    in ascending priority; components are joined with ``.`` in order of their
    starting atom.
    """
    n = len(graph.atoms)
    if n == 0:
        return ""
    adj = graph.adjacency
    sorted_adj = [sorted(adj[i], key=lambda nb: priority[nb[0]]) for i in range(n)]

    visit_rank = [-1] * n
    children: list[list[tuple[int, BondEdge]]] = [[] for _ in range(n)]
    ring_bonds: list[list[tuple[int, BondEdge]]] = [[] for _ in range(n)]
    roots = []
    counter = 0
    seen_bonds: set[tuple[int, int]] = set()
    for start in sorted(range(n), key=lambda i: priority[i]):
        if visit_rank[start] >= 0:
            continue
        roots.append(start)
        visit_rank[start] = counter
        counter += 1
        stack = [(start, iter(sorted_adj[start]))]
        while stack:
            u, it = stack[-1]
            advanced = False
            for v, bond in it:
                if bond.pair in seen_bonds:
                    continue
                seen_bonds.add(bond.pair)
                if visit_rank[v] < 0:
                    visit_rank[v] = counter
                    counter += 1
                    children[u].append((v, bond))
                    stack.append((v, iter(sorted_adj[v])))
                    advanced = True
                    break
                ring_bonds[u].append((v, bond))
                ring_bonds[v].append((u, bond))
            if not advanced:
                stack.pop()

    out: list[str] = []
    free_digits: list[int] = []
    next_digit = 1
    open_digit: dict[tuple[int, int], int] = {}

    for ci, root in enumerate(roots):
        if ci:
            out.append(".")
        work: list = [("atom", root)]
        while work:
            kind, item = work.pop()
            if kind == "text":
                out.append(item)
                continue
            u = item
            out.append(atom_token(graph.atoms[u]))
            to_free = []
            closings = sorted(
                (rb for rb in ring_bonds[u] if visit_rank[rb[0]] < visit_rank[u]),
                key=lambda rb: visit_rank[rb[0]],
            )
            openings = sorted(
                (rb for rb in ring_bonds[u] if visit_rank[rb[0]] > visit_rank[u]),
                key=lambda rb: visit_rank[rb[0]],
            )
            for v, bond in closings:
                d = open_digit.pop(bond.pair)
                out.append(_ring_label(d))
                to_free.append(d)
            for v, bond in openings:
                if free_digits:
                    d = heapq.heappop(free_digits)
                else:
                    d = next_digit
                    next_digit += 1
                open_digit[bond.pair] = d
                out.append(bond_token(bond, graph) + _ring_label(d))
            for d in to_free:
                heapq.heappush(free_digits, d)
            kids = children[u]
            if not kids:
                continue
            last_v, last_b = kids[-1]
            work.append(("atom", last_v))
            work.append(("text", bond_token(last_b, graph)))
            for v, bond in reversed(kids[:-1]):
                work.append(("text", ")"))
                work.append(("atom", v))
                work.append(("text", "(" + bond_token(bond, graph)))
    return "".join(out)


def write_smiles(graph: MolGraph) -> str:
    """Non-canonical SMILES: DFS from atom 0, neighbors by ascending index."""
    problems = validate(graph)
    if problems:
        raise GraphError(problems[0].message)
    return write_ordered(graph, list(range(len(graph.atoms))))


def component_count(graph: MolGraph) -> int:
    return len(connected_components(graph))

"""Exact-match recognition metrics and dataset scoring.

Three per-sample metrics:

* gen: canonical SMILES of the model's SMILES line vs ground truth
* gra: canonical SMILES of the graph decoded from the model's CoT
* graph: labeled-graph isomorphism of the decoded graph vs ground truth

plus an optional legacy comparison in which every abbreviation becomes
``*`` before comparing.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Iterator, Mapping

from .canon import canonicalize_graph, canonicalize_smiles, refine
from .cot import decode_cot, extract_smiles
from .elements import is_superatom
from .errors import GtrError, ScoreInputError
from .graph import ORDER_CODE, BondDisplay, MolGraph, median_bond_length
from .smiles import parse_smiles

log = logging.getLogger(__name__)

METRICS = ("gen_smiles", "gra_smiles", "graph")
GEOMETRY_THRESHOLD = 0.1
MAX_GEOMETRY_MAPPINGS = 256


def gen_smiles_match(pred: str, gt: str) -> bool:
    try:
        return canonicalize_smiles(pred) == canonicalize_smiles(gt)
    except GtrError as exc:
        log.debug("gen_smiles_match: %s", exc)
        return False


def gra_smiles_match(pred_graph: MolGraph, gt_smiles: str) -> bool:
    try:
        return canonicalize_graph(pred_graph).canonical_smiles == canonicalize_smiles(gt_smiles)
    except GtrError as exc:
        log.debug("gra_smiles_match: %s", exc)
        return False


# -- labeled graph isomorphism ------------------------------------------------

def _atom_key(graph: MolGraph, i: int) -> tuple:
    a = graph.atoms[i]
    return (a.label, a.formal_charge, a.isotope or 0, a.aromatic, graph.degree(i))


def _bond_code(bond, v: int, relaxed_display: bool) -> tuple:
    if relaxed_display or bond.display is BondDisplay.PLAIN:
        return (ORDER_CODE[bond.order], "", 0)
    return (ORDER_CODE[bond.order], bond.display.value, 1 if bond.from_idx == v else -1)


def _joint_colors(a: MolGraph, b: MolGraph, relaxed_display: bool) -> list[int]:
    """Refined colors of the disjoint union; a's atoms first."""
    n = a.num_atoms
    keys = [_atom_key(a, i) for i in range(n)] + [_atom_key(b, i) for i in range(b.num_atoms)]
    table = {k: c for c, k in enumerate(sorted(set(keys)))}
    nbrs = [[(u, _bond_code(bd, v, relaxed_display)) for u, bd in a.adjacency[v]] for v in range(n)]
    nbrs += [[(u + n, _bond_code(bd, v, relaxed_display)) for u, bd in b.adjacency[v]] for v in range(b.num_atoms)]
    return refine([table[k] for k in keys], nbrs)


def _bonds_agree(ba, bb, map_from: int, relaxed_display: bool) -> bool:
    """``ba`` in the first graph corresponds to ``bb``; ``map_from`` is the image of ba.from_idx."""
    if ba.order != bb.order:
        return False
    if relaxed_display:
        return True
    if ba.display != bb.display:
        return False
    return ba.display is BondDisplay.PLAIN or bb.from_idx == map_from


def iter_isomorphisms(a: MolGraph, b: MolGraph, relaxed_display: bool = False) -> Iterator[list[int]]:
    """Yield every atom bijection a -> b preserving labels and bond attributes."""
    n = a.num_atoms
    if n != b.num_atoms or a.num_bonds != b.num_bonds:
        return
    if n == 0:
        yield []
        return
    colors = _joint_colors(a, b, relaxed_display)
    ca, cb = colors[:n], colors[n:]
    if sorted(ca) != sorted(cb):
        return
    by_color: dict[int, list[int]] = {}
    for j, c in enumerate(cb):
        by_color.setdefault(c, []).append(j)
    size = {c: len(v) for c, v in by_color.items()}

    # BFS order so that most atoms have an already-mapped neighbor
    order: list[int] = []
    parent: list[int] = [-1] * n
    seen = [False] * n
    for start in sorted(range(n), key=lambda i: (size[ca[i]], i)):
        if seen[start]:
            continue
        seen[start] = True
        order.append(start)
        k = len(order) - 1
        while k < len(order):
            x = order[k]
            for y, _ in sorted(a.adjacency[x], key=lambda nb: (size[ca[nb[0]]], nb[0])):
                if not seen[y]:
                    seen[y] = True
                    parent[y] = x
                    order.append(y)
            k += 1

    fwd = [-1] * n
    inv = [-1] * n

    def compatible(x: int, j: int) -> bool:
        ax, bj = a.atoms[x], b.atoms[j]
        if ax.explicit_h is not None and bj.explicit_h is not None and ax.explicit_h != bj.explicit_h:
            return False
        mapped = 0
        for y, bond in a.adjacency[x]:
            if fwd[y] < 0:
                continue
            mapped += 1
            other = b.bond_between(j, fwd[y])
            if other is None or not _bonds_agree(bond, other, fwd[bond.from_idx] if bond.from_idx != x else j, relaxed_display):
                return False
        return mapped == sum(1 for u, _ in b.adjacency[j] if inv[u] >= 0)

    def extend(k: int) -> Iterator[list[int]]:
        if k == n:
            yield list(fwd)
            return
        x = order[k]
        if parent[x] >= 0:
            pool = [u for u, _ in b.adjacency[fwd[parent[x]]] if cb[u] == ca[x]]
        else:
            pool = by_color[ca[x]]
        for j in pool:
            if inv[j] >= 0 or not compatible(x, j):
                continue
            fwd[x], inv[j] = j, x
            yield from extend(k + 1)
            fwd[x], inv[j] = -1, -1

    yield from extend(0)


def _normalized_coords(g: MolGraph) -> list[tuple[float, float]]:
    scale = median_bond_length(g) or 1.0
    cx = sum(a.coords[0] for a in g.atoms) / g.num_atoms
    cy = sum(a.coords[1] for a in g.atoms) / g.num_atoms
    return [((a.coords[0] - cx) / scale, (a.coords[1] - cy) / scale) for a in g.atoms]


def aligned_rmsd(p: list[tuple[float, float]], q: list[tuple[float, float]]) -> float:
    """RMSD after the best rotation of centered point set ``p`` onto ``q``."""
    s_dot = sum(px * qx + py * qy for (px, py), (qx, qy) in zip(p, q))
    s_cross = sum(px * qy - py * qx for (px, py), (qx, qy) in zip(p, q))
    theta = math.atan2(s_cross, s_dot)
    c, s = math.cos(theta), math.sin(theta)
    total = 0.0
    for (px, py), (qx, qy) in zip(p, q):
        rx, ry = c * px - s * py, s * px + c * py
        total += (rx - qx) ** 2 + (ry - qy) ** 2
    return math.sqrt(total / len(p)) if p else 0.0


def graph_match(
    pred: MolGraph,
    gt: MolGraph,
    relaxed_display: bool = False,
    strict_geometry: bool = False,
    geometry_threshold: float = GEOMETRY_THRESHOLD,
) -> bool:
    """Labeled-graph isomorphism; coordinates are ignored unless ``strict_geometry``.

    Strict geometry additionally requires some isomorphism under which the
    two drawings (centered, scaled to unit median bond length) align with
    RMSD at most ``geometry_threshold``.
    """
    if not strict_geometry:
        return next(iter_isomorphisms(pred, gt, relaxed_display), None) is not None
    if not (pred.has_coords and gt.has_coords):
        return False
    if pred.num_atoms == 0:
        return gt.num_atoms == 0
    p, q = _normalized_coords(pred), _normalized_coords(gt)
    for k, mapping in enumerate(iter_isomorphisms(pred, gt, relaxed_display)):
        if k >= MAX_GEOMETRY_MAPPINGS:
            break
        if aligned_rmsd(p, [q[mapping[i]] for i in range(len(p))]) <= geometry_threshold:
            return True
    return False


# -- legacy star comparison ----------------------------------------------------

_LEGACY_ALSO = frozenset({"Pr", "Ac"})  # abbreviations that collide with element symbols


def star_superatoms(graph: MolGraph) -> MolGraph:
    atoms = tuple(
        replace(a, label="*", formal_charge=0, isotope=None, explicit_h=None)
        if is_superatom(a.label) or a.label in _LEGACY_ALSO
        else a
        for a in graph.atoms
    )
    return MolGraph(atoms, graph.bonds)


def legacy_star_match(pred_smiles: str, gt_smiles: str) -> bool:
    """Compare with every abbreviation replaced by a ``*`` wildcard atom."""
    try:
        a = canonicalize_graph(star_superatoms(parse_smiles(pred_smiles))).canonical_smiles
        b = canonicalize_graph(star_superatoms(parse_smiles(gt_smiles))).canonical_smiles
    except GtrError as exc:
        log.debug("legacy_star_match: %s", exc)
        return False
    return a == b


# -- dataset scoring -----------------------------------------------------------

@dataclass(frozen=True)
class PredictionRecord:
    sample_id: str
    raw_response: str | None = None
    pred_smiles: str | None = None
    pred_graph: MolGraph | None = None

    def __post_init__(self):
        if self.raw_response is None and self.pred_smiles is None and self.pred_graph is None:
            raise ScoreInputError(f"record {self.sample_id!r} has no prediction")


@dataclass(frozen=True)
class GroundTruth:
    sample_id: str
    smiles: str
    graph: MolGraph | None = None


@dataclass(frozen=True)
class SampleScore:
    sample_id: str
    gen_smiles: bool | None = None
    gra_smiles: bool | None = None
    graph: bool | None = None
    legacy_star: bool | None = None
    parse_failures: tuple[str, ...] = ()


@dataclass
class ScoreReport:
    rows: list[SampleScore] = field(default_factory=list)
    errors: list[str] = field(default_factory=list)
    metrics: tuple[str, ...] = METRICS

    @property
    def parse_failures(self) -> int:
        return sum(len(r.parse_failures) for r in self.rows)

    def counts(self, metric: str) -> tuple[int, int]:
        """(matches, defined) for one metric."""
        vals = [getattr(r, metric) for r in self.rows]
        defined = [v for v in vals if v is not None]
        return sum(defined), len(defined)

    def percentage(self, metric: str) -> float | None:
        hits, total = self.counts(metric)
        if total == 0:
            return None
        return round(100.0 * hits / total, 2)

    def aggregates(self) -> dict[str, float | None]:
        return {m: self.percentage(m) for m in self.metrics}

    def summary_record(self) -> dict:
        rec: dict = {"record": "summary", "samples": len(self.rows), "parse_failures": self.parse_failures}
        for m in self.metrics:
            hits, total = self.counts(m)
            pct = self.percentage(m)
            rec[m] = None if pct is None else f"{pct:.2f}"
            rec[f"{m}_defined"] = total
            rec[f"{m}_matches"] = hits
        rec["errors"] = list(self.errors)
        return rec

    def row_records(self) -> list[dict]:
        out = []
        for r in self.rows:
            rec: dict = {"record": "sample", "sample_id": r.sample_id}
            for m in self.metrics:
                rec[m] = getattr(r, m)
            rec["parse_failures"] = list(r.parse_failures)
            out.append(rec)
        return out

    def to_table(self) -> str:
        header = ["metric", "score", "matches", "defined"]
        lines = []
        for m in self.metrics:
            hits, total = self.counts(m)
            pct = self.percentage(m)
            lines.append([m, "n/a" if pct is None else f"{pct:.2f}", str(hits), str(total)])
        widths = [max(len(r[i]) for r in [header] + lines) for i in range(4)]
        fmt = "  ".join(f"{{:<{w}}}" for w in widths)
        text = [fmt.format(*header).rstrip()] + [fmt.format(*r).rstrip() for r in lines]
        text.append(f"samples: {len(self.rows)}  parse failures: {self.parse_failures}")
        if self.errors:
            text.append(f"errors: {len(self.errors)}")
        return "\n".join(text)


def _has_graph_block(text: str) -> bool:
    return any(line.strip() == "<graph>" for line in text.splitlines())


def score_record(
    pred: PredictionRecord,
    gt: GroundTruth,
    legacy_star: bool = False,
    strict_geometry: bool = False,
    relaxed_display: bool = False,
) -> SampleScore:
    """Score one prediction; parse failures fold into False."""
    failures: list[str] = []
    gen = gra = graph = legacy = None

    smiles = pred.pred_smiles
    if smiles is None and pred.raw_response is not None:
        smiles = extract_smiles(pred.raw_response)
        if smiles is None:
            failures.append("missing SMILES line")
            gen = False
            legacy = False if legacy_star else None
    if smiles is not None:
        try:
            canonicalize_smiles(smiles)
        except GtrError as exc:
            failures.append(f"SMILES: {exc}")
        gen = gen_smiles_match(smiles, gt.smiles)
        if legacy_star:
            legacy = legacy_star_match(smiles, gt.smiles)

    pg = pred.pred_graph
    attempted = pg is not None
    if pg is None and pred.raw_response is not None:
        # a response without any graph block and with a SMILES line is a
        # direct-SMILES answer: graph metrics do not apply to it
        if _has_graph_block(pred.raw_response) or extract_smiles(pred.raw_response) is None:
            attempted = True
            try:
                pg = decode_cot(pred.raw_response)
            except GtrError as exc:
                failures.append(f"CoT: {exc}")
    if attempted:
        if pg is None:
            gra = graph = False
        else:
            gra = gra_smiles_match(pg, gt.smiles)
            try:
                gt_graph = gt.graph if gt.graph is not None else parse_smiles(gt.smiles)
            except GtrError as exc:
                failures.append(f"ground truth: {exc}")
                graph = False
            else:
                graph = graph_match(pg, gt_graph, relaxed_display, strict_geometry)
    return SampleScore(pred.sample_id, gen, gra, graph, legacy, tuple(failures))


def _score_job(args) -> SampleScore:
    pred, gt, flags = args
    return score_record(pred, gt, **flags)


def score_dataset(
    preds: Iterable[PredictionRecord],
    gts: Mapping[str, GroundTruth],
    legacy_star: bool = False,
    strict_geometry: bool = False,
    relaxed_display: bool = False,
    workers: int = 1,
) -> ScoreReport:
    """Score all predictions. Rows come out sorted by sample_id.

    Unknown sample ids are listed in ``errors`` and excluded; a duplicate
    prediction id raises ScoreInputError.
    """
    flags = dict(legacy_star=legacy_star, strict_geometry=strict_geometry, relaxed_display=relaxed_display)
    seen: set[str] = set()
    jobs = []
    errors = []
    for p in preds:
        if p.sample_id in seen:
            raise ScoreInputError(f"duplicate sample_id {p.sample_id!r}")
        seen.add(p.sample_id)
        gt = gts.get(p.sample_id)
        if gt is None:
            errors.append(f"unknown sample_id {p.sample_id!r}")
            continue
        jobs.append((p, gt, flags))
    jobs.sort(key=lambda j: j[0].sample_id)
    if workers > 1 and len(jobs) > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_score_job, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    else:
        rows = [_score_job(j) for j in jobs]
    metrics = METRICS + (("legacy_star",) if legacy_star else ())
    return ScoreReport(rows, sorted(errors), metrics)

"""JSONL record schemas shared by the command-line tools (see docs/schemas.md)."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Iterator, TextIO

from .errors import GraphError, GtrError
from .graph import MolGraph, graph_from_dict, graph_to_dict
from .metrics import GroundTruth, PredictionRecord
from .molfile import parse_molfile
from .rectify import OcrToken, RectifiedSample
from .smiles import parse_smiles

SCHEMA_VERSION = 1


class RecordError(GtrError):
    """A JSONL line that does not follow its schema."""

    def __init__(self, message: str, line: int | None = None):
        super().__init__(message if line is None else f"{message} (at line {line})")
        self.line = line


def read_jsonl(stream: TextIO) -> Iterator[tuple[int, dict]]:
    for lineno, raw in enumerate(stream, start=1):
        if not raw.strip():
            continue
        try:
            rec = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise RecordError(f"invalid JSON: {exc.msg}", lineno) from None
        if not isinstance(rec, dict):
            raise RecordError("record must be a JSON object", lineno)
        yield lineno, rec


def write_jsonl(stream: TextIO, records: Iterable[dict]) -> None:
    for rec in records:
        stream.write(json.dumps(rec, sort_keys=True, ensure_ascii=False) + "\n")


def _sample_id(rec: dict, lineno: int) -> str:
    sid = rec.get("sample_id")
    if not isinstance(sid, str) or not sid:
        raise RecordError("missing or non-string sample_id", lineno)
    return sid


def graph_of(rec: dict, lineno: int, need_coords: bool = False) -> MolGraph:
    """Graph from a record's ``graph``, ``molfile`` or ``smiles`` field (first present)."""
    try:
        if isinstance(rec.get("graph"), dict):
            g = graph_from_dict(rec["graph"])
        elif isinstance(rec.get("molfile"), str):
            g = parse_molfile(rec["molfile"]).graph
        elif isinstance(rec.get("smiles"), str):
            g = parse_smiles(rec["smiles"])
        else:
            raise RecordError("record needs one of graph, molfile or smiles", lineno)
    except (GraphError, GtrError) as exc:
        if isinstance(exc, RecordError):
            raise
        raise RecordError(f"bad structure: {exc}", lineno) from None
    if need_coords and g.atoms and not g.has_coords:
        raise RecordError("structure has no coordinates", lineno)
    return g


def ocr_from_records(rows: Iterable[tuple[int, dict]]) -> dict[str, list[OcrToken]]:
    """OCR tokens keyed by sample_id.

    Accepts one token per line (``text``/``bbox``/``confidence``) or one
    sample per line with a ``tokens`` list.
    """
    out: dict[str, list[OcrToken]] = {}
    for lineno, rec in rows:
        sid = _sample_id(rec, lineno)
        items = rec["tokens"] if "tokens" in rec else [rec]
        if not isinstance(items, list):
            raise RecordError("tokens must be a list", lineno)
        for item in items:
            try:
                bbox = tuple(float(v) for v in item["bbox"])
                if len(bbox) != 4:
                    raise ValueError("bbox needs four numbers")
                conf = item.get("confidence")
                tok = OcrToken(str(item["text"]), bbox, None if conf is None else float(conf))
            except (KeyError, TypeError, ValueError) as exc:
                raise RecordError(f"bad OCR token: {exc}", lineno) from None
            out.setdefault(sid, []).append(tok)
    return out


def rectified_record(sample_id: str, result: RectifiedSample) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "sample_id": sample_id,
        "smiles": result.smiles,
        "graph": graph_to_dict(result.graph),
        "replacements": [
            {"abbreviation": r.abbreviation, "collapsed_atoms": r.collapsed_atoms, "anchor": list(r.anchor)}
            for r in result.replacements
        ],
    }


def reject_record(sample_id: str, reason: str) -> dict:
    return {"schema_version": SCHEMA_VERSION, "sample_id": sample_id, "reason": reason}


@dataclass(frozen=True)
class Sample:
    sample_id: str
    graph: MolGraph
    smiles: str
    cot_text: str
    response_text: str
    mode: str
    image_ref: str | None = None

    def to_record(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "sample_id": self.sample_id,
            "image_ref": self.image_ref,
            "mode": self.mode,
            "graph": graph_to_dict(self.graph),
            "smiles": self.smiles,
            "cot_text": self.cot_text,
            "response_text": self.response_text,
        }


def prediction_from_record(rec: dict, lineno: int) -> PredictionRecord:
    """Prediction record; dataset records are accepted too (response_text = raw_response)."""
    sid = _sample_id(rec, lineno)
    raw = rec.get("raw_response", rec.get("response_text"))
    pred_smiles = rec.get("pred_smiles")
    graph = None
    if isinstance(rec.get("pred_graph"), dict):
        try:
            graph = graph_from_dict(rec["pred_graph"])
        except GtrError as exc:
            raise RecordError(f"bad pred_graph: {exc}", lineno) from None
    for name, value in (("raw_response", raw), ("pred_smiles", pred_smiles)):
        if value is not None and not isinstance(value, str):
            raise RecordError(f"{name} must be a string", lineno)
    if raw is None and pred_smiles is None and graph is None:
        raise RecordError("prediction needs raw_response, pred_smiles or pred_graph", lineno)
    return PredictionRecord(sid, raw, pred_smiles, graph)


def ground_truth_from_record(rec: dict, lineno: int) -> GroundTruth:
    sid = _sample_id(rec, lineno)
    smiles = rec.get("smiles")
    if not isinstance(smiles, str):
        raise RecordError("ground truth needs a smiles string", lineno)
    graph = None
    if isinstance(rec.get("graph"), dict):
        try:
            graph = graph_from_dict(rec["graph"])
        except GtrError as exc:
            raise RecordError(f"bad graph: {exc}", lineno) from None
    return GroundTruth(sid, smiles, graph)

"""``gtrmol`` command-line interface.

Exit codes: 0 success, 2 input error, 3 internal error (including a failed
dataset self-check).

Option values resolve as: command-line flag, then ``GTRMOL_<NAME>``
environment variable, then the JSON ``--config`` file, then the default.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import random
import sys
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from functools import lru_cache
from pathlib import Path
from typing import Callable, Iterable, Iterator, TextIO

from . import __version__
from .canon import canonicalize_graph, canonicalize_smiles
from .cot import decode_cot, encode_atoms_then_bonds, encode_cot, render_cot_text, render_response
from .depict import depict
from .errors import GtrError
from .fixtures import random_molecule
from .graph import MolGraph, graph_from_dict, graph_to_dict, median_bond_length
from .metrics import graph_match, score_dataset
from .molfile import parse_molfile, split_sdf, write_molfile
from .records import (
    RecordError,
    Sample,
    graph_of,
    ground_truth_from_record,
    ocr_from_records,
    prediction_from_record,
    read_jsonl,
    rectified_record,
    reject_record,
    write_jsonl,
)
from .rectify import RADIUS_FACTOR, default_superatom_table, load_superatom_table, rectify_sample
from .smiles import parse_smiles

log = logging.getLogger("gtrmol")

EXIT_OK, EXIT_INPUT, EXIT_INTERNAL = 0, 2, 3
MODES = ("graph-traversal", "atoms-then-bonds", "direct-smiles")


class InputError(Exception):
    """Bad user input: reported with exit code 2."""


class SelfCheckError(Exception):
    """A built record failed re-verification: exit code 3."""


def _bool(text: str) -> bool:
    low = str(text).strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off", ""):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _mode(text: str) -> str:
    if text not in MODES:
        raise ValueError(f"mode must be one of {', '.join(MODES)}")
    return text


def _positive_int(text) -> int:
    v = int(text)
    if v < 1:
        raise ValueError("must be at least 1")
    return v


def _positive_float(text) -> float:
    v = float(text)
    if not v > 0:
        raise ValueError("must be positive")
    return v


# option name -> (converter, default); each is settable by flag, env var or config file
SETTINGS: dict[str, tuple[Callable, object]] = {
    "table": (str, None),
    "radius_multiplier": (_positive_float, RADIUS_FACTOR),
    "mode": (_mode, "graph-traversal"),
    "legacy_star": (_bool, False),
    "strict_geometry": (_bool, False),
    "relaxed_display": (_bool, False),
    "workers": (_positive_int, 1),
    "seed": (int, 0),
    "input": (str, None),
    "ocr": (str, None),
    "output": (str, None),
    "rejects": (str, None),
    "predictions": (str, None),
    "ground_truth": (str, None),
    "report": (str, None),
}


def env_name(setting: str) -> str:
    return "GTRMOL_" + setting.upper()


def resolve_settings(args: argparse.Namespace, environ=None) -> None:
    """Fill unset options from the environment, then the config file, then defaults."""
    environ = os.environ if environ is None else environ
    config: dict = {}
    if getattr(args, "config", None):
        try:
            config = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(config, dict):
            raise InputError("config file must hold a JSON object")
        unknown = sorted(set(config) - set(SETTINGS))
        if unknown:
            raise InputError(f"unknown config keys: {', '.join(unknown)}")
    for name, (conv, default) in SETTINGS.items():
        if not hasattr(args, name):
            continue
        value = getattr(args, name)
        source = "flag"
        if value is None and env_name(name) in environ:
            value, source = environ[env_name(name)], env_name(name)
        elif value is None and name in config:
            value, source = config[name], "config"
        if value is None:
            setattr(args, name, default)
            continue
        try:
            setattr(args, name, conv(value))
        except (TypeError, ValueError) as exc:
            raise InputError(f"bad value for {name} (from {source}): {exc}") from None


# ----------------------------------------------------------------- helpers


def _read_text(path: str | None) -> str:
    if path in (None, "-"):
        return sys.stdin.read()
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None


@contextmanager
def _open_out(path: str | None) -> Iterator[TextIO]:
    """Writable text stream for ``path``; ``-`` or None means stdout (left open)."""
    if path in (None, "-"):
        yield sys.stdout
        return
    try:
        fh = open(path, "w", encoding="utf-8", newline="\n")
    except OSError as exc:
        raise InputError(f"cannot write {path}: {exc.strerror}") from None
    with fh:
        yield fh


def _jsonl_file(path: str) -> list[tuple[int, dict]]:
    text = _read_text(path)
    return list(read_jsonl(text.splitlines(keepends=True)))


def read_structure(text: str, fmt: str = "auto") -> MolGraph:
    """One structure from SMILES, molfile or graph-JSON text."""
    if fmt == "auto":
        stripped = text.lstrip()
        if "M  END" in text:
            fmt = "molfile"
        elif stripped.startswith("{"):
            fmt = "json"
        else:
            fmt = "smiles"
    if fmt == "molfile":
        return parse_molfile(text).graph
    if fmt == "json":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InputError(f"invalid JSON: {exc.msg}") from None
        return graph_from_dict(data.get("graph", data))
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise InputError("no SMILES given")
    return parse_smiles(lines[0])


def write_structure(graph: MolGraph, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(graph_to_dict(graph), sort_keys=True) + "\n"
    if fmt == "molfile":
        if graph.atoms and not graph.has_coords:
            raise InputError("molfile output needs coordinates")
        return write_molfile(graph)
    return canonicalize_graph(graph).canonical_smiles + "\n"


def _pmap(fn, items: list, workers: int) -> list:
    if workers > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items, chunksize=max(1, len(items) // (4 * workers))))
    return [fn(x) for x in items]


# ----------------------------------------------------------------- commands


def cmd_canonicalize(args) -> int:
    items = args.smiles or [ln.strip() for ln in sys.stdin if ln.strip()]
    status = EXIT_OK
    for s in items:
        try:
            print(canonicalize_smiles(s, plain_superatom_rank=args.plain_superatom_rank))
        except GtrError as exc:
            print(f"error: {s!r}: {exc}", file=sys.stderr)
            status = EXIT_INPUT
    return status


def cmd_cot_encode(args) -> int:
    graph = read_structure(_read_text(args.file), args.input_format)
    if args.response:
        text = render_response(graph, args.mode).text
    elif args.mode == "atoms-then-bonds":
        text = encode_atoms_then_bonds(graph)
    elif args.mode == "direct-smiles":
        text = ""
    else:
        text = render_cot_text(encode_cot(graph))
    sys.stdout.write(text + "\n" if text else "")
    return EXIT_OK


def cmd_cot_decode(args) -> int:
    warnings: list[str] = []
    graph = decode_cot(_read_text(args.file), warnings)
    for w in warnings:
        print(f"warning: {w}", file=sys.stderr)
    sys.stdout.write(write_structure(graph, args.output_format))
    return EXIT_OK


def cmd_depict(args) -> int:
    graph = read_structure(_read_text(args.file), args.input_format)
    if graph.atoms and not graph.has_coords:
        raise InputError("depiction needs coordinates; SMILES input carries none")
    svg = depict(graph)
    with _open_out(args.output) as out:
        out.write(svg)
    return EXIT_OK


def cmd_generate(args) -> int:
    rng = random.Random(args.seed)
    with _open_out(args.output) as out:
        for k in range(args.count):
            g = random_molecule(rng, args.min_atoms, args.max_atoms)
            sid = f"gen-{k:06d}"
            if args.sdf:
                out.write(write_molfile(g, sid) + "$$$$\n")
            else:
                write_jsonl(out, [{"schema_version": 1, "sample_id": sid,
                                   "smiles": canonicalize_graph(g).canonical_smiles,
                                   "graph": graph_to_dict(g)}])
    return EXIT_OK


def _load_structures(path: str) -> list[tuple[str, MolGraph]]:
    text = _read_text(path)
    if path.endswith((".sdf", ".mol")) or ("M  END" in text and not text.lstrip().startswith("{")):
        out = []
        for k, block in enumerate(split_sdf(text)):
            doc = parse_molfile(block)
            out.append((doc.title.strip() or f"mol-{k:06d}", doc.graph))
        return out
    return [
        (rec.get("sample_id") or f"line-{lineno}", graph_of(rec, lineno, need_coords=True))
        for lineno, rec in read_jsonl(text.splitlines(keepends=True))
    ]


@lru_cache(maxsize=4)
def _table(text: str | None):
    return default_superatom_table() if text is None else load_superatom_table(text)


def _rectify_job(job):
    sid, graph, tokens, table_text, multiplier = job
    table = _table(table_text)
    radius = multiplier * median_bond_length(graph)
    return sid, rectify_sample(graph, tokens, table, radius)


def cmd_rectify(args) -> int:
    if not args.input or not args.output:
        raise InputError("rectify needs --input and --output")
    table_text = None
    if args.table:
        table_text = _read_text(args.table)
        load_superatom_table(table_text)  # fail fast on a bad table
    samples = _load_structures(args.input)
    ocr = ocr_from_records(_jsonl_file(args.ocr)) if args.ocr else {}
    ids = [sid for sid, _ in samples]
    if len(set(ids)) != len(ids):
        raise InputError("duplicate sample ids in input")
    jobs = [(sid, g, ocr.get(sid, []), table_text, args.radius_multiplier) for sid, g in sorted(samples, key=lambda s: s[0])]
    results = _pmap(_rectify_job, jobs, args.workers)
    accepted = [rectified_record(sid, r) for sid, r in results if r.ok]
    rejected = [reject_record(sid, r.reason) for sid, r in results if not r.ok]
    with _open_out(args.output) as fh:
        write_jsonl(fh, accepted)
    rejects_path = args.rejects or str(Path(args.output).with_suffix(".rejects.jsonl"))
    with _open_out(rejects_path) as fh:
        write_jsonl(fh, rejected)
    reasons: dict[str, int] = {}
    for r in rejected:
        key = r["reason"].split(":", 1)[0]
        reasons[key] = reasons.get(key, 0) + 1
    summary = {"total": len(results), "accepted": len(accepted), "rejected": len(rejected),
               "rejected_by_reason": dict(sorted(reasons.items()))}
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


def build_sample(sample_id: str, graph: MolGraph, mode: str, image_ref: str | None = None) -> Sample:
    response = render_response(graph, mode)
    return Sample(sample_id, graph, response.smiles_line[len("SMILES: "):], response.cot_block,
                  response.text, mode, image_ref)


def self_check(sample: Sample) -> str | None:
    """Reason the sample violates its invariants, or None."""
    if canonicalize_graph(sample.graph).canonical_smiles != sample.smiles:
        return "smiles is not the canonical SMILES of graph"
    smiles_line = "SMILES: " + sample.smiles
    if sample.mode == "direct-smiles":
        if sample.cot_text or sample.response_text != smiles_line:
            return "direct-smiles response must be the SMILES line only"
        return None
    if sample.response_text != sample.cot_text + "\n" + smiles_line:
        return "response_text is not cot_text followed by the SMILES line"
    try:
        decoded = decode_cot(sample.cot_text)
    except GtrError as exc:
        return f"cot_text does not decode: {exc}"
    if not graph_match(decoded, sample.graph):
        return "decoded cot_text does not match graph"
    return None


def _build_job(job):
    sid, graph, mode, image_ref = job
    sample = build_sample(sid, graph, mode, image_ref)
    return sid, sample.to_record(), self_check(sample)


def _dataset_inputs(args) -> list[tuple[str, MolGraph, str | None]]:
    if args.generate is not None:
        rng = random.Random(args.seed)
        return [(f"gen-{k:06d}", random_molecule(rng), None) for k in range(args.generate)]
    if args.smiles_file:
        out = []
        for lineno, line in enumerate(_read_text(args.smiles_file).splitlines(), start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            smiles, sid = parts[0], parts[1] if len(parts) > 1 else f"smi-{lineno:06d}"
            try:
                out.append((sid, parse_smiles(smiles), None))
            except GtrError as exc:
                raise InputError(f"{args.smiles_file}:{lineno}: {exc}") from None
        return out
    if args.input:
        return [
            (rec.get("sample_id") or f"line-{lineno}", graph_of(rec, lineno), rec.get("image_ref"))
            for lineno, rec in _jsonl_file(args.input)
        ]
    raise InputError("build-dataset needs --generate, --smiles-file or --input")


def cmd_build_dataset(args) -> int:
    if not args.output:
        raise InputError("build-dataset needs --output")
    inputs = _dataset_inputs(args)
    ids = [sid for sid, _, _ in inputs]
    if len(set(ids)) != len(ids):
        raise InputError("duplicate sample ids in input")
    jobs = [(sid, g, args.mode, ref) for sid, g, ref in sorted(inputs, key=lambda t: t[0])]
    results = _pmap(_build_job, jobs, args.workers)
    for sid, _, problem in results:
        if problem:
            raise SelfCheckError(f"self-check failed for {sid}: {problem}")
    with _open_out(args.output) as fh:
        write_jsonl(fh, (rec for _, rec, _ in results))
    print(json.dumps({"records": len(results), "mode": args.mode, "self_check_failures": 0}))
    return EXIT_OK


def cmd_check_dataset(args) -> int:
    """Re-run the self-check over an existing dataset file."""
    total = 0
    failures = []
    for lineno, rec in _jsonl_file(args.file):
        total += 1
        sid = rec.get("sample_id") or f"line-{lineno}"
        try:
            sample = Sample(sid, graph_of(rec, lineno), str(rec["smiles"]), str(rec["cot_text"]),
                            str(rec["response_text"]), str(rec["mode"]), rec.get("image_ref"))
        except KeyError as exc:
            failures.append((sid, f"missing field {exc.args[0]}"))
            continue
        problem = self_check(sample)
        if problem:
            failures.append((sid, problem))
    for sid, problem in failures:
        print(f"{sid}: {problem}", file=sys.stderr)
    print(json.dumps({"records": total, "self_check_failures": len(failures)}))
    return EXIT_INPUT if failures else EXIT_OK


def cmd_score(args) -> int:
    if not args.predictions or not args.ground_truth:
        raise InputError("score needs --predictions and --ground-truth")
    gts = {}
    for lineno, rec in _jsonl_file(args.ground_truth):
        gt = ground_truth_from_record(rec, lineno)
        if gt.sample_id in gts:
            raise InputError(f"duplicate ground-truth sample_id {gt.sample_id!r}")
        gts[gt.sample_id] = gt
    preds = [prediction_from_record(rec, lineno) for lineno, rec in _jsonl_file(args.predictions)]
    report = score_dataset(preds, gts, args.legacy_star, args.strict_geometry, args.relaxed_display, args.workers)
    print(report.to_table())
    if args.report:
        with _open_out(args.report) as fh:
            write_jsonl(fh, report.row_records() + [report.summary_record()])
    for err in report.errors:
        print(f"warning: {err}", file=sys.stderr)
    return EXIT_OK


# ------------------------------------------------------------------ parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gtrmol", description="Molecular graph tools: SMILES, molfiles, CoT text, scoring.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("--config", help="JSON file with option defaults")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def workers(sp):
        sp.add_argument("--workers", help="parallel worker processes (default 1)")

    sp = sub.add_parser("canonicalize", help="print canonical SMILES")
    sp.add_argument("smiles", nargs="*", help="SMILES strings (default: one per stdin line)")
    sp.add_argument("--plain-superatom-rank", action="store_true",
                    help="label-blind superatom ranking (reproduces legacy ambiguity)")
    sp.set_defaults(func=cmd_canonicalize)

    cot = sub.add_parser("cot", help="encode or decode CoT text").add_subparsers(dest="cot_command", required=True)
    sp = cot.add_parser("encode", help="structure -> CoT text")
    sp.add_argument("file", nargs="?", default="-", help="input file (default stdin)")
    sp.add_argument("--input-format", choices=("auto", "smiles", "molfile", "json"), default="auto")
    sp.add_argument("--mode", help="graph-traversal | atoms-then-bonds | direct-smiles")
    sp.add_argument("--response", action="store_true", help="append the SMILES line")
    sp.set_defaults(func=cmd_cot_encode)
    sp = cot.add_parser("decode", help="CoT text -> structure")
    sp.add_argument("file", nargs="?", default="-")
    sp.add_argument("--output-format", choices=("smiles", "json", "molfile"), default="smiles")
    sp.set_defaults(func=cmd_cot_decode)

    sp = sub.add_parser("depict", help="structure -> SVG")
    sp.add_argument("file", nargs="?", default="-")
    sp.add_argument("--input-format", choices=("auto", "molfile", "json", "smiles"), default="auto")
    sp.add_argument("-o", "--output", help="SVG path (default stdout)")
    sp.set_defaults(func=cmd_depict)

    sp = sub.add_parser("rectify", help="collapse OCR-confirmed abbreviations into superatoms")
    sp.add_argument("--input", help="SDF file or JSONL records with graph/molfile")
    sp.add_argument("--ocr", help="JSONL OCR tokens")
    sp.add_argument("--table", help="superatom table (default: bundled)")
    sp.add_argument("--radius-multiplier", help="match radius in median bond lengths (default 1.5)")
    sp.add_argument("--output", help="rectified samples JSONL")
    sp.add_argument("--rejects", help="rejects JSONL (default: <output>.rejects.jsonl)")
    workers(sp)
    sp.set_defaults(func=cmd_rectify)

    sp = sub.add_parser("build-dataset", help="write training samples as JSONL")
    src = sp.add_mutually_exclusive_group()
    src.add_argument("--generate", type=int, help="generate N random molecules")
    src.add_argument("--smiles-file", help="lines of 'SMILES [sample_id]'")
    src.add_argument("--input", help="JSONL records (e.g. rectify output)")
    sp.add_argument("--seed", help="generator seed (default 0)")
    sp.add_argument("--mode", help="graph-traversal | atoms-then-bonds | direct-smiles")
    sp.add_argument("--output")
    workers(sp)
    sp.set_defaults(func=cmd_build_dataset)

    sp = sub.add_parser("check-dataset", help="re-verify every record of a dataset file")
    sp.add_argument("file", help="dataset JSONL written by build-dataset")
    sp.set_defaults(func=cmd_check_dataset)

    sp = sub.add_parser("score", help="score predictions against ground truth")
    sp.add_argument("--predictions")
    sp.add_argument("--ground-truth")
    sp.add_argument("--report", help="JSONL report path")
    sp.add_argument("--legacy-star", action="store_true", default=None)
    sp.add_argument("--strict-geometry", action="store_true", default=None)
    sp.add_argument("--relaxed-display", action="store_true", default=None)
    workers(sp)
    sp.set_defaults(func=cmd_score)

    sp = sub.add_parser("generate", help="random fixture molecules")
    sp.add_argument("--count", type=int, default=10)
    sp.add_argument("--seed")
    sp.add_argument("--min-atoms", type=int, default=5)
    sp.add_argument("--max-atoms", type=int, default=20)
    sp.add_argument("--sdf", action="store_true", help="write an SD file instead of JSONL")
    sp.add_argument("-o", "--output")
    sp.set_defaults(func=cmd_generate)
    return p


def main(argv: Iterable[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(None if argv is None else list(argv))
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        resolve_settings(args)
        return args.func(args)
    except (InputError, RecordError, GtrError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except SelfCheckError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception as exc:  # noqa: BLE001 - last-resort report
        log.debug("internal error", exc_info=True)
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())

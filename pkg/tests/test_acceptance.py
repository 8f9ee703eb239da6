"""Acceptance criteria, one test each.

Every test records a (criterion, passed, detail) row before asserting so the
terminal summary prints one PASS/FAIL line per criterion.
"""

from __future__ import annotations

import itertools
import json
import math
import random
import time
from pathlib import Path

from conftest import ACCEPTANCE_RESULTS
from oracles import brute_force_isomorphic, near_miss

from gtrmol.canon import canonicalize_graph, canonicalize_smiles
from gtrmol.cli import main
from gtrmol.cot import decode_cot, encode_atoms_then_bonds, encode_cot, render_cot_text
from gtrmol.depict import depict
from gtrmol.errors import ParseError
from gtrmol.fixtures import (
    RECTIFIER_LABELS,
    endpoint_superatom_family,
    random_molecule,
    rectifier_fixture,
    strip_for_smiles,
)
from gtrmol.graph import connected_components, graph_from_dict, graph_to_dict, make_graph, permute
from gtrmol.metrics import GroundTruth, PredictionRecord, graph_match, score_record
from gtrmol.molfile import parse_molfile, write_molfile
from gtrmol.rectify import OcrToken, default_superatom_table, expand_all
from gtrmol.smiles import parse_smiles, write_smiles

GOLDEN = Path(__file__).parent / "golden"


def record(num: int, passed: bool, detail: str) -> None:
    ACCEPTANCE_RESULTS.append((num, passed, detail))


def shuffled(g, rng):
    perm = list(range(g.num_atoms))
    rng.shuffle(perm)
    return permute(g, perm)


# 1 -------------------------------------------------------------------------


def test_criterion_1_canonical_invariance(molecules):
    start = time.perf_counter()
    rng = random.Random(1)
    violations = 0
    exhaustive = 0
    for g in molecules:
        g = strip_for_smiles(g)
        ref = canonicalize_graph(g).canonical_smiles
        if g.num_atoms <= 7:
            perms = itertools.permutations(range(g.num_atoms))
        else:
            perms = (rng.sample(range(g.num_atoms), g.num_atoms) for _ in range(50))
        for perm in perms:
            if g.num_atoms <= 7:
                exhaustive += 1
            if canonicalize_graph(permute(g, list(perm))).canonical_smiles != ref:
                violations += 1
    elapsed = time.perf_counter() - start
    small = sum(1 for g in molecules if g.num_atoms <= 7)
    ok = violations == 0 and elapsed < 60
    record(1, ok, f"{len(molecules)} molecules, {small} exhaustive ({exhaustive} permutations), "
                  f"{violations} violations, {elapsed:.1f}s (limit 60s)")
    assert violations == 0
    assert elapsed < 60


# 2 -------------------------------------------------------------------------


def test_criterion_2_round_trips(molecules):
    fails = {"smiles": 0, "molfile": 0, "cot-traversal": 0, "cot-atoms-then-bonds": 0, "cyclomatic": 0}
    for g in molecules:
        s = strip_for_smiles(g)
        if not graph_match(parse_smiles(write_smiles(s)), s):
            fails["smiles"] += 1
        if not graph_match(parse_molfile(write_molfile(g)).graph, g):
            fails["molfile"] += 1
        script = encode_cot(g)
        if not graph_match(decode_cot(render_cot_text(script)), g):
            fails["cot-traversal"] += 1
        if not graph_match(decode_cot(encode_atoms_then_bonds(g)), g):
            fails["cot-atoms-then-bonds"] += 1
        rings = sum(1 for step in script.steps if getattr(step, "closes_ring", False))
        if rings != g.num_bonds - g.num_atoms + len(connected_components(g)):
            fails["cyclomatic"] += 1
    ok = not any(fails.values())
    record(2, ok, f"{len(molecules)} molecules, failures " + ", ".join(f"{k}={v}" for k, v in fails.items()))
    assert ok, fails


# 3 -------------------------------------------------------------------------


def test_criterion_3_graph_match_vs_oracle():
    rng = random.Random(3)
    pairs = []
    for _ in range(75):  # same molecule, shuffled numbering
        a = random_molecule(rng, 2, 8)
        pairs.append((a, shuffled(a, rng)))
    for _ in range(75):  # unrelated molecules of equal size
        a = random_molecule(rng, 2, 8)
        while True:
            b = random_molecule(rng, a.num_atoms, a.num_atoms)
            if b.num_atoms == a.num_atoms:
                break
        pairs.append((a, b))
    negatives = 0
    while negatives < 50:  # one label or bond-order change away
        a = random_molecule(rng, 2, 8)
        b = near_miss(shuffled(a, rng), rng)
        if graph_match(b, a) or brute_force_isomorphic(a, b):
            continue  # the mutation happened to produce an isomorphic graph
        pairs.append((a, b))
        negatives += 1
    disagreements = 0
    positives = 0
    for a, b in pairs:
        for relaxed in (False, True):
            expected = brute_force_isomorphic(a, b, relaxed)
            positives += expected and not relaxed
            if graph_match(a, b, relaxed) != expected:
                disagreements += 1
    ok = disagreements == 0 and len(pairs) == 200
    record(3, ok, f"{len(pairs)} pairs ({negatives} near-miss negatives, {positives} isomorphic), "
                  f"{disagreements} disagreements with the exhaustive oracle")
    assert ok


# 4 -------------------------------------------------------------------------


def test_criterion_4_endpoint_superatoms():
    family = endpoint_superatom_family(12)
    graph_ok = sum(graph_match(pred, gt) for gt, pred in family)
    plain_fail = sum(
        canonicalize_graph(pred, plain_superatom_rank=True).canonical_smiles
        != canonicalize_graph(gt, plain_superatom_rank=True).canonical_smiles
        for gt, pred in family
    )
    default_ok = sum(
        canonicalize_graph(pred).canonical_smiles == canonicalize_graph(gt).canonical_smiles for gt, pred in family
    )
    n = len(family)
    ok = n >= 10 and graph_ok == n and plain_fail >= 1 and default_ok == n
    record(4, ok, f"{n} instances: graph_match {graph_ok}/{n}, label-blind canonical mismatches {plain_fail}, "
                  f"superatom-aware canonical matches {default_ok}/{n}")
    assert ok


# 5 -------------------------------------------------------------------------

# Hand-written scaffolds: (labels along a zigzag chain, bond orders, expected SMILES).
HAND_CASES = [
    (["Ph", "C", "C", "O"], ["single", "single", "single"], "OCC[Ph]"),
    (["Et", "O", "C", "C", "N"], ["single", "single", "single", "triple"], "N#CCO[Et]"),
    (["Pr", "N", "C", "O"], ["single", "single", "double"], "O=CN[Pr]"),
    (["Bu", "S", "C"], ["single", "single"], "CS[Bu]"),
    (["Ac", "N", "C", "C"], ["single", "single", "single"], "CCN[Ac]"),
    (["Cbz", "N", "C", "C", "O"], ["single", "single", "single", "single"], "OCCN[Cbz]"),
    (["COOH", "C", "C", "Cl"], ["single", "single", "single"], "ClCC[COOH]"),
]


def _zigzag(labels, orders):
    coords = [(1.299 * i, 0.75 * (i % 2)) for i in range(len(labels))]
    bonds = [(i, i + 1, o) for i, o in enumerate(orders)]
    return make_graph(labels, bonds, coords)


def _tokens_for(graph, table):
    out = []
    for a in graph.atoms:
        if a.label in table:
            x, y = a.coords
            out.append(OcrToken(a.label, (x - 0.25, y - 0.2, x + 0.25, y + 0.2), 0.9))
    return out


def _rectifier_set():
    """50 samples: 7 hand-written, 36 generated, 7 multi-component."""
    table = default_superatom_table()
    rng = random.Random(5)
    cases = []
    for k, (labels, orders, smiles) in enumerate(HAND_CASES):
        expected = _zigzag(labels, orders)
        assert canonicalize_graph(expected).canonical_smiles == canonicalize_smiles(smiles)
        cases.append((f"hand-{k}", expand_all(expected, table), _tokens_for(expected, table), expected, None))
    for k in range(36):
        fx = rectifier_fixture(rng, table, labels=(RECTIFIER_LABELS[k % len(RECTIFIER_LABELS)],))
        cases.append((f"gen-{k:02d}", fx.expanded, list(fx.tokens), fx.expected, None))
    for k in range(7):
        fx = rectifier_fixture(rng, table, labels=(RECTIFIER_LABELS[k],), multi_component=True)
        cases.append((f"multi-{k}", fx.expanded, list(fx.tokens), None, fx.reject_reason))
    return cases


def _write_jsonl(path, rows):
    path.write_text("".join(json.dumps(r) + "\n" for r in rows))


def test_criterion_5_rectifier(tmp_path, capsys):
    cases = _rectifier_set()
    _write_jsonl(tmp_path / "in.jsonl", [{"sample_id": sid, "graph": graph_to_dict(g)} for sid, g, *_ in cases])
    _write_jsonl(tmp_path / "ocr.jsonl", [
        {"sample_id": sid, "tokens": [{"text": t.text, "bbox": list(t.bbox), "confidence": t.confidence} for t in toks]}
        for sid, _, toks, *_ in cases
    ])
    out = tmp_path / "out.jsonl"
    code = main(["rectify", "--input", str(tmp_path / "in.jsonl"), "--ocr", str(tmp_path / "ocr.jsonl"),
                 "--output", str(out)])
    capsys.readouterr()
    accepted = {r["sample_id"]: r for r in map(json.loads, out.read_text().splitlines())}
    rejected = {r["sample_id"]: r for r in map(json.loads, (tmp_path / "out.rejects.jsonl").read_text().splitlines())}

    plantable = [c for c in cases if c[3] is not None]
    exact = 0
    ledger_ok = 0
    for sid, expanded, _, expected, _ in plantable:
        rec = accepted.get(sid)
        if rec is None:
            continue
        got = graph_from_dict(rec["graph"])
        same = graph_match(got, expected) and rec["smiles"] == canonicalize_graph(expected).canonical_smiles
        exact += same
        removed = sum(r["collapsed_atoms"] - 1 for r in rec["replacements"])
        ledger_ok += expanded.num_atoms - removed == got.num_atoms
    multi = [c for c in cases if c[3] is None]
    multi_ok = sum(
        sid in rejected and rejected[sid]["reason"].startswith("multiple structures") and sid not in accepted
        for sid, *_ in multi
    )
    labels_seen = sorted({lab for sid, _, toks, *_ in plantable for lab in (t.text for t in toks)})
    ok = (code == 0 and exact == len(plantable) and ledger_ok == len(accepted) == len(plantable)
          and multi_ok == len(multi) and set(RECTIFIER_LABELS) <= set(labels_seen))
    record(5, ok, f"{len(cases)} samples: {exact}/{len(plantable)} plantable rectified exactly "
                  f"(labels {','.join(labels_seen)}), ledger holds on {ledger_ok}/{len(accepted)} accepted, "
                  f"{multi_ok}/{len(multi)} multi-component rejected via rejects file")
    assert ok


# 6 -------------------------------------------------------------------------


def test_criterion_6_legacy_star():
    pred = PredictionRecord("x", pred_smiles="CC[Ph]", pred_graph=parse_smiles("CC[Ph]"))
    s = score_record(pred, GroundTruth("x", "CC[Et]"), legacy_star=True)
    ok = s.legacy_star is True and s.gen_smiles is False and s.gra_smiles is False and s.graph is False
    record(6, ok, f"CC[Ph] vs CC[Et]: legacy={s.legacy_star} gen={s.gen_smiles} gra={s.gra_smiles} graph={s.graph}")
    assert ok


# 7 -------------------------------------------------------------------------


def test_criterion_7_dataset_build_and_self_score(tmp_path, capsys):
    data = tmp_path / "dataset.jsonl"
    report = tmp_path / "report.jsonl"
    start = time.perf_counter()
    build = main(["build-dataset", "--generate", "1000", "--seed", "7", "--output", str(data)])
    build_out = capsys.readouterr().out
    score = main(["score", "--predictions", str(data), "--ground-truth", str(data), "--report", str(report)])
    table = capsys.readouterr().out
    elapsed = time.perf_counter() - start
    n = len(data.read_text().splitlines())
    summary = json.loads(report.read_text().splitlines()[-1])
    scores = (summary["gen_smiles"], summary["gra_smiles"], summary["graph"])
    ok = (build == 0 and score == 0 and n == 1000 and json.loads(build_out)["self_check_failures"] == 0
          and scores == ("100.00", "100.00", "100.00") and elapsed < 120)
    record(7, ok, f"{n} records, self-score Gen/Gra/Graph = {'/'.join(scores)}, {elapsed:.1f}s (limit 120s)")
    assert ok, table


# 8 -------------------------------------------------------------------------


def test_criterion_8_golden_svgs():
    results = {}
    for name in ("benzene", "ethylene", "wedge_dash"):
        g = parse_molfile((GOLDEN / f"{name}.mol").read_text()).graph
        results[name] = depict(g).encode("utf-8") == (GOLDEN / f"{name}.svg").read_bytes()
    palette = {"#939FAA", "#E08684", "#F9CFA2", "#85B5B5", "#00FF00", "#FF0000"}
    used = set()
    for name in results:
        text = (GOLDEN / f"{name}.svg").read_text()
        used |= {c for c in palette if c in text}
    ok = all(results.values()) and used == palette
    record(8, ok, ", ".join(f"{k} {'identical' if v else 'DIFFERS'}" for k, v in results.items())
                  + f"; palette colors used {len(used)}/6")
    assert ok


# 9 -------------------------------------------------------------------------

FUZZ_COUNT = 1_000_000


def _mutate(rng: random.Random, data: bytes) -> bytes:
    b = bytearray(data)
    for _ in range(rng.randint(1, 4)):
        op = rng.random()
        k = rng.randrange(len(b) + 1)
        if op < 0.4 and b:
            b[min(k, len(b) - 1)] = rng.randrange(256)
        elif op < 0.7:
            b[k:k] = bytes([rng.randrange(256)])
        elif op < 0.9 and b:
            del b[min(k, len(b) - 1)]
        else:
            del b[k:]
    return bytes(b)


def test_criterion_9_fuzz(molecules):
    seeds = {
        "parse_smiles": (parse_smiles, [write_smiles(strip_for_smiles(g)).encode() for g in molecules[:100]]),
        "parse_molfile": (parse_molfile, [write_molfile(g).encode() for g in molecules[:100]]),
        "decode_cot": (decode_cot, [render_cot_text(encode_cot(g)).encode() for g in molecules[:100]]),
    }
    start = time.perf_counter()
    summary = []
    crashes = []
    for name, (fn, valid) in seeds.items():
        rng = random.Random(name)
        parsed = errors = 0
        for i in range(FUZZ_COUNT):
            # nine random byte strings, then one mutated valid input
            data = _mutate(rng, rng.choice(valid)) if i % 10 == 9 else rng.randbytes(rng.randint(0, 64))
            try:
                fn(data)
                parsed += 1
            except ParseError as exc:
                if exc.position is None or exc.position < 0 or not math.isfinite(exc.position):
                    crashes.append((name, data, f"unpositioned {exc!r}"))
                errors += 1
            except Exception as exc:  # noqa: BLE001 - any other exception is a crash
                crashes.append((name, data, repr(exc)))
        summary.append(f"{name} {parsed} ok/{errors} positioned errors")
    elapsed = time.perf_counter() - start
    ok = not crashes
    record(9, ok, f"{FUZZ_COUNT} inputs per parser: " + ", ".join(summary)
                  + f"; {len(crashes)} crashes, {elapsed:.0f}s")
    assert ok, crashes[:5]

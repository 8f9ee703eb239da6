"""Molecular graph toolkit for graph-traversal OCSR data: SMILES and molfile
codecs, canonicalization, CoT text codec, ground-truth rectification,
exact-match metrics and SVG depiction."""

from __future__ import annotations

__version__ = "0.1.0"

from .canon import CanonicalForm, canonical_ranks, canonicalize_graph, canonicalize_smiles
from .cot import (
    CotScript,
    ResponseText,
    TraverseBond,
    VisitAtom,
    decode_cot,
    encode_atoms_then_bonds,
    encode_cot,
    parse_cot_text,
    render_cot_text,
    render_response,
)
from .depict import DepictStyle, depict
from .errors import CotError, GraphError, GtrError, MolfileError, ParseError, SmilesError, TableError
from .graph import (
    AtomNode,
    BondDisplay,
    BondEdge,
    BondOrder,
    MolGraph,
    connected_components,
    make_graph,
    permute,
    validate,
)
from .metrics import (
    GroundTruth,
    PredictionRecord,
    ScoreReport,
    gen_smiles_match,
    gra_smiles_match,
    graph_match,
    legacy_star_match,
    score_dataset,
)
from .molfile import MolfileDocument, parse_molfile, write_molfile
from .rectify import (
    OcrToken,
    RectifiedSample,
    SuperatomEntry,
    SuperatomTable,
    collapse_superatom,
    default_superatom_table,
    load_superatom_table,
    match_abbreviation,
    rectify_sample,
    screen_single_molecule,
)
from .smiles import parse_smiles, write_smiles

__all__ = [name for name in dir() if not name.startswith("_")]

"""Command-line pipeline mirroring the HTTP service.

Every artifact a subcommand writes uses the same canonical serializer as the
corresponding service export, so the two routes produce byte-identical files
for identical inputs.
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import Optional, Sequence

from .alignment_io import AlignmentMatrix, parse_alignment
from .contingency import all_pairs_scan, edges_to_csv
from .crf_model import DEFAULT_KAPPA, CrfModel, build_crf, rank_variants
from .demo import demo_rows, demo_shifted_rows
from .layout import compute_layout
from .metagraph import FilterSpec, Metagraph, build_graph
from .realign import realign_iterate

__all__ = ["main"]


def _read(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    with open(path, "r", encoding="utf-8") as fh:
        return fh.read()


def _write(path: Optional[str], text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _load_matrix(path: str, fmt: str) -> AlignmentMatrix:
    return parse_alignment(_read(path), fmt=fmt)


def _load_graph(path: str, fmt: str) -> Metagraph:
    """Graph document if the input parses as JSON, otherwise scan an alignment."""
    text = _read(path)
    if text.lstrip().startswith("{"):
        return Metagraph.from_json(text)
    matrix = parse_alignment(text, fmt=fmt)
    return build_graph(all_pairs_scan(matrix))


def _filter_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--min-z", type=float, default=0.0,
                   help="minimum |standardized residual| (default 0)")
    p.add_argument("--max-p", type=float, default=1.0,
                   help="maximum p-value (default 1)")
    p.add_argument("--min-raw", type=float, default=0.0,
                   help="minimum |raw residual| (default 0)")
    p.add_argument("--sign", choices=("both", "positive", "negative"),
                   default="both", help="residual sign to keep")


def _spec(args) -> FilterSpec:
    return FilterSpec(min_abs_std_residual=args.min_z, max_p=args.max_p,
                      min_abs_raw=args.min_raw, sign=args.sign)


def _read_sequences(text: str) -> tuple[list[str], Optional[list[str]]]:
    """Plain lines, or FASTA when a '>' header leads; returns (rows, ids)."""
    lines = [ln.rstrip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln.strip()]
    if lines and lines[0].startswith(">"):
        ids, rows, buf = [], [], []
        for ln in lines:
            if ln.startswith(">"):
                if buf:
                    rows.append("".join(buf))
                    buf = []
                ids.append(ln[1:].strip().split()[0] if ln[1:].strip() else f"seq{len(ids)}")
            else:
                buf.append(ln.strip())
        if buf:
            rows.append("".join(buf))
        if len(ids) != len(rows):
            raise ValueError("FASTA record without sequence data")
        return rows, ids
    return [ln.strip() for ln in lines], None


def _dump(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


# --- subcommand bodies ----------------------------------------------------


def _cmd_scan(args) -> None:
    matrix = _load_matrix(args.alignment, args.format)
    _write(args.output, edges_to_csv(all_pairs_scan(matrix)))


def _cmd_filter(args) -> None:
    graph = _load_graph(args.input, args.format)
    graph.apply_filter(_spec(args))
    for entry in args.edit or []:
        key, sep, action = entry.rpartition(":")
        if not sep:
            raise ValueError(f"--edit wants KEY:ACTION, got {entry!r}")
        graph.edit_edge(key, action)
    _write(args.output, graph.to_json())


def _cmd_model(args) -> None:
    graph = Metagraph.from_json(_read(args.graph))
    if args.edges is not None:
        selection = [k for k in args.edges.split(",") if k]
    else:
        selection = args.selection
    model = build_crf(graph, selection=selection, kappa=args.kappa)
    _write(args.output, model.to_json())


def _cmd_score(args) -> None:
    model = CrfModel.from_json(_read(args.model))
    rows, ids = _read_sequences(_read(args.sequences))
    results = rank_variants(model, rows, ids=ids, reference=args.reference)
    _write(args.output, _dump({"results": results}))


def _cmd_realign(args) -> None:
    matrix = _load_matrix(args.alignment, args.format)
    manual = None
    if args.shift:
        manual = {}
        for entry in args.shift:
            row, sep, delta = entry.partition(":")
            if not sep:
                raise ValueError(f"--shift wants ROW:DELTA, got {entry!r}")
            manual[int(row)] = int(delta)
    result = realign_iterate(matrix, spec=_spec(args), s_max=args.s_max,
                             max_rounds=args.max_rounds, manual_shifts=manual)
    out = result.matrix
    if out.row_ids is not None:
        text = "".join(f">{rid}\n{out.row_string(i)}\n"
                       for i, rid in enumerate(out.row_ids))
    else:
        text = "".join(row + "\n" for row in out.rows())
    _write(args.output, text)
    if args.report:
        _write(args.report, _dump(result.to_document()))


def _cmd_layout(args) -> None:
    graph = Metagraph.from_json(_read(args.graph))
    _write(args.output, compute_layout(graph).to_json())


def _cmd_serve(args) -> None:
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(max_cells=args.max_cells),
                host=args.host, port=args.port, log_level="warning")


def _cmd_demo(args) -> None:
    rows = demo_shifted_rows() if args.shifted else demo_rows()
    _write(args.output, "".join(r + "\n" for r in rows))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="covarnet",
        description="Column-dependency analysis for categorical alignments.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("scan", help="alignment -> edge statistics CSV")
    p.add_argument("alignment", help="alignment file (plain rows or FASTA; - for stdin)")
    p.add_argument("--format", choices=("auto", "plain", "fasta"), default="auto")
    p.add_argument("-o", "--output", default=None)
    p.set_defaults(func=_cmd_scan)

    p = sub.add_parser("filter", help="alignment or graph + thresholds -> graph JSON")
    p.add_argument("input", help="alignment file or graph JSON (- for stdin)")
    p.add_argument("--format", choices=("auto", "plain", "fasta"), default="auto")
    _filter_args(p)
    p.add_argument("--edit", action="append", metavar="KEY:ACTION",
                   help="apply pin/remove/reset to an edge, in order; repeatable")
    p.add_argument("-o", "--output", default=None)
    p.set_defaults(func=_cmd_filter)

    p = sub.add_parser("model", help="graph + edge selection -> scoring model JSON")
    p.add_argument("graph", help="graph JSON file (- for stdin)")
    p.add_argument("--selection", choices=("visible", "pinned-only"),
                   default="visible")
    p.add_argument("--edges", default=None, metavar="KEY,KEY,...",
                   help="explicit edge keys instead of a named selection")
    p.add_argument("--kappa", type=float, default=DEFAULT_KAPPA)
    p.add_argument("-o", "--output", default=None)
    p.set_defaults(func=_cmd_model)

    p = sub.add_parser("score", help="model + sequences -> ranked score report")
    p.add_argument("model", help="model JSON file")
    p.add_argument("sequences", help="sequence file (plain lines or FASTA; - for stdin)")
    p.add_argument("--reference", default=None,
                   help="id whose score anchors log10_fold (default: top-ranked)")
    p.add_argument("-o", "--output", default=None)
    p.set_defaults(func=_cmd_score)

    p = sub.add_parser("realign", help="alignment -> realigned alignment + report")
    p.add_argument("alignment", help="alignment file (- for stdin)")
    p.add_argument("--format", choices=("auto", "plain", "fasta"), default="auto")
    _filter_args(p)
    p.add_argument("--s-max", type=int, default=3)
    p.add_argument("--max-rounds", type=int, default=5)
    p.add_argument("--shift", action="append", metavar="ROW:DELTA",
                   help="manual per-row shift; repeatable, disables detection")
    p.add_argument("--report", default=None, help="write the JSON report here")
    p.add_argument("-o", "--output", default=None)
    p.set_defaults(func=_cmd_realign)

    p = sub.add_parser("layout", help="graph JSON -> cylinder scene JSON")
    p.add_argument("graph", help="graph JSON file (- for stdin)")
    p.add_argument("-o", "--output", default=None)
    p.set_defaults(func=_cmd_layout)

    p = sub.add_parser("serve", help="start the local HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8642)
    p.add_argument("--max-cells", type=int, default=None,
                   help="reject uploads larger than this many cells")
    p.set_defaults(func=_cmd_serve)

    p = sub.add_parser("demo", help="emit the bundled demo alignment")
    p.add_argument("--shifted", action="store_true",
                   help="the variant with planted row shifts (realignment demo)")
    p.add_argument("-o", "--output", default=None)
    p.set_defaults(func=_cmd_demo)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except Exception as exc:  # noqa: BLE001 - single reporting point for module errors
        print(f"covarnet: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

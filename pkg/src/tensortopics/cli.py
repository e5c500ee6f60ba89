"""Command-line pipeline: ingest, factorize, select, report, or all at once.

Every stage reads and writes the documented on-disk formats, so stages can
be rerun individually and a rerun with identical inputs reproduces every
output file byte for byte.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import config as config_mod
from .corpus_ingest import (
    MODE_NAMES,
    build_counts,
    clean_and_filter,
    counts_to_tensor,
    dedup,
    load_corpus,
)
from .cp_als import load_model, save_model
from .ensemble import (
    STRATEGIES,
    components_from_model,
    ensemble_models,
    select_components_detailed,
    similarity_matrix,
)
from .report import build_report, emit_report
from .sparse_tensor import load_tensor, save_tensor

logger = logging.getLogger(__name__)

SELECTION_FORMAT = "component-selection"
SELECTION_SCHEMA_VERSION = 1


def _tensor_dir(cfg) -> Path:
    return cfg.workdir / "tensor"


def _model_path(cfg, rank: int) -> Path:
    return cfg.workdir / "models" / f"rank_{rank}.model"


def _selection_path(cfg) -> Path:
    return cfg.workdir / "selection.json"


def _require(cfg, *names):
    for name in names:
        if getattr(cfg, name) is None:
            raise ValueError(f"no {name} given; set it in the config file or pass --{name}")


def run_ingest(cfg) -> Path:
    """Corpus file -> cleaned, deduplicated ln(1+count) tensor container."""
    _require(cfg, "corpus", "workdir")
    records = load_corpus(cfg.corpus, cfg.corpus_format)
    records = dedup(clean_and_filter(records, cfg.rules))
    quad = build_counts(records, cfg.rules)
    tensor = counts_to_tensor(quad)
    out = save_tensor(tensor, quad.axes, MODE_NAMES, _tensor_dir(cfg))
    logger.info(
        "ingested %d document(s) into a %s tensor with %d entries",
        len(quad.axes[1]),
        "x".join(str(n) for n in tensor.shape),
        tensor.nnz,
    )
    return out


def run_factorize(cfg) -> list[Path]:
    """Tensor container -> one model file per configured rank."""
    _require(cfg, "workdir")
    tensor, _axes, mode_names = load_tensor(_tensor_dir(cfg))
    models = ensemble_models(tensor, cfg.selection.ranks, cfg.als, threads=cfg.threads)
    paths = []
    for rank in cfg.selection.ranks:
        if rank not in models:
            continue
        path = _model_path(cfg, rank)
        save_model(models[rank], path, mode_names=mode_names, labels_ref="../tensor")
        paths.append(path)
    if not paths:
        raise ValueError("every configured rank failed to factorize")
    return paths


def run_select(cfg) -> Path:
    """Model files -> selection.json listing the kept components."""
    _require(cfg, "workdir")
    components = []
    word_mode = None
    found_ranks = []
    for rank in cfg.selection.ranks:
        path = _model_path(cfg, rank)
        if not path.is_file():
            logger.warning("no model file for rank %d at %s, skipping", rank, path)
            continue
        model, _header = load_model(path)
        word_mode = model.order - 1
        components.extend(components_from_model(model, rank))
        found_ranks.append(rank)
    if not components:
        raise ValueError("no model files found for the configured ranks")

    result = select_components_detailed(components, cfg.selection, word_mode)
    payload = {
        "format": SELECTION_FORMAT,
        "schema_version": SELECTION_SCHEMA_VERSION,
        "strategy": cfg.selection.strategy,
        "threshold": cfg.selection.threshold,
        "ranks": found_ranks,
        "word_mode": word_mode,
        "pooled_count": result.pooled_count,
        "stable_count": result.stable_count,
        "kept": [
            {
                "origin_rank": c.origin_rank,
                "index_in_model": c.index_in_model,
                "weight": c.weight,
                "stability_partners": [list(p) for p in partners],
            }
            for c, partners in zip(result.kept, result.partners)
        ],
    }
    if cfg.similarity_matrix:
        payload["similarity_matrix"] = [
            [float(x) for x in row] for row in similarity_matrix(components, word_mode)
        ]
    path = _selection_path(cfg)
    path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    logger.info(
        "kept %d of %d pooled component(s)", len(result.kept), result.pooled_count
    )
    return path


def run_report(cfg) -> Path:
    """selection.json + models + tensor labels -> report bundle."""
    _require(cfg, "workdir")
    out_dir = cfg.output if cfg.output is not None else cfg.workdir / "report"
    selection = json.loads(_selection_path(cfg).read_text(encoding="utf-8"))
    if selection.get("format") != SELECTION_FORMAT:
        raise ValueError(f"unrecognized selection format {selection.get('format')!r}")
    _tensor, axes, mode_names = load_tensor(_tensor_dir(cfg))
    word_mode = int(selection["word_mode"])

    models = {}
    reports = []
    for item in selection["kept"]:
        rank = int(item["origin_rank"])
        if rank not in models:
            models[rank], _header = load_model(_model_path(cfg, rank))
        component = components_from_model(models[rank], rank)[int(item["index_in_model"])]
        reports.append(
            build_report(
                component,
                axes,
                mode_names,
                n=cfg.top_n,
                keyword_count=cfg.keyword_count,
                word_mode=word_mode,
            )
        )
    meta = {
        "ranks": selection["ranks"],
        "threshold": selection["threshold"],
        "strategy": selection["strategy"],
    }
    return emit_report(reports, out_dir, meta)


def run_pipeline(cfg) -> Path:
    """All four stages in sequence."""
    run_ingest(cfg)
    run_factorize(cfg)
    run_select(cfg)
    return run_report(cfg)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="FILE", help="key = value config file")
    common.add_argument("--seed", type=int, help="base rng seed")
    common.add_argument("--threads", type=int, help="worker threads for the rank ensemble")
    common.add_argument("--ranks", help="comma-separated rank list, e.g. 20,40,60")
    common.add_argument("--threshold", type=float, help="cosine similarity threshold")
    common.add_argument("--strategy", choices=STRATEGIES, help="component selection strategy")
    common.add_argument("--top-n", dest="top_n", type=int, help="labels per mode in reports")
    common.add_argument("--workdir", help="directory for intermediate files")

    parser = argparse.ArgumentParser(
        prog="tensortopics",
        description="Group a document corpus by topic via sparse tensor factorization.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", parents=[common], help="corpus file -> tensor container")
    p.add_argument("--corpus", help="corpus table (csv/tsv/jsonl)")
    p.add_argument(
        "--format", dest="corpus_format", choices=("csv", "tsv", "jsonl"),
        help="corpus file format",
    )

    sub.add_parser("factorize", parents=[common], help="tensor -> one model per rank")

    p = sub.add_parser("select", parents=[common], help="models -> selection.json")
    p.add_argument(
        "--similarity-matrix", dest="similarity_matrix", action="store_const",
        const=True, help="embed the full pairwise cosine matrix (quadratic in pool size)",
    )

    p = sub.add_parser("report", parents=[common], help="selection -> html/json bundle")
    p.add_argument("--out", dest="output", help="report output directory")

    p = sub.add_parser("pipeline", parents=[common], help="run all stages in order")
    p.add_argument("--corpus", help="corpus table (csv/tsv/jsonl)")
    p.add_argument(
        "--format", dest="corpus_format", choices=("csv", "tsv", "jsonl"),
        help="corpus file format",
    )
    p.add_argument("--out", dest="output", help="report output directory")
    p.add_argument(
        "--similarity-matrix", dest="similarity_matrix", action="store_const",
        const=True, help="embed the full pairwise cosine matrix (quadratic in pool size)",
    )
    return parser


_STAGES = {
    "ingest": run_ingest,
    "factorize": run_factorize,
    "select": run_select,
    "report": run_report,
    "pipeline": run_pipeline,
}


def cli_run(argv) -> int:
    """Parse argv and run one subcommand. Returns the process exit status."""
    parser = build_parser()
    try:
        args = parser.parse_args(list(argv))
    except SystemExit as exc:
        return int(exc.code or 0)

    if not logging.getLogger().handlers:
        logging.basicConfig(
            level=logging.INFO, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s"
        )

    try:
        cfg = (
            config_mod.load_config(args.config)
            if args.config
            else config_mod.PipelineConfig()
        )
        overrides = {}
        for name in (
            "seed",
            "threads",
            "threshold",
            "strategy",
            "top_n",
            "workdir",
            "corpus",
            "corpus_format",
            "output",
            "similarity_matrix",
        ):
            if hasattr(args, name) and getattr(args, name) is not None:
                overrides[name] = getattr(args, name)
        if getattr(args, "ranks", None) is not None:
            overrides["ranks"] = config_mod.parse_ranks(args.ranks)
        cfg = config_mod.apply_overrides(cfg, **overrides)
        _STAGES[args.command](cfg)
    except (ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


def main() -> None:
    sys.exit(cli_run(sys.argv[1:]))


if __name__ == "__main__":
    main()

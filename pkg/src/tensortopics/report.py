"""Human-readable summaries of selected components.

Each component is reduced to its top-scoring labels per mode plus a larger
keyword list for cloud rendering, then emitted as a deterministic bundle:
report.json (machine-readable, round-trips losslessly), index.html (one
self-contained page, no external assets), and summary.json (run metadata).
"""

from __future__ import annotations

import html
import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .ensemble import Component
from .sparse_tensor import AxisMap

logger = logging.getLogger(__name__)

REPORT_FORMAT = "component-report"
SUMMARY_FORMAT = "report-summary"
REPORT_SCHEMA_VERSION = 1
DEFAULT_TOP_N = 13
DEFAULT_KEYWORD_COUNT = 50
WORD_MODE = 3


@dataclass
class ComponentReport:
    """Top labels per mode for one kept component."""

    origin_rank: int
    index_in_model: int
    weight: float
    mode_tops: dict[str, list[tuple[str, float]]]
    keywords: list[tuple[str, float]]


def top_n(component: Component, mode: int, n: int, axis: AxisMap) -> list[tuple[str, float]]:
    """The n largest entries of one factor slice as (label, score) pairs.

    Ordered by descending score, ties broken lexicographically by label.
    Asking for more entries than the mode has returns them all.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    values = np.asarray(component.factor_slices[mode], dtype=np.float64).reshape(-1)
    if len(axis) != values.shape[0]:
        raise ValueError(
            f"axis has {len(axis)} labels but the factor slice has {values.shape[0]} rows"
        )
    order = sorted(range(values.shape[0]), key=lambda i: (-values[i], axis.label_of(i)))
    return [(axis.label_of(i), float(values[i])) for i in order[:n]]


def keyword_cloud(
    component: Component, n: int, axis: AxisMap, word_mode: int = WORD_MODE
) -> list[tuple[str, float]]:
    """The top n word-mode entries, for rendering as a cloud."""
    return top_n(component, word_mode, n, axis)


def build_report(
    component: Component,
    axes,
    mode_names,
    n: int = DEFAULT_TOP_N,
    keyword_count: int = DEFAULT_KEYWORD_COUNT,
    word_mode: int = WORD_MODE,
) -> ComponentReport:
    """Summarize one component against the tensor axes."""
    if len(axes) != len(mode_names) or len(axes) != len(component.factor_slices):
        raise ValueError("axes, mode names, and factor slices must align")
    mode_tops = {
        str(name): top_n(component, mode, n, axes[mode])
        for mode, name in enumerate(mode_names)
    }
    return ComponentReport(
        origin_rank=component.origin_rank,
        index_in_model=component.index_in_model,
        weight=component.weight,
        mode_tops=mode_tops,
        keywords=keyword_cloud(component, keyword_count, axes[word_mode], word_mode),
    )


def emit_report(reports, out_dir: str | Path, run_meta: dict) -> Path:
    """Write report.json, index.html, and summary.json into out_dir.

    run_meta carries the selection settings to echo (ranks, threshold,
    strategy). Output bytes depend only on the inputs: floats are serialized
    by repr via json, key order is fixed, and nothing records the time or
    environment. An empty report list still produces the full bundle with an
    explicit empty notice.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    reports = list(reports)

    payload = {
        "format": REPORT_FORMAT,
        "schema_version": REPORT_SCHEMA_VERSION,
        "components": [
            {
                "origin_rank": r.origin_rank,
                "index_in_model": r.index_in_model,
                "weight": r.weight,
                "modes": {
                    name: [[label, score] for label, score in pairs]
                    for name, pairs in r.mode_tops.items()
                },
                "keywords": [[word, score] for word, score in r.keywords],
            }
            for r in reports
        ],
    }
    (out_dir / "report.json").write_text(
        json.dumps(payload, indent=2) + "\n", encoding="utf-8"
    )

    summary = {
        "format": SUMMARY_FORMAT,
        "schema_version": REPORT_SCHEMA_VERSION,
        "component_count": len(reports),
        "ranks": list(run_meta.get("ranks", [])),
        "threshold": run_meta.get("threshold"),
        "strategy": run_meta.get("strategy"),
    }
    (out_dir / "summary.json").write_text(
        json.dumps(summary, indent=2) + "\n", encoding="utf-8"
    )

    (out_dir / "index.html").write_text(_render_html(reports, summary), encoding="utf-8")
    logger.info("wrote report bundle with %d component(s) to %s", len(reports), out_dir)
    return out_dir


def load_reports(path: str | Path) -> list[ComponentReport]:
    """Read report.json back into ComponentReport objects (lossless)."""
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    if payload.get("format") != REPORT_FORMAT:
        raise ValueError(f"unrecognized report format {payload.get('format')!r}")
    out = []
    for item in payload["components"]:
        out.append(
            ComponentReport(
                origin_rank=int(item["origin_rank"]),
                index_in_model=int(item["index_in_model"]),
                weight=float(item["weight"]),
                mode_tops={
                    name: [(str(label), float(score)) for label, score in pairs]
                    for name, pairs in item["modes"].items()
                },
                keywords=[(str(w), float(s)) for w, s in item["keywords"]],
            )
        )
    return out


_CSS = """
body { font-family: Georgia, serif; margin: 2rem auto; max-width: 60rem;
       color: #222; background: #fdfdfc; }
h1 { font-size: 1.6rem; border-bottom: 2px solid #444; padding-bottom: .3rem; }
h2 { font-size: 1.2rem; margin-top: 2.2rem; }
table { border-collapse: collapse; margin: .6rem 0; width: 100%; }
th, td { border: 1px solid #bbb; padding: .25rem .5rem; text-align: left;
         font-size: .85rem; }
th { background: #eee; }
td.score { text-align: right; font-variant-numeric: tabular-nums; }
.negative { color: #b00020; }
.cloud { line-height: 2.1; margin: .8rem 0; }
.cloud span { margin-right: .55rem; white-space: nowrap; }
.meta { color: #666; font-size: .85rem; }
.empty { margin: 3rem 0; font-style: italic; color: #666; }
"""


def _fmt_score(score: float) -> str:
    text = f"{score:.6g}"
    if score < 0.0:
        return f'<span class="negative">{text}</span>'
    return text


def _render_html(reports, summary: dict) -> str:
    parts = [
        "<meta charset=\"utf-8\">",
        "<title>Component report</title>",
        f"<style>{_CSS}</style>",
        "<h1>Component report</h1>",
        '<p class="meta">components: {n} | ranks: {ranks} | threshold: {thr} | strategy: {strat}</p>'.format(
            n=summary["component_count"],
            ranks=html.escape(", ".join(str(r) for r in summary["ranks"])) or "?",
            thr=html.escape(str(summary["threshold"])),
            strat=html.escape(str(summary["strategy"])),
        ),
    ]
    if not reports:
        parts.append('<p class="empty">No components were selected.</p>')
        return "\n".join(parts) + "\n"

    for pos, r in enumerate(reports, start=1):
        parts.append(
            f"<h2>Component {pos} "
            f'<span class="meta">(rank {r.origin_rank}, index {r.index_in_model}, '
            f"weight {_fmt_score(r.weight)})</span></h2>"
        )
        for name, pairs in r.mode_tops.items():
            parts.append(f"<h3>{html.escape(name)}</h3>")
            parts.append("<table><tr><th>label</th><th>score</th></tr>")
            for label, score in pairs:
                shown = html.escape(label) if label else "&nbsp;"
                parts.append(
                    f'<tr><td>{shown}</td><td class="score">{_fmt_score(score)}</td></tr>'
                )
            parts.append("</table>")
        parts.append("<h3>keywords</h3>")
        parts.append(f'<div class="cloud">{_render_cloud(r.keywords)}</div>')
    return "\n".join(parts) + "\n"


def _render_cloud(keywords) -> str:
    if not keywords:
        return "(none)"
    peak = max(abs(score) for _, score in keywords)
    spans = []
    for word, score in keywords:
        size = 0.8 + (1.4 * abs(score) / peak if peak > 0.0 else 0.0)
        cls = ' class="negative"' if score < 0.0 else ""
        spans.append(
            f'<span{cls} style="font-size:{size:.2f}em" title="{score!r}">'
            f"{html.escape(word)}</span>"
        )
    return " ".join(spans)

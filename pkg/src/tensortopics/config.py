"""Pipeline configuration: one flat key = value file, overridable by CLI flags.

Relative paths in a config file resolve against the config file's directory,
so a config checked in next to its corpus keeps working from any cwd.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

from .corpus_ingest import CleaningRules, load_stopwords
from .cp_als import AlsOptions
from .ensemble import SelectionConfig
from .report import DEFAULT_KEYWORD_COUNT, DEFAULT_TOP_N


@dataclass(frozen=True)
class PipelineConfig:
    """Everything one end-to-end run needs."""

    corpus: Path | None = None
    corpus_format: str = "csv"
    workdir: Path | None = None
    output: Path | None = None
    rules: CleaningRules = field(default_factory=CleaningRules)
    selection: SelectionConfig = field(default_factory=SelectionConfig)
    als: AlsOptions = field(default_factory=AlsOptions)
    top_n: int = DEFAULT_TOP_N
    keyword_count: int = DEFAULT_KEYWORD_COUNT
    threads: int = 1
    similarity_matrix: bool = False

    def __post_init__(self):
        if self.top_n < 1:
            raise ValueError(f"top_n must be >= 1, got {self.top_n}")
        if self.keyword_count < 1:
            raise ValueError(f"keyword_count must be >= 1, got {self.keyword_count}")
        if self.threads < 1:
            raise ValueError(f"threads must be >= 1, got {self.threads}")


def parse_ranks(text: str) -> tuple[int, ...]:
    """Parse a comma-separated rank list like '20,40,60'."""
    try:
        ranks = tuple(int(part.strip()) for part in text.split(",") if part.strip())
    except ValueError:
        raise ValueError(f"ranks must be comma-separated integers, got {text!r}")
    if not ranks:
        raise ValueError(f"ranks must be non-empty, got {text!r}")
    return ranks


_KNOWN_KEYS = (
    "corpus",
    "format",
    "workdir",
    "output",
    "ranks",
    "threshold",
    "strategy",
    "seed",
    "max_iters",
    "fit_tolerance",
    "threads",
    "top_n",
    "keywords",
    "stopwords",
    "min_token_length",
    "dna_min_run",
    "max_char_repeat",
    "max_consonant_run",
    "max_nonascii_fraction",
    "name_df_floor",
    "similarity_matrix",
)


def load_config(path: str | Path) -> PipelineConfig:
    """Parse a key = value config file. Unknown keys are an error."""
    path = Path(path)
    base = path.parent
    raw: dict[str, str] = {}
    for line_no, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{line_no}: expected key = value, got {line!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in _KNOWN_KEYS:
            raise ValueError(f"{path}:{line_no}: unknown config key {key!r}")
        if key in raw:
            raise ValueError(f"{path}:{line_no}: duplicate config key {key!r}")
        raw[key] = value

    def path_of(key: str) -> Path | None:
        if key not in raw:
            return None
        p = Path(raw[key])
        return p if p.is_absolute() else base / p

    rules_kwargs = {}
    if "stopwords" in raw:
        rules_kwargs["stopwords"] = load_stopwords(path_of("stopwords"))
    for key, attr in (
        ("min_token_length", "min_token_length"),
        ("dna_min_run", "dna_min_run"),
        ("max_char_repeat", "max_char_repeat"),
        ("max_consonant_run", "max_consonant_run"),
        ("name_df_floor", "name_df_floor"),
    ):
        if key in raw:
            rules_kwargs[attr] = int(raw[key])
    if "max_nonascii_fraction" in raw:
        rules_kwargs["max_nonascii_fraction"] = float(raw["max_nonascii_fraction"])

    selection_kwargs = {}
    if "ranks" in raw:
        selection_kwargs["ranks"] = parse_ranks(raw["ranks"])
    if "threshold" in raw:
        selection_kwargs["threshold"] = float(raw["threshold"])
    if "strategy" in raw:
        selection_kwargs["strategy"] = raw["strategy"]

    als_kwargs = {}
    if "seed" in raw:
        als_kwargs["seed"] = int(raw["seed"])
    if "max_iters" in raw:
        als_kwargs["max_iters"] = int(raw["max_iters"])
    if "fit_tolerance" in raw:
        als_kwargs["fit_tolerance"] = float(raw["fit_tolerance"])

    return PipelineConfig(
        corpus=path_of("corpus"),
        corpus_format=raw.get("format", "csv"),
        workdir=path_of("workdir"),
        output=path_of("output"),
        rules=CleaningRules(**rules_kwargs),
        selection=SelectionConfig(**selection_kwargs),
        als=AlsOptions(**als_kwargs),
        top_n=int(raw.get("top_n", DEFAULT_TOP_N)),
        keyword_count=int(raw.get("keywords", DEFAULT_KEYWORD_COUNT)),
        threads=int(raw.get("threads", 1)),
        similarity_matrix=raw.get("similarity_matrix", "false").lower()
        in ("1", "true", "yes"),
    )


def apply_overrides(cfg: PipelineConfig, **overrides) -> PipelineConfig:
    """Return cfg with non-None override values applied.

    Accepts the flat CLI names: seed, threads, ranks, threshold, strategy,
    top_n, corpus, corpus_format, workdir, output, similarity_matrix.
    """
    updates = {}
    direct = (
        "corpus",
        "corpus_format",
        "workdir",
        "output",
        "top_n",
        "threads",
        "similarity_matrix",
    )
    for name in direct:
        value = overrides.pop(name, None)
        if value is not None:
            updates[name] = Path(value) if name in ("corpus", "workdir", "output") else value

    selection = cfg.selection
    sel_updates = {}
    for name in ("ranks", "threshold", "strategy"):
        value = overrides.pop(name, None)
        if value is not None:
            sel_updates[name] = value
    if sel_updates:
        updates["selection"] = replace(selection, **sel_updates)

    seed = overrides.pop("seed", None)
    if seed is not None:
        updates["als"] = replace(cfg.als, seed=seed)

    if overrides:
        raise TypeError(f"unknown overrides: {sorted(overrides)}")
    return replace(cfg, **updates) if updates else cfg

"""Corpus loading, cleaning, deduplication, tokenization, and tensor assembly.

The pipeline is: load_corpus -> clean_and_filter -> dedup -> build_counts ->
counts_to_tensor. The tensor axes are (first_author, document, journal,
words); entry values are ln(1 + count) so bursty word repetition inside one
document is damped without vanishing.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import re
from dataclasses import dataclass, replace
from pathlib import Path

from .sparse_tensor import AxisMap, SparseTensorCOO, from_entries

logger = logging.getLogger(__name__)

MODE_NAMES = ("first_author", "document", "journal", "words")
UNKNOWN_JOURNAL = "(unknown-journal)"
CORPUS_FORMATS = ("csv", "tsv", "jsonl")

# Classic English function-word list. Kept deliberately generic; domain
# stopwords belong in a caller-supplied file.
DEFAULT_STOPWORDS = frozenset(
    """
    a about above after again against all also am an and any are as at be
    because been before being below between both but by can could did do does
    doing down during each few for from further had has have having he her
    here hers herself him himself his how i if in into is it its itself just
    me more most my myself no nor not now of off on once only or other our
    ours ourselves out over own same she should so some such than that the
    their theirs them themselves then there these they this those through to
    too under until up very was we were what when where which while who whom
    why will with would you your yours yourself yourselves
    """.split()
)

_VOWELS = frozenset("aeiouy")
_RAW_TOKEN_RE = re.compile(r"[A-Za-z]+")
_LOWER_TOKEN_RE = re.compile(r"[a-z]+")


@dataclass(frozen=True)
class CorpusRecord:
    """One article: title, abstract, first author, journal, and body text."""

    title: str
    abstract: str
    first_author: str
    journal: str
    body: str


@dataclass(frozen=True)
class CleaningRules:
    """Knobs for record filtering and tokenization.

    name_df_floor drives a heuristic pass that drops tokens appearing only
    capitalized in the corpus with document frequency below the floor; these
    are overwhelmingly person and place names. 0 disables the pass.
    """

    stopwords: frozenset[str] = DEFAULT_STOPWORDS
    min_token_length: int = 3
    dna_min_run: int = 8
    max_char_repeat: int = 3
    max_consonant_run: int = 5
    max_nonascii_fraction: float = 0.5
    name_df_floor: int = 2

    def __post_init__(self):
        object.__setattr__(self, "stopwords", frozenset(self.stopwords))
        if any(w != w.lower() for w in self.stopwords):
            raise ValueError("stopwords must be lowercase")
        if self.min_token_length < 1:
            raise ValueError(f"min_token_length must be >= 1, got {self.min_token_length}")
        if self.dna_min_run < 2:
            raise ValueError(f"dna_min_run must be >= 2, got {self.dna_min_run}")
        if self.max_char_repeat < 1:
            raise ValueError(f"max_char_repeat must be >= 1, got {self.max_char_repeat}")
        if self.max_consonant_run < 1:
            raise ValueError(f"max_consonant_run must be >= 1, got {self.max_consonant_run}")
        if not 0.0 <= self.max_nonascii_fraction <= 1.0:
            raise ValueError(
                f"max_nonascii_fraction must be in [0, 1], got {self.max_nonascii_fraction}"
            )
        if self.name_df_floor < 0:
            raise ValueError(f"name_df_floor must be >= 0, got {self.name_df_floor}")


def load_stopwords(path: str | Path) -> frozenset[str]:
    """Read a stopword file: one word per line, '#' comments, blanks ignored."""
    words = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            words.append(line.lower())
    return frozenset(words)


def load_corpus(source: str | Path, corpus_format: str = "csv") -> list[CorpusRecord]:
    """Read a delimited table or JSON-lines file into records.

    Columns: title, abstract, first_author, journal, and body (inline text)
    or body_path (file relative to the source). Malformed rows are skipped
    and counted; an unreadable body_path yields an empty body. An unreadable
    or badly-headed source is a hard error.
    """
    source = Path(source)
    if corpus_format not in CORPUS_FORMATS:
        raise ValueError(
            f"unknown corpus format {corpus_format!r}, expected one of {CORPUS_FORMATS}"
        )
    required = ("title", "abstract", "first_author", "journal")
    records: list[CorpusRecord] = []
    malformed = 0
    unreadable_bodies = 0

    def build(row: dict, where: str) -> CorpusRecord | None:
        nonlocal malformed, unreadable_bodies
        values = {}
        for key in required:
            v = row.get(key)
            if not isinstance(v, str):
                malformed += 1
                logger.warning("%s: missing or non-text %r field, row skipped", where, key)
                return None
            values[key] = v
        body = row.get("body")
        if not isinstance(body, str):
            body = ""
        if not body:
            body_path = row.get("body_path")
            if isinstance(body_path, str) and body_path:
                try:
                    body = (source.parent / body_path).read_text(encoding="utf-8")
                except OSError:
                    unreadable_bodies += 1
                    logger.warning("%s: unreadable body_path %r", where, body_path)
                    body = ""
        return CorpusRecord(
            title=values["title"],
            abstract=values["abstract"],
            first_author=values["first_author"],
            journal=values["journal"],
            body=body,
        )

    if corpus_format == "jsonl":
        with source.open(encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                where = f"{source}:{line_no}"
                try:
                    row = json.loads(line)
                except json.JSONDecodeError:
                    malformed += 1
                    logger.warning("%s: invalid JSON, row skipped", where)
                    continue
                if not isinstance(row, dict):
                    malformed += 1
                    logger.warning("%s: row is not an object, skipped", where)
                    continue
                record = build(row, where)
                if record is not None:
                    records.append(record)
    else:
        delimiter = "," if corpus_format == "csv" else "\t"
        with source.open(encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh, delimiter=delimiter)
            fields = reader.fieldnames
            if fields is None:
                return []
            missing = [k for k in required if k not in fields]
            if missing:
                raise ValueError(f"{source}: header lacks required columns {missing}")
            if "body" not in fields and "body_path" not in fields:
                raise ValueError(f"{source}: header needs a body or body_path column")
            for line_no, row in enumerate(reader, start=2):
                record = build(row, f"{source}:{line_no}")
                if record is not None:
                    records.append(record)

    if malformed or unreadable_bodies:
        logger.warning(
            "%s: skipped %d malformed row(s), %d unreadable body file(s)",
            source,
            malformed,
            unreadable_bodies,
        )
    logger.info("%s: loaded %d record(s)", source, len(records))
    return records


def _normalize_ws(text: str) -> str:
    return " ".join(text.split())


def _clean_label(text: str) -> str:
    # lowercase, squash every run of digits/punctuation/other to a space
    return _normalize_ws(re.sub(r"[^a-z]+", " ", text.lower()))


def _nonascii_letter_fraction(text: str) -> float:
    letters = 0
    non_ascii = 0
    for ch in text:
        if ch.isalpha():
            letters += 1
            if ord(ch) > 127:
                non_ascii += 1
    if letters == 0:
        return 0.0
    return non_ascii / letters


def clean_and_filter(records, rules: CleaningRules) -> list[CorpusRecord]:
    """Drop unusable records and canonicalize the metadata fields.

    Records with an empty body, or whose body's alphabetic characters are
    mostly non-ASCII (above rules.max_nonascii_fraction, a cheap non-English
    test), are dropped. Kept records get lowercased letter-only titles and
    journals and whitespace-normalized author names; bodies are untouched.
    Idempotent.
    """
    kept = []
    dropped_empty = 0
    dropped_lang = 0
    for rec in records:
        if not rec.body.strip():
            dropped_empty += 1
            continue
        if _nonascii_letter_fraction(rec.body) > rules.max_nonascii_fraction:
            dropped_lang += 1
            continue
        kept.append(
            replace(
                rec,
                title=_clean_label(rec.title),
                journal=_clean_label(rec.journal),
                first_author=_normalize_ws(rec.first_author),
            )
        )
    if dropped_empty or dropped_lang:
        logger.info(
            "dropped %d empty-body and %d non-English record(s)",
            dropped_empty,
            dropped_lang,
        )
    return kept


def dedup(records) -> list[CorpusRecord]:
    """Keep the first record per cleaned title and per normalized abstract.

    A record is dropped when any earlier record (kept or dropped) shared its
    title or its non-empty abstract. Empty abstracts never collide; equal
    (even empty) titles do.
    """
    seen_titles: set[str] = set()
    seen_abstracts: set[str] = set()
    out = []
    for rec in records:
        abstract_key = _normalize_ws(rec.abstract.lower())
        duplicate = rec.title in seen_titles or (
            abstract_key != "" and abstract_key in seen_abstracts
        )
        seen_titles.add(rec.title)
        if abstract_key:
            seen_abstracts.add(abstract_key)
        if not duplicate:
            out.append(rec)
    if len(out) != len(records):
        logger.info("dropped %d duplicate record(s)", len(records) - len(out))
    return out


def _is_nonsense(token: str, rules: CleaningRules) -> bool:
    if not any(ch in _VOWELS for ch in token):
        return True
    if re.search(r"(.)\1{%d,}" % rules.max_char_repeat, token):
        return True
    if re.search(r"[^aeiouy]{%d,}" % (rules.max_consonant_run + 1), token):
        return True
    return False


def tokenize(body: str, rules: CleaningRules) -> list[str]:
    """Lowercase ASCII-alphabetic tokens from a body, in text order.

    Filters, in order: shorter than min_token_length, stopwords, DNA-like
    runs (length >= dna_min_run over the alphabet {a, c, g, t, u}), and
    nonsense words (no vowel, any character repeated more than
    max_char_repeat times consecutively, or a consonant run longer than
    max_consonant_run).
    """
    dna_re = re.compile(r"[acgtu]{%d,}" % rules.dna_min_run)
    out = []
    for token in _LOWER_TOKEN_RE.findall(body.lower()):
        if len(token) < rules.min_token_length:
            continue
        if token in rules.stopwords:
            continue
        if dna_re.fullmatch(token):
            continue
        if _is_nonsense(token, rules):
            continue
        out.append(token)
    return out


def _rare_capitalized_tokens(records, rules: CleaningRules) -> frozenset[str]:
    """Tokens that never appear lowercase-initial and sit under the DF floor.

    Proxy for stripping author and place names out of the vocabulary: a
    capitalized-only word that almost no document mentions is far more
    likely a name than a topic word.
    """
    if rules.name_df_floor <= 0:
        return frozenset()
    lowercase_start: set[str] = set()
    df: dict[str, int] = {}
    for rec in records:
        seen_here = set()
        for raw in _RAW_TOKEN_RE.findall(rec.body):
            lowered = raw.lower()
            if raw[0].islower():
                lowercase_start.add(lowered)
            if lowered not in seen_here:
                seen_here.add(lowered)
                df[lowered] = df.get(lowered, 0) + 1
    return frozenset(
        w for w, n in df.items() if w not in lowercase_start and n < rules.name_df_floor
    )


@dataclass
class QuadCounts:
    """Raw (author, document, journal, word) -> count map plus the four axes."""

    counts: dict[tuple[int, int, int, int], int]
    axes: tuple[AxisMap, AxisMap, AxisMap, AxisMap]

    def token_total(self) -> int:
        return sum(self.counts.values())


def build_counts(records, rules: CleaningRules) -> QuadCounts:
    """Tokenize deduplicated records into quadruple counts.

    Axis indices are assigned in first-seen order, so the same record list
    always produces the same maps. Documents are keyed by cleaned title,
    authors verbatim (whitespace-normalized), and a record with an empty
    journal lands under the reserved "(unknown-journal)" label. Records
    whose body yields no tokens are dropped with a diagnostic.
    """
    excluded = _rare_capitalized_tokens(records, rules)
    if excluded:
        logger.info("name filter excluded %d token(s) from the vocabulary", len(excluded))

    authors: dict[str, int] = {}
    documents: dict[str, int] = {}
    journals: dict[str, int] = {}
    words: dict[str, int] = {}

    def intern(table: dict[str, int], label: str) -> int:
        if label not in table:
            table[label] = len(table)
        return table[label]

    counts: dict[tuple[int, int, int, int], int] = {}
    dropped = 0
    for rec in records:
        tokens = [t for t in tokenize(rec.body, rules) if t not in excluded]
        if not tokens:
            dropped += 1
            logger.info("document %r yields no tokens, dropped", rec.title)
            continue
        a = intern(authors, rec.first_author)
        d = intern(documents, rec.title)
        j = intern(journals, rec.journal if rec.journal else UNKNOWN_JOURNAL)
        for token in tokens:
            w = intern(words, token)
            key = (a, d, j, w)
            counts[key] = counts.get(key, 0) + 1
    if dropped:
        logger.info("dropped %d tokenless document(s)", dropped)
    axes = (
        AxisMap(authors),
        AxisMap(documents),
        AxisMap(journals),
        AxisMap(words),
    )
    return QuadCounts(counts=counts, axes=axes)


def counts_to_tensor(quad: QuadCounts) -> SparseTensorCOO:
    """ln(1 + count) tensor over the (author, document, journal, word) axes."""
    if not quad.counts:
        raise ValueError("cannot build a tensor from an empty corpus")
    shape = tuple(len(axis) for axis in quad.axes)
    entries = [
        (coord, math.log1p(count)) for coord, count in quad.counts.items()
    ]
    return from_entries(entries, shape)

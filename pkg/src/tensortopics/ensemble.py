"""Rank-ensemble factorization and cosine-similarity component selection.

One CP model is fit per rank in a configured set, every component from every
model is pooled, and a word-factor cosine criterion picks a deduplicated
subset to report. Fitting the same data at several ranks and keeping only
components that recur across ranks (the stable-then-dedup strategy) trades
redundant compute for robustness to any single rank choice.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .cp_als import AlsDivergenceError, AlsOptions, KruskalModel, cp_als
from .sparse_tensor import SparseTensorCOO

logger = logging.getLogger(__name__)

STRATEGIES = ("stable-then-dedup", "greedy-dedup")
DEFAULT_RANKS = (20, 40, 60, 80, 100, 120, 200)


class ZeroVectorError(ValueError):
    """Raised when a cosine similarity is requested against a zero vector."""


@dataclass(frozen=True)
class SelectionConfig:
    """Rank set plus the cosine threshold and strategy used for selection.

    threshold is meaningful on [0, 1]; values above 1 make every pair
    dissimilar, which disables deduplication (occasionally useful for
    diagnostics under greedy-dedup).
    """

    ranks: tuple[int, ...] = DEFAULT_RANKS
    threshold: float = 0.35
    strategy: str = "stable-then-dedup"

    def __post_init__(self):
        object.__setattr__(self, "ranks", tuple(int(r) for r in self.ranks))
        if len(self.ranks) == 0:
            raise ValueError("ranks must be non-empty")
        if any(r < 1 for r in self.ranks):
            raise ValueError(f"ranks must be positive, got {self.ranks}")
        if any(b <= a for a, b in zip(self.ranks, self.ranks[1:])):
            raise ValueError(f"ranks must be strictly ascending, got {self.ranks}")
        if not math.isfinite(self.threshold) or self.threshold < 0.0:
            raise ValueError(f"threshold must be finite and >= 0, got {self.threshold}")
        if self.strategy not in STRATEGIES:
            raise ValueError(
                f"unknown strategy {self.strategy!r}, expected one of {STRATEGIES}"
            )


@dataclass
class Component:
    """One rank-one term lifted out of a model, tagged with its origin."""

    origin_rank: int
    index_in_model: int
    weight: float
    factor_slices: list[np.ndarray]

    def word_slice(self, word_mode: int) -> np.ndarray:
        return self.factor_slices[word_mode]


@dataclass
class SelectionResult:
    """Kept components plus the evidence behind the decision.

    partners[i] lists (origin_rank, index_in_model) of the cross-rank
    components that certified kept[i] as stable; empty under greedy-dedup.
    """

    kept: list[Component]
    partners: list[list[tuple[int, int]]]
    pooled_count: int
    stable_count: int | None = None
    similarity: np.ndarray | None = field(default=None, repr=False)


def rank_seed(base_seed: int, rank: int) -> int:
    """Deterministic per-rank seed derived from (base_seed, rank)."""
    return int(np.random.SeedSequence([int(base_seed), int(rank)]).generate_state(1)[0])


def components_from_model(model: KruskalModel, origin_rank: int) -> list[Component]:
    """Split a model into per-component column slices."""
    out = []
    for r in range(model.rank):
        out.append(
            Component(
                origin_rank=int(origin_rank),
                index_in_model=r,
                weight=float(model.weights[r]),
                factor_slices=[np.array(f[:, r]) for f in model.factors],
            )
        )
    return out


def ensemble_models(
    tensor: SparseTensorCOO,
    ranks,
    opts: AlsOptions | None = None,
    threads: int = 1,
) -> dict[int, KruskalModel]:
    """Fit one CP model per rank, keyed by rank.

    Each rank runs with its own seed derived from (opts.seed, rank), so the
    result does not depend on execution order and thread count cannot change
    it. A rank whose solve diverges is logged and dropped; the rest of the
    ensemble still returns.
    """
    if opts is None:
        opts = AlsOptions()
    ranks = list(ranks)

    def run_one(rank: int):
        rank_opts = AlsOptions(
            max_iters=opts.max_iters,
            fit_tolerance=opts.fit_tolerance,
            seed=rank_seed(opts.seed, rank),
        )
        return cp_als(tensor, rank, rank_opts)

    results: dict[int, KruskalModel] = {}

    def collect(rank: int, outcome):
        try:
            model, fit_history = outcome()
        except AlsDivergenceError as exc:
            logger.warning("dropping rank %d: %s", rank, exc)
            return
        results[rank] = model
        logger.info(
            "rank %d: fit %.6f after %d sweep(s)", rank, fit_history[-1], len(fit_history)
        )

    if threads > 1 and len(ranks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = {rank: pool.submit(run_one, rank) for rank in ranks}
            for rank in ranks:
                collect(rank, futures[rank].result)
    else:
        for rank in ranks:
            collect(rank, lambda rank=rank: run_one(rank))
    return results


def decompose_ensemble(
    tensor: SparseTensorCOO,
    cfg: SelectionConfig,
    opts: AlsOptions | None = None,
    threads: int = 1,
) -> list[Component]:
    """Fit one CP model per configured rank and pool all components in rank order."""
    models = ensemble_models(tensor, cfg.ranks, opts, threads)
    pooled: list[Component] = []
    for rank in cfg.ranks:
        if rank in models:
            pooled.extend(components_from_model(models[rank], rank))
    return pooled


def cosine(u, v) -> float:
    """Cosine similarity of two equal-length vectors; zero vectors are rejected."""
    u = np.asarray(u, dtype=np.float64).reshape(-1)
    v = np.asarray(v, dtype=np.float64).reshape(-1)
    if u.shape != v.shape:
        raise ValueError(f"vector length mismatch: {u.shape[0]} vs {v.shape[0]}")
    nu = math.sqrt(float(np.dot(u, u)))
    nv = math.sqrt(float(np.dot(v, v)))
    if nu == 0.0 or nv == 0.0:
        raise ZeroVectorError("cosine similarity is undefined for a zero vector")
    return float(np.dot(u, v)) / (nu * nv)


def similarity_matrix(components, word_mode: int) -> np.ndarray:
    """Pairwise word-slice cosine matrix: symmetric, unit diagonal."""
    if len(components) == 0:
        raise ValueError("similarity_matrix requires at least one component")
    mat = _unit_word_matrix(components, word_mode, on_zero="raise")
    sims = mat @ mat.T
    sims = (sims + sims.T) / 2.0
    np.fill_diagonal(sims, 1.0)
    return sims


def _unit_word_matrix(components, word_mode: int, on_zero: str):
    lengths = {len(c.word_slice(word_mode)) for c in components}
    if len(lengths) != 1:
        raise ValueError(f"components disagree on word-mode extent: {sorted(lengths)}")
    rows = []
    keep = []
    for i, c in enumerate(components):
        v = np.asarray(c.word_slice(word_mode), dtype=np.float64).reshape(-1)
        n = math.sqrt(float(np.dot(v, v)))
        if n == 0.0:
            if on_zero == "raise":
                raise ZeroVectorError(
                    f"component (rank {c.origin_rank}, index {c.index_in_model}) "
                    "has an all-zero word slice"
                )
            continue
        rows.append(v / n)
        keep.append(i)
    if on_zero == "raise":
        return np.array(rows)
    return np.array(rows), keep


def select_components_detailed(
    components, cfg: SelectionConfig, word_mode: int
) -> SelectionResult:
    """Select a deduplicated component subset by word-factor cosine similarity.

    stable-then-dedup: a component is a candidate only if some component from
    a DIFFERENT rank matches it at cosine >= threshold (cross-rank recurrence
    as evidence it is not an artifact of one rank choice); candidates are then
    greedily deduplicated. greedy-dedup: all components are candidates.

    Either way, candidates are visited in descending |weight| order (ties by
    (origin_rank, index_in_model)) and kept iff their cosine to every
    already-kept component is < threshold. Components with all-zero word
    slices cannot be compared and are excluded up front with a warning.
    """
    components = list(components)
    if len(components) == 0:
        return SelectionResult(kept=[], partners=[], pooled_count=0, stable_count=0)
    mat, keep_idx = _unit_word_matrix(components, word_mode, on_zero="skip")
    dropped = len(components) - len(keep_idx)
    if dropped:
        logger.warning("excluded %d component(s) with all-zero word slices", dropped)
    if len(keep_idx) == 0:
        return SelectionResult(kept=[], partners=[], pooled_count=len(components), stable_count=0)

    comparable = [components[i] for i in keep_idx]
    sims = mat @ mat.T

    partners_of: dict[int, list[tuple[int, int]]] = {}
    if cfg.strategy == "stable-then-dedup":
        candidates = []
        for i, c in enumerate(comparable):
            witnesses = [
                (comparable[j].origin_rank, comparable[j].index_in_model)
                for j in range(len(comparable))
                if comparable[j].origin_rank != c.origin_rank
                and sims[i, j] >= cfg.threshold
            ]
            if witnesses:
                candidates.append(i)
                partners_of[i] = witnesses
        stable_count = len(candidates)
    else:
        candidates = list(range(len(comparable)))
        stable_count = None

    candidates.sort(
        key=lambda i: (
            -abs(comparable[i].weight),
            comparable[i].origin_rank,
            comparable[i].index_in_model,
        )
    )
    kept_local: list[int] = []
    for i in candidates:
        if all(sims[i, j] < cfg.threshold for j in kept_local):
            kept_local.append(i)

    kept = [comparable[i] for i in kept_local]
    partners = [sorted(partners_of.get(i, [])) for i in kept_local]
    return SelectionResult(
        kept=kept,
        partners=partners,
        pooled_count=len(components),
        stable_count=stable_count,
    )


def select_components(components, cfg: SelectionConfig, word_mode: int):
    """Kept components only; see select_components_detailed for the evidence."""
    return select_components_detailed(components, cfg, word_mode).kept

"""CP decomposition of sparse tensors by alternating least squares.

The model is the usual weighted sum of rank-one terms: weights lambda_r and
one unit-normalized factor column per mode. Sweeps normalize columns by
2-norm for numerical safety; arrange() converts a finished model to the
reporting convention where every factor column sums to 1 and the absorbed
scale lives in the weights.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .linalg import gram, hadamard_all, normalize_columns_l1, solve_gram
from .sparse_tensor import SparseTensorCOO

MODEL_FORMAT = "kruskal-model"
MODEL_SCHEMA_VERSION = 1


class AlsDivergenceError(RuntimeError):
    """Raised when an ALS update produces non-finite values."""


@dataclass(frozen=True)
class AlsOptions:
    """Solver options: sweep cap, relative fit-improvement stop, and rng seed."""

    max_iters: int = 100
    fit_tolerance: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")
        if not (self.fit_tolerance > 0.0) or not math.isfinite(self.fit_tolerance):
            raise ValueError(f"fit_tolerance must be positive, got {self.fit_tolerance}")
        if self.seed < 0:
            raise ValueError(f"seed must be a non-negative integer, got {self.seed}")


@dataclass
class KruskalModel:
    """Weighted rank-one sum: weights (rank,) and one (extent, rank) factor per mode."""

    weights: np.ndarray
    factors: list[np.ndarray]

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64).reshape(-1)
        self.factors = [np.asarray(f, dtype=np.float64) for f in self.factors]
        if not self.factors:
            raise ValueError("a model needs at least one factor matrix")
        rank = self.weights.shape[0]
        for k, f in enumerate(self.factors):
            if f.ndim != 2 or f.shape[1] != rank:
                raise ValueError(
                    f"factor {k} must have {rank} columns, got shape {f.shape}"
                )

    @property
    def rank(self) -> int:
        return int(self.weights.shape[0])

    @property
    def order(self) -> int:
        return len(self.factors)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(f.shape[0] for f in self.factors)

    def negative_weight_indices(self) -> list[int]:
        """Components whose weight stayed negative after the sign convention."""
        return [int(r) for r in np.nonzero(self.weights < 0.0)[0]]


def init_factors(shape, rank: int, seed: int) -> list[np.ndarray]:
    """Uniform(0, 1) factor matrices, one per mode, seeded by (seed, mode).

    The per-mode seeding makes every matrix reproducible on its own and
    independent of the order the modes are drawn in.
    """
    if rank < 1:
        raise ValueError(f"rank must be >= 1, got {rank}")
    if seed < 0:
        raise ValueError(f"seed must be a non-negative integer, got {seed}")
    factors = []
    for mode, extent in enumerate(shape):
        rng = np.random.default_rng([int(seed), mode])
        factors.append(rng.random((int(extent), rank)))
    return factors


def mttkrp(tensor: SparseTensorCOO, factors, mode: int) -> np.ndarray:
    """Matricized tensor times Khatri-Rao product, computed sparsely.

    Gathers the non-target factor rows at each nonzero coordinate, multiplies
    them with the value, and scatter-adds into the target mode's rows. The
    scatter (np.add.at) accumulates in coordinate order, so the result is
    deterministic. The factor supplied for `mode` is ignored.
    """
    d = tensor.order
    if d < 2:
        raise ValueError("mttkrp requires a tensor of order 2 or higher")
    if not 0 <= mode < d:
        raise ValueError(f"mode {mode} out of range for an order-{d} tensor")
    if len(factors) != d:
        raise ValueError(f"expected {d} factor matrices, got {len(factors)}")
    ranks = {f.shape[1] for k, f in enumerate(factors) if k != mode}
    if len(ranks) != 1:
        raise ValueError(f"factor column counts disagree: {sorted(ranks)}")
    rank = ranks.pop()
    for k, f in enumerate(factors):
        if k != mode and f.shape[0] != tensor.shape[k]:
            raise ValueError(
                f"factor for mode {k} has {f.shape[0]} rows, "
                f"tensor extent is {tensor.shape[k]}"
            )

    out = np.zeros((tensor.shape[mode], rank))
    if tensor.nnz == 0:
        return out
    acc = None
    for k in range(d):
        if k == mode:
            continue
        part = factors[k][tensor.coords[:, k], :]
        if acc is None:
            acc = part
        else:
            acc *= part
    acc *= tensor.values[:, None]
    np.add.at(out, tensor.coords[:, mode], acc)
    return out


def _model_norm_sq(weights: np.ndarray, grams) -> float:
    return float(weights @ hadamard_all(grams) @ weights)


def cp_als(
    tensor: SparseTensorCOO, rank: int, opts: AlsOptions | None = None
) -> tuple[KruskalModel, list[float]]:
    """Fit a rank-`rank` CP model to a sparse tensor.

    Runs alternating least-squares sweeps from a seeded uniform init and
    records the fit (1 - relative residual norm) once per sweep, reusing the
    last mode's MTTKRP so no dense reconstruction is ever formed. Stops when
    the fit improves by less than opts.fit_tolerance or max_iters is reached.
    Returns the arranged model and the per-sweep fit history.
    """
    if opts is None:
        opts = AlsOptions()
    if tensor.nnz == 0:
        raise ValueError("cannot factorize a tensor with no entries")
    if tensor.order < 2:
        raise ValueError("cp_als requires a tensor of order 2 or higher")
    if rank < 1:
        raise ValueError(f"rank must be >= 1, got {rank}")

    d = tensor.order
    factors = init_factors(tensor.shape, rank, opts.seed)
    grams = [gram(f) for f in factors]
    norm_x = tensor.frobenius_norm()
    weights = np.ones(rank)
    fit_history: list[float] = []

    projected = solved = None
    for iteration in range(1, opts.max_iters + 1):
        for mode in range(d):
            projected = mttkrp(tensor, factors, mode)
            gram_others = hadamard_all(
                [grams[k] for k in range(d) if k != mode]
            )
            solved = solve_gram(gram_others, projected)
            if not np.all(np.isfinite(solved)):
                raise AlsDivergenceError(
                    f"non-finite factor update at iteration {iteration}, mode {mode}"
                )
            weights = np.sqrt(np.einsum("ir,ir->r", solved, solved))
            factors[mode] = solved / np.where(weights > 0.0, weights, 1.0)
            grams[mode] = gram(factors[mode])

        # After the final mode update, <X, M> = sum(projected * solved) because
        # `solved` still carries the weights and `projected` is that mode's MTTKRP.
        inner = float(np.sum(projected * solved))
        full_gram_quad = _model_norm_sq(weights, grams)
        residual_sq = max(norm_x * norm_x + full_gram_quad - 2.0 * inner, 0.0)
        fit_value = 1.0 - math.sqrt(residual_sq) / norm_x
        fit_history.append(fit_value)
        if iteration > 1 and fit_value - fit_history[-2] < opts.fit_tolerance:
            break

    model = arrange(KruskalModel(weights=weights, factors=factors))
    return model, fit_history


def fit(tensor: SparseTensorCOO, model: KruskalModel) -> float:
    """1 - ||X - M||_F / ||X||_F, evaluated without densifying.

    Uses ||X - M||^2 = ||X||^2 + ||M||^2 - 2 <X, M> with <X, M> computed from
    a single mode-0 MTTKRP. The difference is clamped at zero before the
    square root so exact fits cannot go NaN.
    """
    if model.order != tensor.order or model.shape != tensor.shape:
        raise ValueError(
            f"model shape {model.shape} does not match tensor shape {tensor.shape}"
        )
    norm_x = tensor.frobenius_norm()
    if norm_x == 0.0:
        raise ValueError("fit is undefined for a tensor with zero norm")
    grams = [gram(f) for f in model.factors]
    norm_m_sq = _model_norm_sq(model.weights, grams)
    projected = mttkrp(tensor, model.factors, 0)
    inner = float(
        model.weights @ np.einsum("ir,ir->r", projected, model.factors[0])
    )
    residual_sq = max(norm_x * norm_x + norm_m_sq - 2.0 * inner, 0.0)
    return 1.0 - math.sqrt(residual_sq) / norm_x


def arrange(model: KruskalModel) -> KruskalModel:
    """Normalize a model to the reporting convention.

    Flips factor columns with negative sums (folding the sign into the
    weight), scales every column to sum to 1 with the absorbed sums moved
    into the weights, and sorts components by descending absolute weight,
    ties broken by original position. A weight that ends up negative after
    the flips is kept and reported as-is; see negative_weight_indices().
    Represents the same tensor as the input and is idempotent.
    """
    weights = np.array(model.weights, dtype=np.float64)
    factors = [np.array(f, dtype=np.float64) for f in model.factors]
    for f in factors:
        flip = f.sum(axis=0) < 0.0
        if np.any(flip):
            f[:, flip] = -f[:, flip]
            weights[flip] = -weights[flip]
    for k, f in enumerate(factors):
        normalized, absorbed = normalize_columns_l1(f)
        factors[k] = normalized
        weights = weights * absorbed
    order = sorted(range(weights.shape[0]), key=lambda r: (-abs(weights[r]), r))
    weights = weights[order]
    factors = [f[:, order] for f in factors]
    return KruskalModel(weights=weights, factors=factors)


def save_model(
    model: KruskalModel,
    path: str | Path,
    mode_names=None,
    labels_ref: str | None = None,
) -> Path:
    """Write a model as a versioned text file that round-trips losslessly.

    Line 1 is a JSON header; the weights line and each factor row serialize
    floats with repr(), so load_model reproduces the arrays bit for bit.
    Axis labels are referenced by path, never embedded.
    """
    path = Path(path)
    header = {
        "format": MODEL_FORMAT,
        "schema_version": MODEL_SCHEMA_VERSION,
        "rank": model.rank,
        "shape": list(model.shape),
        "mode_names": list(mode_names) if mode_names is not None else None,
        "labels_ref": labels_ref,
    }
    lines = [json.dumps(header)]
    lines.append(" ".join(repr(float(w)) for w in model.weights))
    for f in model.factors:
        for row in f:
            lines.append(" ".join(repr(float(x)) for x in row))
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def load_model(path: str | Path) -> tuple[KruskalModel, dict]:
    """Read a model file written by save_model. Returns (model, header dict)."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise ValueError(f"{path}: empty model file")
    header = json.loads(lines[0])
    if header.get("format") != MODEL_FORMAT:
        raise ValueError(f"{path}: unrecognized model format {header.get('format')!r}")
    if header.get("schema_version") != MODEL_SCHEMA_VERSION:
        raise ValueError(
            f"{path}: unsupported schema version {header.get('schema_version')!r}"
        )
    rank = int(header["rank"])
    shape = [int(n) for n in header["shape"]]
    expected = 2 + sum(shape)
    if len(lines) != expected:
        raise ValueError(f"{path}: expected {expected} lines, got {len(lines)}")
    weights = np.array([float(w) for w in lines[1].split(" ")], dtype=np.float64)
    if weights.shape[0] != rank:
        raise ValueError(f"{path}: weight count {weights.shape[0]} != rank {rank}")
    factors = []
    cursor = 2
    for extent in shape:
        rows = []
        for line in lines[cursor : cursor + extent]:
            row = [float(x) for x in line.split(" ")]
            if len(row) != rank:
                raise ValueError(f"{path}: factor row has {len(row)} columns, rank is {rank}")
            rows.append(row)
        factors.append(np.array(rows, dtype=np.float64).reshape(extent, rank))
        cursor += extent
    return KruskalModel(weights=weights, factors=factors), header

"""Order-d sparse tensors in coordinate (COO) format, plus the on-disk container.

Coordinates are kept lexicographically sorted and coalesced so that every
downstream kernel (MTTKRP in particular) accumulates in a fixed order and
reruns are bitwise reproducible.
"""

from __future__ import annotations

import json
import math
from collections.abc import Iterable, Sequence
from pathlib import Path

import numpy as np

TENSOR_FORMAT = "sparse-tensor-coo"
TENSOR_SCHEMA_VERSION = 1
HEADER_FILE = "header.json"
ENTRIES_FILE = "entries.tsv"


class AxisMap:
    """Bidirectional label <-> index mapping for one tensor mode.

    Labels are unique strings; index order is insertion order.
    """

    __slots__ = ("labels", "_index")

    def __init__(self, labels: Iterable[str]):
        self.labels: list[str] = [str(label) for label in labels]
        self._index: dict[str, int] = {}
        for i, label in enumerate(self.labels):
            if label in self._index:
                raise ValueError(f"duplicate axis label {label!r}")
            self._index[label] = i

    def index_of(self, label: str) -> int:
        return self._index[label]

    def label_of(self, index: int) -> str:
        return self.labels[index]

    def __contains__(self, label: str) -> bool:
        return label in self._index

    def __len__(self) -> int:
        return len(self.labels)

    def __iter__(self):
        return iter(self.labels)

    def __eq__(self, other) -> bool:
        return isinstance(other, AxisMap) and self.labels == other.labels

    def __repr__(self) -> str:
        return f"AxisMap({len(self.labels)} labels)"


class SparseTensorCOO:
    """Immutable sparse tensor with sorted, coalesced, strictly positive entries.

    Attributes
    ----------
    shape : tuple[int, ...]
        Extent of each mode, all positive.
    coords : np.ndarray
        (nnz, d) int64 coordinates in lexicographic row order.
    values : np.ndarray
        (nnz,) float64 values, finite and > 0, aligned with coords.

    Construction sorts, coalesces duplicates by summation, and drops exact
    zeros, so the same logical entries always produce the same arrays.
    The arrays are marked read-only; instances are safe to share across
    threads.
    """

    __slots__ = ("shape", "coords", "values")

    def __init__(self, coords, values, shape: Sequence[int]):
        shape = tuple(int(n) for n in shape)
        if len(shape) == 0:
            raise ValueError("tensor order must be at least 1")
        if any(n <= 0 for n in shape):
            raise ValueError(f"shape must have positive extents, got {shape}")
        d = len(shape)

        coords = np.array(coords, dtype=np.int64)
        if coords.size == 0:
            coords = coords.reshape(0, d)
        if coords.ndim != 2 or coords.shape[1] != d:
            raise ValueError(
                f"coords must be (nnz, {d}) for an order-{d} tensor, got {coords.shape}"
            )
        values = np.array(values, dtype=np.float64).reshape(-1)
        if values.shape[0] != coords.shape[0]:
            raise ValueError(
                f"{coords.shape[0]} coordinates but {values.shape[0]} values"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("tensor values must be finite")

        for k in range(d):
            col = coords[:, k]
            if col.size and (col.min() < 0 or col.max() >= shape[k]):
                bad = int(col[(col < 0) | (col >= shape[k])][0])
                raise ValueError(
                    f"coordinate {bad} out of bounds for mode {k} (extent {shape[k]})"
                )

        if coords.shape[0]:
            # np.unique sorts rows lexicographically; bincount sums duplicates
            # in input order, so coalescing is deterministic.
            uniq, inverse = np.unique(coords, axis=0, return_inverse=True)
            summed = np.bincount(
                inverse.reshape(-1), weights=values, minlength=uniq.shape[0]
            )
            keep = summed != 0.0
            coords = uniq[keep]
            values = summed[keep]
        if np.any(values <= 0.0):
            raise ValueError("tensor values must be positive after coalescing")

        coords.setflags(write=False)
        values.setflags(write=False)
        self.shape = shape
        self.coords = coords
        self.values = values

    @property
    def order(self) -> int:
        return len(self.shape)

    @property
    def nnz(self) -> int:
        return int(self.values.shape[0])

    @property
    def density(self) -> float:
        return density_value(self.nnz, self.shape)

    def frobenius_norm(self) -> float:
        """Square root of the sum of squared stored values."""
        return math.sqrt(float(np.dot(self.values, self.values)))

    def entries(self):
        """Yield (coordinate tuple, value) pairs in sorted order."""
        for row, value in zip(self.coords, self.values):
            yield tuple(int(c) for c in row), float(value)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, SparseTensorCOO)
            and self.shape == other.shape
            and np.array_equal(self.coords, other.coords)
            and np.array_equal(self.values, other.values)
        )

    def __repr__(self) -> str:
        return f"SparseTensorCOO(shape={self.shape}, nnz={self.nnz})"


def from_entries(
    entries: Iterable[tuple[Sequence[int], float]], shape: Sequence[int]
) -> SparseTensorCOO:
    """Build a tensor from (coordinate, value) pairs.

    Duplicate coordinates are permitted and coalesced by summation; entries
    that sum to exactly zero are dropped.
    """
    entries = list(entries)
    coords = [e[0] for e in entries]
    values = [e[1] for e in entries]
    return SparseTensorCOO(coords, values, shape)


def density_value(nnz: int, shape: Sequence[int]) -> float:
    """nnz divided by the total cell count, computed in exact integer arithmetic.

    Kept separate from the tensor type so corpus-scale shapes (cell counts
    near 1e20, far past int64) can be checked without materializing anything.
    """
    cells = math.prod(int(n) for n in shape)
    if cells <= 0:
        raise ValueError(f"shape must have positive extents, got {tuple(shape)}")
    return nnz / cells


def save_tensor(
    tensor: SparseTensorCOO,
    axes: Sequence[AxisMap],
    mode_names: Sequence[str],
    out_dir: str | Path,
) -> Path:
    """Write the tensor container: header.json, entries.tsv, one label file per mode.

    Values are serialized with repr() so loading reproduces them bit for bit;
    nothing time- or environment-dependent is written.
    """
    out_dir = Path(out_dir)
    d = tensor.order
    if len(axes) != d or len(mode_names) != d:
        raise ValueError(f"expected {d} axes and mode names, got {len(axes)}/{len(mode_names)}")
    for k, axis in enumerate(axes):
        if len(axis) != tensor.shape[k]:
            raise ValueError(
                f"axis for mode {k} has {len(axis)} labels, tensor extent is {tensor.shape[k]}"
            )
        for label in axis.labels:
            if "\n" in label or "\r" in label:
                raise ValueError(f"axis label {label!r} in mode {k} contains a newline")

    out_dir.mkdir(parents=True, exist_ok=True)
    header = {
        "format": TENSOR_FORMAT,
        "schema_version": TENSOR_SCHEMA_VERSION,
        "shape": list(tensor.shape),
        "mode_names": [str(n) for n in mode_names],
        "nnz": tensor.nnz,
    }
    (out_dir / HEADER_FILE).write_text(
        json.dumps(header, indent=2) + "\n", encoding="utf-8"
    )
    lines = []
    for row, value in zip(tensor.coords, tensor.values):
        lines.append("\t".join(str(int(c)) for c in row) + "\t" + repr(float(value)))
    (out_dir / ENTRIES_FILE).write_text(
        "\n".join(lines) + ("\n" if lines else ""), encoding="utf-8"
    )
    for k, axis in enumerate(axes):
        path = out_dir / f"mode{k}.labels.txt"
        path.write_text(
            "\n".join(axis.labels) + ("\n" if axis.labels else ""), encoding="utf-8"
        )
    return out_dir


def load_tensor(in_dir: str | Path) -> tuple[SparseTensorCOO, list[AxisMap], list[str]]:
    """Load a tensor container written by save_tensor.

    Rejects unknown formats and any mismatch between the header shape, the
    entry coordinates, and the per-mode label counts.
    """
    in_dir = Path(in_dir)
    header_path = in_dir / HEADER_FILE
    if not header_path.is_file():
        raise ValueError(f"not a tensor container: missing {header_path}")
    header = json.loads(header_path.read_text(encoding="utf-8"))
    if header.get("format") != TENSOR_FORMAT:
        raise ValueError(f"unrecognized tensor format {header.get('format')!r}")
    if header.get("schema_version") != TENSOR_SCHEMA_VERSION:
        raise ValueError(f"unsupported schema version {header.get('schema_version')!r}")
    shape = tuple(int(n) for n in header["shape"])
    mode_names = [str(n) for n in header["mode_names"]]
    if len(mode_names) != len(shape):
        raise ValueError("header mode_names length does not match shape")

    d = len(shape)
    coords: list[list[int]] = []
    values: list[float] = []
    entries_path = in_dir / ENTRIES_FILE
    if not entries_path.is_file():
        raise ValueError(f"not a tensor container: missing {entries_path}")
    with entries_path.open(encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != d + 1:
                raise ValueError(
                    f"{entries_path}:{line_no}: expected {d + 1} fields, got {len(parts)}"
                )
            coords.append([int(p) for p in parts[:d]])
            values.append(float(parts[d]))
    tensor = SparseTensorCOO(coords, values, shape)
    if tensor.nnz != int(header["nnz"]):
        raise ValueError(
            f"header says {header['nnz']} entries, file holds {tensor.nnz}"
        )

    axes: list[AxisMap] = []
    for k in range(d):
        labels_path = in_dir / f"mode{k}.labels.txt"
        if not labels_path.is_file():
            raise ValueError(f"not a tensor container: missing {labels_path}")
        text = labels_path.read_text(encoding="utf-8")
        labels = text.split("\n")
        if labels and labels[-1] == "":
            labels.pop()
        if len(labels) != shape[k]:
            raise ValueError(
                f"mode {k} has {len(labels)} labels but extent {shape[k]}"
            )
        axes.append(AxisMap(labels))
    return tensor, axes, mode_names

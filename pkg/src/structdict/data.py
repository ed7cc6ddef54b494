"""Dataset I/O, alternative-sample construction, splits and preprocessing."""

from __future__ import annotations

import csv
import struct
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import LabeledMatrix
from .errors import ConfigError, DataError

MAGIC = b"SDLM"
_HEADER = struct.Struct("<4sQQQ")


class DataWarning(UserWarning):
    pass


def _note(log: list | None, msg: str) -> None:
    # callers that aggregate warnings (the benchmark) pass a list; others get a warning
    if log is None:
        warnings.warn(msg, DataWarning, stacklevel=3)
    else:
        log.append(msg)


@dataclass(frozen=True)
class ImageMeta:
    width: int
    height: int

    @classmethod
    def read(cls, path) -> "ImageMeta":
        """Parse a ``key = value`` sidecar with ``width`` and ``height``."""
        values = {}
        for line in Path(path).read_text().splitlines():
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, val = line.replace(":", "=", 1).partition("=")
            if not sep:
                raise DataError(f"{path}: cannot parse line {line!r}")
            values[key.strip().lower()] = val.strip()
        try:
            return cls(int(values["width"]), int(values["height"]))
        except (KeyError, ValueError) as exc:
            raise DataError(f"{path}: need integer width and height") from exc

    def write(self, path) -> None:
        Path(path).write_text(f"width={self.width}\nheight={self.height}\n")


@dataclass(frozen=True)
class SplitSpec:
    train_per_class: int | float = 20
    seed: int = 0
    pinned_prefix: int = 0

    def count_for(self, size: int) -> int:
        t = self.train_per_class
        if isinstance(t, float) and t < 1:
            return max(int(round(t * size)), self.pinned_prefix)
        return int(t)


def remap_labels(raw) -> tuple[np.ndarray, tuple]:
    """Map arbitrary integer ids onto 0..C-1 in ascending order of the raw id."""
    raw = np.asarray(raw, dtype=np.int64)
    names, labels = np.unique(raw, return_inverse=True)
    return labels.reshape(-1), tuple(int(v) for v in names)


# --- file formats ----------------------------------------------------------

def _read_csv(path: Path) -> np.ndarray:
    rows = []
    with open(path, newline="") as fh:
        for r, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not cell.strip() for cell in row):
                continue
            vals = []
            for c, cell in enumerate(row, start=1):
                try:
                    vals.append(float(cell))
                except ValueError:
                    raise DataError(f"{path}: non-numeric cell {cell!r} at row {r}, column {c}") from None
            if rows and len(vals) != len(rows[0]):
                raise DataError(f"{path}: row {r} has {len(vals)} cells, expected {len(rows[0])}")
            rows.append(vals)
    if not rows:
        raise DataError(f"{path}: file is empty")
    return np.array(rows, dtype=np.float64)


def _read_labels(path: Path) -> np.ndarray:
    out = []
    for i, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        try:
            out.append(int(line))
        except ValueError:
            raise DataError(f"{path}: non-integer label {line!r} on line {i}") from None
    return np.array(out, dtype=np.int64)


def _read_binary(path: Path):
    buf = Path(path).read_bytes()
    if len(buf) < _HEADER.size:
        raise DataError(f"{path}: too short for an SDLM header")
    magic, rows, cols, nlab = _HEADER.unpack_from(buf)
    if magic != MAGIC:
        raise DataError(f"{path}: bad magic {magic!r}")
    need = _HEADER.size + 8 * rows * cols + 4 * nlab
    if len(buf) != need:
        raise DataError(f"{path}: expected {need} bytes, found {len(buf)}")
    data = np.frombuffer(buf, dtype="<f8", count=rows * cols, offset=_HEADER.size)
    data = data.reshape((rows, cols), order="F").astype(np.float64)
    labels = np.frombuffer(buf, dtype="<i4", count=nlab, offset=_HEADER.size + 8 * rows * cols)
    return data, labels.astype(np.int64)


def detect_format(path) -> str:
    with open(path, "rb") as fh:
        return "bin" if fh.read(4) == MAGIC else "csv"


def load_matrix(path, labels_path=None, *, fmt: str | None = None,
                orientation: str = "columns") -> LabeledMatrix:
    """Load samples plus labels; labels are remapped to 0..C-1.

    ``fmt`` is ``csv`` or ``bin`` (detected from the magic bytes if None).
    For CSV, ``orientation`` says whether samples are columns or rows.
    The binary format embeds labels; ``labels_path`` overrides them.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"{path}: no such file")
    if path.stat().st_size == 0:
        raise DataError(f"{path}: file is empty")
    fmt = fmt or detect_format(path)
    if fmt == "bin":
        data, raw = _read_binary(path)
    elif fmt == "csv":
        data = _read_csv(path)
        if orientation == "rows":
            data = data.T
        elif orientation != "columns":
            raise ConfigError(f"orientation must be 'columns' or 'rows', got {orientation!r}")
        raw = None
    else:
        raise ConfigError(f"unknown data format {fmt!r}")
    if labels_path is not None:
        raw = _read_labels(Path(labels_path))
    if raw is None:
        raise DataError(f"{path}: CSV data needs a labels file")
    if raw.shape[0] != data.shape[1]:
        raise DataError(f"{path}: {data.shape[1]} samples but {raw.shape[0]} labels")
    if raw.size == 0:
        raise DataError(f"{path}: no samples")
    labels, names = remap_labels(raw)
    return LabeledMatrix(data, labels, len(names), names)


def save_matrix(Y: LabeledMatrix, path, labels_path=None, *, fmt: str = "bin",
                orientation: str = "columns") -> None:
    """Write Y with its original label ids. CSV uses 17 significant digits (exact round-trip)."""
    raw = np.asarray(Y.label_names, dtype=np.int64)[Y.labels]
    path = Path(path)
    if fmt == "bin":
        with open(path, "wb") as fh:
            fh.write(_HEADER.pack(MAGIC, Y.n_features, Y.n_samples, raw.size))
            fh.write(np.asarray(Y.data, dtype="<f8").tobytes(order="F"))
            fh.write(raw.astype("<i4").tobytes())
    elif fmt == "csv":
        data = Y.data if orientation == "columns" else Y.data.T
        np.savetxt(path, data, delimiter=",", fmt="%.17g")
        if labels_path is None:
            raise ConfigError("CSV output needs a labels path")
    else:
        raise ConfigError(f"unknown data format {fmt!r}")
    if labels_path is not None:
        Path(labels_path).write_text("".join(f"{v}\n" for v in raw))


# --- alternative samples -------------------------------------------------------

def mirror_samples(Y: LabeledMatrix, meta: ImageMeta) -> LabeledMatrix:
    """Left-right reflect every sample, read as a column-major height x width image."""
    n = meta.width * meta.height
    if Y.n_features != n:
        raise DataError(f"{Y.n_features} features but image is {meta.width}x{meta.height}")
    imgs = Y.data.reshape((meta.height, meta.width, Y.n_samples), order="F")
    flipped = imgs[:, ::-1, :].reshape((n, Y.n_samples), order="F")
    return Y.with_data(flipped)


def _by_class(labels: np.ndarray, C: int) -> list[np.ndarray]:
    return [np.flatnonzero(labels == c) for c in range(C)]


def half_split_alternative(Y: LabeledMatrix, seed: int = 0, *, log: list | None = None):
    """Split each class into two equal, label-aligned halves (Y_orig, Y_alter)."""
    rng = np.random.default_rng(seed)
    first, second = [], []
    for c, idx in enumerate(_by_class(Y.labels, Y.class_count)):
        if idx.size < 2:
            raise DataError(f"class {Y.label_names[c]} has {idx.size} samples; half-split needs 2")
        idx = rng.permutation(idx)
        if idx.size % 2:
            _note(log, f"class {Y.label_names[c]} has an odd size {idx.size}; dropped one sample")
            idx = idx[:-1]
        h = idx.size // 2
        first.append(idx[:h])
        second.append(idx[h:])
    return Y.take(np.concatenate(first)), Y.take(np.concatenate(second))


def train_test_split(Y: LabeledMatrix, spec: SplitSpec, *, log: list | None = None):
    """Per class: the first ``pinned_prefix`` samples always train, the rest are drawn at random."""
    rng = np.random.default_rng(spec.seed)
    train, test = [], []
    for c, idx in enumerate(_by_class(Y.labels, Y.class_count)):
        k = spec.count_for(idx.size)
        if spec.pinned_prefix > k:
            raise ConfigError("pinned_prefix exceeds train_per_class")
        if k > idx.size:
            raise ConfigError(
                f"class {Y.label_names[c]} has {idx.size} samples, fewer than {k} requested"
            )
        if k == idx.size:
            _note(log, f"class {Y.label_names[c]} has no test samples")
        pinned, rest = idx[: spec.pinned_prefix], idx[spec.pinned_prefix:]
        chosen = np.sort(rng.choice(rest.size, size=k - pinned.size, replace=False))
        mask = np.zeros(rest.size, dtype=bool)
        mask[chosen] = True
        train.append(np.concatenate([pinned, rest[mask]]))
        test.append(rest[~mask])
    return Y.take(np.concatenate(train)), Y.take(np.concatenate(test))


def normalize_columns(Y: LabeledMatrix, *, log: list | None = None) -> LabeledMatrix:
    norms = np.linalg.norm(Y.data, axis=0)
    zero = norms == 0
    if np.any(zero):
        _note(log, f"{int(zero.sum())} zero columns left unnormalized")
    return Y.with_data(Y.data / np.where(zero, 1.0, norms))

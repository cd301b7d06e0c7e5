"""Categorical dataset loading, encoding and feature streams."""

import csv
import logging
import os
from dataclasses import dataclass

import numpy as np

log = logging.getLogger(__name__)

MISSING = {"", "NA"}
DISCRETIZE_MIN_DISTINCT = 10


class DataError(ValueError):
    """Raised for malformed or unusable input data."""


@dataclass(frozen=True)
class ColumnMeta:
    name: str
    labels: tuple

    def __post_init__(self):
        if len(set(self.labels)) != len(self.labels):
            raise DataError(f"column {self.name!r}: duplicate labels")
        if not self.labels:
            raise DataError(f"column {self.name!r}: no categories")

    @property
    def cardinality(self):
        return len(self.labels)


@dataclass(frozen=True, eq=False)
class DataTable:
    """Integer-coded categorical table.

    ``codes`` has shape ``(n_columns, n_rows)`` so that a column is a
    contiguous vector. ``sensitive_index`` / ``target_index`` may be ``None``
    for tables that only feed independence tests.
    """

    codes: np.ndarray
    metas: tuple
    sensitive_index: int | None = None
    target_index: int | None = None
    dropped_rows: int = 0
    excluded: tuple = ()

    def __post_init__(self):
        codes = np.ascontiguousarray(self.codes, dtype=np.int64)
        if codes.ndim != 2 or codes.shape[0] != len(self.metas):
            raise DataError("codes must have one row per column meta")
        codes.setflags(write=False)
        object.__setattr__(self, "codes", codes)
        object.__setattr__(self, "metas", tuple(self.metas))
        object.__setattr__(self, "excluded", tuple(self.excluded))
        for i, meta in enumerate(self.metas):
            col = codes[i]
            if col.size and (col.min() < 0 or col.max() >= meta.cardinality):
                raise DataError(f"column {meta.name!r}: code out of range")
        s, t = self.sensitive_index, self.target_index
        for role, idx in (("sensitive", s), ("target", t)):
            if idx is not None and not 0 <= idx < len(self.metas):
                raise DataError(f"{role} index {idx} out of range")
        if s is not None and s == t:
            raise DataError("sensitive and target must be different columns")
        if t is not None and self.metas[t].cardinality != 2:
            raise DataError(
                f"target {self.metas[t].name!r} must be binary, "
                f"has {self.metas[t].cardinality} categories"
            )

    @property
    def n_rows(self):
        return self.codes.shape[1]

    @property
    def n_columns(self):
        return self.codes.shape[0]

    @property
    def columns(self):
        return list(self.codes)

    @property
    def names(self):
        return [m.name for m in self.metas]

    @property
    def cardinalities(self):
        return [m.cardinality for m in self.metas]

    def index_of(self, name):
        for i, m in enumerate(self.metas):
            if m.name == name:
                return i
        raise DataError(f"unknown column {name!r}")

    def column(self, i):
        return self.codes[i]

    def decode(self, i, codes):
        labels = self.metas[i].labels
        return [labels[c] for c in codes]

    def encode(self, i, values):
        lookup = {lab: c for c, lab in enumerate(self.metas[i].labels)}
        try:
            return np.array([lookup[v] for v in values], dtype=np.int64)
        except KeyError as exc:
            raise DataError(f"column {self.metas[i].name!r}: unknown label {exc.args[0]!r}") from None

    def take_rows(self, rows):
        return DataTable(
            self.codes[:, rows],
            self.metas,
            self.sensitive_index,
            self.target_index,
            excluded=self.excluded,
        )

    def with_roles(self, sensitive, target):
        return DataTable(self.codes, self.metas, sensitive, target, self.dropped_rows, self.excluded)


@dataclass(frozen=True)
class FeatureStream:
    order: tuple
    source: str = "file"
    seed: int | None = None

    def __iter__(self):
        return iter(self.order)

    def __len__(self):
        return len(self.order)


def _as_float(v):
    try:
        return float(v)
    except ValueError:
        return None


def _fmt(x):
    return f"{x:g}"


def equal_frequency_bins(values, n_bins):
    """Codes and interval labels for an equal-frequency split of ``values``.

    Cut points are taken at the sorted positions ``i * n // n_bins``; tied
    values always share a bin, so heavy ties can yield fewer bins.
    """
    values = np.asarray(values, dtype=np.float64)
    srt = np.sort(values)
    n = len(srt)
    cuts = np.unique([srt[i * n // n_bins] for i in range(1, n_bins)])
    cuts = cuts[cuts > srt[0]]
    codes = np.searchsorted(cuts, values, side="right")
    if len(cuts) == 0:
        return codes, (f"[{_fmt(srt[0])}, {_fmt(srt[-1])}]",)
    labels = [f"<{_fmt(cuts[0])}"]
    labels += [f"[{_fmt(lo)}, {_fmt(hi)})" for lo, hi in zip(cuts[:-1], cuts[1:])]
    labels.append(f">={_fmt(cuts[-1])}")
    return codes, tuple(labels)


def _first_occurrence_codes(values):
    lookup = {}
    codes = np.empty(len(values), dtype=np.int64)
    for r, v in enumerate(values):
        codes[r] = lookup.setdefault(v, len(lookup))
    return codes, tuple(lookup)


def _sorted_codes(values):
    distinct = set(values)
    nums = {v: _as_float(v) for v in distinct}
    if all(x is not None for x in nums.values()):
        labels = sorted(distinct, key=lambda v: (nums[v], v))
    else:
        labels = sorted(distinct)
    lookup = {v: c for c, v in enumerate(labels)}
    return np.array([lookup[v] for v in values], dtype=np.int64), tuple(labels)


def load_csv(path, target, sensitive, discretize_bins=5):
    """Read a CSV file into a :class:`DataTable`.

    Rows with a missing cell (empty or ``NA``) are dropped. Numeric columns
    with more than ten distinct values are split into ``discretize_bins``
    equal-frequency bins. Other columns are coded by first occurrence, except
    the target, whose two labels are coded in sorted order so that code 1 is
    the larger label (``1``, ``yes``, ...). Constant columns are kept in the
    table but excluded from feature streams.
    """
    if discretize_bins is None:
        discretize_bins = 5
    if discretize_bins < 1:
        raise DataError("discretize_bins must be a positive integer")
    if not os.path.exists(path):
        raise FileNotFoundError(f"no such file: {path}")

    with open(path, newline="", encoding="utf-8-sig") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        raw = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DataError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            raw.append([c.strip() for c in row])

    if len(set(header)) != len(header):
        raise DataError(f"{path}: duplicate column names in header")
    for role, name in (("target", target), ("sensitive", sensitive)):
        if name not in header:
            raise DataError(f"unknown {role} column {name!r}")

    kept = [r for r in raw if not any(c in MISSING for c in r)]
    dropped = len(raw) - len(kept)
    if dropped:
        log.warning("%s: dropped %d rows with missing values", path, dropped)
    if not kept:
        raise DataError(f"{path}: no complete rows")

    t_idx = header.index(target)
    s_idx = header.index(sensitive)
    codes, metas, excluded = [], [], []
    for j, name in enumerate(header):
        values = [r[j] for r in kept]
        nums = [_as_float(v) for v in values]
        numeric = all(x is not None for x in nums)
        if j == t_idx:
            col, labels = _sorted_codes(values)
        elif numeric and len(set(values)) > DISCRETIZE_MIN_DISTINCT:
            col, labels = equal_frequency_bins(nums, discretize_bins)
        else:
            col, labels = _first_occurrence_codes(values)
        if len(labels) == 1:
            if j in (t_idx, s_idx):
                raise DataError(f"column {name!r} has a single value")
            log.warning("%s: column %r is constant; excluded from the stream", path, name)
            excluded.append(j)
        codes.append(col)
        metas.append(ColumnMeta(name, labels))

    return DataTable(np.vstack(codes), metas, s_idx, t_idx, dropped, tuple(excluded))


def make_stream(table, mode="file", seed=None):
    """Arrival order of candidate features (every column except S, T and constants)."""
    if table.sensitive_index is None or table.target_index is None:
        raise DataError("table needs sensitive and target columns to build a stream")
    skip = {table.sensitive_index, table.target_index, *table.excluded}
    candidates = [i for i in range(table.n_columns) if i not in skip]
    if mode in ("file", "file-order"):
        return FeatureStream(tuple(candidates), "file", None)
    if mode == "shuffle":
        rng = np.random.default_rng(seed)
        order = tuple(int(i) for i in rng.permutation(candidates))
        return FeatureStream(order, "shuffle", seed)
    raise ValueError(f"unknown stream mode {mode!r}")


def stream_from_names(table, names):
    """Explicit stream from column names, validated against the table."""
    skip = {table.sensitive_index, table.target_index}
    order = []
    for name in names:
        i = table.index_of(name)
        if i in skip:
            raise DataError(f"{name!r} is the sensitive or target column")
        if i in order:
            raise DataError(f"{name!r} listed twice")
        order.append(i)
    return FeatureStream(tuple(order), "explicit", None)


"""Comparison records: validation, ingestion, aggregation and connectivity.

Records are stored column-wise in :class:`Dataset` so that simulated studies
with millions of comparisons stay cheap; :class:`ComparisonRecord` is the
row view.
"""

from __future__ import annotations

import csv
import io
import json
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .errors import InvalidOutcomeError, InvalidRecordError, ParseError, RosterError

OUTCOMES = (0.0, 0.5, 1.0)

OUTCOME_TOKENS = {
    "win_a": 1.0,
    "win_b": 0.0,
    "tie": 0.5,
    "1": 1.0,
    "0": 0.0,
    "0.5": 0.5,
    "1.0": 1.0,
    "0.0": 0.0,
}


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype).reshape(-1)
    a.setflags(write=False)
    return a


def _check_outcome(y):
    y = float(y)
    if y not in OUTCOMES:
        raise InvalidOutcomeError(f"outcome must be 0, 0.5 or 1, got {y!r}")
    return y


class ComparisonRecord(NamedTuple):
    """One verdict: judge ``k`` compared candidates ``i < j``; ``y = 1`` prefers ``i``."""

    i: int
    j: int
    k: int
    y: float


class TripleStats(NamedTuple):
    i: int
    j: int
    k: int
    n: int
    y_bar: float


def canonicalize(i, j, k, y) -> ComparisonRecord:
    """Return the record with ``i < j``, flipping the outcome if swapped."""
    i, j, k = int(i), int(j), int(k)
    if i == j:
        raise InvalidRecordError(f"self-comparison of candidate {i}")
    y = _check_outcome(y)
    if i > j:
        return ComparisonRecord(j, i, k, 1.0 - y)
    return ComparisonRecord(i, j, k, y)


@dataclass(frozen=True, eq=False)
class Dataset:
    """Immutable collection of canonical comparison records.

    Build with :meth:`from_records` or :meth:`from_arrays`; both canonicalize
    and validate. ``n_candidates`` / ``n_judges`` default to one past the
    largest index present.
    """

    n_candidates: int
    n_judges: int
    i: np.ndarray
    j: np.ndarray
    k: np.ndarray
    y: np.ndarray
    candidate_names: tuple[str, ...] | None = None
    judge_names: tuple[str, ...] | None = None

    @classmethod
    def from_arrays(cls, i, j, k, y, n_candidates=None, n_judges=None,
                    candidate_names=None, judge_names=None) -> "Dataset":
        i = np.asarray(i, dtype=np.int64).reshape(-1)
        j = np.asarray(j, dtype=np.int64).reshape(-1)
        k = np.asarray(k, dtype=np.int64).reshape(-1)
        y = np.asarray(y, dtype=np.float64).reshape(-1)
        if not (len(i) == len(j) == len(k) == len(y)):
            raise InvalidRecordError("record columns have different lengths")
        if np.any(i == j):
            bad = int(np.flatnonzero(i == j)[0])
            raise InvalidRecordError(f"record {bad}: self-comparison of candidate {i[bad]}")
        ok = (y == 0.0) | (y == 0.5) | (y == 1.0)
        if not np.all(ok):
            bad = int(np.flatnonzero(~ok)[0])
            raise InvalidOutcomeError(f"record {bad}: outcome must be 0, 0.5 or 1, got {y[bad]!r}")
        swap = i > j
        i, j = np.where(swap, j, i), np.where(swap, i, j)
        y = np.where(swap, 1.0 - y, y)
        if candidate_names is not None and n_candidates is None:
            n_candidates = len(candidate_names)
        if judge_names is not None and n_judges is None:
            n_judges = len(judge_names)
        if n_candidates is None:
            n_candidates = int(j.max()) + 1 if len(j) else 0
        if n_judges is None:
            n_judges = int(k.max()) + 1 if len(k) else 0
        if len(i) and (i.min() < 0 or j.max() >= n_candidates):
            raise InvalidRecordError(f"candidate index out of range [0, {n_candidates})")
        if len(k) and (k.min() < 0 or k.max() >= n_judges):
            raise InvalidRecordError(f"judge index out of range [0, {n_judges})")
        for names, size, what in ((candidate_names, n_candidates, "candidate"),
                                  (judge_names, n_judges, "judge")):
            if names is not None and len(names) != size:
                raise RosterError(f"{what} roster has {len(names)} names for {size} indices")
        return cls(
            int(n_candidates), int(n_judges),
            _frozen(i, np.int64), _frozen(j, np.int64), _frozen(k, np.int64),
            _frozen(y, np.float64),
            tuple(candidate_names) if candidate_names is not None else None,
            tuple(judge_names) if judge_names is not None else None,
        )

    @classmethod
    def from_records(cls, records: Iterable[Sequence], **kwargs) -> "Dataset":
        rows = [canonicalize(*r) for r in records]
        cols = list(zip(*rows)) if rows else [[], [], [], []]
        return cls.from_arrays(*cols, **kwargs)

    def __len__(self):
        return len(self.y)

    @property
    def records(self) -> list[ComparisonRecord]:
        return [ComparisonRecord(int(a), int(b), int(c), float(d))
                for a, b, c, d in zip(self.i, self.j, self.k, self.y)]

    def subset(self, mask_or_index) -> "Dataset":
        """Records selected by a boolean mask or index array; rosters are kept."""
        return Dataset.from_arrays(
            self.i[mask_or_index], self.j[mask_or_index], self.k[mask_or_index],
            self.y[mask_or_index], self.n_candidates, self.n_judges,
            self.candidate_names, self.judge_names)

    def restrict_judges(self, judges: Sequence[int]) -> "Dataset":
        """Keep only records from ``judges``, re-indexing them densely in the given order."""
        judges = np.asarray(judges, dtype=np.int64)
        remap = np.full(self.n_judges, -1, dtype=np.int64)
        remap[judges] = np.arange(len(judges))
        keep = remap[self.k] >= 0
        names = None
        if self.judge_names is not None:
            names = tuple(self.judge_names[q] for q in judges)
        return Dataset.from_arrays(
            self.i[keep], self.j[keep], remap[self.k[keep]], self.y[keep],
            self.n_candidates, len(judges), self.candidate_names, names)


@dataclass(frozen=True, eq=False)
class TripleTable:
    """The set Omega of observed (pair, judge) triples with counts and mean outcomes.

    Rows are sorted lexicographically by ``(i, j, k)``.
    """

    n_candidates: int
    n_judges: int
    i: np.ndarray
    j: np.ndarray
    k: np.ndarray
    n: np.ndarray
    y_bar: np.ndarray
    _counts: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "_counts", _frozen(self.n, np.float64))

    @classmethod
    def from_arrays(cls, i, j, k, n, y_bar, n_candidates, n_judges) -> "TripleTable":
        n = np.asarray(n, dtype=np.int64).reshape(-1)
        if len(n) and n.min() < 1:
            raise InvalidRecordError("triple counts must be positive")
        return cls(int(n_candidates), int(n_judges), _frozen(i, np.int64),
                   _frozen(j, np.int64), _frozen(k, np.int64), _frozen(n, np.int64),
                   _frozen(y_bar, np.float64))

    def __len__(self):
        return len(self.n)

    def __iter__(self):
        for row in zip(self.i, self.j, self.k, self.n, self.y_bar):
            yield TripleStats(int(row[0]), int(row[1]), int(row[2]), int(row[3]), float(row[4]))

    def as_set(self) -> set[TripleStats]:
        return set(self)

    @property
    def total(self) -> int:
        """Number of underlying comparisons T."""
        return int(self.n.sum())

    @property
    def counts(self) -> np.ndarray:
        """Counts as float64, the layout the kernels expect."""
        return self._counts

    def flipped(self) -> "TripleTable":
        """Same triples with every mean outcome replaced by ``1 - y_bar``."""
        return TripleTable.from_arrays(self.i, self.j, self.k, self.n, 1.0 - self.y_bar,
                                       self.n_candidates, self.n_judges)

    def to_csv(self, stream) -> None:
        w = csv.writer(stream, lineterminator="\n")
        w.writerow(["i", "j", "k", "n", "y_bar"])
        for t in self:
            w.writerow([t.i, t.j, t.k, t.n, repr(t.y_bar)])

    @classmethod
    def from_csv(cls, stream, n_candidates=None, n_judges=None) -> "TripleTable":
        reader = csv.DictReader(stream)
        cols = {c: [] for c in ("i", "j", "k", "n", "y_bar")}
        for line, row in enumerate(reader, start=2):
            try:
                for c in cols:
                    cols[c].append(float(row[c]) if c == "y_bar" else int(row[c]))
            except (KeyError, TypeError, ValueError) as exc:
                raise ParseError(f"bad aggregated row: {exc}", line) from None
        i, j, k = (np.asarray(cols[c], dtype=np.int64) for c in "ijk")
        if n_candidates is None:
            n_candidates = int(max(i.max(initial=-1), j.max(initial=-1))) + 1
        if n_judges is None:
            n_judges = int(k.max(initial=-1)) + 1
        return cls.from_arrays(i, j, k, cols["n"], cols["y_bar"], n_candidates, n_judges)


def aggregate(dataset: Dataset) -> TripleTable:
    """Collapse records into per-triple counts ``n`` and mean outcomes ``y_bar``."""
    N, K = dataset.n_candidates, dataset.n_judges
    if len(dataset) == 0:
        empty = np.zeros(0, dtype=np.int64)
        return TripleTable.from_arrays(empty, empty, empty, empty, np.zeros(0), N, K)
    key = (dataset.i * N + dataset.j) * K + dataset.k
    uniq, inverse = np.unique(key, return_inverse=True)
    n = np.bincount(inverse)
    # sums of halves are exact in binary floating point
    wins = np.bincount(inverse, weights=dataset.y)
    pair, k = np.divmod(uniq, K)
    i, j = np.divmod(pair, N)
    return TripleTable.from_arrays(i, j, k, n, wins / n, N, K)


@dataclass(frozen=True)
class ConnectivityReport:
    connected: bool
    labels: tuple[int, ...]
    components: tuple[tuple[int, ...], ...]

    def describe(self, names=None) -> str:
        lines = [f"{len(self.components)} connected component(s):"]
        for c, members in enumerate(self.components):
            shown = [names[m] for m in members] if names else [str(m) for m in members]
            lines.append(f"  component {c}: " + ", ".join(shown))
        return "\n".join(lines)


def check_connectivity(data) -> ConnectivityReport:
    """Breadth-first search over the candidate graph of a Dataset or TripleTable.

    A candidate with no comparisons is its own component, so it makes the
    graph disconnected.
    """
    N = data.n_candidates
    adj = [[] for _ in range(N)]
    if len(data.i):
        edges = np.unique(np.stack([data.i, data.j], axis=1), axis=0)
        for a, b in edges:
            adj[a].append(int(b))
            adj[b].append(int(a))
    labels = [-1] * N
    components = []
    for start in range(N):
        if labels[start] >= 0:
            continue
        label = len(components)
        labels[start] = label
        members = [start]
        queue = deque([start])
        while queue:
            u = queue.popleft()
            for v in adj[u]:
                if labels[v] < 0:
                    labels[v] = label
                    members.append(v)
                    queue.append(v)
        components.append(tuple(sorted(members)))
    return ConnectivityReport(len(components) == 1, tuple(labels), tuple(components))


class _Roster:
    def __init__(self, names=None, what="candidate"):
        self.what = what
        self.fixed = names is not None
        self.names = []
        self.index = {}
        for name in names or ():
            if name in self.index:
                raise RosterError(f"duplicate {what} name {name!r} in roster")
            self.index[name] = len(self.names)
            self.names.append(name)

    def __call__(self, name, line):
        idx = self.index.get(name)
        if idx is None:
            if self.fixed:
                raise RosterError(f"line {line}: {self.what} {name!r} not in roster")
            idx = self.index[name] = len(self.names)
            self.names.append(name)
        return idx


def _parse_outcome(token, line):
    tok = str(token).strip().lower()
    if tok not in OUTCOME_TOKENS:
        raise InvalidOutcomeError(f"line {line}: unknown outcome {token!r}")
    return OUTCOME_TOKENS[tok]


_FIELDS = ("model_a", "model_b", "judge", "outcome")


def _rows_csv(text):
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("empty input, expected a header", 1) from None
    header = [h.strip().lower() for h in header]
    missing = [f for f in _FIELDS if f not in header]
    if missing:
        raise ParseError(f"header missing columns {missing}", 1)
    pos = [header.index(f) for f in _FIELDS]
    for row in reader:
        line = reader.line_num
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise ParseError(f"expected {len(header)} fields, got {len(row)}", line)
        yield line, [row[p].strip() for p in pos]


def _rows_jsonl(text):
    for line, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip():
            continue
        try:
            obj = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc.msg}", line) from None
        if not isinstance(obj, dict) or any(f not in obj for f in _FIELDS):
            raise ParseError(f"object must have keys {list(_FIELDS)}", line)
        yield line, [str(obj[f]).strip() if f != "outcome" else obj[f] for f in _FIELDS]


def load_records(source, format="csv", candidate_roster=None, judge_roster=None) -> Dataset:
    """Read comparisons from a byte/text stream, bytes or str.

    Names are mapped to dense indices in first-appearance order unless a
    roster is given.
    """
    if hasattr(source, "read"):
        source = source.read()
    if isinstance(source, bytes):
        try:
            source = source.decode("utf-8-sig")
        except UnicodeDecodeError as exc:
            raise ParseError(f"input is not UTF-8: {exc}") from None
    fmt = format.lower()
    if fmt == "csv":
        rows = _rows_csv(source)
    elif fmt == "jsonl":
        rows = _rows_jsonl(source)
    else:
        raise ValueError(f"unknown format {format!r}; expected csv or jsonl")

    cands = _Roster(candidate_roster, "candidate")
    judges = _Roster(judge_roster, "judge")
    i, j, k, y = [], [], [], []
    for line, (a, b, judge, outcome) in rows:
        if a == b:
            raise InvalidRecordError(f"line {line}: self-comparison of {a!r}")
        if "" in (a, b, judge):
            raise ParseError("empty name field", line)
        val = _parse_outcome(outcome, line)
        i.append(cands(a, line))
        j.append(cands(b, line))
        k.append(judges(judge, line))
        y.append(val)
    return Dataset.from_arrays(
        i, j, k, y, n_candidates=len(cands.names), n_judges=len(judges.names),
        candidate_names=cands.names, judge_names=judges.names)


def write_records(dataset: Dataset, stream) -> None:
    """Write records in the CSV input format (names fall back to indices)."""
    cn = dataset.candidate_names or [f"m{q}" for q in range(dataset.n_candidates)]
    jn = dataset.judge_names or [f"j{q}" for q in range(dataset.n_judges)]
    token = {1.0: "win_a", 0.0: "win_b", 0.5: "tie"}
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(_FIELDS)
    for a, b, c, d in zip(dataset.i, dataset.j, dataset.k, dataset.y):
        w.writerow([cn[a], cn[b], jn[c], token[float(d)]])

"""Grouped series structure: attribute schema, node keys, summing matrix and
aggregation of raw sales records into one weekly series per node."""

from __future__ import annotations

import datetime as _dt
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from .errors import DataError, EmptyBottom, KeyOutsideSchema, NonFiniteQuantity, UnknownAttribute
from .series import TimeSeries

__all__ = [
    "AttributeSchema",
    "SeriesKey",
    "GroupStructure",
    "SummingMatrix",
    "WeekCalendar",
    "build_structure",
    "build_summing_matrix",
    "aggregate_records",
    "aggregate_matrix",
]

WEEKDAYS = ("monday", "tuesday", "wednesday", "thursday", "friday", "saturday", "sunday")


@dataclass(frozen=True)
class AttributeSchema:
    """Ordered attributes, each with a finite ordered set of values.

    Values are stored as strings so that keys survive a CSV or JSON round trip.
    """

    attributes: tuple

    def __post_init__(self):
        items = self.attributes.items() if isinstance(self.attributes, Mapping) else self.attributes
        attrs = []
        seen = set()
        for name, values in items:
            name = str(name)
            if name in seen:
                raise ValueError(f"duplicate attribute name {name!r}")
            seen.add(name)
            vals = tuple(dict.fromkeys(str(v) for v in values))
            if not vals:
                raise ValueError(f"attribute {name!r} has an empty value set")
            attrs.append((name, vals))
        if not attrs:
            raise ValueError("a schema needs at least one attribute")
        object.__setattr__(self, "attributes", tuple(attrs))
        object.__setattr__(self, "_pos", {n: i for i, (n, _) in enumerate(attrs)})
        object.__setattr__(self, "_vpos", {n: {v: j for j, v in enumerate(vs)} for n, vs in attrs})

    @property
    def names(self) -> tuple:
        return tuple(n for n, _ in self.attributes)

    def values(self, name) -> tuple:
        self._check(name)
        return self.attributes[self._pos[name]][1]

    def _check(self, name):
        if name not in self._pos:
            raise UnknownAttribute(f"unknown attribute {name!r}; schema has {list(self.names)}")

    def key(self, bindings=None, **kw) -> "SeriesKey":
        """A canonically ordered key; raises if an attribute or value is unknown."""
        b = dict(bindings.items() if isinstance(bindings, (Mapping, SeriesKey)) else (bindings or ()))
        b.update(kw)
        for name, v in b.items():
            self._check(name)
            if str(v) not in self._vpos[name]:
                raise KeyOutsideSchema(f"value {v!r} is not in the value set of {name!r}")
        ordered = sorted(((n, str(v)) for n, v in b.items()), key=lambda nv: self._pos[nv[0]])
        return SeriesKey(tuple(ordered))

    def sort_key(self, key: "SeriesKey"):
        """Position tuple used to order nodes within a level."""
        return tuple(self._vpos[n][v] for n, v in key.items())

    def to_dict(self):
        return [{"name": n, "values": list(vs)} for n, vs in self.attributes]

    @classmethod
    def from_dict(cls, data):
        return cls(tuple((a["name"], a["values"]) for a in data))


@dataclass(frozen=True, eq=False)
class SeriesKey:
    """Partial binding attribute -> value; unbound attributes are summed over.

    Equality and hashing ignore the order of the bindings, so ``AX`` and
    ``XA`` denote the same series. Build keys through
    :meth:`AttributeSchema.key` to get the schema's canonical order.
    """

    bindings: tuple = ()

    def __post_init__(self):
        b = self.bindings.items() if isinstance(self.bindings, Mapping) else self.bindings
        b = tuple((str(n), str(v)) for n, v in b)
        if len({n for n, _ in b}) != len(b):
            raise ValueError("an attribute may be bound only once per key")
        object.__setattr__(self, "bindings", b)
        object.__setattr__(self, "_set", frozenset(b))

    def __eq__(self, other):
        return isinstance(other, SeriesKey) and self._set == other._set

    def __hash__(self):
        return hash(self._set)

    def __len__(self):
        return len(self.bindings)

    def items(self):
        return iter(self.bindings)

    def as_dict(self) -> dict:
        return dict(self.bindings)

    @property
    def is_root(self) -> bool:
        return not self.bindings

    def attributes(self) -> frozenset:
        return frozenset(n for n, _ in self.bindings)

    def restrict(self, names) -> "SeriesKey":
        names = set(names)
        return SeriesKey(tuple((n, v) for n, v in self.bindings if n in names))

    def covers(self, other: "SeriesKey") -> bool:
        """True when every binding of this key also holds in ``other``."""
        return self._set <= other._set

    def label(self) -> str:
        return "total" if not self.bindings else "/".join(f"{n}={v}" for n, v in self.bindings)

    def __str__(self):
        return self.label()


@dataclass(frozen=True)
class GroupStructure:
    """All aggregation nodes of a grouped collection of series.

    ``nodes`` starts with the root (empty key), then each configured level
    in order, and ends with the observed bottom keys. Within a level nodes
    follow the schema's value order.
    """

    schema: AttributeSchema
    levels: tuple
    nodes: tuple
    bottom: tuple

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_bottom(self) -> int:
        return len(self.bottom)

    def index(self, key) -> int:
        return self._index[key]

    def __post_init__(self):
        object.__setattr__(self, "_index", {k: i for i, k in enumerate(self.nodes)})

    def node_level(self, key) -> int:
        """0 for the root, 1 + level position for aggregates, ``len(levels) + 1`` for bottom."""
        if key.is_root:
            return 0
        attrs = key.attributes()
        if attrs == frozenset(self.schema.names):
            return len(self.levels) + 1
        for i, lv in enumerate(self.levels):
            if frozenset(lv) == attrs:
                return i + 1
        raise KeyOutsideSchema(f"{key} is not on any configured level")

    def to_dict(self):
        return {
            "schema": self.schema.to_dict(),
            "levels": [list(lv) for lv in self.levels],
            "bottom": [[v for _, v in k.items()] for k in self.bottom],
        }

    @classmethod
    def from_dict(cls, data):
        schema = AttributeSchema.from_dict(data["schema"])
        bottom = [schema.key(zip(schema.names, row)) for row in data["bottom"]]
        return build_structure(schema, data["levels"], bottom)


def build_structure(schema: AttributeSchema, levels, bottom_keys) -> GroupStructure:
    """Enumerate every node induced by the observed bottom keys.

    Parameters
    ----------
    schema : AttributeSchema
    levels : sequence of sequences of attribute names
        Aggregation levels between the root and the bottom. A level naming
        every attribute coincides with the bottom and is not repeated.
    bottom_keys : iterable of SeriesKey or mapping
        Fully bound keys present in the data. Duplicates are ignored.

    Returns
    -------
    GroupStructure
    """
    if not levels:
        raise ValueError("at least one aggregation level is required")
    full = frozenset(schema.names)
    canon_levels = []
    seen = set()
    for lv in levels:
        names = list(dict.fromkeys(lv))
        for n in names:
            schema._check(n)
        fs = frozenset(names)
        if fs in seen:
            continue
        seen.add(fs)
        canon_levels.append(tuple(sorted(names, key=schema._pos.get)))

    bottom = set()
    for k in bottom_keys:
        k = schema.key(k)
        if k.attributes() != full:
            raise KeyOutsideSchema(f"bottom key {k} does not bind every attribute {sorted(full)}")
        bottom.add(k)
    if not bottom:
        raise EmptyBottom("no bottom-level series observed")
    bottom = sorted(bottom, key=schema.sort_key)

    nodes = [SeriesKey()]
    for lv in canon_levels:
        if frozenset(lv) == full or not lv:
            continue
        level_nodes = {k.restrict(lv) for k in bottom}
        nodes.extend(sorted(level_nodes, key=schema.sort_key))
    nodes.extend(bottom)
    return GroupStructure(schema, tuple(canon_levels), tuple(nodes), tuple(bottom))


@dataclass(frozen=True)
class SummingMatrix:
    """0/1 matrix mapping bottom series (columns) onto every node (rows)."""

    entries: np.ndarray
    row_index: dict = field(repr=False)
    col_index: dict = field(repr=False)

    def __post_init__(self):
        S = np.array(self.entries, dtype=float)
        S.setflags(write=False)
        object.__setattr__(self, "entries", S)

    @property
    def shape(self):
        return self.entries.shape

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)


def build_summing_matrix(structure: GroupStructure) -> SummingMatrix:
    n, m = structure.n_nodes, structure.n_bottom
    S = np.zeros((n, m))
    for i, node in enumerate(structure.nodes):
        for j, b in enumerate(structure.bottom):
            if node.covers(b):
                S[i, j] = 1.0
    return SummingMatrix(
        S,
        {k: i for i, k in enumerate(structure.nodes)},
        {k: j for j, k in enumerate(structure.bottom)},
    )


@dataclass(frozen=True)
class WeekCalendar:
    """Consecutive weekly buckets starting on ``start``.

    ``start`` is moved back to the most recent ``week_start`` weekday, so any
    date inside the first week works as an anchor.
    """

    start: _dt.date
    n_weeks: int
    week_start: str = "sunday"

    def __post_init__(self):
        ws = self.week_start.lower()
        if ws not in WEEKDAYS:
            raise ValueError(f"week_start must be a weekday name, got {self.week_start!r}")
        start = self.start
        if isinstance(start, str):
            start = _dt.date.fromisoformat(start)
        if isinstance(start, _dt.datetime):
            start = start.date()
        start -= _dt.timedelta(days=(start.weekday() - WEEKDAYS.index(ws)) % 7)
        if int(self.n_weeks) < 1:
            raise ValueError("a calendar needs at least one week")
        object.__setattr__(self, "week_start", ws)
        object.__setattr__(self, "start", start)
        object.__setattr__(self, "n_weeks", int(self.n_weeks))

    def __len__(self):
        return self.n_weeks

    def week_of(self, date) -> int:
        """Week number of ``date`` without range checking (may be negative)."""
        if isinstance(date, _dt.datetime):
            date = date.date()
        return (date - self.start).days // 7

    def index(self, date) -> int:
        w = self.week_of(date)
        if not 0 <= w < self.n_weeks:
            raise DataError(f"date {date} falls outside the calendar {self.start}..{self.week_date(self.n_weeks - 1)}")
        return w

    def week_date(self, i: int) -> _dt.date:
        return self.start + _dt.timedelta(weeks=int(i))

    @classmethod
    def spanning(cls, dates: Iterable, week_start="sunday"):
        dates = list(dates)
        first = cls(min(dates), 1, week_start)
        return cls(first.start, first.week_of(max(dates)) + 1, week_start)


class _IntCalendar:
    def __init__(self, n):
        self.n = int(n)

    def __len__(self):
        return self.n

    def index(self, t):
        t = int(t)
        if not 0 <= t < self.n:
            raise DataError(f"period {t} falls outside 0..{self.n - 1}")
        return t


def _calendar(calendar):
    return _IntCalendar(calendar) if isinstance(calendar, (int, np.integer)) else calendar


def aggregate_matrix(records, structure: GroupStructure, calendar, S: SummingMatrix | None = None) -> np.ndarray:
    """Node-by-period matrix of summed quantities, rows in node order.

    ``records`` yields ``(timestamp, key, quantity)``; ``calendar`` is either
    a period count (integer timestamps) or an object with ``index`` and
    ``len``, such as :class:`WeekCalendar`.
    """
    cal = _calendar(calendar)
    S = S or build_summing_matrix(structure)
    schema = structure.schema
    full = frozenset(schema.names)
    bottom = np.zeros((structure.n_bottom, len(cal)))
    for t, key, qty in records:
        key = schema.key(key)
        j = S.col_index.get(key)
        if j is None:
            if key.attributes() != full:
                raise KeyOutsideSchema(f"record key {key} does not bind every attribute")
            raise KeyOutsideSchema(f"record key {key} is not a bottom series of this structure")
        q = float(qty)
        if not np.isfinite(q):
            raise NonFiniteQuantity(f"non-finite quantity {qty!r} for {key} at {t}")
        bottom[j, cal.index(t)] += q
    return S.entries @ bottom


def aggregate_records(records, structure: GroupStructure, calendar, period_length: int = 1) -> dict:
    """Map each node key to its aggregated :class:`TimeSeries`.

    Weeks without records are zero. Aggregates are computed as S times the
    bottom matrix so they are coherent by construction.
    """
    cal = _calendar(calendar)
    Y = aggregate_matrix(records, structure, cal)
    start = cal.start.isoformat() if isinstance(cal, WeekCalendar) else 0
    return {k: TimeSeries(Y[i], start, period_length) for i, k in enumerate(structure.nodes)}

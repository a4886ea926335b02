"""Reading raw sales transactions from CSV."""

from __future__ import annotations

import csv
import datetime as _dt
import math
import warnings
from dataclasses import dataclass
from pathlib import Path

from .errors import BadDate, BadQuantity, EmptyFile, KeyOutsideSchema, MissingColumn
from .grouping import AttributeSchema, SeriesKey

__all__ = ["SalesRecord", "parse_sales_csv", "write_sales_csv", "records_for_aggregation"]

DATE_COLUMN = "date"
QUANTITY_COLUMN = "quantity"
_QUANTITY_ALIASES = ("quantity", "qty")


@dataclass(frozen=True)
class SalesRecord:
    """One CSV row: a sale of ``quantity`` units of a fully specified series."""

    date: _dt.date
    key: SeriesKey
    quantity: float
    row: int = 0


def _parse_date(text, row):
    text = text.strip()
    try:
        if len(text) > 10:
            return _dt.datetime.fromisoformat(text).date()
        return _dt.date.fromisoformat(text)
    except ValueError:
        raise BadDate(row, text) from None


def _parse_quantity(text, row):
    try:
        q = float(text)
    except (TypeError, ValueError):
        raise BadQuantity(row, text) from None
    if not math.isfinite(q) or q < 0:
        raise BadQuantity(row, text)
    return q


def parse_sales_csv(path, schema: AttributeSchema) -> list:
    """Parse a transactions file into :class:`SalesRecord` objects.

    The header must contain ``date``, one column per schema attribute and
    ``quantity`` (``qty`` is accepted too); other columns are ignored with a
    warning. Rows are kept one-to-one, duplicates included. Row numbers in
    errors count data rows from 1.

    Raises
    ------
    EmptyFile
        No header, or a header with no data rows.
    MissingColumn
        A required column is absent; all missing names are listed.
    BadDate, BadQuantity, KeyOutsideSchema
        A row cannot be parsed; the message names the row.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8-sig") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or not any(h.strip() for h in header):
            raise EmptyFile(f"{path.name}: no header row")
        header = [h.strip() for h in header]
        pos = {h: i for i, h in enumerate(header)}
        qcol = next((c for c in _QUANTITY_ALIASES if c in pos), QUANTITY_COLUMN)
        required = [DATE_COLUMN, *schema.names, qcol]
        missing = [c for c in required if c not in pos]
        if missing:
            raise MissingColumn(missing)
        extra = [h for h in header if h not in required]
        if extra:
            warnings.warn(f"{path.name}: ignoring extra column(s) {extra}", stacklevel=2)
        idate, iq = pos[DATE_COLUMN], pos[qcol]
        iattr = [(n, pos[n]) for n in schema.names]
        records = []
        for row, fields in enumerate(reader, start=1):
            if not fields or not any(f.strip() for f in fields):
                continue
            if len(fields) < len(header):
                fields = fields + [""] * (len(header) - len(fields))
            date = _parse_date(fields[idate], row)
            qty = _parse_quantity(fields[iq].strip(), row)
            try:
                key = schema.key({n: fields[i].strip() for n, i in iattr})
            except KeyOutsideSchema as exc:
                raise KeyOutsideSchema(f"row {row}: {exc}") from None
            records.append(SalesRecord(date, key, qty, row))
    if not records:
        raise EmptyFile(f"{path.name}: header present but no data rows")
    return records


def write_sales_csv(path, rows, schema: AttributeSchema):
    """Write ``(date, *attribute values, quantity)`` tuples with a header."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([DATE_COLUMN, *schema.names, QUANTITY_COLUMN])
        for r in rows:
            w.writerow(r)


def records_for_aggregation(records):
    """``(date, key, quantity)`` triples as expected by the aggregation helpers."""
    return [(r.date, r.key, r.quantity) for r in records]

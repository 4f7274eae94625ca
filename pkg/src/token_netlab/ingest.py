"""Parsing and validation of transfer records and price series from CSV.

Transfer CSVs must carry the columns listed in ``TRANSFER_COLUMNS``; extra
columns are ignored.  Empty string means "absent" for the optional fields
(price_crypto, crypto_symbol, price_usd, category).  All text is UTF-8, a
leading BOM is tolerated and stripped.
"""

from __future__ import annotations

import csv
import io
import re
from dataclasses import dataclass
from datetime import date, datetime, timezone
from enum import Enum
from pathlib import Path
from typing import IO, Iterable, Union

from .errors import (
    DuplicateDateError,
    EmptySeriesError,
    MissingColumnError,
    NonPositivePriceError,
    StrictIngestError,
)

TRANSFER_COLUMNS = (
    "tx_hash",
    "timestamp",
    "contract_address",
    "from_address",
    "to_address",
    "token_id",
    "price_crypto",
    "crypto_symbol",
    "price_usd",
    "collection",
    "category",
)

PRICE_COLUMNS = ("date", "avg_price_usd")

ZERO_ADDRESS = "0x" + "0" * 40

_ADDRESS_RE = re.compile(r"0x[0-9a-f]{40}\Z")

Source = Union[str, Path, IO[str], IO[bytes]]


class AddressClass(Enum):
    MINT_BURN = "mint_burn"
    ORDINARY = "ordinary"


@dataclass(frozen=True)
class TransferRecord:
    """One accepted token transfer."""

    tx_hash: str
    timestamp: datetime
    contract_address: str
    from_address: str
    to_address: str
    token_id: str
    price_crypto: float | None
    crypto_symbol: str | None
    price_usd: float | None
    collection: str
    category: str | None


@dataclass(frozen=True)
class RejectedRow:
    """A data row that failed validation; ``row`` is 1-based over data rows."""

    row: int
    reason: str


@dataclass(frozen=True)
class PricePoint:
    date: date
    avg_price_usd: float


@dataclass(frozen=True)
class PriceSeries:
    """Date-ordered average-price observations for one collection."""

    points: tuple[PricePoint, ...]
    collection: str = ""

    def __len__(self) -> int:
        return len(self.points)

    def dates(self) -> list[date]:
        return [p.date for p in self.points]

    def prices(self) -> list[float]:
        return [p.avg_price_usd for p in self.points]


def normalize_address(raw: str) -> str | None:
    """Lowercase ``raw`` and return it if it is 0x + 40 hex chars, else None."""
    addr = raw.strip().lower()
    if _ADDRESS_RE.match(addr):
        return addr
    return None


def classify_address(address: str) -> AddressClass:
    """Classify a normalized address: the all-zero address is mint/burn."""
    if normalize_address(address) == ZERO_ADDRESS:
        return AddressClass.MINT_BURN
    return AddressClass.ORDINARY


def _parse_timestamp(raw: str) -> datetime:
    """Parse an ISO-8601 instant to tz-aware UTC, truncated to seconds."""
    text = raw.strip()
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    ts = datetime.fromisoformat(text)
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    else:
        ts = ts.astimezone(timezone.utc)
    return ts.replace(microsecond=0)


def _parse_price(raw: str) -> float | None:
    """Empty string is absent; otherwise a non-negative finite number."""
    text = raw.strip()
    if not text:
        return None
    value = float(text)
    if not value >= 0 or value != value or value == float("inf"):
        raise ValueError(f"price out of range: {raw!r}")
    return value


def _open_text(source: Source):
    """Yield a text reader for a path, text stream, or byte stream."""
    if isinstance(source, (str, Path)):
        return open(source, "r", encoding="utf-8-sig", newline=""), True
    if isinstance(source, io.TextIOBase) or hasattr(source, "encoding"):
        return source, False
    return io.TextIOWrapper(source, encoding="utf-8-sig", newline=""), False


def _checked_reader(stream, required: tuple[str, ...]) -> csv.DictReader:
    reader = csv.DictReader(stream)
    header = reader.fieldnames
    if header is None:
        raise MissingColumnError(f"empty input, expected columns {required}")
    header = [h.lstrip("﻿").strip() for h in header]
    reader.fieldnames = header
    missing = [c for c in required if c not in header]
    if missing:
        raise MissingColumnError(f"missing column(s): {', '.join(missing)}")
    return reader


def _validate_transfer_row(row: dict[str, str]) -> TransferRecord:
    """Build a TransferRecord or raise ValueError with a short reason."""
    tx_hash = (row.get("tx_hash") or "").strip()
    if not tx_hash:
        raise ValueError("missing tx_hash")
    token_id = (row.get("token_id") or "").strip()
    if not token_id:
        raise ValueError("missing token_id")
    collection = (row.get("collection") or "").strip()
    if not collection:
        raise ValueError("missing collection")

    try:
        timestamp = _parse_timestamp(row.get("timestamp") or "")
    except ValueError:
        raise ValueError("bad timestamp") from None

    contract = normalize_address(row.get("contract_address") or "")
    if contract is None:
        raise ValueError("bad contract_address")
    from_addr = normalize_address(row.get("from_address") or "")
    if from_addr is None:
        raise ValueError("bad from_address")
    to_addr = normalize_address(row.get("to_address") or "")
    if to_addr is None:
        raise ValueError("bad to_address")
    if from_addr == to_addr:
        raise ValueError("self transfer")

    try:
        price_crypto = _parse_price(row.get("price_crypto") or "")
    except ValueError:
        raise ValueError("bad price_crypto") from None
    try:
        price_usd = _parse_price(row.get("price_usd") or "")
    except ValueError:
        raise ValueError("bad price_usd") from None

    crypto_symbol = (row.get("crypto_symbol") or "").strip() or None
    category = (row.get("category") or "").strip() or None

    return TransferRecord(
        tx_hash=tx_hash,
        timestamp=timestamp,
        contract_address=contract,
        from_address=from_addr,
        to_address=to_addr,
        token_id=token_id,
        price_crypto=price_crypto,
        crypto_symbol=crypto_symbol,
        price_usd=price_usd,
        collection=collection,
        category=category,
    )


def parse_transfers(
    source: Source, strict: bool = False
) -> tuple[list[TransferRecord], list[RejectedRow]]:
    """Parse a transfer CSV into accepted records and rejected rows.

    Every data row ends up in exactly one of the two lists.  Rejections
    carry the 1-based data-row number and a short reason.  In strict mode
    the first rejection raises :class:`StrictIngestError` instead.

    Raises
    ------
    MissingColumnError
        If the header lacks any column from ``TRANSFER_COLUMNS``.
    """
    stream, owned = _open_text(source)
    accepted: list[TransferRecord] = []
    rejected: list[RejectedRow] = []
    try:
        reader = _checked_reader(stream, TRANSFER_COLUMNS)
        for row_no, row in enumerate(reader, start=1):
            try:
                accepted.append(_validate_transfer_row(row))
            except ValueError as exc:
                if strict:
                    raise StrictIngestError(f"{exc} @ row {row_no}") from None
                rejected.append(RejectedRow(row=row_no, reason=str(exc)))
    finally:
        if owned:
            stream.close()
    return accepted, rejected


def write_transfers(records: Iterable[TransferRecord], dest: Source) -> None:
    """Serialize records back to transfer CSV (inverse of parse_transfers)."""
    if isinstance(dest, (str, Path)):
        stream = open(dest, "w", encoding="utf-8", newline="")
        owned = True
    else:
        stream, owned = dest, False
    try:
        writer = csv.writer(stream)
        writer.writerow(TRANSFER_COLUMNS)
        for r in records:
            writer.writerow(
                [
                    r.tx_hash,
                    r.timestamp.isoformat(),
                    r.contract_address,
                    r.from_address,
                    r.to_address,
                    r.token_id,
                    "" if r.price_crypto is None else repr(r.price_crypto),
                    r.crypto_symbol or "",
                    "" if r.price_usd is None else repr(r.price_usd),
                    r.collection,
                    r.category or "",
                ]
            )
    finally:
        if owned:
            stream.close()


def parse_price_series(source: Source, collection: str = "") -> PriceSeries:
    """Parse a (date, avg_price_usd) CSV into a date-sorted PriceSeries.

    Raises
    ------
    MissingColumnError
        If the header lacks ``date`` or ``avg_price_usd``.
    NonPositivePriceError
        If any price is <= 0 (its log-price would not exist).
    DuplicateDateError
        If the same date appears twice.
    EmptySeriesError
        If fewer than two data rows remain.
    """
    stream, owned = _open_text(source)
    points: list[PricePoint] = []
    try:
        reader = _checked_reader(stream, PRICE_COLUMNS)
        for row_no, row in enumerate(reader, start=1):
            raw_date = (row.get("date") or "").strip()
            try:
                day = date.fromisoformat(raw_date)
            except ValueError:
                raise ValueError(f"bad date {raw_date!r} @ row {row_no}") from None
            raw_price = (row.get("avg_price_usd") or "").strip()
            try:
                price = float(raw_price)
            except ValueError:
                raise ValueError(f"bad price {raw_price!r} @ row {row_no}") from None
            if not price > 0:
                raise NonPositivePriceError(f"price {price} @ row {row_no}")
            points.append(PricePoint(date=day, avg_price_usd=price))
    finally:
        if owned:
            stream.close()

    points.sort(key=lambda p: p.date)
    for prev, cur in zip(points, points[1:]):
        if prev.date == cur.date:
            raise DuplicateDateError(f"duplicate date {cur.date.isoformat()}")
    if len(points) < 2:
        raise EmptySeriesError(f"need at least 2 rows, got {len(points)}")
    return PriceSeries(points=tuple(points), collection=collection)

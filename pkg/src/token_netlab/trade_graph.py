"""Immutable multi-edge directed trade graph built from transfer records.

Nodes are wallet addresses mapped to dense integer ids in first-appearance
order; every transfer becomes one directed edge, parallel edges preserved.
All queries are read-only, so a built graph is safe to share across threads.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import EmptyGraphError, UnknownNodeError
from .ingest import ZERO_ADDRESS, TransferRecord

_SNAPSHOT_MAGIC = b"TNLG"
_SNAPSHOT_VERSION = 1


@dataclass(frozen=True)
class EdgeAttrs:
    tx_hash: str
    timestamp: datetime
    price_usd: float | None


class TradeGraph:
    """Directed multigraph with dense node ids and per-edge attributes."""

    __slots__ = (
        "addresses",
        "edge_src",
        "edge_dst",
        "edge_attrs",
        "_ids",
        "_out_degree",
        "_in_degree",
        "_dedup_cache",
        "_undirected_cache",
    )

    def __init__(
        self,
        addresses: Sequence[str],
        edge_src: Sequence[int],
        edge_dst: Sequence[int],
        edge_attrs: Sequence[EdgeAttrs],
    ):
        self.addresses: tuple[str, ...] = tuple(addresses)
        self.edge_src = np.asarray(edge_src, dtype=np.int64)
        self.edge_dst = np.asarray(edge_dst, dtype=np.int64)
        self.edge_attrs: tuple[EdgeAttrs, ...] = tuple(edge_attrs)
        n = len(self.addresses)
        if len(self.edge_src) != len(self.edge_dst) or len(self.edge_src) != len(
            self.edge_attrs
        ):
            raise ValueError("edge arrays must have equal length")
        if len(self.edge_src) and (
            self.edge_src.min() < 0
            or self.edge_dst.min() < 0
            or self.edge_src.max() >= n
            or self.edge_dst.max() >= n
        ):
            raise ValueError("edge endpoint outside node table")
        if np.any(self.edge_src == self.edge_dst):
            raise ValueError("self-loops are not allowed")
        self._ids = {a: i for i, a in enumerate(self.addresses)}
        if len(self._ids) != n:
            raise ValueError("duplicate address in node table")
        self._out_degree = np.bincount(self.edge_src, minlength=n).astype(np.int64)
        self._in_degree = np.bincount(self.edge_dst, minlength=n).astype(np.int64)
        self._dedup_cache: tuple[np.ndarray, np.ndarray] | None = None
        self._undirected_cache: tuple[np.ndarray, np.ndarray, np.ndarray] | None = None

    @classmethod
    def from_pairs(
        cls,
        pairs: Iterable[tuple[str, str]],
        attrs: Sequence[EdgeAttrs] | None = None,
    ) -> "TradeGraph":
        """Build a graph from (src, dst) address pairs; handy for tests."""
        pairs = list(pairs)
        if attrs is None:
            stamp = datetime(2021, 1, 1, tzinfo=timezone.utc)
            attrs = [EdgeAttrs(f"tx{i}", stamp, None) for i in range(len(pairs))]
        ids: dict[str, int] = {}
        src, dst = [], []
        for a, b in pairs:
            src.append(ids.setdefault(a, len(ids)))
            dst.append(ids.setdefault(b, len(ids)))
        return cls(list(ids), src, dst, attrs)

    @property
    def n_nodes(self) -> int:
        return len(self.addresses)

    @property
    def n_edges(self) -> int:
        return len(self.edge_src)

    def node_id(self, address: str) -> int:
        try:
            return self._ids[address]
        except KeyError:
            raise UnknownNodeError(address) from None

    def has_node(self, address: str) -> bool:
        return address in self._ids

    def in_degree_of(self, node: int) -> int:
        return int(self._in_degree[node])

    def out_degree_of(self, node: int) -> int:
        return int(self._out_degree[node])

    def dedup_edges(self) -> tuple[np.ndarray, np.ndarray]:
        """Unique directed (src, dst) pairs, sorted; parallel edges collapsed."""
        if self._dedup_cache is None:
            if self.n_edges == 0:
                empty = np.empty(0, dtype=np.int64)
                self._dedup_cache = (empty, empty)
            else:
                key = self.edge_src * self.n_nodes + self.edge_dst
                uniq = np.unique(key)
                self._dedup_cache = (uniq // self.n_nodes, uniq % self.n_nodes)
        return self._dedup_cache

    def undirected_edges(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Simple undirected reduction: unique (u < v) pairs with multiplicity.

        The weight of {u, v} counts every parallel edge in either direction.
        """
        if self._undirected_cache is None:
            if self.n_edges == 0:
                empty = np.empty(0, dtype=np.int64)
                self._undirected_cache = (empty, empty, empty)
            else:
                lo = np.minimum(self.edge_src, self.edge_dst)
                hi = np.maximum(self.edge_src, self.edge_dst)
                key = lo * self.n_nodes + hi
                uniq, counts = np.unique(key, return_counts=True)
                self._undirected_cache = (
                    uniq // self.n_nodes,
                    uniq % self.n_nodes,
                    counts.astype(np.int64),
                )
        return self._undirected_cache


def build_graph(
    records: Sequence[TransferRecord], include_mint_burn: bool = False
) -> TradeGraph:
    """Build the trade graph, one edge per record in input order.

    With ``include_mint_burn=False`` (the default for metric graphs) every
    record touching the all-zero address is dropped, since that hub is not
    a real wallet.  Node ids follow first appearance over the kept records.

    Raises
    ------
    EmptyGraphError
        If no edges remain after filtering.
    """
    ids: dict[str, int] = {}
    src: list[int] = []
    dst: list[int] = []
    attrs: list[EdgeAttrs] = []
    for rec in records:
        if not include_mint_burn and ZERO_ADDRESS in (
            rec.from_address,
            rec.to_address,
        ):
            continue
        src.append(ids.setdefault(rec.from_address, len(ids)))
        dst.append(ids.setdefault(rec.to_address, len(ids)))
        attrs.append(EdgeAttrs(rec.tx_hash, rec.timestamp, rec.price_usd))
    if not src:
        raise EmptyGraphError("no edges after filtering")
    return TradeGraph(list(ids), src, dst, attrs)


def degree(graph: TradeGraph, node: str, direction: str = "total") -> int:
    """Degree of ``node`` counting parallel edges individually."""
    nid = graph.node_id(node)
    if direction == "in":
        return graph.in_degree_of(nid)
    if direction == "out":
        return graph.out_degree_of(nid)
    if direction == "total":
        return graph.in_degree_of(nid) + graph.out_degree_of(nid)
    raise ValueError(f"direction must be in|out|total, got {direction!r}")


def top_degree_nodes(graph: TradeGraph, k: int) -> list[tuple[str, int]]:
    """Top ``k`` nodes by total degree, ties broken by address ascending."""
    if k < 1:
        raise ValueError("k must be >= 1")
    total = graph._out_degree + graph._in_degree
    ranked = sorted(
        zip(graph.addresses, total.tolist()), key=lambda t: (-t[1], t[0])
    )
    return ranked[: min(k, graph.n_nodes)]


@dataclass(frozen=True)
class ProvenanceConflict:
    """A replay row skipped because its sender did not hold the token."""

    tx_hash: str
    contract_address: str
    token_id: str
    reason: str


@dataclass(frozen=True)
class OwnershipTable:
    """Final per-address token counts after replaying transfers in time order."""

    counts: dict[str, int]
    minted: int
    burned: int
    conflicts: tuple[ProvenanceConflict, ...] = field(default=())

    def total_held(self) -> int:
        return sum(self.counts.values())


def ownership_table(records: Sequence[TransferRecord]) -> OwnershipTable:
    """Replay transfers chronologically per (contract, token) to final holders.

    A mint (from the zero address) creates the token, a transfer to the zero
    address burns it.  A row whose sender is not the current holder (or that
    mints an already-live token) is recorded as a conflict and skipped, so
    conservation always holds: sum(counts) == minted - burned.
    """
    ordered = sorted(records, key=lambda r: r.timestamp)
    holder: dict[tuple[str, str], str] = {}
    minted = 0
    burned = 0
    conflicts: list[ProvenanceConflict] = []
    for rec in ordered:
        key = (rec.contract_address, rec.token_id)
        if rec.from_address == ZERO_ADDRESS:
            if key in holder:
                conflicts.append(
                    ProvenanceConflict(rec.tx_hash, *key, "mint of live token")
                )
                continue
            holder[key] = rec.to_address
            minted += 1
        elif holder.get(key) != rec.from_address:
            conflicts.append(
                ProvenanceConflict(rec.tx_hash, *key, "sender is not holder")
            )
        elif rec.to_address == ZERO_ADDRESS:
            del holder[key]
            burned += 1
        else:
            holder[key] = rec.to_address

    counts: dict[str, int] = {}
    for addr in holder.values():
        counts[addr] = counts.get(addr, 0) + 1
    counts = dict(sorted(counts.items()))
    return OwnershipTable(
        counts=counts, minted=minted, burned=burned, conflicts=tuple(conflicts)
    )


@dataclass(frozen=True)
class TraderStats:
    bought_count: int
    sold_count: int
    bought_volume_usd: float | None
    sold_volume_usd: float | None


def trader_volume(graph: TradeGraph) -> dict[str, TraderStats]:
    """Per-address trade aggregates: out-edges are sales, in-edges are buys.

    An edge without a price adds 1 to the count and nothing to the volume;
    a direction with no priced edge at all reports an absent volume (None).
    """
    n = graph.n_nodes
    bought_n = np.zeros(n, dtype=np.int64)
    sold_n = np.zeros(n, dtype=np.int64)
    bought_v = np.zeros(n, dtype=np.float64)
    sold_v = np.zeros(n, dtype=np.float64)
    bought_priced = np.zeros(n, dtype=np.int64)
    sold_priced = np.zeros(n, dtype=np.int64)
    for src, dst, attr in zip(graph.edge_src, graph.edge_dst, graph.edge_attrs):
        sold_n[src] += 1
        bought_n[dst] += 1
        if attr.price_usd is not None:
            sold_v[src] += attr.price_usd
            bought_v[dst] += attr.price_usd
            sold_priced[src] += 1
            bought_priced[dst] += 1
    out: dict[str, TraderStats] = {}
    for i, addr in enumerate(graph.addresses):
        out[addr] = TraderStats(
            bought_count=int(bought_n[i]),
            sold_count=int(sold_n[i]),
            bought_volume_usd=float(bought_v[i]) if bought_priced[i] else None,
            sold_volume_usd=float(sold_v[i]) if sold_priced[i] else None,
        )
    return out


@dataclass(frozen=True)
class YearSummary:
    transactions: int
    total_volume_usd: float
    average_price_usd: float | None


def yearly_summary(records: Sequence[TransferRecord]) -> dict[int, YearSummary]:
    """Per-UTC-year transaction count, USD volume, and mean price.

    Unpriced records count as transactions but are excluded from the
    average's denominator.
    """
    txs: dict[int, int] = {}
    vol: dict[int, float] = {}
    priced: dict[int, int] = {}
    for rec in records:
        year = rec.timestamp.year
        txs[year] = txs.get(year, 0) + 1
        if rec.price_usd is not None:
            vol[year] = vol.get(year, 0.0) + rec.price_usd
            priced[year] = priced.get(year, 0) + 1
    out: dict[int, YearSummary] = {}
    for year in sorted(txs):
        n_priced = priced.get(year, 0)
        total = vol.get(year, 0.0)
        out[year] = YearSummary(
            transactions=txs[year],
            total_volume_usd=total,
            average_price_usd=(total / n_priced) if n_priced else None,
        )
    return out


def save_snapshot(graph: TradeGraph, path: str | Path) -> None:
    """Write a versioned binary snapshot (see load_snapshot for the format)."""
    with open(path, "wb") as fh:
        fh.write(_SNAPSHOT_MAGIC)
        fh.write(struct.pack("<HQQ", _SNAPSHOT_VERSION, graph.n_nodes, graph.n_edges))
        for addr in graph.addresses:
            raw = addr.encode("utf-8")
            fh.write(struct.pack("<I", len(raw)))
            fh.write(raw)
        fh.write(graph.edge_src.astype("<i8").tobytes())
        fh.write(graph.edge_dst.astype("<i8").tobytes())
        for attr in graph.edge_attrs:
            raw = attr.tx_hash.encode("utf-8")
            price = float("nan") if attr.price_usd is None else attr.price_usd
            fh.write(struct.pack("<I", len(raw)))
            fh.write(raw)
            fh.write(struct.pack("<qd", int(attr.timestamp.timestamp()), price))


def load_snapshot(path: str | Path) -> TradeGraph:
    """Read a snapshot written by save_snapshot.

    Layout (all little-endian): magic ``TNLG``, u16 version, u64 node count,
    u64 edge count, node table of (u32 length, utf-8 address), edge source
    ids as i64[], edge destination ids as i64[], then per edge (u32 length,
    utf-8 tx hash, i64 epoch seconds, f64 price with NaN meaning absent).
    """
    with open(path, "rb") as fh:
        if fh.read(4) != _SNAPSHOT_MAGIC:
            raise ValueError("not a trade-graph snapshot")
        version, n_nodes, n_edges = struct.unpack("<HQQ", fh.read(18))
        if version != _SNAPSHOT_VERSION:
            raise ValueError(f"unsupported snapshot version {version}")
        addresses = []
        for _ in range(n_nodes):
            (length,) = struct.unpack("<I", fh.read(4))
            addresses.append(fh.read(length).decode("utf-8"))
        src = np.frombuffer(fh.read(8 * n_edges), dtype="<i8").astype(np.int64)
        dst = np.frombuffer(fh.read(8 * n_edges), dtype="<i8").astype(np.int64)
        attrs = []
        for _ in range(n_edges):
            (length,) = struct.unpack("<I", fh.read(4))
            tx_hash = fh.read(length).decode("utf-8")
            epoch, price = struct.unpack("<qd", fh.read(16))
            attrs.append(
                EdgeAttrs(
                    tx_hash,
                    datetime.fromtimestamp(epoch, tz=timezone.utc),
                    None if price != price else price,
                )
            )
    return TradeGraph(addresses, src, dst, attrs)

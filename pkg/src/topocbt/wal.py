"""Undo-style write-ahead log with a length-prefixed binary file format.

Record layout (all integers big-endian):

    u32  record length (bytes after this prefix)
    u64  sequence number (strictly increasing across the whole log)
    u64  transaction id
    u8   kind: 0 = Undo, 1 = Abort, 2 = Commit
    Undo only:
      u32 x 3  planned update-block ref (chain, height, branch)
      u32      snapshot length
      bytes    snapshot: u16 update count, then per update
               u16-prefixed owner_from / owner_to / asset strings
               and u64 amount

An Undo record is written before its update block is appended; the
snapshot holds exactly the updates that block will carry, so rollback
can append the inverse transfers, and recovery can tell whether the
append ever happened by checking for the planned ref.
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass
from typing import Iterable, Optional

from .chain import AssetUpdate, BlockRef


class WalKind(enum.IntEnum):
    UNDO = 0
    ABORT = 1
    COMMIT = 2


class WalFormatError(Exception):
    pass


def _pack_str(s: str) -> bytes:
    raw = s.encode("utf-8")
    return struct.pack(">H", len(raw)) + raw


def _unpack_str(buf: bytes, off: int) -> tuple[str, int]:
    (n,) = struct.unpack_from(">H", buf, off)
    off += 2
    return buf[off : off + n].decode("utf-8"), off + n


def _pack_updates(updates: tuple[AssetUpdate, ...]) -> bytes:
    out = [struct.pack(">H", len(updates))]
    for u in updates:
        out.append(_pack_str(u.owner_from))
        out.append(_pack_str(u.owner_to))
        out.append(_pack_str(u.asset))
        out.append(struct.pack(">Q", u.amount))
    return b"".join(out)


def _unpack_updates(buf: bytes) -> tuple[AssetUpdate, ...]:
    (count,) = struct.unpack_from(">H", buf, 0)
    off = 2
    updates = []
    for _ in range(count):
        owner_from, off = _unpack_str(buf, off)
        owner_to, off = _unpack_str(buf, off)
        asset, off = _unpack_str(buf, off)
        (amount,) = struct.unpack_from(">Q", buf, off)
        off += 8
        updates.append(AssetUpdate(owner_from, owner_to, asset, amount))
    return tuple(updates)


@dataclass(frozen=True)
class WalRecord:
    sequence: int
    txn_id: int
    kind: WalKind
    block_ref: Optional[BlockRef] = None       # Undo: planned update-block position
    updates: tuple[AssetUpdate, ...] = ()      # Undo: updates that block will carry

    def to_bytes(self) -> bytes:
        body = struct.pack(">QQB", self.sequence, self.txn_id, int(self.kind))
        if self.kind is WalKind.UNDO:
            assert self.block_ref is not None
            snapshot = _pack_updates(self.updates)
            body += struct.pack(
                ">IIII", self.block_ref.chain, self.block_ref.height, self.block_ref.branch, len(snapshot)
            )
            body += snapshot
        return struct.pack(">I", len(body)) + body


def record_from_bytes(body: bytes, index: int) -> WalRecord:
    if len(body) < 17:
        raise WalFormatError(f"record {index}: truncated header")
    sequence, txn_id, kind_raw = struct.unpack_from(">QQB", body, 0)
    try:
        kind = WalKind(kind_raw)
    except ValueError:
        raise WalFormatError(f"record {index}: unknown kind {kind_raw}") from None
    if kind is not WalKind.UNDO:
        return WalRecord(sequence, txn_id, kind)
    chain, height, branch, snap_len = struct.unpack_from(">IIII", body, 17)
    snapshot = body[33 : 33 + snap_len]
    if len(snapshot) != snap_len:
        raise WalFormatError(f"record {index}: truncated snapshot")
    return WalRecord(sequence, txn_id, kind, BlockRef(chain, height, branch), _unpack_updates(snapshot))


class WriteAheadLog:
    """In-memory log; each append is durable at simulation granularity."""

    def __init__(self, records: Iterable[WalRecord] = ()) -> None:
        self.records: list[WalRecord] = list(records)
        self._check_sequences(self.records)

    @staticmethod
    def _check_sequences(records: list[WalRecord]) -> None:
        last = 0
        for i, rec in enumerate(records):
            if rec.sequence <= last:
                raise WalFormatError(f"record {i}: sequence {rec.sequence} not after {last}")
            last = rec.sequence

    def next_sequence(self) -> int:
        return self.records[-1].sequence + 1 if self.records else 1

    def append(self, txn_id: int, kind: WalKind, block_ref: Optional[BlockRef] = None,
               updates: tuple[AssetUpdate, ...] = ()) -> WalRecord:
        rec = WalRecord(self.next_sequence(), txn_id, kind, block_ref, updates)
        self.records.append(rec)
        return rec

    def records_for(self, txn_id: int) -> list[WalRecord]:
        return [r for r in self.records if r.txn_id == txn_id]

    def terminal_for(self, txn_id: int) -> Optional[WalRecord]:
        for rec in self.records:
            if rec.txn_id == txn_id and rec.kind in (WalKind.ABORT, WalKind.COMMIT):
                return rec
        return None

    def to_bytes(self) -> bytes:
        return b"".join(rec.to_bytes() for rec in self.records)

    @classmethod
    def from_bytes(cls, data: bytes) -> "WriteAheadLog":
        records: list[WalRecord] = []
        off = 0
        index = 0
        last_seq = 0
        while off < len(data):
            if off + 4 > len(data):
                raise WalFormatError(f"record {index}: truncated length prefix")
            (length,) = struct.unpack_from(">I", data, off)
            off += 4
            body = data[off : off + length]
            if len(body) != length:
                raise WalFormatError(f"record {index}: truncated body")
            off += length
            rec = record_from_bytes(body, index)
            if rec.sequence <= last_seq:
                raise WalFormatError(
                    f"record {index}: sequence {rec.sequence} out of order after {last_seq}"
                )
            last_seq = rec.sequence
            records.append(rec)
            index += 1
        return cls(records)

    def write(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def read(cls, path) -> "WriteAheadLog":
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())

import struct

import pytest
from hypothesis import given, settings, strategies as st

from topocbt.chain import AssetUpdate, BlockRef
from topocbt.wal import WalFormatError, WalKind, WalRecord, WriteAheadLog


def sample_log():
    wal = WriteAheadLog()
    wal.append(1, WalKind.UNDO, BlockRef(1, 3, 0), (AssetUpdate("alice", "bob", "ETH", 10),))
    wal.append(1, WalKind.UNDO, BlockRef(2, 2, 1), (AssetUpdate("bob", "cindy", "BTC", 1),))
    wal.append(1, WalKind.COMMIT)
    wal.append(2, WalKind.UNDO, BlockRef(3, 1, 0), ())
    wal.append(2, WalKind.ABORT)
    return wal


def test_sequences_increase():
    wal = sample_log()
    assert [r.sequence for r in wal.records] == [1, 2, 3, 4, 5]


def test_terminal_lookup():
    wal = sample_log()
    assert wal.terminal_for(1).kind is WalKind.COMMIT
    assert wal.terminal_for(2).kind is WalKind.ABORT
    assert wal.terminal_for(9) is None


def test_binary_round_trip(tmp_path):
    wal = sample_log()
    path = tmp_path / "log.wal"
    wal.write(path)
    loaded = WriteAheadLog.read(path)
    assert loaded.records == wal.records


def test_undo_snapshot_survives_round_trip():
    wal = sample_log()
    loaded = WriteAheadLog.from_bytes(wal.to_bytes())
    rec = loaded.records[0]
    assert rec.block_ref == BlockRef(1, 3, 0)
    assert rec.updates == (AssetUpdate("alice", "bob", "ETH", 10),)


def test_out_of_order_sequence_rejected():
    good = sample_log().to_bytes()
    # swap the first two records on the wire
    (len0,) = struct.unpack_from(">I", good, 0)
    first = good[: 4 + len0]
    (len1,) = struct.unpack_from(">I", good, 4 + len0)
    second = good[4 + len0 : 8 + len0 + len1]
    rest = good[8 + len0 + len1 :]
    swapped = second + first + rest
    with pytest.raises(WalFormatError, match="record 1: sequence"):
        WriteAheadLog.from_bytes(swapped)


def test_truncated_record_rejected():
    data = sample_log().to_bytes()
    with pytest.raises(WalFormatError, match="truncated"):
        WriteAheadLog.from_bytes(data[:-3])


def test_unknown_kind_rejected():
    rec = WalRecord(1, 1, WalKind.COMMIT)
    raw = bytearray(rec.to_bytes())
    raw[4 + 16] = 7  # kind byte
    with pytest.raises(WalFormatError, match="unknown kind"):
        WriteAheadLog.from_bytes(bytes(raw))


def test_constructor_checks_sequences():
    with pytest.raises(WalFormatError):
        WriteAheadLog([WalRecord(2, 1, WalKind.COMMIT), WalRecord(1, 1, WalKind.ABORT)])


names = st.text(alphabet="abcdefXYZ", min_size=1, max_size=6)


@given(
    st.lists(
        st.tuples(names, names, names, st.integers(1, 10**6),
                  st.integers(1, 9), st.integers(0, 50), st.integers(0, 3)),
        min_size=1, max_size=8,
    )
)
@settings(max_examples=50, deadline=None)
def test_round_trip_random_logs(entries):
    wal = WriteAheadLog()
    for frm, to, asset, amount, chain, height, branch in entries:
        wal.append(1, WalKind.UNDO, BlockRef(chain, height, branch),
                   (AssetUpdate(frm, to, asset, amount),))
    assert WriteAheadLog.from_bytes(wal.to_bytes()).records == wal.records

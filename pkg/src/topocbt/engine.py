"""Multi-party cross-chain transaction engine with undo-log recovery.

One transaction runs as: lock every involved block (fork copies
included), construct the spanning simplex, then per declared
sub-transaction write undo records and append the update blocks.  Any
failure triggers a durable abort record, reverse-order compensation
through the undo log, simplex teardown, and lock release; success ends
with a durable commit record and the same cleanup.  The outcome is
always terminal: committed or aborted, never pending.

Updates are never erased: both application and rollback append blocks,
and the balance digest is what makes compensation exact.

Primitive-operation metering (used by the complexity fit):
    1 per block locked or released
    1 per vertex pair when building or tearing down the simplex
    1 per log record written
    1 per block appended and 1 per asset update it carries
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass
from typing import Optional

from .chain import AssetUpdate, BlockRef, Compensation, Conflict, Federation
from .topology import (
    CrossChainTransaction,
    TopologyMode,
    expand_refs,
    transaction_simplex,
)
from .wal import WalKind, WalRecord, WriteAheadLog

log = logging.getLogger(__name__)

UPDATE_FAILURE = "update_failure"
CRASH_AFTER_UNDO = "crash_after_undo"
CRASH_BEFORE_COMMIT = "crash_before_commit"

FACE_FAILURE_KINDS = (UPDATE_FAILURE, CRASH_AFTER_UNDO, CRASH_BEFORE_COMMIT)


class Status(enum.Enum):
    COMMITTED = "Committed"
    ABORTED = "Aborted"
    PARTIAL_COMMIT = "PartialCommit"
    BLOCKED = "Blocked"
    PENDING = "Pending"

    def __str__(self) -> str:
        return self.value


class SimulatedCrash(RuntimeError):
    """Raised when a failure plan kills the process mid-transaction."""

    def __init__(self, point: str) -> None:
        super().__init__(point)
        self.point = point


@dataclass(frozen=True)
class FailurePlan:
    """Deterministic fault injections for one transaction run.

    face_failures pairs a 1-based sub-transaction index with one of
    update_failure, crash_after_undo, or crash_before_commit (the last
    crashes after that face has applied, before the next record).
    The baseline-only fields are ignored by this engine.
    """

    face_failures: tuple[tuple[int, str], ...] = ()
    crash_after_record: Optional[int] = None
    crash_after_append: Optional[int] = None
    witness_crash: bool = False
    vote_abort_face: Optional[int] = None
    walk_away: Optional[str] = None
    timeout_swap: Optional[int] = None

    def face_failure(self, index: int) -> Optional[str]:
        for idx, kind in self.face_failures:
            if idx == index:
                return kind
        return None


NO_FAILURES = FailurePlan()


@dataclass(frozen=True)
class TxnOutcome:
    status: Status
    applied_updates: int
    messages: int
    primitive_ops: int
    space_bytes: int  # durable bytes left behind once the txn is terminal


@dataclass(frozen=True)
class RecoveryReport:
    rolled_back: tuple[int, ...]       # no terminal record: rolled back + abort appended
    recompleted: tuple[int, ...]       # aborted but with compensation still missing
    committed_untouched: tuple[int, ...]
    locks_cleared: int

    def is_noop(self) -> bool:
        return not self.rolled_back and not self.recompleted and self.locks_cleared == 0


@dataclass(frozen=True)
class ComplexityStats:
    n: int
    m: int
    primitive_ops: int
    bound_coefficient: float


def count_complexity(outcome: TxnOutcome, n: int, m: int) -> ComplexityStats:
    """Relate a measured op count to the n*n + n*m cost model."""
    if n < 1:
        raise ValueError("n must be at least 1")
    denom = n * n + n * m
    return ComplexityStats(n=n, m=m, primitive_ops=outcome.primitive_ops,
                           bound_coefficient=outcome.primitive_ops / denom)


class _Meter:
    __slots__ = ("ops", "messages", "appends", "records")

    def __init__(self) -> None:
        self.ops = 0
        self.messages = 0
        self.appends = 0
        self.records = 0


class TopoCbtEngine:
    """Executes transactions against a federation and recovers from crashes."""

    def __init__(self, federation: Federation, wal: Optional[WriteAheadLog] = None,
                 mode: TopologyMode = TopologyMode.ABSTRACT) -> None:
        self.federation = federation
        self.wal = wal if wal is not None else WriteAheadLog()
        self.mode = mode

    # -- helpers --------------------------------------------------------

    def _write_record(self, meter: _Meter, plan: FailurePlan, txn_id: int, kind: WalKind,
                      block_ref: Optional[BlockRef] = None,
                      updates: tuple[AssetUpdate, ...] = ()) -> WalRecord:
        rec = self.wal.append(txn_id, kind, block_ref, updates)
        meter.ops += 1
        meter.records += 1
        if plan.crash_after_record is not None and meter.records == plan.crash_after_record:
            raise SimulatedCrash(f"after record {meter.records}")
        return rec

    def _append_updates(self, meter: _Meter, plan: FailurePlan, chain_id: int,
                        updates: tuple[AssetUpdate, ...]) -> BlockRef:
        chain = self.federation.chain(chain_id)
        ref = chain.append_block(chain.canonical_branch(), updates)
        meter.ops += 1 + len(updates)
        meter.messages += 1
        meter.appends += 1
        if plan.crash_after_append is not None and meter.appends == plan.crash_after_append:
            raise SimulatedCrash(f"after append {meter.appends}")
        return ref

    def _planned_ref(self, chain_id: int) -> BlockRef:
        chain = self.federation.chain(chain_id)
        branch = chain.canonical_branch()
        return BlockRef(chain_id, chain.branches[branch].tip + 1, branch)

    def _rollback(self, meter: _Meter, undo_records: list[WalRecord]) -> int:
        """Append compensation blocks for logged updates, newest first.

        Reverse order keeps every compensation funded.  An absent block
        means the crash landed before that append; a compensation
        marker means an earlier rollback already reversed it.  Either
        way the record is skipped, which makes rollback idempotent and
        restartable.  Plan hooks never fire here: the named crash
        points all sit in the forward phase.
        """
        compensated = 0
        for rec in reversed(undo_records):
            assert rec.block_ref is not None
            chain = self.federation.chain(rec.block_ref.chain)
            if not chain.has_block(rec.block_ref):
                continue
            if tuple(chain.block(rec.block_ref).payload) != tuple(rec.updates):
                # the planned slot was taken by something else (e.g. a
                # later compensation block); the forward append itself
                # never happened
                continue
            if rec.block_ref in chain.compensated_refs():
                continue
            inverse = tuple(u.inverse() for u in reversed(rec.updates))
            payload = (Compensation(rec.block_ref, rec.txn_id),) + inverse
            branch = chain.canonical_branch()
            chain.append_block(branch, payload)
            meter.ops += 1 + len(inverse)
            meter.messages += 1
            compensated += 1
        return compensated

    @staticmethod
    def _pair_cost(vertex_count: int) -> int:
        return vertex_count * (vertex_count - 1) // 2

    def _updates_by_chain(self, sub) -> list[tuple[int, tuple[AssetUpdate, ...]]]:
        grouped: dict[int, list[AssetUpdate]] = {}
        for upd in sub.updates:
            grouped.setdefault(self.federation.chain_for_asset(upd.asset).id, []).append(upd)
        return [(cid, tuple(grouped[cid])) for cid in sorted(grouped)]

    def _can_fund(self, updates: tuple[AssetUpdate, ...]) -> bool:
        working = self.federation.balances()
        for upd in updates:
            key = (upd.owner_from, upd.asset)
            if working.get(key, 0) < upd.amount:
                return False
            working[key] = working.get(key, 0) - upd.amount
            to_key = (upd.owner_to, upd.asset)
            working[to_key] = working.get(to_key, 0) + upd.amount
        return True

    # -- the protocol ----------------------------------------------------

    def execute(self, txn: CrossChainTransaction, plan: FailurePlan = NO_FAILURES) -> TxnOutcome:
        """Run one transaction to a terminal outcome.

        Raises SimulatedCrash when the plan kills the run; the log and
        any locks survive for recover() to clean up.
        """
        txn.validate(self.federation)
        meter = _Meter()

        refs = expand_refs(self.federation, txn)
        grant = self.federation.lock_blocks(refs, txn.id)
        meter.ops += len(refs)
        meter.messages += len(refs)
        if isinstance(grant, Conflict):
            log.info("txn %s: lock conflict on %s held by %s", txn.id, grant.ref, grant.holder)
            return TxnOutcome(Status.ABORTED, 0, meter.messages, meter.ops, 0)

        sigma = transaction_simplex(self.federation, txn, self.mode)
        meter.ops += self._pair_cost(len(sigma.vertices))

        undo_records: list[WalRecord] = []
        applied = 0
        failed = False
        for index, sub in enumerate(txn.sub_transactions, start=1):
            injected = plan.face_failure(index)
            per_chain = self._updates_by_chain(sub)

            for chain_id, updates in per_chain:
                rec = self._write_record(meter, plan, txn.id, WalKind.UNDO,
                                         self._planned_ref(chain_id), updates)
                undo_records.append(rec)
            if injected == CRASH_AFTER_UNDO:
                raise SimulatedCrash(f"after undo records of face {index}")

            if injected == UPDATE_FAILURE or not self._can_fund(sub.updates):
                failed = True
                break

            for chain_id, updates in per_chain:
                self._append_updates(meter, plan, chain_id, updates)
                applied += len(updates)
            if injected == CRASH_BEFORE_COMMIT:
                raise SimulatedCrash(f"after face {index} applied")

        if failed:
            self._write_record(meter, plan, txn.id, WalKind.ABORT)
            self._rollback(meter, undo_records)
            meter.ops += self._pair_cost(len(sigma.vertices))
            self.federation.release_blocks(refs, txn.id)
            meter.ops += len(refs)
            meter.messages += len(refs)
            return TxnOutcome(Status.ABORTED, 0, meter.messages, meter.ops, 0)

        commit = self._write_record(meter, plan, txn.id, WalKind.COMMIT)
        meter.ops += self._pair_cost(len(sigma.vertices))
        self.federation.release_blocks(refs, txn.id)
        meter.ops += len(refs)
        meter.messages += len(refs)
        return TxnOutcome(Status.COMMITTED, applied, meter.messages, meter.ops,
                          len(commit.to_bytes()))

    # -- restart path ------------------------------------------------------

    def recover(self) -> RecoveryReport:
        """Bring every logged transaction to a clean terminal state.

        Committed transactions are untouched.  Transactions with no
        terminal record are rolled back and get an abort record.
        Aborted transactions are re-checked: the protocol makes the
        abort record durable before compensating, so a crash inside
        that window leaves reversals for recovery to finish (the
        compensation markers make re-running them a no-op).  The
        volatile lock table does not survive a restart and is always
        cleared.  Running recover twice changes nothing.
        """
        meter = _Meter()
        by_txn: dict[int, list[WalRecord]] = {}
        for rec in self.wal.records:
            by_txn.setdefault(rec.txn_id, []).append(rec)

        rolled_back: list[int] = []
        recompleted: list[int] = []
        committed: list[int] = []
        for txn_id in sorted(by_txn):
            records = by_txn[txn_id]
            undos = [r for r in records if r.kind is WalKind.UNDO]
            if any(r.kind is WalKind.COMMIT for r in records):
                committed.append(txn_id)
            elif any(r.kind is WalKind.ABORT for r in records):
                if self._rollback(meter, undos):
                    recompleted.append(txn_id)
            else:
                self._rollback(meter, undos)
                self.wal.append(txn_id, WalKind.ABORT)
                rolled_back.append(txn_id)

        cleared = len(self.federation.locks)
        self.federation.locks.clear()
        return RecoveryReport(tuple(rolled_back), tuple(recompleted), tuple(committed), cleared)


def topocbt_execute(
    federation: Federation,
    txn: CrossChainTransaction,
    plan: FailurePlan = NO_FAILURES,
    wal: Optional[WriteAheadLog] = None,
    mode: TopologyMode = TopologyMode.ABSTRACT,
) -> TxnOutcome:
    """One-shot execution against a federation.

    Hand in a log you keep around if you want to recover after an
    injected crash; see :class:`TopoCbtEngine` for the stateful form.
    """
    return TopoCbtEngine(federation, wal, mode).execute(txn, plan)

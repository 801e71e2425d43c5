"""Reference protocols the main engine is measured against.

AC2S decomposes a deal into timelocked pairwise swaps.  Every swap is
atomic on its own, but there is no global rollback: once a party walks
away or misses a deadline, earlier transfers stand and somebody ends
up worse off (a partial commit).

AC3WN runs two-phase commit with an extra witness blockchain as the
coordinator's decision record.  It is globally atomic, but a
coordinator crash after the prepare phase leaves participants holding
locks with no decision to act on: the run blocks.
"""

from __future__ import annotations

import enum
import logging
import struct
from dataclasses import dataclass
from typing import Optional

from .chain import AssetUpdate, Chain, Conflict, Federation
from .engine import FailurePlan, NO_FAILURES, Status, UPDATE_FAILURE, CRASH_BEFORE_COMMIT
from .topology import CrossChainTransaction, expand_refs

log = logging.getLogger(__name__)

DEFAULT_TIMELOCK = 10        # simulation ticks granted to claim a swap leg
BLOCKING_HORIZON_FACTOR = 10  # locks held past factor * timelock => blocked


class SwapState(enum.Enum):
    OFFERED = "Offered"
    CLAIMED = "Claimed"
    EXPIRED = "Expired"


@dataclass
class SwapStep:
    from_party: str
    to_party: str
    asset: str
    amount: int
    deadline: int
    state: SwapState = SwapState.OFFERED

    def claim(self, now: int) -> bool:
        if self.state is SwapState.EXPIRED:
            return False
        if now > self.deadline:
            self.state = SwapState.EXPIRED
            return False
        self.state = SwapState.CLAIMED
        return True


class SimClock:
    def __init__(self) -> None:
        self.now = 0

    def advance(self, ticks: int = 1) -> int:
        self.now += ticks
        return self.now


@dataclass(frozen=True)
class BaselineOutcome:
    status: Status
    worse_off_parties: tuple[str, ...]
    messages: int
    applied_updates: int
    primitive_ops: int
    space_bytes: int


@dataclass(frozen=True)
class Decision:
    """2PC decision record carried on the witness chain."""

    kind: str  # Prepared | GlobalCommit | GlobalAbort
    txn_id: int

    def to_bytes(self) -> bytes:
        raw = self.kind.encode("ascii")
        return b"D" + struct.pack(">H", len(raw)) + raw + struct.pack(">Q", self.txn_id)


WITNESS_CHAIN_ID = 999


def _pair_count(n: int) -> int:
    return n * (n - 1) // 2


def _swap_legs(txn: CrossChainTransaction) -> Optional[list[tuple[AssetUpdate, AssetUpdate]]]:
    """Rewrite a single-transfer cycle into chained two-leg swaps.

    A cycle P0 -a0-> P1 -a1-> ... -> P0 becomes swaps in which P0 pays
    the asset acquired so far and the counterparty hands over the next
    one, exactly the middle-medium exchange pattern.  Returns None when
    the faces are not such a cycle.
    """
    subs = txn.sub_transactions
    if len(subs) < 2 or any(len(s.updates) != 1 for s in subs):
        return None
    transfers = [s.updates[0] for s in subs]
    for cur, nxt in zip(transfers, transfers[1:]):
        if cur.owner_to != nxt.owner_from:
            return None
    if transfers[-1].owner_to != transfers[0].owner_from:
        return None
    initiator = transfers[0].owner_from
    swaps = []
    for j in range(1, len(transfers)):
        prev, step = transfers[j - 1], transfers[j]
        give = AssetUpdate(initiator, step.owner_from, prev.asset, prev.amount)
        take = AssetUpdate(step.owner_from, initiator, step.asset, step.amount)
        swaps.append((give, take))
    return swaps


def ac2s_execute(
    federation: Federation,
    txn: CrossChainTransaction,
    plan: FailurePlan = NO_FAILURES,
    clock: Optional[SimClock] = None,
    timelock: int = DEFAULT_TIMELOCK,
) -> BaselineOutcome:
    """Run the deal as a sequence of independent timelocked swaps.

    Each sub-transaction must itself be a two-party exchange, or the
    whole face list must be a single-transfer cycle that can be chained
    through the initiator.  Anything else is not decomposable.
    """
    txn.validate(federation)
    clock = clock or SimClock()
    n_blocks = len(expand_refs(federation, txn))

    swaps: list[tuple[tuple[AssetUpdate, ...], int]] = []  # (legs, source face index)
    cycle = _swap_legs(txn)
    initiator = txn.sub_transactions[0].updates[0].owner_from if cycle is not None else None
    if cycle is not None:
        # swap j settles the transfer that face j+1 declared
        swaps = [((give, take), i + 2) for i, (give, take) in enumerate(cycle)]
    else:
        for index, sub in enumerate(txn.sub_transactions, start=1):
            parties = {u.owner_from for u in sub.updates} | {u.owner_to for u in sub.updates}
            if len(parties) > 2:
                raise ValueError(f"txn {txn.id}: face {index} spans {len(parties)} parties, not a pairwise swap")
            swaps.append((tuple(sub.updates), index))

    meter_ops = 0
    messages = 0
    applied = 0
    applied_swaps = 0
    skipped = 0
    worse_off: set[str] = set()

    walk_away = plan.walk_away
    for number, (legs, face_index) in enumerate(swaps, start=1):
        participants = {u.owner_from for u in legs} | {u.owner_to for u in legs}
        if walk_away is not None and walk_away in participants:
            skipped += len(swaps) - number + 1
            if applied_swaps and initiator is not None:
                # stuck with whatever the last completed swap handed over
                worse_off.add(initiator)
            break

        offered_at = clock.now
        expired = False
        for leg_no, leg in enumerate(legs, start=1):
            # with no coordinator, every leg re-verifies the whole
            # deal's blocks pairwise before it settles
            meter_ops += _pair_count(n_blocks)
            step = SwapStep(leg.owner_from, leg.owner_to, leg.asset, leg.amount,
                            deadline=offered_at + timelock)
            messages += 2  # offer + claim
            late = leg_no == len(legs) and (
                plan.timeout_swap == number
                or plan.face_failure(face_index) == UPDATE_FAILURE
            )
            claim_tick = clock.advance(timelock + 1 if late else 1)
            if not step.claim(claim_tick):
                expired = True
                worse_off.update(l.owner_from for l in legs[: leg_no - 1])
                break
            chain = federation.chain_for_asset(leg.asset)
            chain.append_block(chain.canonical_branch(), (leg,))
            meter_ops += 1 + 1
            applied += 1
        if expired:
            skipped += len(swaps) - number
            break
        applied_swaps += 1

    if applied == sum(len(legs) for legs, _ in swaps):
        status = Status.COMMITTED
    elif applied == 0:
        status = Status.ABORTED
    else:
        status = Status.PARTIAL_COMMIT
    return BaselineOutcome(status, tuple(sorted(worse_off)), messages, applied, meter_ops, 0)


def ac3wn_execute(
    federation: Federation,
    txn: CrossChainTransaction,
    plan: FailurePlan = NO_FAILURES,
    clock: Optional[SimClock] = None,
    timelock: int = DEFAULT_TIMELOCK,
    witness: Optional[Chain] = None,
) -> tuple[BaselineOutcome, Chain]:
    """Two-phase commit with the decision sequence on a witness chain.

    Returns the outcome together with the witness chain so callers can
    audit that updates only ever follow a recorded GlobalCommit.
    """
    txn.validate(federation)
    clock = clock or SimClock()
    witness = witness or Chain(WITNESS_CHAIN_ID, replicas=1, assets=())

    refs = expand_refs(federation, txn)
    messages = 0
    meter_ops = len(refs)
    grant = federation.lock_blocks(refs, txn.id)
    messages += len(refs)
    if isinstance(grant, Conflict):
        return (
            BaselineOutcome(Status.ABORTED, (), messages, 0, meter_ops, 0),
            witness,
        )

    # phase 1: one prepare round-trip per participating chain, one
    # witness block per sub-transaction
    votes_ok = True
    chain_ids = sorted({ref.chain for ref in txn.blocks})
    messages += 2 * len(chain_ids)
    meter_ops += 2 * len(chain_ids)
    for index, sub in enumerate(txn.sub_transactions, start=1):
        witness.append_block(0, (Decision("Prepared", txn.id),))
        meter_ops += 1
        vote_abort = plan.vote_abort_face == index or plan.face_failure(index) == UPDATE_FAILURE
        if vote_abort:
            votes_ok = False
    if votes_ok:
        working = federation.balances()
        for sub in txn.sub_transactions:
            for upd in sub.updates:
                key = (upd.owner_from, upd.asset)
                if working.get(key, 0) < upd.amount:
                    votes_ok = False
                    break
                working[key] = working[key] - upd.amount
                working[(upd.owner_to, upd.asset)] = working.get((upd.owner_to, upd.asset), 0) + upd.amount

    # coordinator crash window: prepare done, decision not yet durable
    crashed = plan.witness_crash or any(k == CRASH_BEFORE_COMMIT for _, k in plan.face_failures)
    if crashed:
        horizon = clock.advance(BLOCKING_HORIZON_FACTOR * timelock)
        held = [ref for ref, holder in federation.locks.items() if holder == txn.id]
        log.info("txn %s: no decision by tick %s, %d locks still held", txn.id, horizon, len(held))
        space = _witness_space(witness)
        return BaselineOutcome(Status.BLOCKED, (), messages, 0, meter_ops, space), witness

    if not votes_ok:
        witness.append_block(0, (Decision("GlobalAbort", txn.id),))
        meter_ops += 1
        messages += len(chain_ids)
        federation.release_blocks(refs, txn.id)
        meter_ops += len(refs)
        return BaselineOutcome(Status.ABORTED, (), messages, 0, meter_ops, _witness_space(witness)), witness

    witness.append_block(0, (Decision("GlobalCommit", txn.id),))
    meter_ops += 1
    messages += len(chain_ids)
    applied = 0
    for sub in txn.sub_transactions:
        grouped: dict[int, list[AssetUpdate]] = {}
        for upd in sub.updates:
            grouped.setdefault(federation.chain_for_asset(upd.asset).id, []).append(upd)
        for cid in sorted(grouped):
            chain = federation.chain(cid)
            chain.append_block(chain.canonical_branch(), tuple(grouped[cid]))
            meter_ops += 1 + len(grouped[cid])
            applied += len(grouped[cid])
    federation.release_blocks(refs, txn.id)
    meter_ops += len(refs)
    return BaselineOutcome(Status.COMMITTED, (), messages, applied, meter_ops, _witness_space(witness)), witness


def _witness_space(witness: Chain) -> int:
    total = 0
    for ref in witness.all_refs():
        for record in witness.block(ref).payload:
            total += len(record.to_bytes())
    return total

"""Hash-linked blockchains with forks, plus the federation that holds them.

Blocks are append-only value objects sealed with a sha256 digest over a
canonical byte serialization (fixed field order, big-endian integers).
A chain may carry several live branches at once; the longest-branch
rule retires all but one.  Dead branches keep their blocks for audit
but never enter new topology builds.

Locks are held per logical block (one store per chain regardless of
replica count) in a federation-level table, acquired all-or-nothing in
the canonical (chain, height, branch) order.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field
from typing import Iterable, Optional

GENESIS_PARENT = b"\x00" * 32


def _pack_str(s: str) -> bytes:
    raw = s.encode("utf-8")
    return struct.pack(">H", len(raw)) + raw


@dataclass(frozen=True, order=True)
class BlockRef:
    """Position of a block: chain index, height (0 = genesis), branch label."""

    chain: int
    height: int
    branch: int = 0

    def __str__(self) -> str:
        return f"{self.chain}:{self.height}:{self.branch}"


@dataclass(frozen=True)
class AssetUpdate:
    """One asset transfer carried in a block payload."""

    owner_from: str
    owner_to: str
    asset: str
    amount: int

    def __post_init__(self) -> None:
        if self.amount <= 0:
            raise ValueError("update amount must be positive")

    def inverse(self) -> "AssetUpdate":
        return AssetUpdate(self.owner_to, self.owner_from, self.asset, self.amount)

    def to_bytes(self) -> bytes:
        return (
            b"U"
            + _pack_str(self.owner_from)
            + _pack_str(self.owner_to)
            + _pack_str(self.asset)
            + struct.pack(">Q", self.amount)
        )


@dataclass(frozen=True)
class Compensation:
    """Marker carried by a rollback block: names the block it reverses.

    Makes rollback idempotent: a recovery pass can see that a forward
    block was already compensated and must not be reversed again.
    """

    undone: BlockRef
    txn_id: int

    def to_bytes(self) -> bytes:
        return b"C" + struct.pack(
            ">IIIQ", self.undone.chain, self.undone.height, self.undone.branch, self.txn_id
        )


def compute_block_hash(ref: BlockRef, parent_hash: bytes, payload: tuple) -> bytes:
    h = hashlib.sha256()
    h.update(struct.pack(">III", ref.chain, ref.height, ref.branch))
    h.update(parent_hash)
    h.update(struct.pack(">I", len(payload)))
    for record in payload:
        h.update(record.to_bytes())
    return h.digest()


@dataclass(frozen=True)
class Block:
    """A sealed block. The stored hash is fixed at append time."""

    ref: BlockRef
    parent_ref: Optional[BlockRef]
    parent_hash: bytes
    payload: tuple
    hash: bytes

    @classmethod
    def seal(cls, ref: BlockRef, parent_ref: Optional[BlockRef], parent_hash: bytes, payload: Iterable) -> "Block":
        payload = tuple(payload)
        return cls(ref, parent_ref, parent_hash, payload, compute_block_hash(ref, parent_hash, payload))


@dataclass
class BranchInfo:
    label: int
    spawn_height: int
    parent: Optional[BlockRef]  # fork parent on the trunk; None for branch 0
    live: bool = True
    tip: int = -1  # height of the last appended block; -1 = nothing yet


class ChainError(Exception):
    pass


class Chain:
    """One blockchain: a genesis block plus appended blocks on branches."""

    def __init__(self, chain_id: int, replicas: int = 1, assets: Iterable[str] = ()) -> None:
        if chain_id < 1:
            raise ChainError("chain ids start at 1")
        if replicas < 1:
            raise ChainError("a chain needs at least one replica")
        self.id = chain_id
        self.replicas = replicas
        self.assets = tuple(assets)
        self._blocks: dict[BlockRef, Block] = {}
        self.branches: dict[int, BranchInfo] = {0: BranchInfo(label=0, spawn_height=0, parent=None)}
        genesis = Block.seal(BlockRef(chain_id, 0, 0), None, GENESIS_PARENT, ())
        self._blocks[genesis.ref] = genesis
        self.branches[0].tip = 0

    # -- queries ---------------------------------------------------------

    def block(self, ref: BlockRef) -> Block:
        try:
            return self._blocks[ref]
        except KeyError:
            raise ChainError(f"no block {ref} on chain {self.id}") from None

    def has_block(self, ref: BlockRef) -> bool:
        return ref in self._blocks

    def all_refs(self) -> list[BlockRef]:
        return sorted(self._blocks)

    def tip_ref(self, branch: int) -> BlockRef:
        info = self.branches[branch]
        if info.tip < 0:
            raise ChainError(f"branch {branch} has no blocks yet")
        return BlockRef(self.id, info.tip, branch)

    def live_branch_labels(self) -> list[int]:
        return sorted(b for b, info in self.branches.items() if info.live)

    def canonical_branch(self) -> int:
        """The branch the longest-branch rule would pick right now."""
        live = self.live_branch_labels()
        best = max(self.branches[b].tip for b in live)
        return min(b for b in live if self.branches[b].tip == best)

    def live_refs(self) -> set[BlockRef]:
        """Ancestor closure of every live branch tip.

        Shared trunk prefixes stay live even when their own branch lost
        a resolution; blocks only reachable from dead tips drop out.
        """
        live: set[BlockRef] = set()
        for label in self.live_branch_labels():
            info = self.branches[label]
            if info.tip < 0:
                continue
            ref: Optional[BlockRef] = BlockRef(self.id, info.tip, label)
            while ref is not None and ref not in live:
                block = self._blocks[ref]
                live.add(ref)
                ref = block.parent_ref
        return live

    def live_block_at(self, height: int) -> list[BlockRef]:
        """Live blocks at a height, canonical order."""
        return sorted(r for r in self.live_refs() if r.height == height)

    def compensated_refs(self) -> set[BlockRef]:
        """Blocks already reversed by a live compensation block."""
        out: set[BlockRef] = set()
        for ref in self.live_refs():
            for record in self._blocks[ref].payload:
                if isinstance(record, Compensation):
                    out.add(record.undone)
        return out

    # -- mutation ----------------------------------------------------------

    def append_block(self, branch: int, payload: Iterable = ()) -> BlockRef:
        if branch not in self.branches:
            raise ChainError(f"unknown branch {branch} on chain {self.id}")
        info = self.branches[branch]
        if not info.live:
            raise ChainError(f"branch {branch} on chain {self.id} is dead")
        if info.tip < 0:
            parent_ref = info.parent
            height = info.spawn_height
        else:
            parent_ref = BlockRef(self.id, info.tip, branch)
            height = info.tip + 1
        if parent_ref is None or parent_ref not in self._blocks:
            raise ChainError(f"missing parent at height {height - 1} on chain {self.id}")
        ref = BlockRef(self.id, height, branch)
        block = Block.seal(ref, parent_ref, self._blocks[parent_ref].hash, payload)
        self._blocks[ref] = block
        info.tip = height
        return ref

    def spawn_fork(self, at_height: int) -> int:
        """Open a new branch whose first block will sit at ``at_height``."""
        if at_height < 1:
            raise ChainError("cannot fork at or below genesis")
        parents = self.live_block_at(at_height - 1)
        if not parents:
            raise ChainError(f"no live block at height {at_height - 1} to fork from")
        label = max(self.branches) + 1
        self.branches[label] = BranchInfo(label=label, spawn_height=at_height, parent=parents[0])
        return label

    def resolve_forks(self) -> int:
        """Keep the longest live branch (ties go to the lowest label)."""
        survivor = self.canonical_branch()
        for label, info in self.branches.items():
            if label != survivor and info.live:
                info.live = False
        return survivor

    # -- integrity ---------------------------------------------------------

    def hash_violations(self) -> list[BlockRef]:
        """Refs whose stored hash or parent link fails verification, in order."""
        bad = []
        for ref in self.all_refs():
            block = self._blocks[ref]
            if compute_block_hash(block.ref, block.parent_hash, block.payload) != block.hash:
                bad.append(ref)
                continue
            if block.parent_ref is None:
                if block.parent_hash != GENESIS_PARENT or ref.height != 0:
                    bad.append(ref)
            else:
                parent = self._blocks.get(block.parent_ref)
                if parent is None or parent.hash != block.parent_hash:
                    bad.append(ref)
        return bad

    def verify_hash_chain(self) -> bool:
        return not self.hash_violations()


@dataclass(frozen=True)
class LockGrant:
    refs: tuple[BlockRef, ...]


@dataclass(frozen=True)
class Conflict:
    ref: BlockRef
    holder: int


class Federation:
    """A cluster of chains plus the lock table and party balances."""

    def __init__(self, initial_balances: Optional[dict[tuple[str, str], int]] = None) -> None:
        self.chains: dict[int, Chain] = {}
        self.locks: dict[BlockRef, int] = {}
        self.initial_balances: dict[tuple[str, str], int] = dict(initial_balances or {})
        self.epoch = 0

    def add_chain(self, chain: Chain) -> Chain:
        if chain.id in self.chains:
            raise ChainError(f"duplicate chain id {chain.id}")
        self.chains[chain.id] = chain
        return chain

    def chain(self, chain_id: int) -> Chain:
        try:
            return self.chains[chain_id]
        except KeyError:
            raise ChainError(f"no chain {chain_id}") from None

    def chain_ids(self) -> list[int]:
        return sorted(self.chains)

    def chain_for_asset(self, asset: str) -> Chain:
        for cid in self.chain_ids():
            if asset in self.chains[cid].assets:
                return self.chains[cid]
        raise ChainError(f"no chain manages asset {asset!r}")

    def is_live(self, ref: BlockRef) -> bool:
        return ref.chain in self.chains and ref in self.chains[ref.chain].live_refs()

    # -- locks -------------------------------------------------------------

    def lock_blocks(self, refs: Iterable[BlockRef], txn_id: int):
        """Lock every ref for txn_id, or lock nothing and report the conflict.

        Acquisition always walks the canonical (chain, height, branch)
        order so no two acquisition sequences can cross.
        """
        ordered = sorted(set(refs))
        for ref in ordered:
            holder = self.locks.get(ref)
            if holder is not None and holder != txn_id:
                return Conflict(ref=ref, holder=holder)
        for ref in ordered:
            self.locks[ref] = txn_id
        return LockGrant(refs=tuple(ordered))

    def try_lock_one(self, ref: BlockRef, txn_id: int):
        """Single-block acquisition step, used by interleaved schedulers."""
        holder = self.locks.get(ref)
        if holder is not None and holder != txn_id:
            return Conflict(ref=ref, holder=holder)
        self.locks[ref] = txn_id
        return LockGrant(refs=(ref,))

    def release_blocks(self, refs: Iterable[BlockRef], txn_id: int) -> None:
        ordered = sorted(set(refs))
        for ref in ordered:
            holder = self.locks.get(ref)
            if holder is None:
                continue
            if holder != txn_id:
                raise ChainError(f"lock on {ref} held by txn {holder}, not {txn_id}")
        for ref in ordered:
            self.locks.pop(ref, None)

    def release_all(self, txn_id: int) -> None:
        for ref in [r for r, holder in self.locks.items() if holder == txn_id]:
            del self.locks[ref]

    # -- balances ------------------------------------------------------------

    def balances(self) -> dict[tuple[str, str], int]:
        """Effective (party, asset) balances from live blocks, in append order."""
        totals = dict(self.initial_balances)
        for cid in self.chain_ids():
            chain = self.chains[cid]
            for ref in sorted(chain.live_refs()):
                for record in chain.block(ref).payload:
                    if not isinstance(record, AssetUpdate):
                        continue
                    key_from = (record.owner_from, record.asset)
                    key_to = (record.owner_to, record.asset)
                    totals[key_from] = totals.get(key_from, 0) - record.amount
                    totals[key_to] = totals.get(key_to, 0) + record.amount
        return totals

    def balance(self, party: str, asset: str) -> int:
        return self.balances().get((party, asset), 0)

    def state_digest(self) -> str:
        """Hex digest of the effective balances, the atomicity audit anchor.

        Zero balances are skipped: applying and compensating an update
        leaves the digest exactly where it started.
        """
        h = hashlib.sha256()
        for (party, asset), amount in sorted(self.balances().items()):
            if amount == 0:
                continue
            h.update(_pack_str(party))
            h.update(_pack_str(asset))
            h.update(struct.pack(">q", amount))
        return h.hexdigest()

    def asset_totals(self) -> dict[str, int]:
        totals: dict[str, int] = {}
        for (_, asset), amount in self.balances().items():
            totals[asset] = totals.get(asset, 0) + amount
        return totals

"""Scenario configuration: a line-oriented sectioned text format.

Sections start with a ``[header]`` line and hold ``key = value`` pairs.
``[chain]``, ``[txn]``, and ``[failure]`` sections repeat; ``fork``,
``balance``, and ``sub`` keys repeat within their section.  Blank lines
and ``#`` comments are ignored.  Block positions are written
``chain:height`` or ``chain:height:branch``.

A scenario file plus a seed fully determines a run; the built-in
``car-trading`` scenario is shipped as a fixed text constant so it
replays byte-identically too.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .chain import AssetUpdate, BlockRef, Chain, Federation
from .engine import FACE_FAILURE_KINDS, FailurePlan
from .rng import SplitMix64
from .topology import CrossChainTransaction, SubTransaction, TopologyMode


class ScenarioError(Exception):
    """Parse or schema failure; message carries line and field."""

    def __init__(self, message: str, line: Optional[int] = None, fld: Optional[str] = None) -> None:
        prefix = ""
        if line is not None:
            prefix += f"line {line}: "
        if fld is not None:
            prefix += f"field {fld}: "
        super().__init__(prefix + message)
        self.line = line
        self.field = fld


@dataclass
class ChainSpec:
    id: int
    replicas: int = 1
    length: int = 1
    assets: tuple[str, ...] = ()
    forks: tuple[tuple[int, int], ...] = ()          # (height, branch count)
    balances: tuple[tuple[str, str, int], ...] = ()  # (party, asset, amount)


@dataclass
class TxnSpec:
    id: int
    protocol: str = "topocbt"
    parties: tuple[str, ...] = ()
    blocks: tuple[BlockRef, ...] = ()
    subs: tuple[SubTransaction, ...] = ()


@dataclass
class FailureSpec:
    txn: int
    kind: str
    face: Optional[int] = None
    party: Optional[str] = None
    swap: Optional[int] = None
    record: Optional[int] = None
    append: Optional[int] = None


FAILURE_KINDS = FACE_FAILURE_KINDS + (
    "walk_away",
    "timeout",
    "witness_crash",
    "vote_abort",
    "crash_after_record",
    "crash_after_append",
)

PROTOCOLS = ("topocbt", "ac2s", "ac3wn")


@dataclass
class Scenario:
    name: str = "unnamed"
    mode: TopologyMode = TopologyMode.ABSTRACT
    epoch: int = 0           # resolve forks every N transaction events; 0 = never
    window: Optional[int] = None
    chains: list[ChainSpec] = field(default_factory=list)
    txns: list[TxnSpec] = field(default_factory=list)
    failures: list[FailureSpec] = field(default_factory=list)

    def build_federation(self) -> Federation:
        federation = Federation()
        for spec in sorted(self.chains, key=lambda c: c.id):
            chain = Chain(spec.id, replicas=spec.replicas, assets=spec.assets)
            for _ in range(spec.length):
                chain.append_block(0, ())
            for height, branches in spec.forks:
                for _ in range(branches):
                    label = chain.spawn_fork(height)
                    chain.append_block(label, ())
            federation.add_chain(chain)
            for party, asset, amount in spec.balances:
                key = (party, asset)
                federation.initial_balances[key] = federation.initial_balances.get(key, 0) + amount
        federation.epoch = self.epoch
        return federation

    def transactions(self) -> list[CrossChainTransaction]:
        out = []
        for spec in sorted(self.txns, key=lambda t: t.id):
            out.append(
                CrossChainTransaction(
                    id=spec.id, parties=spec.parties, blocks=spec.blocks, sub_transactions=spec.subs
                )
            )
        return out

    def protocol_for(self, txn_id: int) -> str:
        for spec in self.txns:
            if spec.id == txn_id:
                return spec.protocol
        raise ScenarioError(f"unknown txn {txn_id}")

    def plan_for(self, txn_id: int) -> FailurePlan:
        face_failures: list[tuple[int, str]] = []
        crash_after_record = None
        crash_after_append = None
        witness_crash = False
        vote_abort_face = None
        walk_away = None
        timeout_swap = None
        for f in self.failures:
            if f.txn != txn_id:
                continue
            if f.kind in FACE_FAILURE_KINDS:
                if f.face is None:
                    raise ScenarioError(f"failure kind {f.kind} needs a face", fld="face")
                face_failures.append((f.face, f.kind))
            elif f.kind == "walk_away":
                walk_away = f.party
            elif f.kind == "timeout":
                timeout_swap = f.swap
            elif f.kind == "witness_crash":
                witness_crash = True
            elif f.kind == "vote_abort":
                vote_abort_face = f.face
            elif f.kind == "crash_after_record":
                crash_after_record = f.record
            elif f.kind == "crash_after_append":
                crash_after_append = f.append
        return FailurePlan(
            face_failures=tuple(face_failures),
            crash_after_record=crash_after_record,
            crash_after_append=crash_after_append,
            witness_crash=witness_crash,
            vote_abort_face=vote_abort_face,
            walk_away=walk_away,
            timeout_swap=timeout_swap,
        )


# -- parsing -------------------------------------------------------------


def _parse_int(token: str, line: int, fld: str) -> int:
    try:
        return int(token)
    except ValueError:
        raise ScenarioError(f"expected integer, got {token!r}", line, fld) from None


def _parse_ref(token: str, line: int, fld: str) -> BlockRef:
    parts = token.split(":")
    if len(parts) not in (2, 3):
        raise ScenarioError(f"block position must be chain:height[:branch], got {token!r}", line, fld)
    nums = [_parse_int(p, line, fld) for p in parts]
    return BlockRef(nums[0], nums[1], nums[2] if len(nums) == 3 else 0)


def _parse_sub(value: str, line: int) -> SubTransaction:
    if ";" not in value:
        raise ScenarioError("sub needs 'blocks ; updates'", line, "sub")
    blocks_part, updates_part = value.split(";", 1)
    blocks = tuple(_parse_ref(tok, line, "sub") for tok in blocks_part.split())
    updates = []
    for clause in updates_part.split(","):
        toks = clause.split()
        if len(toks) != 4:
            raise ScenarioError(f"update must be 'from to asset amount', got {clause.strip()!r}", line, "sub")
        updates.append(AssetUpdate(toks[0], toks[1], toks[2], _parse_int(toks[3], line, "sub")))
    if not blocks:
        raise ScenarioError("sub needs at least one block", line, "sub")
    return SubTransaction(blocks=blocks, updates=tuple(updates))


def parse_scenario(text: str) -> Scenario:
    scenario = Scenario()
    section: Optional[str] = None
    current: dict = {}
    section_line = 0

    def flush() -> None:
        nonlocal current
        if section is None:
            return
        if section == "scenario":
            scenario.name = current.get("name", scenario.name)
            mode = current.get("mode", "abstract")
            try:
                scenario.mode = TopologyMode(mode)
            except ValueError:
                raise ScenarioError(f"unknown mode {mode!r}", section_line, "mode") from None
            scenario.epoch = current.get("epoch", 0)
            window = current.get("window", 0)
            scenario.window = None if window == 0 else window
        elif section == "chain":
            if "id" not in current:
                raise ScenarioError("chain needs an id", section_line, "id")
            scenario.chains.append(
                ChainSpec(
                    id=current["id"],
                    replicas=current.get("replicas", 1),
                    length=current.get("length", 1),
                    assets=tuple(current.get("assets", ())),
                    forks=tuple(current.get("fork", ())),
                    balances=tuple(current.get("balance", ())),
                )
            )
        elif section == "txn":
            if "id" not in current:
                raise ScenarioError("txn needs an id", section_line, "id")
            protocol = current.get("protocol", "topocbt")
            if protocol not in PROTOCOLS:
                raise ScenarioError(f"unknown protocol {protocol!r}", section_line, "protocol")
            scenario.txns.append(
                TxnSpec(
                    id=current["id"],
                    protocol=protocol,
                    parties=tuple(current.get("parties", ())),
                    blocks=tuple(current.get("blocks", ())),
                    subs=tuple(current.get("sub", ())),
                )
            )
        elif section == "failure":
            if "txn" not in current:
                raise ScenarioError("failure needs a txn", section_line, "txn")
            kind = current.get("kind")
            if kind not in FAILURE_KINDS:
                raise ScenarioError(f"unknown failure kind {kind!r}", section_line, "kind")
            scenario.failures.append(
                FailureSpec(
                    txn=current["txn"],
                    kind=kind,
                    face=current.get("face"),
                    party=current.get("party"),
                    swap=current.get("swap"),
                    record=current.get("record"),
                    append=current.get("append"),
                )
            )
        current = {}

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            flush()
            section = line[1:-1].strip().lower()
            section_line = lineno
            if section not in ("scenario", "chain", "txn", "failure"):
                raise ScenarioError(f"unknown section [{section}]", lineno, None)
            continue
        if section is None:
            raise ScenarioError("content before any [section] header", lineno, None)
        if "=" not in line:
            raise ScenarioError("expected key = value", lineno, None)
        key, _, value = line.partition("=")
        key = key.strip().lower()
        value = value.strip()

        if key in ("id", "replicas", "length", "epoch", "window", "txn", "face", "swap", "record", "append"):
            current[key] = _parse_int(value, lineno, key)
        elif key in ("name", "mode", "protocol", "kind", "party"):
            current[key] = value
        elif key == "assets":
            current["assets"] = tuple(value.split())
        elif key == "parties":
            current["parties"] = tuple(value.split())
        elif key == "blocks":
            current["blocks"] = tuple(_parse_ref(tok, lineno, "blocks") for tok in value.split())
        elif key == "fork":
            toks = value.split()
            if len(toks) != 2:
                raise ScenarioError("fork needs 'height branches'", lineno, "fork")
            current.setdefault("fork", []).append(
                (_parse_int(toks[0], lineno, "fork"), _parse_int(toks[1], lineno, "fork"))
            )
        elif key == "balance":
            toks = value.split()
            if len(toks) != 3:
                raise ScenarioError("balance needs 'party asset amount'", lineno, "balance")
            current.setdefault("balance", []).append((toks[0], toks[1], _parse_int(toks[2], lineno, "balance")))
        elif key == "sub":
            current.setdefault("sub", []).append(_parse_sub(value, lineno))
        else:
            raise ScenarioError(f"unknown key {key!r}", lineno, key)
    flush()
    return scenario


CAR_TRADING_TEXT = """\
# Three parties trade across three chains in one atomic deal:
# alice pays bob in ETH, bob pays cindy in BTC, cindy signs the
# car title over to alice.
[scenario]
name = car-trading
mode = abstract

[chain]
id = 1
length = 2
assets = ETH
balance = alice ETH 10

[chain]
id = 2
length = 2
assets = BTC
balance = bob BTC 1

[chain]
id = 3
length = 2
assets = CAR
balance = cindy CAR 1

[txn]
id = 1
protocol = topocbt
parties = alice bob cindy
blocks = 1:2 2:2 3:2
sub = 1:2 ; alice bob ETH 10
sub = 2:2 ; bob cindy BTC 1
sub = 3:2 ; cindy alice CAR 1
"""


def car_trading() -> Scenario:
    return parse_scenario(CAR_TRADING_TEXT)


def load_scenario(source: str) -> tuple[Scenario, bytes]:
    """Load a scenario by file path or built-in name.

    Returns the scenario and the exact bytes it was parsed from, which
    is what replay determinism is keyed on.
    """
    if source == "car-trading":
        raw = CAR_TRADING_TEXT.encode()
        return parse_scenario(CAR_TRADING_TEXT), raw
    path = Path(source)
    if not path.exists():
        raise ScenarioError(f"no scenario file {source!r} and no built-in of that name")
    raw = path.read_bytes()
    return parse_scenario(raw.decode("utf-8")), raw


# -- programmatic generators ------------------------------------------------


def grid_scenario(n: int, m: int, protocol: str = "topocbt") -> Scenario:
    """A synthetic (n blocks, m sub-transactions) point for complexity fits.

    The main-engine variant gives every face one update per chain so a
    face touches all n blocks; the pairwise variant makes each face a
    two-party exchange so it decomposes into swaps.
    """
    if n < 2:
        raise ScenarioError("grid needs at least 2 chains")
    if m < 0:
        raise ScenarioError("grid needs m >= 0")
    chains = []
    for i in range(1, n + 1):
        chains.append(
            ChainSpec(
                id=i,
                length=1,
                assets=(f"A{i}",),
                balances=((f"p{i}", f"A{i}", 100 + m),),
            )
        )
    parties = tuple(f"p{i}" for i in range(1, n + 1))
    blocks = tuple(BlockRef(i, 1, 0) for i in range(1, n + 1))
    subs = []
    if protocol == "ac2s":
        for k in range(m):
            a = k % n + 1
            b = (k + 1) % n + 1
            subs.append(
                SubTransaction(
                    blocks=(BlockRef(a, 1, 0), BlockRef(b, 1, 0)),
                    updates=(
                        AssetUpdate(f"p{a}", f"p{b}", f"A{a}", 1),
                        AssetUpdate(f"p{b}", f"p{a}", f"A{b}", 1),
                    ),
                )
            )
    else:
        for _ in range(m):
            subs.append(
                SubTransaction(
                    blocks=blocks,
                    updates=tuple(
                        AssetUpdate(f"p{i}", f"p{i % n + 1}", f"A{i}", 1) for i in range(1, n + 1)
                    ),
                )
            )
    txn = TxnSpec(id=1, protocol=protocol, parties=parties, blocks=blocks, subs=tuple(subs))
    return Scenario(name=f"grid-n{n}-m{m}", chains=chains, txns=[txn])


def random_scenario(seed: int, protocol: str = "topocbt", with_failures: bool = True) -> Scenario:
    """Small randomized federation + one transaction + one failure plan.

    Fully determined by the seed (SplitMix64 throughout).
    """
    rng = SplitMix64(seed)
    n_chains = rng.randrange(2, 4)
    chains = []
    for i in range(1, n_chains + 1):
        length = rng.randrange(1, 3)
        forks: list[tuple[int, int]] = []
        if rng.below(3) == 0:
            forks.append((rng.randrange(1, length), 1))
        chains.append(
            ChainSpec(
                id=i,
                replicas=rng.randrange(1, 3),
                length=length,
                assets=(f"A{i}",),
                forks=tuple(forks),
                balances=((f"p{i}", f"A{i}", rng.randrange(10, 20)),),
            )
        )
    n_txn_chains = rng.randrange(2, n_chains)
    pool = list(range(1, n_chains + 1))
    rng.shuffle(pool)
    txn_chain_ids = sorted(pool[:n_txn_chains])

    blocks = tuple(BlockRef(cid, chains[cid - 1].length, 0) for cid in txn_chain_ids)
    parties = tuple(f"p{cid}" for cid in txn_chain_ids)
    n_faces = rng.randrange(1, 3)
    subs = []
    for _ in range(n_faces):
        face_chain_count = rng.randrange(1, len(txn_chain_ids))
        face_pool = list(txn_chain_ids)
        rng.shuffle(face_pool)
        face_chains = sorted(face_pool[:face_chain_count])
        updates = []
        for cid in face_chains:
            others = [p for p in parties if p != f"p{cid}"]
            to = others[rng.below(len(others))]
            # occasionally ask for more than the party holds to trigger
            # a genuine update failure
            amount = rng.randrange(1, 30) if rng.below(6) == 0 else rng.randrange(1, 3)
            updates.append(AssetUpdate(f"p{cid}", to, f"A{cid}", amount))
        subs.append(SubTransaction(blocks=tuple(BlockRef(c, chains[c - 1].length, 0) for c in face_chains),
                                   updates=tuple(updates)))
    txn = TxnSpec(id=1, protocol=protocol, parties=parties, blocks=blocks, subs=tuple(subs))

    failures: list[FailureSpec] = []
    if with_failures:
        roll = rng.below(6)
        if roll == 1:
            failures.append(FailureSpec(txn=1, kind="update_failure", face=rng.randrange(1, n_faces)))
        elif roll == 2:
            failures.append(FailureSpec(txn=1, kind="crash_after_undo", face=rng.randrange(1, n_faces)))
        elif roll == 3:
            failures.append(FailureSpec(txn=1, kind="crash_before_commit", face=rng.randrange(1, n_faces)))
        elif roll == 4:
            failures.append(FailureSpec(txn=1, kind="crash_after_record", record=rng.randrange(1, 2 * n_faces)))
        elif roll == 5:
            failures.append(FailureSpec(txn=1, kind="crash_after_append", append=rng.randrange(1, 2 * n_faces)))

    return Scenario(
        name=f"random-{seed}",
        chains=chains,
        txns=[txn],
        failures=failures,
    )

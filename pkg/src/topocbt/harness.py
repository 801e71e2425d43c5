"""Deterministic scenario runner, independent atomicity audit, reports.

A run is a pure function of (scenario bytes, seed): transactions
execute in id order against a freshly built federation, crashes go
through recovery, and the report serializes to CSV with a trailing
state-digest line.  Nothing time-dependent enters the output.

The atomicity verdict never trusts a protocol's own status: an auditor
diffs the balance sheet against the two digests a correct transaction
may produce (everything applied, or nothing).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from .baselines import SimClock, ac2s_execute, ac3wn_execute
from .engine import SimulatedCrash, Status, TopoCbtEngine
from .scenario import Scenario, grid_scenario
from .topology import CrossChainTransaction, build_federation_complex
from .wal import WriteAheadLog

log = logging.getLogger(__name__)

AUDIT_ALL = "all"
AUDIT_NONE = "none"
AUDIT_PARTIAL = "partial"

RUN_CSV_COLUMNS = (
    "scenario", "seed", "protocol", "txn", "status", "applied_updates",
    "messages", "primitive_ops", "space_bytes", "worse_off", "audit",
    "atomicity", "betti_pre", "betti_post",
)

COMPARE_CSV_COLUMNS = (
    "protocol", "scenario", "seed", "status", "messages", "primitive_ops",
    "space_bytes", "worse_off",
)


def _normalize(balances: dict) -> dict:
    return {k: v for k, v in balances.items() if v != 0}


def apply_updates_pure(balances: dict, txn: CrossChainTransaction) -> dict:
    """What the balance sheet looks like if every declared update lands.

    Pure dictionary arithmetic, shared with no engine code path.
    """
    out = dict(balances)
    for sub in txn.sub_transactions:
        for upd in sub.updates:
            out[(upd.owner_from, upd.asset)] = out.get((upd.owner_from, upd.asset), 0) - upd.amount
            out[(upd.owner_to, upd.asset)] = out.get((upd.owner_to, upd.asset), 0) + upd.amount
    return out


def audit_atomicity(pre_balances: dict, txn: CrossChainTransaction, post_balances: dict) -> str:
    """Classify the observed state: all updates in, none in, or neither."""
    post = _normalize(post_balances)
    if post == _normalize(pre_balances):
        return AUDIT_NONE
    if post == _normalize(apply_updates_pure(pre_balances, txn)):
        return AUDIT_ALL
    return AUDIT_PARTIAL


@dataclass(frozen=True)
class TxnRow:
    scenario: str
    seed: int
    protocol: str
    txn_id: int
    status: Status
    applied_updates: int
    messages: int
    primitive_ops: int
    space_bytes: int
    worse_off: tuple[str, ...]
    audit: str
    betti_pre: tuple[int, ...]
    betti_post: tuple[int, ...]
    recovered: bool = False

    @property
    def atomicity_ok(self) -> bool:
        return self.audit != AUDIT_PARTIAL

    def csv_cells(self) -> list[str]:
        return [
            self.scenario, str(self.seed), self.protocol, str(self.txn_id),
            str(self.status), str(self.applied_updates), str(self.messages),
            str(self.primitive_ops), str(self.space_bytes),
            ";".join(self.worse_off),
            self.audit, "ok" if self.atomicity_ok else "violated",
            "|".join(map(str, self.betti_pre)), "|".join(map(str, self.betti_post)),
        ]


@dataclass
class RunReport:
    scenario_name: str
    seed: int
    rows: list[TxnRow]
    final_digest: str
    wal: WriteAheadLog

    def to_csv(self) -> str:
        lines = [",".join(RUN_CSV_COLUMNS)]
        lines.extend(",".join(row.csv_cells()) for row in self.rows)
        lines.append(f"# digest: {self.final_digest}")
        return "\n".join(lines) + "\n"

    def invariant_failures(self) -> list[str]:
        """Checks whose failure makes the run exit nonzero.

        The pairwise-swap baseline is allowed to violate atomicity;
        the main engine is not.
        """
        problems = []
        for row in self.rows:
            if row.protocol == "topocbt" and not row.atomicity_ok:
                problems.append(f"txn {row.txn_id}: atomicity violated under topocbt")
            if row.protocol == "topocbt" and row.status not in (Status.COMMITTED, Status.ABORTED):
                problems.append(f"txn {row.txn_id}: non-terminal status {row.status}")
        return problems


def run_scenario(
    scenario: Scenario,
    seed: int,
    protocol_override: Optional[str] = None,
    compute_betti: bool = True,
) -> RunReport:
    """Execute every transaction of the scenario in id order."""
    federation = scenario.build_federation()
    transactions = scenario.transactions()
    wal = WriteAheadLog()
    engine = TopoCbtEngine(federation, wal, mode=scenario.mode)
    clock = SimClock()

    rows: list[TxnRow] = []
    pending = list(transactions)
    for event, txn in enumerate(transactions, start=1):
        protocol = protocol_override or scenario.protocol_for(txn.id)
        plan = scenario.plan_for(txn.id)
        pre_balances = federation.balances()

        betti_pre: tuple[int, ...] = ()
        if compute_betti:
            betti_pre = build_federation_complex(
                federation, pending, mode=scenario.mode, window=scenario.window
            ).betti_numbers()

        recovered = False
        worse_off: tuple[str, ...] = ()
        space = 0
        if protocol == "topocbt":
            try:
                outcome = engine.execute(txn, plan)
                status, applied = outcome.status, outcome.applied_updates
                messages, ops, space = outcome.messages, outcome.primitive_ops, outcome.space_bytes
            except SimulatedCrash as crash:
                log.info("txn %s crashed (%s); running recovery", txn.id, crash.point)
                engine.recover()
                recovered = True
                status, applied, messages, ops = Status.ABORTED, 0, 0, 0
        elif protocol == "ac2s":
            outcome = ac2s_execute(federation, txn, plan, clock)
            status, applied = outcome.status, outcome.applied_updates
            messages, ops, space = outcome.messages, outcome.primitive_ops, outcome.space_bytes
            worse_off = outcome.worse_off_parties
        elif protocol == "ac3wn":
            outcome, witness = ac3wn_execute(federation, txn, plan, clock)
            status, applied = outcome.status, outcome.applied_updates
            messages, ops, space = outcome.messages, outcome.primitive_ops, outcome.space_bytes
            if status is Status.BLOCKED:
                # a blocked participant set cannot proceed; clear for the
                # next event so the report stays well-defined
                federation.release_all(txn.id)
        else:
            raise ValueError(f"unknown protocol {protocol!r}")

        pending = [t for t in pending if t.id != txn.id]
        audit = audit_atomicity(pre_balances, txn, federation.balances())

        betti_post: tuple[int, ...] = ()
        if compute_betti:
            betti_post = build_federation_complex(
                federation, pending, mode=scenario.mode, window=scenario.window
            ).betti_numbers()

        rows.append(
            TxnRow(
                scenario=scenario.name, seed=seed, protocol=protocol, txn_id=txn.id,
                status=status, applied_updates=applied, messages=messages,
                primitive_ops=ops, space_bytes=space, worse_off=worse_off,
                audit=audit, betti_pre=betti_pre, betti_post=betti_post,
                recovered=recovered,
            )
        )

        if scenario.epoch > 0 and event % scenario.epoch == 0:
            for cid in federation.chain_ids():
                federation.chain(cid).resolve_forks()

    return RunReport(scenario.name, seed, rows, federation.state_digest(), wal)


def betti_report(scenario: Scenario, at_event: int):
    """Betti vector and tagged complex after ``at_event`` transactions ran.

    Event 0 is the initial federation with every declared transaction
    still in flight.
    """
    transactions = scenario.transactions()
    if at_event < 0 or at_event > len(transactions):
        raise ValueError(f"event index {at_event} out of range 0..{len(transactions)}")
    federation = scenario.build_federation()
    wal = WriteAheadLog()
    engine = TopoCbtEngine(federation, wal, mode=scenario.mode)
    clock = SimClock()
    for txn in transactions[:at_event]:
        protocol = scenario.protocol_for(txn.id)
        plan = scenario.plan_for(txn.id)
        if protocol == "topocbt":
            try:
                engine.execute(txn, plan)
            except SimulatedCrash:
                engine.recover()
        elif protocol == "ac2s":
            ac2s_execute(federation, txn, plan, clock)
        else:
            ac3wn_execute(federation, txn, plan, clock)
    pending = transactions[at_event:]
    tagged = build_federation_complex(federation, pending, mode=scenario.mode, window=scenario.window)
    return tagged.betti_numbers(), tagged


# -- protocol comparison -----------------------------------------------------


@dataclass
class ComparisonTable:
    rows: list[TxnRow]

    def to_csv(self) -> str:
        lines = [",".join(COMPARE_CSV_COLUMNS)]
        for row in self.rows:
            lines.append(
                ",".join(
                    [
                        row.protocol, row.scenario, str(row.seed), str(row.status),
                        str(row.messages), str(row.primitive_ops), str(row.space_bytes),
                        ";".join(row.worse_off),
                    ]
                )
            )
        return "\n".join(lines) + "\n"

    def count(self, protocol: str, status: Status) -> int:
        return sum(1 for r in self.rows if r.protocol == protocol and r.status is status)

    def pattern(self) -> dict[str, dict[str, bool]]:
        """The qualitative capability grid: per protocol, whether any run
        partially committed and whether any run blocked."""
        out: dict[str, dict[str, bool]] = {}
        for protocol in sorted({r.protocol for r in self.rows}):
            out[protocol] = {
                "partial_commit": self.count(protocol, Status.PARTIAL_COMMIT) > 0,
                "blocked": self.count(protocol, Status.BLOCKED) > 0,
            }
        return out


def compare_protocols(
    scenarios: Iterable[Scenario],
    seeds: Iterable[int],
    protocols: tuple[str, ...] = ("topocbt", "ac2s", "ac3wn"),
) -> ComparisonTable:
    """Run every scenario under every protocol and collect the rows."""
    rows: list[TxnRow] = []
    for scenario in scenarios:
        for seed in seeds:
            for protocol in protocols:
                report = run_scenario(scenario, seed, protocol_override=protocol, compute_betti=False)
                rows.extend(report.rows)
    return ComparisonTable(rows)


# -- complexity fit -----------------------------------------------------------


@dataclass(frozen=True)
class FitResult:
    basis: tuple[str, ...]
    coefficients: tuple[float, ...]
    residual_ratio: float

    @property
    def nonnegative(self) -> bool:
        return all(c >= -1e-9 for c in self.coefficients)


def fit_ops(points: list[tuple[int, int, int]], basis: str) -> FitResult:
    """Least-squares fit of measured op counts.

    basis "n2_nm_1" fits a*n^2 + b*n*m + c; basis "mn2_1" fits
    a*m*n^2 + c.
    """
    if len(points) < 6:
        raise ValueError(f"need at least 6 grid points, got {len(points)}")
    y = np.array([ops for _, _, ops in points], dtype=float)
    if basis == "n2_nm_1":
        names = ("n^2", "n*m", "1")
        design = np.array([[n * n, n * m, 1.0] for n, m, _ in points])
    elif basis == "mn2_1":
        names = ("m*n^2", "1")
        design = np.array([[m * n * n, 1.0] for n, m, _ in points])
    else:
        raise ValueError(f"unknown basis {basis!r}")
    coeffs, _, _, _ = np.linalg.lstsq(design, y, rcond=None)
    residual = design @ coeffs - y
    ratio = float(np.linalg.norm(residual) / np.linalg.norm(y))
    return FitResult(basis=names, coefficients=tuple(float(c) for c in coeffs), residual_ratio=ratio)


def measure_grid(
    protocol: str,
    ns: Iterable[int] = range(2, 7),
    ms: Iterable[int] = range(1, 5),
    seed: int = 1,
) -> list[tuple[int, int, int]]:
    """Failure-free op counts over the (n, m) grid."""
    points = []
    for n in ns:
        for m in ms:
            scenario = grid_scenario(n, m, protocol=protocol)
            report = run_scenario(scenario, seed, compute_betti=False)
            row = report.rows[0]
            if row.status is not Status.COMMITTED:
                raise RuntimeError(f"grid point n={n} m={m} did not commit: {row.status}")
            points.append((n, m, row.primitive_ops))
    return points


@dataclass(frozen=True)
class FitVerdict:
    main_fit: FitResult
    passed: bool
    n2_dominates_at_m1: bool


def complexity_fit(points: list[tuple[int, int, int]], tolerance: float = 0.15) -> FitVerdict:
    """PASS when the quadratic-plus-cross-term model explains the counts.

    Also checks that with a single sub-transaction the quadratic term
    carries the cost (the cross term degenerates).
    """
    fit = fit_ops(points, "n2_nm_1")
    a, b, _ = fit.coefficients
    n_max = max(n for n, _, _ in points)
    dominates = a * n_max * n_max > b * n_max
    return FitVerdict(
        main_fit=fit,
        passed=fit.residual_ratio < tolerance and fit.nonnegative,
        n2_dominates_at_m1=dominates,
    )

import pytest

from topocbt.baselines import (
    Decision,
    SimClock,
    SwapState,
    SwapStep,
    ac2s_execute,
    ac3wn_execute,
)
from topocbt.chain import AssetUpdate, BlockRef
from topocbt.engine import FailurePlan, Status, UPDATE_FAILURE, CRASH_BEFORE_COMMIT
from topocbt.scenario import car_trading, grid_scenario
from topocbt.topology import CrossChainTransaction, SubTransaction


def car_setup():
    scen = car_trading()
    fed = scen.build_federation()
    return fed, scen.transactions()[0]


def holdings(fed, party):
    return {asset: v for (p, asset), v in fed.balances().items() if p == party and v}


# -- swap steps ------------------------------------------------------------------

def test_swap_step_claim_before_deadline():
    step = SwapStep("a", "b", "X", 1, deadline=10)
    assert step.claim(now=10)
    assert step.state is SwapState.CLAIMED


def test_swap_step_expires_after_deadline():
    step = SwapStep("a", "b", "X", 1, deadline=10)
    assert not step.claim(now=11)
    assert step.state is SwapState.EXPIRED
    # expired is final
    assert not step.claim(now=5)


# -- pairwise-swap protocol ---------------------------------------------------------

def test_clean_run_commits_same_final_balances_as_main_engine():
    fed, txn = car_setup()
    out = ac2s_execute(fed, txn)
    assert out.status is Status.COMMITTED
    assert holdings(fed, "alice") == {"CAR": 1}
    assert holdings(fed, "bob") == {"ETH": 10}
    assert holdings(fed, "cindy") == {"BTC": 1}


def test_walk_away_leaves_initiator_holding_middle_asset():
    fed, txn = car_setup()
    out = ac2s_execute(fed, txn, FailurePlan(walk_away="cindy"))
    assert out.status is Status.PARTIAL_COMMIT
    assert out.worse_off_parties == ("alice",)
    # the first exchange went through, so alice is stuck with coins
    # she never wanted and the car never moved
    assert holdings(fed, "alice") == {"BTC": 1}
    assert holdings(fed, "cindy") == {"CAR": 1}


def test_walk_away_before_anything_applied_aborts_clean():
    fed, txn = car_setup()
    out = ac2s_execute(fed, txn, FailurePlan(walk_away="bob"))
    assert out.status is Status.ABORTED
    assert out.worse_off_parties == ()
    assert holdings(fed, "alice") == {"ETH": 10}


def test_missed_timelock_keeps_earlier_leg():
    fed, txn = car_setup()
    out = ac2s_execute(fed, txn, FailurePlan(timeout_swap=2))
    assert out.status is Status.PARTIAL_COMMIT
    # swap 2's first leg (alice pays coins forward) stands, the
    # counter-leg expired: alice paid and cannot be repaid
    assert "alice" in out.worse_off_parties
    assert holdings(fed, "cindy") == {"CAR": 1, "BTC": 1}


def test_update_failure_maps_to_late_claim():
    fed, txn = car_setup()
    out = ac2s_execute(fed, txn, FailurePlan(face_failures=((3, UPDATE_FAILURE),)))
    assert out.status is Status.PARTIAL_COMMIT


def test_never_blocks():
    for plan in (FailurePlan(), FailurePlan(walk_away="cindy"), FailurePlan(timeout_swap=1),
                 FailurePlan(witness_crash=True)):
        fed, txn = car_setup()
        out = ac2s_execute(fed, txn, plan)
        assert out.status is not Status.BLOCKED
        assert out.status is not Status.PENDING


def test_pairwise_faces_run_as_independent_swaps():
    scen = grid_scenario(3, 2, protocol="ac2s")
    fed = scen.build_federation()
    out = ac2s_execute(fed, scen.transactions()[0])
    assert out.status is Status.COMMITTED
    assert out.applied_updates == 4  # two swaps, two legs each


def test_three_party_face_not_decomposable():
    scen = grid_scenario(3, 1)  # main-engine grid faces touch all chains
    fed = scen.build_federation()
    with pytest.raises(ValueError, match="not a pairwise swap"):
        ac2s_execute(fed, scen.transactions()[0])


# -- witness-chain two-phase commit ----------------------------------------------------

def test_clean_run_commits_with_decision_on_witness():
    fed, txn = car_setup()
    out, witness = ac3wn_execute(fed, txn)
    assert out.status is Status.COMMITTED
    kinds = [rec.kind for ref in witness.all_refs() for rec in witness.block(ref).payload]
    assert kinds == ["Prepared", "Prepared", "Prepared", "GlobalCommit"]
    assert holdings(fed, "alice") == {"CAR": 1}
    assert fed.locks == {}


def test_witness_chain_is_hash_verifiable():
    fed, txn = car_setup()
    _, witness = ac3wn_execute(fed, txn)
    assert witness.verify_hash_chain()


def test_witness_crash_blocks_with_locks_held():
    fed, txn = car_setup()
    out, witness = ac3wn_execute(fed, txn, FailurePlan(witness_crash=True))
    assert out.status is Status.BLOCKED
    assert len(fed.locks) == 3  # participants still waiting on a decision
    kinds = [rec.kind for ref in witness.all_refs() for rec in witness.block(ref).payload]
    assert "GlobalCommit" not in kinds and "GlobalAbort" not in kinds
    assert out.applied_updates == 0


def test_coordinator_crash_plan_also_blocks():
    fed, txn = car_setup()
    out, _ = ac3wn_execute(fed, txn, FailurePlan(face_failures=((2, CRASH_BEFORE_COMMIT),)))
    assert out.status is Status.BLOCKED


def test_vote_abort_records_global_abort():
    fed, txn = car_setup()
    pre = fed.state_digest()
    out, witness = ac3wn_execute(fed, txn, FailurePlan(vote_abort_face=2))
    assert out.status is Status.ABORTED
    assert out.applied_updates == 0
    assert fed.state_digest() == pre
    kinds = [rec.kind for ref in witness.all_refs() for rec in witness.block(ref).payload]
    assert kinds[-1] == "GlobalAbort"
    assert fed.locks == {}


def test_updates_only_after_global_commit():
    # audit: every applied update is covered by a GlobalCommit record
    for plan in (FailurePlan(), FailurePlan(vote_abort_face=1), FailurePlan(witness_crash=True)):
        fed, txn = car_setup()
        pre = fed.state_digest()
        out, witness = ac3wn_execute(fed, txn, plan)
        kinds = {rec.kind for ref in witness.all_refs() for rec in witness.block(ref).payload}
        if fed.state_digest() != pre:
            assert "GlobalCommit" in kinds
        if "GlobalCommit" not in kinds:
            assert fed.state_digest() == pre
        fed.release_all(txn.id)


def test_witness_space_grows_with_faces():
    spaces = []
    for m in (1, 2, 3, 4):
        scen = grid_scenario(3, m, protocol="ac2s")
        fed = scen.build_federation()
        out, _ = ac3wn_execute(fed, scen.transactions()[0])
        spaces.append(out.space_bytes)
    assert spaces == sorted(spaces)
    assert spaces[0] < spaces[-1]
    deltas = {b - a for a, b in zip(spaces, spaces[1:])}
    assert len(deltas) == 1  # exactly linear


def test_decision_record_serialization():
    d = Decision("GlobalCommit", 42)
    raw = d.to_bytes()
    assert raw.startswith(b"D")
    assert raw.endswith((42).to_bytes(8, "big"))

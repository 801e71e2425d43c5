import pytest

from topocbt.chain import BlockRef, Chain, ChainError, Federation
from topocbt.rng import SplitMix64
from topocbt.simplicial import Simplex
from topocbt.topology import (
    CrossChainTransaction,
    SubTransaction,
    TaggedComplex,
    TopologyMode,
    build_federation_complex,
    expand_refs,
    expected_transaction_dimension,
    tagged_to_text,
    teardown_transaction,
    transaction_simplex,
)


def federation_of(lengths, replicas=None):
    fed = Federation()
    for i, length in enumerate(lengths, start=1):
        ch = Chain(i, replicas=(replicas or {}).get(i, 1))
        for _ in range(length):
            ch.append_block(0, ())
        fed.add_chain(ch)
    return fed


def txn(tid, refs, parties=("a", "b")):
    return CrossChainTransaction(tid, parties, tuple(BlockRef(*r) for r in refs), ())


def three_chain_two_txn():
    """Three straight chains with one 2-party and one 3-party deal."""
    fed = federation_of([4, 3, 2])
    t1 = txn(1, [(1, 2, 0), (2, 2, 0)])
    t2 = txn(2, [(1, 4, 0), (2, 3, 0), (3, 2, 0)], parties=("a", "b", "c"))
    return fed, t1, t2


def double_fork_pair():
    """Two chains, each forked at height 2, one deal at that height."""
    fed = Federation()
    for cid in (1, 2):
        ch = Chain(cid)
        for _ in range(3):
            ch.append_block(0, ())
        label = ch.spawn_fork(2)
        ch.append_block(label, ())
        fed.add_chain(ch)
    deal = txn(9, [(1, 2, 0), (2, 2, 0)])
    return fed, deal


# -- whole-federation builds ---------------------------------------------------

def test_single_chain_is_contractible_path():
    tagged = build_federation_complex(federation_of([5]))
    assert tagged.betti_numbers() == (1, 0)
    assert tagged.complex.is_valid()


def test_disjoint_chains_count_components():
    tagged = build_federation_complex(federation_of([2, 2, 2]))
    assert tagged.betti_numbers()[0] == 3


def test_two_txn_federation_has_one_loop():
    fed, t1, t2 = three_chain_two_txn()
    tagged = build_federation_complex(fed, [t1, t2])
    assert tagged.betti_numbers() == (1, 1, 0)
    assert tagged.complex.is_valid()


def test_double_fork_deal_betti():
    fed, deal = double_fork_pair()
    tagged = build_federation_complex(fed, [deal])
    assert tagged.betti_numbers() == (1, 4, 0, 0)


def test_double_fork_window_cell_counts():
    fed, deal = double_fork_pair()
    tagged = build_federation_complex(fed, [deal], window=1)
    assert tagged.complex.simplex_counts() == [8, 14, 4, 1]
    # alternating cell count: 8 - 14 + 4 - 1
    assert tagged.complex.euler_characteristic() == -3
    assert tagged.betti_numbers() == (1, 4, 0, 0)


def test_build_is_deterministic():
    fed1, t1a, t2a = three_chain_two_txn()
    fed2, t1b, t2b = three_chain_two_txn()
    a = build_federation_complex(fed1, [t1a, t2a])
    b = build_federation_complex(fed2, [t1b, t2b])
    assert a.complex == b.complex
    assert tagged_to_text(a) == tagged_to_text(b)


def test_dead_branch_excluded_from_build():
    fed, deal = double_fork_pair()
    for cid in (1, 2):
        fed.chain(cid).resolve_forks()
    tagged = build_federation_complex(fed, [deal])
    # forks gone: two plain chains with one edge between them
    assert tagged.betti_numbers() == (1, 0)
    assert tagged.txn_tops[9].dimension == 1


def test_txn_on_dead_branch_is_error():
    fed, _ = double_fork_pair()
    fed.chain(1).resolve_forks()
    dead = txn(5, [(1, 2, 1), (2, 2, 0)])
    with pytest.raises(ChainError, match="dead"):
        build_federation_complex(fed, [dead])


# -- transaction simplices -------------------------------------------------------

def test_pair_deal_is_edge():
    fed = federation_of([2, 2])
    s = transaction_simplex(fed, txn(1, [(1, 2, 0), (2, 2, 0)]))
    assert s.dimension == 1


def test_three_party_deal_is_triangle():
    fed, _, t2 = three_chain_two_txn()
    assert transaction_simplex(fed, t2).dimension == 2


def test_forked_pair_deal_is_tetrahedron():
    fed, deal = double_fork_pair()
    s = transaction_simplex(fed, deal)
    assert s.dimension == 3
    assert len(s.vertices) == 4


def test_expand_refs_includes_fork_siblings():
    fed, deal = double_fork_pair()
    refs = expand_refs(fed, deal)
    assert refs == [
        BlockRef(1, 2, 0), BlockRef(1, 2, 1),
        BlockRef(2, 2, 0), BlockRef(2, 2, 1),
    ]


def test_missing_block_is_error():
    fed = federation_of([2, 2])
    with pytest.raises(ChainError, match="missing"):
        transaction_simplex(fed, txn(1, [(1, 9, 0), (2, 2, 0)]))


# -- dimension formula --------------------------------------------------------------

def test_dimension_formula_no_forks_abstract():
    fed = federation_of([2, 2])
    assert expected_transaction_dimension(fed, txn(1, [(1, 2, 0), (2, 2, 0)])) == 1


def test_dimension_formula_forked_pair():
    fed, deal = double_fork_pair()
    assert expected_transaction_dimension(fed, deal) == 3


def test_dimension_formula_replicated():
    fed = federation_of([1, 1, 1], replicas={1: 2})
    t = txn(1, [(1, 1, 0), (2, 1, 0), (3, 1, 0)], parties=("a", "b", "c"))
    assert expected_transaction_dimension(fed, t, TopologyMode.REPLICATED) == 3
    s = transaction_simplex(fed, t, TopologyMode.REPLICATED)
    assert s.dimension == 3


def random_federation_and_txn(seed):
    rng = SplitMix64(seed)
    fed = Federation()
    n = rng.randrange(2, 4)
    refs = []
    for cid in range(1, n + 1):
        ch = Chain(cid, replicas=rng.randrange(1, 3))
        height = rng.randrange(1, 3)
        for _ in range(height):
            ch.append_block(0, ())
        for _ in range(rng.below(3)):
            label = ch.spawn_fork(height)
            ch.append_block(label, ())
        fed.add_chain(ch)
        refs.append((cid, height, 0))
    parties = tuple(f"p{i}" for i in range(1, n + 1))
    return fed, txn(1, refs, parties=parties)


@pytest.mark.parametrize("mode", [TopologyMode.ABSTRACT, TopologyMode.REPLICATED])
@pytest.mark.parametrize("seed", range(25))
def test_dimension_formula_matches_construction(seed, mode):
    fed, t = random_federation_and_txn(seed)
    s = transaction_simplex(fed, t, mode)
    assert s.dimension == expected_transaction_dimension(fed, t, mode)


# -- tags and teardown ---------------------------------------------------------------

def test_structural_tags_cover_chain_parts():
    fed, t1, t2 = three_chain_two_txn()
    tagged = build_federation_complex(fed, [t1, t2])
    body, tags = tagged_to_text(tagged)
    lines = body.splitlines()
    marks = tags.splitlines()
    assert len(lines) == len(marks)
    assert set(marks) == {"structural", "txn:1", "txn:2"}
    # every vertex line is structural
    for line, mark in zip(lines, marks):
        if " " not in line:
            assert mark == "structural"


def test_teardown_removes_deal_faces_only():
    fed, t1, t2 = three_chain_two_txn()
    tagged = build_federation_complex(fed, [t1, t2])
    after = teardown_transaction(tagged, 2)
    assert 2 not in after.txn_tops
    assert after.complex.is_valid()
    assert tagged.structural <= after.complex.members()
    # the 2-party deal is still there
    assert after.txn_tops[1] in after.complex


def test_teardown_all_matches_bare_build():
    fed, t1, t2 = three_chain_two_txn()
    tagged = build_federation_complex(fed, [t1, t2])
    stripped = teardown_transaction(teardown_transaction(tagged, 1), 2)
    bare = build_federation_complex(fed, [])
    assert stripped.complex == bare.complex
    assert stripped.betti_numbers() == (3, 0)


def test_teardown_drops_loop_once_both_deals_gone():
    fed, t1, t2 = three_chain_two_txn()
    tagged = build_federation_complex(fed, [t1, t2])
    assert tagged.betti_numbers()[1] == 1
    only_t1 = teardown_transaction(tagged, 2)
    assert only_t1.betti_numbers()[1] == 0  # loop needed both deals
    none = teardown_transaction(only_t1, 1)
    assert none.betti_numbers() == (3, 0)


def test_teardown_unknown_id_noop():
    fed, t1, _ = three_chain_two_txn()
    tagged = build_federation_complex(fed, [t1])
    again = teardown_transaction(tagged, 42)
    assert again.complex == tagged.complex


def test_teardown_idempotent():
    fed, t1, t2 = three_chain_two_txn()
    tagged = build_federation_complex(fed, [t1, t2])
    once = teardown_transaction(tagged, 1)
    twice = teardown_transaction(once, 1)
    assert once.complex == twice.complex


def test_shared_face_survives_other_teardown():
    # two deals over the same pair of blocks: the shared edge stays
    fed = federation_of([2, 2])
    ta = txn(1, [(1, 2, 0), (2, 2, 0)])
    tb = txn(2, [(1, 2, 0), (2, 2, 0)])
    tagged = build_federation_complex(fed, [ta, tb])
    after = teardown_transaction(tagged, 1)
    assert after.txn_tops[2] in after.complex

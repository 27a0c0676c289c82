import itertools
import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import LABEL_TO_HEAP, HEAP_TO_LABEL, brute_cover, literal_cover
from srpe.cs_method import (
    BinaryTreeState,
    DuplicateIdentity,
    RevocationList,
    TreeError,
    TreeFull,
    UnknownLeaf,
    cover_check,
    dump_state,
    ku_nodes,
    load_state,
    path,
    served_nodes,
)


def labelled_tree():
    state = BinaryTreeState.for_users(8)
    for i in range(1, 9):
        state.assign_leaf(f"user-{i}")
    return state


def test_for_users_sizes():
    assert BinaryTreeState.for_users(1).depth == 0
    assert BinaryTreeState.for_users(8).num_leaves == 8
    assert BinaryTreeState.for_users(9).num_leaves == 16
    assert BinaryTreeState.for_users(64).depth == 6
    with pytest.raises(TreeError):
        BinaryTreeState.for_users(0)


def test_assign_leaf_order_and_errors():
    state = BinaryTreeState.for_users(3)
    assert state.assign_leaf("a") == state.first_leaf
    assert state.assign_leaf(b"b") == state.first_leaf + 1
    with pytest.raises(DuplicateIdentity):
        state.assign_leaf("a")
    state.assign_leaf("c")
    with pytest.raises(TreeFull):
        state.assign_leaf("d")
    assert state.leaf_of("b") == state.first_leaf + 1
    with pytest.raises(UnknownLeaf):
        state.leaf_of("zz")
    assert state.leaf_or_assign("c") == state.first_leaf + 2


def test_labelled_path():
    state = labelled_tree()
    got = [HEAP_TO_LABEL[v] for v in path(state, LABEL_TO_HEAP[4])]
    assert got == [4, 10, 13, "root"]


def test_path_depth_zero_and_lengths():
    single = BinaryTreeState(0)
    assert path(single, 1) == [1]
    state = BinaryTreeState(4)
    assert all(len(path(state, v)) == 5 for v in state.leaves())
    with pytest.raises(UnknownLeaf):
        path(state, 3)


def test_two_revoked_kunodes_and_cover():
    state = labelled_tree()
    rl = RevocationList()
    for label in (2, 4):
        rl.add(LABEL_TO_HEAP[label], 1)
    assert {HEAP_TO_LABEL[v] for v in ku_nodes(state, rl, 1)} == {1, 3, 14}
    assert HEAP_TO_LABEL[cover_check(state, rl, 1, LABEL_TO_HEAP[5])] == 14
    assert cover_check(state, rl, 1, LABEL_TO_HEAP[4]) is None
    assert cover_check(state, rl, 1, LABEL_TO_HEAP[2]) is None


def test_empty_rl_gives_root():
    state = labelled_tree()
    assert ku_nodes(state, RevocationList(), 5) == [1]


def test_all_revoked_corner():
    state = labelled_tree()
    rl = RevocationList()
    for v in state.leaves():
        rl.add(v, 0)
    # the empty-cover rule yields the root, but nothing is served
    assert ku_nodes(state, rl, 0) == [1]
    assert served_nodes(state, rl, 0) == []
    assert all(cover_check(state, rl, 0, v) is None for v in state.leaves())


def test_epoch_semantics():
    state = labelled_tree()
    rl = RevocationList()
    rl.add(9, 5)
    assert cover_check(state, rl, 4, 9) == 1
    assert cover_check(state, rl, 5, 9) is None
    assert cover_check(state, rl, 50, 9) is None
    rl.add(9, 5)
    assert len(rl) == 1


def _subsets(leaves, sample, seed):
    if sample is None:
        return itertools.chain.from_iterable(itertools.combinations(leaves, r) for r in range(len(leaves) + 1))
    rng = random.Random(seed)
    return [tuple(v for v in leaves if rng.random() < p) for p in (rng.random() for _ in range(sample))]


@pytest.mark.parametrize("depth,sample", [(0, None), (1, None), (2, None), (3, None), (4, 2000)])
def test_cover_against_brute_force(depth, sample):
    state = BinaryTreeState(depth)
    leaves = list(state.leaves())
    for revoked in _subsets(leaves, sample, depth):
        rl = RevocationList()
        for v in revoked:
            rl.add(v, 0)
        cover = ku_nodes(state, rl, 0)
        assert set(cover) == literal_cover(depth, revoked)
        served = served_nodes(state, rl, 0)
        assert set(served) == brute_cover(depth, revoked)
        for v in leaves:
            hits = set(path(state, v)) & set(served)
            if v in revoked:
                assert not hits
                assert cover_check(state, rl, 0, v) is None
            else:
                assert len(hits) == 1
                assert cover_check(state, rl, 0, v) == hits.pop()
        r = len(revoked)
        if r:
            assert len(cover) <= max(1, r * math.log2(len(leaves) / r))


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 7).flatmap(lambda d: st.tuples(
    st.just(d), st.sets(st.integers(1 << d, (2 << d) - 1)), st.integers(1 << d, (2 << d) - 1))))
def test_monotone_under_more_revocations(args):
    depth, revoked, extra = args
    state = BinaryTreeState(depth)
    rl = RevocationList()
    for v in revoked:
        rl.add(v, 0)
    before = {v for v in state.leaves() if cover_check(state, rl, 0, v) is None}
    rl.add(extra, 0)
    after = {v for v in state.leaves() if cover_check(state, rl, 0, v) is None}
    assert before <= after
    assert after == before | {extra}


def test_node_store_write_once():
    state = BinaryTreeState(2)
    calls = []
    assert state.node_value(3, lambda: calls.append(1) or "U3") == "U3"
    assert state.node_value(3, lambda: calls.append(1) or "other") == "U3"
    assert calls == [1]
    with pytest.raises(TreeError):
        state.set_node(3, "again")
    with pytest.raises(UnknownLeaf):
        state.set_node(8, "x")


def test_state_round_trip():
    state = labelled_tree()
    rl = RevocationList()
    rl.add(9, 2)
    rl.add(11, 3)
    text = dump_state(state, rl, {1: "nodes/node-1.srpe", 9: "nodes/node-9.srpe"})
    state2, rl2, refs = load_state(text)
    assert state2.depth == 3 and state2.capacity == 8
    assert state2.leaf_map == state.leaf_map
    assert rl2.entries == rl.entries
    assert refs == {1: "nodes/node-1.srpe", 9: "nodes/node-9.srpe"}
    assert dump_state(state2, rl2, refs) == text


@pytest.mark.parametrize("text", ["", "HELLO\n", "SRPE-STATE 9\nDEPTH 1 2\n", "SRPE-STATE 1\nLEAF 00 2\n",
                                  "SRPE-STATE 1\nDEPTH 1 2\nBOGUS 1\n"])
def test_state_rejects_garbage(text):
    with pytest.raises(TreeError):
        load_state(text)

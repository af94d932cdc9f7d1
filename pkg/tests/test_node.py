import pytest

from dtcsim.node import LOCKED, TENTATIVE, CachingNode, FrameIdSource, initial_rtt
from dtcsim.packets import ORIGIN_LOCAL, AckSegment, DataSegment

MS = 1000


def make_node(node_id=5, hops_to_receiver=5, *, enabled=True):
    return CachingNode(
        node_id,
        hops_to_receiver,
        10 * MS,
        FrameIdSource(),
        enabled=enabled,
        ll_wait=30 * MS,
        max_local_retries=3,
    )


def forwarded(actions):
    return [a for a in actions if a[0] == "fwd_data"]


def local_tx(actions):
    return [a[1] for a in actions if a[0] == "local_tx"]


def acks_up(actions):
    return [a[1] for a in actions if a[0] == "tx_ack_up"]


def notes(actions):
    return [(a[1], a[2]) for a in actions if a[0] == "note"]


def lock_cached(node, seq, now=0):
    """Drive the node through cache -> missing ll ack -> locked for seq."""
    node.on_data(DataSegment(seq), now)
    gen = node.timer_generation
    node.on_ll_timeout(gen, now + node.ll_wait)
    assert node.cache is not None and node.cache.state == LOCKED


# -- rtt seed -------------------------------------------------------------------

def test_initial_rtt_formula():
    assert initial_rtt(4, 10 * MS) == 80 * MS
    assert initial_rtt(1, 10 * MS) == 20 * MS


def test_initial_rtt_shrinks_toward_receiver():
    latency = 10 * MS
    estimates = [initial_rtt(d, latency) for d in range(5, 0, -1)]
    assert estimates == sorted(estimates, reverse=True)


def test_initial_rtt_rejects_nonpositive_distance():
    with pytest.raises(ValueError):
        initial_rtt(0, 10 * MS)


# -- data path -------------------------------------------------------------------

def test_first_segment_cached_tentative_and_forwarded():
    node = make_node()
    actions = node.on_data(DataSegment(1), 0)
    ((_, seg, fid),) = forwarded(actions)
    assert seg.seq == 1 and fid is not None
    assert node.cache.state == TENTATIVE and node.cache.awaiting_ll_ack
    assert ("cache", 1) in notes(actions)
    assert any(a[0] == "arm_ll_timeout" and a[1] == 30 * MS for a in actions)
    assert node.data_tx_count == 1


def test_awaiting_entry_not_displaced():
    node = make_node()
    node.on_data(DataSegment(1), 0)
    actions = node.on_data(DataSegment(2), 0)
    ((_, seg, fid),) = forwarded(actions)
    assert seg.seq == 2 and fid is None          # forwarded but not cached
    assert node.cache.segment.seq == 1


def test_ll_acked_entry_replaceable_by_newer_segment():
    node = make_node()
    node.on_data(DataSegment(2), 0)
    node.on_ll_ack(node.cache.frame_id)
    assert not node.cache.awaiting_ll_ack
    actions = node.on_data(DataSegment(3), 21 * MS)
    assert node.cache.segment.seq == 3
    assert ("cache", 3) in notes(actions)


def test_locked_entry_never_displaced():
    node = make_node()
    lock_cached(node, 1)
    actions = node.on_data(DataSegment(3), 50 * MS)
    assert node.cache.segment.seq == 1
    assert node.cache.state == LOCKED
    ((_, seg, fid),) = forwarded(actions)
    assert seg.seq == 3 and fid is None


def test_data_below_forwarded_ack_regenerates_ack():
    node = make_node()
    node.last_ack_forwarded = 4
    actions = node.on_data(DataSegment(2), 0)
    assert forwarded(actions) == []              # data swallowed
    assert acks_up(actions) == [AckSegment(4)]
    assert ("regen_ack", 4) in notes(actions)
    assert node.data_tx_count == 0


def test_disabled_node_is_a_pure_relay():
    node = make_node(enabled=False)
    node.last_ack_forwarded = 9
    actions = node.on_data(DataSegment(2), 0)
    ((_, seg, fid),) = forwarded(actions)
    assert seg == DataSegment(2) and fid is None
    assert node.cache is None
    ack = AckSegment(1, {3})
    assert node.on_ack(ack, 0) == [("tx_ack_up", ack)]


# -- link-layer ack handling ---------------------------------------------------------

def test_matching_ll_ack_makes_entry_replaceable_and_stales_timer():
    node = make_node()
    node.on_data(DataSegment(2), 0)
    gen = node.timer_generation
    node.on_ll_ack(node.cache.frame_id)
    assert not node.cache.awaiting_ll_ack
    assert node.on_ll_timeout(gen, 30 * MS) == []    # timer went stale


def test_ll_ack_for_unknown_frame_is_noop():
    node = make_node()
    node.on_data(DataSegment(2), 0)
    node.on_ll_ack(12345)
    assert node.cache.awaiting_ll_ack


def test_ll_ack_on_locked_cache_is_noop():
    node = make_node()
    lock_cached(node, 1)
    node.on_ll_ack(node.cache.frame_id)
    assert node.cache.state == LOCKED


# -- locking --------------------------------------------------------------------------

def test_missing_ll_ack_locks_and_arms_local_timer():
    node = make_node(hops_to_receiver=5)
    node.on_data(DataSegment(1), 0)
    gen = node.timer_generation
    actions = node.on_ll_timeout(gen, 30 * MS)
    assert node.cache.state == LOCKED
    assert ("lock", 1) in notes(actions)
    # 1.5x the topology-seeded 100 ms round trip
    ((_, deadline, _gen),) = [a for a in actions if a[0] == "arm_local_rto"]
    assert deadline == 30 * MS + 150 * MS


def test_timer_scale_follows_rtt_estimate():
    node = make_node(hops_to_receiver=2)
    node.rtt_est = 40 * MS
    node.on_data(DataSegment(1), 0)
    actions = node.on_ll_timeout(node.timer_generation, 30 * MS)
    ((_, deadline, _gen),) = [a for a in actions if a[0] == "arm_local_rto"]
    assert deadline == 30 * MS + 60 * MS


# -- local retransmission timer ----------------------------------------------------------

def test_local_timer_retransmits_with_backoff():
    node = make_node()
    node.rtt_est = 100 * MS
    lock_cached(node, 2)
    actions = node.on_local_rto(node.timer_generation, 180 * MS)
    assert local_tx(actions) == [DataSegment(2, ORIGIN_LOCAL)]
    assert node.cache.local_retries == 1
    assert node.local_retx_count == 1
    ((_, deadline, _gen),) = [a for a in actions if a[0] == "arm_local_rto"]
    assert deadline == 180 * MS + 300 * MS       # 1.5 * rtt doubled once


def test_exhausted_retries_clear_the_cache():
    node = make_node()
    lock_cached(node, 2)
    node.cache.local_retries = 3
    actions = node.on_local_rto(node.timer_generation, 10_000 * MS)
    assert local_tx(actions) == [DataSegment(2, ORIGIN_LOCAL)]
    assert ("clear", 2) in notes(actions)
    assert node.cache is None
    assert not any(a[0] == "arm_local_rto" for a in actions)


def test_stale_local_timer_ignored():
    node = make_node()
    lock_cached(node, 2)
    stale = node.timer_generation
    node.on_ack(AckSegment(4), 200 * MS)         # covers 2, clears the cache
    assert node.cache is None
    assert node.on_local_rto(stale, 400 * MS) == []


# -- ack processing -----------------------------------------------------------------------

def test_uncovered_locked_segment_retransmitted_and_vouched():
    # an ack arrives that fails to vouch for locked 2: retransmit it, add it
    # to the selective set, and forward the augmented ack
    node = make_node(node_id=7, hops_to_receiver=3)
    lock_cached(node, 2)
    actions = node.on_ack(AckSegment(1, {3}), 200 * MS)
    assert local_tx(actions) == [DataSegment(2, ORIGIN_LOCAL)]
    assert acks_up(actions) == [AckSegment(1, {2, 3})]
    assert node.cache.state == LOCKED            # kept until covered


def test_gap_filling_retransmission_drops_the_ack():
    node = make_node(node_id=5, hops_to_receiver=5)
    lock_cached(node, 1)
    actions = node.on_ack(AckSegment(1, {2, 3}), 200 * MS)
    assert local_tx(actions) == [DataSegment(1, ORIGIN_LOCAL)]
    assert acks_up(actions) == []                # ack swallowed
    assert ("drop_ack", 1) in notes(actions)


def test_covering_ack_clears_cache_and_forwards_unchanged():
    node = make_node()
    lock_cached(node, 3)
    actions = node.on_ack(AckSegment(4), 200 * MS)
    assert node.cache is None
    assert ("clear", 3) in notes(actions)
    assert acks_up(actions) == [AckSegment(4)]
    assert node.last_ack_forwarded == 4


def test_selectively_covered_cache_clears_too():
    node = make_node()
    lock_cached(node, 3)
    actions = node.on_ack(AckSegment(1, {3}), 200 * MS)
    assert node.cache is None
    assert acks_up(actions) == [AckSegment(1, {3})]


def test_replaceable_entry_locks_on_uncovering_ack_without_retransmitting():
    # the next hop link-acked 2, yet the ack stream says it is missing
    # downstream: the node locks the entry and vouches, but the timer (or a
    # later ack) does the retransmitting
    node = make_node()
    node.on_data(DataSegment(2), 0)
    node.on_ll_ack(node.cache.frame_id)
    actions = node.on_ack(AckSegment(1, {3}), 100 * MS)
    assert node.cache.state == LOCKED
    assert local_tx(actions) == []
    assert acks_up(actions) == [AckSegment(1, {2, 3})]
    assert any(a[0] == "arm_local_rto" for a in actions)


def test_awaiting_entry_left_alone_by_uncovering_ack():
    node = make_node()
    node.on_data(DataSegment(2), 0)
    actions = node.on_ack(AckSegment(1, {3}), 5 * MS)
    assert node.cache.state == TENTATIVE and node.cache.awaiting_ll_ack
    assert acks_up(actions) == [AckSegment(1, {3})]


def test_tentative_cache_does_not_eat_acks_when_uncovered():
    # zero-loss smoke: uncovering acks pass tentative entries untouched
    node = make_node()
    node.on_data(DataSegment(3), 0)
    actions = node.on_ack(AckSegment(3), 10 * MS)
    assert local_tx(actions) == []
    assert acks_up(actions) == [AckSegment(3)]
    assert node.data_tx_count == 1               # the original forward only


def test_ack_triggered_retransmit_rearms_timer():
    node = make_node()
    lock_cached(node, 2)
    before_gen = node.timer_generation
    actions = node.on_ack(AckSegment(1, {3}), 200 * MS)
    assert node.timer_generation > before_gen
    ((_, deadline, _gen),) = [a for a in actions if a[0] == "arm_local_rto"]
    assert deadline == 200 * MS + (3 * node.rtt_est) // 2


def test_local_retransmission_discards_pending_rtt_sample():
    node = make_node()
    node.on_data(DataSegment(2), 0)
    assert 2 in node.pending_rtt
    node.on_ll_timeout(node.timer_generation, 30 * MS)
    node.on_local_rto(node.timer_generation, 200 * MS)
    assert 2 not in node.pending_rtt


def test_repeat_sighting_discards_pending_rtt_sample():
    node = make_node()
    node.on_data(DataSegment(2), 0)
    node.on_data(DataSegment(2), 50 * MS)   # someone retransmitted it
    assert 2 not in node.pending_rtt


def test_rtt_samples_from_covered_pending_segments():
    node = make_node(hops_to_receiver=5)
    node.on_data(DataSegment(1), 0)
    node.on_ll_ack(node.cache.frame_id)
    node.on_data(DataSegment(2), 21 * MS)
    node.on_ll_ack(node.cache.frame_id)
    node.on_ack(AckSegment(3), 100 * MS)         # covers 1 and 2
    assert node.pending_rtt == {}
    # two EWMA steps from the 100 ms seed toward the两 samples
    est = (7 * 100 * MS + 100 * MS) // 8
    est = (7 * est + (100 - 21) * MS) // 8
    assert node.rtt_est == est


def test_forwarded_ack_never_loses_information():
    node = make_node()
    lock_cached(node, 2)
    ack = AckSegment(1, {3, 5})
    (forwarded_ack,) = acks_up(node.on_ack(ack, 200 * MS))
    assert forwarded_ack.ack_no == ack.ack_no
    assert ack.sack <= forwarded_ack.sack


def test_one_cache_slot_at_all_times():
    node = make_node()
    for seq in range(1, 8):
        node.on_data(DataSegment(seq), seq * 30 * MS)
        assert node.cache is None or isinstance(node.cache.segment.seq, int)
        node.on_ll_ack(node.cache.frame_id)
    assert node.cache.segment.seq == 7

from hypothesis import given, strategies as st

from dtcsim.packets import (
    ORIGIN_E2E,
    ORIGIN_LOCAL,
    AckSegment,
    DataSegment,
    gaps_filled_with,
    render_payload,
    sack_add,
    sack_covers,
)

seqs = st.integers(min_value=1, max_value=30)
acks = st.builds(
    AckSegment,
    st.integers(min_value=1, max_value=30),
    st.frozensets(seqs, max_size=8),
)


# -- constructor canonical form ----------------------------------------------

def test_constructor_strips_cumulatively_covered_entries():
    ack = AckSegment(4, {1, 2, 3, 4, 6})
    assert ack.sack == frozenset({4, 6})


def test_default_sack_is_empty():
    assert AckSegment(3).sack == frozenset()


@given(acks)
def test_canonical_form_invariant(ack):
    assert all(s >= ack.ack_no for s in ack.sack)


# -- sack_covers ---------------------------------------------------------------

def test_covers_below_cumulative_point():
    # a full cumulative ack vouches for everything beneath it
    assert sack_covers(AckSegment(4), 2)


def test_not_covered_when_absent():
    assert not sack_covers(AckSegment(1, {3}), 2)


def test_covered_when_selected():
    assert sack_covers(AckSegment(1, {3}), 3)


# -- sack_add -------------------------------------------------------------------

def test_add_extends_selective_set():
    assert sack_add(AckSegment(1, {3}), 2) == AckSegment(1, {2, 3})


def test_add_is_idempotent():
    ack = AckSegment(1, {2, 3})
    assert sack_add(ack, 2) == ack


def test_add_below_cumulative_point_is_noop():
    ack = AckSegment(5, {7})
    assert sack_add(ack, 3) == ack


@given(acks, seqs)
def test_add_then_covers(ack, seq):
    assert sack_covers(sack_add(ack, seq), seq) or seq < ack.ack_no
    # below the cumulative point coverage already holds
    if seq < ack.ack_no:
        assert sack_covers(ack, seq)


@given(acks, seqs)
def test_add_never_removes_information(ack, seq):
    extended = sack_add(ack, seq)
    assert extended.ack_no == ack.ack_no
    assert ack.sack <= extended.sack


# -- gaps_filled_with ------------------------------------------------------------

def test_gap_filling_segment_completes_range():
    # receiver holds 2 and 3; the retransmitted 1 fills every gap
    assert gaps_filled_with(AckSegment(1, {2, 3}), 1)


def test_remaining_hole_blocks():
    # 1 is still missing between the cumulative point and the selected 3
    assert not gaps_filled_with(AckSegment(1, {3}), 2)


def test_empty_range_above_cumulative_point():
    assert gaps_filled_with(AckSegment(4), 4)


@given(acks, seqs)
def test_gaps_filled_implies_full_coverage(ack, seq):
    if gaps_filled_with(ack, seq):
        extended = sack_add(ack, seq)
        highest = max(ack.sack | {seq})
        assert all(
            sack_covers(extended, n) for n in range(ack.ack_no, highest + 1)
        )


# -- rendering --------------------------------------------------------------------

def test_render_data_segment():
    assert render_payload(DataSegment(3, ORIGIN_E2E)) == "DATA seq=3 origin=e2e"
    assert render_payload(DataSegment(7, ORIGIN_LOCAL)) == "DATA seq=7 origin=local"


def test_render_ack_sorted():
    assert render_payload(AckSegment(1, {3, 2})) == "ACK no=1 sack={2,3}"
    assert render_payload(AckSegment(4)) == "ACK no=4 sack={}"

"""Simplified TCP endpoints: fixed-window sender and in-order receiver.

The endpoints are deliberately stock TCP: the sender keeps a small
receiver-advertised window, an adaptive retransmission timeout with
exponential backoff, and timeout-driven recovery (fast retransmit exists
behind a flag, default off).  Neither endpoint knows anything about the
in-network caches between them.

State transitions return small action tuples for the run engine to carry
out, which keeps every branch directly unit-testable:

    ("tx_data", seq)             transmit segment seq toward the chain
    ("arm_rto", at, generation)  (re)arm the retransmission timer
    ("arm_send_slot", at)        wake the pacing gate at time `at`
    ("completed",)               the whole transfer is acknowledged
"""

from __future__ import annotations

from collections import deque
from typing import Optional

from .packets import AckSegment, DataSegment


def update_rto(srtt: Optional[int], rttvar: int, sample: int, rto_min: int = 0):
    """One adaptive-timeout update from a new round-trip sample.

    First sample seeds srtt = sample and rttvar = sample / 2; afterwards
    rttvar blends with gain 1/4 (against the old srtt) and srtt with gain
    1/8.  The timeout is srtt + 4*rttvar floored at rto_min.  Integer
    microseconds throughout.
    """
    if srtt is None:
        new_srtt = sample
        new_rttvar = sample // 2
    else:
        new_rttvar = (3 * rttvar + abs(srtt - sample)) // 4
        new_srtt = (7 * srtt + sample) // 8
    return new_srtt, new_rttvar, max(rto_min, new_srtt + 4 * new_rttvar)


class TcpSender:
    """Window-clamped sender driving one unidirectional transfer.

    Outgoing data passes a pacing gate that enforces a minimum spacing
    between consecutive transmissions (the stand-in for frame
    serialization time, which the per-hop latency constant otherwise
    absorbs).  With spacing 0 the gate is transparent.
    """

    def __init__(
        self,
        total_segments: int,
        window: int,
        *,
        rto_min: int,
        rto_max: int,
        rto_initial: int,
        send_spacing: int = 0,
        fast_retransmit: bool = False,
    ) -> None:
        self.total = total_segments
        self.window = window
        self.next_new = 1               # lowest never-sent segment
        self.cumulative = 1             # receiver's next expected segment
        self.in_flight = {}             # seq -> [first_sent_at | None, transmissions]
        self.sack_marked = set()        # selectively acked, kept until cumulative
        self.srtt: Optional[int] = None
        self.rttvar = 0
        self.rto = rto_initial
        self.rto_min = rto_min
        self.rto_max = rto_max
        self.backoff = 0
        self.rto_generation = 0
        self.fast_retransmit = fast_retransmit
        self.dup_acks = 0
        self.e2e_retransmissions = 0
        self.total_data_tx = 0
        self.completed_at: Optional[int] = None
        self.spacing = send_spacing
        self._tx_queue = deque()        # (seq, is_retransmission)
        self._next_free_at = 0
        self._slot_armed = False

    # -- pacing gate --------------------------------------------------------

    def _queue_tx(self, seq: int, is_retx: bool) -> None:
        if any(q == seq for q, _ in self._tx_queue):
            return
        self._tx_queue.append((seq, is_retx))

    def _drain(self, now: int) -> list:
        actions = []
        while self._tx_queue and now >= self._next_free_at:
            seq, is_retx = self._tx_queue.popleft()
            if seq < self.cumulative:
                continue                # acknowledged while waiting in the gate
            entry = self.in_flight.get(seq)
            if entry is None:
                continue
            entry[1] += 1
            if entry[0] is None:
                entry[0] = now
            self.total_data_tx += 1
            if is_retx:
                self.e2e_retransmissions += 1
            actions.append(("tx_data", seq))
            self._next_free_at = now + self.spacing
        if self._tx_queue and not self._slot_armed:
            self._slot_armed = True
            actions.append(("arm_send_slot", self._next_free_at))
        return actions

    def on_send_slot(self, now: int) -> list:
        self._slot_armed = False
        return self._drain(now)

    # -- timer --------------------------------------------------------------

    def effective_rto(self) -> int:
        return min(self.rto << self.backoff, self.rto_max)

    def _arm_rto(self, now: int):
        self.rto_generation += 1
        return ("arm_rto", now + self.effective_rto(), self.rto_generation)

    # -- transfer -----------------------------------------------------------

    def start(self, now: int) -> list:
        """Queue the initial window (segments 1..w) and arm the timer."""
        for seq in range(1, min(self.window, self.total) + 1):
            self.in_flight[seq] = [None, 0]
            self._queue_tx(seq, False)
            self.next_new = seq + 1
        actions = self._drain(now)
        actions.append(self._arm_rto(now))
        return actions

    def on_ack(self, ack: AckSegment, now: int) -> list:
        if self.completed_at is not None:
            return []
        if ack.ack_no < self.cumulative:
            return []                   # stale duplicate
        actions = []
        if ack.ack_no > self.cumulative:
            for seq in range(self.cumulative, ack.ack_no):
                entry = self.in_flight.pop(seq, None)
                self.sack_marked.discard(seq)
                # round-trip sample from each newly covered segment that was
                # never retransmitted (Karn's rule); acks delayed behind a
                # recovery legitimately stretch the estimate
                if entry is not None and entry[1] == 1:
                    self.srtt, self.rttvar, self.rto = update_rto(
                        self.srtt, self.rttvar, now - entry[0], self.rto_min
                    )
            self.cumulative = ack.ack_no
            self.backoff = 0
            self.dup_acks = 0
            for seq in ack.sack:
                if seq in self.in_flight:
                    self.sack_marked.add(seq)
            while self.next_new <= self.total and len(self.in_flight) < self.window:
                self.in_flight[self.next_new] = [None, 0]
                self._queue_tx(self.next_new, False)
                self.next_new += 1
            actions += self._drain(now)
            if self.cumulative == self.total + 1:
                self.completed_at = now
                self.rto_generation += 1    # pending timer goes stale
                actions.append(("completed",))
            else:
                actions.append(self._arm_rto(now))
            return actions
        # duplicate at the current cumulative point: absorb sack information,
        # recover by timeout unless fast retransmit is switched on
        for seq in ack.sack:
            if seq in self.in_flight:
                self.sack_marked.add(seq)
        self.dup_acks += 1
        if self.fast_retransmit and self.dup_acks == 3 and self.in_flight:
            self._queue_tx(min(self.in_flight), True)
            actions += self._drain(now)
        return actions

    def on_rto(self, generation: int, now: int) -> list:
        if generation != self.rto_generation or self.completed_at is not None:
            return []
        if self.in_flight:
            oldest = min(self.in_flight)
            if self.in_flight[oldest][0] is not None:
                self._queue_tx(oldest, True)
        self.backoff += 1
        actions = self._drain(now)
        actions.append(self._arm_rto(now))
        return actions


class TcpReceiver:
    """In-order delivery with selective acknowledgment of the holes above."""

    def __init__(self, total_segments: int) -> None:
        self.total = total_segments
        self.next_expected = 1
        self.out_of_order = set()

    @property
    def delivered_in_order(self) -> int:
        return self.next_expected - 1

    def on_data(self, segment: DataSegment) -> AckSegment:
        """Absorb one segment; always answer with the current ack."""
        seq = segment.seq
        if seq == self.next_expected:
            self.next_expected += 1
            while self.next_expected in self.out_of_order:
                self.out_of_order.discard(self.next_expected)
                self.next_expected += 1
        elif seq > self.next_expected:
            self.out_of_order.add(seq)
        # duplicates below next_expected change nothing but still get re-acked
        return AckSegment(self.next_expected, frozenset(self.out_of_order))

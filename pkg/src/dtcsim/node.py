"""Per-node one-segment cache with link-layer-ack-driven locking.

Each intermediate node relays data toward the receiver and acks toward
the sender.  When enabled, it additionally keeps at most one data segment
cached:

  * a freshly forwarded segment is cached *tentative* while its
    link-layer ack is outstanding; the entry pins the slot until the ack
    arrives (the segment was presumably received, entry becomes
    replaceable by newer traffic) or the wait expires (presumably lost,
    entry is *locked* and armed with a local retransmission timer at
    1.5x the node's round-trip estimate to the receiver);
  * a passing ack that vouches for the cached segment clears the slot;
  * a passing ack that fails to vouch for a locked segment triggers a
    local retransmission, gets the segment added to its selective set,
    and is dropped outright when that addition fills every gap;
  * data below the node's own forwarded cumulative point means the ack
    died upstream, so the node swallows the data and regenerates the ack.

Timers carry a generation stamp; any cache mutation bumps the node's
counter so stale expiries fall through harmlessly.

Action tuples returned to the engine:

    ("fwd_data", segment, frame_id_or_None)   relay toward the receiver
    ("local_tx", segment)                     cache retransmission, same direction
    ("tx_ack_up", ack)                        relay/regenerate toward the sender
    ("arm_ll_timeout", at, generation)
    ("arm_local_rto", at, generation)
    ("note", action, seq)                     trace-only cache transitions
"""

from __future__ import annotations

from typing import Optional

from .packets import (
    ORIGIN_LOCAL,
    AckSegment,
    DataSegment,
    gaps_filled_with,
    sack_add,
    sack_covers,
)

TENTATIVE = "tentative"
LOCKED = "locked"


def initial_rtt(hops_to_receiver: int, hop_latency: int) -> int:
    """Topology-seeded round-trip estimate: out and back over known hops."""
    if hops_to_receiver < 1:
        raise ValueError("a relaying node is at least one hop from the receiver")
    return 2 * hops_to_receiver * hop_latency


class FrameIdSource:
    """Run-wide counter handing out unique link-frame ids."""

    __slots__ = ("_next",)

    def __init__(self) -> None:
        self._next = 0

    def next(self) -> int:
        fid = self._next
        self._next += 1
        return fid


class CacheEntry:
    __slots__ = ("segment", "state", "frame_id", "awaiting_ll_ack", "local_retries")

    def __init__(self, segment: DataSegment, frame_id: int) -> None:
        self.segment = segment
        self.state = TENTATIVE
        self.frame_id = frame_id
        self.awaiting_ll_ack = True
        self.local_retries = 0


class CachingNode:
    def __init__(
        self,
        node_id: int,
        hops_to_receiver: int,
        hop_latency: int,
        frame_ids: FrameIdSource,
        *,
        enabled: bool = True,
        ll_wait: int,
        max_local_retries: int,
    ) -> None:
        self.node_id = node_id
        self.enabled = enabled
        self.hops_to_receiver = hops_to_receiver
        self.cache: Optional[CacheEntry] = None
        self.rtt_est = initial_rtt(hops_to_receiver, hop_latency)
        self.pending_rtt = {}           # seq -> forwarded_at, awaiting ack coverage
        self._seen = set()              # seqs ever relayed (first-sighting filter)
        self.last_ack_forwarded = 1     # highest cumulative ack sent toward the sender
        self.data_tx_count = 0
        self.local_retx_count = 0
        self.ll_wait = ll_wait
        self.max_local_retries = max_local_retries
        self.timer_generation = 0
        self._frame_ids = frame_ids

    # -- helpers --------------------------------------------------------------

    def _local_timer_interval(self) -> int:
        return (3 * self.rtt_est) // 2

    def _retransmit_cached(self, now: int) -> list:
        """Emit the cached segment again and restart its timer tier."""
        entry = self.cache
        seq = entry.segment.seq
        self.data_tx_count += 1
        self.local_retx_count += 1
        # Karn hygiene: a seq we retransmit ourselves yields no rtt sample
        self.pending_rtt.pop(seq, None)
        self.timer_generation += 1
        deadline = now + self._local_timer_interval() * (1 << entry.local_retries)
        return [
            ("note", "local_retx", seq),
            ("local_tx", DataSegment(seq, ORIGIN_LOCAL)),
            ("arm_local_rto", deadline, self.timer_generation),
        ]

    # -- data path ------------------------------------------------------------

    def on_data(self, segment: DataSegment, now: int) -> list:
        if not self.enabled:
            self.data_tx_count += 1
            return [("fwd_data", segment, None)]
        seq = segment.seq
        if seq < self.last_ack_forwarded:
            # we already forwarded an ack covering this segment; that ack
            # evidently died upstream, so regenerate it instead of relaying
            return [
                ("note", "regen_ack", self.last_ack_forwarded),
                ("tx_ack_up", AckSegment(self.last_ack_forwarded)),
            ]
        self.data_tx_count += 1
        actions = []
        entry = self.cache
        if entry is None or (entry.state == TENTATIVE and not entry.awaiting_ll_ack):
            # free slot, or the previous tenant was link-acknowledged and is
            # presumably received downstream; a tentative entry still waiting
            # on its ll ack keeps the slot (it may be the one that needs us)
            fid = self._frame_ids.next()
            self.cache = CacheEntry(segment, fid)
            self.timer_generation += 1
            actions.append(("note", "cache", seq))
            actions.append(("fwd_data", segment, fid))
            actions.append(("arm_ll_timeout", now + self.ll_wait, self.timer_generation))
        else:
            actions.append(("fwd_data", segment, None))
        if seq not in self._seen:
            self._seen.add(seq)
            self.pending_rtt[seq] = now
        else:
            # a repeat pass means someone retransmitted this segment, so the
            # eventual ack coverage is ambiguous; never sample it (Karn)
            self.pending_rtt.pop(seq, None)
        return actions

    def on_ll_ack(self, frame_id: int) -> None:
        entry = self.cache
        if (
            self.enabled
            and entry is not None
            and entry.state == TENTATIVE
            and entry.awaiting_ll_ack
            and entry.frame_id == frame_id
        ):
            entry.awaiting_ll_ack = False
            self.timer_generation += 1      # pending ll timeout is now stale

    def on_ll_timeout(self, generation: int, now: int) -> list:
        if generation != self.timer_generation:
            return []
        entry = self.cache
        assert entry is not None and entry.state == TENTATIVE
        entry.state = LOCKED
        entry.awaiting_ll_ack = False
        entry.local_retries = 0
        self.timer_generation += 1
        deadline = now + self._local_timer_interval()
        return [
            ("note", "lock", entry.segment.seq),
            ("arm_local_rto", deadline, self.timer_generation),
        ]

    def on_local_rto(self, generation: int, now: int) -> list:
        if generation != self.timer_generation:
            return []
        entry = self.cache
        assert entry is not None and entry.state == LOCKED
        entry.local_retries += 1
        if entry.local_retries <= self.max_local_retries:
            actions = self._retransmit_cached(now)
        else:
            # final try: retransmit once more, then yield to end-to-end recovery
            seq = entry.segment.seq
            self.data_tx_count += 1
            self.local_retx_count += 1
            self.pending_rtt.pop(seq, None)
            self.cache = None
            self.timer_generation += 1
            actions = [
                ("note", "local_retx", seq),
                ("local_tx", DataSegment(seq, ORIGIN_LOCAL)),
                ("note", "clear", seq),
            ]
        return actions

    # -- ack path ---------------------------------------------------------------

    def on_ack(self, ack: AckSegment, now: int) -> list:
        if not self.enabled:
            return [("tx_ack_up", ack)]
        # round-trip samples for every pending segment this ack vouches for
        if self.pending_rtt:
            for seq in sorted(self.pending_rtt):
                if sack_covers(ack, seq):
                    sample = now - self.pending_rtt.pop(seq)
                    self.rtt_est = (7 * self.rtt_est + sample) // 8
        actions = []
        forward = ack
        entry = self.cache
        if entry is not None:
            cached = entry.segment.seq
            if sack_covers(ack, cached):
                # the receiver has it, or a node closer to the receiver does
                self.cache = None
                self.timer_generation += 1
                actions.append(("note", "clear", cached))
            elif entry.state == LOCKED and ack.ack_no <= cached:
                actions += self._retransmit_cached(now)
                if gaps_filled_with(ack, cached):
                    # with our segment back in flight nothing above the
                    # cumulative point is missing; the sender needs no ack
                    # (and must not get a synthesized cumulative one)
                    actions.append(("note", "drop_ack", cached))
                    return actions
                forward = sack_add(ack, cached)
            elif (
                entry.state == TENTATIVE
                and not entry.awaiting_ll_ack
                and ack.ack_no <= cached
            ):
                # the next hop link-acked this segment, yet the ack stream
                # says it is still missing downstream: lock it and vouch for
                # it; the timer (or the next uncovering ack) retransmits
                entry.state = LOCKED
                entry.local_retries = 0
                self.timer_generation += 1
                deadline = now + self._local_timer_interval()
                actions.append(("note", "lock", cached))
                actions.append(("arm_local_rto", deadline, self.timer_generation))
                forward = sack_add(ack, cached)
        if forward.ack_no > self.last_ack_forwarded:
            self.last_ack_forwarded = forward.ack_no
        actions.append(("tx_ack_up", forward))
        return actions

"""Single-hop lossy transmission with explicit positive link-layer acks.

Loss is memoryless: one uniform draw per transmission against a
per-kind threshold.  Data segments are the largest frames and lose most
often; TCP acks lose at half that rate and link-layer acks at a quarter.
The link layer never retransmits -- a lost frame is simply gone, and
recovery is someone else's job.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

from .events import EventQueue, FrameArrival, LlAckArrival, RandomSource
from .packets import DataSegment, LinkFrame


@dataclass(frozen=True)
class LossModel:
    p_data: float
    p_tcp_ack: float
    p_ll_ack: float


def derive_loss_model(p_data: float) -> LossModel:
    """Per-kind drop probabilities in the fixed 4:2:1 size-based ratio."""
    if not 0.0 <= p_data < 1.0:
        raise ValueError(f"data loss probability must be in [0, 1), got {p_data!r}")
    return LossModel(p_data, p_data / 2.0, p_data / 4.0)


@dataclass(frozen=True)
class Link:
    src: int
    dst: int
    latency: int            # one-way microseconds, > 0

    def __post_init__(self) -> None:
        if self.latency <= 0:
            raise ValueError("link latency must be positive")


# A drop override lets tests script exact losses: return True to force a
# loss, False to force delivery, None to fall through to the random draw.
DropOverride = Callable[[LinkFrame], Optional[bool]]


def transmit(
    queue: EventQueue,
    link: Link,
    frame: LinkFrame,
    model: LossModel,
    rng: RandomSource,
    drop_override: Optional[DropOverride] = None,
) -> bool:
    """One delivery attempt; returns True when the frame will arrive.

    Exactly one uniform draw per call (unless a script override decides),
    against p_data for data frames and p_tcp_ack for ack frames.  On
    survival the frame arrives at the far end after the link latency;
    otherwise it silently vanishes.
    """
    assert frame.src == link.src and frame.dst == link.dst, "frame does not match link"
    forced = drop_override(frame) if drop_override is not None else None
    if forced is None:
        threshold = model.p_data if type(frame.payload) is DataSegment else model.p_tcp_ack
        lost = rng.uniform_draw() < threshold
    else:
        lost = forced
    if not lost:
        queue.schedule(queue.now + link.latency, link.dst, FrameArrival(frame))
    return not lost


def ll_acknowledge(
    queue: EventQueue,
    frame: LinkFrame,
    latency: int,
    model: LossModel,
    rng: RandomSource,
) -> bool:
    """Send the positive link-layer ack for a frame that just arrived.

    One draw against p_ll_ack; on survival the original transmitter sees
    an LlAckArrival after the link latency.  Emitted only for delivered
    frames, so a missing ll ack is evidence the frame (or its ack) died.
    """
    lost = rng.uniform_draw() < model.p_ll_ack
    if not lost:
        queue.schedule(queue.now + latency, frame.src, LlAckArrival(frame.frame_id))
    return not lost

"""Deterministic periodic traffic and FIFO transmit buffers.

Every user of a slice receives one fixed-size packet at each multiple of the
slice's arrival interval.  Buffers are unbounded and never drop: a packet
that outlives its delay budget is still transmitted and only counted by the
expiry statistics.  Packets are divisible across TTIs; the head keeps a
residual bit count.
"""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass

from .domain import TrafficProfile


@dataclass
class Packet:
    size_bits: int
    arrival_s: float
    remaining_bits: float
    tx_start_s: float | None = None
    tx_end_s: float | None = None

    @property
    def delay_s(self) -> float:
        """Queueing plus transmission delay; defined once fully served."""
        return self.tx_end_s - self.arrival_s


def arrivals_in_tti(profile: TrafficProfile, tti: int, tti_s: float) -> list[Packet]:
    """Packets arriving during TTI `tti`, i.e. in [tti*T, (tti+1)*T).

    Arrival timestamps are exact multiples of the interval (sub-TTI
    resolution).  Integer nanosecond arithmetic keeps the schedule free of
    float drift over long runs.
    """
    interval_ns = round(profile.arrival_interval_s * 1e9)
    tti_ns = round(tti_s * 1e9)
    t0 = tti * tti_ns
    t1 = t0 + tti_ns
    first = -(-t0 // interval_ns)   # ceil division
    last = -(-t1 // interval_ns)
    out = []
    for a in range(first, last):
        t = a * interval_ns / 1e9
        out.append(Packet(size_bits=profile.packet_bits, arrival_s=t,
                          remaining_bits=float(profile.packet_bits)))
    return out


class UserBuffer:
    """FIFO packet queue with conservation counters."""

    def __init__(self):
        self.queue: deque[Packet] = deque()
        self.arrived_bits = 0
        self.arrived_packets = 0
        self.served_bits = 0.0
        self.completed_packets = 0
        self._queued_bits = 0.0

    def enqueue(self, pkt: Packet) -> None:
        self.queue.append(pkt)
        self.arrived_bits += pkt.size_bits
        self.arrived_packets += 1
        self._queued_bits += pkt.size_bits

    def __len__(self) -> int:
        return len(self.queue)

    @property
    def queued_bits(self) -> float:
        # running counter; kept in lockstep with drain() so it stays exact
        return self._queued_bits

    def head_delay(self, now_s: float) -> float | None:
        """Age of the head-of-line packet; None when the buffer is empty."""
        if not self.queue:
            return None
        return now_s - self.queue[0].arrival_s

    def snapshot(self, limit: int | None = None) -> list[tuple[float, float]]:
        """(remaining_bits, arrival_s) per queued packet, head first.

        `limit` truncates to the first packets; schedulers that can serve at
        most n heads per TTI need no deeper view.
        """
        it = self.queue if limit is None else itertools.islice(self.queue, limit)
        return [(p.remaining_bits, p.arrival_s) for p in it]

    def drain(self, bits: float, now_s: float, tti_s: float) -> list[Packet]:
        """Serve up to `bits` from the head of the queue.

        Whole packets are removed front to back while capacity remains; a
        partially served head keeps its residual.  Completed packets get
        tx_end at the end of the serving TTI.  Returns the completions.
        """
        completed = []
        while bits > 0.0 and self.queue:
            head = self.queue[0]
            if head.tx_start_s is None:
                # service begins now; never before the packet existed
                head.tx_start_s = max(now_s, head.arrival_s)
            take = min(head.remaining_bits, bits)
            head.remaining_bits -= take
            self.served_bits += take
            self._queued_bits -= take
            bits -= take
            if head.remaining_bits <= 1e-9:
                self.served_bits += head.remaining_bits
                self._queued_bits -= head.remaining_bits
                head.remaining_bits = 0.0
                head.tx_end_s = now_s + tti_s
                completed.append(head)
                self.completed_packets += 1
                self.queue.popleft()
            else:
                break
        return completed

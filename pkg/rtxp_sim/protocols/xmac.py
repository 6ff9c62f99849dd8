"""
Short-preamble low power listening with opportunistic gradient forwarding.

Every node samples the channel for a short listen window once per cycle
period, at its own random phase. A sender carrier-senses, then strobes
short preamble packets separated by response slots for up to a full cycle.
The first idle node closer to the sink that hears a strobe answers; the data
follows immediately and is acknowledged. A relay that already carried a
packet acknowledges it again but never forwards it twice. A failed train is
retried after a random wait over a window of cycles that doubles with every
failure. Nothing here bounds the delay.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Set, Tuple

import numpy as np

from rtxp_sim.core.config import RadioParams, RtxpConfig, XmacConfig
from rtxp_sim.core.kernel import Simulator
from rtxp_sim.core.models import AlarmPacket, Reception, Transmission, TxKind
from rtxp_sim.core.topology import Network
from rtxp_sim.protocols.base import MacProtocol, PacketTracker
from rtxp_sim.radio.channel import Channel
from rtxp_sim.radio.energy import EnergyLedger, EnergyState

logger = logging.getLogger(__name__)


class NodeStatus(str, Enum):
    IDLE = "idle"
    SENDING = "sending"
    RESPONDING = "responding"


@dataclass
class _Attempt:
    sender: int
    packet: AlarmPacket
    strobe_start: int
    periods: int
    preamble: Transmission
    groups: List[Tuple[int, List[int]]]
    group_index: int = 0
    strobes_sent: int = 0


@dataclass
class _Busy:
    intervals: List[Tuple[int, int]] = field(default_factory=list)


class XmacProtocol(MacProtocol):
    name = "xmac-gradient"

    def __init__(
        self,
        sim: Simulator,
        network: Network,
        channel: Channel,
        ledger: EnergyLedger,
        config: XmacConfig,
        rtxp: RtxpConfig,
        radio: RadioParams,
        rng: np.random.Generator,
        tracker: Optional[PacketTracker] = None,
    ):
        super().__init__(sim, network, channel, ledger, tracker)
        if rng is None:
            raise ValueError("xmac needs the csma-backoff random stream")
        self.config = config
        self.radio = radio
        self.rng = rng
        self.cycle_us = config.resolve_cycle(rtxp)
        self.period_us = config.strobe_period_us
        self.preamble_periods = math.ceil((self.cycle_us + config.listen_window_us) / self.period_us)

        self.wake_offset = {v: int(rng.integers(0, self.cycle_us)) for v in range(network.size)}
        self.status = {v: NodeStatus.IDLE for v in range(network.size)}
        self.busy_streak = {v: 0 for v in range(network.size)}
        self._attempt_scheduled = {v: False for v in range(network.size)}
        self._busy = {v: _Busy() for v in range(network.size)}
        self._seen: Dict[int, Set[int]] = {v: set() for v in range(network.size)}
        self.stats = {"attempts": 0, "cca_busy": 0, "collisions": 0, "acks_lost": 0, "duplicates_suppressed": 0}

    @property
    def bound_us(self) -> int:
        return (self.network.hops.max_ring + 1) * self.cycle_us

    def install(self) -> None:
        """Sampling is periodic and settled at finalize; nothing to schedule."""

    def enqueue(self, node: int, packet: AlarmPacket) -> None:
        self._seen[node].add(packet.id)
        super().enqueue(node, packet)
        if node != self.network.sink and self.status[node] == NodeStatus.IDLE:
            self._schedule_attempt(node, self.sim.now)

    def _schedule_attempt(self, node: int, at: int) -> None:
        if not self._attempt_scheduled[node]:
            self._attempt_scheduled[node] = True
            self.sim.schedule_at(at, self._attempt, node)

    def _spend(self, node: int, start: int, end: int, tx_us: int = 0, rx_us: int = 0) -> None:
        """Account one awake interval outside the periodic sampling."""
        self.ledger.account(node, EnergyState.TX, tx_us)
        self.ledger.account(node, EnergyState.RX, rx_us)
        self.ledger.account(node, EnergyState.LISTEN, max(0, end - start - tx_us - rx_us))
        self._busy[node].intervals.append((start, end))

    def _idle(self, node: int) -> None:
        self.status[node] = NodeStatus.IDLE
        if self.queues[node] and node != self.network.sink:
            self._schedule_attempt(node, self.sim.now)

    def next_wake(self, node: int, t: int) -> int:
        """Start of the first listen window of node that is still open at t."""
        offset = self.wake_offset[node]
        window = self.config.listen_window_us
        m = max(0, -(-(t - offset - window + 1) // self.cycle_us))
        return offset + m * self.cycle_us

    # sender side

    def _attempt(self, node: int) -> None:
        self._attempt_scheduled[node] = False
        if not self.queues[node]:
            return
        if self.status[node] == NodeStatus.RESPONDING:
            return  # resumes from _idle
        now = self.sim.now
        cfg = self.config
        self.status[node] = NodeStatus.SENDING
        self.stats["attempts"] += 1

        cca_end = now + cfg.cca_us
        self._spend(node, now, cca_end)
        busy_end = self.channel.busy_until(node, now, cca_end)
        if busy_end is not None:
            # sleep through the sensed emission, then back off
            self.stats["cca_busy"] += 1
            self.busy_streak[node] += 1
            window = cfg.cw_min_slots * 2 ** min(self.busy_streak[node] - 1, cfg.max_doublings)
            backoff = int(self.rng.integers(1, window + 1)) * cfg.backoff_slot_us
            self.status[node] = NodeStatus.IDLE
            self._schedule_attempt(node, max(busy_end, cca_end) + backoff)
            return
        self.busy_streak[node] = 0
        self.send_with_strobes(node, self.queues[node][0], cca_end)

    def send_with_strobes(self, sender: int, packet: AlarmPacket, start: int) -> _Attempt:
        """
        Start a strobe train at start and line up the lower-ring neighbors
        that wake up while it lasts, grouped by the strobe they hear first.
        """
        periods = self.preamble_periods
        preamble = self.channel.register(
            Transmission(sender, start, periods * self.period_us, TxKind.STROBE, payload=packet)
        )
        end = preamble.end
        groups: Dict[int, List[int]] = {}
        for r in self.network.lower[sender]:
            wake = self.next_wake(r, start)
            if wake >= end:
                continue
            k = max(0, -(-(wake - start) // self.period_us))
            if k < periods:
                groups.setdefault(k, []).append(r)
        attempt = _Attempt(
            sender=sender,
            packet=packet,
            strobe_start=start,
            periods=periods,
            preamble=preamble,
            groups=sorted(groups.items()),
        )
        self._next_group(attempt)
        return attempt

    def _next_group(self, attempt: _Attempt) -> None:
        if attempt.group_index >= len(attempt.groups):
            self.sim.schedule_at(attempt.preamble.end, self._preamble_exhausted, attempt)
            return
        k, _ = attempt.groups[attempt.group_index]
        strobe_end = attempt.strobe_start + k * self.period_us + self.config.strobe_us
        self.sim.schedule_at(strobe_end, self._strobe_end, attempt)

    def _preamble_exhausted(self, attempt: _Attempt) -> None:
        cfg = self.config
        self._spend(
            attempt.sender, attempt.strobe_start, attempt.preamble.end,
            tx_us=attempt.periods * cfg.strobe_us,
        )
        self._failed(attempt.sender, attempt.packet)

    def _strobe_end(self, attempt: _Attempt) -> None:
        cfg = self.config
        k, candidates = attempt.groups[attempt.group_index]
        attempt.group_index += 1
        strobe_at = attempt.strobe_start + k * self.period_us
        strobe = Transmission(attempt.sender, strobe_at, cfg.strobe_us, TxKind.STROBE, payload=attempt.packet)
        responders = self.gradient_answer(strobe, candidates)
        if not responders:
            self._next_group(attempt)
            return

        response_at = strobe.end
        responses = [
            self.channel.register(Transmission(r, response_at, cfg.response_us, TxKind.ACK))
            for r in responders
        ]
        heard = [
            resp for resp in responses
            if self.channel.reception_outcome(
                resp, attempt.sender,
                [t for t in self.channel.overlapping(resp.start, resp.end) if t is not attempt.preamble],
            ) == Reception.DELIVERED
        ]
        if len(responders) > 1:
            self.stats["collisions"] += 1
        if len(heard) != 1:
            for r in responders:
                self._spend(r, strobe_at, response_at + cfg.response_us, tx_us=cfg.response_us, rx_us=cfg.strobe_us)
            self._next_group(attempt)
            return

        responder = heard[0].sender
        for r in responders:
            if r != responder:
                self._spend(r, strobe_at, response_at + cfg.response_us, tx_us=cfg.response_us, rx_us=cfg.strobe_us)
        self.channel.truncate(attempt.preamble, strobe.end)
        attempt.strobes_sent = k + 1
        self.status[responder] = NodeStatus.RESPONDING
        data = self.channel.register(
            Transmission(attempt.sender, heard[0].end, self.radio.data_us, TxKind.DATA, payload=attempt.packet)
        )
        self.sim.schedule_at(data.end, self._data_end, attempt, responder, data)

    def gradient_answer(self, strobe: Transmission, candidates: List[int]) -> List[int]:
        """Idle candidates that decoded the strobe; more than one means their answers collide."""
        responders = []
        for r in sorted(candidates):
            if self.status[r] != NodeStatus.IDLE:
                continue
            outcome = self.channel.reception_outcome(strobe, r)
            if outcome == Reception.DELIVERED:
                responders.append(r)
        self.channel.trace(strobe, candidates, f"{len(responders)}/{len(candidates)}")
        return responders

    def _data_end(self, attempt: _Attempt, responder: int, data: Transmission) -> None:
        cfg = self.config
        strobe_at = attempt.strobe_start + (attempt.strobes_sent - 1) * self.period_us
        outcome = self.channel.reception_outcome(data, responder)
        self.channel.trace(data, [responder], outcome.value)
        if outcome != Reception.DELIVERED:
            self._spend(responder, strobe_at, data.end, tx_us=cfg.response_us, rx_us=cfg.strobe_us)
            self._idle(responder)
            self._spend(
                attempt.sender, attempt.strobe_start, data.end + cfg.ack_us,
                tx_us=attempt.strobes_sent * cfg.strobe_us + data.duration, rx_us=cfg.response_us,
            )
            self.sim.schedule_at(data.end + cfg.ack_us, self._failed, attempt.sender, attempt.packet)
            return

        ack = self.channel.register(Transmission(responder, data.end, cfg.ack_us, TxKind.ACK, key=data.tx_id))
        self._spend(
            responder, strobe_at, ack.end,
            tx_us=cfg.response_us + cfg.ack_us, rx_us=cfg.strobe_us + data.duration,
        )
        if responder == self.network.sink:
            self.tracker.deliver(self.tracker.forward(attempt.packet, responder), data.end)
        elif attempt.packet.id in self._seen[responder]:
            self.stats["duplicates_suppressed"] += 1
        else:
            self._seen[responder].add(attempt.packet.id)
            super().enqueue(responder, self.tracker.forward(attempt.packet, responder))
        self.sim.schedule_at(ack.end, self._ack_end, attempt, responder, data, ack)

    def _ack_end(self, attempt: _Attempt, responder: int, data: Transmission, ack: Transmission) -> None:
        cfg = self.config
        sender = attempt.sender
        acked = self.channel.reception_outcome(ack, sender) == Reception.DELIVERED
        self._spend(
            sender, attempt.strobe_start, ack.end,
            tx_us=attempt.strobes_sent * cfg.strobe_us + data.duration,
            rx_us=cfg.response_us + (cfg.ack_us if acked else 0),
        )
        self._idle(responder)
        if not acked:
            self.stats["acks_lost"] += 1
            self._failed(sender, attempt.packet)
            return
        self.queues[sender].popleft()
        self.tracker.release(attempt.packet)
        self._idle(sender)

    def _failed(self, sender: int, packet: AlarmPacket) -> None:
        cfg = self.config
        packet.retries_used += 1
        if packet.retries_used > cfg.max_retries:
            self.queues[sender].popleft()
            self.tracker.drop(packet, "retries-exhausted")
            self._idle(sender)
            return
        packet.retx_total += 1
        self.status[sender] = NodeStatus.IDLE
        self._schedule_attempt(sender, self.sim.now + self.retry_backoff_us(packet.retries_used))

    def retry_backoff_us(self, failures: int) -> int:
        """Random wait before the next train: up to 1, 2, 4, ... cycles after 1, 2, 3, ... failures."""
        cfg = self.config
        window_us = self.cycle_us * 2 ** min(failures - 1, cfg.max_doublings)
        return int(self.rng.integers(1, window_us // cfg.backoff_slot_us + 1)) * cfg.backoff_slot_us

    # periodic sampling

    def sampling_us(self, node: int, horizon_us: int) -> int:
        """Listen time of node's periodic windows before horizon, minus what busy intervals already cover."""
        offset = self.wake_offset[node]
        window = self.config.listen_window_us
        if offset >= horizon_us:
            return 0
        count = -(-(horizon_us - offset) // self.cycle_us)
        total = 0
        for m in range(count):
            start = offset + m * self.cycle_us
            total += min(window, horizon_us - start)

        merged: List[List[int]] = []
        for a, b in sorted(self._busy[node].intervals):
            if merged and a <= merged[-1][1]:
                merged[-1][1] = max(merged[-1][1], b)
            else:
                merged.append([a, b])
        for a, b in merged:
            first = max(0, (a - offset - window) // self.cycle_us)
            last = min(count - 1, (b - 1 - offset) // self.cycle_us)
            for m in range(first, last + 1):
                start = offset + m * self.cycle_us
                end = min(start + window, horizon_us)
                total -= max(0, min(end, b) - max(start, a))
        return max(0, total)

    def finalize(self, horizon_us: int) -> None:
        for v in range(self.network.size):
            self.ledger.account(v, EnergyState.LISTEN, self.sampling_us(v, horizon_us))
        super().finalize(horizon_us)

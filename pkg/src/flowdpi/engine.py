"""Two-stage inspection pipeline over an offline packet replay.

Stage one checks each new flow's observed source IP against the
blacklist.  Stage two samples the first w packets of every m-packet
epoch per flow, classifies unencrypted sampled payloads, feeds the hit
count back into the adaptive sampler, and classifies encrypted flows
from their metadata.  Block actions are simulated verdict events.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from typing import Iterable, Optional

from . import logistic, tree
from .blacklist import Blacklist, check_flow
from .encflow import EncryptedFlowRecord, FlowRowError, encode, read_flow_csv
from .flows import (Direction, FlowKey, FlowParseError, PacketRecord, Verdict,
                    VerdictKind, VerdictReason, packet_from_json_line)
from .sampler import AdaptiveSampler, SamplerConfig
from .textfeat import Featurizer

log = logging.getLogger(__name__)


class EngineConfigError(ValueError):
    """Engine wired up with inconsistent models or parameters."""


class ReplayDataError(ValueError):
    """Malformed input record in strict replay mode."""


@dataclass(frozen=True)
class EngineConfig:
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    block_threshold: float = 0.5
    block_on_first_hit: bool = True
    window_hit_block_count: int = 1   # used when block_on_first_hit is off
    check_both_endpoints: bool = False

    def __post_init__(self):
        if not 0.0 < self.block_threshold < 1.0:
            raise EngineConfigError("block_threshold must be in (0,1)")
        if self.window_hit_block_count < 1:
            raise EngineConfigError("window_hit_block_count must be >= 1")


@dataclass
class FlowState:
    key: FlowKey
    sampler: AdaptiveSampler
    current_window: int
    packets_in_epoch: int = 0
    window_hits: int = 0
    max_window_score: float = 0.0
    epoch_index: int = 0
    blocked: bool = False


@dataclass
class EngineReport:
    flows_seen: int = 0
    packets_seen: int = 0
    packets_sampled: int = 0
    packets_dropped: int = 0
    encrypted_flows: int = 0
    blacklist_blocks: int = 0
    classifier_blocks: int = 0
    alerts: int = 0
    actions: list[Verdict] = field(default_factory=list)
    errors: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "flows_seen": self.flows_seen,
            "packets_seen": self.packets_seen,
            "packets_sampled": self.packets_sampled,
            "packets_dropped": self.packets_dropped,
            "encrypted_flows": self.encrypted_flows,
            "blacklist_blocks": self.blacklist_blocks,
            "classifier_blocks": self.classifier_blocks,
            "alerts": self.alerts,
            "actions": [v.to_dict() for v in self.actions],
            "errors": list(self.errors),
        }


def write_actions_csv(report: EngineReport, fp) -> None:
    writer = csv.writer(fp)
    writer.writerow(["ts", "flow", "kind", "reason", "score"])
    for v in report.actions:
        writer.writerow([
            "" if v.timestamp is None else repr(v.timestamp),
            str(v.flow), v.kind.value, v.reason.value,
            "" if v.score is None else repr(v.score),
        ])


class Engine:
    """Holds per-flow state and emits verdicts for replayed traffic."""

    def __init__(self, blacklist: Blacklist, featurizer: Featurizer,
                 payload_model: logistic.LogisticModel,
                 tree_model: Optional[tree.DecisionTreeModel] = None,
                 config: EngineConfig = EngineConfig()):
        if payload_model.dim != featurizer.dim:
            raise EngineConfigError(
                f"payload model dimension {payload_model.dim} does not "
                f"match featurizer dimension {featurizer.dim}")
        self.blacklist = blacklist
        self.featurizer = featurizer
        self.payload_model = payload_model
        self.tree_model = tree_model
        self.config = config
        self.report = EngineReport()
        self._flows: dict[FlowKey, FlowState] = {}

    def _emit(self, verdict: Verdict) -> Verdict:
        self.report.actions.append(verdict)
        if verdict.kind is VerdictKind.BLOCK:
            if verdict.reason is VerdictReason.BLACKLIST:
                self.report.blacklist_blocks += 1
            else:
                self.report.classifier_blocks += 1
        elif verdict.kind is VerdictKind.ALERT:
            self.report.alerts += 1
        return verdict

    def _new_flow(self, packet: PacketRecord) -> FlowState:
        self.report.flows_seen += 1
        sampler = AdaptiveSampler(self.config.sampler)
        state = FlowState(packet.flow, sampler, sampler.current_window)
        self._flows[packet.flow] = state
        return state

    def process_packet(self, packet: PacketRecord) -> Optional[Verdict]:
        state = self._flows.get(packet.flow)
        new_flow = state is None
        if new_flow:
            state = self._new_flow(packet)
        self.report.packets_seen += 1
        if new_flow:
            # blacklist check happens once, on flow creation
            src = (packet.flow.src_ip if packet.direction is Direction.FORWARD
                   else packet.flow.dst_ip)
            if check_flow(self.blacklist, packet.flow, src,
                          self.config.check_both_endpoints):
                state.blocked = True
                return self._emit(Verdict(VerdictKind.BLOCK, packet.flow,
                                          VerdictReason.BLACKLIST,
                                          timestamp=packet.timestamp))
        if state.blocked:
            self.report.packets_dropped += 1
            return None

        position = state.packets_in_epoch
        state.packets_in_epoch += 1
        verdict = None
        if position < state.current_window and not packet.encrypted:
            self.report.packets_sampled += 1
            vec = self.featurizer.featurize(packet.payload_text())
            score = float(logistic.predict_proba(self.payload_model,
                                                 vec.to_dense())[0])
            if score >= self.config.block_threshold:
                state.window_hits += 1
                state.max_window_score = max(state.max_window_score, score)
                if self.config.block_on_first_hit:
                    state.blocked = True
                    return self._emit(Verdict(
                        VerdictKind.BLOCK, packet.flow,
                        VerdictReason.PAYLOAD_CLASSIFIER, score,
                        packet.timestamp))
                verdict = self._emit(Verdict(
                    VerdictKind.ALERT, packet.flow,
                    VerdictReason.PAYLOAD_CLASSIFIER, score,
                    packet.timestamp))

        if state.packets_in_epoch >= self.config.sampler.m:
            delta = state.window_hits
            max_score = state.max_window_score
            state.current_window = state.sampler.step(delta)
            state.packets_in_epoch = 0
            state.window_hits = 0
            state.max_window_score = 0.0
            state.epoch_index += 1
            if (not self.config.block_on_first_hit
                    and delta >= self.config.window_hit_block_count):
                state.blocked = True
                verdict = self._emit(Verdict(
                    VerdictKind.BLOCK, packet.flow,
                    VerdictReason.PAYLOAD_CLASSIFIER, max_score,
                    packet.timestamp))
        return verdict

    def process_encrypted_flow(self,
                               record: EncryptedFlowRecord) -> Verdict:
        if self.tree_model is None:
            raise EngineConfigError(
                "encrypted-flow classification requires a tree model")
        self.report.encrypted_flows += 1
        klass, proba = tree.predict_one(self.tree_model, encode(record))
        if klass == 1:
            return self._emit(Verdict(VerdictKind.BLOCK, record.flow,
                                      VerdictReason.ENCRYPTED_CLASSIFIER,
                                      proba))
        return Verdict(VerdictKind.PASS, record.flow,
                       VerdictReason.ENCRYPTED_CLASSIFIER, proba)

    def run_replay(self, packet_lines: Iterable[str],
                   flow_lines: Optional[Iterable[str]] = None,
                   strict: bool = False) -> EngineReport:
        """Process a packet JSONL stream (in timestamp order) and then an
        optional encrypted-flow CSV.  Malformed records are reported with
        their line numbers; strict mode aborts instead."""
        if flow_lines is not None and self.tree_model is None:
            raise EngineConfigError(
                "flow stream given but no tree model loaded")
        packets = []
        for line_no, line in enumerate(packet_lines, start=1):
            if not line.strip():
                continue
            try:
                packets.append((line_no, packet_from_json_line(line)))
            except FlowParseError as exc:
                message = f"packet line {line_no}: {exc}"
                if strict:
                    raise ReplayDataError(message) from exc
                log.warning("%s", message)
                self.report.errors.append(message)
        packets.sort(key=lambda item: item[1].timestamp)
        for _, packet in packets:
            self.process_packet(packet)
        if flow_lines is not None:
            records = read_flow_csv(flow_lines)
            while True:
                try:
                    record = next(records)
                except StopIteration:
                    break
                except FlowRowError as exc:
                    message = f"flow csv: {exc}"
                    if strict:
                        raise ReplayDataError(message) from exc
                    log.warning("%s", message)
                    self.report.errors.append(message)
                    continue
                self.process_encrypted_flow(record)
        return self.report

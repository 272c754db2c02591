import json

import numpy as np
import pytest

from flowdpi import logistic
from flowdpi.blacklist import load_blacklist
from flowdpi.encflow import parse_flow_row
from flowdpi.engine import (Engine, EngineConfig, EngineConfigError,
                            ReplayDataError, write_actions_csv)
from flowdpi.flows import (VerdictKind, VerdictReason, packet_from_json_line,
                           packet_to_json_line)
from flowdpi.textfeat import fit_featurizer, stack_dense
from flowdpi.tree import DecisionTreeModel, TreeNode
from synth import benign_payload, labeled_corpus, malicious_payload

SEED = 42


@pytest.fixture(scope="module")
def payload_classifier():
    rng = np.random.default_rng(SEED)
    payloads, y = labeled_corpus(rng, 150, 80)
    featurizer = fit_featurizer(payloads)
    X = stack_dense([featurizer.featurize(p) for p in payloads])
    model, _ = logistic.train(X, y, logistic.LogisticHyper(lam=0.01))
    return featurizer, model


@pytest.fixture()
def hand_tree():
    # two leaves: ttl <= 100 benign, otherwise malicious
    return DecisionTreeModel(
        nodes=[TreeNode(feature=1, threshold=100.0, left=1, right=2),
               TreeNode(klass=0, proba=0.0),
               TreeNode(klass=1, proba=1.0)],
        n_features=8, max_depth=1, min_samples_split=2)


def make_engine(payload_classifier, blacklist_lines=(), tree_model=None,
                **cfg):
    featurizer, model = payload_classifier
    return Engine(load_blacklist(blacklist_lines), featurizer, model,
                  tree_model, EngineConfig(**cfg))


def packet_line(src, payload="", ts=0.0, sport=40000, dst="10.0.9.9",
                dport=80, encrypted=False):
    return packet_to_json_line(src, sport, dst, dport, "TCP", ts, payload,
                               encrypted)


def stream(src, payloads, sport=40000):
    return [packet_line(src, p, ts=float(i), sport=sport)
            for i, p in enumerate(payloads)]


def test_blacklisted_source_blocked_on_first_packet(payload_classifier):
    engine = make_engine(payload_classifier, ["10.0.0.5"])
    pkt = packet_from_json_line(packet_line("10.0.0.5", "/index.html"))
    verdict = engine.process_packet(pkt)
    assert verdict.kind is VerdictKind.BLOCK
    assert verdict.reason is VerdictReason.BLACKLIST
    assert engine.report.blacklist_blocks == 1
    assert engine.report.packets_sampled == 0
    # subsequent packets on the blocked flow are dropped silently
    assert engine.process_packet(pkt) is None
    assert engine.report.packets_dropped == 1


def test_blacklist_checked_only_on_flow_creation(payload_classifier):
    engine = make_engine(payload_classifier, [])
    rng = np.random.default_rng(0)
    for line in stream("10.0.0.6", [benign_payload(rng) for _ in range(5)]):
        engine.process_packet(packet_from_json_line(line))
    assert engine.report.flows_seen == 1
    assert engine.report.blacklist_blocks == 0


def test_benign_epoch_samples_window_and_records_delta(payload_classifier):
    engine = make_engine(payload_classifier)
    rng = np.random.default_rng(1)
    for line in stream("10.0.0.7", [benign_payload(rng)
                                    for _ in range(100)]):
        verdict = engine.process_packet(packet_from_json_line(line))
        assert verdict is None
    assert engine.report.packets_seen == 100
    assert engine.report.packets_sampled == 5   # w_init = w_min = 5
    state = next(iter(engine._flows.values()))
    assert list(state.sampler.history) == [(5, 0)]
    assert state.epoch_index == 1


def test_planted_malicious_payload_blocks(payload_classifier):
    rng = np.random.default_rng(2)
    payloads = [benign_payload(rng) for _ in range(100)]
    payloads[3] = malicious_payload(rng)
    engine = make_engine(payload_classifier)
    verdicts = [engine.process_packet(packet_from_json_line(line))
                for line in stream("10.0.0.8", payloads)]
    blocks = [v for v in verdicts if v is not None]
    assert len(blocks) == 1
    assert blocks[0].kind is VerdictKind.BLOCK
    assert blocks[0].reason is VerdictReason.PAYLOAD_CLASSIFIER
    assert blocks[0].score >= 0.5
    assert engine.report.classifier_blocks == 1
    # everything after the block is dropped
    assert engine.report.packets_dropped == 96


def test_malicious_payload_outside_window_not_inspected(payload_classifier):
    rng = np.random.default_rng(3)
    payloads = [benign_payload(rng) for _ in range(100)]
    payloads[50] = malicious_payload(rng)   # past the 5-packet window
    engine = make_engine(payload_classifier)
    for line in stream("10.0.0.9", payloads):
        assert engine.process_packet(packet_from_json_line(line)) is None
    assert engine.report.classifier_blocks == 0


def test_encrypted_packets_not_payload_inspected(payload_classifier):
    rng = np.random.default_rng(4)
    engine = make_engine(payload_classifier)
    lines = [packet_line("10.0.1.1", malicious_payload(rng), ts=float(i),
                         encrypted=True) for i in range(10)]
    for line in lines:
        assert engine.process_packet(packet_from_json_line(line)) is None
    assert engine.report.packets_sampled == 0


def test_count_blocking_mode(payload_classifier):
    rng = np.random.default_rng(5)
    payloads = [benign_payload(rng) for _ in range(100)]
    payloads[0] = malicious_payload(rng)
    payloads[1] = malicious_payload(rng)
    engine = make_engine(payload_classifier, block_on_first_hit=False,
                         window_hit_block_count=2)
    verdicts = [engine.process_packet(packet_from_json_line(line))
                for line in stream("10.0.1.2", payloads)]
    emitted = [v for v in verdicts if v is not None]
    kinds = [v.kind for v in emitted]
    assert kinds.count(VerdictKind.ALERT) == 2
    assert kinds.count(VerdictKind.BLOCK) == 1   # at the epoch boundary
    assert engine.report.alerts == 2
    assert engine.report.classifier_blocks == 1


def test_window_hits_match_offline_recount(payload_classifier):
    featurizer, model = payload_classifier
    rng = np.random.default_rng(6)
    payloads = [benign_payload(rng) if rng.random() < 0.6
                else malicious_payload(rng) for _ in range(100)]
    engine = make_engine(payload_classifier, block_on_first_hit=False,
                         window_hit_block_count=50)
    for line in stream("10.0.1.3", payloads):
        engine.process_packet(packet_from_json_line(line))
    state = next(iter(engine._flows.values()))
    recount = sum(
        logistic.predict_proba(model,
                               featurizer.featurize(p).to_dense())[0] >= 0.5
        for p in payloads[:5])
    assert list(state.sampler.history) == [(5, int(recount))]


def test_process_encrypted_flow_paths(payload_classifier, hand_tree):
    engine = make_engine(payload_classifier, tree_model=hand_tree)
    row = {"src_ip": "10.0.0.1", "src_port": "40000", "dst_ip": "10.0.0.2",
           "dst_port": "443", "proto": "TCP", "tls_version": "TLS1.0",
           "duration": "1.0", "fwd_pkts": "5", "bwd_pkts": "5"}
    benign = parse_flow_row(dict(row, ttl="64"), 1)
    botnet = parse_flow_row(dict(row, ttl="128"), 2)
    assert engine.process_encrypted_flow(benign).kind is VerdictKind.PASS
    verdict = engine.process_encrypted_flow(botnet)
    assert verdict.kind is VerdictKind.BLOCK
    assert verdict.reason is VerdictReason.ENCRYPTED_CLASSIFIER
    assert verdict.score == 1.0


def test_encrypted_flow_without_tree_is_config_error(payload_classifier,
                                                     hand_tree):
    engine = make_engine(payload_classifier)
    row = {"src_ip": "10.0.0.1", "src_port": "40000", "dst_ip": "10.0.0.2",
           "dst_port": "443", "proto": "TCP", "tls_version": "TLS1.0",
           "ttl": "64", "duration": "1.0", "fwd_pkts": "5", "bwd_pkts": "5"}
    record = parse_flow_row(row, 1)
    with pytest.raises(EngineConfigError):
        engine.process_encrypted_flow(record)
    with pytest.raises(EngineConfigError):
        engine.run_replay([], flow_lines=["header"])


def test_dimension_mismatch_is_startup_error(payload_classifier):
    featurizer, _ = payload_classifier
    bad_model = logistic.LogisticModel(np.zeros(3), 0.0, 1.0)
    with pytest.raises(EngineConfigError):
        Engine(load_blacklist([]), featurizer, bad_model)


def test_replay_empty_streams(payload_classifier):
    engine = make_engine(payload_classifier)
    report = engine.run_replay([])
    assert report.flows_seen == 0 and report.packets_seen == 0
    assert report.actions == []


def test_replay_counts_flows_and_packets(payload_classifier):
    rng = np.random.default_rng(7)
    lines = []
    for i in range(3):
        lines += stream(f"10.0.2.{i}",
                        [benign_payload(rng) for _ in range(100)],
                        sport=41000 + i)
    engine = make_engine(payload_classifier)
    report = engine.run_replay(lines)
    assert report.flows_seen == 3
    assert report.packets_seen == 300


def test_replay_orders_by_timestamp(payload_classifier):
    # the blacklist fires on the flow's earliest packet even when the
    # stream file is shuffled
    lines = [packet_line("10.0.9.9", "/a", ts=5.0, sport=80,
                         dst="10.0.3.1", dport=40000),
             packet_line("10.0.3.1", "/b", ts=1.0, sport=40000, dport=80)]
    engine = make_engine(payload_classifier, ["10.0.3.1"])
    report = engine.run_replay(lines)
    assert report.blacklist_blocks == 1


def test_replay_determinism(payload_classifier):
    rng = np.random.default_rng(8)
    lines = []
    for i in range(3):
        payloads = [benign_payload(rng) if rng.random() < 0.8
                    else malicious_payload(rng) for _ in range(150)]
        lines += stream(f"10.0.4.{i}", payloads, sport=42000 + i)
    docs = []
    for _ in range(2):
        engine = make_engine(payload_classifier, ["10.0.4.0"])
        docs.append(json.dumps(engine.run_replay(list(lines)).to_dict()))
    assert docs[0] == docs[1]


def test_replay_lenient_vs_strict(payload_classifier):
    lines = ["not json", packet_line("10.0.5.1", "/ok")]
    engine = make_engine(payload_classifier)
    report = engine.run_replay(lines)
    assert report.packets_seen == 1
    assert len(report.errors) == 1 and "line 1" in report.errors[0]
    engine = make_engine(payload_classifier)
    with pytest.raises(ReplayDataError):
        engine.run_replay(lines, strict=True)


def test_counters_consistent_with_action_log(payload_classifier):
    rng = np.random.default_rng(9)
    lines = []
    for i in range(4):
        payloads = [benign_payload(rng) if rng.random() < 0.7
                    else malicious_payload(rng) for _ in range(60)]
        lines += stream(f"10.0.6.{i}", payloads, sport=43000 + i)
    engine = make_engine(payload_classifier, ["10.0.6.2"])
    report = engine.run_replay(lines)
    by_kind_reason = {}
    for v in report.actions:
        by_kind_reason[(v.kind, v.reason)] = \
            by_kind_reason.get((v.kind, v.reason), 0) + 1
    assert report.blacklist_blocks == by_kind_reason.get(
        (VerdictKind.BLOCK, VerdictReason.BLACKLIST), 0)
    assert report.classifier_blocks == sum(
        n for (k, r), n in by_kind_reason.items()
        if k is VerdictKind.BLOCK and r is not VerdictReason.BLACKLIST)
    assert report.alerts == sum(n for (k, _), n in by_kind_reason.items()
                                if k is VerdictKind.ALERT)


def test_actions_csv_shape(payload_classifier, tmp_path):
    engine = make_engine(payload_classifier, ["10.0.7.1"])
    engine.run_replay([packet_line("10.0.7.1", "/x")])
    out = tmp_path / "actions.csv"
    with open(out, "w", newline="") as fp:
        write_actions_csv(engine.report, fp)
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "ts,flow,kind,reason,score"
    assert len(lines) == 2 and "blacklist" in lines[1]

import json

import numpy as np
import pytest

from flowdpi import persistence
from flowdpi.cli import main
from flowdpi.flows import packet_to_json_line
from flowdpi.sampler import SamplerConfig, trace
from synth import (benign_payload, flow_csv_rows, labeled_corpus,
                   malicious_payload)


@pytest.fixture(scope="module")
def corpus_file(tmp_path_factory):
    rng = np.random.default_rng(42)
    payloads, y = labeled_corpus(rng, 120, 60)
    path = tmp_path_factory.mktemp("data") / "corpus.jsonl"
    with open(path, "w") as fp:
        for p, label in zip(payloads, y):
            fp.write(json.dumps({"payload": p, "label": int(label)}) + "\n")
    return path


@pytest.fixture(scope="module")
def flows_file(tmp_path_factory):
    rows = flow_csv_rows(np.random.default_rng(43), 80, 40)
    path = tmp_path_factory.mktemp("data") / "flows.csv"
    path.write_text("\n".join(rows) + "\n")
    return path


@pytest.fixture(scope="module")
def payload_model_file(corpus_file, tmp_path_factory):
    out = tmp_path_factory.mktemp("models") / "payload.json"
    assert main(["train-payload", str(corpus_file), str(out),
                 "--lambda", "0.01"]) == 0
    return out


@pytest.fixture(scope="module")
def tree_model_file(flows_file, tmp_path_factory):
    out = tmp_path_factory.mktemp("models") / "tree.json"
    assert main(["train-encrypted", str(flows_file), str(out)]) == 0
    return out


class TestTrainPayload:
    def test_prints_cv_table_and_writes_model(self, corpus_file, tmp_path,
                                              capsys):
        out = tmp_path / "model.json"
        assert main(["train-payload", str(corpus_file), str(out),
                     "--lambda", "0.01"]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[0].startswith("fold")
        assert sum(1 for ln in lines if ln.startswith("mean")) == 1
        assert len([ln for ln in lines
                    if ln.strip()[:1].isdigit()]) == 5   # default 5 folds
        assert persistence.peek_schema(out) == persistence.PAYLOAD_SCHEMA

    def test_same_seed_reproduces_model_bytes(self, corpus_file, tmp_path):
        outs = [tmp_path / "a.json", tmp_path / "b.json"]
        for out in outs:
            assert main(["train-payload", str(corpus_file), str(out),
                         "--seed", "7"]) == 0
        assert outs[0].read_bytes() == outs[1].read_bytes()

    def test_empty_corpus_is_data_error(self, tmp_path):
        empty = tmp_path / "empty.jsonl"
        empty.write_text("")
        assert main(["train-payload", str(empty),
                     str(tmp_path / "m.json")]) == 2

    def test_single_class_is_data_error(self, tmp_path):
        path = tmp_path / "one.jsonl"
        path.write_text('{"payload": "/a", "label": 0}\n' * 10)
        assert main(["train-payload", str(path),
                     str(tmp_path / "m.json")]) == 2

    def test_malformed_record_is_data_error(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text('{"payload": "/a"}\n')
        assert main(["train-payload", str(path),
                     str(tmp_path / "m.json")]) == 2


class TestTrainEncrypted:
    def test_writes_tree_model(self, flows_file, tmp_path, capsys):
        out = tmp_path / "tree.json"
        assert main(["train-encrypted", str(flows_file), str(out)]) == 0
        assert persistence.peek_schema(out) == persistence.TREE_SCHEMA
        assert "mean" in capsys.readouterr().out

    def test_unlabeled_rows_are_data_error(self, tmp_path):
        rows = flow_csv_rows(np.random.default_rng(0), 5, 5,
                             with_label=False)
        path = tmp_path / "flows.csv"
        path.write_text("\n".join(rows) + "\n")
        assert main(["train-encrypted", str(path),
                     str(tmp_path / "t.json")]) == 2


class TestEval:
    def test_payload_model_report_and_curves(self, payload_model_file,
                                             corpus_file, tmp_path, capsys):
        report_out = tmp_path / "report.json"
        assert main(["eval", str(payload_model_file), str(corpus_file),
                     "--report-out", str(report_out)]) == 0
        report = json.loads(report_out.read_text())
        assert sum(report["confusion"].values()) == 180
        assert report["metrics"]["accuracy"] >= 0.95
        assert report["auc"] >= 0.99
        roc = (tmp_path / "report.roc.csv").read_text().splitlines()
        assert roc[0] == "threshold,fpr,tpr"
        # repr round-trip: the curve in the CSV matches the report exactly
        parsed = [[float(c) for c in row.split(",")] for row in roc[1:]]
        assert parsed == report["roc_points"]
        pr = (tmp_path / "report.pr.csv").read_text().splitlines()
        assert pr[0] == "threshold,recall,precision"
        assert "auc=" in capsys.readouterr().out

    def test_tree_model_on_flow_csv(self, tree_model_file, flows_file,
                                    tmp_path):
        report_out = tmp_path / "report.json"
        assert main(["eval", str(tree_model_file), str(flows_file),
                     "--report-out", str(report_out)]) == 0
        report = json.loads(report_out.read_text())
        assert report["metrics"]["accuracy"] >= 0.95

    def test_tampered_model_dimension_is_model_error(self, payload_model_file,
                                                     corpus_file, tmp_path):
        doc = json.loads(payload_model_file.read_text())
        doc["weights"] = doc["weights"][:-1]
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps(doc))
        assert main(["eval", str(bad), str(corpus_file),
                     "--report-out", str(tmp_path / "r.json")]) == 3

    def test_unknown_schema_is_model_error(self, corpus_file, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text('{"schema": "nonsense/9"}')
        assert main(["eval", str(bad), str(corpus_file),
                     "--report-out", str(tmp_path / "r.json")]) == 3


class TestReplay:
    def _write_streams(self, tmp_path):
        rng = np.random.default_rng(10)
        lines = []
        for i in range(3):
            payloads = [benign_payload(rng) for _ in range(60)]
            if i == 2:
                payloads[1] = malicious_payload(rng)
            for j, p in enumerate(payloads):
                lines.append(packet_to_json_line(
                    f"10.1.0.{i}", 40000 + i, "10.9.9.9", 80, "TCP",
                    float(j), p))
        packets = tmp_path / "packets.jsonl"
        packets.write_text("\n".join(lines) + "\n")
        blacklist = tmp_path / "blacklist.txt"
        blacklist.write_text("10.1.0.0/32\n")
        return packets, blacklist

    def test_end_to_end(self, payload_model_file, tree_model_file, tmp_path,
                        flows_file):
        packets, blacklist = self._write_streams(tmp_path)
        report_out = tmp_path / "report.json"
        actions_out = tmp_path / "actions.csv"
        assert main(["replay", "--packets", str(packets),
                     "--blacklist", str(blacklist),
                     "--payload-model", str(payload_model_file),
                     "--flows", str(flows_file),
                     "--tree-model", str(tree_model_file),
                     "--report-out", str(report_out),
                     "--actions-out", str(actions_out)]) == 0
        report = json.loads(report_out.read_text())
        assert report["flows_seen"] == 3
        assert report["blacklist_blocks"] == 1
        assert report["classifier_blocks"] >= 1
        assert report["encrypted_flows"] == 120
        actions = actions_out.read_text().splitlines()
        assert actions[0] == "ts,flow,kind,reason,score"
        assert len(actions) == 1 + len(report["actions"])

    def test_flows_without_tree_model_is_model_error(self, payload_model_file,
                                                     flows_file, tmp_path):
        packets, blacklist = self._write_streams(tmp_path)
        assert main(["replay", "--packets", str(packets),
                     "--blacklist", str(blacklist),
                     "--payload-model", str(payload_model_file),
                     "--flows", str(flows_file),
                     "--report-out", str(tmp_path / "r.json"),
                     "--actions-out", str(tmp_path / "a.csv")]) == 3

    def test_strict_mode_rejects_bad_packet_line(self, payload_model_file,
                                                 tmp_path):
        packets = tmp_path / "packets.jsonl"
        packets.write_text("garbage\n")
        blacklist = tmp_path / "blacklist.txt"
        blacklist.write_text("")
        args = ["replay", "--packets", str(packets),
                "--blacklist", str(blacklist),
                "--payload-model", str(payload_model_file),
                "--report-out", str(tmp_path / "r.json"),
                "--actions-out", str(tmp_path / "a.csv")]
        assert main(args) == 0   # lenient: logged, not fatal
        report = json.loads((tmp_path / "r.json").read_text())
        assert len(report["errors"]) == 1
        assert main(args + ["--strict"]) == 2


class TestSampleTrace:
    def test_matches_library_trace(self, tmp_path, capsys):
        deltas = [0, 1, 3, 2, 0, 5, 4, 1]
        inp = tmp_path / "deltas.csv"
        inp.write_text("delta\n" + "\n".join(map(str, deltas)) + "\n")
        assert main(["sample-trace", str(inp)]) == 0
        out_lines = capsys.readouterr().out.strip().splitlines()
        assert out_lines[0] == "step,w,delta,delta_hat,dw_next"
        expected = trace(SamplerConfig(), deltas)
        assert len(out_lines) == 1 + len(expected)
        for line, row in zip(out_lines[1:], expected):
            cells = line.split(",")
            assert int(cells[0]) == row.step
            assert int(cells[1]) == row.w
            assert int(cells[2]) == row.delta
            if row.predicted is None:
                assert cells[3] == ""
            else:
                assert float(cells[3]) == row.predicted

    def test_output_file_and_custom_bounds(self, tmp_path):
        inp = tmp_path / "deltas.csv"
        inp.write_text("0\n0\n0\n0\n")
        out = tmp_path / "trace.csv"
        assert main(["sample-trace", str(inp), "--output", str(out),
                     "--w-min", "6", "--w-max", "12"]) == 0
        rows = out.read_text().strip().splitlines()
        assert rows[1].startswith("0,6,0")   # w_init follows w_min
        assert all(6 <= int(r.split(",")[1]) <= 12 for r in rows[1:])

    def test_headerless_and_empty_input(self, tmp_path, capsys):
        inp = tmp_path / "deltas.csv"
        inp.write_text("0\n1\n")
        assert main(["sample-trace", str(inp)]) == 0
        assert len(capsys.readouterr().out.strip().splitlines()) == 3
        inp.write_text("")
        assert main(["sample-trace", str(inp)]) == 0
        assert capsys.readouterr().out.strip() == \
            "step,w,delta,delta_hat,dw_next"

    def test_non_integer_delta_is_data_error(self, tmp_path):
        inp = tmp_path / "deltas.csv"
        inp.write_text("delta\nx\n")
        assert main(["sample-trace", str(inp)]) == 2


class TestUsageAndConfig:
    def test_unknown_flag_is_usage_error(self, corpus_file, tmp_path):
        assert main(["train-payload", str(corpus_file),
                     str(tmp_path / "m.json"), "--bogus"]) == 1

    def test_missing_subcommand_is_usage_error(self):
        assert main([]) == 1

    def test_help_exits_zero(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["--help"])
        assert exc.value.code == 0
        assert "train-payload" in capsys.readouterr().out

    def test_config_file_supplies_defaults(self, tmp_path, capsys):
        cfg = tmp_path / "conf.ini"
        cfg.write_text("w-min = 7   # comment\nw_max = 9\n")
        inp = tmp_path / "deltas.csv"
        inp.write_text("0\n")
        assert main(["sample-trace", str(inp), "--config", str(cfg)]) == 0
        assert ",7,0," in capsys.readouterr().out.splitlines()[1]

    def test_cli_flag_overrides_config_file(self, tmp_path, capsys):
        cfg = tmp_path / "conf.ini"
        cfg.write_text("w-min = 7\n")
        inp = tmp_path / "deltas.csv"
        inp.write_text("0\n")
        assert main(["sample-trace", str(inp), "--config", str(cfg),
                     "--w-min", "8"]) == 0
        assert ",8,0," in capsys.readouterr().out.splitlines()[1]

    def test_unknown_config_key_is_usage_error(self, tmp_path):
        cfg = tmp_path / "conf.ini"
        cfg.write_text("bogus = 1\n")
        inp = tmp_path / "deltas.csv"
        inp.write_text("0\n")
        assert main(["sample-trace", str(inp), "--config", str(cfg)]) == 1

    def test_missing_config_file_is_data_error(self, tmp_path):
        inp = tmp_path / "deltas.csv"
        inp.write_text("0\n")
        assert main(["sample-trace", str(inp),
                     "--config", str(tmp_path / "absent.ini")]) == 2

    def test_invalid_sampler_bounds_is_model_error(self, tmp_path):
        inp = tmp_path / "deltas.csv"
        inp.write_text("0\n")
        assert main(["sample-trace", str(inp),
                     "--w-min", "10", "--w-max", "5"]) == 3

#!/usr/bin/env python3
"""Generate synthetic inputs for the flowdpi pipeline.

Writes a labeled payload corpus (JSONL), an encrypted-flow CSV, a packet
stream (JSONL) and an IP blacklist into a target directory. The stream
contains a couple of blacklisted sources and a few flows with an attack
payload planted inside the sampled window, so a replay produces visible
blocks.
"""

from __future__ import annotations

import argparse
import json
from pathlib import Path

import numpy as np

from flowdpi.flows import packet_to_json_line

BENIGN_WORDS = ["index", "home", "blog", "post", "static", "css", "main",
                "about", "news", "images", "login", "search", "article",
                "profile", "archive", "contact", "help", "docs"]
BENIGN_EXT = [".html", ".css", ".js", ".png", ".php", ""]
ATTACK_TOKENS = ["' OR 1=1 --", "<script>alert(1)</script>",
                 "UNION SELECT password FROM users",
                 "../../../etc/passwd", "; DROP TABLE users; --",
                 "cmd.exe /c dir", "<img src=x onerror=alert(1)>"]

FLOW_HEADER = ("src_ip,src_port,dst_ip,dst_port,proto,tls_version,ttl,"
               "duration,fwd_pkts,bwd_pkts,label")


def benign_payload(rng: np.random.Generator) -> str:
    parts = rng.choice(BENIGN_WORDS, size=rng.integers(1, 4))
    return "/" + "/".join(parts) + BENIGN_EXT[rng.integers(0,
                                                           len(BENIGN_EXT))]


def malicious_payload(rng: np.random.Generator) -> str:
    token = ATTACK_TOKENS[rng.integers(0, len(ATTACK_TOKENS))]
    return benign_payload(rng) + "?q=" + token


def write_corpus(path: Path, rng, n_benign: int, n_malicious: int) -> None:
    with open(path, "w", encoding="utf-8") as fp:
        for _ in range(n_benign):
            fp.write(json.dumps({"payload": benign_payload(rng),
                                 "label": 0}) + "\n")
        for _ in range(n_malicious):
            fp.write(json.dumps({"payload": malicious_payload(rng),
                                 "label": 1}) + "\n")


def write_flows(path: Path, rng, n_benign: int, n_botnet: int) -> None:
    def ip():
        return "10.%d.%d.%d" % tuple(rng.integers(0, 255, size=3))

    rows = [FLOW_HEADER]
    for _ in range(n_benign):
        rows.append(f"{ip()},{rng.integers(20000, 60000)},{ip()},443,TCP,"
                    f"TLS1.2,{rng.integers(55, 70)},"
                    f"{rng.uniform(10, 60):.3f},{rng.integers(10, 50)},"
                    f"{rng.integers(10, 50)},benign")
    for _ in range(n_botnet):
        rows.append(f"{ip()},{rng.integers(20000, 60000)},{ip()},"
                    f"{rng.choice([1001, 135, 445])},TCP,TLS1.0,"
                    f"{rng.integers(120, 135)},{rng.uniform(0.01, 0.5):.3f},"
                    f"{rng.integers(50, 200)},{rng.integers(0, 5)},botnet")
    path.write_text("\n".join(rows) + "\n", encoding="utf-8")


def write_stream(packets_path: Path, blacklist_path: Path, rng,
                 n_flows: int, packets_per_flow: int) -> None:
    blacklisted = [f"192.0.2.{i}" for i in range(2)]
    attack_flows = set(rng.choice(np.arange(2, n_flows),
                                  size=min(3, max(0, n_flows - 2)),
                                  replace=False).tolist())
    lines = []
    ts = 0.0
    for i in range(n_flows):
        src = (blacklisted[i] if i < len(blacklisted)
               else f"198.51.100.{i}")
        payloads = [benign_payload(rng) for _ in range(packets_per_flow)]
        if i in attack_flows:
            payloads[int(rng.integers(0, 5))] = malicious_payload(rng)
        for p in payloads:
            lines.append(packet_to_json_line(src, 40000 + i,
                                             "203.0.113.9", 80, "TCP",
                                             ts, p))
            ts += 0.001
    packets_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    blacklist_path.write_text(
        "# synthetic blacklist\n" + "\n".join(blacklisted) + "\n",
        encoding="utf-8")


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("out_dir", type=Path)
    parser.add_argument("--seed", type=int, default=42)
    parser.add_argument("--corpus-size", type=int, default=300,
                        help="benign payloads; half as many malicious")
    parser.add_argument("--flows", type=int, default=200,
                        help="benign encrypted flows; half as many botnet")
    parser.add_argument("--stream-flows", type=int, default=10)
    parser.add_argument("--packets-per-flow", type=int, default=300)
    args = parser.parse_args()

    rng = np.random.default_rng(args.seed)
    args.out_dir.mkdir(parents=True, exist_ok=True)
    write_corpus(args.out_dir / "corpus.jsonl", rng,
                 args.corpus_size, args.corpus_size // 2)
    write_flows(args.out_dir / "flows.csv", rng,
                args.flows, args.flows // 2)
    write_stream(args.out_dir / "packets.jsonl",
                 args.out_dir / "blacklist.txt", rng,
                 args.stream_flows, args.packets_per_flow)
    print(f"wrote corpus.jsonl, flows.csv, packets.jsonl, blacklist.txt "
          f"to {args.out_dir}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

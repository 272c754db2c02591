"""Encrypted-flow metadata parsing and numeric encoding.

Encrypted flows are never decrypted; the classifier sees side-channel
metadata only: TLS version, TTL, duration, ports and packet rate.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Iterator, Optional

import numpy as np

from .flows import FlowKey, canonicalize_flow_key

RATE_EPSILON = 1e-3   # seconds; guards the duration=0 singularity


class TlsVersion(Enum):
    SSL3 = 0
    TLS1_0 = 1
    TLS1_1 = 2
    TLS1_2 = 3
    TLS1_3 = 4
    UNKNOWN = -1


_TLS_ALIASES = {
    "ssl3": TlsVersion.SSL3, "ssl3.0": TlsVersion.SSL3,
    "sslv3": TlsVersion.SSL3,
    "tls1.0": TlsVersion.TLS1_0, "tls1": TlsVersion.TLS1_0,
    "tlsv1": TlsVersion.TLS1_0, "tlsv1.0": TlsVersion.TLS1_0,
    "tls1.1": TlsVersion.TLS1_1, "tlsv1.1": TlsVersion.TLS1_1,
    "tls1.2": TlsVersion.TLS1_2, "tlsv1.2": TlsVersion.TLS1_2,
    "tls1.3": TlsVersion.TLS1_3, "tlsv1.3": TlsVersion.TLS1_3,
}


def parse_tls_version(text: str) -> TlsVersion:
    key = str(text).strip().lower().replace("_", ".").replace(" ", "")
    return _TLS_ALIASES.get(key, TlsVersion.UNKNOWN)


LABEL_BENIGN = 0
LABEL_BOTNET = 1

_LABEL_ALIASES = {"benign": LABEL_BENIGN, "normal": LABEL_BENIGN,
                  "0": LABEL_BENIGN,
                  "botnet": LABEL_BOTNET, "malicious": LABEL_BOTNET,
                  "1": LABEL_BOTNET}


class FlowRowError(ValueError):
    """CSV row that cannot be turned into a flow record."""

    def __init__(self, row_no: int, reason: str):
        super().__init__(f"row {row_no}: {reason}")
        self.row_no = row_no
        self.reason = reason


@dataclass(frozen=True)
class EncryptedFlowRecord:
    flow: FlowKey
    tls_version: TlsVersion
    ttl: int
    duration: float
    fwd_packets: int
    bwd_packets: int
    src_port: int
    dst_port: int
    label: Optional[int] = None

    def __post_init__(self):
        if not 0 <= self.ttl <= 255:
            raise ValueError(f"ttl out of range: {self.ttl}")
        if self.duration < 0:
            raise ValueError(f"negative duration: {self.duration}")


REQUIRED_COLUMNS = ("src_ip", "src_port", "dst_ip", "dst_port", "proto",
                    "tls_version", "ttl", "duration", "fwd_pkts", "bwd_pkts")


def parse_flow_row(row: dict, row_no: int) -> EncryptedFlowRecord:
    for col in REQUIRED_COLUMNS:
        if row.get(col) in (None, ""):
            raise FlowRowError(row_no, f"missing column '{col}'")
    try:
        src_port = int(row["src_port"])
        dst_port = int(row["dst_port"])
        flow = canonicalize_flow_key(row["src_ip"], src_port,
                                     row["dst_ip"], dst_port, row["proto"])
        ttl = int(row["ttl"])
        duration = float(row["duration"])
        fwd = int(row["fwd_pkts"])
        bwd = int(row["bwd_pkts"])
    except (ValueError, TypeError) as exc:
        raise FlowRowError(row_no, str(exc)) from exc
    label_text = row.get("label")
    label = None
    if label_text not in (None, ""):
        label = _LABEL_ALIASES.get(str(label_text).strip().lower())
        if label is None:
            raise FlowRowError(row_no, f"bad label {label_text!r}")
    try:
        return EncryptedFlowRecord(flow, parse_tls_version(row["tls_version"]),
                                   ttl, duration, fwd, bwd,
                                   src_port, dst_port, label)
    except ValueError as exc:
        raise FlowRowError(row_no, str(exc)) from exc


def read_flow_csv(lines: Iterable[str]) -> Iterator[EncryptedFlowRecord]:
    """Parse a header-declared flow CSV; raises FlowRowError with the
    offending data row number (header = row 0)."""
    reader = csv.DictReader(lines)
    if reader.fieldnames is None:
        return
    missing = [c for c in REQUIRED_COLUMNS if c not in reader.fieldnames]
    if missing:
        raise FlowRowError(0, f"header missing columns: {', '.join(missing)}")
    for row_no, row in enumerate(reader, start=1):
        yield parse_flow_row(row, row_no)


N_ENCODED = 8


def encode(record: EncryptedFlowRecord) -> np.ndarray:
    """Dense 8-component vector: [tls ordinal, ttl, duration, src_port,
    dst_port, well_known_src, well_known_dst, packets_per_second]."""
    rate = ((record.fwd_packets + record.bwd_packets)
            / max(record.duration, RATE_EPSILON))
    return np.array([
        float(record.tls_version.value),
        float(record.ttl),
        record.duration,
        float(record.src_port),
        float(record.dst_port),
        1.0 if record.src_port < 1024 else 0.0,
        1.0 if record.dst_port < 1024 else 0.0,
        rate,
    ])

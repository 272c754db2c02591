"""Core packet/flow data types shared by the whole pipeline.

A flow is a bi-directional 5-tuple conversation.  Both directions map to
the same canonical ``FlowKey``; which endpoint was actually observed as
the packet source is carried outside key equality so that keys remain
direction-free dictionary keys.
"""

from __future__ import annotations

import ipaddress
import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Any


class FlowParseError(ValueError):
    """Raised when a packet/flow record cannot be parsed."""


class Direction(Enum):
    FORWARD = "forward"   # travelling canonical src -> canonical dst
    REVERSE = "reverse"


@dataclass(frozen=True)
class Protocol:
    kind: str   # "TCP", "UDP" or "OTHER"
    code: int

    def __str__(self) -> str:
        return self.kind if self.kind != "OTHER" else f"OTHER({self.code})"


TCP = Protocol("TCP", 6)
UDP = Protocol("UDP", 17)


def parse_protocol(value: Any) -> Protocol:
    if isinstance(value, Protocol):
        return value
    if isinstance(value, bool):
        raise FlowParseError(f"bad protocol: {value!r}")
    if isinstance(value, int):
        if value == TCP.code:
            return TCP
        if value == UDP.code:
            return UDP
        if not 0 <= value <= 255:
            raise FlowParseError(f"protocol code out of range: {value}")
        return Protocol("OTHER", value)
    text = str(value).strip().upper()
    if text == "TCP":
        return TCP
    if text == "UDP":
        return UDP
    if text.isdigit():
        return parse_protocol(int(text))
    raise FlowParseError(f"bad protocol: {value!r}")


def parse_ipv4(text: Any) -> ipaddress.IPv4Address:
    """Parse an IPv4 address; IPv6 and malformed text are rejected."""
    try:
        addr = ipaddress.ip_address(str(text).strip())
    except ValueError as exc:
        raise FlowParseError(f"bad IPv4 address: {text!r}") from exc
    if addr.version != 4:
        raise FlowParseError(f"IPv6 not supported: {text!r}")
    return addr


def _check_port(port: Any) -> int:
    if isinstance(port, bool) or not isinstance(port, int):
        raise FlowParseError(f"port must be an integer: {port!r}")
    if not 0 <= port <= 65535:
        raise FlowParseError(f"port out of range: {port}")
    return port


@dataclass(frozen=True)
class FlowKey:
    """Canonical bi-directional 5-tuple.

    Endpoints are ordered so that (src_ip, src_port) <= (dst_ip, dst_port)
    lexicographically (ip first, then port).  ``observed_src_first`` records
    whether the endpoint seen as the packet source is the stored src side;
    it does not take part in equality or hashing.
    """

    src_ip: ipaddress.IPv4Address
    src_port: int
    dst_ip: ipaddress.IPv4Address
    dst_port: int
    protocol: Protocol
    observed_src_first: bool = field(default=True, compare=False)

    def observed_src(self) -> ipaddress.IPv4Address:
        return self.src_ip if self.observed_src_first else self.dst_ip

    def __str__(self) -> str:
        return (f"{self.src_ip}:{self.src_port}<->"
                f"{self.dst_ip}:{self.dst_port}/{self.protocol}")

    def to_dict(self) -> dict:
        return {
            "src_ip": str(self.src_ip),
            "src_port": self.src_port,
            "dst_ip": str(self.dst_ip),
            "dst_port": self.dst_port,
            "proto": str(self.protocol.kind if self.protocol.kind != "OTHER"
                         else self.protocol.code),
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "FlowKey":
        return canonicalize_flow_key(obj["src_ip"], int(obj["src_port"]),
                                     obj["dst_ip"], int(obj["dst_port"]),
                                     obj["proto"])


def canonicalize_flow_key(src_ip, src_port, dst_ip, dst_port,
                          protocol) -> FlowKey:
    """Build the canonical key; (A->B) and (B->A) yield equal keys."""
    a_ip, b_ip = parse_ipv4(src_ip), parse_ipv4(dst_ip)
    a_port, b_port = _check_port(src_port), _check_port(dst_port)
    proto = parse_protocol(protocol)
    if (a_ip, a_port) <= (b_ip, b_port):
        return FlowKey(a_ip, a_port, b_ip, b_port, proto,
                       observed_src_first=True)
    return FlowKey(b_ip, b_port, a_ip, a_port, proto,
                   observed_src_first=False)


@dataclass(frozen=True)
class PacketRecord:
    flow: FlowKey
    direction: Direction
    timestamp: float
    payload: bytes
    encrypted: bool

    def __post_init__(self):
        if self.timestamp < 0:
            raise FlowParseError(f"negative timestamp: {self.timestamp}")

    def payload_text(self) -> str:
        """Payload decoded for featurization (lossy UTF-8)."""
        return self.payload.decode("utf-8", errors="replace")


def packet_from_json_line(line: str) -> PacketRecord:
    """Parse one packet-stream JSONL record.

    Expected keys: src_ip, src_port, dst_ip, dst_port, proto, ts, payload,
    encrypted.  The payload is a UTF-8 string.
    """
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise FlowParseError(f"bad JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise FlowParseError("packet record must be a JSON object")
    try:
        key = canonicalize_flow_key(obj["src_ip"], int(obj["src_port"]),
                                    obj["dst_ip"], int(obj["dst_port"]),
                                    obj["proto"])
        ts = float(obj["ts"])
        payload = str(obj.get("payload", "")).encode("utf-8")
        encrypted = bool(obj.get("encrypted", False))
    except KeyError as exc:
        raise FlowParseError(f"missing field {exc}") from exc
    except (TypeError, ValueError) as exc:
        raise FlowParseError(str(exc)) from exc
    direction = (Direction.FORWARD if key.observed_src_first
                 else Direction.REVERSE)
    return PacketRecord(key, direction, ts, payload, encrypted)


def packet_to_json_line(src_ip: str, src_port: int, dst_ip: str,
                        dst_port: int, proto: str, ts: float,
                        payload: str, encrypted: bool = False) -> str:
    """Serialize one packet record in the stream format (test/demo helper)."""
    return json.dumps({
        "src_ip": src_ip, "src_port": src_port,
        "dst_ip": dst_ip, "dst_port": dst_port,
        "proto": proto, "ts": ts, "payload": payload,
        "encrypted": encrypted,
    })


BENIGN = 0
MALICIOUS = 1


@dataclass(frozen=True)
class LabeledPayload:
    payload: str
    label: int

    def __post_init__(self):
        if self.label not in (BENIGN, MALICIOUS):
            raise FlowParseError(f"label must be 0 or 1: {self.label!r}")


def labeled_payload_from_json_line(line: str) -> LabeledPayload:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise FlowParseError(f"bad JSON: {exc}") from exc
    if not isinstance(obj, dict) or "payload" not in obj or "label" not in obj:
        raise FlowParseError("corpus record needs 'payload' and 'label'")
    label = obj["label"]
    if label not in (0, 1):
        raise FlowParseError(f"label must be 0 or 1: {label!r}")
    return LabeledPayload(str(obj["payload"]), int(label))


class VerdictKind(Enum):
    PASS = "pass"
    ALERT = "alert"
    BLOCK = "block"


class VerdictReason(Enum):
    BLACKLIST = "blacklist"
    PAYLOAD_CLASSIFIER = "payload_classifier"
    ENCRYPTED_CLASSIFIER = "encrypted_classifier"


_CLASSIFIER_REASONS = (VerdictReason.PAYLOAD_CLASSIFIER,
                       VerdictReason.ENCRYPTED_CLASSIFIER)


@dataclass(frozen=True)
class Verdict:
    kind: VerdictKind
    flow: FlowKey
    reason: VerdictReason
    score: float | None = None
    timestamp: float | None = None

    def __post_init__(self):
        if self.reason in _CLASSIFIER_REASONS:
            if self.score is None or not 0.0 <= self.score <= 1.0:
                raise ValueError("classifier verdict needs a score in [0,1]")
        elif self.score is not None:
            raise ValueError("blacklist verdict carries no score")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "flow": str(self.flow),
            "reason": self.reason.value,
            "score": self.score,
            "ts": self.timestamp,
        }

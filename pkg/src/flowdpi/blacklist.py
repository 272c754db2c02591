"""Flow-level early detection against an IP blacklist.

The blacklist holds exact IPv4 addresses and CIDR prefixes.  Lookup masks
the candidate address once per distinct prefix length, so membership is
O(number of distinct prefix lengths) regardless of list size.
"""

from __future__ import annotations

import ipaddress
import logging
from dataclasses import dataclass
from typing import Iterable, Mapping

from .flows import FlowKey, parse_ipv4

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Blacklist:
    source_name: str
    # prefix length -> set of network addresses (as ints, host bits zeroed)
    networks: Mapping[int, frozenset[int]]
    n_entries: int
    n_skipped: int = 0

    def contains(self, ip) -> bool:
        addr = int(parse_ipv4(ip))
        for prefix_len, nets in self.networks.items():
            mask = 0 if prefix_len == 0 else (~0 << (32 - prefix_len)) & 0xFFFFFFFF
            if (addr & mask) in nets:
                return True
        return False


def load_blacklist(lines: Iterable[str], source_name: str = "blacklist",
                   exact_only: bool = False) -> Blacklist:
    """Parse blacklist text: one address or CIDR per line, '#' comments.

    Malformed lines are skipped and counted, never fatal.  With
    ``exact_only`` CIDR entries are treated as malformed.
    """
    networks: dict[int, set[int]] = {}
    n_entries = 0
    n_skipped = 0
    for raw in lines:
        entry = raw.split("#", 1)[0].strip()
        if not entry:
            continue
        if exact_only and "/" in entry:
            log.warning("skipping CIDR entry in exact-only mode: %s", entry)
            n_skipped += 1
            continue
        try:
            net = ipaddress.ip_network(entry, strict=False)
            if net.version != 4:
                raise ValueError("IPv6 entry")
        except ValueError:
            log.warning("skipping malformed blacklist entry: %s", entry)
            n_skipped += 1
            continue
        networks.setdefault(net.prefixlen, set()).add(int(net.network_address))
        n_entries += 1
    frozen = {plen: frozenset(nets) for plen, nets in networks.items()}
    return Blacklist(source_name, frozen, n_entries, n_skipped)


def check_flow(blacklist: Blacklist, flow_key: FlowKey, observed_src_ip,
               check_both_endpoints: bool = False) -> bool:
    """True means block.  Checks the observed source IP; optionally also
    the other endpoint."""
    if blacklist.contains(observed_src_ip):
        return True
    if check_both_endpoints:
        src = parse_ipv4(observed_src_ip)
        other = (flow_key.dst_ip if flow_key.src_ip == src else flow_key.src_ip)
        return blacklist.contains(other)
    return False

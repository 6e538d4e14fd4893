"""Frame decoding and classic capture-file I/O.

``parse_packet`` decodes Ethernet II, IPv4 (options honored via IHL), and
TCP/UDP, and locates the payload: the bytes after the last header it
could decode. Parsing is total -- anything truncated or malformed comes
back as ``None`` (not parseable) instead of raising, because the
filtering pipeline must still carry such frames.

``read_pcap``/``write_pcap`` speak the classic capture format (magic
0xA1B2C3D4, version 2.4, link type 1) in either byte order, so traces
interchange with standard capture tooling.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

ETHERTYPE_IPV4 = 0x0800
PROTO_TCP = 6
PROTO_UDP = 17

LINKTYPE_ETHERNET = 1

PCAP_MAGIC = 0xA1B2C3D4
PCAP_MAGIC_SWAPPED = 0xD4C3B2A1
_PCAP_SNAPLEN = 65535

_ETH = struct.Struct("!6s6sH")
_IPV4_FIXED = struct.Struct("!BBHHHBBH4s4s")
_UDP = struct.Struct("!HHHH")


class PcapError(ValueError):
    """Raised for malformed capture files."""


@dataclass(slots=True)
class RawFrame:
    """A captured frame: bytes plus timestamp and original wire length."""

    data: bytes
    ts_sec: int = 0
    ts_usec: int = 0
    orig_len: int = -1  # -1: same as len(data)

    def __post_init__(self) -> None:
        if self.orig_len < 0:
            self.orig_len = len(self.data)


@dataclass
class Trace:
    """An ordered sequence of frames sharing one link type."""

    frames: list[RawFrame] = field(default_factory=list)
    link_type: int = LINKTYPE_ETHERNET

    def __len__(self) -> int:
        return len(self.frames)

    def __iter__(self):
        return iter(self.frames)


@dataclass(frozen=True, slots=True)
class LinkHeader:
    dst_mac: bytes
    src_mac: bytes
    ethertype: int


@dataclass(frozen=True, slots=True)
class Ipv4Header:
    src_ip: bytes
    dst_ip: bytes
    protocol: int
    header_len: int


@dataclass(frozen=True, slots=True)
class TransportHeader:
    kind: str  # "tcp" | "udp"
    src_port: int
    dst_port: int
    header_len: int


@dataclass(slots=True)
class ParsedPacket:
    """Decoded headers plus a (offset, length) payload slice into the frame."""

    data: bytes
    link: LinkHeader
    net: Ipv4Header | None
    transport: TransportHeader | None
    payload_offset: int
    payload_len: int

    @property
    def payload(self) -> bytes:
        return self.data[self.payload_offset : self.payload_offset + self.payload_len]


def parse_packet(frame: RawFrame) -> ParsedPacket | None:
    """Decode a frame; ``None`` means not parseable (truncated/malformed).

    Payload placement: after the TCP/UDP header when one decodes, after
    the IPv4 header for other IP protocols, and directly after the
    Ethernet header for non-IPv4 ethertypes.
    """
    data = frame.data
    if len(data) < _ETH.size:
        return None
    dst_mac, src_mac, ethertype = _ETH.unpack_from(data)
    link = LinkHeader(dst_mac=dst_mac, src_mac=src_mac, ethertype=ethertype)

    if ethertype != ETHERTYPE_IPV4:
        return ParsedPacket(data=data, link=link, net=None, transport=None,
                            payload_offset=_ETH.size,
                            payload_len=len(data) - _ETH.size)

    ip_off = _ETH.size
    if len(data) < ip_off + 20:
        return None
    version_ihl = data[ip_off]
    if version_ihl >> 4 != 4:
        return None
    ihl = (version_ihl & 0x0F) * 4
    if ihl < 20 or len(data) < ip_off + ihl:
        return None
    fixed = _IPV4_FIXED.unpack_from(data, ip_off)
    protocol = fixed[6]
    net = Ipv4Header(src_ip=fixed[8], dst_ip=fixed[9], protocol=protocol,
                     header_len=ihl)
    l4_off = ip_off + ihl

    if protocol == PROTO_TCP:
        if len(data) < l4_off + 20:
            return None
        src_port, dst_port = struct.unpack_from("!HH", data, l4_off)
        data_offset = (data[l4_off + 12] >> 4) * 4
        if data_offset < 20 or len(data) < l4_off + data_offset:
            return None
        transport = TransportHeader("tcp", src_port, dst_port, data_offset)
        payload_offset = l4_off + data_offset
    elif protocol == PROTO_UDP:
        if len(data) < l4_off + _UDP.size:
            return None
        src_port, dst_port, _, _ = _UDP.unpack_from(data, l4_off)
        transport = TransportHeader("udp", src_port, dst_port, _UDP.size)
        payload_offset = l4_off + _UDP.size
    else:
        transport = None
        payload_offset = l4_off

    return ParsedPacket(data=data, link=link, net=net, transport=transport,
                        payload_offset=payload_offset,
                        payload_len=len(data) - payload_offset)


def read_pcap(data: bytes) -> Trace:
    """Parse a classic capture file, accepting either byte order."""
    if len(data) < 24:
        raise PcapError("bad magic: file too short for a capture header")
    (magic,) = struct.unpack_from("<I", data)
    if magic == PCAP_MAGIC:
        endian = "<"
    elif magic == PCAP_MAGIC_SWAPPED:
        endian = ">"
    else:
        raise PcapError(f"bad magic: 0x{magic:08X}")
    _, _, _, _, _, network = struct.unpack_from(endian + "HHiIII", data, 4)
    if network != LINKTYPE_ETHERNET:
        raise PcapError(f"unsupported link type {network}")

    rec = struct.Struct(endian + "IIII")
    frames = []
    off = 24
    while off < len(data):
        if off + rec.size > len(data):
            raise PcapError("truncated record: incomplete record header")
        ts_sec, ts_usec, incl_len, orig_len = rec.unpack_from(data, off)
        off += rec.size
        if off + incl_len > len(data):
            raise PcapError(
                f"truncated record: {incl_len} bytes declared, "
                f"{len(data) - off} remain")
        frames.append(RawFrame(data=data[off : off + incl_len],
                               ts_sec=ts_sec, ts_usec=ts_usec,
                               orig_len=orig_len))
        off += incl_len
    return Trace(frames=frames, link_type=network)


def write_pcap(trace: Trace) -> bytes:
    """Encode a trace as a little-endian classic capture file."""
    if trace.link_type != LINKTYPE_ETHERNET:
        raise PcapError(f"unsupported link type {trace.link_type}")
    parts = [struct.pack("<IHHiIII", PCAP_MAGIC, 2, 4, 0, 0,
                         _PCAP_SNAPLEN, trace.link_type)]
    for frame in trace.frames:
        parts.append(struct.pack("<IIII", frame.ts_sec, frame.ts_usec,
                                 len(frame.data), frame.orig_len))
        parts.append(frame.data)
    return b"".join(parts)

#
#  This file is part of MINLab.
#
#  MINLab is a protocol workbench for the Multi-Identifier Network (MIN).
#
#  Licensed under the Apache License, Version 2.0 (the "License");
#  you may not use this file except in compliance with the License.
#  You may obtain a copy of the License at
#
#      http://www.apache.org/licenses/LICENSE-2.0
#
#  Unless required by applicable law or agreed to in writing, software
#  distributed under the License is distributed on an "AS IS" BASIS,
#  WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
#  See the License for the specific language governing permissions and
#  limitations under the License.
#

"""IP-over-CCN tunnelling through conversion gateways (MIRs).

A MIR translates transport signaling arriving on its IP side into
Interest packets addressed to the peer's CCN prefix, and decapsulates
Interests addressed to its own prefix back into IP segments. Control
exchanges map one to one onto Interests: three for connection
establishment and four for termination.

Payload segments travel the same way (push-over-Interest): each data
segment is an Interest carrying the payload toward the peer prefix and is
acknowledged by an Interest in the reverse direction.

Every CCN segment has a router forwarding Interests by longest prefix
match in an HPT-FIB. The whole fabric runs on the simulator's virtual
clock with a fixed per-hop delay.

"""

from __future__ import annotations

import enum
import struct
import ipaddress
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from MINLab import applogger
from MINLab import config
from MINLab.fib import Hpt
from MINLab.identifiers import ContentName, ForwardingInfo, IdentifierError
from MINLab.simulator import EventScheduler
from MINLab.util import WireFormatError, WireReader, pack_blob, sha256, sha256sum


logger = logging.getLogger(__name__)

SEQ_MODULO = 1 << 32
HEADER_FORMAT = '>BIIIIHH'
DEFAULT_TIMEOUT_NS = 1000 * config.DEFAULT_HOP_DELAY_NS
SERVER_PORT = 80


class TunnelError(Exception):
    pass

class UnknownMirError(TunnelError):
    pass

class DuplicateMirError(TunnelError):
    pass

class TunnelTimeoutError(TunnelError):
    pass

class InvalidStateError(TunnelError):
    pass

class TopologyError(TunnelError):
    pass


class TunnelMode(enum.Enum):
    IP_CCN_IP = 'ip-ccn-ip'
    IP_CCN = 'ip-ccn'
    CCN_IP = 'ccn-ip'
    CCN_IP_CCN = 'ccn-ip-ccn'


class Flag(enum.IntFlag):
    FIN = 0x01
    SYN = 0x02
    RST = 0x04
    ACK = 0x10


CONTROL_FLAGS = Flag.SYN | Flag.FIN | Flag.RST


class ConnState(enum.Enum):
    CLOSED = 'closed'
    SYN_SENT = 'syn-sent'
    SYN_RECEIVED = 'syn-received'
    ESTABLISHED = 'established'
    FIN_WAIT = 'fin-wait'


def _flag_text(flags):
    names = [f.name for f in (Flag.SYN, Flag.FIN, Flag.RST, Flag.ACK) if flags & f]
    return '+'.join(names) or '-'


# Private API

def _seq_add(a, b):
    return (a + b) % SEQ_MODULO

def _seq_diff(a, b):
    return (a - b) % SEQ_MODULO


# Public API

@dataclass(frozen=True)
class SignalingHeader:
    """Transport signaling carried verbatim inside an Interest.

    Wire layout (21 bytes, big-endian): flags 1, seq 4, ack 4, source
    IPv4 4, destination IPv4 4, source port 2, destination port 2. The
    payload length is derived from the payload field.

    """
    flags: Flag
    seq: int
    ack: int
    src: ipaddress.IPv4Address
    dst: ipaddress.IPv4Address
    sport: int
    dport: int

    SIZE = 21

    def __post_init__(self):
        if not 0 <= self.seq < SEQ_MODULO or not 0 <= self.ack < SEQ_MODULO:
            raise ValueError('seq and ack are 32-bit values')
        if not 0 <= self.sport < 65536 or not 0 <= self.dport < 65536:
            raise ValueError('Ports are 16-bit values')

    @property
    def is_control(self):
        return bool(self.flags & CONTROL_FLAGS)

    def pack(self) -> bytes:
        return struct.pack(HEADER_FORMAT, int(self.flags), self.seq, self.ack,
                           int(self.src), int(self.dst), self.sport, self.dport)

    @classmethod
    def read(cls, r: WireReader) -> 'SignalingHeader':
        flags, seq, ack, src, dst, sport, dport = r.unpack(HEADER_FORMAT)
        return cls(Flag(flags), seq, ack, ipaddress.IPv4Address(src),
                   ipaddress.IPv4Address(dst), sport, dport)

    def __str__(self):
        return '%s %s:%d>%s:%d seq=%d ack=%d' % (
            _flag_text(self.flags), self.src, self.sport, self.dst, self.dport,
            self.seq, self.ack)


@dataclass(frozen=True)
class MirName:
    ccn_prefix: ContentName
    ip: ipaddress.IPv4Address

    def __str__(self):
        return '%s@%s' % (self.ccn_prefix, self.ip)


class MirTable:
    """Bijective registry of gateway prefixes and addresses."""

    def __init__(self, entries=()):
        self._by_prefix: Dict[ContentName, MirName] = {}
        self._by_ip: Dict[ipaddress.IPv4Address, MirName] = {}
        for prefix, ip in entries:
            self.register(prefix, ip)

    def __len__(self):
        return len(self._by_prefix)

    def __contains__(self, mir):
        return self._by_prefix.get(mir.ccn_prefix) == mir

    def __iter__(self):
        return iter(self._by_prefix.values())

    def register(self, prefix, ip) -> MirName:
        if isinstance(prefix, str):
            prefix = ContentName.parse(prefix)
        ip = ipaddress.IPv4Address(ip)
        if prefix in self._by_prefix or ip in self._by_ip:
            raise DuplicateMirError('%s or %s is already registered' % (prefix, ip))
        mir = MirName(prefix, ip)
        self._by_prefix[prefix] = mir
        self._by_ip[ip] = mir
        return mir

    def by_prefix(self, prefix) -> MirName:
        try:
            return self._by_prefix[prefix]
        except KeyError:
            raise UnknownMirError(str(prefix))

    def by_ip(self, ip) -> MirName:
        try:
            return self._by_ip[ipaddress.IPv4Address(ip)]
        except KeyError:
            raise UnknownMirError(str(ip))

    def owner_of(self, name: ContentName) -> MirName:
        """The registered prefix an Interest name begins with."""
        for k in range(len(name), 0, -1):
            mir = self._by_prefix.get(ContentName(name.components[:k]))
            if mir is not None:
                return mir
        raise UnknownMirError(str(name))


@dataclass(frozen=True)
class InterestPacket:
    name: ContentName
    signaling: Optional[SignalingHeader] = None
    payload: Optional[bytes] = None

    def __len__(self):
        return len(encode_interest(self))


def encode_interest(pkt: InterestPacket) -> bytes:
    """Length-prefixed name, then a presence byte and the 21-byte header,
    then a presence byte and the length-prefixed payload."""
    out = [pack_blob(str(pkt.name).encode('utf-8'))]
    if pkt.signaling is None:
        out.append(b'\x00')
    else:
        out.append(b'\x01' + pkt.signaling.pack())
    if pkt.payload is None:
        out.append(b'\x00')
    else:
        out.append(b'\x01' + pack_blob(pkt.payload))
    return b''.join(out)


def decode_interest(data: bytes) -> InterestPacket:
    r = WireReader(data)
    try:
        name = ContentName.parse(r.blob().decode('utf-8'))
    except (IdentifierError, UnicodeDecodeError) as exc:
        raise WireFormatError('Bad Interest name: %s' % exc)
    signaling = payload = None
    if r.unpack('>B'):
        signaling = SignalingHeader.read(r)
    if r.unpack('>B'):
        payload = r.blob()
    r.done()
    return InterestPacket(name, signaling, payload)


def connection_id(seg: SignalingHeader) -> str:
    """Discriminator shared by both directions of a connection: a digest
    of the sorted endpoint pair."""
    ends = sorted(((int(seg.src), seg.sport), (int(seg.dst), seg.dport)))
    return sha256sum(repr(ends).encode('ascii'))[:16]


def encapsulate_signal(seg: SignalingHeader, target: MirName, conn_id: str,
                       table: MirTable, payload: Optional[bytes] = None) -> InterestPacket:
    """Wraps a segment into an Interest named <target prefix>/<conn_id>."""
    if target not in table:
        raise UnknownMirError(str(target))
    return InterestPacket(target.ccn_prefix.child(conn_id), seg, payload)


def decapsulate_signal(pkt: InterestPacket, table: MirTable) -> Tuple[MirName, str, SignalingHeader, Optional[bytes]]:
    """Inverse of encapsulate_signal: (target, conn_id, segment, payload)."""
    target = table.owner_of(pkt.name)
    rest = pkt.name.components[len(target.ccn_prefix):]
    if len(rest) != 1 or pkt.signaling is None:
        raise TunnelError('Not an encapsulated segment: %s' % pkt.name)
    return target, rest[0], pkt.signaling, pkt.payload


@dataclass
class IpSegment:
    header: SignalingHeader
    payload: bytes = b''


@dataclass
class ControlExchange:
    """One end-to-end control signal and the Interests it took."""
    phase: str
    sender: str
    flags: str
    sent_at: int
    interests: int = 0


class Fabric:
    """Packet delivery between simulated nodes with a fixed hop delay."""

    def __init__(self, scheduler=None, hop_delay_ns=config.DEFAULT_HOP_DELAY_NS, capture=None):
        self.scheduler = scheduler or EventScheduler()
        self.hop_delay_ns = hop_delay_ns
        self.nodes: Dict[str, object] = {}
        self.interests_total = 0
        self.data_interests = 0
        self.dropped = 0
        self.capture = capture
        self._control: Dict[SignalingHeader, ControlExchange] = {}
        self.exchanges: List[ControlExchange] = []

    def attach(self, node):
        self.nodes[node.label] = node
        return node

    def detach(self, label):
        self.nodes.pop(label, None)

    def note_control(self, seg: SignalingHeader, phase: str, sender: str):
        exchange = ControlExchange(phase, sender, _flag_text(seg.flags), self.scheduler.now)
        self._control[seg] = exchange
        self.exchanges.append(exchange)

    @property
    def pending_control(self):
        return len(self._control)

    def release_control(self):
        """Forgets the signaling headers of finished exchanges; their
        trace stays in 'exchanges'."""
        self._control.clear()

    def originate(self, src, dst_label, pkt: InterestPacket):
        """Sends a newly created Interest; counted once however many
        routers forward it."""
        self.interests_total += 1
        if pkt.payload:
            self.data_interests += 1
        else:
            exchange = self._control.get(pkt.signaling)
            if exchange is not None:
                exchange.interests += 1
        if self.capture is not None:
            self.capture.append(encode_interest(pkt))
        self.forward(src, dst_label, pkt)

    def forward(self, src, dst_label, pkt):
        dst = self.nodes.get(dst_label)
        if dst is None:
            self.dropped += 1
            logger.debug('%s: no node %s, dropped %s', src.label, dst_label, pkt)
            return
        self.scheduler.delay(self.hop_delay_ns, dst.receive, pkt, src.label)

    def run(self, until=None):
        with applogger.virtual_clock(self.scheduler):
            return self.scheduler.run(until)


class CcnRouter:
    """Forwards Interests by longest prefix match on their name."""

    def __init__(self, label, fabric: Fabric):
        self.label = label
        self.fabric = fabric
        self.fib = Hpt()
        self.faces: Dict[int, str] = {}

    def add_route(self, prefix: ContentName, next_hop: str):
        face = len(self.faces) + 1
        self.faces[face] = next_hop
        self.fib.insert(prefix, ForwardingInfo(face))

    def receive(self, pkt, src):
        result = self.fib.lookup_lpm(pkt.name)
        if not result.hit:
            self.fabric.dropped += 1
            logger.debug('%s: no route for %s', self.label, pkt.name)
            return
        self.fabric.forward(self, self.faces[result.forwarding.face_id], pkt)


class Endpoint:
    """Byte-stream endpoint with TCP-like signaling.

    'emit' hands an outgoing segment to the attached host.

    """
    def __init__(self, label, ip, port, iss, fabric: Fabric,
                 segment_size=config.DEFAULT_SEGMENT_SIZE, window=config.DEFAULT_WINDOW):
        self.label = label
        self.ip = ipaddress.IPv4Address(ip)
        self.port = port
        self.iss = iss
        self.fabric = fabric
        self.segment_size = segment_size
        self.window = window
        self.emit = None
        self.state = ConnState.CLOSED
        self.listening = False
        self.peer: Optional[Tuple[ipaddress.IPv4Address, int]] = None
        self.phase = 'establish'
        self.reset()

    def reset(self):
        self.state = ConnState.CLOSED
        self.snd_nxt = _seq_add(self.iss, 1)
        self.snd_una = self.snd_nxt
        self.rcv_nxt = 0
        self.outbox = b''
        self.sent = 0
        self.received = 0
        self.digest_in = sha256()
        self.digest_out = sha256()
        self.peer_fin = False

    def __repr__(self):
        return '<Endpoint %s %s>' % (self.label, self.state.value)

    @property
    def unacked(self):
        return _seq_diff(self.snd_nxt, self.snd_una)

    def _header(self, flags, seq, ack):
        return SignalingHeader(flags, seq, ack, self.ip, self.peer[0], self.port, self.peer[1])

    def _send(self, flags, seq, ack, payload=b'', control=False):
        seg = self._header(flags, seq, ack)
        if control:
            self.fabric.note_control(seg, self.phase, self.label)
        logger.debug('%s sends %s (%d bytes)', self.label, seg, len(payload))
        self.emit(IpSegment(seg, payload))

    def listen(self):
        self.listening = True

    def connect(self, peer_ip, peer_port):
        if self.state is not ConnState.CLOSED:
            raise InvalidStateError('%s is %s' % (self.label, self.state.value))
        self.reset()
        self.peer = (ipaddress.IPv4Address(peer_ip), peer_port)
        self.phase = 'establish'
        self.state = ConnState.SYN_SENT
        self._send(Flag.SYN, self.iss, 0, control=True)

    def write(self, data: bytes):
        if self.state is not ConnState.ESTABLISHED:
            raise InvalidStateError('%s is %s' % (self.label, self.state.value))
        self.outbox += data
        self.digest_out.update(data)
        self._push()

    def close(self):
        if self.state is not ConnState.ESTABLISHED:
            raise InvalidStateError('%s is %s' % (self.label, self.state.value))
        if self.sent < len(self.outbox) or self.unacked:
            raise InvalidStateError('%s has undelivered payload' % self.label)
        self.phase = 'terminate'
        self.state = ConnState.FIN_WAIT
        self._send(Flag.FIN | Flag.ACK, self.snd_nxt, self.rcv_nxt, control=True)
        self.snd_nxt = _seq_add(self.snd_nxt, 1)

    def _push(self):
        limit = self.window * self.segment_size
        while self.sent < len(self.outbox) and self.unacked < limit:
            chunk = self.outbox[self.sent:self.sent + self.segment_size]
            self._send(Flag.ACK, self.snd_nxt, self.rcv_nxt, chunk)
            self.snd_nxt = _seq_add(self.snd_nxt, len(chunk))
            self.sent += len(chunk)

    def _on_ack(self, ack):
        if 0 < _seq_diff(ack, self.snd_una) <= self.unacked:
            self.snd_una = ack
        self._push()

    def receive(self, segment: IpSegment):
        hdr, payload = segment.header, segment.payload
        state = self.state
        if hdr.flags & Flag.RST:
            self.reset()
            return
        if state is ConnState.CLOSED:
            if self.listening and hdr.flags == Flag.SYN:
                self.reset()
                self.peer = (hdr.src, hdr.sport)
                self.phase = 'establish'
                self.rcv_nxt = _seq_add(hdr.seq, 1)
                self.state = ConnState.SYN_RECEIVED
                self._send(Flag.SYN | Flag.ACK, self.iss, self.rcv_nxt, control=True)
            return
        if state is ConnState.SYN_SENT:
            if hdr.flags == Flag.SYN | Flag.ACK and hdr.ack == self.snd_nxt:
                self.rcv_nxt = _seq_add(hdr.seq, 1)
                self.state = ConnState.ESTABLISHED
                self._send(Flag.ACK, self.snd_nxt, self.rcv_nxt, control=True)
            return
        if state is ConnState.SYN_RECEIVED:
            if hdr.flags & Flag.ACK and hdr.ack == self.snd_nxt:
                self.state = ConnState.ESTABLISHED
            if not payload or self.state is not ConnState.ESTABLISHED:
                return
        if payload:
            if hdr.seq == self.rcv_nxt:
                self.digest_in.update(payload)
                self.received += len(payload)
                self.rcv_nxt = _seq_add(self.rcv_nxt, len(payload))
            self._send(Flag.ACK, self.snd_nxt, self.rcv_nxt)
            return
        if hdr.flags & Flag.FIN:
            self.rcv_nxt = _seq_add(hdr.seq, 1)
            self.peer_fin = True
            if state is ConnState.ESTABLISHED:
                # passive close: acknowledge, then send our own FIN
                self.phase = 'terminate'
                self._send(Flag.ACK, self.snd_nxt, self.rcv_nxt, control=True)
                self.state = ConnState.FIN_WAIT
                self._send(Flag.FIN | Flag.ACK, self.snd_nxt, self.rcv_nxt, control=True)
                self.snd_nxt = _seq_add(self.snd_nxt, 1)
            else:
                self._send(Flag.ACK, self.snd_nxt, self.rcv_nxt, control=True)
                self.state = ConnState.CLOSED
            return
        if hdr.flags & Flag.ACK:
            if state is ConnState.FIN_WAIT:
                if hdr.ack == self.snd_nxt:
                    self.snd_una = hdr.ack
                    if self.peer_fin:
                        self.state = ConnState.CLOSED
                return
            self._on_ack(hdr.ack)


class IpHost:
    """An IP host; all segments go to and come from its gateway."""

    def __init__(self, endpoint: Endpoint, gateway: str):
        self.label = endpoint.label
        self.endpoint = endpoint
        self.gateway = gateway
        endpoint.emit = self._emit

    def _emit(self, segment):
        self.endpoint.fabric.forward(self, self.gateway, segment)

    def receive(self, pkt, src):
        if isinstance(pkt, IpSegment) and pkt.header.dst == self.endpoint.ip:
            self.endpoint.receive(pkt)


class CcnHost:
    """A native CCN host: speaks Interests to its router directly.

    'routes' maps a peer address to the MirName whose prefix reaches it.

    """
    def __init__(self, endpoint: Endpoint, name: MirName, router: str, table: MirTable):
        self.label = endpoint.label
        self.endpoint = endpoint
        self.name = name
        self.router = router
        self.table = table
        self.routes: Dict[ipaddress.IPv4Address, MirName] = {}
        endpoint.emit = self._emit

    def _emit(self, segment):
        hdr = segment.header
        target = self.routes.get(hdr.dst)
        if target is None:
            raise UnknownMirError('No route toward %s' % hdr.dst)
        pkt = encapsulate_signal(hdr, target, connection_id(hdr), self.table,
                                 segment.payload or None)
        self.endpoint.fabric.originate(self, self.router, pkt)

    def receive(self, pkt, src):
        if not isinstance(pkt, InterestPacket):
            return
        target, _, hdr, payload = decapsulate_signal(pkt, self.table)
        if target == self.name:
            self.endpoint.receive(IpSegment(hdr, payload or b''))


class Mir:
    """Conversion gateway between an IP side and a CCN side.

    IP segments whose destination appears in 'ccn_routes' are
    encapsulated toward that MirName; decapsulated Interests are delivered
    to the IP next hop in 'ip_routes'.

    """
    def __init__(self, label, name: MirName, router: str, table: MirTable, fabric: Fabric):
        self.label = label
        self.name = name
        self.router = router
        self.table = table
        self.fabric = fabric
        self.ccn_routes: Dict[ipaddress.IPv4Address, MirName] = {}
        self.ip_routes: Dict[ipaddress.IPv4Address, str] = {}
        self.encapsulated = 0
        self.decapsulated = 0

    def receive(self, pkt, src):
        if isinstance(pkt, InterestPacket):
            target, _, hdr, payload = decapsulate_signal(pkt, self.table)
            if target != self.name:
                logger.debug('%s: Interest for %s ignored', self.label, target)
                return
            next_hop = self.ip_routes.get(hdr.dst)
            if next_hop is None:
                self.fabric.dropped += 1
                logger.debug('%s: no IP route to %s', self.label, hdr.dst)
                return
            self.decapsulated += 1
            self.fabric.forward(self, next_hop, IpSegment(hdr, payload or b''))
            return
        hdr = pkt.header
        target = self.ccn_routes.get(hdr.dst)
        if target is None:
            self.fabric.dropped += 1
            logger.debug('%s: no CCN route to %s', self.label, hdr.dst)
            return
        self.encapsulated += 1
        interest = encapsulate_signal(hdr, target, connection_id(hdr), self.table,
                                      pkt.payload or None)
        self.fabric.originate(self, self.router, interest)


@dataclass
class TunnelConnection:
    mode: TunnelMode
    client: Endpoint
    server: Endpoint
    fabric: Fabric
    gateways: Dict[str, Mir] = field(default_factory=dict)
    timeout_ns: int = DEFAULT_TIMEOUT_NS

    @property
    def state(self) -> ConnState:
        return self.client.state

    @property
    def interests_sent(self):
        return self.fabric.interests_total

    @property
    def bytes_delivered(self):
        return self.server.received + self.client.received

    def trace(self, phase) -> List[ControlExchange]:
        return [e for e in self.fabric.exchanges if e.phase == phase]


@dataclass
class TransferReport:
    mode: TunnelMode
    bytes_sent: int
    bytes_delivered: int
    digest_sent: str
    digest_received: str
    interests_total: int
    data_interests: int
    establishment: List[ControlExchange]
    termination: List[ControlExchange]
    virtual_time_ns: int

    @property
    def digest(self):
        return self.digest_received

    @property
    def ok(self):
        return (self.digest_sent == self.digest_received
                and self.bytes_sent == self.bytes_delivered
                and len(self.establishment) == 3 and len(self.termination) == 4)

    def summary(self):
        return {
            'mode': self.mode.value,
            'bytes_sent': self.bytes_sent,
            'bytes_delivered': self.bytes_delivered,
            'digest_sent': self.digest_sent,
            'digest_received': self.digest_received,
            'interests_total': self.interests_total,
            'data_interests': self.data_interests,
            'establishment_exchanges': len(self.establishment),
            'termination_exchanges': len(self.termination),
            'establishment_interests': sum(e.interests for e in self.establishment),
            'termination_interests': sum(e.interests for e in self.termination),
            'virtual_time_s': self.virtual_time_ns / 1e9,
            'ok': self.ok,
        }


CLIENT_IP = '10.0.1.1'
SERVER_IP = '10.0.2.1'


def build_topology(mode: TunnelMode, seed=config.DEFAULT_SEED,
                   segment_size=config.DEFAULT_SEGMENT_SIZE, window=config.DEFAULT_WINDOW,
                   hop_delay_ns=config.DEFAULT_HOP_DELAY_NS, capture=None) -> TunnelConnection:
    """Builds the node graph of a transmission mode.

    IP-CCN-IP: client - mir1 - r1 - mir2 - server
    IP-CCN:    client - mir1 - r1 - server (native CCN)
    CCN-IP:    client (native CCN) - r1 - mir2 - server
    CCN-IP-CCN: client (native CCN) - r1 - mir1 - mir2 - r2 - server (native CCN)

    """
    mode = TunnelMode(mode)
    rng = np.random.default_rng(seed)
    fabric = Fabric(hop_delay_ns=hop_delay_ns, capture=capture)
    table = MirTable()
    client_iss, server_iss = (int(v) for v in rng.integers(0, SEQ_MODULO, size=2))
    client_port = int(rng.integers(49152, 65536))
    client = Endpoint('client', CLIENT_IP, client_port, client_iss, fabric, segment_size, window)
    server = Endpoint('server', SERVER_IP, SERVER_PORT, server_iss, fabric, segment_size, window)
    server.listen()
    gateways = {}
    c_ip, s_ip = client.ip, server.ip

    r1 = fabric.attach(CcnRouter('r1', fabric))
    if mode is TunnelMode.CCN_IP_CCN:
        r2 = fabric.attach(CcnRouter('r2', fabric))
    else:
        r2 = r1

    def mir(label, prefix, ip, router):
        gw = Mir(label, table.register(prefix, ip), router.label, table, fabric)
        router.add_route(gw.name.ccn_prefix, label)
        gateways[label] = fabric.attach(gw)
        return gw

    def ccn_host(endpoint, prefix, router):
        host = CcnHost(endpoint, table.register(prefix, endpoint.ip), router.label, table)
        router.add_route(host.name.ccn_prefix, endpoint.label)
        return fabric.attach(host)

    if mode is TunnelMode.IP_CCN_IP:
        m1 = mir('mir1', '/mir1', '10.0.0.1', r1)
        m2 = mir('mir2', '/mir2', '10.0.0.2', r1)
        fabric.attach(IpHost(client, 'mir1'))
        fabric.attach(IpHost(server, 'mir2'))
        m1.ccn_routes[s_ip] = m2.name
        m1.ip_routes[c_ip] = 'client'
        m2.ccn_routes[c_ip] = m1.name
        m2.ip_routes[s_ip] = 'server'
    elif mode is TunnelMode.IP_CCN:
        m1 = mir('mir1', '/mir1', '10.0.0.1', r1)
        fabric.attach(IpHost(client, 'mir1'))
        host = ccn_host(server, '/server', r1)
        m1.ccn_routes[s_ip] = host.name
        m1.ip_routes[c_ip] = 'client'
        host.routes[c_ip] = m1.name
    elif mode is TunnelMode.CCN_IP:
        m2 = mir('mir2', '/mir2', '10.0.0.2', r1)
        host = ccn_host(client, '/client', r1)
        fabric.attach(IpHost(server, 'mir2'))
        host.routes[s_ip] = m2.name
        m2.ccn_routes[c_ip] = host.name
        m2.ip_routes[s_ip] = 'server'
    else:
        m1 = mir('mir1', '/mir1', '10.0.0.1', r1)
        m2 = mir('mir2', '/mir2', '10.0.0.2', r2)
        chost = ccn_host(client, '/client', r1)
        shost = ccn_host(server, '/server', r2)
        chost.routes[s_ip] = m1.name
        m1.ip_routes[s_ip] = 'mir2'
        m1.ccn_routes[c_ip] = chost.name
        m2.ccn_routes[s_ip] = shost.name
        m2.ip_routes[c_ip] = 'mir1'
        shost.routes[c_ip] = m2.name
    logger.debug('Built %s topology: %s', mode.value, ', '.join(sorted(fabric.nodes)))
    return TunnelConnection(mode, client, server, fabric, gateways)


REQUIRED_GATEWAYS = {
    TunnelMode.IP_CCN_IP: ('mir1', 'mir2'),
    TunnelMode.IP_CCN: ('mir1',),
    TunnelMode.CCN_IP: ('mir2',),
    TunnelMode.CCN_IP_CCN: ('mir1', 'mir2'),
}


def establish(conn: TunnelConnection) -> List[ControlExchange]:
    """Runs the three-way Interest handshake and returns its trace."""
    client, server = conn.client, conn.server
    if client.state is not ConnState.CLOSED:
        raise InvalidStateError('Cannot establish from %s' % client.state.value)
    start = conn.fabric.scheduler.now
    client.connect(server.ip, server.port)
    conn.fabric.run(until=start + conn.timeout_ns)
    conn.fabric.release_control()
    if client.state is not ConnState.ESTABLISHED or server.state is not ConnState.ESTABLISHED:
        logger.warning('%s: establishment timed out (client %s, server %s)',
                       conn.mode.value, client.state.value, server.state.value)
        client.reset()
        server.reset()
        raise TunnelTimeoutError('No answer from the peer within %d ns' % conn.timeout_ns)
    trace = conn.trace('establish')
    logger.info('%s: established after %d control exchanges', conn.mode.value, len(trace))
    return trace


def transfer(conn: TunnelConnection, payload: bytes):
    """Pushes the payload from client to server and waits until it is
    acknowledged."""
    conn.client.write(payload)
    conn.fabric.run()
    if conn.client.unacked:
        raise TunnelTimeoutError('%d bytes left unacknowledged' % conn.client.unacked)


def terminate(conn: TunnelConnection) -> List[ControlExchange]:
    """Runs the four-way Interest termination and returns its trace.

    In-flight payload is drained first.

    """
    client, server = conn.client, conn.server
    if client.state is not ConnState.ESTABLISHED:
        raise InvalidStateError('Cannot terminate from %s' % client.state.value)
    conn.fabric.run()
    start = conn.fabric.scheduler.now
    client.close()
    conn.fabric.run(until=start + conn.timeout_ns)
    conn.fabric.release_control()
    if client.state is not ConnState.CLOSED or server.state is not ConnState.CLOSED:
        raise TunnelTimeoutError('Termination incomplete (client %s, server %s)'
                                 % (client.state.value, server.state.value))
    trace = conn.trace('terminate')
    logger.info('%s: closed after %d control exchanges', conn.mode.value, len(trace))
    return trace


def random_payload(size, seed=config.DEFAULT_SEED) -> bytes:
    return np.random.default_rng(seed).bytes(size)


def run_scenario(mode, payload: bytes, topology: Optional[TunnelConnection] = None,
                 seed=config.DEFAULT_SEED, **kwargs) -> TransferReport:
    """Establishes a connection, transfers 'payload' and terminates."""
    mode = TunnelMode(mode)
    conn = topology or build_topology(mode, seed=seed, **kwargs)
    if conn.mode is not mode:
        raise TopologyError('Topology was built for %s' % conn.mode.value)
    missing = [g for g in REQUIRED_GATEWAYS[mode] if g not in conn.gateways]
    if missing:
        raise TopologyError('%s needs gateways %s' % (mode.value, ', '.join(missing)))
    establishment = establish(conn)
    if payload:
        transfer(conn, payload)
    termination = terminate(conn)
    report = TransferReport(
        mode=mode,
        bytes_sent=len(payload),
        bytes_delivered=conn.bytes_delivered,
        digest_sent=conn.client.digest_out.hexdigest(),
        digest_received=conn.server.digest_in.hexdigest(),
        interests_total=conn.interests_sent,
        data_interests=conn.fabric.data_interests,
        establishment=establishment,
        termination=termination,
        virtual_time_ns=conn.fabric.scheduler.now,
    )
    if not report.ok:
        logger.warning('%s: transfer check failed: %s', mode.value, report.summary())
    return report


def load_scenario(path):
    """Reads a {mode, payload_size, seed} scenario file."""
    cfg = config.load_configuration(path)
    opts = cfg.options('tunnel-demo')
    try:
        mode = TunnelMode(opts.get('mode', TunnelMode.IP_CCN_IP.value))
        size = int(opts.get('payload_size', config.DEFAULT_PAYLOAD_SIZE))
        seed = int(opts.get('seed', config.DEFAULT_SEED))
    except (TypeError, ValueError) as exc:
        raise config.ConfigInvalidError('%s: %s' % (path, exc))
    if size < 0:
        raise config.ConfigInvalidError('%s: payload_size must be >= 0' % path)
    return mode, size, seed


def read_capture(data: bytes) -> List[InterestPacket]:
    """Decodes a capture file of length-prefixed Interest encodings."""
    r = WireReader(data)
    packets = []
    while r.offset < len(r.data):
        packets.append(decode_interest(r.blob()))
    return packets


def write_capture(path, capture):
    with open(path, 'wb') as f:
        for wire in capture:
            f.write(pack_blob(wire))

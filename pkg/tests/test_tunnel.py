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

import ipaddress
import os
from hashlib import sha256

import pytest

from MINLab.identifiers import ContentName
from MINLab.tunnel import (
    ConnState,
    DuplicateMirError,
    Flag,
    InterestPacket,
    InvalidStateError,
    MirTable,
    SignalingHeader,
    TopologyError,
    TunnelMode,
    TunnelTimeoutError,
    UnknownMirError,
    build_topology,
    connection_id,
    decapsulate_signal,
    decode_interest,
    encapsulate_signal,
    encode_interest,
    establish,
    load_scenario,
    random_payload,
    read_capture,
    run_scenario,
    terminate,
    write_capture,
)


ETC = os.path.join(os.path.dirname(__file__), os.pardir, 'etc')


def header(flags=Flag.SYN, seq=7, ack=0):
    return SignalingHeader(flags, seq, ack, ipaddress.IPv4Address('10.0.1.1'),
                           ipaddress.IPv4Address('10.0.2.1'), 50000, 80)


@pytest.mark.parametrize('mode', list(TunnelMode))
def test_transfer_over_every_mode(mode):
    payload = random_payload(200000, seed=4)
    summary = run_scenario(mode, payload, seed=4).summary()
    assert summary['ok']
    assert summary['bytes_delivered'] == summary['bytes_sent'] == 200000
    assert summary['digest_received'] == sha256(payload).hexdigest()
    assert summary['establishment_exchanges'] == 3
    assert summary['termination_exchanges'] == 4
    assert summary['data_interests'] >= 200000 // 4096


def test_megabyte_transfer_with_small_window():
    payload = random_payload(1 << 20, seed=2)
    report = run_scenario(TunnelMode.IP_CCN_IP, payload, seed=2, window=2)
    assert report.ok
    assert report.digest == sha256(payload).hexdigest()


def test_control_headers_are_released_after_each_exchange():
    conn = build_topology(TunnelMode.IP_CCN_IP)
    establish(conn)
    assert conn.fabric.pending_control == 0
    assert conn.trace('establish')[0].interests > 0
    terminate(conn)
    assert conn.fabric.pending_control == 0


@pytest.mark.parametrize('mode', list(TunnelMode))
def test_finished_scenario_leaves_no_control_state(mode):
    conn = build_topology(mode)
    report = run_scenario(mode, random_payload(50000), topology=conn)
    assert report.ok
    assert conn.fabric.pending_control == 0


@pytest.mark.slow
@pytest.mark.parametrize('mode', list(TunnelMode))
def test_megabyte_transfers_over_many_seeds(mode):
    for seed in range(1, 101):
        payload = random_payload(1 << 20, seed=seed)
        report = run_scenario(mode, payload, seed=seed)
        assert report.ok, seed
        assert report.digest == sha256(payload).hexdigest()


@pytest.mark.slow
def test_sixteen_megabyte_transfer():
    payload = random_payload(16 << 20, seed=3)
    report = run_scenario(TunnelMode.CCN_IP_CCN, payload, seed=3)
    assert report.ok
    assert report.bytes_delivered == 16 << 20
    assert report.digest == sha256(payload).hexdigest()


def test_empty_payload_still_opens_and_closes():
    summary = run_scenario('ccn-ip', b'').summary()
    assert summary['ok']
    assert summary['data_interests'] == 0
    assert summary['establishment_interests'] >= 3


def test_handshake_trace_alternates_sides():
    conn = build_topology(TunnelMode.IP_CCN)
    trace = establish(conn)
    assert [(e.sender, e.flags) for e in trace] == [
        ('client', 'SYN'), ('server', 'SYN+ACK'), ('client', 'ACK')]
    assert conn.state is ConnState.ESTABLISHED
    trace = terminate(conn)
    assert [e.sender for e in trace] == ['client', 'server', 'server', 'client']
    assert conn.server.state is ConnState.CLOSED


def test_missing_gateway_times_out():
    conn = build_topology(TunnelMode.IP_CCN_IP)
    conn.fabric.detach('mir2')
    with pytest.raises(TunnelTimeoutError):
        establish(conn)
    assert conn.client.state is ConnState.CLOSED
    assert conn.fabric.dropped > 0


def test_operations_out_of_state():
    conn = build_topology(TunnelMode.CCN_IP_CCN)
    with pytest.raises(InvalidStateError):
        terminate(conn)
    with pytest.raises(InvalidStateError):
        conn.client.write(b'early')
    establish(conn)
    with pytest.raises(InvalidStateError):
        establish(conn)


def test_topology_must_match_mode():
    with pytest.raises(TopologyError):
        run_scenario(TunnelMode.IP_CCN, b'', topology=build_topology(TunnelMode.CCN_IP))
    conn = build_topology(TunnelMode.IP_CCN_IP)
    del conn.gateways['mir1']
    with pytest.raises(TopologyError):
        run_scenario(TunnelMode.IP_CCN_IP, b'', topology=conn)


def test_capture_holds_every_interest(tmp_path):
    capture = []
    summary = run_scenario(TunnelMode.CCN_IP_CCN, random_payload(50000), capture=capture).summary()
    path = str(tmp_path / 'tunnel.cap')
    write_capture(path, capture)
    with open(path, 'rb') as f:
        packets = read_capture(f.read())
    assert len(packets) == summary['interests_total']
    assert all(p.signaling is not None for p in packets)


# Codec

def test_header_is_twenty_one_bytes():
    assert len(header().pack()) == SignalingHeader.SIZE == 21
    assert header().is_control
    assert not header(Flag.ACK).is_control


@pytest.mark.parametrize('kwargs', [{'seq': -1}, {'ack': 1 << 32}])
def test_header_rejects_out_of_range_numbers(kwargs):
    with pytest.raises(ValueError):
        header(**kwargs)


def test_interest_codec():
    pkt = InterestPacket(ContentName.parse('/mir2/abc'), header(Flag.ACK, 1, 2), b'data')
    assert decode_interest(encode_interest(pkt)) == pkt
    bare = InterestPacket(ContentName.parse('/x'))
    assert decode_interest(encode_interest(bare)) == bare


def test_encapsulation_round_trip():
    table = MirTable([('/mir1', '10.0.0.1'), ('/mir2', '10.0.0.2')])
    target = table.by_prefix(ContentName.parse('/mir2'))
    seg = header()
    pkt = encapsulate_signal(seg, target, connection_id(seg), table, b'x')
    assert decapsulate_signal(pkt, table) == (target, connection_id(seg), seg, b'x')


def test_connection_id_is_direction_free():
    forward = header()
    backward = SignalingHeader(Flag.ACK, 0, 8, forward.dst, forward.src, 80, 50000)
    assert connection_id(forward) == connection_id(backward)


def test_mir_table_is_bijective():
    table = MirTable([('/mir1', '10.0.0.1')])
    with pytest.raises(DuplicateMirError):
        table.register('/mir1', '10.0.0.9')
    with pytest.raises(DuplicateMirError):
        table.register('/other', '10.0.0.1')
    with pytest.raises(UnknownMirError):
        table.by_ip('10.9.9.9')
    with pytest.raises(UnknownMirError):
        table.owner_of(ContentName.parse('/elsewhere/x'))
    assert table.by_ip('10.0.0.1').ccn_prefix == ContentName.parse('/mir1')


def test_load_scenario_file():
    mode, size, seed = load_scenario(os.path.join(ETC, 'tunnel-scenario.json'))
    assert (mode, size, seed) == (TunnelMode.CCN_IP_CCN, 1 << 20, 3)

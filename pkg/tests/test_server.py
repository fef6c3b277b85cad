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

import io

import pytest

from MINLab import config
from MINLab.client import ProtocolError, RegistryClient, RegistryFabric, parse_response
from MINLab.server import RegistryServer


@pytest.fixture
def server(hierarchy):
    srv = RegistryServer(hierarchy)
    yield srv
    srv.server_close()


def client_of(server, path):
    return RegistryClient(server.handler_for(path).handle)


def test_register_then_resolve_elsewhere(server):
    gd = client_of(server, '/top/cn/gd')
    resp = gd.register('id:alice', 'id:owner', 9)
    assert resp.ok
    assert resp.body['domain'] == '/top/cn/gd'
    found = client_of(server, '/top/us').resolve('id:alice')
    assert found.ok
    assert found.body['face_id'] == 9
    assert found.body['hops'][-1] == '/top/cn/gd'


def test_requests_travel_as_interests(server):
    network = RegistryFabric(server)
    gd = RegistryClient(network.transport('/top/cn/gd'))
    assert gd.register('id:alice', 'id:owner', 9).ok
    found = RegistryClient(network.transport('/top/us', client='other')).resolve('id:alice')
    assert found.ok
    assert found.body['face_id'] == 9
    assert network.interests_total == 4
    assert network.scheduler.now == 8 * config.DEFAULT_HOP_DELAY_NS


def test_unreachable_domain_gives_protocol_error(server):
    network = RegistryFabric(server)
    us = RegistryClient(network.transport('/top/us'))
    network.fabric.detach('registry:/top/us')
    with pytest.raises(ProtocolError):
        us.resolve('id:alice')
    assert network.fabric.dropped == 1


def test_error_codes(server):
    gd = client_of(server, '/top/cn/gd')
    gd.register('id:alice', 'id:owner', 1)
    assert gd.register('id:alice', 'id:owner', 1).code == 43
    assert gd.register('id:bob', 'geo:x', 1).code == 44
    assert gd.resolve('id:nobody').code == 31
    assert gd.resolve('ip:203.0.113.9').code == 32
    assert gd.resolve('dns:example').code == 41


def test_consensus_failure_code(server, hierarchy):
    hierarchy.domain('/top/us').crashed.add(0)
    assert client_of(server, '/top/us').register('id:x', 'id:y', 1).code == 45


@pytest.mark.parametrize('line', [b'', b'RESOLVE\r\n', b'FETCH x\r\n',
                                  b'REGISTER id:a id:b\r\n', b'\xff\xfe\r\n'])
def test_malformed_requests(server, line):
    assert server.handler_for('/top').handle(line).startswith(b'41 ')


def test_commands_are_case_insensitive(server):
    handler = server.handler_for('/top')
    assert handler.handle(b'register id:z id:o 3\r\n').startswith(b'20 OK {')


def test_serve_stream(server):
    handler = server.handler_for('/top/cn')
    out = io.BytesIO()
    count = handler.serve_stream(io.BytesIO(b'REGISTER id:s id:o 1\r\nRESOLVE id:s\r\n'), out)
    assert count == 2
    lines = out.getvalue().split(b'\r\n')
    assert lines[0].startswith(b'20 ') and lines[1].startswith(b'20 ')


def test_parse_response():
    resp = parse_response(b'31 NOT FOUND {"hops": ["/top"]}\r\n')
    assert (resp.code, resp.text, resp.body) == (31, 'NOT FOUND', {'hops': ['/top']})
    assert not resp.ok
    with pytest.raises(ProtocolError):
        parse_response(b'garbage\r\n')

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

import json
import logging
from dataclasses import dataclass
from typing import Callable, Optional

from MINLab import config
from MINLab.identifiers import ContentName
from MINLab.server import CMD_END, RegistryServer
from MINLab.tunnel import CcnRouter, Fabric, InterestPacket


logger = logging.getLogger(__name__)


REGISTRY_COMPONENT = '_registry'
CLIENTS_PREFIX = '_clients'


class ProtocolError(Exception):
    pass


@dataclass(frozen=True)
class Response:
    code: int
    text: str
    body: Optional[dict] = None

    @property
    def ok(self):
        return self.code == 20


def parse_response(data: bytes) -> Response:
    line = data.decode('utf-8').rstrip('\r\n')
    head, sep, body = line.partition(' {')
    parts = head.split(None, 1)
    if not parts or not parts[0].isdigit():
        raise ProtocolError('Malformed response: %r' % line)
    payload = None
    if sep:
        try:
            payload = json.loads('{' + body)
        except ValueError as exc:
            raise ProtocolError('Malformed response body: %s' % exc)
    return Response(int(parts[0]), parts[1] if len(parts) > 1 else '', payload)


class RegistryClient:
    """A client of the registry line protocol.

    'transport' sends one request line and returns the response line; a
    RegistryCommandHandler.handle method works directly.

    """
    def __init__(self, transport: Callable[[bytes], bytes], debug_protocol=False):
        self.transport = transport
        self.debug_protocol = debug_protocol

    def _communicate(self, command, data):
        if self.debug_protocol:
            logger.debug('-> Sending command: %s', data)
        response = parse_response(self.transport(data.encode('utf-8') + CMD_END))
        if response.ok:
            logger.info('- RESULT: %s: SUCCESS', command)
        else:
            logger.warning('- RESULT: %s: FAILURE with error: %d %s',
                           command, response.code, response.text)
        return response

    # Public API

    def register(self, identifier, owner, face_id) -> Response:
        """
        Syntax: REGISTER <identifier> <owner> <face_id>
        """
        return self._communicate('REGISTER', 'REGISTER %s %s %d' % (identifier, owner, face_id))

    def resolve(self, identifier) -> Response:
        """
        Syntax: RESOLVE <identifier>
        """
        return self._communicate('RESOLVE', 'RESOLVE %s' % identifier)


class _RegistryNode:
    """Answers registry Interests for one domain."""

    def __init__(self, label, handler, fabric: Fabric):
        self.label = label
        self.handler = handler
        self.fabric = fabric

    def receive(self, pkt, src):
        client, seq = pkt.name.components[-2:]
        reply = InterestPacket(ContentName((CLIENTS_PREFIX, client, seq)),
                               payload=self.handler.handle(pkt.payload or b''))
        self.fabric.originate(self, src, reply)


class _ClientNode:
    def __init__(self, label, fabric: Fabric):
        self.label = label
        self.fabric = fabric
        self.answers = {}

    def receive(self, pkt, src):
        self.answers[pkt.name.components[-1]] = pkt.payload


class RegistryFabric:
    """Carries registry requests as Interests over a simulated fabric.

    A request for a domain is an Interest named
    <domain>/_registry/<client>/<seq> whose payload is the request line;
    the domain answers with an Interest /_clients/<client>/<seq> carrying
    the response line. Both cross one CCN router.

    """
    def __init__(self, server: RegistryServer, hop_delay_ns=config.DEFAULT_HOP_DELAY_NS):
        self.server = server
        self.fabric = Fabric(hop_delay_ns=hop_delay_ns)
        self.router = self.fabric.attach(CcnRouter('registry-router', self.fabric))
        self._clients = {}
        self._seq = 0
        for domain in server.hierarchy:
            self._domain_node(domain.name)

    @property
    def scheduler(self):
        return self.fabric.scheduler

    @property
    def interests_total(self):
        return self.fabric.interests_total

    def _domain_node(self, name):
        label = 'registry:%s' % name
        if label not in self.fabric.nodes:
            node = _RegistryNode(label, self.server.handler_for(name), self.fabric)
            self.fabric.attach(node)
            self.router.add_route(name.child(REGISTRY_COMPONENT), label)
        return label

    def _client_node(self, label):
        node = self._clients.get(label)
        if node is None:
            node = self.fabric.attach(_ClientNode(label, self.fabric))
            self.router.add_route(ContentName((CLIENTS_PREFIX, label)), label)
            self._clients[label] = node
        return node

    # Public API

    def transport(self, path, client='client') -> Callable[[bytes], bytes]:
        """A RegistryClient transport that reaches the domain at 'path'."""
        name = self.server.hierarchy.domain(path).name
        self._domain_node(name)
        node = self._client_node(client)

        def send(data: bytes) -> bytes:
            self._seq += 1
            seq = str(self._seq)
            pkt = InterestPacket(name.child(REGISTRY_COMPONENT, client, seq), payload=data)
            self.fabric.originate(node, self.router.label, pkt)
            self.fabric.run()
            try:
                return node.answers.pop(seq)
            except KeyError:
                raise ProtocolError('No answer from %s' % name)
        return send

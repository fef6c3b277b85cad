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

"""Line protocol for the registry, independent of the byte transport.

Requests (one line, CRLF terminated):

    REGISTER <identifier> <owner> <face_id>
    RESOLVE <identifier>

Responses:

    <code> <TEXT> [<json>]

"""

import json
import logging

from MINLab import registry
from MINLab.identifiers import ForwardingInfo, IdentifierError, parse_identifier


logger = logging.getLogger(__name__)

CMD_END = b'\r\n'
MAX_DATA_LEN = 8192

# code : (<str_error>, <level>)
ERRCODES = {
    20: ('20 OK', logging.INFO),
    31: ('31 NOT FOUND', logging.WARNING),
    32: ('32 PROXIED', logging.INFO),
    41: ('41 INVALID COMMAND', logging.WARNING),
    43: ('43 DUPLICATE', logging.WARNING),
    44: ('44 COMPLIANCE REJECTED', logging.WARNING),
    45: ('45 CONSENSUS FAILED', logging.WARNING),
}


class RegistryCommandHandler:
    """Answers requests received by one domain."""

    def __init__(self, domain: registry.Domain, debug_protocol=False):
        self.domain = domain
        self.debug_protocol = debug_protocol

        # Indicator of the command that is being processed
        self.doing_command = None

        # command : (<processing_method>, <number_of_args>)
        self.com2func = {
            'REGISTER': (self._com_REGISTER, 3),    # REGISTER <identifier> <owner> <face_id>
            'RESOLVE':  (self._com_RESOLVE, 1),     # RESOLVE <identifier>
        }

    def _verify_grammar(self, data):
        cmd_parts = data.split()
        if not cmd_parts:
            return False
        command = cmd_parts[0].upper()
        if command not in self.com2func:
            return False
        return self.com2func[command][1] == len(cmd_parts) - 1

    def _response(self, code, body=None):
        msg, level = ERRCODES[code]
        if code == 20:
            logger.info('%s: %s ran successfully', self.domain.name, self.doing_command)
        else:
            logger.log(level, '%s: %s answered %s', self.domain.name, self.doing_command, msg)
        if body is not None:
            msg = '%s %s' % (msg, json.dumps(body, sort_keys=True))
        if self.debug_protocol:
            logger.debug('-> Sending: %s', msg)
        return msg.encode('utf-8') + CMD_END

    def _com_REGISTER(self, ident_text, owner_text, face_text):
        try:
            request = registry.RegistrationRequest(
                parse_identifier(ident_text), parse_identifier(owner_text),
                ForwardingInfo(int(face_text)))
        except (IdentifierError, ValueError):
            return self._response(41)
        try:
            record = registry.register(self.domain, request)
        except registry.DuplicateError:
            return self._response(43)
        except registry.ComplianceRejectedError as exc:
            return self._response(44, {'reason': str(exc)})
        except registry.ConsensusFailedError as exc:
            return self._response(45, {'reason': str(exc)})
        return self._response(20, record.as_dict())

    def _com_RESOLVE(self, ident_text):
        try:
            ident = parse_identifier(ident_text)
        except IdentifierError:
            return self._response(41)
        result = registry.resolve(self.domain, ident)
        if result.outcome is registry.Outcome.RESOLVED:
            body = result.as_dict()
            body['face_id'] = result.forwarding.face_id
            return self._response(20, body)
        if result.outcome is registry.Outcome.PROXIED_TO_IP:
            return self._response(32, result.as_dict())
        return self._response(31, result.as_dict())

    # Public API

    def handle(self, data: bytes) -> bytes:
        """Processes one request line and returns the response line."""
        try:
            text = data[:MAX_DATA_LEN].decode('utf-8').strip()
        except UnicodeDecodeError:
            text = ''
        if self.debug_protocol:
            logger.debug('-> Received: %s', text)
        if not self._verify_grammar(text):
            self.doing_command = None
            return self._response(41)
        cmd_parts = text.split()
        command = cmd_parts[0].upper()
        self.doing_command = command
        try:
            return self.com2func[command][0](*cmd_parts[1:])
        finally:
            self.doing_command = None

    def serve_stream(self, rfile, wfile):
        """Answers every line read from 'rfile' on 'wfile' until EOF."""
        count = 0
        for line in iter(lambda: rfile.readline(MAX_DATA_LEN), b''):
            wfile.write(self.handle(line))
            count += 1
        return count


class RegistryServer:
    """Request handlers for every domain of a hierarchy."""

    def __init__(self, hierarchy: registry.Hierarchy, debug_protocol=False):
        self.hierarchy = hierarchy
        self.debug_protocol = debug_protocol
        self._handlers = {}

    def handler_for(self, path) -> RegistryCommandHandler:
        domain = self.hierarchy.domain(path)
        handler = self._handlers.get(domain.name)
        if handler is None:
            handler = RegistryCommandHandler(domain, self.debug_protocol)
            self._handlers[domain.name] = handler
        return handler

    def server_close(self):
        logger.info('Registry preparing for shutdown...')
        self.hierarchy.close()

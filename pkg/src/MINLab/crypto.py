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

import hmac
import struct

from MINLab.util import sha256


class BaseCryptoError(Exception):
    pass

class UnknownNodeKeyError(BaseCryptoError):
    pass

class DataSigningError(BaseCryptoError):
    pass

class DataVerificationError(BaseCryptoError):
    pass


def node_identity(node_id):
    """Returns the public identity of a node: a digest of its number."""
    return sha256(b'minlab-node' + struct.pack('>Q', node_id)).digest()


class NodeKeyring:
    """Keyed-hash authenticators for a closed set of simulated nodes.

    Each node's secret is derived from the keyring seed and its node id,
    so a keyring built with the same seed verifies the same signatures.
    The keyring holds every node's secret; it stands in for a PKI inside
    one simulated deployment.

    """
    digestmod = 'sha256'

    def __init__(self, seed=0, nodes=()):
        self.seed = seed
        self._secrets = {}
        for node in nodes:
            self.add_node(node)

    def _secret(self, node):
        try:
            return self._secrets[node]
        except KeyError:
            raise UnknownNodeKeyError(node)

    # Public API

    def add_node(self, node):
        if node < 0:
            raise UnknownNodeKeyError(node)
        self._secrets[node] = sha256(
            b'minlab-secret' + struct.pack('>QQ', self.seed & (2**64 - 1), node)).digest()

    def has_node(self, node):
        return node in self._secrets

    def public_key(self, node):
        self._secret(node)
        return node_identity(node)

    def sign(self, node, data):
        """Returns the authenticator of the data for the node.

        If the node has no key, raises UnknownNodeKeyError.

        """
        secret = self._secret(node)
        try:
            return hmac.new(secret, data, self.digestmod).digest()
        except TypeError as exc:
            raise DataSigningError(str(exc))

    def verify(self, node, data, signature):
        """Verifies an authenticator; raises DataVerificationError on
        mismatch."""
        if not hmac.compare_digest(self.sign(node, data), signature):
            raise DataVerificationError('Bad signature of node %s' % node)

    def is_valid(self, node, data, signature):
        try:
            self.verify(node, data, signature)
        except BaseCryptoError:
            return False
        return True

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

"""Identifier classes of the network layer.

Four identifier classes coexist: identity, content name, geographic and
IP address. Their text form carries a scheme prefix:

    content:/c1/c2/c3
    id:alice
    geo:cn-gd-sz
    ip:192.0.2.1

Content name components are opaque strings that never contain '/'.
Identity and geographic values are opaque as well.

"""

from __future__ import annotations

import enum
import ipaddress
from dataclasses import dataclass
from typing import Iterable, Optional, Tuple, Union


SEPARATOR = '/'


class IdentifierError(Exception):
    pass

class UnknownSchemeError(IdentifierError):
    pass

class EmptyNameError(IdentifierError):
    pass

class InvalidComponentError(IdentifierError):
    pass

class MalformedAddressError(IdentifierError):
    pass

class OutOfRangeError(IdentifierError):
    pass


class IdentifierKind(enum.Enum):
    IDENTITY = 'id'
    CONTENT = 'content'
    GEO = 'geo'
    IP = 'ip'


@dataclass(frozen=True)
class ContentName:
    """A hierarchical content name /c1/c2/.../cN."""

    components: Tuple[str, ...]

    def __post_init__(self):
        for comp in self.components:
            if not comp or SEPARATOR in comp:
                raise InvalidComponentError('Invalid name component: %r' % (comp,))

    @classmethod
    def from_components(cls, components: Iterable[str]) -> 'ContentName':
        return cls(tuple(components))

    @classmethod
    def parse(cls, text: str) -> 'ContentName':
        """Splits the canonical text form on '/'.

        Empty components produced by a leading, trailing or doubled
        separator are ignored. A name without components raises
        EmptyNameError.

        """
        comps = tuple(c for c in text.split(SEPARATOR) if c)
        if not comps:
            raise EmptyNameError('Empty content name: %r' % text)
        return cls(comps)

    def __len__(self):
        return len(self.components)

    def __str__(self):
        return SEPARATOR + SEPARATOR.join(self.components)

    def __repr__(self):
        return 'ContentName(%r)' % str(self)

    def prefix_key(self, k: int) -> str:
        """Canonical text of the first k components (hash key form)."""
        return SEPARATOR + SEPARATOR.join(self.components[:k])

    def child(self, *components: str) -> 'ContentName':
        return ContentName(self.components + tuple(components))

    def startswith(self, other: 'ContentName') -> bool:
        return self.components[:len(other.components)] == other.components


IpAddress = Union[ipaddress.IPv4Address, ipaddress.IPv6Address]


@dataclass(frozen=True)
class Identifier:
    """Tagged identifier value; exactly one class is populated."""

    kind: IdentifierKind
    value: Union[str, ContentName, IpAddress]

    @classmethod
    def identity(cls, value: str) -> 'Identifier':
        return cls(IdentifierKind.IDENTITY, value)

    @classmethod
    def content(cls, name: Union[str, ContentName]) -> 'Identifier':
        if isinstance(name, str):
            name = ContentName.parse(name)
        return cls(IdentifierKind.CONTENT, name)

    @classmethod
    def geo(cls, value: str) -> 'Identifier':
        return cls(IdentifierKind.GEO, value)

    @classmethod
    def ip(cls, value: Union[str, IpAddress]) -> 'Identifier':
        try:
            return cls(IdentifierKind.IP, ipaddress.ip_address(value))
        except ValueError:
            raise MalformedAddressError('Malformed IP address: %r' % (value,))

    @property
    def is_content(self) -> bool:
        return self.kind is IdentifierKind.CONTENT

    @property
    def name(self) -> ContentName:
        if not self.is_content:
            raise IdentifierError('%s is not a content identifier' % self)
        return self.value

    def __str__(self):
        return '%s:%s' % (self.kind.value, self.value)


@dataclass(frozen=True)
class ForwardingInfo:
    face_id: int
    metric: Optional[int] = None

    def __post_init__(self):
        if self.face_id < 0:
            raise ValueError('face_id must be non-negative')
        if self.metric is not None and self.metric < 0:
            raise ValueError('metric must be non-negative')


_SCHEMES = {kind.value: kind for kind in IdentifierKind}


def parse_identifier(text: str) -> Identifier:
    """Parses the scheme-prefixed text form of an identifier."""
    scheme, sep, rest = text.partition(':')
    if not sep or scheme not in _SCHEMES:
        raise UnknownSchemeError('Unknown identifier scheme: %r' % text)
    kind = _SCHEMES[scheme]
    if kind is IdentifierKind.CONTENT:
        return Identifier.content(ContentName.parse(rest))
    if kind is IdentifierKind.IP:
        return Identifier.ip(rest)
    if not rest:
        raise EmptyNameError('Empty %s identifier' % scheme)
    return Identifier(kind, rest)


def format_identifier(ident: Identifier) -> str:
    return str(ident)


def prefix_of(name: ContentName, k: int) -> ContentName:
    """Returns the name made of the first k components (1 <= k <= N)."""
    if not 1 <= k <= len(name):
        raise OutOfRangeError('Prefix length %d out of range 1..%d' % (k, len(name)))
    if k == len(name):
        return name
    return ContentName(name.components[:k])

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

import numpy as np
import pytest

from MINLab.identifiers import (
    ContentName,
    EmptyNameError,
    ForwardingInfo,
    Identifier,
    IdentifierKind,
    InvalidComponentError,
    MalformedAddressError,
    OutOfRangeError,
    UnknownSchemeError,
    format_identifier,
    parse_identifier,
    prefix_of,
)


def test_parse_content_splits_components():
    ident = parse_identifier('content:/c1/c2/c3')
    assert ident.kind is IdentifierKind.CONTENT
    assert ident.name.components == ('c1', 'c2', 'c3')
    assert str(ident.name) == '/c1/c2/c3'


def test_parse_ip():
    ident = parse_identifier('ip:192.0.2.1')
    assert ident.kind is IdentifierKind.IP
    assert ident.value == ipaddress.ip_address('192.0.2.1')
    assert parse_identifier('ip:2001:db8::1').value.version == 6


def test_parse_identity_and_geo_are_opaque():
    assert parse_identifier('id:alice') == Identifier.identity('alice')
    assert parse_identifier('geo:cn-gd-sz') == Identifier.geo('cn-gd-sz')


@pytest.mark.parametrize('text, error', [
    ('content:/', EmptyNameError),
    ('content:', EmptyNameError),
    ('id:', EmptyNameError),
    ('dns:example.org', UnknownSchemeError),
    ('/c1/c2', UnknownSchemeError),
    ('ip:300.1.2.3', MalformedAddressError),
])
def test_parse_errors(text, error):
    with pytest.raises(error):
        parse_identifier(text)


def test_component_may_not_contain_separator():
    with pytest.raises(InvalidComponentError):
        ContentName(('a/b',))
    with pytest.raises(InvalidComponentError):
        ContentName(('',))


def test_format_parse_round_trip_over_random_identifiers():
    rng = np.random.default_rng(11)
    for _ in range(200):
        kind = int(rng.integers(4))
        if kind == 0:
            comps = ['x%d' % v for v in rng.integers(1000, size=int(rng.integers(1, 8)))]
            ident = Identifier.content(ContentName(tuple(comps)))
        elif kind == 1:
            ident = Identifier.identity('user%d' % rng.integers(10**6))
        elif kind == 2:
            ident = Identifier.geo('g-%d' % rng.integers(10**6))
        else:
            ident = Identifier.ip('10.%d.%d.%d' % tuple(rng.integers(256, size=3)))
        assert parse_identifier(format_identifier(ident)) == ident


def test_prefix_of():
    n = ContentName.parse('/c1/c2/c3')
    assert str(prefix_of(n, 2)) == '/c1/c2'
    assert prefix_of(n, 3) == n
    assert prefix_of(prefix_of(n, 3), 1) == prefix_of(n, 1)
    with pytest.raises(OutOfRangeError):
        prefix_of(ContentName.parse('/c1'), 2)
    with pytest.raises(OutOfRangeError):
        prefix_of(n, 0)


def test_forwarding_info_rejects_negative_face():
    with pytest.raises(ValueError):
        ForwardingInfo(-1)
    assert ForwardingInfo(0).metric is None

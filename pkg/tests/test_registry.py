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

import os

import pytest

from MINLab.database import ChainDatabase, CorruptDatabaseError
from MINLab.identifiers import ForwardingInfo, Identifier
from MINLab.registry import (
    ComplianceRejectedError,
    ConsensusFailedError,
    DuplicateError,
    Hierarchy,
    Outcome,
    RecordStatus,
    RegistrationRecord,
    RegistrationRequest,
    RegistryError,
    UnknownDomainError,
    register,
    resolve,
)

from conftest import name


ALICE = Identifier.identity('alice')


def request(ident, owner=ALICE, face=1):
    return RegistrationRequest(ident, owner, ForwardingInfo(face))


def test_build_creates_missing_ancestors(hierarchy):
    assert sorted(str(d.name) for d in hierarchy) == [
        '/top', '/top/cn', '/top/cn/bj', '/top/cn/gd', '/top/us']
    assert hierarchy.domain('/top/cn/gd').parent is hierarchy.domain('/top/cn')
    with pytest.raises(UnknownDomainError):
        hierarchy.domain('/top/jp')
    with pytest.raises(UnknownDomainError):
        hierarchy.add_domain('/elsewhere/x')
    with pytest.raises(RegistryError):
        Hierarchy.build([])


def test_register_commits_through_consensus(hierarchy):
    gd = hierarchy.domain('/top/cn/gd')
    record = register(gd, request(Identifier.identity('bob'), face=7))
    assert record.status is RecordStatus.COMMITTED
    assert record.domain == name('/top/cn/gd')
    assert record.height == gd.chain.height == 1
    assert gd.chain.find_transaction(record.tx_id) == 1
    assert gd.audit() == []
    assert RegistrationRecord.from_dict(record.as_dict()) == record
    assert set(record.as_dict()) == {'identifier', 'owner', 'domain', 'height', 'status',
                                     'tx_id', 'face_id', 'metric'}


def test_content_name_goes_to_its_domain(hierarchy):
    us = hierarchy.domain('/top/us')
    record = register(us, request(Identifier.content('/top/cn/gd/video/1')))
    assert record.domain == name('/top/cn/gd')
    assert us.chain.height == 0


def test_resolve_locally(hierarchy):
    gd = hierarchy.domain('/top/cn/gd')
    register(gd, request(Identifier.geo('cn-gd-sz'), face=4))
    result = resolve(gd, Identifier.geo('cn-gd-sz'))
    assert result.resolved
    assert result.hops == [name('/top/cn/gd')]
    assert result.forwarding.face_id == 4


def test_resolve_content_walks_toward_its_domain(hierarchy):
    ident = Identifier.content('/top/cn/gd/obj1')
    register(hierarchy.domain('/top/cn/gd'), request(ident))
    result = resolve(hierarchy.domain('/top/cn/bj'), ident)
    assert result.resolved
    assert result.hops == [name('/top/cn/bj'), name('/top/cn'), name('/top/cn/gd')]


def test_resolve_searches_the_tree_without_revisits(hierarchy):
    register(hierarchy.domain('/top/cn/bj'), request(Identifier.identity('carol')))
    result = resolve(hierarchy.domain('/top/us'), Identifier.identity('carol'))
    assert result.resolved
    assert result.hops[0] == name('/top/us')
    assert result.hops[-1] == name('/top/cn/bj')
    assert len(result.hops) == len(set(result.hops))
    assert result.record.owner == ALICE


def test_second_lookup_hits_the_cache(hierarchy):
    ident = Identifier.identity('dave')
    register(hierarchy.domain('/top/cn/gd'), request(ident))
    us = hierarchy.domain('/top/us')
    assert not resolve(us, ident).cached
    again = resolve(us, ident)
    assert again.cached and again.hops == [name('/top/us')]


def test_unregistered_identifier_visits_every_domain_once(hierarchy):
    result = resolve(hierarchy.domain('/top/cn/gd'), Identifier.identity('nobody'))
    assert result.outcome is Outcome.NOT_FOUND
    assert sorted(result.hops, key=str) == sorted((d.name for d in hierarchy), key=str)
    assert result.error


def test_ip_identifiers_are_proxied_unless_local(hierarchy):
    gd = hierarchy.domain('/top/cn/gd')
    ip = Identifier.ip('192.0.2.5')
    register(gd, request(ip))
    assert resolve(gd, ip).resolved
    assert resolve(hierarchy.domain('/top/us'), ip).outcome is Outcome.PROXIED_TO_IP


def test_duplicate_registration(hierarchy):
    register(hierarchy.domain('/top/us'), request(Identifier.identity('erin')))
    with pytest.raises(DuplicateError):
        register(hierarchy.domain('/top/cn/bj'), request(Identifier.identity('erin')))


def test_compliance_rejection_is_not_resolvable(hierarchy):
    us = hierarchy.domain('/top/us')
    ident = Identifier.identity('frank')
    with pytest.raises(ComplianceRejectedError):
        register(us, request(ident, owner=Identifier.geo('somewhere')))
    assert us.rejected[-1].status is RecordStatus.REJECTED
    assert us.chain.height == 0
    assert resolve(us, ident).outcome is Outcome.NOT_FOUND


def test_failed_consensus_is_not_resolvable(hierarchy):
    bj = hierarchy.domain('/top/cn/bj')
    bj.dissenting.update({1, 2})
    ident = Identifier.identity('grace')
    with pytest.raises(ConsensusFailedError):
        register(bj, request(ident))
    assert resolve(bj, ident).outcome is Outcome.NOT_FOUND
    bj.dissenting.clear()
    assert register(bj, request(ident)).height == 1


def test_absent_supervisor_fails_the_round(hierarchy):
    us = hierarchy.domain('/top/us')
    us.crashed.add(2)
    with pytest.raises(ConsensusFailedError):
        register(us, request(Identifier.identity('heidi')))


def test_records_persist_per_supervisor(tmp_path):
    tree = Hierarchy.build(['/top/a'], supervisors=2, data_dir=str(tmp_path))
    try:
        register(tree.domain('/top/a'), request(Identifier.identity('ivan')))
    finally:
        tree.close()
    files = sorted(os.listdir(str(tmp_path)))
    assert 'top_a.chain' in files
    assert 'top_a-s0.jsonl' in files and 'top_a-s1.jsonl' in files


def test_reopened_hierarchy_restores_chain_and_records(tmp_path):
    bob = Identifier.identity('bob')
    tree = Hierarchy.build(['/top/cn'], supervisors=3, seed=5, data_dir=str(tmp_path))
    try:
        register(tree.domain('/top/cn'), request(bob, face=7))
    finally:
        tree.close()

    tree = Hierarchy.build(['/top/cn'], supervisors=3, seed=5, data_dir=str(tmp_path))
    try:
        cn = tree.domain('/top/cn')
        assert cn.chain.height == 1
        assert cn.chain.verify().ok
        assert cn.audit() == []
        assert resolve(cn, bob).forwarding == ForwardingInfo(7)
        with pytest.raises(DuplicateError):
            register(tree.domain('/top'), request(bob))
        assert register(cn, request(Identifier.identity('carol'))).height == 2
    finally:
        tree.close()
    assert len(ChainDatabase(str(tmp_path / 'top_cn.chain')).load()) == 2


def test_reopening_with_other_keys_is_refused(tmp_path):
    tree = Hierarchy.build(['/top/cn'], supervisors=3, seed=5, data_dir=str(tmp_path))
    try:
        register(tree.domain('/top/cn'), request(Identifier.identity('bob')))
    finally:
        tree.close()
    with pytest.raises(CorruptDatabaseError):
        Hierarchy.build(['/top/cn'], supervisors=3, seed=6, data_dir=str(tmp_path))


@pytest.mark.slow
def test_thousand_identifiers_resolve_everywhere(hierarchy):
    domains = list(hierarchy)
    idents = []
    for i in range(1000):
        ident = Identifier.identity('user%d' % i)
        register(domains[i % len(domains)], request(ident, face=i % 64))
        idents.append(ident)
    for domain in domains:
        for ident in idents:
            assert resolve(domain, ident).resolved
    assert all(d.audit() == [] for d in domains)

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

"""Identifier registration and resolution over a tree of domains.

Every domain runs its own consortium chain among its supervisors. A
registration is reviewed for compliance, voted through one consensus
round, stored off-chain by every supervisor and installed in the domain
FIB. Resolution checks the querying domain, climbs toward the top and
then descends, either along the domain path carried by a content name or
breadth first.

"""

from __future__ import annotations

import collections
import enum
import logging
import os
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional

import numpy as np

from MINLab import config
from MINLab.apov import (
    Chain,
    ChainValidationError,
    ConsensusConfig,
    ConsensusError,
    Transaction,
    cast_validation_votes,
    honest_policy,
    make_block,
    seal_block_group,
    tally_and_seal,
)
from MINLab.crypto import NodeKeyring
from MINLab.database import ChainDatabase, CorruptDatabaseError, RecordDatabase
from MINLab.fib import FibError, Hpt
from MINLab.identifiers import (
    ContentName,
    ForwardingInfo,
    Identifier,
    IdentifierError,
    IdentifierKind,
    parse_identifier,
)
from MINLab.util import digest, ensure_dir


logger = logging.getLogger(__name__)


class RegistryError(Exception):
    pass

class UnknownDomainError(RegistryError):
    pass

class DuplicateError(RegistryError):
    pass

class ComplianceRejectedError(RegistryError):
    pass

class ConsensusFailedError(RegistryError):
    pass


class RecordStatus(enum.Enum):
    COMMITTED = 'committed'
    REJECTED = 'rejected'


class Outcome(enum.Enum):
    RESOLVED = 'resolved'
    PROXIED_TO_IP = 'proxied-to-ip'
    NOT_FOUND = 'not-found'


@dataclass(frozen=True)
class RegistrationRequest:
    identifier: Identifier
    owner: Identifier
    forwarding: ForwardingInfo


@dataclass(frozen=True)
class RegistrationRecord:
    identifier: Identifier
    owner: Identifier
    domain: ContentName
    height: int
    status: RecordStatus
    tx_id: int
    forwarding: ForwardingInfo

    def as_dict(self):
        return {
            'identifier': str(self.identifier),
            'owner': str(self.owner),
            'domain': str(self.domain),
            'height': self.height,
            'status': self.status.value,
            'tx_id': self.tx_id,
            'face_id': self.forwarding.face_id,
            'metric': self.forwarding.metric,
        }

    @classmethod
    def from_dict(cls, data) -> 'RegistrationRecord':
        return cls(
            identifier=parse_identifier(data['identifier']),
            owner=parse_identifier(data['owner']),
            domain=ContentName.parse(data['domain']),
            height=int(data['height']),
            status=RecordStatus(data['status']),
            tx_id=int(data['tx_id']),
            forwarding=ForwardingInfo(int(data['face_id']), data.get('metric')),
        )


@dataclass
class ResolutionResult:
    outcome: Outcome
    hops: List[ContentName] = field(default_factory=list)
    forwarding: Optional[ForwardingInfo] = None
    record: Optional[RegistrationRecord] = None
    error: Optional[str] = None
    cached: bool = False

    @property
    def resolved(self):
        return self.outcome is Outcome.RESOLVED

    def as_dict(self):
        out = {'outcome': self.outcome.value, 'hops': [str(h) for h in self.hops],
               'cached': self.cached}
        if self.record is not None:
            out['record'] = self.record.as_dict()
        if self.error:
            out['error'] = self.error
        return out


CompliancePredicate = Callable[[RegistrationRequest, 'Domain'], Optional[str]]


def default_compliance(request: RegistrationRequest, domain: 'Domain') -> Optional[str]:
    """Syntactic review of a request; returns a reason or None."""
    ident = request.identifier
    if request.owner.kind is not IdentifierKind.IDENTITY:
        return 'owner must be an id: identifier'
    if ident.is_content:
        if len(ident.name) > config.MAX_NAME_LENGTH:
            return 'content name longer than %d components' % config.MAX_NAME_LENGTH
        return None
    try:
        anchor_name(domain.name, ident)
    except IdentifierError as exc:
        return str(exc)
    return None


def anchor_name(domain: ContentName, ident: Identifier) -> ContentName:
    """FIB entry carrying a non-content identifier: <domain>/_<scheme>/<value>."""
    return domain.child('_' + ident.kind.value, str(ident.value))


def transaction_id(ident: Identifier) -> int:
    return int.from_bytes(digest(str(ident).encode('utf-8'))[:8], 'big') >> 1


class Domain:
    """One node of the domain tree with its chain, records and FIB."""

    def __init__(self, name: ContentName, parent: Optional['Domain'] = None,
                 supervisors=config.DEFAULT_SUPERVISORS, seed=config.DEFAULT_SEED,
                 cache_size=config.DEFAULT_CACHE_SIZE, data_dir=None):
        if supervisors < 1:
            raise RegistryError('A domain needs at least one supervisor')
        self.name = name
        self.parent = parent
        self.children: List[Domain] = []
        self.hierarchy: Optional[Hierarchy] = None
        self.supervisors = list(range(supervisors))
        self.keyring = NodeKeyring(seed, self.supervisors)
        self.cfg = ConsensusConfig(n_b=1, n_c=supervisors, n_bc=1)
        self.chain = Chain(self.cfg, self.keyring)
        self.leader = self.supervisors[0]
        self.rng = np.random.default_rng([seed, len(name)] + [ord(c) for c in str(name)])
        self.offchain: Dict[Identifier, RegistrationRecord] = {}
        self.rejected: List[RegistrationRecord] = []
        self.fib = Hpt()
        self.cache: collections.OrderedDict = collections.OrderedDict()
        self.cache_size = cache_size
        self.crashed = set()
        self.dissenting = set()
        slug = '_'.join(name.components)
        if data_dir:
            data_dir = ensure_dir(data_dir)
            self.chain_db = ChainDatabase(os.path.join(data_dir, '%s.chain' % slug))
            self.replicas = {s: RecordDatabase(os.path.join(data_dir, '%s-s%d.jsonl' % (slug, s)))
                             for s in self.supervisors}
        else:
            self.chain_db = ChainDatabase()
            self.replicas = {s: RecordDatabase() for s in self.supervisors}

    def __repr__(self):
        return '<Domain %s>' % self.name

    @property
    def depth(self):
        return len(self.name)

    def database_activate(self):
        """Opens the stores and replays what an earlier session left in
        them: block groups onto the chain, then the off-chain records
        whose transaction the chain holds.

        Raises CorruptDatabaseError when a stored block group does not
        validate.

        """
        for group in self.chain_db.load():
            try:
                self.chain.append(group)
            except ChainValidationError as exc:
                raise CorruptDatabaseError('%s: %s' % (self.chain_db.path, exc))
            self.leader = group.header.next_leader
        self.chain_db.database_activate()
        for db in self.replicas.values():
            db.database_activate()
        self._restore_records()

    def database_close(self):
        self.chain_db.database_close()
        for db in self.replicas.values():
            db.database_close()

    # Private API

    def _policy(self, supervisor, prev_hash):
        if supervisor in self.dissenting:
            return lambda block: False
        return honest_policy(prev_hash, self.cfg.K)

    def _run_round(self, tx: Transaction) -> int:
        """Votes one transaction through a consensus round; returns the
        committed height."""
        if self.leader in self.crashed:
            raise ConsensusFailedError('%s: leader %d is absent' % (self.name, self.leader))
        height = self.chain.height + 1
        prev_hash = self.chain.head_digest
        block = make_block(self.leader, [tx], prev_hash, height, self.cfg.K,
                           self.keyring.public_key(self.leader))
        votes = [cast_validation_votes(s, [block], self._policy(s, prev_hash), self.keyring)
                 for s in self.supervisors if s not in self.crashed]
        try:
            header = tally_and_seal(self.leader, votes, [block], height, self.rng,
                                    consortium=self.supervisors, eligible=self.supervisors,
                                    prev_group_hash=prev_hash)
        except ConsensusError as exc:
            raise ConsensusFailedError('%s: %s' % (self.name, exc))
        group = seal_block_group(header, [block])
        if not group.body:
            raise ConsensusFailedError('%s: block disapproved by the consortium' % self.name)
        try:
            self.chain.append(group)
        except ChainValidationError as exc:
            raise ConsensusFailedError('%s: %s' % (self.name, exc))
        self.chain_db.append(group)
        self.leader = header.next_leader
        return height

    def _install(self, record: RegistrationRecord):
        ident = record.identifier
        if ident.is_content:
            self.fib.insert(ident.name, record.forwarding)
        else:
            anchor = anchor_name(self.name, ident)
            self.fib.insert(anchor, record.forwarding)
            self.fib.bind_identifier(anchor, ident)

    def _restore_records(self):
        restored = 0
        for data in list(self.replicas[self.supervisors[0]].values()):
            record = RegistrationRecord.from_dict(data)
            if self.chain.find_transaction(record.tx_id) != record.height:
                logger.warning('%s: dropping %s, no transaction at height %d',
                               self.name, record.identifier, record.height)
                continue
            self.offchain[record.identifier] = record
            self._install(record)
            restored += 1
        if restored or self.chain.height:
            logger.info('%s: restored %d records at height %d', self.name, restored,
                        self.chain.height)

    def _replicate(self, record: RegistrationRecord):
        data = record.as_dict()
        for db in self.replicas.values():
            db.put(data)

    # Public API

    def commit(self, request: RegistrationRequest) -> RegistrationRecord:
        """Runs the consensus round, then stores the record off chain and
        installs it in the FIB."""
        tx = Transaction(transaction_id(request.identifier),
                         ('%s %s' % (request.identifier, request.owner)).encode('utf-8'))
        height = self._run_round(tx)
        record = RegistrationRecord(request.identifier, request.owner, self.name, height,
                                    RecordStatus.COMMITTED, tx.id, request.forwarding)
        self.offchain[request.identifier] = record
        self._replicate(record)
        self._install(record)
        logger.info('%s: registered %s at height %d', self.name, request.identifier, height)
        return record

    def lookup(self, ident: Identifier):
        """Local FIB lookup; returns (ForwardingInfo, record) or None."""
        try:
            name = self.fib.translate(ident)
        except FibError:
            return None
        result = self.fib.lookup_lpm(name)
        if not result.hit or result.matched_prefix != name:
            return None
        return result.forwarding, self.offchain.get(ident)

    def audit(self) -> List[str]:
        """Records whose height does not hold their transaction, and
        replicas that disagree with the off-chain map."""
        problems = []
        for ident, record in self.offchain.items():
            if self.chain.find_transaction(record.tx_id) != record.height:
                problems.append('%s: no transaction at height %d' % (ident, record.height))
        for sup, db in self.replicas.items():
            if len(db) != len(self.offchain):
                problems.append('supervisor %d holds %d of %d records'
                                % (sup, len(db), len(self.offchain)))
        return problems

    def cache_get(self, ident):
        entry = self.cache.get(ident)
        if entry is not None:
            self.cache.move_to_end(ident)
        return entry

    def cache_put(self, ident, entry):
        self.cache[ident] = entry
        self.cache.move_to_end(ident)
        while len(self.cache) > self.cache_size:
            self.cache.popitem(last=False)


class Hierarchy:
    """The domain tree, rooted at a single top-level domain."""

    def __init__(self, top='/top', supervisors=config.DEFAULT_SUPERVISORS,
                 seed=config.DEFAULT_SEED, cache_size=config.DEFAULT_CACHE_SIZE,
                 data_dir=None, compliance: CompliancePredicate = default_compliance):
        self.supervisors = supervisors
        self.seed = seed
        self.cache_size = cache_size
        self.data_dir = data_dir
        self.compliance = compliance
        self.domains: Dict[ContentName, Domain] = {}
        self.committed: Dict[Identifier, Domain] = {}
        top = ContentName.parse(top) if isinstance(top, str) else top
        self.top = self._new_domain(top, None)

    def __iter__(self):
        return iter(self.domains.values())

    def __len__(self):
        return len(self.domains)

    def _new_domain(self, name, parent):
        domain = Domain(name, parent, self.supervisors, self.seed, self.cache_size, self.data_dir)
        domain.hierarchy = self
        domain.database_activate()
        for ident in domain.offchain:
            self.committed[ident] = domain
        self.domains[name] = domain
        if parent is not None:
            parent.children.append(domain)
        logger.debug('Domain %s created', name)
        return domain

    def add_domain(self, path) -> Domain:
        """Adds a domain and any missing ancestors below the top domain."""
        name = ContentName.parse(path) if isinstance(path, str) else path
        if not name.startswith(self.top.name):
            raise UnknownDomainError('%s is not under %s' % (name, self.top.name))
        parent = self.top
        for k in range(len(self.top.name) + 1, len(name) + 1):
            sub = ContentName(name.components[:k])
            domain = self.domains.get(sub)
            if domain is None:
                domain = self._new_domain(sub, parent)
            parent = domain
        return parent

    def domain(self, path) -> Domain:
        name = ContentName.parse(path) if isinstance(path, str) else path
        try:
            return self.domains[name]
        except KeyError:
            raise UnknownDomainError(str(name))

    def carried_domain(self, ident: Identifier) -> Optional[Domain]:
        """The deepest domain whose path prefixes a content identifier."""
        if not ident.is_content:
            return None
        comps = ident.name.components
        for k in range(len(comps) - 1, 0, -1):
            domain = self.domains.get(ContentName(comps[:k]))
            if domain is not None:
                return domain
        return None

    def close(self):
        for domain in self.domains.values():
            domain.database_close()

    @classmethod
    def build(cls, paths, **kwargs) -> 'Hierarchy':
        paths = list(paths)
        if not paths:
            raise RegistryError('No domains given')
        top = ContentName(ContentName.parse(paths[0]).components[:1])
        hierarchy = cls(top, **kwargs)
        for path in paths:
            hierarchy.add_domain(path)
        return hierarchy


def register(domain: Domain, request: RegistrationRequest) -> RegistrationRecord:
    """Registers an identifier through the domain that received the
    request; content names carrying a domain path go to that domain."""
    hierarchy = domain.hierarchy
    ident = request.identifier
    if ident in hierarchy.committed:
        raise DuplicateError('%s is already registered in %s'
                             % (ident, hierarchy.committed[ident].name))
    target = hierarchy.carried_domain(ident) or domain
    if target is not domain:
        logger.debug('%s: forwarding %s to %s', domain.name, ident, target.name)
    reason = hierarchy.compliance(request, target)
    if reason is not None:
        target.rejected.append(RegistrationRecord(ident, request.owner, target.name, -1,
                                                  RecordStatus.REJECTED, -1, request.forwarding))
        logger.warning('%s: %s rejected: %s', target.name, ident, reason)
        raise ComplianceRejectedError(reason)
    record = target.commit(request)
    hierarchy.committed[ident] = target
    return record


def _descend(start: Domain, target: Optional[Domain], visited):
    """Domains to visit below 'start': the path toward 'target' when it is
    known, otherwise the unvisited subtree breadth first."""
    if target is not None and target.name.startswith(start.name):
        return [target.hierarchy.domains[ContentName(target.name.components[:k])]
                for k in range(len(start.name) + 1, len(target.name) + 1)]
    order = []
    queue = collections.deque(start.children)
    while queue:
        d = queue.popleft()
        queue.extend(d.children)
        if d.name not in visited:
            order.append(d)
    return order


def resolve(origin: Domain, ident: Identifier) -> ResolutionResult:
    """Local check, then upward recursion, then downward search."""
    hops: List[ContentName] = []
    visited = set()

    def check(domain):
        hops.append(domain.name)
        visited.add(domain.name)
        found = domain.lookup(ident)
        if found is None:
            return None
        forwarding, record = found
        return ResolutionResult(Outcome.RESOLVED, hops, forwarding, record)

    # The local FIB wins over the cache
    result = check(origin)
    if result is not None:
        return result
    if ident.kind is IdentifierKind.IP:
        return ResolutionResult(Outcome.PROXIED_TO_IP, hops)
    cached = origin.cache_get(ident)
    if cached is not None:
        forwarding, record = cached
        return ResolutionResult(Outcome.RESOLVED, hops, forwarding, record, cached=True)

    target = origin.hierarchy.carried_domain(ident)
    domain = origin
    while domain.parent is not None:
        if target is not None and target.name.startswith(domain.name):
            break
        domain = domain.parent
        result = check(domain)
        if result is not None:
            break
    if result is None:
        for sub in _descend(domain, target, visited):
            result = check(sub)
            if result is not None:
                break
    if result is None:
        logger.debug('%s: %s not found after %d hops', origin.name, ident, len(hops))
        return ResolutionResult(Outcome.NOT_FOUND, hops, error='identifier %s is not registered' % ident)
    origin.cache_put(ident, (result.forwarding, result.record))
    return result

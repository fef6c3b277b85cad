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

"""APoV consensus state machine.

A round runs in four steps:

    S1  every bookkeeper publishes a block
    S2  every consortium node votes on each block and sends one vote
        message to the round leader
    S3  the leader tallies the votes, seals the block group header and
        draws the next leader
    S4  every node verifies the block group and stores it

A block enters the block group body only with strictly more than half of
the consortium's approvals. All functions here are pure; the simulator and
the registry drive them.

"""

from __future__ import annotations

import collections
import enum
import functools
import logging
import struct
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from MINLab import config
from MINLab.crypto import BaseCryptoError, NodeKeyring, node_identity
from MINLab.util import WireReader, ZERO_DIGEST, digest, pack_blob


logger = logging.getLogger(__name__)


class ConsensusError(Exception):
    pass

class ConsensusConfigError(ConsensusError):
    pass

class TooManyTransactionsError(ConsensusError):
    pass

class IncompleteVotesError(ConsensusError):
    pass

class UnexpectedVoterError(ConsensusError):
    pass

class NotEnoughCandidatesError(ConsensusError):
    pass

class ChainValidationError(ConsensusError):
    pass


EMPTY_MERKLE_ROOT = digest(b'')


class Opinion(enum.IntEnum):
    DISAPPROVE = 0
    APPROVE = 1


@dataclass(frozen=True)
class MessageSizes:
    """Nominal wire sizes in bytes: message header M, block header H,
    transaction T, vote message header H_v, per-vote V_b, block group
    header H_r and per-block record R_b."""

    M: int = config.DEFAULT_M
    H: int = config.DEFAULT_H
    T: int = config.DEFAULT_T
    H_v: int = config.DEFAULT_H_V
    V_b: int = config.DEFAULT_V_B
    H_r: int = config.DEFAULT_H_R
    R_b: int = config.DEFAULT_R_B

    def __post_init__(self):
        for name, value in self.__dict__.items():
            if value <= 0:
                raise ConsensusConfigError('%s must be positive' % name)


@dataclass(frozen=True)
class ConsensusConfig:
    n_b: int
    n_c: int
    n_bc: int
    K: int = config.DEFAULT_K
    term_length: int = config.DEFAULT_TERM_LENGTH

    def __post_init__(self):
        if self.n_b < 1 or self.n_c < 1:
            raise ConsensusConfigError('n_b and n_c must be at least 1')
        if not 0 <= self.n_bc <= min(self.n_b, self.n_c):
            raise ConsensusConfigError('n_bc must lie in 0..min(n_b, n_c)')
        if self.K < 1 or self.term_length < 1:
            raise ConsensusConfigError('K and term_length must be at least 1')

    @property
    def majority(self):
        """Smallest approval count strictly above n_c/2."""
        return self.n_c // 2 + 1


@dataclass(frozen=True)
class Transaction:
    id: int
    payload: bytes = b''
    nominal_size: int = config.DEFAULT_T


@dataclass(frozen=True)
class Block:
    prev_group_hash: bytes
    merkle_root: bytes
    bookkeeper_key: bytes
    bookkeeper: int
    timestamp: int
    txs: Tuple[Transaction, ...]

    @cached_property
    def digest(self) -> bytes:
        return digest(encode_block(self))

    @cached_property
    def is_well_formed(self) -> bool:
        """Unique transaction ids, a matching merkle root and the
        bookkeeper's own public identity."""
        ids = [tx.id for tx in self.txs]
        if len(set(ids)) != len(ids):
            return False
        if self.bookkeeper_key != node_identity(self.bookkeeper):
            return False
        return self.merkle_root == _merkle_root(tuple(ids))

    def nominal_size(self, sizes: MessageSizes) -> int:
        return sizes.M + sizes.H + sum(tx.nominal_size for tx in self.txs)


@dataclass(frozen=True)
class ValidationVote:
    block_hash: bytes
    opinion: Opinion
    voter: int
    signature: bytes

    def signed_data(self):
        return vote_signing_data(self.block_hash, self.opinion, self.voter)


@dataclass(frozen=True)
class VoteMessage:
    voter: int
    votes: Tuple[ValidationVote, ...]

    def nominal_size(self, sizes: MessageSizes) -> int:
        return sizes.M + sizes.H_v + len(self.votes) * sizes.V_b


@dataclass(frozen=True)
class ConfidenceVote:
    candidate: int
    voter: int
    weight: int = 1


@dataclass(frozen=True)
class TallyEntry:
    block_hash: bytes
    approve: int
    disapprove: int


@dataclass(frozen=True)
class BlockGroupHeader:
    height: int
    prev_group_hash: bytes
    leader: int
    next_leader: int
    leader_seed: int
    tally: Tuple[TallyEntry, ...]
    vote_messages: Tuple[VoteMessage, ...]

    def nominal_size(self, sizes: MessageSizes) -> int:
        votes = sum(m.nominal_size(sizes) - sizes.M for m in self.vote_messages)
        return sizes.M + sizes.H_r + len(self.tally) * sizes.R_b + votes


@dataclass(frozen=True)
class BlockGroup:
    header: BlockGroupHeader
    body: Tuple[Block, ...]

    @cached_property
    def digest(self) -> bytes:
        return digest(encode_group(self))

    @property
    def height(self):
        return self.header.height

    def tx_ids(self):
        return [tx.id for block in self.body for tx in block.txs]


@dataclass
class ValidationReport:
    reasons: List[Tuple[str, str]] = field(default_factory=list)

    @property
    def ok(self):
        return not self.reasons

    def fail(self, code, detail=''):
        self.reasons.append((code, detail))

    def codes(self):
        return [code for code, _ in self.reasons]

    def __bool__(self):
        return self.ok


#
# Canonical serialization
#

_TX = struct.Struct('>QI')
_BLOCK = struct.Struct('>QQI')
_VOTE = struct.Struct('>BQ')
_HEADER = struct.Struct('>QQQQ')
_TALLY = struct.Struct('>II')


def encode_block(block: Block) -> bytes:
    parts = [
        pack_blob(block.prev_group_hash),
        pack_blob(block.merkle_root),
        pack_blob(block.bookkeeper_key),
        _BLOCK.pack(block.bookkeeper, block.timestamp, len(block.txs)),
    ]
    for tx in block.txs:
        parts.append(_TX.pack(tx.id, tx.nominal_size))
        parts.append(pack_blob(tx.payload))
    return b''.join(parts)


def _read_block(r: WireReader) -> Block:
    prev, root, key = r.blob(), r.blob(), r.blob()
    bookkeeper, timestamp, count = r.unpack(_BLOCK.format)
    txs = []
    for _ in range(count):
        tx_id, size = r.unpack(_TX.format)
        txs.append(Transaction(tx_id, r.blob(), size))
    return Block(prev, root, key, bookkeeper, timestamp, tuple(txs))


def decode_block(data: bytes) -> Block:
    r = WireReader(data)
    block = _read_block(r)
    r.done()
    return block


def _encode_vote_message(msg: VoteMessage) -> bytes:
    parts = [struct.pack('>QI', msg.voter, len(msg.votes))]
    for vote in msg.votes:
        parts.append(pack_blob(vote.block_hash))
        parts.append(_VOTE.pack(vote.opinion, vote.voter))
        parts.append(pack_blob(vote.signature))
    return b''.join(parts)


def _read_vote_message(r: WireReader) -> VoteMessage:
    voter, count = r.unpack('>QI')
    votes = []
    for _ in range(count):
        block_hash = r.blob()
        opinion, vote_voter = r.unpack(_VOTE.format)
        votes.append(ValidationVote(block_hash, Opinion(opinion), vote_voter, r.blob()))
    return VoteMessage(voter, tuple(votes))


def encode_header(header: BlockGroupHeader) -> bytes:
    parts = [
        _HEADER.pack(header.height, header.leader, header.next_leader, header.leader_seed),
        pack_blob(header.prev_group_hash),
        struct.pack('>I', len(header.tally)),
    ]
    for entry in header.tally:
        parts.append(pack_blob(entry.block_hash))
        parts.append(_TALLY.pack(entry.approve, entry.disapprove))
    parts.append(struct.pack('>I', len(header.vote_messages)))
    parts.extend(_encode_vote_message(m) for m in header.vote_messages)
    return b''.join(parts)


def _read_header(r: WireReader) -> BlockGroupHeader:
    height, leader, next_leader, seed = r.unpack(_HEADER.format)
    prev = r.blob()
    tally = []
    for _ in range(r.unpack('>I')):
        block_hash = r.blob()
        tally.append(TallyEntry(block_hash, *r.unpack(_TALLY.format)))
    messages = tuple(_read_vote_message(r) for _ in range(r.unpack('>I')))
    return BlockGroupHeader(height, prev, leader, next_leader, seed, tuple(tally), messages)


def encode_group(group: BlockGroup) -> bytes:
    parts = [pack_blob(encode_header(group.header)), struct.pack('>I', len(group.body))]
    parts.extend(pack_blob(encode_block(b)) for b in group.body)
    return b''.join(parts)


def decode_group(data: bytes) -> BlockGroup:
    r = WireReader(data)
    hr = WireReader(r.blob())
    header = _read_header(hr)
    hr.done()
    body = tuple(decode_block(r.blob()) for _ in range(r.unpack('>I')))
    r.done()
    return BlockGroup(header, body)


#
# Merkle root
#

@functools.lru_cache(maxsize=4096)
def _merkle_root(tx_ids: Tuple[int, ...]) -> bytes:
    if not tx_ids:
        return EMPTY_MERKLE_ROOT
    level = [digest(struct.pack('>Q', i)) for i in tx_ids]
    while len(level) > 1:
        if len(level) % 2:
            level.append(level[-1])
        level = [digest(level[i] + level[i + 1]) for i in range(0, len(level), 2)]
    return level[0]


def merkle_root(txs: Sequence[Transaction]) -> bytes:
    """Merkle root over transaction ids; odd levels duplicate their last
    node and the empty set hashes to sha256(b'')."""
    return _merkle_root(tuple(tx.id for tx in txs))


#
# Round steps
#

def genesis_group() -> BlockGroup:
    header = BlockGroupHeader(0, ZERO_DIGEST, 0, 0, 0, (), ())
    return BlockGroup(header, ())


def make_block(bookkeeper: int, txs: Sequence[Transaction], prev_group_hash: bytes,
               now: int, K: int = config.DEFAULT_K,
               bookkeeper_key: Optional[bytes] = None) -> Block:
    """Builds a bookkeeper's block for the round."""
    if len(txs) > K:
        raise TooManyTransactionsError('%d transactions exceed K=%d' % (len(txs), K))
    txs = tuple(txs)
    if bookkeeper_key is None:
        bookkeeper_key = node_identity(bookkeeper)
    return Block(prev_group_hash, merkle_root(txs), bookkeeper_key, bookkeeper, now, txs)


ValidityPolicy = Callable[[Block], bool]


def honest_policy(prev_group_hash: bytes, K: int = config.DEFAULT_K) -> ValidityPolicy:
    """Approves a block iff it is well formed, links to the expected
    block group and its merkle root verifies."""
    def policy(block):
        if len(block.txs) > K or block.prev_group_hash != prev_group_hash:
            return False
        return block.is_well_formed
    return policy


def dissenting_policy(rng: np.random.Generator) -> ValidityPolicy:
    """Random opinions, one per block."""
    def policy(block):
        return bool(rng.random() < 0.5)
    return policy


def vote_signing_data(block_hash, opinion, voter):
    return block_hash + _VOTE.pack(opinion, voter)


def cast_validation_votes(voter: int, blocks: Sequence[Block], policy: ValidityPolicy,
                          keyring: NodeKeyring) -> VoteMessage:
    """Casts one signed vote per block of the round."""
    votes = []
    for block in blocks:
        opinion = Opinion.APPROVE if policy(block) else Opinion.DISAPPROVE
        data = vote_signing_data(block.digest, opinion, voter)
        votes.append(ValidationVote(block.digest, opinion, voter, keyring.sign(voter, data)))
    return VoteMessage(voter, tuple(votes))


def draw_next_leader(leader_seed: int, eligible: Sequence[int]) -> int:
    """Maps a sealed seed onto the eligible node ids; anyone holding the
    header can recompute the draw."""
    if not eligible:
        raise ConsensusError('No node is eligible to lead')
    ordered = sorted(eligible)
    return ordered[int(np.random.default_rng(leader_seed).integers(len(ordered)))]


def _tally(votes: Sequence[VoteMessage], blocks: Sequence[Block]) -> Tuple[TallyEntry, ...]:
    approve = collections.Counter()
    disapprove = collections.Counter()
    for msg in votes:
        for vote in msg.votes:
            if vote.opinion is Opinion.APPROVE:
                approve[vote.block_hash] += 1
            else:
                disapprove[vote.block_hash] += 1
    return tuple(TallyEntry(b.digest, approve[b.digest], disapprove[b.digest]) for b in blocks)


def _check_vote_coverage(votes: Sequence[VoteMessage], block_hashes: Sequence[bytes]):
    """Returns the voters whose message does not carry exactly one vote per
    block, signed under their own id."""
    expected = sorted(block_hashes)
    bad = []
    for msg in votes:
        hashes = sorted(v.block_hash for v in msg.votes)
        if hashes != expected or any(v.voter != msg.voter for v in msg.votes):
            bad.append(msg.voter)
    return bad


def tally_and_seal(leader: int, votes: Sequence[VoteMessage], blocks: Sequence[Block],
                   height: int, rng: np.random.Generator, *, consortium: Sequence[int],
                   eligible: Sequence[int], prev_group_hash: bytes) -> BlockGroupHeader:
    """Counts the votes of every consortium node and seals the header.

    Raises IncompleteVotesError when a consortium node's message is
    missing or does not cover every block of the round.

    """
    by_voter: Dict[int, VoteMessage] = {}
    for msg in votes:
        if msg.voter not in consortium:
            raise UnexpectedVoterError('Node %d is not a consortium member' % msg.voter)
        if msg.voter in by_voter:
            raise UnexpectedVoterError('Node %d voted twice' % msg.voter)
        by_voter[msg.voter] = msg

    missing = sorted(set(consortium) - set(by_voter))
    if missing:
        raise IncompleteVotesError('Missing vote messages from %s' % missing)
    bad = _check_vote_coverage(votes, [b.digest for b in blocks])
    if bad:
        raise IncompleteVotesError('Vote messages of %s do not cover the round' % bad)

    ordered = tuple(by_voter[v] for v in sorted(by_voter))
    leader_seed = int(rng.integers(0, 2**63))
    header = BlockGroupHeader(
        height=height,
        prev_group_hash=prev_group_hash,
        leader=leader,
        next_leader=draw_next_leader(leader_seed, eligible),
        leader_seed=leader_seed,
        tally=_tally(ordered, blocks),
        vote_messages=ordered,
    )
    logger.debug('Leader %d sealed height %d, next leader %d',
                 leader, height, header.next_leader)
    return header


def seal_block_group(header: BlockGroupHeader, blocks: Sequence[Block]) -> BlockGroup:
    """Builds the block group: the body keeps, in round order, the blocks
    approved by a strict majority of the header's vote messages."""
    n_c = len(header.vote_messages)
    approved = {t.block_hash for t in header.tally if 2 * t.approve > n_c}
    return BlockGroup(header, tuple(b for b in blocks if b.digest in approved))


def validate_block_group(group: BlockGroup, cfg: ConsensusConfig, prev_hash: bytes,
                         keyring: Optional[NodeKeyring] = None) -> ValidationReport:
    """Verifies a block group before it is stored.

    The report lists every failed check; an empty report means pass.

    """
    report = ValidationReport()
    header = group.header

    if header.prev_group_hash != prev_hash:
        report.fail('Linkage', 'header links to %s' % header.prev_group_hash.hex()[:16])
    for block in group.body:
        if block.prev_group_hash != prev_hash:
            report.fail('Linkage', 'block of %d links elsewhere' % block.bookkeeper)

    messages = header.vote_messages
    voters = [m.voter for m in messages]
    if len(messages) != cfg.n_c or len(set(voters)) != len(voters):
        report.fail('VoteCount', '%d vote messages for n_c=%d' % (len(messages), cfg.n_c))

    tally_hashes = [t.block_hash for t in header.tally]
    for voter in _check_vote_coverage(messages, tally_hashes):
        report.fail('VoteCoverage', 'voter %d' % voter)

    approve = collections.Counter()
    disapprove = collections.Counter()
    for msg in messages:
        for vote in msg.votes:
            if keyring is not None:
                try:
                    keyring.verify(vote.voter, vote.signed_data(), vote.signature)
                except BaseCryptoError:
                    report.fail('Signature', 'vote of %d' % vote.voter)
            if vote.opinion is Opinion.APPROVE:
                approve[vote.block_hash] += 1
            else:
                disapprove[vote.block_hash] += 1
    for entry in header.tally:
        if (entry.approve, entry.disapprove) != (approve[entry.block_hash],
                                                 disapprove[entry.block_hash]):
            report.fail('Tally', 'recount differs for %s' % entry.block_hash.hex()[:16])

    tally = {t.block_hash: t for t in header.tally}
    body_hashes = set()
    for block in group.body:
        entry = tally.get(block.digest)
        body_hashes.add(block.digest)
        if entry is None:
            report.fail('Body', 'block of %d was not voted on' % block.bookkeeper)
            continue
        if 2 * entry.approve <= cfg.n_c:
            report.fail('MajorityRule', 'block of %d has %d of %d approvals'
                        % (block.bookkeeper, entry.approve, cfg.n_c))
        if block.merkle_root != merkle_root(block.txs):
            report.fail('Merkle', 'block of %d' % block.bookkeeper)
        if len(block.txs) > cfg.K:
            report.fail('Body', 'block of %d exceeds K' % block.bookkeeper)
    for entry in header.tally:
        if 2 * entry.approve > cfg.n_c and entry.block_hash not in body_hashes:
            report.fail('Body', 'approved block %s missing' % entry.block_hash.hex()[:16])

    if not report.ok:
        logger.warning('Block group %d failed validation: %s', header.height,
                       ', '.join(report.codes()))
    return report


#
# Bookkeeper elections
#

def cast_confidence_votes(voter: int, candidates: Sequence[int],
                          trusted: Callable[[int], bool]) -> List[ConfidenceVote]:
    return [ConfidenceVote(c, voter) for c in candidates if trusted(c)]


def elect_bookkeepers(candidates: Sequence[int], votes: Sequence[ConfidenceVote],
                      n_b: int) -> List[int]:
    """Ranks candidates by confidence votes, ties broken by ascending id,
    and returns the top n_b. Only one vote per (voter, candidate) counts."""
    if len(set(candidates)) < n_b:
        raise NotEnoughCandidatesError('%d candidates for %d seats' % (len(set(candidates)), n_b))
    eligible = set(candidates)
    seen = set()
    score = collections.Counter()
    for vote in votes:
        key = (vote.voter, vote.candidate)
        if vote.candidate not in eligible or key in seen:
            continue
        seen.add(key)
        score[vote.candidate] += vote.weight
    ranked = sorted(eligible, key=lambda c: (-score[c], c))
    return ranked[:n_b]


#
# Chain
#

class Chain:
    """In-memory chain of validated block groups, starting at genesis.

    Each stored group keeps the ConsensusConfig it was validated under,
    since the consortium of a round depends on who leads it.

    """
    def __init__(self, cfg: ConsensusConfig, keyring: Optional[NodeKeyring] = None):
        self.cfg = cfg
        self.keyring = keyring
        self.groups: List[BlockGroup] = [genesis_group()]
        self._cfgs: List[ConsensusConfig] = [cfg]
        self._tx_heights: Dict[int, int] = {}

    def __len__(self):
        return len(self.groups)

    def __iter__(self):
        return iter(self.groups)

    def __getitem__(self, height):
        return self.groups[height]

    @property
    def head(self) -> BlockGroup:
        return self.groups[-1]

    @property
    def head_digest(self) -> bytes:
        return self.head.digest

    @property
    def height(self) -> int:
        return self.head.height

    def append(self, group: BlockGroup, cfg: Optional[ConsensusConfig] = None):
        """Validates and stores a block group; raises ChainValidationError
        with the report's reasons on failure."""
        cfg = cfg or self.cfg
        if group.height != self.height + 1:
            raise ChainValidationError('Height %d does not follow %d' % (group.height, self.height))
        report = validate_block_group(group, cfg, self.head_digest, self.keyring)
        if not report.ok:
            raise ChainValidationError('; '.join('%s: %s' % r for r in report.reasons))
        self.groups.append(group)
        self._cfgs.append(cfg)
        for tx_id in group.tx_ids():
            self._tx_heights[tx_id] = group.height
        return report

    def find_transaction(self, tx_id: int) -> Optional[int]:
        """Returns the height of the block group holding a transaction."""
        return self._tx_heights.get(tx_id)

    def verify(self) -> ValidationReport:
        """Re-checks every stored block group against its predecessor."""
        report = ValidationReport()
        for height in range(1, len(self.groups)):
            group = self.groups[height]
            sub = validate_block_group(group, self._cfgs[height],
                                       self.groups[height - 1].digest, self.keyring)
            for code, detail in sub.reasons:
                report.fail(code, 'height %d: %s' % (height, detail))
        return report

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

"""Deterministic discrete-event simulation of APoV rounds.

Virtual time is an integer count of nanoseconds. Every node owns one
uplink and one downlink of 'band' bytes/s; a transfer holds the sender's
uplink and the receiver's downlink for ceil(size * 1e9 / band) ns and a
sender waits while the receiver's downlink is busy. There is no
propagation latency. Computation delays come from a compute model.

A round that cannot complete (a crashed leader, missing blocks or missing
vote messages) halts the run with a diagnostic; no leader replacement is
attempted.

"""

from __future__ import annotations

import collections
import dataclasses
import enum
import heapq
import itertools
import logging
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Optional, Tuple

import numpy as np

from MINLab import applogger
from MINLab import config
from MINLab import perfmodel
from MINLab.apov import (
    Chain,
    ConsensusConfig,
    ConsensusError,
    IncompleteVotesError,
    MessageSizes,
    Transaction,
    cast_confidence_votes,
    cast_validation_votes,
    dissenting_policy,
    elect_bookkeepers,
    honest_policy,
    make_block,
    seal_block_group,
    tally_and_seal,
)
from MINLab.config import load_configuration
from MINLab.crypto import NodeKeyring
from MINLab.util import ceil_div, digest


logger = logging.getLogger(__name__)

NS_PER_S = 10**9

ROLE_BOOKKEEPER = 'bookkeeper'
ROLE_CONSORTIUM = 'consortium'
BOTH_ROLES = frozenset((ROLE_BOOKKEEPER, ROLE_CONSORTIUM))


class SimulationError(Exception):
    pass

class ConfigInvalidError(SimulationError):
    pass

class UnknownNodeError(SimulationError):
    pass


class EventScheduler:
    """Heap of (time, sequence, callback, args); events at the same time
    run in scheduling order."""

    def __init__(self):
        self.now = 0
        self.processed = 0
        self._queue = []
        self._seq = itertools.count()

    def __len__(self):
        return len(self._queue)

    def schedule(self, at, callback, *args):
        if at < self.now:
            raise SimulationError('Cannot schedule in the past: %d < %d' % (at, self.now))
        heapq.heappush(self._queue, (at, next(self._seq), callback, args))

    def delay(self, dt, callback, *args):
        self.schedule(self.now + dt, callback, *args)

    def run(self, until=None):
        """Processes events in time order until the queue drains or the
        next event lies beyond 'until'. Returns the virtual time."""
        queue = self._queue
        while queue:
            if until is not None and queue[0][0] > until:
                break
            at, _, callback, args = heapq.heappop(queue)
            self.now = at
            callback(*args)
            self.processed += 1
        return self.now


class LinkModel:
    """Serialized per-node uplinks and downlinks."""

    def __init__(self, scheduler: EventScheduler, nodes: int, band: int):
        self.scheduler = scheduler
        self.band = band
        self.up_free = [0] * nodes
        self.down_free = [0] * nodes
        self.bytes_sent = [0] * nodes
        self._queues = [collections.deque() for _ in range(nodes)]
        self._pumping = [False] * nodes

    def duration(self, size):
        return ceil_div(size * NS_PER_S, self.band)

    def send(self, src, dst, size, on_deliver, *args):
        """Queues a transfer on the sender's uplink; 'on_deliver(*args)'
        runs when the last byte arrives."""
        self._queues[src].append((dst, size, on_deliver, args))
        if not self._pumping[src]:
            self._pumping[src] = True
            self.scheduler.schedule(max(self.scheduler.now, self.up_free[src]), self._pump, src)

    def _pump(self, src):
        queue = self._queues[src]
        if not queue:
            self._pumping[src] = False
            return
        now = self.scheduler.now
        dst, size, on_deliver, args = queue[0]
        ready = max(self.up_free[src], self.down_free[dst])
        if ready > now:
            self.scheduler.schedule(ready, self._pump, src)
            return
        queue.popleft()
        end = now + self.duration(size)
        self.up_free[src] = end
        self.down_free[dst] = end
        self.bytes_sent[src] += size
        self.scheduler.schedule(end, on_deliver, *args)
        self.scheduler.schedule(end, self._pump, src)


class ComputeModel:
    """Per-step computation delay, in ns, for a network of n nodes."""
    name = 'abstract'

    def step_seconds(self, step, n):
        raise NotImplementedError

    def step_ns(self, step, n):
        return int(round(self.step_seconds(step, n) * NS_PER_S))


class ZeroComputeModel(ComputeModel):
    name = 'zero'

    def step_seconds(self, step, n):
        return 0.0


class StepFitComputeModel(ComputeModel):
    """The per-step computation fits, taken as they are."""
    name = 'step-fit'

    def step_seconds(self, step, n):
        return perfmodel.computation_times(n)[step - 1]


class FittedComputeModel(ComputeModel):
    """Per-step shares of the computation fits, scaled so the four steps
    add up to the round time fit minus the transmission fit."""
    name = 'fitted'

    def step_seconds(self, step, n):
        steps = perfmodel.computation_times(n)
        return steps[step - 1] * perfmodel.computation_fit(n) / sum(steps)


COMPUTE_MODELS = {
    cls.name: cls for cls in (ZeroComputeModel, StepFitComputeModel, FittedComputeModel)
}


class FaultBehavior(enum.Enum):
    CRASH_AT_ROUND = 'crash_at_round'
    INVALID_BLOCKS = 'invalid_blocks'
    DISSENTING_VOTES = 'dissenting_votes'


@dataclass(frozen=True)
class FaultSpec:
    node: int
    behavior: FaultBehavior
    round: int = 1

    def active(self, height):
        return height >= self.round


@dataclass(frozen=True)
class SimConfig:
    n: int
    band: int = config.DEFAULT_BAND
    sizes: MessageSizes = field(default_factory=MessageSizes)
    K: int = config.DEFAULT_K
    txs_per_block: Optional[int] = None
    compute_model: ComputeModel = field(default_factory=FittedComputeModel)
    seed: int = config.DEFAULT_SEED
    rounds: int = config.DEFAULT_ROUNDS
    faults: Tuple[FaultSpec, ...] = ()
    roles: Optional[Tuple[FrozenSet[str], ...]] = None
    leader_in_consortium: bool = False
    term_length: int = config.DEFAULT_TERM_LENGTH
    n_bookkeepers: Optional[int] = None

    def __post_init__(self):
        if self.n < 1 or self.rounds < 0 or self.term_length < 1:
            raise ConfigInvalidError('n >= 1, rounds >= 0 and term_length >= 1 are required')
        if self.band <= 0 or self.K < 1 or self.K >= 1 << 16:
            raise ConfigInvalidError('band > 0 and 1 <= K < 65536 are required')
        if self.n >= 1 << 16:
            raise ConfigInvalidError('At most 65535 nodes')
        if self.txs_per_block is not None and not 0 <= self.txs_per_block <= self.K:
            raise ConfigInvalidError('txs_per_block must lie in 0..K')
        if self.roles is not None:
            if len(self.roles) != self.n:
                raise ConfigInvalidError('One role set per node is required')
            for roles in self.roles:
                if not roles <= BOTH_ROLES:
                    raise ConfigInvalidError('Unknown roles: %s' % sorted(roles - BOTH_ROLES))
        if not self.bookkeeper_ids:
            raise ConfigInvalidError('No bookkeeping node')
        consortium = self.consortium_ids
        if not consortium or (len(consortium) < 2 and not self.leader_in_consortium):
            raise ConfigInvalidError('Every round needs at least one consortium node '
                                     'besides the leader')
        seats = self.seats
        if not 1 <= seats <= len(self.bookkeeper_ids):
            raise ConfigInvalidError('n_bookkeepers must lie in 1..%d' % len(self.bookkeeper_ids))
        for fault in self.faults:
            if not 0 <= fault.node < self.n:
                raise UnknownNodeError('Fault on unknown node %d' % fault.node)

    def role_of(self, node):
        return self.roles[node] if self.roles is not None else BOTH_ROLES

    @property
    def bookkeeper_ids(self):
        return [i for i in range(self.n) if ROLE_BOOKKEEPER in self.role_of(i)]

    @property
    def consortium_ids(self):
        return [i for i in range(self.n) if ROLE_CONSORTIUM in self.role_of(i)]

    @property
    def seats(self):
        return self.n_bookkeepers or len(self.bookkeeper_ids)

    @property
    def block_size(self):
        return self.K if self.txs_per_block is None else self.txs_per_block

    def faults_of(self, node, behavior, height):
        return any(f.node == node and f.behavior is behavior and f.active(height)
                   for f in self.faults)


@dataclass(frozen=True)
class RoundMetrics:
    round: int
    leader: int
    t1: float
    t2: float
    t3: float
    t4: float
    t_cons: float
    committed_txs: int
    forked: bool = False

    CSV_HEADER = ('round', 't1', 't2', 't3', 't4', 't_cons', 'committed_txs')

    def as_row(self):
        return (self.round, self.t1, self.t2, self.t3, self.t4, self.t_cons, self.committed_txs)


@dataclass
class SimResult:
    config: SimConfig
    metrics: List[RoundMetrics] = field(default_factory=list)
    stalled_round: Optional[int] = None
    diagnostic: str = ''
    divergences: int = 0
    virtual_time_ns: int = 0
    chains: Dict[int, Chain] = field(default_factory=dict)

    @property
    def committed_txs(self):
        return sum(m.committed_txs for m in self.metrics)

    @property
    def virtual_time(self):
        return self.virtual_time_ns / NS_PER_S

    @property
    def mean_round_time(self):
        if not self.metrics:
            return 0.0
        return float(np.mean([m.t_cons for m in self.metrics]))

    @property
    def throughput(self):
        if not self.virtual_time_ns:
            return 0.0
        return self.committed_txs / self.virtual_time

    def head_digests(self):
        return {node: chain.head_digest for node, chain in self.chains.items()}

    def summary(self):
        return {
            'n': self.config.n,
            'seed': self.config.seed,
            'compute_model': self.config.compute_model.name,
            'rounds': len(self.metrics),
            'committed_txs': self.committed_txs,
            'virtual_time': self.virtual_time,
            'mean_round_time': self.mean_round_time,
            'throughput': self.throughput,
            'stalled_round': self.stalled_round,
            'diagnostic': self.diagnostic,
            'divergences': self.divergences,
        }


class _Node:
    def __init__(self, node_id, chain):
        self.id = node_id
        self.chain = chain
        self.crashed = False
        self.reset()

    def reset(self):
        self.blocks = {}
        self.blocks_at = None
        self.votes = {}
        self.votes_at = None
        self.header_at = None
        self.sealed = False
        self.stored_at = None


class Simulation:
    """Runs APoV rounds for one SimConfig."""

    def __init__(self, cfg: SimConfig):
        self.cfg = cfg
        self.scheduler = EventScheduler()
        self.link = LinkModel(self.scheduler, cfg.n, cfg.band)
        self.keyring = NodeKeyring(cfg.seed, range(cfg.n))
        genesis_cfg = self._round_cfg(cfg.bookkeeper_ids, self._consortium(0))
        self.nodes = [_Node(i, Chain(genesis_cfg, self.keyring)) for i in range(cfg.n)]
        self.bookkeepers = list(cfg.bookkeeper_ids)[:cfg.seats]
        self.result = SimResult(cfg)
        self._term_log = []

    # Private API

    def _consortium(self, leader):
        return [c for c in self.cfg.consortium_ids
                if c != leader or self.cfg.leader_in_consortium]

    def _round_cfg(self, bookkeepers, consortium):
        return ConsensusConfig(
            n_b=len(bookkeepers),
            n_c=len(consortium),
            n_bc=len(set(bookkeepers) & set(consortium)),
            K=self.cfg.K,
            term_length=self.cfg.term_length,
        )

    def _alive(self):
        return [node for node in self.nodes if not node.crashed]

    def _compute(self, step):
        return self.cfg.compute_model.step_ns(step, self.cfg.n)

    def _participants(self):
        members = set(self.bookkeepers) | set(self.consortium) | {self.leader}
        return sorted(members)

    def _recipients(self, src):
        """Other participants, in ring order starting after 'src'."""
        members = self._participants()
        n = self.cfg.n
        return sorted((m for m in members if m != src), key=lambda m: (m - src) % n)

    def _transactions(self, node):
        base = (self.height << 32) | (node << 16)
        return [Transaction(base | i, b'', self.cfg.sizes.T) for i in range(self.cfg.block_size)]

    def _publish_block(self, node_id):
        node = self.nodes[node_id]
        if node.crashed:
            return
        block = make_block(node_id, self._transactions(node_id), self.prev_hash,
                           self.scheduler.now, self.cfg.K, self.keyring.public_key(node_id))
        if self.cfg.faults_of(node_id, FaultBehavior.INVALID_BLOCKS, self.height):
            block = dataclasses.replace(block, merkle_root=digest(block.merkle_root + b'\xff'))
            logger.debug('Node %d publishes a corrupted block', node_id)
        self.scheduler.delay(0, self._on_block, node_id, block)
        size = block.nominal_size(self.cfg.sizes)
        for dst in self._recipients(node_id):
            self.link.send(node_id, dst, size, self._on_block, dst, block)

    def _on_block(self, node_id, block):
        node = self.nodes[node_id]
        if node.crashed:
            return
        node.blocks[block.bookkeeper] = block
        if len(node.blocks) < len(self.bookkeepers):
            return
        node.blocks_at = self.scheduler.now
        if node_id in self.consortium:
            self.scheduler.delay(self._compute(2), self._cast_votes, node_id)
        if node_id == self.leader:
            self._maybe_seal()

    def _round_blocks(self, node):
        return [node.blocks[b] for b in sorted(node.blocks)]

    def _cast_votes(self, node_id):
        node = self.nodes[node_id]
        if node.crashed:
            return
        if self.cfg.faults_of(node_id, FaultBehavior.DISSENTING_VOTES, self.height):
            policy = dissenting_policy(np.random.default_rng([self.cfg.seed, self.height, node_id]))
        else:
            policy = honest_policy(self.prev_hash, self.cfg.K)
        msg = cast_validation_votes(node_id, self._round_blocks(node), policy, self.keyring)
        if node_id == self.leader:
            self.scheduler.delay(0, self._on_vote, msg)
        else:
            self.link.send(node_id, self.leader, msg.nominal_size(self.cfg.sizes),
                           self._on_vote, msg)

    def _on_vote(self, msg):
        leader = self.nodes[self.leader]
        if leader.crashed:
            return
        leader.votes[msg.voter] = msg
        if len(leader.votes) == len(self.consortium):
            leader.votes_at = self.scheduler.now
            self._maybe_seal()

    def _maybe_seal(self):
        leader = self.nodes[self.leader]
        if leader.sealed or leader.blocks_at is None or leader.votes_at is None:
            return
        leader.sealed = True
        self.scheduler.delay(self._compute(3), self._seal)

    def _tally(self, leader):
        rng = np.random.default_rng([self.cfg.seed, self.height])
        return tally_and_seal(
            self.leader, list(leader.votes.values()), self._round_blocks(leader),
            self.height, rng, consortium=self.consortium, eligible=self.bookkeepers,
            prev_group_hash=self.prev_hash)

    def _seal(self):
        leader = self.nodes[self.leader]
        header = self._tally(leader)
        group = seal_block_group(header, self._round_blocks(leader))
        self.sealed_at = self.scheduler.now
        self.scheduler.delay(self._compute(4), self._store, self.leader, group)
        size = header.nominal_size(self.cfg.sizes)
        for dst in self._recipients(self.leader):
            self.link.send(self.leader, dst, size, self._on_header, dst, group)

    def _on_header(self, node_id, group):
        node = self.nodes[node_id]
        if node.crashed:
            return
        node.header_at = self.scheduler.now
        self.scheduler.delay(self._compute(4), self._store, node_id, group)

    def _store(self, node_id, group):
        node = self.nodes[node_id]
        if node.crashed:
            return
        node.chain.append(group, self.round_cfg)
        node.stored_at = self.scheduler.now

    def _diagnose(self):
        leader = self.nodes[self.leader]
        if leader.crashed:
            return 'LeaderAbsent: leader %d does not respond' % self.leader
        reasons = []
        short = [n.id for n in self._alive() if n.blocks_at is None]
        if short:
            missing = sorted(set(self.bookkeepers) - set(leader.blocks))
            reasons.append('MissingBlocks: nodes %s lack blocks of %s' % (short, missing))
        if not leader.sealed:
            try:
                self._tally(leader)
            except IncompleteVotesError as exc:
                reasons.append('IncompleteVotes: %s' % exc)
            except ConsensusError as exc:
                reasons.append('%s: %s' % (type(exc).__name__, exc))
        return '; '.join(reasons) or 'Round did not complete'

    def _start_round(self, height):
        cfg = self.cfg
        self.height = height
        for node in self.nodes:
            if not node.crashed and cfg.faults_of(node.id, FaultBehavior.CRASH_AT_ROUND, height):
                node.crashed = True
                logger.warning('Node %d crashed at round %d', node.id, height)
            node.reset()
        # every live node holds the same chain after a completed round
        alive = self._alive() or self.nodes
        head = alive[0].chain.head
        self.prev_hash = head.digest
        self.leader = head.header.next_leader
        self.consortium = self._consortium(self.leader)
        self.round_cfg = self._round_cfg(self.bookkeepers, self.consortium)
        self.sealed_at = None
        self.round_start = self.scheduler.now
        for b in self.bookkeepers:
            self.scheduler.delay(self._compute(1), self._publish_block, b)

    def _finish_round(self, height):
        alive = self._alive()
        if not alive or any(n.stored_at is None for n in alive):
            self.result.stalled_round = height
            self.result.diagnostic = self._diagnose()
            logger.warning('Round %d stalled: %s', height, self.result.diagnostic)
            return False

        start = self.round_start
        s1 = max(n.blocks_at for n in alive)
        s2 = max(self.nodes[self.leader].votes_at, s1)
        header_times = [n.header_at for n in alive if n.id != self.leader]
        s3 = max(header_times) if header_times else self.sealed_at
        s4 = max(n.stored_at for n in alive)
        group = self.nodes[self.leader].chain.head
        committed = sum(len(b.txs) for b in group.body)
        forked = len({n.chain.head_digest for n in alive}) > 1
        if forked:
            self.result.divergences += 1
            logger.error('Chains diverged at round %d', height)

        metrics = RoundMetrics(
            round=height,
            leader=self.leader,
            t1=(s1 - start) / NS_PER_S,
            t2=(s2 - s1) / NS_PER_S,
            t3=(s3 - s2) / NS_PER_S,
            t4=(s4 - s3) / NS_PER_S,
            t_cons=(s4 - start) / NS_PER_S,
            committed_txs=committed,
            forked=forked,
        )
        self.result.metrics.append(metrics)
        self.result.virtual_time_ns = s4
        self._term_log.append((list(self.bookkeepers), {b.bookkeeper for b in group.body}))
        logger.debug('Round %d sealed by %d: %.6f s, %d txs',
                     height, self.leader, metrics.t_cons, committed)
        return True

    def _elect(self):
        """Term election: consortium members trust candidates whose
        blocks were never rejected during the term."""
        rejected = set()
        for bookkeepers, accepted in self._term_log:
            rejected.update(set(bookkeepers) - accepted)
        self._term_log = []
        candidates = self.cfg.bookkeeper_ids
        votes = []
        for voter in self.cfg.consortium_ids:
            if not self.nodes[voter].crashed:
                votes.extend(cast_confidence_votes(voter, candidates, lambda c: c not in rejected))
        elected = elect_bookkeepers(candidates, votes, self.cfg.seats)
        if elected != self.bookkeepers:
            logger.info('Bookkeepers elected for the next term: %s', elected)
        self.bookkeepers = sorted(elected)

    # Public API

    def run(self) -> SimResult:
        cfg = self.cfg
        for height in range(1, cfg.rounds + 1):
            self._start_round(height)
            with applogger.virtual_clock(self.scheduler):
                self.scheduler.run()
            if not self._finish_round(height):
                break
            if height % cfg.term_length == 0 and height < cfg.rounds:
                self._elect()
        self.result.chains = {n.id: n.chain for n in self._alive()}
        logger.info('Simulated %d rounds of %d nodes: %d txs in %.6f s virtual',
                    len(self.result.metrics), cfg.n, self.result.committed_txs,
                    self.result.virtual_time)
        return self.result


def run_rounds(cfg: SimConfig) -> SimResult:
    """Runs cfg.rounds APoV rounds and returns per-round metrics and a
    summary."""
    if not isinstance(cfg, SimConfig):
        raise ConfigInvalidError('A SimConfig is required')
    return Simulation(cfg).run()


def inject_fault(cfg: SimConfig, fault: FaultSpec) -> SimConfig:
    """Returns a copy of the configuration carrying one more fault."""
    if not 0 <= fault.node < cfg.n:
        raise UnknownNodeError('No node %d in a %d-node network' % (fault.node, cfg.n))
    return dataclasses.replace(cfg, faults=cfg.faults + (fault,))


def load_sim_config(path, section='consensus-sim') -> SimConfig:
    """Builds a SimConfig from a JSON file.

    Recognised keys: n, band, rounds, seed, K, txs_per_block,
    compute_model (zero, step-fit, fitted), leader_in_consortium, term_length,
    n_bookkeepers, sizes (object of M, H, T, H_v, V_b, H_r, R_b), roles
    (list of role lists) and faults (list of {node, behavior, round}).

    """
    options = load_configuration(path).options(section)
    return sim_config_from_dict(options)


def sim_config_from_dict(options) -> SimConfig:
    kwargs = {}
    try:
        for key in ('n', 'rounds', 'seed', 'K', 'txs_per_block', 'term_length', 'n_bookkeepers'):
            if options.get(key) is not None:
                kwargs[key] = int(options[key])
        if options.get('band') is not None:
            kwargs['band'] = int(float(options['band']))
        if 'leader_in_consortium' in options:
            kwargs['leader_in_consortium'] = bool(options['leader_in_consortium'])
        if options.get('compute_model'):
            kwargs['compute_model'] = COMPUTE_MODELS[options['compute_model']]()
        if options.get('sizes'):
            kwargs['sizes'] = MessageSizes(**options['sizes'])
        if options.get('roles'):
            kwargs['roles'] = tuple(frozenset(r) for r in options['roles'])
        faults = []
        for f in options.get('faults') or ():
            faults.append(FaultSpec(int(f['node']), FaultBehavior(f['behavior']),
                                    int(f.get('round', 1))))
        kwargs['faults'] = tuple(faults)
    except (KeyError, TypeError, ValueError, ConsensusError) as exc:
        raise ConfigInvalidError('Invalid simulation configuration: %s' % exc)
    if 'n' not in kwargs:
        raise ConfigInvalidError('Missing node count n')
    return SimConfig(**kwargs)

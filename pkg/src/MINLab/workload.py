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

"""Synthetic URL-like name workloads for the FIB benchmarks.

Stored names use components 'c0'..'c<alphabet-1>'. Their lengths follow a
geometric distribution truncated to [1, MAX_NAME_LENGTH] whose mean is M.
A length k holds at most alphabet**k distinct names; when the entry count
overflows the short lengths, those buckets are filled to capacity and the
geometric ratio of the remaining lengths is re-solved so that the mean
stays M. Queries add components from a disjoint pool 'q0'.., so a query
component never matches a stored one.

- miss: queries made of query components only; no prefix is stored.
- hit: a stored name of length L <= N extended by N - L query
  components, so every hit query has exactly N components.
- mixed: hit and miss queries alternate.

Miss query lengths are N + d with d uniform on [-s, s], s = min(3, N - 1),
drawn in antithetic pairs (N + d, N - d), so the mean query length is
exactly N for an even query count.

"""

from __future__ import annotations

import enum
import functools
import logging
from dataclasses import asdict, dataclass
from typing import List, Tuple

import numpy as np

from MINLab import config
from MINLab.identifiers import ContentName, ForwardingInfo


logger = logging.getLogger(__name__)

MAX_SPREAD = 3
MAX_FACE = 256


class WorkloadError(Exception):
    pass

class InfeasibleSpecError(WorkloadError):
    pass


class QueryMode(enum.Enum):
    HIT = 'hit'
    MISS = 'miss'
    MIXED = 'mixed'


@dataclass(frozen=True)
class WorkloadSpec:
    entry_count: int = config.DEFAULT_BENCH_ENTRIES
    query_count: int = config.DEFAULT_BENCH_QUERIES
    mean_length: int = config.DEFAULT_MEAN_LENGTH
    query_length: int = config.DEFAULT_QUERY_LENGTH
    mode: QueryMode = QueryMode.MISS
    alphabet: int = config.DEFAULT_ALPHABET
    seed: int = config.DEFAULT_SEED

    def as_dict(self):
        d = asdict(self)
        d['mode'] = self.mode.value
        return d

    def check(self):
        """Raises InfeasibleSpecError for specs that cannot be generated."""
        if self.entry_count < 1:
            raise InfeasibleSpecError('entry_count must be at least 1')
        if self.query_count < 0:
            raise InfeasibleSpecError('query_count must not be negative')
        if self.alphabet < 1:
            raise InfeasibleSpecError('alphabet must be at least 1')
        if not 1 <= self.mean_length <= (config.MAX_NAME_LENGTH + 1) / 2:
            raise InfeasibleSpecError('mean length M must lie in 1..%g'
                                      % ((config.MAX_NAME_LENGTH + 1) / 2))
        if self.query_length < 1:
            raise InfeasibleSpecError('query length N must be at least 1')
        if self.mode is not QueryMode.MISS and self.query_length < self.mean_length:
            raise InfeasibleSpecError('hit queries need N >= M (N=%d, M=%d)'
                                      % (self.query_length, self.mean_length))
        capacity = sum(self.alphabet ** k for k in range(1, config.MAX_NAME_LENGTH + 1))
        if capacity < self.entry_count:
            raise InfeasibleSpecError('%d entries do not fit an alphabet of %d'
                                      % (self.entry_count, self.alphabet))


# Private API

@functools.lru_cache(maxsize=None)
def length_distribution(mean, top=config.MAX_NAME_LENGTH) -> Tuple[np.ndarray, np.ndarray]:
    """Support and probabilities of the geometric distribution truncated
    to [1, top] whose mean is 'mean' (at most the uniform mean)."""
    ks = np.arange(1, top + 1)
    if mean > (top + 1) / 2:
        raise InfeasibleSpecError('mean length %s exceeds %s' % (mean, (top + 1) / 2))
    if mean == (top + 1) / 2:
        return ks, np.full(top, 1.0 / top)
    if mean <= 1:
        pmf = np.zeros(top)
        pmf[0] = 1.0
        return ks, pmf
    lo, hi = 1e-9, 1.0 - 1e-12
    for _ in range(200):
        p = (lo + hi) / 2
        w = (1 - p) ** (ks - 1)
        m = float((ks * w).sum() / w.sum())
        if m > mean:
            lo = p
        else:
            hi = p
    w = (1 - p) ** (ks - 1)
    return ks, w / w.sum()


def _water_fill(weights, caps, total):
    """Splits total in proportion to weights without exceeding caps."""
    counts = np.zeros(len(weights))
    free = np.ones(len(weights), dtype=bool)
    remaining = float(total)
    while free.any():
        share = remaining * weights / weights[free].sum()
        over = free & (share > caps)
        if not over.any():
            counts[free] = share[free]
            break
        counts[over] = caps[over]
        remaining -= caps[over].sum()
        free &= ~over
    return counts


def length_counts(mean, count, alphabet, top=config.MAX_NAME_LENGTH):
    """Number of stored names per length 1..top.

    Weights are geometric, r**(k-1), with length k capped at alphabet**k
    names; r is solved so the mean length is 'mean'. Raises
    InfeasibleSpecError when the capacities force a larger mean."""
    ks = np.arange(1, top + 1)
    caps = float(alphabet) ** ks
    if caps.sum() < count:
        raise InfeasibleSpecError('%d entries do not fit an alphabet of %d' % (count, alphabet))

    def fill(r):
        return _water_fill(r ** (ks - 1.0), caps, count)

    def mean_of(counts):
        return float((ks * counts).sum() / counts.sum())

    floor = mean_of(fill(1e-9))
    if floor > mean + 1e-6:
        raise InfeasibleSpecError('%d entries over an alphabet of %d need a mean length'
                                  ' of at least %.3f (M=%s)' % (count, alphabet, floor, mean))
    lo, hi = 1e-9, 1.0
    for _ in range(100):
        r = (lo + hi) / 2
        if mean_of(fill(r)) > mean:
            hi = r
        else:
            lo = r
    exact = fill((lo + hi) / 2)
    counts = np.floor(exact).astype(np.int64)
    short = count - int(counts.sum())
    order = np.argsort(-(exact - counts), kind='stable')
    for i in order:
        if short == 0:
            break
        if counts[i] < caps[i]:
            counts[i] += 1
            short -= 1
    return ks, counts


def _bucket(rng, alphabet, length, count):
    """count distinct index tuples of the given length."""
    capacity = alphabet ** length
    if 2 * count >= capacity:
        picks = rng.choice(capacity, size=count, replace=False)
        powers = alphabet ** np.arange(length, dtype=np.int64)
        return [tuple(row) for row in ((picks[:, None] // powers) % alphabet).tolist()]
    seen = set()
    keys = []
    while len(keys) < count:
        rows = rng.integers(alphabet, size=(2 * (count - len(keys)), length)).tolist()
        for row in rows:
            key = tuple(row)
            if key in seen:
                continue
            seen.add(key)
            keys.append(key)
            if len(keys) == count:
                break
    return keys


def _antithetic(rng, count, spread):
    """count offsets in [-spread, spread] summing to zero."""
    half = rng.integers(-spread, spread + 1, size=(count + 1) // 2)
    offsets = np.empty(2 * len(half), dtype=np.int64)
    offsets[0::2] = half
    offsets[1::2] = -half
    offsets = offsets[:count]
    if count % 2:
        offsets[-1] = 0
    return offsets


def _components(prefix, idx):
    return tuple('%s%d' % (prefix, i) for i in idx)


def _entries(spec, rng) -> List[Tuple[ContentName, ForwardingInfo]]:
    ks, counts = length_counts(spec.mean_length, spec.entry_count, spec.alphabet)
    names = []
    for length, count in zip(ks, counts):
        if count:
            names.extend(ContentName(_components('c', key))
                         for key in _bucket(rng, spec.alphabet, int(length), int(count)))
    names = [names[i] for i in rng.permutation(len(names))]
    faces = rng.integers(1, MAX_FACE, size=len(names))
    return [(name, ForwardingInfo(int(face))) for name, face in zip(names, faces)]


def _miss_queries(spec, rng, count):
    spread = min(MAX_SPREAD, spec.query_length - 1)
    lengths = spec.query_length + _antithetic(rng, count, spread)
    return [ContentName(_components('q', rng.integers(spec.alphabet, size=int(n))))
            for n in lengths]


def _hit_queries(spec, rng, count, entries):
    stored = [name for name, _ in entries if len(name) <= spec.query_length]
    if count and not stored:
        raise InfeasibleSpecError('No stored name fits a hit query of length %d'
                                  % spec.query_length)
    picks = rng.integers(len(stored), size=count) if count else []
    queries = []
    for pick in picks:
        name = stored[int(pick)]
        tail = _components('q', rng.integers(spec.alphabet, size=spec.query_length - len(name)))
        queries.append(name.child(*tail) if tail else name)
    return queries


# Public API

def generate_workload(spec: WorkloadSpec):
    """Returns (entries, queries); identical specs give identical
    workloads."""
    spec.check()
    rng = np.random.default_rng(spec.seed)
    entries = _entries(spec, rng)
    count = spec.query_count
    if spec.mode is QueryMode.MISS:
        queries = _miss_queries(spec, rng, count)
    elif spec.mode is QueryMode.HIT:
        queries = _hit_queries(spec, rng, count, entries)
    else:
        hits = _hit_queries(spec, rng, (count + 1) // 2, entries)
        misses = _miss_queries(spec, rng, count // 2)
        queries = [None] * count
        queries[0::2] = hits
        queries[1::2] = misses
    logger.debug('Workload: %d entries, %d %s queries (M=%d, N=%d)', len(entries),
                 len(queries), spec.mode.value, spec.mean_length, spec.query_length)
    return entries, queries


def random_name(rng, alphabet, mean_length=config.DEFAULT_MEAN_LENGTH) -> ContentName:
    ks, pmf = length_distribution(mean_length)
    length = int(rng.choice(ks, p=pmf))
    return ContentName(_components('c', rng.integers(alphabet, size=length)))

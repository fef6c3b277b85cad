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

"""FIB benchmarks: name search probes, randomized invariant checks and
build-time scaling."""

from __future__ import annotations

import concurrent.futures
import dataclasses
import logging
import time
from dataclasses import asdict, dataclass, field
from typing import List, Sequence

import numpy as np

from MINLab import config
from MINLab.fib import Hpt
from MINLab.identifiers import ForwardingInfo, prefix_of
from MINLab.util import ceil_div
from MINLab.workload import WorkloadSpec, generate_workload, random_name


logger = logging.getLogger(__name__)

DESK_SCALE_NOTE = ('Desk scale: %d entries / %d queries by default; full-scale runs '
                   'use %d / %d. Probe counts do not depend on the table size.'
                   % (config.DEFAULT_BENCH_ENTRIES, config.DEFAULT_BENCH_QUERIES,
                      config.FULL_SCALE_ENTRIES, config.FULL_SCALE_QUERIES))

BENCH_HEADER = ('mode', 'M', 'N', 'entries', 'queries',
                'probes_binary', 'probes_linear', 'probes_no_backtrack',
                'hits', 'false_negatives_no_backtrack', 'mismatches',
                'throughput_ratio', 'wall_binary', 'wall_linear', 'wall_ratio')

SCALING_HEADER = ('entries', 'build_seconds', 'ratio_to_first', 'index_entries')


@dataclass
class BenchRow:
    mode: str
    M: int
    N: int
    entries: int
    queries: int
    probes_binary: float
    probes_linear: float
    probes_no_backtrack: float
    hits: int
    false_negatives_no_backtrack: int
    mismatches: int
    throughput_ratio: float
    wall_binary: float
    wall_linear: float
    wall_ratio: float

    def as_row(self):
        return tuple(getattr(self, name) for name in BENCH_HEADER)


@dataclass
class CheckReport:
    ops: int = 0
    inserts: int = 0
    deletes: int = 0
    stray_deletes: int = 0
    checkpoints: int = 0
    violation_count: int = 0
    violations: List[str] = field(default_factory=list)
    queries: int = 0
    mismatches: int = 0

    @property
    def ok(self):
        return self.violation_count == 0 and self.mismatches == 0

    def as_dict(self):
        d = asdict(self)
        d['ok'] = self.ok
        return d


def build_fib(entries) -> Hpt:
    fib = Hpt()
    for name, forwarding in entries:
        fib.insert(name, forwarding)
    return fib


def run_lookups(fib: Hpt, queries: Sequence, kind='lpm', workers=1):
    """Looks every query up; read-only shards run on a thread pool and
    results are returned in query order."""
    lookup = {
        'lpm': fib.lookup_lpm,
        'no_backtrack': fib.lookup_no_backtrack,
        'oracle': fib.lookup_oracle,
    }[kind]
    if workers <= 1 or len(queries) < 2 * workers:
        return [lookup(q) for q in queries]
    size = ceil_div(len(queries), workers)
    shards = [queries[i:i + size] for i in range(0, len(queries), size)]
    with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
        parts = pool.map(lambda shard: [lookup(q) for q in shard], shards)
        return [r for part in parts for r in part]


def _timed(fn, *args, **kwargs):
    start = time.perf_counter()
    result = fn(*args, **kwargs)
    return result, time.perf_counter() - start


def bench_one(spec: WorkloadSpec, workers=1, fib=None) -> BenchRow:
    """Runs binary, no-backtrack and linear search over one workload.

    'fib' may be a table already built from the same stored names.

    """
    entries, queries = generate_workload(spec)
    if fib is None:
        fib = build_fib(entries)
    binary, wall_binary = _timed(run_lookups, fib, queries, 'lpm', workers)
    no_backtrack = run_lookups(fib, queries, 'no_backtrack', workers)
    linear, wall_linear = _timed(run_lookups, fib, queries, 'oracle', workers)

    count = max(len(queries), 1)
    probes_binary = np.fromiter((r.probes for r in binary), dtype=np.int64, count=len(binary))
    probes_linear = np.fromiter((r.probes for r in linear), dtype=np.int64, count=len(linear))
    probes_nbt = np.fromiter((r.probes for r in no_backtrack), dtype=np.int64,
                             count=len(no_backtrack))
    mismatches = sum(1 for b, l in zip(binary, linear) if b.outcome != l.outcome)
    false_negatives = sum(1 for b, n in zip(binary, no_backtrack) if b.hit and not n.hit)
    mean_binary = float(probes_binary.sum()) / count
    mean_linear = float(probes_linear.sum()) / count
    row = BenchRow(
        mode=spec.mode.value,
        M=spec.mean_length,
        N=spec.query_length,
        entries=len(fib),
        queries=len(queries),
        probes_binary=round(mean_binary, 4),
        probes_linear=round(mean_linear, 4),
        probes_no_backtrack=round(float(probes_nbt.sum()) / count, 4),
        hits=sum(1 for r in binary if r.hit),
        false_negatives_no_backtrack=false_negatives,
        mismatches=mismatches,
        throughput_ratio=round(100.0 * mean_linear / mean_binary, 2) if mean_binary else 0.0,
        wall_binary=round(wall_binary, 6),
        wall_linear=round(wall_linear, 6),
        wall_ratio=round(100.0 * wall_linear / wall_binary, 2) if wall_binary else 0.0,
    )
    if mismatches:
        logger.warning('%d lookups disagree with the linear oracle (M=%d, N=%d)',
                       mismatches, spec.mean_length, spec.query_length)
    logger.info('%s M=%d N=%d: binary %.2f, linear %.2f probes (%.0f%%)', row.mode, row.M,
                row.N, row.probes_binary, row.probes_linear, row.throughput_ratio)
    return row


def fib_bench(specs: Sequence[WorkloadSpec], workers=1) -> List[BenchRow]:
    """Benchmarks every spec; consecutive specs sharing their stored
    names reuse one FIB."""
    rows = []
    key = fib = None
    for spec in specs:
        spec_key = (spec.entry_count, spec.mean_length, spec.alphabet, spec.seed)
        if spec_key != key:
            key = spec_key
            fib = build_fib(generate_workload(dataclasses.replace(spec, query_count=0))[0])
        rows.append(bench_one(spec, workers, fib=fib))
    return rows


def fib_check(ops=config.DEFAULT_CHECK_OPS, queries=config.DEFAULT_CHECK_OPS,
              alphabet=config.DEFAULT_ALPHABET, mean_length=config.DEFAULT_MEAN_LENGTH,
              seed=config.DEFAULT_SEED, interval=config.DEFAULT_CHECK_INTERVAL) -> CheckReport:
    """Replays random inserts and deletes, verifying the table every
    'interval' operations, then compares binary search with the linear
    oracle on random queries.

    Some deletes target names that may not be Real entries: proper
    prefixes of live names, which are often Virtual or SemiVirtual, and
    fresh random names."""
    rng = np.random.default_rng(seed)
    fib = Hpt()
    report = CheckReport()
    live = []
    for i in range(1, ops + 1):
        r = rng.random()
        if live and r < 0.3:
            name = live.pop(int(rng.integers(len(live))))
            fib.delete(name)
            report.deletes += 1
        elif live and r < 0.4:
            name = _stray_name(rng, live, alphabet, mean_length)
            if fib.delete(name):
                live.remove(name)
            report.deletes += 1
            report.stray_deletes += 1
        else:
            name = random_name(rng, alphabet, mean_length)
            if name not in fib:
                live.append(name)
            fib.insert(name, _forwarding(rng))
            report.inserts += 1
        report.ops += 1
        if i % interval == 0 or i == ops:
            _checkpoint(fib, report)

    lpm_mismatch = 0
    for _ in range(queries):
        if live and rng.random() < 0.5:
            base = live[int(rng.integers(len(live)))]
            extra = random_name(rng, alphabet, mean_length)
            query = base.child(*extra.components)
        else:
            query = random_name(rng, alphabet, mean_length)
        if fib.lookup_lpm(query).outcome != fib.lookup_oracle(query).outcome:
            lpm_mismatch += 1
    report.queries = queries
    report.mismatches = lpm_mismatch
    if report.ok:
        logger.info('fib-check: %d ops, %d queries, no violations', report.ops, queries)
    else:
        logger.warning('fib-check: %d violations, %d mismatches',
                       report.violation_count, report.mismatches)
    return report


def _forwarding(rng):
    return ForwardingInfo(int(rng.integers(1, 256)))


def _stray_name(rng, live, alphabet, mean_length):
    base = live[int(rng.integers(len(live)))]
    if len(base) > 1 and rng.random() < 0.5:
        return prefix_of(base, int(rng.integers(1, len(base))))
    return random_name(rng, alphabet, mean_length)


def _checkpoint(fib, report):
    violations = fib.verify_integrity()
    report.checkpoints += 1
    if violations:
        report.violation_count += len(violations)
        report.violations.extend(str(v) for v in violations[:max(0, 10 - len(report.violations))])
        logger.warning('Checkpoint %d: %d violations', report.checkpoints, len(violations))


def build_scaling(sizes: Sequence[int], mean_length=config.DEFAULT_MEAN_LENGTH,
                  alphabet=config.DEFAULT_ALPHABET, seed=config.DEFAULT_SEED):
    """Build time of tables of increasing size over nested entry sets."""
    sizes = sorted(sizes)
    entries, _ = generate_workload(WorkloadSpec(sizes[-1], 0, mean_length, mean_length,
                                                alphabet=alphabet, seed=seed))
    rows = []
    first = None
    for size in sizes:
        fib, seconds = _timed(build_fib, entries[:size])
        first = first or seconds
        rows.append((size, round(seconds, 6), round(seconds / first, 4), fib.entry_count))
        logger.info('Built %d entries in %.3f s', size, seconds)
    return rows

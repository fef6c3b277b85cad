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

import pytest

from MINLab.bench import (
    BENCH_HEADER,
    bench_one,
    build_scaling,
    fib_bench,
    fib_check,
    run_lookups,
)
from MINLab.workload import QueryMode, WorkloadSpec, generate_workload
from MINLab.bench import build_fib


MISS_PROBES = {6: 2.34, 7: 2.54, 8: 2.70, 9: 2.85, 10: 2.96}
HIT_PROBES = {3: (2.84, 3.45), 4: (2.90, 3.47)}


def test_miss_mode_linear_probes_equal_query_length():
    rows = fib_bench([WorkloadSpec(3000, 1000, query_length=n) for n in (6, 8)])
    assert [row.probes_linear for row in rows] == [6, 8]
    assert all(row.hits == 0 and row.mismatches == 0 for row in rows)
    assert all(len(row.as_row()) == len(BENCH_HEADER) for row in rows)


def _expected_linear_probes(spec):
    _, queries = generate_workload(spec)
    stored = [sum(1 for c in q.components if c.startswith('c')) for q in queries]
    return sum(spec.query_length - length + 1 for length in stored) / len(queries)


def test_hit_mode_linear_probes():
    spec = WorkloadSpec(3000, 1000, mean_length=3, query_length=8, mode=QueryMode.HIT)
    row = bench_one(spec)
    assert row.probes_linear == pytest.approx(_expected_linear_probes(spec), abs=1e-3)
    assert row.probes_linear == pytest.approx(6, abs=0.3)
    assert row.hits == 1000
    assert row.mismatches == 0
    assert row.probes_binary < row.probes_linear
    assert row.throughput_ratio > 100


def test_threaded_lookups_keep_query_order():
    entries, queries = generate_workload(WorkloadSpec(2000, 600, mean_length=3, query_length=6,
                                                      mode=QueryMode.MIXED))
    fib = build_fib(entries)
    serial = [r.outcome for r in run_lookups(fib, queries)]
    assert [r.outcome for r in run_lookups(fib, queries, workers=4)] == serial


def test_fib_check_passes():
    report = fib_check(ops=3000, queries=2000, alphabet=5, interval=500)
    assert report.ok
    assert report.ops == 3000
    assert report.checkpoints == 6
    assert report.as_dict()['ok']


@pytest.mark.slow
def test_fib_check_defaults():
    report = fib_check()
    assert report.ok
    assert report.ops == 10000
    assert report.checkpoints == 10
    assert report.mismatches == 0
    assert report.stray_deletes > 0


def test_build_scaling_rows():
    rows = build_scaling([500, 2000], mean_length=3)
    assert [r[0] for r in rows] == [500, 2000]
    assert rows[0][2] == 1.0
    assert rows[0][3] < rows[1][3]


@pytest.mark.slow
@pytest.mark.parametrize('n', sorted(MISS_PROBES))
def test_miss_mode_binary_probes(n):
    row = bench_one(WorkloadSpec(100000, 50000, mean_length=4, query_length=n))
    assert row.probes_binary == pytest.approx(MISS_PROBES[n], rel=0.15)
    assert row.probes_linear == n


@pytest.mark.slow
@pytest.mark.parametrize('m', sorted(HIT_PROBES))
def test_hit_mode_binary_probes(m):
    low, high = HIT_PROBES[m]
    specs = [WorkloadSpec(100000, 50000, mean_length=m, query_length=n, mode=QueryMode.HIT)
             for n in range(6, 11)]
    for spec, row in zip(specs, fib_bench(specs)):
        assert 0.85 * low <= row.probes_binary <= 1.15 * high
        assert row.probes_linear == pytest.approx(_expected_linear_probes(spec), abs=1e-3)


@pytest.mark.slow
def test_build_time_is_linear():
    rows = build_scaling([100000, 1000000])
    assert 7 <= rows[1][2] <= 13

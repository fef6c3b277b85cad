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

import numpy as np
import pytest

from MINLab.workload import (
    InfeasibleSpecError,
    QueryMode,
    WorkloadSpec,
    generate_workload,
    length_counts,
    length_distribution,
)


def test_identical_specs_give_identical_workloads():
    spec = WorkloadSpec(2000, 500, mode=QueryMode.MIXED, seed=9)
    assert generate_workload(spec) == generate_workload(spec)
    assert generate_workload(spec) != generate_workload(WorkloadSpec(2000, 500, seed=10))


def test_entry_names_are_unique_and_exactly_counted():
    entries, _ = generate_workload(WorkloadSpec(5000, 0, mean_length=3))
    names = [n for n, _ in entries]
    assert len(names) == 5000
    assert len(set(names)) == 5000
    assert all(1 <= len(n) <= 10 for n in names)


def test_stored_lengths_follow_the_requested_mean():
    entries, _ = generate_workload(WorkloadSpec(20000, 0, mean_length=4))
    assert np.mean([len(n) for n, _ in entries]) == pytest.approx(4, abs=0.1)


@pytest.mark.parametrize('mean', [2, 3, 4])
def test_length_counts_meet_the_mean_under_short_capacity(mean):
    ks, counts = length_counts(mean, 50000, 100)
    assert counts.sum() == 50000
    assert counts[0] <= 100
    assert all(c <= 100 ** k for k, c in zip(ks, counts))
    assert float((ks * counts).sum()) / 50000 == pytest.approx(mean, abs=1e-3)


def test_stored_lengths_meet_a_short_mean():
    entries, _ = generate_workload(WorkloadSpec(20000, 0, mean_length=2))
    lengths = [len(n) for n, _ in entries]
    assert np.mean(lengths) == pytest.approx(2, abs=1e-3)
    assert lengths.count(1) == 100


@pytest.mark.parametrize('mean', [1, 2, 3.5, 5.5])
def test_length_distribution_mean(mean):
    ks, pmf = length_distribution(mean)
    assert pmf.sum() == pytest.approx(1.0)
    assert float((ks * pmf).sum()) == pytest.approx(mean, abs=1e-6)


@pytest.mark.parametrize('n', [6, 8, 10])
def test_miss_queries_average_n_components(n):
    _, queries = generate_workload(WorkloadSpec(100, 1000, query_length=n))
    assert np.mean([len(q) for q in queries]) == n
    assert min(len(q) for q in queries) >= n - 3


def test_hit_queries_extend_stored_names():
    entries, queries = generate_workload(WorkloadSpec(500, 400, mean_length=3, query_length=8,
                                                      mode=QueryMode.HIT))
    stored = {n for n, _ in entries}
    for q in queries:
        assert any(type(q)(q.components[:k]) in stored for k in range(1, len(q) + 1))


def test_hit_queries_have_exactly_n_components():
    for n in (4, 6, 9):
        _, queries = generate_workload(WorkloadSpec(2000, 300, mean_length=3, query_length=n,
                                                    mode=QueryMode.HIT))
        assert {len(q) for q in queries} == {n}


def test_mixed_queries_alternate():
    _, queries = generate_workload(WorkloadSpec(100, 10, query_length=6, mode=QueryMode.MIXED))
    assert len(queries) == 10
    assert all(q.components[0].startswith('c') for q in queries[0::2])
    assert all(q.components[0].startswith('q') for q in queries[1::2])


@pytest.mark.parametrize('spec', [
    WorkloadSpec(0, 10),
    WorkloadSpec(10, -1),
    WorkloadSpec(10, 10, mean_length=6),
    WorkloadSpec(10, 10, mean_length=4, query_length=3, mode=QueryMode.HIT),
    WorkloadSpec(100, 10, alphabet=1),
    WorkloadSpec(10, 10, query_length=0),
    WorkloadSpec(5000, 10, mean_length=1),
])
def test_infeasible_specs(spec):
    with pytest.raises(InfeasibleSpecError):
        generate_workload(spec)

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

from MINLab.perfmodel import PROTOTYPE_MEASUREMENTS, ModelParams, transmission_times
from MINLab.simulator import (
    ConfigInvalidError,
    EventScheduler,
    FaultBehavior,
    FaultSpec,
    LinkModel,
    RoundMetrics,
    SimConfig,
    SimulationError,
    StepFitComputeModel,
    UnknownNodeError,
    ZeroComputeModel,
    inject_fault,
    load_sim_config,
    run_rounds,
    sim_config_from_dict,
)


ETC = os.path.join(os.path.dirname(__file__), os.pardir, 'etc')


def small(**kwargs):
    args = dict(n=4, K=20, txs_per_block=20, rounds=3, seed=3)
    args.update(kwargs)
    return SimConfig(**args)


# Event engine

def test_scheduler_runs_in_time_then_insertion_order():
    sched = EventScheduler()
    seen = []
    sched.schedule(5, seen.append, 'b')
    sched.schedule(1, seen.append, 'a')
    sched.schedule(5, seen.append, 'c')
    assert sched.run() == 5
    assert seen == ['a', 'b', 'c']
    with pytest.raises(SimulationError):
        sched.schedule(4, seen.append, 'late')


def test_link_serializes_the_uplink():
    sched = EventScheduler()
    link = LinkModel(sched, 3, band=1000)
    arrivals = []
    link.send(0, 1, 500, lambda: arrivals.append(('1', sched.now)))
    link.send(0, 2, 500, lambda: arrivals.append(('2', sched.now)))
    sched.run()
    assert arrivals == [('1', 500000000), ('2', 1000000000)]
    assert link.bytes_sent[0] == 1000


# Rounds

def test_honest_rounds_commit_every_block():
    result = run_rounds(small())
    assert result.stalled_round is None
    assert result.divergences == 0
    assert [m.committed_txs for m in result.metrics] == [80, 80, 80]
    assert len(set(result.head_digests().values())) == 1
    for chain in result.chains.values():
        assert chain.height == 3
        assert chain.verify().ok


def test_runs_are_deterministic():
    first = run_rounds(small(rounds=4))
    second = run_rounds(small(rounds=4))
    assert first.summary() == second.summary()
    assert first.head_digests() == second.head_digests()
    assert [m.as_row() for m in first.metrics] == [m.as_row() for m in second.metrics]


def test_round_times_add_up():
    result = run_rounds(small(rounds=1))
    m = result.metrics[0]
    assert m.t_cons == pytest.approx(m.t1 + m.t2 + m.t3 + m.t4)
    assert len(m.as_row()) == len(RoundMetrics.CSV_HEADER)
    assert result.summary()['compute_model'] == 'fitted'


def test_zero_compute_rounds_are_transmission_only():
    fast = run_rounds(small(rounds=1, compute_model=ZeroComputeModel()))
    slow = run_rounds(small(rounds=1))
    assert 0 < fast.metrics[0].t_cons < slow.metrics[0].t_cons


@pytest.mark.parametrize('n', [3, 4, 8])
def test_zero_compute_stages_match_transmission_model(n):
    m = run_rounds(SimConfig(n=n, rounds=1, compute_model=ZeroComputeModel())).metrics[0]
    t1, t2, t3, _ = transmission_times(ModelParams.prototype(n))
    assert m.t1 == pytest.approx(t1, abs=1e-7)
    assert m.t2 == pytest.approx(t2, abs=1e-7)
    assert m.t3 == pytest.approx(t3, abs=1e-7)


def test_three_node_stage_times():
    m = run_rounds(SimConfig(n=3, rounds=1, compute_model=ZeroComputeModel())).metrics[0]
    assert (m.t1, m.t2, m.t3) == pytest.approx((0.006415328, 1.5456e-5, 4.8576e-5), abs=1e-9)


@pytest.mark.parametrize('n', sorted(PROTOTYPE_MEASUREMENTS))
def test_round_time_tracks_prototype(n):
    result = run_rounds(SimConfig(n=n, rounds=1))
    measured = PROTOTYPE_MEASUREMENTS[n][4]
    assert result.metrics[0].t_cons == pytest.approx(measured, rel=0.10)
    assert result.metrics[0].committed_txs == 10000 * n


def test_step_fit_model_is_slower_than_fitted():
    fitted = run_rounds(small(rounds=1))
    raw = run_rounds(small(rounds=1, compute_model=StepFitComputeModel()))
    assert raw.metrics[0].t_cons > fitted.metrics[0].t_cons


# Faults

def test_invalid_blocks_are_left_out_and_their_bookkeeper_voted_off():
    cfg = small(rounds=4, term_length=2, n_bookkeepers=3,
                faults=(FaultSpec(1, FaultBehavior.INVALID_BLOCKS),))
    result = run_rounds(cfg)
    assert result.stalled_round is None
    assert result.divergences == 0
    assert [m.committed_txs for m in result.metrics] == [40, 40, 60, 60]
    head = next(iter(result.chains.values())).head
    assert sorted(b.bookkeeper for b in head.body) == [0, 2, 3]


def test_dissenting_voter_cannot_block_the_majority():
    cfg = inject_fault(small(n=5), FaultSpec(4, FaultBehavior.DISSENTING_VOTES))
    result = run_rounds(cfg)
    assert result.divergences == 0
    assert [m.committed_txs for m in result.metrics] == [100, 100, 100]


def test_crashed_node_stalls_the_round():
    cfg = small(faults=(FaultSpec(3, FaultBehavior.CRASH_AT_ROUND, round=2),))
    result = run_rounds(cfg)
    assert result.stalled_round == 2
    assert len(result.metrics) == 1
    assert result.diagnostic
    assert result.summary()['stalled_round'] == 2


@pytest.mark.slow
def test_thousand_rounds_stay_consistent():
    result = run_rounds(small(n=5, rounds=1000, K=5, txs_per_block=5))
    assert result.stalled_round is None
    assert result.divergences == 0
    assert result.committed_txs == 1000 * 25
    assert len(set(result.head_digests().values())) == 1


# Configuration

@pytest.mark.parametrize('kwargs', [
    {'n': 1},
    {'n': 4, 'K': 10, 'txs_per_block': 11},
    {'n': 4, 'n_bookkeepers': 5},
    {'n': 4, 'band': 0},
    {'n': 2, 'roles': (frozenset(['consortium']), frozenset(['consortium']))},
])
def test_invalid_configurations(kwargs):
    with pytest.raises(ConfigInvalidError):
        SimConfig(**kwargs)


def test_fault_on_unknown_node():
    with pytest.raises(UnknownNodeError):
        inject_fault(small(), FaultSpec(9, FaultBehavior.CRASH_AT_ROUND))
    with pytest.raises(UnknownNodeError):
        small(faults=(FaultSpec(4, FaultBehavior.INVALID_BLOCKS),))


def test_config_from_dict():
    cfg = sim_config_from_dict({'n': '4', 'compute_model': 'zero', 'rounds': 2,
                                'faults': [{'node': 1, 'behavior': 'dissenting_votes'}]})
    assert cfg.n == 4 and cfg.rounds == 2
    assert cfg.compute_model.name == 'zero'
    assert cfg.faults == (FaultSpec(1, FaultBehavior.DISSENTING_VOTES, 1),)
    with pytest.raises(ConfigInvalidError):
        sim_config_from_dict({'n': 4, 'compute_model': 'bogus'})
    with pytest.raises(ConfigInvalidError):
        sim_config_from_dict({'rounds': 4})


def test_load_scenario_file():
    cfg = load_sim_config(os.path.join(ETC, 'consensus-faults.json'))
    assert (cfg.n, cfg.rounds, cfg.seed) == (5, 20, 7)
    assert {f.behavior for f in cfg.faults} == {FaultBehavior.INVALID_BLOCKS,
                                                FaultBehavior.DISSENTING_VOTES}

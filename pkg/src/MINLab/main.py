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
import sys
import logging
import dataclasses
from typing import NamedTuple

import numpy as np

from MINLab import applogger
from MINLab import bench
from MINLab import cmdline
from MINLab import config
from MINLab import info
from MINLab import perfmodel
from MINLab import registry
from MINLab import simulator
from MINLab import tunnel
from MINLab import util
from MINLab.client import RegistryClient, RegistryFabric
from MINLab.server import RegistryServer
from MINLab.workload import QueryMode, WorkloadError, WorkloadSpec


logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2

TUNNEL_HEADER = ('mode', 'trial', 'seed', 'bytes_sent', 'bytes_delivered', 'digest_ok',
                 'establishment_exchanges', 'termination_exchanges', 'interests_total',
                 'data_interests', 'virtual_time_s', 'ok')

REGISTRY_HEADER = ('identifier', 'domain', 'height', 'tx_id', 'resolved_from', 'domains',
                   'duplicate_rejected', 'ok')

CHECK_HEADER = ('ops', 'inserts', 'deletes', 'stray_deletes', 'checkpoints', 'violation_count',
                'queries', 'mismatches', 'ok')


class UsageError(Exception):
    pass


class Report(NamedTuple):
    header: tuple
    rows: list
    summary: dict
    ok: bool


def _number(opts, name, kind=int):
    value = getattr(opts, name)
    if value is None:
        return None
    try:
        return kind(value)
    except (TypeError, ValueError):
        raise UsageError('option %s: invalid %s value: %r' % (name, kind.__name__, value))


def _list(opts, name, parse=cmdline.int_list):
    try:
        return parse(getattr(opts, name))
    except (TypeError, ValueError) as exc:
        raise UsageError('option %s: %s' % (name, exc))


# Commands

def _fib_bench(opts) -> Report:
    try:
        mode = QueryMode(opts.mode)
    except ValueError:
        raise UsageError('option mode: invalid choice: %r' % opts.mode)
    specs = [WorkloadSpec(entry_count=_number(opts, 'entries'),
                          query_count=_number(opts, 'queries'),
                          mean_length=m, query_length=n, mode=mode,
                          alphabet=_number(opts, 'alphabet'), seed=_number(opts, 'seed'))
             for m in _list(opts, 'mean_len') for n in _list(opts, 'len')]
    for spec in specs:
        spec.check()
    rows = bench.fib_bench(specs, workers=max(1, _number(opts, 'workers')))

    ok = all(row.mismatches == 0 for row in rows)
    if mode is QueryMode.MISS:
        for row in rows:
            if abs(row.probes_linear - row.N) > 1e-9:
                logger.error('Linear search averaged %.4f probes for N=%d', row.probes_linear, row.N)
                ok = False
    summary = {
        'note': bench.DESK_SCALE_NOTE,
        'workloads': [spec.as_dict() for spec in specs],
        'rows': [dataclasses.asdict(row) for row in rows],
    }
    if opts.scale:
        scaling = bench.build_scaling(_list(opts, 'scale'), mean_length=specs[0].mean_length,
                                      alphabet=specs[0].alphabet, seed=specs[0].seed)
        util.write_csv(os.path.join(opts.out, 'fib-bench-scaling.csv'),
                       bench.SCALING_HEADER, scaling)
        summary['scaling'] = [dict(zip(bench.SCALING_HEADER, row)) for row in scaling]
    logger.info(bench.DESK_SCALE_NOTE)
    return Report(bench.BENCH_HEADER, [row.as_row() for row in rows], summary, ok)


def _fib_check(opts) -> Report:
    report = bench.fib_check(ops=_number(opts, 'ops'), queries=_number(opts, 'queries'),
                             alphabet=_number(opts, 'alphabet'),
                             mean_length=_number(opts, 'mean_len'),
                             seed=_number(opts, 'seed'), interval=max(1, _number(opts, 'interval')))
    summary = report.as_dict()
    row = tuple(summary[name] for name in CHECK_HEADER)
    return Report(CHECK_HEADER, [row], summary, report.ok)


def _parse_fault(text):
    parts = text.split(':')
    if len(parts) not in (2, 3):
        raise UsageError('option fault: expected NODE:BEHAVIOR[:ROUND], got %r' % text)
    try:
        return simulator.FaultSpec(int(parts[0]), simulator.FaultBehavior(parts[1]),
                                   int(parts[2]) if len(parts) == 3 else 1)
    except ValueError:
        raise UsageError('option fault: invalid fault %r' % text)


def _consensus_sim(opts) -> Report:
    if opts.scenario:
        configs = [simulator.load_sim_config(opts.scenario)]
    else:
        faults = opts.fault or []
        if isinstance(faults, str):
            faults = faults.split(',')
        faults = tuple(_parse_fault(f) for f in faults if f)
        try:
            model = simulator.COMPUTE_MODELS[opts.compute_model]()
        except KeyError:
            raise UsageError('option compute_model: invalid choice: %r' % opts.compute_model)
        configs = [simulator.SimConfig(
            n=n, band=int(_number(opts, 'band', float)), K=_number(opts, 'K'),
            txs_per_block=_number(opts, 'txs'), compute_model=model,
            seed=_number(opts, 'seed'), rounds=_number(opts, 'rounds'), faults=faults,
            term_length=_number(opts, 'term_length'),
            n_bookkeepers=_number(opts, 'bookkeepers'))
            for n in _list(opts, 'n')]

    rows = []
    summaries = []
    ok = True
    for cfg in configs:
        result = simulator.run_rounds(cfg)
        rows.extend((cfg.n,) + m.as_row() for m in result.metrics)
        summaries.append(result.summary())
        if result.divergences:
            logger.error('n=%d: %d chain divergences', cfg.n, result.divergences)
            ok = False
        if result.stalled_round is not None and not cfg.faults:
            logger.error('n=%d: fault-free run stalled at round %d', cfg.n, result.stalled_round)
            ok = False
    return Report(('n',) + simulator.RoundMetrics.CSV_HEADER, rows, {'runs': summaries}, ok)


def _model_eval(opts) -> Report:
    a, band, K = _number(opts, 'a', float), _number(opts, 'band', float), _number(opts, 'K')
    breakdowns = [perfmodel.breakdown(perfmodel.ModelParams.prototype(n, a, band, K=K))
                  for n in _list(opts, 'n')]
    header = tuple(f.name for f in dataclasses.fields(perfmodel.TimingBreakdown))
    rows = [tuple(getattr(b, name) for name in header) for b in breakdowns]
    summary = {
        'breakdowns': [b.as_dict() for b in breakdowns],
        'fit_discrepancy': perfmodel.fit_discrepancy(K=K),
    }
    for b in breakdowns:
        logger.info('n=%d: t_cons %.5f s, throughput limit %.0f tx/s', b.n, b.t_cons, b.throughput)
    return Report(header, rows, summary, True)


def _model_sweep(opts) -> Report:
    rows = perfmodel.sweep_grid(_list(opts, 'n'), _list(opts, 'a', cmdline.float_list),
                                _list(opts, 'band', cmdline.float_list), K=_number(opts, 'K'))
    best = max(rows, key=lambda row: row[-1])
    summary = {
        'points': len(rows),
        'best': dict(zip(perfmodel.SWEEP_HEADER, best)),
    }
    return Report(perfmodel.SWEEP_HEADER, rows, summary, True)


def _tunnel_demo(opts) -> Report:
    if opts.scenario:
        mode, size, seed = tunnel.load_scenario(opts.scenario)
        modes = [mode]
    else:
        size, seed = _number(opts, 'payload_size'), _number(opts, 'seed')
        if size < 0:
            raise UsageError('option payload_size: must not be negative')
        if opts.mode == 'all':
            modes = list(tunnel.TunnelMode)
        else:
            try:
                modes = [tunnel.TunnelMode(opts.mode)]
            except ValueError:
                raise UsageError('option mode: invalid choice: %r' % opts.mode)
    trials = max(1, _number(opts, 'trials'))
    rows = []
    reports = []
    capture = None
    for mode in modes:
        for trial in range(trials):
            run_seed = seed + trial
            capture = [] if opts.capture else None
            try:
                report = tunnel.run_scenario(
                    mode, tunnel.random_payload(size, run_seed), seed=run_seed,
                    segment_size=_number(opts, 'segment_size'),
                    window=_number(opts, 'window'), capture=capture)
            except tunnel.TunnelError as exc:
                logger.error('%s trial %d failed: %s', mode.value, trial, exc)
                rows.append((mode.value, trial, run_seed, size, 0, False, 0, 0, 0, 0, 0.0, False))
                continue
            s = report.summary()
            reports.append(s)
            rows.append((mode.value, trial, run_seed, s['bytes_sent'], s['bytes_delivered'],
                         s['digest_sent'] == s['digest_received'],
                         s['establishment_exchanges'], s['termination_exchanges'],
                         s['interests_total'], s['data_interests'], s['virtual_time_s'],
                         s['ok']))
    if opts.capture and capture is not None:
        tunnel.write_capture(opts.capture, capture)
        logger.info('Captured %d Interests to %s', len(capture), opts.capture)
    ok = bool(rows) and all(row[-1] for row in rows)
    return Report(TUNNEL_HEADER, rows, {'runs': reports, 'payload_size': size}, ok)


def _registry_demo(opts) -> Report:
    rng = np.random.default_rng(_number(opts, 'seed'))
    paths = [p.strip() for p in str(opts.domains).split(',') if p.strip()]
    hierarchy = registry.Hierarchy.build(
        paths, supervisors=_number(opts, 'supervisors'), seed=_number(opts, 'seed'),
        cache_size=_number(opts, 'cache_size'), data_dir=opts.data_dir)
    server = RegistryServer(hierarchy)
    network = RegistryFabric(server)
    domains = [d.name for d in hierarchy]

    def client_at(path):
        return RegistryClient(network.transport(path))

    rows = []
    failures = 0
    try:
        for i in range(_number(opts, 'registrations')):
            home = domains[int(rng.integers(len(domains)))]
            ident = ('content:%s/obj%d' % (home, i), 'id:user%d' % i, 'geo:g%d' % i)[i % 3]
            response = client_at(home).register(ident, 'id:owner%d' % (i % 7),
                                                int(rng.integers(1, 256)))
            if not response.ok:
                failures += 1
                rows.append((ident, str(home), -1, -1, 0, len(domains), False, False))
                continue
            resolved = sum(1 for path in domains if client_at(path).resolve(ident).ok)
            elsewhere = domains[int(rng.integers(len(domains)))]
            duplicate = client_at(elsewhere).register(ident, 'id:owner0', 1).code == 43
            record = response.body
            row_ok = resolved == len(domains) and duplicate
            failures += 0 if row_ok else 1
            rows.append((ident, record['domain'], record['height'], record['tx_id'],
                         resolved, len(domains), duplicate, row_ok))

        not_found = 0
        for j in range(_number(opts, 'unregistered')):
            origin = domains[int(rng.integers(len(domains)))]
            response = client_at(origin).resolve(('content:%s/missing%d' % (origin, j),
                                                  'id:ghost%d' % j)[j % 2])
            if response.code == 31 and response.body and response.body.get('hops'):
                not_found += 1
            else:
                failures += 1
        proxied = client_at(domains[0]).resolve('ip:203.0.113.9').code == 32
        failures += 0 if proxied else 1
        audit = {str(d.name): d.audit() for d in hierarchy}
        failures += sum(len(v) for v in audit.values())
    finally:
        server.server_close()

    summary = {
        'domains': [str(d) for d in domains],
        'registered': sum(1 for row in rows if row[2] >= 0),
        'not_found': not_found,
        'ip_proxied': proxied,
        'audit_violations': {k: v for k, v in audit.items() if v},
        'failures': failures,
        'interests': network.interests_total,
        'virtual_time': network.scheduler.now / simulator.NS_PER_S,
    }
    return Report(REGISTRY_HEADER, rows, summary, failures == 0)


COMMANDS = {
    'fib-bench': _fib_bench,
    'fib-check': _fib_check,
    'consensus-sim': _consensus_sim,
    'model-eval': _model_eval,
    'model-sweep': _model_sweep,
    'tunnel-demo': _tunnel_demo,
    'registry-demo': _registry_demo,
}


def _init_logging(opts):
    applogger.init_std_stream_loggers(verbose=opts.debug, quiet=opts.quiet)
    if opts.logfile:
        applogger.init_file_logger(opts.logfile, opts.loglevel)


def run_command(argv):
    """Runs one subcommand and returns its exit status.

    0 on success, 1 when a check of the run fails, 2 on usage errors.

    """
    try:
        command, opts, parser = cmdline.parse(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE

    if opts.confpath:
        config_path = os.path.abspath(opts.confpath)
        try:
            cfg = config.load_configuration(config_path)
            config.apply_overrides(opts, cfg, command)
        except config.ConfigFileNotFoundError:
            sys.stderr.write('ERROR: Configuration file not found: %s\n' % config_path)
            sys.stderr.flush()
            return EXIT_USAGE
        except config.ConfigError as exc:
            sys.stderr.write('ERROR: %s\n' % exc)
            sys.stderr.flush()
            return EXIT_USAGE

    try:
        _init_logging(opts)
    except applogger.LoggerError as exc:
        sys.stderr.write('ERROR: Logger: %s\n' % exc)
        sys.stderr.flush()
        return EXIT_USAGE

    logger.debug('%s %s started', info.name, command)
    if opts.confpath:
        logger.debug('Using configuration from: %s', opts.confpath)

    try:
        util.ensure_dir(opts.out)
        report = COMMANDS[command](opts)
    except (UsageError, WorkloadError, perfmodel.ModelError, simulator.ConfigInvalidError,
            simulator.UnknownNodeError,
            config.ConfigError) as exc:
        try:
            parser.error(str(exc))
        except SystemExit:
            return EXIT_USAGE
    except (tunnel.TunnelError, registry.RegistryError, simulator.SimulationError) as exc:
        logger.error('%s failed: %s', command, exc)
        return EXIT_FAILURE

    util.write_csv(os.path.join(opts.out, '%s.csv' % command), report.header, report.rows)
    summary = dict(report.summary, command=command, ok=report.ok, version=info.version)
    util.write_json(os.path.join(opts.out, '%s.json' % command), summary)
    if not report.ok:
        logger.error('%s: check failed', command)
        return EXIT_FAILURE
    logger.debug('%s terminated', command)
    return EXIT_OK


def main():
    sys.exit(run_command(sys.argv[1:]))


if __name__ == '__main__':
    main()

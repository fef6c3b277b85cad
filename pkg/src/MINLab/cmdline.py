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

USAGE = """

%prog -h, --help

%prog --version

%prog <command> [options]

Commands:

    fib-bench       name search probes of binary, no-backtrack and linear search
    fib-check       randomized insert/delete/lookup invariant check of the FIB
    consensus-sim   virtual-time simulation of APoV rounds
    model-eval      closed-form timing breakdown for given node counts
    model-sweep     throughput limit over an n x a x band grid
    tunnel-demo     IP-over-CCN tunnel handshake, transfer and termination
    registry-demo   registration and resolution across a domain hierarchy

Run '%prog <command> --help' for the options of a command.

"""


from optparse import OptionParser

from MINLab import info
from MINLab import config
from MINLab.applogger import DEFAULT_LOGLEVELS


COMMANDS = (
    'fib-bench',
    'fib-check',
    'consensus-sim',
    'model-eval',
    'model-sweep',
    'tunnel-demo',
    'registry-demo',
)

TUNNEL_MODES = ('ip-ccn-ip', 'ip-ccn', 'ccn-ip', 'ccn-ip-ccn')
COMPUTE_MODELS = ('zero', 'step-fit', 'fitted')

DEFAULT_DOMAINS = '/top/cn/gd,/top/cn/bj,/top/us/ny,/top/us/ca'


def int_list(text):
    """Parses '3,5,7' and ranges such as '3..8' into a list of ints."""
    values = []
    for item in str(text).split(','):
        item = item.strip()
        if not item:
            continue
        lo, sep, hi = item.partition('..')
        if sep:
            values.extend(range(int(lo), int(hi) + 1))
        else:
            values.append(int(item))
    if not values:
        raise ValueError('empty list: %r' % text)
    return values


def float_list(text):
    values = [float(v) for v in str(text).split(',') if v.strip()]
    if not values:
        raise ValueError('empty list: %r' % text)
    return values


def _new_parser(command, usage, description):
    return OptionParser(
        prog = '%s %s' % (info.name, command),
        usage = usage,
        version = info.version,
        description = description,
    )


def _add_common_options(parser):
    parser.set_defaults(
        confpath = None,
        out = config.DEFAULT_OUTPUT_DIR,
        debug = False,
        quiet = False,
        logfile = None,
        loglevel = config.DEFAULT_LOGLEVEL,
        seed = config.DEFAULT_SEED,
    )

    parser.add_option('-c', '--config', action='store', type='string',
            dest='confpath', metavar='PATH', help="""Sets the path to a JSON \
configuration file. Its values override the command-line options. Options may \
be given flat or inside an object named after the command.""")

    parser.add_option('-o', '--out', action='store', type='string',
            dest='out', metavar='DIR', help="""Directory where the CSV report \
and the JSON summary are written. [Default: %s]""" % config.DEFAULT_OUTPUT_DIR)

    parser.add_option('--seed', action='store', type='int', dest='seed',
            metavar='INT', help="""Seed of every random choice. [Default: %d]"""
            % config.DEFAULT_SEED)

    parser.add_option('--debug', action='store_true', dest='debug',
            help="""Run in debug mode. Debug messages are printed to stderr.""")

    parser.add_option('--quiet', action='store_true', dest='quiet',
            help="""Do not print informational messages to stdout.""")

    parser.add_option('--logfile', action='store', type='string',
            dest='logfile', metavar='PATH', help="""Also log to this file.""")

    parser.add_option('--loglevel', action='store', type='choice',
            choices=sorted(DEFAULT_LOGLEVELS), dest='loglevel', metavar='LEVEL',
            help="""Level of the messages written to the log file. \
[Default: %s]""" % config.DEFAULT_LOGLEVEL)


def _parser_fib_bench():
    parser = _new_parser('fib-bench', '%prog [options]', """Builds a FIB of \
random URL-like names and measures the average number of probes of binary \
search, no-backtrack search and linear search. One report row per (M, N) \
pair.""")
    parser.set_defaults(
        entries = config.DEFAULT_BENCH_ENTRIES,
        queries = config.DEFAULT_BENCH_QUERIES,
        mode = 'miss',
        len = str(config.DEFAULT_QUERY_LENGTH),
        mean_len = str(config.DEFAULT_MEAN_LENGTH),
        alphabet = config.DEFAULT_ALPHABET,
        workers = 1,
        scale = None,
    )
    parser.add_option('--entries', action='store', type='int', dest='entries',
            metavar='COUNT', help="""Number of stored names. [Default: %d]"""
            % config.DEFAULT_BENCH_ENTRIES)
    parser.add_option('--queries', action='store', type='int', dest='queries',
            metavar='COUNT', help="""Number of queries per row. [Default: %d]"""
            % config.DEFAULT_BENCH_QUERIES)
    parser.add_option('--mode', action='store', type='choice',
            choices=['hit', 'miss', 'mixed'], dest='mode',
            help="""Query mode: hit, miss or mixed. [Default: miss]""")
    parser.add_option('--len', action='store', type='string', dest='len',
            metavar='N[,N...]', help="""Average query lengths N, a comma list \
or a range such as 6..10. [Default: %d]""" % config.DEFAULT_QUERY_LENGTH)
    parser.add_option('--mean-len', action='store', type='string', dest='mean_len',
            metavar='M[,M...]', help="""Average stored-name lengths M. \
[Default: %d]""" % config.DEFAULT_MEAN_LENGTH)
    parser.add_option('--alphabet', action='store', type='int', dest='alphabet',
            metavar='COUNT', help="""Size of the name component pool. \
[Default: %d]""" % config.DEFAULT_ALPHABET)
    parser.add_option('--workers', action='store', type='int', dest='workers',
            metavar='COUNT', help="""Threads sharing the read-only lookups. \
[Default: 1]""")
    parser.add_option('--scale', action='store', type='string', dest='scale',
            metavar='SIZE[,SIZE...]', help="""Also time the FIB build for \
these table sizes.""")
    return parser


def _parser_fib_check():
    parser = _new_parser('fib-check', '%prog [options]', """Replays random \
inserts and deletes, verifying every FIB invariant periodically, then \
compares binary search with the linear oracle.""")
    parser.set_defaults(
        ops = config.DEFAULT_CHECK_OPS,
        queries = config.DEFAULT_CHECK_OPS,
        alphabet = config.DEFAULT_ALPHABET,
        mean_len = config.DEFAULT_MEAN_LENGTH,
        interval = config.DEFAULT_CHECK_INTERVAL,
    )
    parser.add_option('--ops', action='store', type='int', dest='ops',
            metavar='COUNT', help="""Random inserts and deletes. [Default: %d]"""
            % config.DEFAULT_CHECK_OPS)
    parser.add_option('--queries', action='store', type='int', dest='queries',
            metavar='COUNT', help="""Random lookups. [Default: %d]"""
            % config.DEFAULT_CHECK_OPS)
    parser.add_option('--alphabet', action='store', type='int', dest='alphabet',
            metavar='COUNT', help="""Size of the name component pool.""")
    parser.add_option('--mean-len', action='store', type='int', dest='mean_len',
            metavar='M', help="""Average stored-name length.""")
    parser.add_option('--interval', action='store', type='int', dest='interval',
            metavar='OPS', help="""Operations between two integrity checks. \
[Default: %d]""" % config.DEFAULT_CHECK_INTERVAL)
    return parser


def _parser_consensus_sim():
    parser = _new_parser('consensus-sim', '%prog [options]', """Runs APoV \
rounds over a simulated network in virtual time and reports per-round \
timings.""")
    parser.set_defaults(
        n = '3',
        rounds = config.DEFAULT_ROUNDS,
        band = float(config.DEFAULT_BAND),
        K = config.DEFAULT_K,
        txs = None,
        compute_model = 'fitted',
        fault = [],
        term_length = config.DEFAULT_TERM_LENGTH,
        bookkeepers = None,
        scenario = None,
    )
    parser.add_option('--n', action='store', type='string', dest='n',
            metavar='N[,N...]', help="""Node counts, a comma list or a range \
such as 3..8. [Default: 3]""")
    parser.add_option('--rounds', action='store', type='int', dest='rounds',
            metavar='COUNT', help="""Rounds per run. [Default: %d]"""
            % config.DEFAULT_ROUNDS)
    parser.add_option('--band', action='store', type='float', dest='band',
            metavar='BYTES/S', help="""Link bandwidth. [Default: %g]"""
            % config.DEFAULT_BAND)
    parser.add_option('--K', action='store', type='int', dest='K',
            metavar='COUNT', help="""Maximum transactions per block. \
[Default: %d]""" % config.DEFAULT_K)
    parser.add_option('--txs', action='store', type='int', dest='txs',
            metavar='COUNT', help="""Transactions proposed per block. \
[Default: K]""")
    parser.add_option('--compute-model', action='store', type='choice',
            choices=list(COMPUTE_MODELS), dest='compute_model',
            help="""Computation delays: zero, step-fit or fitted. \
[Default: fitted]""")
    parser.add_option('--fault', action='append', type='string', dest='fault',
            metavar='NODE:BEHAVIOR[:ROUND]', help="""Injects a fault; \
BEHAVIOR is crash_at_round, invalid_blocks or dissenting_votes. May be \
repeated.""")
    parser.add_option('--term-length', action='store', type='int',
            dest='term_length', metavar='ROUNDS', help="""Rounds per \
bookkeeper term. [Default: %d]""" % config.DEFAULT_TERM_LENGTH)
    parser.add_option('--bookkeepers', action='store', type='int',
            dest='bookkeepers', metavar='COUNT', help="""Bookkeeper seats \
filled by each election. [Default: all candidates]""")
    parser.add_option('--scenario', action='store', type='string',
            dest='scenario', metavar='PATH', help="""Reads the whole \
simulation setup from a JSON file instead of the options above.""")
    return parser


def _parser_model_eval():
    parser = _new_parser('model-eval', '%prog [options]', """Evaluates the \
transmission, computation and round times and the throughput limit.""")
    parser.set_defaults(
        n = '3..8',
        a = 1.0,
        band = float(config.DEFAULT_BAND),
        K = config.DEFAULT_K,
    )
    parser.add_option('--n', action='store', type='string', dest='n',
            metavar='N[,N...]', help="""Node counts. [Default: 3..8]""")
    parser.add_option('--a', action='store', type='float', dest='a',
            metavar='FACTOR', help="""Computing power relative to the \
prototype. [Default: 1]""")
    parser.add_option('--band', action='store', type='float', dest='band',
            metavar='BYTES/S', help="""Bandwidth. [Default: %g]"""
            % config.DEFAULT_BAND)
    parser.add_option('--K', action='store', type='int', dest='K',
            metavar='COUNT', help="""Transactions per block.""")
    return parser


def _parser_model_sweep():
    parser = _new_parser('model-sweep', '%prog [options]', """Evaluates the \
throughput limit over every combination of node count, computing power and \
bandwidth.""")
    parser.set_defaults(
        n = '3..200',
        a = '1,2,4,8',
        band = '%g,%g,%g' % (config.DEFAULT_BAND / 10, config.DEFAULT_BAND,
                             config.DEFAULT_BAND * 10),
        K = config.DEFAULT_K,
    )
    parser.add_option('--n', action='store', type='string', dest='n',
            metavar='N[,N...]', help="""Node counts. [Default: 3..200]""")
    parser.add_option('--a', action='store', type='string', dest='a',
            metavar='A[,A...]', help="""Computing power factors. \
[Default: 1,2,4,8]""")
    parser.add_option('--band', action='store', type='string', dest='band',
            metavar='B[,B...]', help="""Bandwidths in bytes/s.""")
    parser.add_option('--K', action='store', type='int', dest='K',
            metavar='COUNT', help="""Transactions per block.""")
    return parser


def _parser_tunnel_demo():
    parser = _new_parser('tunnel-demo', '%prog [options]', """Opens a \
connection through the IP-over-CCN tunnel, pushes a random payload and \
closes it, checking the payload digest and the control exchanges.""")
    parser.set_defaults(
        mode = 'all',
        payload_size = config.DEFAULT_PAYLOAD_SIZE,
        trials = 1,
        segment_size = config.DEFAULT_SEGMENT_SIZE,
        window = config.DEFAULT_WINDOW,
        scenario = None,
        capture = None,
    )
    parser.add_option('--mode', action='store', type='choice',
            choices=list(TUNNEL_MODES) + ['all'], dest='mode',
            help="""Transmission mode: %s or all. [Default: all]"""
            % ', '.join(TUNNEL_MODES))
    parser.add_option('--payload-size', action='store', type='int',
            dest='payload_size', metavar='BYTES', help="""Payload size. \
[Default: %d]""" % config.DEFAULT_PAYLOAD_SIZE)
    parser.add_option('--trials', action='store', type='int', dest='trials',
            metavar='COUNT', help="""Seeded runs per mode. [Default: 1]""")
    parser.add_option('--segment-size', action='store', type='int',
            dest='segment_size', metavar='BYTES', help="""Largest payload \
of one Interest. [Default: %d]""" % config.DEFAULT_SEGMENT_SIZE)
    parser.add_option('--window', action='store', type='int', dest='window',
            metavar='SEGMENTS', help="""Segments in flight. [Default: %d]"""
            % config.DEFAULT_WINDOW)
    parser.add_option('--scenario', action='store', type='string',
            dest='scenario', metavar='PATH', help="""Reads mode, payload_size \
and seed from a JSON file.""")
    parser.add_option('--capture', action='store', type='string',
            dest='capture', metavar='PATH', help="""Writes every encoded \
Interest of the last run to this file.""")
    return parser


def _parser_registry_demo():
    parser = _new_parser('registry-demo', '%prog [options]', """Registers \
random identifiers across a domain hierarchy through the registry line \
protocol and resolves each of them from every domain.""")
    parser.set_defaults(
        domains = DEFAULT_DOMAINS,
        registrations = 100,
        unregistered = 10,
        supervisors = config.DEFAULT_SUPERVISORS,
        cache_size = config.DEFAULT_CACHE_SIZE,
        data_dir = None,
    )
    parser.add_option('--domains', action='store', type='string',
            dest='domains', metavar='PATH[,PATH...]', help="""Leaf domains; \
missing ancestors are created. [Default: %s]""" % DEFAULT_DOMAINS)
    parser.add_option('--registrations', action='store', type='int',
            dest='registrations', metavar='COUNT', help="""Identifiers to \
register. [Default: 100]""")
    parser.add_option('--unregistered', action='store', type='int',
            dest='unregistered', metavar='COUNT', help="""Unregistered \
identifiers to resolve. [Default: 10]""")
    parser.add_option('--supervisors', action='store', type='int',
            dest='supervisors', metavar='COUNT', help="""Supervisor nodes \
per domain. [Default: %d]""" % config.DEFAULT_SUPERVISORS)
    parser.add_option('--cache-size', action='store', type='int',
            dest='cache_size', metavar='COUNT', help="""Resolution cache \
entries per domain. [Default: %d]""" % config.DEFAULT_CACHE_SIZE)
    parser.add_option('--data-dir', action='store', type='string',
            dest='data_dir', metavar='DIR', help="""Persists chains and \
records below this directory.""")
    return parser


PARSERS = {
    'fib-bench': _parser_fib_bench,
    'fib-check': _parser_fib_check,
    'consensus-sim': _parser_consensus_sim,
    'model-eval': _parser_model_eval,
    'model-sweep': _parser_model_sweep,
    'tunnel-demo': _parser_tunnel_demo,
    'registry-demo': _parser_registry_demo,
}


def parse(argv):
    """Returns (command, opts, parser).

    Usage errors end in parser.error(), which exits with status 2.

    """
    if not argv or argv[0] not in PARSERS:
        parser = OptionParser(
            prog = info.name,
            usage = USAGE,
            version = info.version,
            description = info.long_description,
        )
        opts, args = parser.parse_args(list(argv))
        if not args:
            parser.error('a command must be given: %s' % ', '.join(COMMANDS))
        parser.error('unknown command: %s' % args[0])

    command = argv[0]
    parser = PARSERS[command]()
    _add_common_options(parser)
    opts, args = parser.parse_args(list(argv[1:]))
    if args:
        parser.error('invalid number of arguments')
    if opts.debug and opts.quiet:
        parser.error('--debug and --quiet cannot be used together')
    return command, opts, parser

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

import logging

import pytest

from MINLab import applogger
from MINLab.simulator import EventScheduler


def make_record():
    return logging.LogRecord('MINLab.test', logging.INFO, __file__, 1, 'x', None, None)


def test_records_outside_a_simulation_carry_no_virtual_time():
    record = make_record()
    assert applogger.VIRTUAL_CLOCK.filter(record)
    assert record.vtime == '-'


def test_virtual_clock_stamps_the_innermost_scheduler():
    outer, inner = EventScheduler(), EventScheduler()
    outer.now, inner.now = 1500000000, 2000
    with applogger.virtual_clock(outer):
        with applogger.virtual_clock(inner):
            record = make_record()
            applogger.VIRTUAL_CLOCK.filter(record)
            assert record.vtime == '0.000002000'
        record = make_record()
        applogger.VIRTUAL_CLOCK.filter(record)
        assert record.vtime == '1.500000000'
    record = make_record()
    applogger.VIRTUAL_CLOCK.filter(record)
    assert record.vtime == '-'


def test_stream_filters():
    info, debug = make_record(), make_record()
    debug.levelno = logging.DEBUG
    assert not applogger.StderrFilter().filter(info)
    assert not applogger.StderrFilter().filter(debug)
    assert applogger.StderrFilter(verbose=True).filter(debug)
    assert applogger.StdoutFilter().filter(info)
    assert not applogger.StdoutFilter(quiet=True).filter(info)


def test_repeated_initialization_does_not_stack_handlers():
    root = logging.getLogger()
    applogger.init_std_stream_loggers()
    applogger.init_std_stream_loggers()
    ours = [h for h in root.handlers if getattr(h, '_minlab', False)]
    assert len(ours) == 2
    with pytest.raises(applogger.LoggerError):
        applogger.init_std_stream_loggers(verbose=True, quiet=True)


def test_file_logger(tmp_path):
    path = tmp_path / 'minlab.log'
    applogger.init_file_logger(str(path), 'INFO')
    logging.getLogger('MINLab.test').info('hello')
    for handler in logging.getLogger().handlers:
        handler.flush()
    assert '[-] MINLab.test:INFO     hello' in path.read_text()
    applogger._reset_handlers(logging.getLogger())
    with pytest.raises(applogger.LoggerError):
        applogger.init_file_logger(str(path), 'loud')
    with pytest.raises(applogger.LoggerError):
        applogger.init_file_logger(str(tmp_path / 'absent' / 'x.log'), 'info')

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

import optparse

import pytest

from MINLab.config import (
    ConfigFileNotFoundError,
    ConfigInvalidError,
    ConfigPathNotSetError,
    WorkbenchConfig,
    apply_overrides,
    load_configuration,
)


def test_section_values_win_over_flat_ones():
    cfg = WorkbenchConfig({'seed': 7, 'queries': 5, 'fib-bench': {'queries': 9}})
    assert cfg.options('fib-bench') == {'seed': 7, 'queries': 9}
    assert cfg.get('fib-bench', 'queries') == 9
    assert cfg.get('model-eval', 'queries') == 5
    assert cfg.sections() == ['fib-bench']


def test_getlist_and_defaults():
    cfg = WorkbenchConfig({'a': [1, 2], 'b': '3, 4,', 'c': ''})
    assert cfg.getlist('x', 'a') == ['1', '2']
    assert cfg.getlist('x', 'b') == ['3', '4']
    assert cfg.get_or_default('x', 'c', 'dflt') == 'dflt'
    assert cfg.get_or_default('x', 'd', 5) == 5


def test_load_errors(tmp_path):
    with pytest.raises(ConfigPathNotSetError):
        load_configuration(None)
    with pytest.raises(ConfigFileNotFoundError):
        load_configuration(str(tmp_path / 'none.json'))
    bad = tmp_path / 'bad.json'
    bad.write_text('{oops')
    with pytest.raises(ConfigInvalidError):
        load_configuration(str(bad))
    bad.write_text('[1, 2]')
    with pytest.raises(ConfigInvalidError):
        load_configuration(str(bad))


def test_apply_overrides():
    opts = optparse.Values({'mean_len': '4', 'len': '6'})
    cfg = WorkbenchConfig({'mean-len': [3, 4], 'len': 8})
    apply_overrides(opts, cfg, 'fib-bench')
    assert (opts.mean_len, opts.len) == ('3,4', 8)
    with pytest.raises(ConfigInvalidError):
        apply_overrides(opts, WorkbenchConfig({'colour': 1}), 'fib-bench')

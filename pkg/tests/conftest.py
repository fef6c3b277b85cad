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
import os
import sys

import pytest

sys.path.insert(0, os.path.join(os.path.dirname(__file__), os.pardir, 'src'))

from MINLab.fib import Hpt
from MINLab.identifiers import ContentName, ForwardingInfo
from MINLab.registry import Hierarchy


def name(text):
    return ContentName.parse(text)


@pytest.fixture
def fib():
    return Hpt()


@pytest.fixture
def chain_fib():
    """{/c1: Real, /c1/c2: SemiVirtual, /c1/c2/c3: Real}"""
    table = Hpt()
    table.insert(name('/c1/c2/c3'), ForwardingInfo(3))
    table.insert(name('/c1'), ForwardingInfo(1))
    return table


@pytest.fixture
def hierarchy():
    tree = Hierarchy.build(['/top/cn/gd', '/top/cn/bj', '/top/us'], supervisors=3, seed=5)
    yield tree
    tree.close()


@pytest.fixture(autouse=True)
def _quiet_root_logger():
    yield
    root = logging.getLogger()
    for handler in list(root.handlers):
        if getattr(handler, '_minlab', False):
            root.removeHandler(handler)
            handler.close()

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

from MINLab.apov import genesis_group
from MINLab.database import (
    ChainDatabase,
    CorruptDatabaseError,
    DatabaseNotActiveError,
    InitializationError,
    RecordDatabase,
    RecordDoesNotExistError,
)


def test_chain_database_round_trip(tmp_path):
    path = tmp_path / 'chain.db'
    with ChainDatabase(str(path)) as db:
        db.append(genesis_group())
        db.append(genesis_group())
    assert ChainDatabase(str(path)).load() == [genesis_group(), genesis_group()]


def test_chain_database_detects_truncation(tmp_path):
    path = tmp_path / 'chain.db'
    with ChainDatabase(str(path)) as db:
        db.append(genesis_group())
    path.write_bytes(path.read_bytes()[:-3])
    with pytest.raises(CorruptDatabaseError):
        ChainDatabase(str(path)).load()


def test_inactive_database_refuses_writes(tmp_path):
    db = ChainDatabase(str(tmp_path / 'chain.db'))
    with pytest.raises(DatabaseNotActiveError):
        db.append(genesis_group())


def test_activation_error(tmp_path):
    db = RecordDatabase(str(tmp_path / 'missing' / 'records.db'))
    with pytest.raises(InitializationError):
        db.database_activate()


def test_record_database_latest_line_wins(tmp_path):
    path = str(tmp_path / 'records.db')
    with RecordDatabase(path) as db:
        db.put({'identifier': 'id:alice', 'status': 'pending'})
        db.put({'identifier': 'id:alice', 'status': 'committed'})
        db.put({'identifier': 'geo:cn', 'status': 'committed'})
    with RecordDatabase(path) as db:
        assert len(db) == 2
        assert 'id:alice' in db
        assert db.get('id:alice')['status'] == 'committed'
        with pytest.raises(RecordDoesNotExistError):
            db.get('id:bob')


def test_record_database_rejects_garbage(tmp_path):
    path = tmp_path / 'records.db'
    path.write_text('{"identifier": "id:a"}\nnot json\n')
    with pytest.raises(CorruptDatabaseError):
        RecordDatabase(str(path)).database_activate()


def test_in_memory_record_database():
    db = RecordDatabase()
    db.database_activate()
    db.put({'identifier': 'id:a'})
    assert [r['identifier'] for r in db.values()] == ['id:a']
    db.database_close()

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
import json
import struct
import logging

from MINLab.apov import BlockGroup, decode_group, encode_group
from MINLab.util import WireFormatError


logger = logging.getLogger(__name__)


class InitializationError(Exception):
    pass

class DatabaseNotActiveError(Exception):
    pass

class CorruptDatabaseError(Exception):
    pass

class RecordDoesNotExistError(Exception):
    pass


class _AppendOnlyFile:
    """Common open/close handling of the append-only stores.

    A path of None keeps the store in memory only.

    """
    def __init__(self, path=None):
        self.path = os.path.abspath(path) if path else None
        self.f = None

    def _check_active(self):
        if self.path is not None and self.f is None:
            raise DatabaseNotActiveError(self.path)

    def _append(self, data):
        self._check_active()
        if self.f is not None:
            self.f.write(data)
            self.f.flush()

    def _read_all(self):
        if self.path is None or not os.path.exists(self.path):
            return b''
        with open(self.path, 'rb') as f:
            return f.read()

    def database_activate(self):
        """Opens the store for appending, creating it if it does not exist.

        On error InitializationError is raised.

        """
        if self.path is None:
            return
        try:
            self.f = open(self.path, 'ab')
        except OSError as exc:
            self.f = None
            raise InitializationError(exc.strerror)

    def database_close(self):
        if self.f is not None:
            self.f.close()
            self.f = None

    def __enter__(self):
        self.database_activate()
        return self

    def __exit__(self, *exc_info):
        self.database_close()


class ChainDatabase(_AppendOnlyFile):
    """Append-only file of serialized block groups.

    Records are of the format:

        <4-byte big-endian length><canonical block group encoding>

    """
    def append(self, group: BlockGroup):
        data = encode_group(group)
        self._append(struct.pack('>I', len(data)) + data)

    def load(self):
        """Returns the stored block groups in append order."""
        data = self._read_all()
        groups = []
        offset = 0
        while offset < len(data):
            if offset + 4 > len(data):
                raise CorruptDatabaseError('Truncated length at %d' % offset)
            (size,) = struct.unpack_from('>I', data, offset)
            offset += 4
            if offset + size > len(data):
                raise CorruptDatabaseError('Truncated record at %d' % offset)
            try:
                groups.append(decode_group(data[offset:offset + size]))
            except (WireFormatError, ValueError) as exc:
                raise CorruptDatabaseError('Record at %d: %s' % (offset, exc))
            offset += size
        return groups


class RecordDatabase(_AppendOnlyFile):
    """Off-chain registration records, one JSON object per line.

    Records are keyed by their 'identifier' field; the latest line for an
    identifier wins when the file is reloaded.

    """
    def __init__(self, path=None):
        super().__init__(path)
        self.records = {}

    def __len__(self):
        return len(self.records)

    def __contains__(self, key):
        return key in self.records

    def database_activate(self):
        self.records = {}
        for lineno, line in enumerate(self._read_all().decode('utf-8').splitlines(), 1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                self.records[record['identifier']] = record
            except (ValueError, KeyError, TypeError) as exc:
                raise CorruptDatabaseError('%s:%d: %s' % (self.path, lineno, exc))
        super().database_activate()

    def get(self, key):
        """Returns the stored record or raises RecordDoesNotExistError."""
        try:
            return self.records[key]
        except KeyError:
            raise RecordDoesNotExistError(key)

    def put(self, record):
        line = json.dumps(record, sort_keys=True) + '\n'
        self._append(line.encode('utf-8'))
        self.records[record['identifier']] = record

    def values(self):
        return self.records.values()

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

import csv
import hashlib
import json
import logging
import os
import struct


logger = logging.getLogger(__name__)

sha256 = hashlib.sha256

DIGEST_SIZE = sha256().digest_size
ZERO_DIGEST = bytes(DIGEST_SIZE)


class WireFormatError(ValueError):
    pass


def pack_blob(data):
    """Length-prefixed field: 4-byte big-endian length, then the bytes."""
    return struct.pack('>I', len(data)) + data


class WireReader:
    """Sequential reader over big-endian length-prefixed fields."""

    def __init__(self, data):
        self.data = memoryview(data)
        self.offset = 0

    def take(self, size):
        end = self.offset + size
        if end > len(self.data):
            raise WireFormatError('Truncated field at offset %d' % self.offset)
        chunk = self.data[self.offset:end].tobytes()
        self.offset = end
        return chunk

    def unpack(self, fmt):
        values = struct.unpack(fmt, self.take(struct.calcsize(fmt)))
        return values[0] if len(values) == 1 else values

    def blob(self):
        return self.take(self.unpack('>I'))

    def done(self):
        if self.offset != len(self.data):
            raise WireFormatError('%d trailing bytes' % (len(self.data) - self.offset))


def digest(data):
    """Returns the raw sha256 digest of the provided data."""
    return sha256(data).digest()

def sha256sum(data):
    """Returns the sha256 checksum of the provided data as hex."""
    s = sha256()
    s.update(data)
    return s.hexdigest()

def ceil_div(a, b):
    return -(-a // b)

def ensure_dir(path):
    """Creates the report directory if it is missing and returns its
    absolute path."""
    path = os.path.abspath(path)
    os.makedirs(path, exist_ok=True)
    return path

def write_csv(path, header, rows):
    """Writes a CSV report: one header line, then one line per row."""
    with open(path, 'w', newline='') as f:
        writer = csv.writer(f)
        writer.writerow(header)
        for row in rows:
            writer.writerow(row)
    logger.info('Report written: %s', path)

def write_json(path, obj):
    with open(path, 'w') as f:
        json.dump(obj, f, indent=2, sort_keys=True, default=str)
        f.write('\n')
    logger.info('Summary written: %s', path)

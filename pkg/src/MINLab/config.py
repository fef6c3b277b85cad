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

DEFAULT_OUTPUT_DIR = 'reports'
DEFAULT_LOGLEVEL = 'info'
DEFAULT_SEED = 1

# fib-bench / fib-check (desk scale)
DEFAULT_BENCH_ENTRIES = 100000
DEFAULT_BENCH_QUERIES = 50000
DEFAULT_QUERY_LENGTH = 6
DEFAULT_MEAN_LENGTH = 4
DEFAULT_ALPHABET = 100
DEFAULT_CHECK_OPS = 10000
DEFAULT_CHECK_INTERVAL = 1000
MAX_NAME_LENGTH = 10
FULL_SCALE_ENTRIES = 5000000
FULL_SCALE_QUERIES = 500000

# APoV prototype parameters (bytes unless noted)
DEFAULT_K = 10000
DEFAULT_M = 266
DEFAULT_H = 692
DEFAULT_T = 40
DEFAULT_H_V = 400
DEFAULT_V_B = 100
DEFAULT_H_R = 170
DEFAULT_R_B = 400
DEFAULT_BAND = 125000000        # bytes/second, 1 Gbps
DEFAULT_TERM_LENGTH = 10
DEFAULT_ROUNDS = 10

# tunnel
DEFAULT_SEGMENT_SIZE = 4096
DEFAULT_WINDOW = 16
DEFAULT_HOP_DELAY_NS = 1000000
DEFAULT_PAYLOAD_SIZE = 1 << 20

# registry
DEFAULT_CACHE_SIZE = 1024
DEFAULT_SUPERVISORS = 4


import json
import os


class ConfigError(Exception):
    pass

class ConfigPathNotSetError(ConfigError):
    pass

class ConfigFileNotFoundError(ConfigError):
    pass

class ConfigInvalidError(ConfigError):
    pass


class WorkbenchConfig:
    """Read-only view over a parsed JSON configuration object.

    Options may be given flat at the top level or grouped in a section
    named after the subcommand, in which case the section wins:

        {"seed": 7, "fib-bench": {"entries": 20000}}

    """
    def __init__(self, data=None, path=None):
        if data is not None and not isinstance(data, dict):
            raise ConfigInvalidError('Configuration must be a JSON object')
        self.data = data or {}
        self.path = path

    def sections(self):
        return [k for k, v in self.data.items() if isinstance(v, dict)]

    def has_option(self, section, option):
        sect = self.data.get(section)
        if isinstance(sect, dict) and option in sect:
            return True
        return option in self.data and not isinstance(self.data[option], dict)

    def get(self, section, option):
        sect = self.data.get(section)
        if isinstance(sect, dict) and option in sect:
            return sect[option]
        return self.data[option]

    def getlist(self, section, option):
        """Returns a list of strings.

        Accepts either a JSON array or a comma-delimited string as the
        option value.

        """
        value = self.get(section, option)
        if isinstance(value, (list, tuple)):
            return [str(v).strip() for v in value if str(v).strip()]
        return [v.strip() for v in str(value).split(',') if v.strip()]

    def get_or_default(self, section, option, default):
        """Returns the option value.

        If the option is not set or the value is empty, then it returns the
        provided default value.

        """
        if not self.has_option(section, option):
            return default
        value = self.get(section, option)
        if value is None or value == '':
            return default
        return value

    def options(self, section):
        """Returns the effective {option: value} mapping for a section,
        flat options first, section options overriding them."""
        merged = {k: v for k, v in self.data.items() if not isinstance(v, dict)}
        sect = self.data.get(section)
        if isinstance(sect, dict):
            merged.update(sect)
        return merged


def load_configuration(path=None):
    """Returns a WorkbenchConfig read from a JSON file.

    Raises ConfigPathNotSetError if no path is given,
    ConfigFileNotFoundError if the file is missing and ConfigInvalidError
    if it does not parse into a JSON object.

    """
    if not path:
        raise ConfigPathNotSetError
    path = os.path.abspath(path)
    if not os.path.exists(path):
        raise ConfigFileNotFoundError(path)
    try:
        with open(path) as f:
            data = json.load(f)
    except ValueError as exc:
        raise ConfigInvalidError('%s: %s' % (path, exc))
    return WorkbenchConfig(data, path)


def apply_overrides(opts, cfg, section):
    """Overrides option values with the ones found in the configuration.

    Keys use the command-line spelling ('mean-len' or 'mean_len'); unknown
    keys raise ConfigInvalidError.

    """
    for key, value in cfg.options(section).items():
        dest = key.replace('-', '_')
        if not hasattr(opts, dest):
            raise ConfigInvalidError('Unknown option in %s: %s' % (cfg.path, key))
        if isinstance(value, list):
            value = ','.join(str(v) for v in value)
        setattr(opts, dest, value)
    return opts

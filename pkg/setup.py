#! /usr/bin/env python
# -*- coding: utf-8 -*-
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
#  NOTES
#
#  Create source distribution tarball:
#    python setup.py sdist --formats=gztar
#
#  Install in development mode with the test dependencies:
#    pip install -e .[tests]
#
#  Run the test suite (desk-scale acceptance runs are marked 'slow'):
#    pytest -m "not slow"
#


import sys
import glob

sys.path = ['src/'] + sys.path

from setuptools import setup
from MINLab import info

if __name__=='__main__':
    setup(
        name = info.name,
        version = info.version,
        description = info.description,
        long_description = info.long_description,
        author = info.author,
        author_email = info.author_email,
        url = info.url,
        license = info.license,
        classifiers = info.classifiers,
        packages = [
            'MINLab',
        ],
        package_dir = {'': 'src'},
        python_requires = '>=3.8',
        install_requires = [
            'numpy>=1.20',
        ],
        extras_require = {
            'tests': ['pytest>=6'],
        },
        data_files = [
            ('share/minlab/examples', glob.glob('etc/*.json')),
        ],
        scripts = ['scripts/minlab'],
    )

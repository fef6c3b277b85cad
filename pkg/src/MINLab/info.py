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

version = '0.2.0'
status = 'alpha'
name = 'minlab'
description = """MINLab is a protocol workbench for the Multi-Identifier Network (MIN)."""
long_description = """MINLab is a protocol workbench for the Multi-Identifier Network (MIN). It implements the data plane forwarding table (HPT-FIB, a hash table merged with a prefix tree and searched with a longest-prefix-match binary search), the management plane consensus (APoV, a consortium blockchain with separate voting and bookkeeping rights) together with a deterministic virtual-time simulator and a closed-form performance model, the IP-over-CCN tunnel handshake scheme, and the hierarchical identifier registration and resolution flow. A command line front end runs the forwarding, consensus and tunnel benchmarks at desk scale and writes CSV/JSON reports."""
author = 'MINLab developers'
author_email = ''
url = ''
license = 'Apache License version 2'

# Automate the development status for classifiers
devel_status = ''
if status == 'pre-alpha':
    devel_status = 'Development Status :: 2 - Pre-Alpha'
if status == 'alpha':
    devel_status = 'Development Status :: 3 - Alpha'
if status == 'beta':
    devel_status = 'Development Status :: 4 - Beta'
if status == 'stable':
    devel_status = 'Development Status :: 5 - Production/Stable'

# For a list of classifiers check: https://pypi.org/classifiers/

classifiers = [
    devel_status,
    'Environment :: Console',
    'Intended Audience :: Science/Research',
    'Intended Audience :: Telecommunications Industry',
    'License :: OSI Approved :: Apache Software License',
    'Natural Language :: English',
    'Operating System :: POSIX',
    'Programming Language :: Python :: 3',
    'Topic :: Internet',
    'Topic :: System :: Networking',
    'Topic :: System :: Distributed Computing',
    ]

def get_version():
    return name + ' v' + version + '/' + status

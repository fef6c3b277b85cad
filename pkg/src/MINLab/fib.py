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

"""HPT-FIB: a forwarding table combining a hash table and a prefix tree.

The hash index maps the canonical text of every stored name to its node
in the prefix tree. Every proper prefix of a stored name is present as a
filler entry (reconstruction), so membership in the index is monotone in
prefix length and the longest matching prefix can be found by binary
search over prefix lengths.

Filler entries are Virtual when no Real entry lies on their prefix chain
and SemiVirtual otherwise. A binary search ending on a SemiVirtual entry
backtracks through the parent links to the nearest Real ancestor.

Concurrency contract: lookups may run concurrently with each other;
insert, delete and bind_identifier need exclusive access.

"""

from __future__ import annotations

import collections
import enum
import logging
import re
import threading
from urllib.parse import unquote
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional

from MINLab.identifiers import (
    ContentName,
    ForwardingInfo,
    Identifier,
    IdentifierError,
    SEPARATOR,
    parse_identifier,
)


logger = logging.getLogger(__name__)


class FibError(Exception):
    pass

class UnknownContentError(FibError):
    pass

class DuplicateBindingError(FibError):
    pass

class InvalidBindingError(FibError):
    pass

class NotBoundError(FibError):
    pass

class FibLoadError(FibError):
    pass


class EntryState(enum.Enum):
    REAL = 'real'
    VIRTUAL = 'virtual'
    SEMI_VIRTUAL = 'semi-virtual'


REAL = EntryState.REAL
VIRTUAL = EntryState.VIRTUAL
SEMI_VIRTUAL = EntryState.SEMI_VIRTUAL


class FibNode:
    """Prefix tree node.

    'key' is the canonical text of the full name (the hash index key) and
    'depth' its component count. 'children' and 'bindings' are created on
    first use; most nodes of a large table are leaves without bindings.

    """
    __slots__ = ('component', 'key', 'depth', 'state', 'parent', 'children',
                 'forwarding', 'bindings')

    def __init__(self, component, key, depth, state=None, parent=None):
        self.component = component
        self.key = key
        self.depth = depth
        self.state = state
        self.parent = parent
        self.children = None
        self.forwarding = None
        self.bindings = None

    def __repr__(self):
        state = self.state.value if self.state else 'root'
        return '<FibNode %s %s>' % (self.key or '/', state)

    @property
    def is_leaf(self):
        return not self.children

    @property
    def name(self):
        return ContentName.parse(self.key)

    def add_child(self, node):
        if self.children is None:
            self.children = {}
        self.children[node.component] = node
        node.parent = self

    def remove_child(self, node):
        del self.children[node.component]
        if not self.children:
            self.children = None

    def iter_children(self):
        if self.children:
            return iter(self.children.values())
        return iter(())


@dataclass(frozen=True)
class LookupResult:
    """Hit carries the matched Real prefix and its forwarding information;
    Miss carries neither. 'probes' counts hash index accesses only."""

    hit: bool
    probes: int
    matched_prefix: Optional[ContentName] = None
    forwarding: Optional[ForwardingInfo] = None

    @property
    def outcome(self):
        """The comparable part of the result (probes excluded)."""
        if not self.hit:
            return None
        return (self.matched_prefix, self.forwarding)


@dataclass(frozen=True)
class Violation:
    kind: str
    name: str
    detail: str = ''

    def __str__(self):
        return '%s: %s %s' % (self.kind, self.name, self.detail)


@dataclass
class ProbeStatistics:
    lookups: collections.Counter = field(default_factory=collections.Counter)
    probes: collections.Counter = field(default_factory=collections.Counter)

    def mean(self, kind):
        if not self.lookups[kind]:
            return 0.0
        return self.probes[kind] / self.lookups[kind]


_ESCAPED = re.compile(r'[%\t\n\r,]')


def _key(components, k):
    return SEPARATOR + SEPARATOR.join(components[:k])


def _escape(text):
    return _ESCAPED.sub(lambda m: '%%%02X' % ord(m.group()), text)


class Hpt:
    """Implements the HPT-FIB.

    Real entries carry ForwardingInfo and an optional list of bound
    non-content identifiers; 'alt_index' maps each bound identifier back to
    its content name.

    """
    def __init__(self):
        self.root = FibNode('', '', 0)
        self.index: Dict[str, FibNode] = {}
        self.alt_index: Dict[Identifier, ContentName] = {}
        self.probe_counter = ProbeStatistics()
        self._real_count = 0
        self._stats_lock = threading.Lock()

    def __len__(self):
        return self._real_count

    def __contains__(self, name):
        node = self.index.get(str(name))
        return node is not None and node.state is REAL

    @property
    def entry_count(self):
        return len(self.index)

    # Private API

    def _attach(self, parent, child):
        parent.add_child(child)

    def _new_node(self, components, depth, state=None):
        key = _key(components, depth)
        node = FibNode(components[depth - 1], key, depth, state)
        self.index[key] = node
        return node

    def _unlink(self, node):
        node.parent.remove_child(node)
        del self.index[node.key]

    def _promote_subtree(self, node):
        """Turns every Virtual entry below a newly Real node SemiVirtual.

        Descent stops at non-virtual nodes: a Real node's filler
        descendants are SemiVirtual already.

        """
        stack = list(node.iter_children())
        while stack:
            e = stack.pop()
            if e.state is VIRTUAL:
                e.state = SEMI_VIRTUAL
                stack.extend(e.iter_children())

    def _demote(self, node):
        """Breadth-first demotion of a former Real node and its SemiVirtual
        descendants to Virtual, stopping at Real nodes."""
        q = collections.deque([node])
        while q:
            e = q.popleft()
            e.state = VIRTUAL
            for child in e.iter_children():
                if child.state is SEMI_VIRTUAL:
                    q.append(child)

    def _drop_bindings(self, node):
        if node.bindings:
            for alt in node.bindings:
                self.alt_index.pop(alt, None)
            logger.debug('Dropped %d bindings of %s', len(node.bindings), node.key)
        node.bindings = None

    def _search(self, components):
        """Binary search over prefix lengths 1..N.

        On a hash hit the search moves to longer prefixes, on a miss to
        shorter ones; the returned node is the longest indexed prefix.

        """
        index = self.index
        lo, hi = 1, len(components)
        last = None
        probes = 0
        while lo <= hi:
            mid = (lo + hi) // 2
            probes += 1
            node = index.get(SEPARATOR + SEPARATOR.join(components[:mid]))
            if node is None:
                hi = mid - 1
            else:
                last = node
                lo = mid + 1
        return last, probes

    def _count(self, kind, probes):
        with self._stats_lock:
            self.probe_counter.lookups[kind] += 1
            self.probe_counter.probes[kind] += probes

    def _hit(self, name, node, probes):
        if node.depth == len(name):
            prefix = name
        else:
            prefix = ContentName(name.components[:node.depth])
        return LookupResult(True, probes, prefix, node.forwarding)

    # Public API

    def node(self, name) -> Optional[FibNode]:
        """Returns the tree node of a name (any state) or None."""
        return self.index.get(str(name))

    def state_of(self, name) -> Optional[EntryState]:
        node = self.index.get(str(name))
        return node.state if node is not None else None

    def insert(self, name: ContentName, forwarding: ForwardingInfo):
        """Inserts or updates a Real entry, reconstructing missing
        prefixes as filler entries."""
        comps = name.components
        n = len(comps)
        node = self.index.get(_key(comps, n))
        if node is not None:
            if node.state is not REAL:
                was_virtual = node.state is VIRTUAL
                node.state = REAL
                self._real_count += 1
                if was_virtual:
                    self._promote_subtree(node)
            node.forwarding = forwarding
            return self

        child = self._new_node(comps, n, REAL)
        child.forwarding = forwarding
        self._real_count += 1
        created = []
        for i in range(n - 1, 0, -1):
            e = self.index.get(_key(comps, i))
            if e is not None:
                self._attach(e, child)
                state = VIRTUAL if e.state is VIRTUAL else SEMI_VIRTUAL
                for filler in created:
                    filler.state = state
                return self
            e = self._new_node(comps, i)
            self._attach(e, child)
            created.append(e)
            child = e
        self._attach(self.root, child)
        for filler in created:
            filler.state = VIRTUAL
        return self

    def delete(self, name: ContentName) -> bool:
        """Deletes a Real entry. Returns False (and leaves the table
        untouched) if the name is not a Real entry."""
        node = self.index.get(str(name))
        if node is None or node.state is not REAL:
            return False

        self._drop_bindings(node)
        node.forwarding = None
        self._real_count -= 1

        if not node.is_leaf:
            parent = node.parent
            if parent is not self.root and parent.state in (SEMI_VIRTUAL, REAL):
                node.state = SEMI_VIRTUAL
            else:
                self._demote(node)
            return True

        parent = node.parent
        self._unlink(node)
        while parent is not self.root and parent.state is not REAL and parent.is_leaf:
            grandparent = parent.parent
            self._unlink(parent)
            parent = grandparent
        return True

    def lookup_lpm(self, name: ContentName) -> LookupResult:
        """Longest prefix match by binary search with SemiVirtual
        backtracking."""
        last, probes = self._search(name.components)
        self._count('lpm', probes)
        if last is None or last.state is VIRTUAL:
            return LookupResult(False, probes)
        while last.state is not REAL:
            last = last.parent
        return self._hit(name, last, probes)

    def lookup_no_backtrack(self, name: ContentName) -> LookupResult:
        """Same probe schedule as lookup_lpm, but any non-real last hit is
        a Miss."""
        last, probes = self._search(name.components)
        self._count('no_backtrack', probes)
        if last is None or last.state is not REAL:
            return LookupResult(False, probes)
        return self._hit(name, last, probes)

    def lookup_oracle(self, name: ContentName) -> LookupResult:
        """Linear longest prefix match, longest prefix first."""
        comps = name.components
        index = self.index
        probes = 0
        for k in range(len(comps), 0, -1):
            probes += 1
            node = index.get(_key(comps, k))
            if node is not None and node.state is REAL:
                self._count('oracle', probes)
                return self._hit(name, node, probes)
        self._count('oracle', probes)
        return LookupResult(False, probes)

    def bind_identifier(self, content: ContentName, alt: Identifier):
        """Binds a non-content identifier to a Real content entry."""
        if alt.is_content:
            raise InvalidBindingError('Cannot bind a content name: %s' % alt)
        node = self.index.get(str(content))
        if node is None or node.state is not REAL:
            raise UnknownContentError(str(content))
        if alt in self.alt_index:
            raise DuplicateBindingError('%s is bound to %s' % (alt, self.alt_index[alt]))
        if node.bindings is None:
            node.bindings = []
        node.bindings.append(alt)
        self.alt_index[alt] = content
        return self

    def translate(self, alt: Identifier) -> ContentName:
        """Returns the content name used to route an identifier."""
        if alt.is_content:
            return alt.value
        try:
            return self.alt_index[alt]
        except KeyError:
            raise NotBoundError(str(alt))

    def bindings_of(self, content: ContentName) -> List[Identifier]:
        node = self.index.get(str(content))
        if node is None or not node.bindings:
            return []
        return list(node.bindings)

    def iter_nodes(self) -> Iterator[FibNode]:
        """Walks the prefix tree depth first, root excluded."""
        stack = list(self.root.iter_children())
        while stack:
            node = stack.pop()
            yield node
            stack.extend(node.iter_children())

    def real_names(self) -> Iterator[ContentName]:
        for node in self.index.values():
            if node.state is REAL:
                yield node.name

    def verify_integrity(self) -> List[Violation]:
        """Checks the table definitions; returns an empty list when valid."""
        violations = []
        seen = set()

        for node in self.iter_nodes():
            seen.add(node.key)
            if self.index.get(node.key) is not node:
                violations.append(Violation('index', node.key, 'tree node not indexed'))
            if node.parent is None or node.parent.children.get(node.component) is not node:
                violations.append(Violation('index', node.key, 'broken parent link'))

            has_real_prefix = False
            p = node.parent
            while p is not self.root:
                if p.state is REAL:
                    has_real_prefix = True
                    break
                p = p.parent

            if node.state is REAL:
                if node.forwarding is None:
                    violations.append(Violation('forwarding', node.key, 'real entry without forwarding'))
            else:
                if node.forwarding is not None:
                    violations.append(Violation('forwarding', node.key, 'non-real entry with forwarding'))
                if node.bindings:
                    violations.append(Violation('binding', node.key, 'non-real entry with bindings'))
                if node.is_leaf:
                    violations.append(Violation('non-real-leaf', node.key))
                expected = SEMI_VIRTUAL if has_real_prefix else VIRTUAL
                if node.state is not expected:
                    violations.append(Violation(
                        'state', node.key,
                        'is %s, expected %s' % (node.state.value, expected.value)))

        for key, node in self.index.items():
            if key not in seen:
                violations.append(Violation('index', key, 'indexed name unreachable from root'))
            if node.depth > 1 and _key(node.key.split(SEPARATOR)[1:], node.depth - 1) not in self.index:
                violations.append(Violation('prefix-closure', key))

        for alt, content in self.alt_index.items():
            if alt not in self.bindings_of(content):
                violations.append(Violation('binding', str(content), '%s not on node' % alt))

        if violations:
            logger.warning('FIB integrity check found %d violations', len(violations))
        return violations

    def dump(self) -> str:
        """Serializes the table, one entry per line:

            <name>\\t<state>\\t<face_id[:metric]|->\\t<bindings>

        Names and bindings are percent-escaped so that tabs, newlines and
        commas inside them survive a reload.

        """
        lines = []
        for key in sorted(self.index):
            node = self.index[key]
            fwd = node.forwarding
            if fwd is None:
                face = '-'
            elif fwd.metric is None:
                face = str(fwd.face_id)
            else:
                face = '%d:%d' % (fwd.face_id, fwd.metric)
            bindings = ','.join(_escape(str(b)) for b in node.bindings or ())
            lines.append('%s\t%s\t%s\t%s' % (_escape(key), node.state.value, face, bindings))
        return '\n'.join(lines) + ('\n' if lines else '')

    @classmethod
    def load(cls, text: str) -> 'Hpt':
        """Rebuilds a table from dump() output.

        Real lines are replayed as inserts (and bindings); non-real lines
        must agree with the reconstructed state.

        """
        fib = cls()
        fillers = {}
        for lineno, line in enumerate(text.split('\n'), 1):
            line = line.rstrip('\r')
            if not line.strip():
                continue
            fields = line.split('\t')
            if len(fields) != 4:
                raise FibLoadError('line %d: expected 4 fields' % lineno)
            key, state_text, face, bindings = fields
            try:
                name = ContentName.parse(unquote(key))
                state = EntryState(state_text)
            except (IdentifierError, ValueError) as exc:
                raise FibLoadError('line %d: %s' % (lineno, exc))
            if state is REAL:
                try:
                    face_id, _, metric = face.partition(':')
                    fwd = ForwardingInfo(int(face_id), int(metric) if metric else None)
                    fib.insert(name, fwd)
                    for alt in filter(None, bindings.split(',')):
                        fib.bind_identifier(name, parse_identifier(unquote(alt)))
                except (ValueError, IdentifierError, FibError) as exc:
                    raise FibLoadError('line %d: %s' % (lineno, exc))
            else:
                if face != '-' or bindings:
                    raise FibLoadError('line %d: non-real entry with forwarding data' % lineno)
                fillers[str(name)] = state

        for key, node in fib.index.items():
            if node.state is REAL:
                continue
            expected = fillers.pop(key, None)
            if expected is not node.state:
                raise FibLoadError('%s: dumped as %s, reconstructed as %s' % (
                    key, expected.value if expected else 'absent', node.state.value))
        if fillers:
            raise FibLoadError('Non-real entries with no stored descendant: %s'
                               % ', '.join(sorted(fillers)))
        return fib

# Copyright (C) 2024 The wbic authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#            http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Robot model files.

A model file is INI text::

    [robot]            name, gravity
    [body.<name>]      mass, com (3 floats), inertia (3 diagonal or 6: ixx iyy izz ixy ixz iyz)
    [joint.<name>]     type (planar|floating|revolute|prismatic), parent (body or "world"),
                       child, origin, axis, lower, upper, velocity, effort
    [contact.<name>]   body, offset, radius
    [task.<name>]      body, offset
"""

import configparser
import logging
import os
import re

import numpy as np

from .dynamics import Body, Frame, Joint, KinematicTree
from .exceptions import ModelError
from .utils import get_custom_setting

logger = logging.getLogger('wbic')

DEFAULT_MODEL = os.path.join(os.path.dirname(__file__), 'robots', 'planar_wheel_legged.ini')

_SECTION = re.compile(r'^\s*\[(?P<name>[^\]]+)\]')
_OPTION = re.compile(r'^\s*(?P<key>[A-Za-z_][\w.]*)\s*[=:]')


def line_index(text):
    """Map ``(section, key)`` (and ``(section, None)``) to 1-based line numbers."""
    index, section = {}, None
    for number, line in enumerate(text.splitlines(), start=1):
        match = _SECTION.match(line)
        if match:
            section = match.group('name').strip()
            index[(section, None)] = number
            continue
        match = _OPTION.match(line)
        if match and section is not None:
            index[(section, match.group('key').lower())] = number
    return index


class _Reader:

    def __init__(self, text, source):
        self.source = source
        self.lines = line_index(text)
        self.parser = configparser.ConfigParser(interpolation=None)
        try:
            self.parser.read_string(text, source=source)
        except configparser.Error as e:
            raise ModelError('%s: %s' % (source, e))

    def where(self, section, key=None):
        line = self.lines.get((section, key)) or self.lines.get((section, None))
        return '%s:%s [%s]%s' % (self.source, line or '?', section, ' ' + key if key else '')

    def floats(self, section, key, size=None, default=None):
        if not self.parser.has_option(section, key):
            if default is None:
                raise ModelError('%s: missing key' % self.where(section, key))
            return np.asarray(default, dtype=float)
        raw = self.parser.get(section, key)
        try:
            values = np.array([float(tok) for tok in raw.split()])
        except ValueError:
            raise ModelError('%s: "%s" is not a list of numbers' % (self.where(section, key), raw))
        if size is not None and values.shape[0] not in (size if isinstance(size, tuple) else (size,)):
            raise ModelError('%s: expected %s values, got %d' % (self.where(section, key), size, values.shape[0]))
        return values

    def scalar(self, section, key, default=None):
        return float(self.floats(section, key, 1, None if default is None else [default])[0])


def _inertia(values):
    if values.shape[0] == 3:
        return np.diag(values)
    ixx, iyy, izz, ixy, ixz, iyz = values
    return np.array([[ixx, ixy, ixz], [ixy, iyy, iyz], [ixz, iyz, izz]])


def parse_model(text, source='<model>'):
    reader = _Reader(text, source)
    parser = reader.parser
    bodies, joints, contacts, tasks = [], [], [], []
    name = parser.get('robot', 'name', fallback='robot')
    gravity = reader.scalar('robot', 'gravity', 9.81) if parser.has_section('robot') else 9.81

    for section in parser.sections():
        kind, _, item = section.partition('.')
        if kind == 'robot':
            continue
        if not item:
            raise ModelError('%s: unknown section' % reader.where(section))
        try:
            if kind == 'body':
                bodies.append(Body(
                    name=item,
                    mass=reader.scalar(section, 'mass'),
                    com=reader.floats(section, 'com', 3, np.zeros(3)),
                    inertia=_inertia(reader.floats(section, 'inertia', (3, 6)))))
            elif kind == 'joint':
                parent = parser.get(section, 'parent', fallback='world').strip()
                joints.append(Joint(
                    name=item,
                    type=parser.get(section, 'type').strip(),
                    parent=None if parent in ('', 'world') else parent,
                    child=parser.get(section, 'child').strip(),
                    origin=reader.floats(section, 'origin', 3, np.zeros(3)),
                    axis=reader.floats(section, 'axis', 3, [0.0, 0.0, 1.0]),
                    lower=reader.scalar(section, 'lower', -np.inf),
                    upper=reader.scalar(section, 'upper', np.inf),
                    velocity_limit=reader.scalar(section, 'velocity', np.inf),
                    effort_limit=reader.scalar(section, 'effort', np.inf)))
            elif kind in ('contact', 'task'):
                frame = Frame(
                    name=item,
                    body=parser.get(section, 'body').strip(),
                    offset=reader.floats(section, 'offset', 3, np.zeros(3)),
                    radius=reader.scalar(section, 'radius', 0.0))
                (contacts if kind == 'contact' else tasks).append(frame)
            else:
                raise ModelError('%s: unknown section kind "%s"' % (reader.where(section), kind))
        except configparser.NoOptionError as e:
            raise ModelError('%s: missing key' % reader.where(section, e.option))

    try:
        return KinematicTree(bodies, joints, contacts, tasks, gravity=gravity, name=name)
    except ModelError as e:
        raise ModelError('%s: %s' % (source, e))


def load_model(path=None):
    path = path or get_custom_setting('WBIC_DEFAULT_MODEL', DEFAULT_MODEL)
    if not os.path.exists(path):
        raise ModelError('model file not found: %s' % path)
    logger.debug('loading robot model from %s', path)
    with open(path, encoding='utf-8') as handle:
        return parse_model(handle.read(), source=path)

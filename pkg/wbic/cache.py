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

from dataclasses import dataclass
from types import MappingProxyType

import numpy as np


@dataclass(frozen=True, eq=False)
class IccCommand:
    tick: int
    t: float
    D_L: np.ndarray
    D_R: np.ndarray
    F_cpl: np.ndarray


class SnapshotCacheAdapter(dict):
    """A dict whose contents only become visible to readers on ``sync()``"""

    key_prefix = '_wbic'

    def __init__(self, store, key_suffix):
        self.store = store
        self.key = self.key_prefix + key_suffix

        super().__init__(self._get_objects())

    def _get_objects(self):
        return self.store.get(self.key, {})

    def _set_objects(self, objects):
        self.store[self.key] = objects

    def sync(self):
        # readers get a read-only copy, later writes to self do not leak into it
        self._set_objects(MappingProxyType(dict(self)))


class IccCommandCache:
    """Hands the latest outer-loop command to the inner loop."""

    def __init__(self, store=None):
        self._db = SnapshotCacheAdapter({} if store is None else store, '_icc_command')

    def publish(self, command: IccCommand):
        self._db['command'] = command
        self._db.sync()

    def latest(self):
        return self._db._get_objects().get('command')

    def clear(self):
        self._db.clear()
        self._db.sync()

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


import numpy as np
from django.test import SimpleTestCase

from wbic.cache import IccCommand, IccCommandCache, SnapshotCacheAdapter


def command(tick):
    return IccCommand(tick, tick * 0.01, np.full(3, 20.0), np.full(3, 200.0), np.zeros(3))


class SnapshotCacheAdapterTests(SimpleTestCase):

    def test_writes_visible_after_sync(self):
        store = {}
        adapter = SnapshotCacheAdapter(store, '_test')
        adapter['a'] = 1
        self.assertEqual(store, {})
        adapter.sync()
        self.assertEqual(dict(store['_wbic_test']), {'a': 1})

    def test_snapshot_is_read_only_and_detached(self):
        store = {}
        adapter = SnapshotCacheAdapter(store, '_test')
        adapter['a'] = 1
        adapter.sync()
        adapter['a'] = 2
        self.assertEqual(store['_wbic_test']['a'], 1)
        with self.assertRaises(TypeError):
            store['_wbic_test']['a'] = 3

    def test_reloads_existing_contents(self):
        store = {}
        first = SnapshotCacheAdapter(store, '_test')
        first['a'] = 1
        first.sync()
        self.assertEqual(SnapshotCacheAdapter(store, '_test')['a'], 1)


class IccCommandCacheTests(SimpleTestCase):

    def test_empty(self):
        self.assertIsNone(IccCommandCache().latest())

    def test_latest_command(self):
        cache = IccCommandCache()
        cache.publish(command(1))
        cache.publish(command(2))
        self.assertEqual(cache.latest().tick, 2)

    def test_shared_store(self):
        store = {}
        writer, reader = IccCommandCache(store), IccCommandCache(store)
        writer.publish(command(5))
        self.assertEqual(reader.latest().tick, 5)

    def test_unsynced_write_is_invisible(self):
        cache = IccCommandCache()
        cache.publish(command(1))
        cache._db['command'] = command(9)
        self.assertEqual(cache.latest().tick, 1)

    def test_clear(self):
        cache = IccCommandCache()
        cache.publish(command(1))
        cache.clear()
        self.assertIsNone(cache.latest())

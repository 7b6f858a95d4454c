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


import io
import os
import tempfile

from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase

from wbic import cli
from wbic.management.commands.wbic import EXIT_CONFIG, Command
from wbic.runlog import RunLog

from .test_conf import ExperimentFileMixin


class CommandTests(ExperimentFileMixin, SimpleTestCase):

    def call(self, *args):
        out, err = io.StringIO(), io.StringIO()
        call_command('wbic', *args, stdout=out, stderr=err)
        return out.getvalue(), err.getvalue()

    def test_validate(self):
        out, _ = self.call('validate')
        self.assertIn('configuration OK (1 run(s))', out)

    def test_validate_batch(self):
        out, _ = self.call('validate', '--scenario', 'terrain1', '--scenario', 'terrain2')
        self.assertIn('configuration OK (2 run(s))', out)

    def test_unparseable_config(self):
        path = self.write('[icc]\nbogus = 1\n')
        with self.assertRaises(CommandError) as cm:
            self.call('validate', '--config', path)
        self.assertEqual(cm.exception.returncode, EXIT_CONFIG)

    def test_invalid_config(self):
        path = self.write('[icc]\nD_L_min = 300\n')
        err = io.StringIO()
        with self.assertRaises(CommandError) as cm:
            call_command('wbic', 'validate', '--config', path, stdout=io.StringIO(), stderr=err)
        self.assertEqual(cm.exception.returncode, EXIT_CONFIG)
        self.assertEqual(str(cm.exception), '1 configuration problem(s)')
        self.assertIn('[icc.D_L_min] D_L_min must be below D_L_max', err.getvalue())

    def test_run_writes_logs(self):
        with tempfile.TemporaryDirectory() as tmp:
            out, _ = self.call('run', '--scenario', 'flat-carry', '--duration', '0.02', '--no-plots',
                               '--seed', '3', '--out', tmp)
            log = RunLog.load(os.path.join(tmp, 'flat-carry', 'run.csv'))
            self.assertEqual(len(log), 11)
            self.assertTrue(os.path.exists(os.path.join(tmp, 'summary.csv')))
            self.assertFalse(os.path.exists(os.path.join(tmp, 'flat-carry', 'run_legs.svg')))
        self.assertIn('wrote 1 run(s) to %s' % tmp, out)

    def test_compare_pairs_runs(self):
        options = {'seed': None, 'config': None, 'scenario': ['terrain2'], 'compare': 'fixed'}
        configs = Command().load_configs(options)
        self.assertEqual([label for label, _ in configs], ['terrain2', 'terrain2-fixed'])
        self.assertEqual(configs[1][1].controller_config().damping_mode, 'fixed')

    def test_set_overrides_config_entries(self):
        options = {'seed': None, 'config': None, 'scenario': ['terrain2'], 'compare': None,
                   'set': ['icc.damping=fixed', 'wbc.mu = 0.3', 'experiment.seed=9']}
        (label, conf), = Command().load_configs(options)
        self.assertEqual(conf.controller_config().damping_mode, 'fixed')
        self.assertEqual(conf.mu, 0.3)
        self.assertEqual(conf.seed, 9)
        self.assertEqual(conf.origin('wbc', 'mu'), ('--set', None))

    def test_malformed_set(self):
        for entry in ('icc.damping', 'damping=fixed', '.mu=0.3'):
            err = io.StringIO()
            with self.assertRaises(CommandError) as cm:
                call_command('wbic', 'validate', '--set', entry, stdout=io.StringIO(), stderr=err)
            self.assertEqual(cm.exception.returncode, EXIT_CONFIG)
            self.assertIn('expected SECTION.KEY=VALUE', err.getvalue())

    def test_seeded_runs_are_byte_identical(self):
        with tempfile.TemporaryDirectory() as first, tempfile.TemporaryDirectory() as second:
            for out in (first, second):
                self.call('run', '--scenario', 'terrain2', '--seed', '7', '--no-plots', '--out', out)
            with open(os.path.join(first, 'terrain2', 'run.csv'), 'rb') as a, \
                    open(os.path.join(second, 'terrain2', 'run.csv'), 'rb') as b:
                self.assertEqual(a.read(), b.read())

    def test_set_unknown_key(self):
        with self.assertRaises(CommandError) as cm:
            self.call('validate', '--set', 'icc.bogus=1')
        self.assertEqual(cm.exception.returncode, EXIT_CONFIG)


class ConsoleScriptTests(ExperimentFileMixin, SimpleTestCase):

    def test_exit_codes(self):
        self.assertEqual(cli.main(['validate']), 0)
        path = self.write('[icc]\nbogus = 1\n')
        self.assertEqual(cli.main(['validate', '--config', path]), EXIT_CONFIG)

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


import csv
import io
import os
import tempfile

import numpy as np
from django.test import SimpleTestCase, override_settings
from numpy.testing import assert_array_equal

from wbic.exceptions import DimensionError
from wbic.runlog import RunLog, columns, leg_label, write_summary


def small_log():
    cols = columns(3, 3, 1, ['wheel'], ['front_leg'], 1)
    log = RunLog(cols, 'flat-carry')
    for k in range(3):
        log.append({c: 0.1 * k + i for i, c in enumerate(cols)})
    return log


class ColumnTests(SimpleTestCase):

    def test_order(self):
        self.assertEqual(columns(3, 3, 1, ['wheel'], ['front_leg'], 1), [
            't', 'q_0', 'q_1', 'q_2', 'qd_0', 'qd_1', 'qd_2', 'tau_0', 'leg_ext_front',
            'height', 'height_ref', 'support_dz', 'ground_wheel_x', 'ground_wheel_z',
            'fC_true_wheel_x', 'fC_true_wheel_y', 'fC_true_wheel_z',
            'fC_est_wheel_x', 'fC_est_wheel_y', 'fC_est_wheel_z',
            'nz_true_wheel_x', 'nz_true_wheel_y', 'nz_true_wheel_z',
            'nz_est_wheel_x', 'nz_est_wheel_y', 'nz_est_wheel_z',
            'f_obj_L_x', 'f_obj_L_y', 'f_obj_L_z', 'f_obj_R_x', 'f_obj_R_y', 'f_obj_R_z',
            'load_acc_L', 'load_acc_R',
            'D_L_x', 'D_L_y', 'D_L_z', 'D_R_x', 'D_R_y', 'D_R_z',
            'F_f_0', 'rho1', 'rho2', 'E', 'solver_iters', 'solver_residual',
        ])

    def test_leg_label(self):
        self.assertEqual(leg_label('front_leg'), 'front')
        self.assertEqual(leg_label('hip'), 'hip')


class RunLogTests(SimpleTestCase):

    def test_missing_values_are_nan(self):
        log = RunLog(['t', 'E'])
        log.append({'t': 0.0})
        self.assertTrue(np.isnan(log.column('E')[0]))

    def test_empty(self):
        self.assertEqual(RunLog(['t', 'E']).data.shape, (0, 2))

    def test_matching(self):
        self.assertEqual(small_log().matching('qd_'), ['qd_0', 'qd_1', 'qd_2'])

    def test_csv_round_trip(self):
        log = small_log()
        back = RunLog.read_csv(io.StringIO(log.to_csv()))
        self.assertEqual(back.columns, log.columns)
        self.assertEqual(back.scenario, 'flat-carry')
        assert_array_equal(back.data, log.data)

    def test_header_line(self):
        self.assertTrue(small_log().to_csv().startswith('# wbic-run 1 flat-carry\nt,q_0,'))

    def test_schema_version(self):
        with self.assertRaisesMessage(DimensionError, 'run log schema 2, this version reads 1'):
            RunLog.read_csv(io.StringIO('# wbic-run 2 x\nt\n0.0\n'))

    def test_not_a_run_log(self):
        with self.assertRaisesMessage(DimensionError, 'not a wbic run log'):
            RunLog.read_csv(io.StringIO('t,E\n0,0\n'))

    @override_settings(WBIC_CSV_FLOAT_FORMAT='%.3f')
    def test_float_format_setting(self):
        log = RunLog(['t'])
        log.append({'t': 1.0 / 3.0})
        self.assertEqual(log.to_csv().splitlines()[-1], '0.333')
        self.assertEqual(log.to_csv('repr').splitlines()[-1], repr(1.0 / 3.0))

    def test_uniform_timestamps(self):
        log = RunLog(['t'])
        for t in (0.0, 0.002, 0.005):
            log.append({'t': t})
        with self.assertRaisesMessage(DimensionError, 'run log timestamps are not uniformly spaced'):
            log.check_uniform(0.002)

    def test_save_and_load(self):
        log = small_log()
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, 'run.csv')
            log.save(path)
            assert_array_equal(RunLog.load(path).data, log.data)


class SummaryFileTests(SimpleTestCase):

    def test_write_summary(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, 'summary.csv')
            write_summary(path, [{'label': 'a', 'E': 0.1}, {'label': 'b', 'E': 2.5}])
            with open(path, newline='') as handle:
                rows = list(csv.DictReader(handle))
        self.assertEqual([(r['label'], float(r['E'])) for r in rows], [('a', 0.1), ('b', 2.5)])

    def test_nothing_to_write(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, 'summary.csv')
            write_summary(path, [])
            self.assertFalse(os.path.exists(path))

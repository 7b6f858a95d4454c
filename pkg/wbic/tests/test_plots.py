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


import os
import tempfile

from django.test import SimpleTestCase

from wbic.plots import render_all
from wbic.runlog import RunLog, columns


def synthetic_log():
    cols = columns(3, 3, 1, ['front_wheel'], ['front_leg'], 1)
    log = RunLog(cols, 'terrain2')
    for k in range(20):
        t = 0.01 * k
        row = {c: 0.0 for c in cols}
        row.update({'t': t, 'ground_front_wheel_x': 0.1 * k, 'ground_front_wheel_z': 0.01 * k,
                    'nz_true_front_wheel_z': 1.0, 'fC_true_front_wheel_z': 400.0, 'fC_est_front_wheel_z': 395.0,
                    'leg_ext_front': 0.15, 'height': 0.6, 'height_ref': 0.6, 'f_obj_L_z': -8.8})
        log.append(row)
    return log


class RenderTests(SimpleTestCase):

    def test_renders_three_figures(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, 'run.csv')
            synthetic_log().save(path)
            paths = render_all(path)
            self.assertEqual([os.path.basename(p) for p in paths],
                             ['run_terrain.svg', 'run_legs.svg', 'run_forces.svg'])
            for p in paths:
                with open(p, encoding='utf-8') as handle:
                    self.assertIn('<svg', handle.read())

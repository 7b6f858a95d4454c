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

from unittest import mock

import numpy as np
from django.test import SimpleTestCase
from numpy.testing import assert_allclose

from wbic.cache import IccCommand
from wbic.controller import ControllerConfig, ControlStack, MotionCommand
from wbic.exceptions import InvalidParameter
from wbic.plant import Plant, PlantConfig
from wbic.terrain import make_terrain

from .utils import robot


class ControlStackTests(SimpleTestCase):

    def setUp(self):
        self.tree = robot()
        self.plant = Plant(self.tree, make_terrain('flat'), PlantConfig(q_noise=0.0, qd_noise=0.0))
        self.state = self.plant.initial_state()
        self.reading = self.plant.sense(self.state, np.zeros(self.tree.n))
        self.motion = MotionCommand(0.0, 0.0)

    def static_force(self, config):
        return -(config.icc.m_L + config.icc.m_R) * config.icc.g

    def test_static_load_force_is_zero(self):
        stack = ControlStack(robot(), ControllerConfig(mu=0.6))
        p = stack.config.icc
        command = IccCommand(0, 0.0, p.midpoint('L'), p.midpoint('R'),
                             np.array([0.0, 0.0, self.static_force(stack.config)]))
        self.assertAlmostEqual(stack.load_force(self.reading.state(), command), 0.0, places=9)
        heavier = IccCommand(0, 0.0, p.midpoint('L'), p.midpoint('R'),
                             np.array([0.0, 0.0, self.static_force(stack.config) - 10.0]))
        self.assertAlmostEqual(stack.load_force(self.reading.state(), heavier), -10.0, places=9)

    def test_published_coupling_force_shapes_height_reference(self):
        plain = ControlStack(robot(), ControllerConfig(mu=0.6))
        loaded = ControlStack(robot(), ControllerConfig(mu=0.6))
        plain.step(self.reading, self.motion)
        loaded.step(self.reading, self.motion)
        p = loaded.config.icc
        loaded.cache.publish(IccCommand(1, self.reading.t, p.midpoint('L'), p.midpoint('R'),
                                        np.array([0.0, 0.0, self.static_force(loaded.config) - 4000.0])))
        later = self.plant.sense(self.state, np.zeros(self.tree.n))
        later = type(later)(self.reading.t + 2e-3, later.q, later.qd, later.tau, later.arm_deflection,
                            later.arm_rate)
        a = plain.step(later, self.motion)
        b = loaded.step(later, self.motion)
        self.assertLess(b.height_ref, a.height_ref - 1e-4)

    def test_frames_and_cones_follow_the_outer_rate(self):
        stack = ControlStack(robot(), ControllerConfig(mu=0.6))
        self.assertEqual(stack.config.icc_every, 5)
        with mock.patch.object(stack.terrain, 'update', wraps=stack.terrain.update) as update:
            for k in range(11):
                reading = self.plant.sense(self.state, np.zeros(self.tree.n))
                reading = type(reading)(k * 2e-3, reading.q, reading.qd, reading.tau, reading.arm_deflection,
                                        reading.arm_rate)
                stack.step(reading, self.motion)
        self.assertEqual(update.call_count, 3)
        assert_allclose([call.args[0] for call in update.call_args_list], [0.0, 0.01, 0.02], atol=1e-12)

    def test_task_acceleration_limits(self):
        config = ControllerConfig(mu=0.6)
        stack = ControlStack(robot(), config)
        tasks = {task.name: task for task in stack.tasks(self.motion, stack.impedance.step(
            (np.array([0.6]), np.zeros(1), np.zeros(1)), [0.0]))}
        self.assertEqual(tasks['height'].limit, 6.0)
        self.assertEqual(tasks['pitch'].limit, 10.0)
        self.assertAlmostEqual(tasks['centroid'].limit, 0.5 * 0.6 * config.icc.g)
        self.assertEqual(ControllerConfig(centroid_acc_limit=1.5).centroid_limit, 1.5)

    def test_invalid_limit(self):
        with self.assertRaisesMessage(InvalidParameter, 'task acceleration limits must be positive'):
            ControllerConfig(height_acc_limit=-1.0)

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


from dataclasses import replace

import numpy as np
from django.test import SimpleTestCase
from numpy.testing import assert_allclose, assert_array_equal

from wbic.dynamics import GeneralizedState
from wbic.exceptions import InvalidParameter, SimulationFault, UnknownFrame
from wbic.plant import Plant, PlantConfig, PlantState
from wbic.terrain import make_terrain

from .utils import robot


def holding_torques(tree, config):
    """Leg forces that carry the torso and the loads hanging in front of it."""
    loads = sum(config.load_masses)
    g = tree.gravity
    front = (0.5 * (tree.bodies['torso'].mass + loads) + loads * 0.35 / 0.6) * g
    rear = (tree.bodies['torso'].mass + loads) * g - front
    return np.array([front, rear, 0.0, 0.0])


class PlantTests(SimpleTestCase):

    def setUp(self):
        self.tree = robot()
        self.config = PlantConfig()
        self.plant = Plant(self.tree, make_terrain('flat'), self.config)
        self.tau = holding_torques(self.tree, self.config)

    def simulate(self, state, steps, plant=None):
        plant = plant or self.plant
        reports = []
        for _ in range(steps):
            state, report = plant.step(state, self.tau)
            reports.append(report)
        return state, reports

    def test_initial_pose_carries_static_load(self):
        state = self.plant.initial_state()
        weight = (self.tree.total_mass + sum(self.config.load_masses)) * self.tree.gravity
        sink = weight / (2 * self.config.contact_stiffness)
        _, report = self.plant.step(state, self.tau)
        for name in self.plant.contacts:
            self.assertAlmostEqual(report.penetration[name], sink, places=9)
        assert_allclose(report.load_acc, np.zeros((2, 3)), atol=1e-9)
        assert_allclose(report.object_forces[:, 2], [-0.9 * self.tree.gravity] * 2, atol=1e-9)

    def test_contact_forces_push_only(self):
        _, reports = self.simulate(self.plant.initial_state(), 150)
        for report in reports:
            for name, force in report.forces.items():
                self.assertGreaterEqual(float(force @ report.normals[name]), 0.0)

    def test_settles_on_its_wheels(self):
        weight = (self.tree.total_mass + sum(self.config.load_masses)) * self.tree.gravity
        _, reports = self.simulate(self.plant.initial_state(), 250)
        support = np.mean([sum(r.forces[n][2] for n in self.plant.contacts) for r in reports[-50:]])
        self.assertAlmostEqual(support, weight, delta=0.1 * weight)

    def test_traction_inside_friction_limit(self):
        self.tau = self.tau + np.array([0.0, 0.0, 10.0, 10.0])
        _, reports = self.simulate(self.plant.initial_state(), 50)
        for report in reports:
            for name, force in report.forces.items():
                n = report.normals[name]
                normal = float(force @ n)
                tangential = np.linalg.norm(force - normal * n)
                self.assertLessEqual(tangential, self.config.traction * normal + 1e-9)

    def test_airborne_robot_has_no_contact(self):
        start = self.plant.initial_state()
        q = np.array(start.robot.q)
        q[1] += 0.5
        lifted = PlantState(GeneralizedState(q, start.robot.qd), start.load_pos + [0.0, 0.0, 0.5], start.load_vel)
        _, reports = self.simulate(lifted, 5)
        for name in self.plant.contacts:
            assert_array_equal(reports[-1].forces[name], np.zeros(3))
        self.assertEqual({k.split(':')[0] for k in reports[-1].friction}, {'leg'})

    def test_deep_penetration_is_a_fault(self):
        start = self.plant.initial_state()
        q = np.array(start.robot.q)
        q[1] -= 0.1
        sunk = PlantState(GeneralizedState(q, start.robot.qd), start.load_pos, start.load_vel)
        with self.assertRaisesMessage(SimulationFault, 'inside the terrain'):
            self.plant.step(sunk, self.tau)

    def test_rk4_integrator(self):
        plant = Plant(self.tree, make_terrain('flat'), replace(self.config, integrator='rk4'))
        state, reports = self.simulate(plant.initial_state(), 50, plant)
        self.assertAlmostEqual(state.t, 0.1)
        self.assertTrue(all(np.all(np.isfinite(r.forces['front_wheel'])) for r in reports))

    def test_time_advances(self):
        state, _ = self.simulate(self.plant.initial_state(), 3)
        self.assertAlmostEqual(state.t, 3 * self.config.dt)


class SensorTests(SimpleTestCase):

    def test_seeded_noise(self):
        tree = robot()
        a = Plant(tree, make_terrain('flat'), PlantConfig(seed=7))
        b = Plant(tree, make_terrain('flat'), PlantConfig(seed=7))
        c = Plant(tree, make_terrain('flat'), PlantConfig(seed=8))
        state = a.initial_state()
        tau = np.zeros(tree.n)
        assert_array_equal(a.sense(state, tau).q, b.sense(state, tau).q)
        self.assertFalse(np.array_equal(a.sense(state, tau).qd, c.sense(state, tau).qd))

    def test_noiseless(self):
        tree = robot()
        plant = Plant(tree, make_terrain('flat'), PlantConfig(q_noise=0.0, qd_noise=0.0))
        state = plant.initial_state()
        reading = plant.sense(state, np.ones(tree.n))
        assert_array_equal(reading.q, state.robot.q)
        assert_array_equal(reading.tau, np.ones(tree.n))
        assert_allclose(reading.arm_deflection[:, 2], [-0.9 * tree.gravity / 350.0] * 2)


class PlantConfigTests(SimpleTestCase):

    def test_unknown_integrator(self):
        with self.assertRaisesMessage(InvalidParameter, 'unknown integrator "euler"'):
            PlantConfig(integrator='euler')

    def test_rolling_range(self):
        with self.assertRaisesMessage(InvalidParameter, 'rolling coefficient must lie in [0, 1]'):
            PlantConfig(rolling=1.5)

    def test_unknown_hand(self):
        with self.assertRaises(UnknownFrame):
            Plant(robot(), make_terrain('flat'), PlantConfig(hands=('left_hand', 'tail')))

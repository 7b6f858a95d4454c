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
from numpy.testing import assert_allclose

from wbic import dynamics
from wbic.dynamics import Frame, GeneralizedState
from wbic.exceptions import DimensionError, NonFiniteInput, UnknownFrame
from wbic.tests.utils import free_body, random_state, robot, standing_state
from wbic.wbc import wheel_centre


class FreeBodyTests(SimpleTestCase):

    def setUp(self):
        self.tree = free_body()
        self.rest = GeneralizedState(np.zeros(3), np.zeros(3))

    def test_terms_at_rest(self):
        terms = dynamics.compute_dynamics(self.tree, self.rest)
        assert_allclose(terms.C, [0.0, 10 * 9.81, 0.0], atol=1e-12)
        assert_allclose(terms.B, np.diag([10.0, 10.0, 0.2]), atol=1e-12)

    def test_falls_under_gravity(self):
        qdd = dynamics.forward_dynamics(self.tree, self.rest, np.zeros(0))
        assert_allclose(qdd, [0.0, -9.81, 0.0], atol=1e-12)

    def test_supported_weight_stops_the_fall(self):
        qdd = dynamics.forward_dynamics(self.tree, self.rest, np.zeros(0), {'box': [0.0, 0.0, 98.1]})
        assert_allclose(qdd, np.zeros(3), atol=1e-12)

    def test_vertical_inertia_is_the_mass(self):
        tree = free_body(mass=80.0)
        terms = dynamics.compute_dynamics(tree, self.rest)
        self.assertAlmostEqual(terms.B[1, 1], 80.0, places=12)

    def test_rejects_bad_states(self):
        with self.assertRaises(DimensionError):
            dynamics.compute_dynamics(self.tree, GeneralizedState(np.zeros(4), np.zeros(3)))
        with self.assertRaises(NonFiniteInput):
            dynamics.compute_dynamics(self.tree, GeneralizedState([0.0, np.nan, 0.0], np.zeros(3)))


class RobotDynamicsTests(SimpleTestCase):

    def setUp(self):
        self.tree = robot()
        self.rng = np.random.default_rng(3)

    def test_inertia_matches_unit_acceleration_columns(self):
        for _ in range(5):
            state = random_state(self.tree, self.rng)
            still = GeneralizedState(state.q, np.zeros(self.tree.nv))
            bias = dynamics.inverse_dynamics(self.tree, still, np.zeros(self.tree.nv))
            columns = np.column_stack([
                dynamics.inverse_dynamics(self.tree, still, np.eye(self.tree.nv)[i]) - bias
                for i in range(self.tree.nv)])
            B = dynamics.compute_dynamics(self.tree, state).B
            assert_allclose(B, columns, atol=1e-9)

    def test_inertia_symmetric_positive_definite(self):
        for _ in range(10):
            B = dynamics.compute_dynamics(self.tree, random_state(self.tree, self.rng)).B
            self.assertLess(np.max(np.abs(B - B.T)), 1e-12)
            self.assertGreater(np.linalg.eigvalsh(B).min(), 0.0)

    def test_forward_inverse_round_trip(self):
        state = random_state(self.tree, self.rng)
        tau = self.rng.normal(scale=20.0, size=self.tree.n)
        f_ext = {'front_wheel': [5.0, 0.0, 300.0], 'rear_wheel': [-3.0, 0.0, 250.0]}
        qdd = dynamics.forward_dynamics(self.tree, state, tau, f_ext)
        generalized = dynamics.inverse_dynamics(self.tree, state, qdd, f_ext)
        assert_allclose(generalized, self.tree.S.T @ tau, atol=1e-9)

    def test_leg_joint_moves_wheel_down(self):
        state = random_state(self.tree, self.rng, speed=0.0)
        qd = np.zeros(self.tree.nv)
        qd[self.tree.joint_v_index['front_leg']] = 1.0
        jac = dynamics.compute_jacobians(self.tree, GeneralizedState(state.q, qd), (), ['front_wheel'])
        kin = dynamics.Kinematics(self.tree, state)
        _, J, _ = kin.point(Frame('foot', 'front_leg'))
        R = dynamics.base_pose(self.tree, state)[1]
        # legs extend along -z of the torso
        assert_allclose(J @ qd, R @ [0.0, 0.0, -1.0], atol=1e-12)
        self.assertEqual(jac.J_C.shape, (2, self.tree.nv))

    def test_jacobian_matches_finite_difference(self):
        state = random_state(self.tree, self.rng)
        eps = 1e-7
        moved = GeneralizedState(state.q + eps * state.qd, state.qd)
        for name in ('left_hand', wheel_centre(self.tree.frame('front_wheel')), 'torso'):
            p0, J, _ = dynamics.Kinematics(self.tree, state).point(name)
            p1, _, _ = dynamics.Kinematics(self.tree, moved).point(name)
            assert_allclose(J @ state.qd, (p1 - p0) / eps, rtol=1e-5, atol=1e-6)

    def test_rolling_wheel_contact_point_is_at_rest(self):
        state = standing_state(self.tree)
        qd = np.zeros(self.tree.nv)
        qd[0] = 0.5
        qd[self.tree.joint_v_index['front_wheel']] = 5.0
        kin = dynamics.Kinematics(self.tree, state)
        _, J, _ = kin.point('front_wheel')
        assert_allclose(J @ qd, np.zeros(3), atol=1e-12)
        _, J_centre, _ = kin.point(wheel_centre(self.tree.frame('front_wheel')))
        assert_allclose(J_centre @ qd, [0.5, 0.0, 0.0], atol=1e-12)

    def test_frame_pose(self):
        state = standing_state(self.tree)
        pos, R = dynamics.frame_pose(self.tree, state, 'left_hand')
        base, R_base = dynamics.base_pose(self.tree, state)
        assert_allclose(R, R_base, atol=1e-12)
        assert_allclose(pos, base + [0.35, 0.0, 0.25], atol=1e-12)
        centre, _ = dynamics.frame_pose(self.tree, state, 'front_wheel')
        contact = dynamics.point_position(self.tree, state, 'front_wheel')
        assert_allclose(centre - contact, [0.0, 0.0, 0.1], atol=1e-12)
        self.assertAlmostEqual(contact[2], 0.0, places=12)
        tilted = dynamics.point_position(self.tree, state, 'front_wheel', normal=[0.6, 0.0, 0.8])
        assert_allclose(centre - tilted, [0.06, 0.0, 0.08], atol=1e-12)

    def test_com_jacobian_matches_finite_difference(self):
        state = random_state(self.tree, self.rng)
        eps = 1e-7
        moved = GeneralizedState(state.q + eps * state.qd, state.qd)
        J, _ = dynamics.com_jacobian(self.tree, state)
        c0 = dynamics.center_of_mass(self.tree, state)
        c1 = dynamics.center_of_mass(self.tree, moved)
        assert_allclose(J @ state.qd, (c1 - c0) / eps, rtol=1e-5, atol=1e-6)

    def test_bias_acceleration_matches_finite_difference(self):
        state = random_state(self.tree, self.rng)
        h = 1e-6
        for name in ('left_hand', 'rear_wheel'):
            _, _, dJdq = dynamics.Kinematics(self.tree, state).point(name)
            ahead = GeneralizedState(state.q + h * state.qd, state.qd)
            behind = GeneralizedState(state.q - h * state.qd, state.qd)
            _, Ja, _ = dynamics.Kinematics(self.tree, ahead).point(name)
            _, Jb, _ = dynamics.Kinematics(self.tree, behind).point(name)
            numeric = (Ja - Jb) @ state.qd / (2 * h)
            assert_allclose(dJdq, numeric, rtol=1e-4, atol=1e-6)

    def test_unknown_frame(self):
        state = random_state(self.tree, self.rng)
        with self.assertRaises(UnknownFrame):
            dynamics.compute_jacobians(self.tree, state, ['elbow'], [])

    def test_energy_drift_without_forces(self):
        tree = robot(gravity=0.0)
        q = tree.neutral_configuration()
        q[3:5] = 0.15
        qd = np.array([0.1, 0.0, 0.2, 0.05, -0.05, 1.0, -1.0])
        dt = 2e-3
        state = GeneralizedState(q, qd)
        start = dynamics.kinetic_energy(tree, state)
        for k in range(500):
            qdd = dynamics.forward_dynamics(tree, state, np.zeros(tree.n))
            qd = state.qd + dt * qdd
            state = GeneralizedState(dynamics.integrate_configuration(tree, state.q, qd, dt), qd, (k + 1) * dt)
        drift = abs(dynamics.kinetic_energy(tree, state) - start) / start
        self.assertLess(drift, 1e-3)

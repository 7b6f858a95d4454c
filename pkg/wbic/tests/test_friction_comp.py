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
from numpy.testing import assert_allclose, assert_array_equal

from wbic.exceptions import DimensionError, InvalidParameter
from wbic.friction_comp import FrictionCompensator, signum_activation, to_joint_torques

COULOMB = 5.0


def track_sinusoid(compensate, duration=20.0, dt=1e-3, inertia=1.0, kp=100.0, kd=20.0):
    """A unit-inertia joint with Coulomb friction following ``0.5 sin(pi t)``; returns (errors, F_f history)."""
    comp = FrictionCompensator(1)
    q = qd = 0.0
    errors, history = [], []
    for k in range(int(round(duration / dt))):
        t = k * dt
        w = np.pi
        q_d, qd_d, qdd_d = 0.5 * np.sin(w * t), 0.5 * w * np.cos(w * t), -0.5 * w ** 2 * np.sin(w * t)
        e, ed = q_d - q, qd_d - qd
        u = inertia * (qdd_d + kp * e + kd * ed)
        if compensate:
            comp.activate([qd], [u])
            comp.update([e], [ed], dt)
            u = u + float(comp.torques(np.eye(1))[0])
        if abs(qd) > 1e-6:
            friction = -COULOMB * np.sign(qd)
        else:
            friction = -np.clip(u, -COULOMB, COULOMB)
        qd = qd + dt * (u + friction) / inertia
        q = q + dt * qd
        errors.append(e)
        history.append(float(comp.F_f[0]))
    return np.array(errors), np.array(history)


def tail_rms(errors, samples=4000):
    return np.sqrt(np.mean(errors[-samples:] ** 2))


class SignumActivationTests(SimpleTestCase):

    def test_grid(self):
        cases = {
            (1.0, 1.0): 1.0, (1.0, 0.0): 1.0, (1.0, -1.0): 1.0,
            (0.0, 1.0): 1.0, (0.0, 0.0): 0.0, (0.0, -1.0): -1.0,
            (-1.0, 1.0): -1.0, (-1.0, 0.0): -1.0, (-1.0, -1.0): -1.0,
        }
        for (xd, u), expected in cases.items():
            self.assertEqual(signum_activation(xd, u), expected, (xd, u))

    def test_deadband(self):
        self.assertEqual(signum_activation(5e-5, -2.0), -1.0)
        self.assertEqual(signum_activation(5e-5, 5e-5), 0.0)
        self.assertEqual(signum_activation(2e-4, -2.0), 1.0)

    def test_vectorised(self):
        assert_array_equal(signum_activation([0.3, 0.0, -0.2], [-1.0, 2.0, 0.0]), [1.0, 1.0, -1.0])


class CompensatorTests(SimpleTestCase):

    def test_single_step(self):
        comp = FrictionCompensator(1, k_P=100.0, k_lambda=10.0)
        comp.activate([1.0], [0.0])
        assert_allclose(comp.update([0.01], [0.0], 0.002), [0.02])

    def test_no_sign_no_adaptation(self):
        comp = FrictionCompensator(2)
        comp.activate([0.0, 0.0], [0.0, 0.0])
        assert_array_equal(comp.update([0.5, -0.5], [1.0, 1.0], 0.01), [0.0, 0.0])

    def test_clamped(self):
        comp = FrictionCompensator(1, F_max=30.0)
        comp.activate([1.0], [0.0])
        for _ in range(1000):
            comp.update([1.0], [1.0], 0.01)
        assert_array_equal(comp.F_f, [30.0])
        comp.activate([-1.0], [0.0])
        for _ in range(3000):
            comp.update([1.0], [1.0], 0.01)
        assert_array_equal(comp.F_f, [-30.0])

    def test_joint_torques(self):
        J = np.array([[1.0, 0.0, 0.5], [0.0, 2.0, 0.0]])
        assert_allclose(to_joint_torques(J, [1.0, -1.0], [4.0, 3.0]), [4.0, -6.0, 2.0])

    def test_reset(self):
        comp = FrictionCompensator(1)
        comp.activate([1.0], [0.0])
        comp.update([1.0], [0.0], 0.01)
        comp.reset()
        assert_array_equal(comp.F_f, [0.0])
        assert_array_equal(comp.sigma, [0.0])

    def test_invalid(self):
        with self.assertRaisesMessage(InvalidParameter, 'friction compensation gains must be non-negative'):
            FrictionCompensator(1, k_P=-1.0)
        with self.assertRaisesMessage(InvalidParameter, 'F_max must be positive'):
            FrictionCompensator(1, F_max=0.0)
        with self.assertRaises(InvalidParameter):
            FrictionCompensator(1).update([0.0], [0.0], 0.0)
        with self.assertRaises(DimensionError):
            FrictionCompensator(2).update([0.0], [0.0], 0.01)


class CoulombJointTests(SimpleTestCase):

    def test_learns_the_friction_level(self):
        _, history = track_sinusoid(compensate=True)
        tail = history[-4000:]
        self.assertTrue(np.all((tail >= 4.0) & (tail <= 6.0)), (tail.min(), tail.max()))

    def test_reduces_tracking_error(self):
        plain, _ = track_sinusoid(compensate=False)
        compensated, _ = track_sinusoid(compensate=True)
        self.assertLessEqual(3.0 * tail_rms(compensated), tail_rms(plain))

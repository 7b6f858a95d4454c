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


import functools

import numpy as np
from django.test import SimpleTestCase
from numpy.testing import assert_allclose, assert_array_equal
from scipy import integrate

from wbic.conf import get_config
from wbic.controller import ControllerConfig
from wbic.exceptions import InvalidParameter
from wbic.plant import PlantConfig
from wbic.runlog import AXES, RunLog
from wbic.signals import run_finished, tick_completed
from wbic.sim import SCENARIOS, ClosedLoop, VelocityProfile, run_experiment, summarize
from wbic.terrain import make_terrain

from .utils import robot


class VelocityProfileTests(SimpleTestCase):

    def test_trapezoid(self):
        profile = VelocityProfile(2.0, cruise=0.5, accel=0.2, start=0.5, hold=0.5)
        self.assertAlmostEqual(profile.ramp_time, 2.5)
        self.assertAlmostEqual(profile.cruise_time, 1.5)
        self.assertAlmostEqual(profile.duration, 7.5)
        self.assertAlmostEqual(profile.at(profile.duration).x, 2.0)
        self.assertEqual(profile.at(0.2).v, 0.0)

    def test_speed_integrates_to_distance(self):
        profile = VelocityProfile(2.0)
        t = np.linspace(0.0, profile.duration, 20001)
        speed = np.array([profile.at(s).v for s in t])
        self.assertAlmostEqual(integrate.trapezoid(speed, t), 2.0, places=3)
        self.assertLessEqual(speed.max(), 0.5 + 1e-12)

    def test_position_is_continuous(self):
        profile = VelocityProfile(2.0)
        t = np.linspace(0.0, profile.duration, 20001)
        x = np.array([profile.at(s).x for s in t])
        self.assertLess(np.max(np.abs(np.diff(x))), 0.5 * (t[1] - t[0]) + 1e-9)

    def test_short_move_never_cruises(self):
        profile = VelocityProfile(0.2, cruise=0.5, accel=0.2)
        self.assertAlmostEqual(profile.peak, 0.2)
        self.assertAlmostEqual(profile.cruise_time, 0.0)

    def test_speed_cap(self):
        with self.assertRaisesMessage(InvalidParameter, 'cruise speed 0.90 m/s exceeds 0.8 m/s'):
            VelocityProfile(1.0, cruise=0.9)

    def test_scenarios(self):
        self.assertEqual(sorted(SCENARIOS), ['ablation-fixed-damping', 'flat-carry', 'terrain1', 'terrain2'])
        self.assertEqual(SCENARIOS['ablation-fixed-damping'].damping_mode, 'fixed')


class ClosedLoopTests(SimpleTestCase):

    def loop(self, seed=0):
        return ClosedLoop(robot(), make_terrain('flat'), PlantConfig(seed=seed), ControllerConfig(),
                          VelocityProfile(0.5), 'flat-carry')

    def test_short_run(self):
        log = self.loop().run(duration=0.1)
        self.assertEqual(len(log), 51)
        log.check_uniform(2e-3)
        self.assertEqual(log.scenario, 'flat-carry')
        self.assertTrue(np.all(np.isfinite(log.column('tau_0'))))
        self.assertTrue(np.all(log.column('fC_true_front_wheel_z') >= 0.0))

    def test_deterministic(self):
        assert_array_equal(self.loop(seed=4).run(duration=0.06).data, self.loop(seed=4).run(duration=0.06).data)

    def test_signals(self):
        ticks, finished = [], []

        def on_tick(sender, tick, record, **kwargs):
            ticks.append(tick)

        def on_finish(sender, scenario, log, **kwargs):
            finished.append((scenario, log))

        tick_completed.connect(on_tick)
        run_finished.connect(on_finish)
        try:
            log = self.loop().run(duration=0.02)
        finally:
            tick_completed.disconnect(on_tick)
            run_finished.disconnect(on_finish)
        self.assertEqual(ticks, list(range(11)))
        self.assertEqual(len(finished), 1)
        self.assertIs(finished[0][1], log)

    def test_shared_period(self):
        with self.assertRaisesMessage(InvalidParameter, 'plant and controller must share dt'):
            ClosedLoop(robot(), make_terrain('flat'), PlantConfig(dt=1e-3), ControllerConfig())


class SummaryTests(SimpleTestCase):

    def test_headline_numbers(self):
        cols = ['t', 'f_obj_L_z', 'f_obj_R_z', 'load_acc_L', 'load_acc_R', 'height', 'height_ref', 'E']
        log = RunLog(cols, 'flat-carry')
        rows = [
            (0.0, 0.0, -9.0, 50.0, 0.0, 0.60, 0.6, 0.0),
            (0.5, 100.0, -9.0, 0.0, 0.0, 0.50, 0.6, 1.0),
            (1.0, -8.0, -9.0, 1.0, 0.0, 0.61, 0.6, 2.0),
            (1.5, -9.0, -9.5, 2.0, 6.0, 0.58, 0.6, 3.0),
            (2.0, -10.0, -9.0, 3.0, 0.0, 0.60, 0.6, 4.0),
        ]
        for row in rows:
            log.append(dict(zip(cols, row)))
        summary = summarize(log, seed=7)
        self.assertEqual(summary['scenario'], 'flat-carry')
        self.assertEqual(summary['seed'], 7)
        self.assertEqual(summary['E'], 4.0)
        self.assertAlmostEqual(summary['object_force_fluctuation'], 2.0)
        self.assertEqual(summary['peak_load_acc'], 6.0)
        self.assertTrue(summary['load_slides'])
        self.assertAlmostEqual(summary['height_deviation'], 0.02)


@functools.lru_cache(maxsize=None)
def scenario_run(name, seed=0):
    conf = get_config(overrides={'experiment': {'scenario': name, 'seed': seed}})
    return conf.terrain(), run_experiment(conf)


def steady_contact(log, contact, hold=0.2):
    """Samples moving in contact whose true normal has not changed for ``hold`` seconds."""
    t = log.column('t')
    normal = np.column_stack([log.column('nz_true_%s_%s' % (contact, a)) for a in AXES])
    window = int(round(hold / (t[1] - t[0])))
    settled = np.zeros(len(t), dtype=bool)
    for k in range(window, len(t)):
        settled[k] = np.max(np.abs(normal[k - window:k + 1] - normal[k])) < 1e-6
    moving = log.column('qd_0') > 0.05
    loaded = log.column('fC_true_%s_z' % contact) > 10.0
    return settled & moving & loaded


def leg_difference(log):
    return log.column('leg_ext_front') - log.column('leg_ext_rear')


def both_wheels_on(log, terrain, predicate):
    return predicate(terrain.slope(log.column('ground_front_wheel_x'))) \
        & predicate(terrain.slope(log.column('ground_rear_wheel_x')))


class ScenarioTests(SimpleTestCase):

    def test_terrain_normal_tracking(self):
        _, log = scenario_run('terrain1')
        for contact in ('front_wheel', 'rear_wheel'):
            mask = steady_contact(log, contact)
            self.assertGreater(mask.sum(), 500, contact)
            true = np.column_stack([log.column('nz_true_%s_%s' % (contact, a)) for a in AXES])[mask]
            est = np.column_stack([log.column('nz_est_%s_%s' % (contact, a)) for a in AXES])[mask]
            angles = np.arccos(np.clip(np.sum(true * est, axis=1), -1.0, 1.0))
            self.assertLess(np.sqrt(np.mean(angles ** 2)), 0.02, contact)
            assert_allclose(np.linalg.norm(est, axis=1), 1.0, atol=1e-9)

    def test_legs_follow_the_slope(self):
        terrain, log = scenario_run('terrain1')
        diff = leg_difference(log)
        flat = both_wheels_on(log, terrain, lambda s: np.abs(s) < 1e-9) & (log.column('ground_front_wheel_x') < 1.0)
        uphill = both_wheels_on(log, terrain, lambda s: s > 0.1)
        downhill = both_wheels_on(log, terrain, lambda s: s < -0.1)
        for mask in (flat, uphill, downhill):
            self.assertGreater(mask.sum(), 50)
        lead_in = np.mean(diff[flat])
        self.assertLess(np.mean(diff[uphill]), lead_in - 0.03)
        self.assertGreater(np.mean(diff[downhill]), lead_in + 0.03)
        self.assertLess(summarize(log)['height_deviation'], 0.02)

    def test_legs_alternate_over_the_wave(self):
        terrain, log = scenario_run('terrain2')
        diff = leg_difference(log)
        rising = both_wheels_on(log, terrain, lambda s: s > 0.1)
        falling = both_wheels_on(log, terrain, lambda s: s < -0.1)
        self.assertGreater(rising.sum(), 20)
        self.assertGreater(falling.sum(), 20)
        self.assertLess(np.mean(diff[rising]), np.mean(diff[falling]))

    def test_switched_damping_keeps_the_load_calmer(self):
        _, log = scenario_run('terrain2')
        _, fixed = scenario_run('ablation-fixed-damping')
        switched, constant = summarize(log), summarize(fixed)
        self.assertLess(switched['peak_load_acc'], 4.9)
        self.assertFalse(switched['load_slides'])
        self.assertLess(switched['object_force_fluctuation'], constant['object_force_fluctuation'])
        assert_array_equal(fixed.column('D_L_z'), np.full(len(fixed), 100.0))

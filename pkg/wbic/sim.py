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

"""Closed-loop co-simulation and the scripted scenarios."""

import logging
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np

from . import dynamics
from .controller import ControllerConfig, ControlStack, MotionCommand
from .exceptions import InfeasibleProblem, InvalidParameter, SolverNotConverged
from .plant import Plant, PlantConfig
from .runlog import AXES, RunLog, columns, leg_label
from .signals import run_finished, tick_completed
from .terrain import TerrainProfile

logger = logging.getLogger('wbic')

MAX_SPEED = 0.8
PLATE_FRICTION = 0.5
SETTLE_TIME = 1.0


@dataclass(frozen=True)
class VelocityProfile:
    """Trapezoidal forward speed covering ``distance``, after ``start`` s of standing."""
    distance: float
    cruise: float = 0.5
    accel: float = 0.2
    start: float = 0.5
    hold: float = 0.5

    def __post_init__(self):
        if self.distance < 0 or not self.cruise > 0 or not self.accel > 0:
            raise InvalidParameter('velocity profile needs distance >= 0 and positive cruise and accel')
        if self.cruise > MAX_SPEED:
            raise InvalidParameter('cruise speed %.2f m/s exceeds %.1f m/s' % (self.cruise, MAX_SPEED))

    @property
    def peak(self):
        return min(self.cruise, np.sqrt(self.distance * self.accel))

    @property
    def ramp_time(self):
        return self.peak / self.accel

    @property
    def cruise_time(self):
        if self.peak == 0:
            return 0.0
        return (self.distance - self.peak ** 2 / self.accel) / self.peak

    @property
    def duration(self):
        return self.start + 2 * self.ramp_time + self.cruise_time + self.hold

    def at(self, t) -> MotionCommand:
        a, v_max = self.accel, self.peak
        t1, tc = self.ramp_time, self.cruise_time
        s = t - self.start
        if s <= 0:
            return MotionCommand(0.0, 0.0, 0.0)
        if s < t1:
            return MotionCommand(0.5 * a * s * s, a * s, a)
        x1 = 0.5 * a * t1 * t1
        if s < t1 + tc:
            return MotionCommand(x1 + v_max * (s - t1), v_max, 0.0)
        r = s - t1 - tc
        if r < t1:
            return MotionCommand(x1 + v_max * tc + v_max * r - 0.5 * a * r * r, v_max - a * r, -a)
        return MotionCommand(self.distance, 0.0, 0.0)


@dataclass(frozen=True)
class Scenario:
    name: str
    terrain: str
    terrain_params: Dict = field(default_factory=dict)
    distance: float = 2.0
    mu: float = 0.1
    damping_mode: str = 'bang-bang'


SCENARIOS = {
    'terrain1': Scenario('terrain1', 'composite', {'preset': 'terrain1'}, distance=4.8, mu=0.6),
    'terrain2': Scenario('terrain2', 'composite', {'preset': 'terrain2', 'periods': 1}, distance=4.4, mu=0.6),
    'flat-carry': Scenario('flat-carry', 'flat', {}, distance=2.0, mu=0.1),
    'ablation-fixed-damping': Scenario('ablation-fixed-damping', 'composite',
                                       {'preset': 'terrain2', 'periods': 1}, distance=4.4, mu=0.6,
                                       damping_mode='fixed'),
}


class ClosedLoop:
    """Plant and control stack stepped together at the inner-loop rate."""

    def __init__(self, tree, terrain: TerrainProfile, plant_config: PlantConfig = PlantConfig(),
                 controller_config: ControllerConfig = ControllerConfig(),
                 profile: Optional[VelocityProfile] = None, scenario='custom'):
        if not np.isclose(plant_config.dt, controller_config.dt):
            raise InvalidParameter('plant and controller must share dt')
        self.tree = tree
        self.terrain = terrain
        self.plant = Plant(tree, terrain, plant_config)
        self.stack = ControlStack(tree, controller_config)
        self.profile = profile or VelocityProfile(0.0)
        self.scenario = scenario
        self.dt = plant_config.dt
        self.legs = [j.name for j in tree.actuated if j.type == 'prismatic']
        self.columns = columns(tree.nq, tree.nv, tree.n, self.stack.contacts, self.legs,
                               self.stack.friction.size)

    def run(self, duration=None, x0=0.0) -> RunLog:
        tree, plant, stack = self.tree, self.plant, self.stack
        duration = self.profile.duration if duration is None else duration
        steps = int(round(duration / self.dt))
        state = plant.initial_state(x=x0, leg_extension=0.15)
        log = RunLog(self.columns, self.scenario, {'duration': duration})
        tau = np.zeros(tree.n)
        centroid0 = None
        energy, rho_prev = 0.0, None
        logger.info('running %s for %.2f s (%d ticks)', self.scenario, duration, steps)
        for k in range(steps + 1):
            reading = plant.sense(state, tau)
            if centroid0 is None:
                centroid0 = self._centroid_x(state)
            ref = self.profile.at(k * self.dt)
            motion = MotionCommand(centroid0 + ref.x, ref.v, ref.a)
            try:
                out = stack.step(reading, motion)
            except (InfeasibleProblem, SolverNotConverged) as e:
                e.tick = k
                logger.error('%s aborted at tick %d (t=%.3f): %s', self.scenario, k, k * self.dt, e)
                raise
            rho = out.rho1 + out.rho2
            if rho_prev is not None:
                energy += 0.5 * (rho + rho_prev) * self.dt
            rho_prev = rho
            next_state, report = plant.step(state, out.tau, out.damping)
            record = self._record(state, out, report, energy)
            log.append(record)
            tick_completed.send_robust(sender=self.__class__, tick=k, record=record)
            state, tau = next_state, out.tau
        self.final_state = state
        run_finished.send_robust(sender=self.__class__, scenario=self.scenario, log=log)
        return log

    def _centroid_x(self, state):
        kin = dynamics.Kinematics(self.tree, state.robot)
        centres = [dynamics.frame_pose(self.tree, state.robot, n, kin)[0] for n in self.stack.contacts]
        return float(np.mean([c[0] for c in centres]))

    def _record(self, state, out, report, energy):
        robot = state.robot
        rec = {'t': robot.t}
        rec.update({'q_%d' % i: v for i, v in enumerate(robot.q)})
        rec.update({'qd_%d' % i: v for i, v in enumerate(robot.qd)})
        rec.update({'tau_%d' % i: v for i, v in enumerate(out.tau)})
        for name, ext in self.plant.leg_extensions(state).items():
            rec['leg_ext_%s' % leg_label(name)] = ext
        rec.update(height=out.height, height_ref=out.height_ref, support_dz=out.support)
        for contact in self.stack.contacts:
            rec['ground_%s_x' % contact], rec['ground_%s_z' % contact] = report.ground[contact]
            for i, a in enumerate(AXES):
                rec['fC_true_%s_%s' % (contact, a)] = report.forces[contact][i]
                rec['fC_est_%s_%s' % (contact, a)] = out.forces[contact][i]
                rec['nz_true_%s_%s' % (contact, a)] = report.normals[contact][i]
                rec['nz_est_%s_%s' % (contact, a)] = out.frames[contact].n_z[i]
        for s, side in enumerate(('L', 'R')):
            for i, a in enumerate(AXES):
                rec['f_obj_%s_%s' % (side, a)] = report.object_forces[s][i]
                rec['D_%s_%s' % (side, a)] = out.damping[s][i]
            rec['load_acc_%s' % side] = float(np.linalg.norm(report.load_acc[s]))
        rec.update({'F_f_%d' % i: v for i, v in enumerate(out.friction)})
        result = out.solution.result
        rec.update(rho1=out.rho1, rho2=out.rho2, E=energy, solver_iters=result.iterations,
                   solver_residual=result.equality_residual)
        return rec


def summarize(log: RunLog, seed=None, settle=SETTLE_TIME) -> Dict:
    """Headline numbers of one run."""
    t = log.column('t')
    steady = t >= settle
    fluctuation = 0.0
    for side in ('L', 'R'):
        fz = log.column('f_obj_%s_z' % side)[steady]
        if fz.size:
            fluctuation = max(fluctuation, float(np.max(fz) - np.min(fz)))
    acc = max(float(np.max(log.column('load_acc_%s' % s)[steady], initial=0.0)) for s in ('L', 'R'))
    height = log.column('height')[steady] - log.column('height_ref')[steady]
    return {
        'scenario': log.scenario,
        'seed': seed,
        'E': float(log.column('E')[-1]) if len(log) else 0.0,
        'object_force_fluctuation': fluctuation,
        'peak_load_acc': acc,
        'load_slides': acc >= PLATE_FRICTION * 9.81,
        'height_deviation': float(np.max(np.abs(height), initial=0.0)),
    }


def run_experiment(conf, duration=None) -> RunLog:
    """Build plant, controller and terrain from an ``ExperimentConfig`` and run it."""
    scenario = conf.scenario
    loop = ClosedLoop(conf.tree(), conf.terrain(), conf.plant_config(), conf.controller_config(),
                      conf.profile(), scenario.name)
    duration = duration if duration is not None else conf.get('experiment', 'duration')
    return loop.run(duration)

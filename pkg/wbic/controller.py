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

"""The robot-side control stack.

Everything here works from ``SensorReading`` values only. The outer ICC loop
publishes damping commands through ``IccCommandCache``; the inner loop reads the
latest one every tick, estimates contact forces and terrain frames, shapes the
height reference by impedance, compensates wheel friction and solves the WBC.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np

from . import dynamics
from .cache import IccCommand, IccCommandCache
from .estimation import (MomentumObserver, TerrainEstimator, TerrainFrame, estimate_contact_force, update_cones,
                         wheel_force_jacobian)
from .exceptions import InvalidParameter
from .friction_comp import FrictionCompensator, to_joint_torques
from .icc import (BangBangDamping, ConstantDamping, IccParams, IccState, coupling_force, locomotion_power,
                  stability_power)
from .impedance import ImpedanceFilter, ImpedanceParams, ImpedanceReference, map_external_wrench, selector_blocks
from .wbc import TaskSpec, WbcSolution, WbcWeights, WholeBodyController, flat_cones, wheel_centre

logger = logging.getLogger('wbic')

DAMPING_MODES = ('bang-bang', 'fixed')


@dataclass(frozen=True)
class ControllerConfig:
    dt: float = 2e-3
    icc_dt: float = 1e-2
    nominal_height: float = 0.6
    height_gains: Tuple[float, float] = (1000.0, 20.0)
    centroid_gains: Tuple[float, float] = (800.0, 10.0)
    rotation_gains: Tuple[float, float] = (300.0, 15.0)
    height_acc_limit: Optional[float] = 6.0
    centroid_acc_limit: Optional[float] = None
    rotation_acc_limit: Optional[float] = 10.0
    mu: float = 0.1
    facets: int = 4
    terrain_estimation: bool = True
    K_O: float = 50.0
    friction_enabled: bool = True
    friction_k_P: float = 100.0
    friction_k_lambda: float = 10.0
    friction_F_max: float = 30.0
    impedance_enabled: bool = True
    impedance: ImpedanceParams = field(default_factory=lambda: ImpedanceParams([80.0], [600.0], [1e5]))
    impedance_clamp: Optional[float] = 0.2
    damping_mode: str = 'bang-bang'
    fixed_damping: float = 100.0
    weights: WbcWeights = WbcWeights()
    icc: IccParams = field(default_factory=IccParams)
    hands: Tuple[str, str] = ('left_hand', 'right_hand')

    def __post_init__(self):
        if not (self.dt > 0 and self.icc_dt > 0):
            raise InvalidParameter('controller periods must be positive')
        ratio = self.icc_dt / self.dt
        if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
            raise InvalidParameter('icc_dt must be a whole multiple of dt')
        if self.damping_mode not in DAMPING_MODES:
            raise InvalidParameter('unknown damping mode "%s"' % self.damping_mode)
        if not self.mu > 0:
            raise InvalidParameter('cone friction coefficient must be positive')
        for limit in (self.height_acc_limit, self.centroid_acc_limit, self.rotation_acc_limit):
            if limit is not None and not limit > 0:
                raise InvalidParameter('task acceleration limits must be positive')

    @property
    def icc_every(self):
        return int(round(self.icc_dt / self.dt))

    @property
    def centroid_limit(self):
        """``centroid_acc_limit``, or half the forward acceleration the cone carries on flat ground."""
        if self.centroid_acc_limit is not None:
            return self.centroid_acc_limit
        return 0.5 * self.mu * self.icc.g


@dataclass(frozen=True, eq=False)
class MotionCommand:
    """Wheel-centroid forward reference for one tick."""
    x: float
    v: float
    a: float = 0.0


@dataclass(frozen=True, eq=False)
class ControlOutput:
    tick: int
    tau: np.ndarray
    damping: np.ndarray
    solution: WbcSolution
    command: IccCommand
    forces: Dict[str, np.ndarray]
    frames: Dict[str, TerrainFrame]
    height: float
    height_ref: float
    support: float
    friction: np.ndarray
    rho1: float
    rho2: float


class OuterLoop:
    """ICC damping scheduler, run every ``icc_every`` inner ticks."""

    def __init__(self, config: ControllerConfig, cache: IccCommandCache):
        self.config = config
        self.params = config.icc
        self.cache = cache
        if config.damping_mode == 'fixed':
            self.scheduler = ConstantDamping(config.fixed_damping)
        else:
            self.scheduler = BangBangDamping(self.params)
        self.sag = np.array([-self.params.m_L * self.params.g / self.params.K_L[2],
                             -self.params.m_R * self.params.g / self.params.K_R[2]])
        self.rho = (0.0, 0.0)
        self.cache.publish(IccCommand(-1, 0.0, self.params.midpoint('L'), self.params.midpoint('R'), np.zeros(3)))

    def relative_state(self, deflection, rate, s_b, sd_b, D_L, D_R):
        """ICC state from arm deflections measured from their static sag."""
        x = np.zeros(18)
        x[2], x[5] = s_b, sd_b
        for i, offset in enumerate((6, 12)):
            s = np.array(deflection[i], dtype=float)
            s[2] -= self.sag[i]
            x[offset:offset + 3] = s
            x[offset + 3:offset + 6] = rate[i]
        return IccState(x, D_L, D_R)

    def step(self, tick, t, deflection, rate, s_b, sd_b, Ld):
        p = self.params
        D_L, D_R = self.scheduler.update(t, rate[0], rate[1], Ld)
        state = self.relative_state(deflection, rate, s_b, sd_b, D_L, D_R)
        self.rho = (locomotion_power(p, state, Ld), stability_power(p, state))
        F_cpl = coupling_force(p, deflection[0], deflection[1], rate[0], rate[1], D_L, D_R)
        command = IccCommand(tick, t, D_L, D_R, F_cpl)
        self.cache.publish(command)
        return command


class ControlStack:
    """Inner 500 Hz loop plus the outer ICC loop it drives."""

    def __init__(self, tree, config: ControllerConfig = ControllerConfig(), cache: Optional[IccCommandCache] = None):
        self.tree = tree
        self.config = config
        self.cache = cache or IccCommandCache()
        self.contacts = tuple(tree.contacts)
        for name in config.hands:
            tree.frame(name)
        self.base = tree.joints[0].child
        self.wbc = WholeBodyController(tree, config.weights, config.dt, self.contacts)
        self.observer = MomentumObserver(tree, config.K_O, config.dt)
        self.terrain = TerrainEstimator(self.contacts)
        self.outer = OuterLoop(config, self.cache)
        self.wheel_joints = self._wheel_joints()
        self.friction = FrictionCompensator(len(self.wheel_joints), config.friction_k_P,
                                            config.friction_k_lambda, config.friction_F_max)
        self.impedance = ImpedanceFilter(config.impedance, config.dt, config.impedance_clamp)
        self.selectors = selector_blocks(config.hands)
        self.cones = flat_cones(self.contacts, config.mu, config.facets)
        self.tick = 0
        self.support0 = None

    def _wheel_joints(self):
        out = []
        for name in self.contacts:
            body = self.tree.frame(name).body
            for row, joint in enumerate(self.tree.actuated):
                if joint.child == body and joint.type == 'revolute':
                    out.append((row, self.tree.frame(name).radius))
        return out

    def reset(self):
        self.wbc.reset()
        self.observer.reset()
        self.friction.reset()
        self.cache.clear()
        self.terrain = TerrainEstimator(self.contacts)
        self.outer = OuterLoop(self.config, self.cache)
        self.impedance = ImpedanceFilter(self.config.impedance, self.config.dt, self.config.impedance_clamp)
        self.cones = flat_cones(self.contacts, self.config.mu, self.config.facets)
        self.tick = 0
        self.support0 = None

    # ############################################
    # Estimation
    # ############################################

    def _arm_torque(self, kin, reading, D_L, D_R):
        """Generalized torque of the forces the arm impedances put on the hands."""
        p = self.config.icc
        tau_known = np.zeros(self.tree.nv)
        for name, K, D, s, sd in zip(self.config.hands, (p.K_L, p.K_R), (D_L, D_R),
                                     reading.arm_deflection, reading.arm_rate):
            force = K * np.asarray(s, dtype=float) + D * np.asarray(sd, dtype=float)
            if self.tree.planar:
                force[1] = 0.0
            _, J, _ = kin.point(self.tree.frame(name))
            tau_known += J.T @ force
        return tau_known

    def load_force(self, state, command: IccCommand):
        """Vertical part of the published coupling force at the base, less the static load weight."""
        cfg = self.config
        shared = np.tile(command.F_cpl / len(cfg.hands), len(cfg.hands))
        wrench = map_external_wrench(self.tree, state, shared, self.selectors, 'base')
        static = -(cfg.icc.m_L + cfg.icc.m_R) * cfg.icc.g
        return float(wrench[self.tree.linear_rows.index(2)] - static)

    def _contact_forces(self, kin, residual):
        rows = self.tree.linear_rows
        normals = {name: self.terrain.frames[name].n_z for name in self.contacts}
        J_e = wheel_force_jacobian(self.tree, kin.state, self.contacts, normals, kin, rows)
        estimate = estimate_contact_force(residual, J_e)
        forces = {}
        for i, name in enumerate(self.contacts):
            f = np.zeros(3)
            f[rows] = estimate.slice(i, len(rows))
            forces[name] = f
        return forces

    def _support(self, kin, state):
        """Mean wheel-centre position and velocity."""
        pos, vel = np.zeros(3), np.zeros(3)
        centres, velocities = {}, {}
        for name in self.contacts:
            p, J, _ = kin.point(wheel_centre(self.tree.frame(name)))
            centres[name], velocities[name] = p, J @ state.qd
            pos += p / len(self.contacts)
            vel += velocities[name] / len(self.contacts)
        return pos, vel, centres, velocities

    # ############################################
    # Tick
    # ############################################

    def tasks(self, motion: MotionCommand, height_ref):
        cfg = self.config
        return [
            TaskSpec('height', 'height', self.base, axes=(2,), kp=cfg.height_gains[0], kd=cfg.height_gains[1],
                     limit=cfg.height_acc_limit)
            .with_reference([height_ref.x[0]], [height_ref.xd[0]], [height_ref.xdd[0]]),
            TaskSpec('pitch', 'orientation', self.base, axes=(1,), kp=cfg.rotation_gains[0],
                     kd=cfg.rotation_gains[1], limit=cfg.rotation_acc_limit).with_reference([0.0]),
            TaskSpec('centroid', 'wheel_centroid', axes=(0,), kp=cfg.centroid_gains[0], kd=cfg.centroid_gains[1],
                     limit=cfg.centroid_limit)
            .with_reference([motion.x], [motion.v], [motion.a]),
        ]

    def step(self, reading, motion: MotionCommand) -> ControlOutput:
        tree, cfg = self.tree, self.config
        state = reading.state()
        terms = dynamics.compute_dynamics(tree, state)
        kin = dynamics.Kinematics(tree, state)

        command = self.cache.latest()
        tau_known = self._arm_torque(kin, reading, command.D_L, command.D_R)
        residual = self.observer.step(state, reading.tau, terms)
        forces = self._contact_forces(kin, residual - tau_known)

        support, support_vel, centres, velocities = self._support(kin, state)
        if self.support0 is None:
            self.support0 = support.copy()
        self.terrain.record(reading.t, centres)
        outer_tick = self.tick % cfg.icc_every == 0
        if cfg.terrain_estimation and outer_tick:
            frames = self.terrain.update(reading.t, velocities, forces)
            self.cones = update_cones(frames, cfg.mu, cfg.facets, self.cones)
        frames = dict(self.terrain.frames)

        base_pos, J_base, _ = kin.point(tree.frame(self.base))
        contact_z = np.mean([kin.point(tree.frame(n), frames[n].n_z)[0][2] for n in self.contacts])
        height = base_pos[2] - contact_z
        height_rate = (J_base @ state.qd)[2] - support_vel[2]

        if outer_tick:
            Ld = np.array([0.0, 0.0, support_vel[2]])
            command = self.outer.step(self.tick, reading.t, reading.arm_deflection, reading.arm_rate,
                                      height - cfg.nominal_height, height_rate, Ld)

        raw = (np.array([cfg.nominal_height]), np.zeros(1), np.zeros(1))
        if cfg.impedance_enabled:
            height_ref = self.impedance.step(raw, [self.load_force(state, command)])
        else:
            height_ref = ImpedanceReference(*raw, *raw)
        tasks = self.tasks(motion, height_ref)

        tau_f = np.zeros(tree.n)
        if cfg.friction_enabled and self.wheel_joints:
            tau_f = self._friction_torques(kin, state, motion)

        solution = self.wbc.step(state, tasks, self.cones, tau_f=tau_f, tau_known=tau_known, terms=terms)
        damping = np.vstack([command.D_L, command.D_R])
        out = ControlOutput(self.tick, solution.tau.copy(), damping, solution, command, forces, frames,
                            float(height), float(height_ref.x[0]), float(support[2] - self.support0[2]),
                            self.friction.F_f.copy(), *self.outer.rho)
        self.tick += 1
        return out

    def _friction_torques(self, kin, state, motion: MotionCommand):
        """Wheel-joint friction estimate driven by the centroid tracking error."""
        cfg = self.config
        centroid, J_c, _ = _centroid(self.tree, kin, self.contacts)
        e = motion.x - centroid[0]
        ed = motion.v - (J_c @ state.qd)[0]
        u = motion.a + cfg.centroid_gains[0] * e + cfg.centroid_gains[1] * ed
        rows = [row for row, _ in self.wheel_joints]
        radius = np.array([r for _, r in self.wheel_joints])
        wheel_rates = state.qd[[self.tree.joint_v_index[self.tree.actuated[r].name] for r in rows]]
        self.friction.activate(wheel_rates, np.full(len(rows), u) / radius)
        self.friction.update(np.full(len(rows), e) / radius, np.full(len(rows), ed) / radius, cfg.dt)
        J = np.zeros((len(rows), self.tree.n))
        J[np.arange(len(rows)), rows] = 1.0
        return to_joint_torques(J, self.friction.sigma, self.friction.F_f)


def _centroid(tree, kin, contacts):
    blocks = [kin.point(wheel_centre(tree.frame(n))) for n in contacts]
    return (sum(b[0] for b in blocks) / len(blocks), sum(b[1] for b in blocks) / len(blocks),
            sum(b[2] for b in blocks) / len(blocks))

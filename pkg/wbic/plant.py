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

"""Plant side of the co-simulation.

Wheels touch the terrain through a unilateral spring-damper along the local
surface normal. Tyre traction, rolling resistance and leg Coulomb friction are
resolved together at velocity level by projected Gauss-Seidel, so sticking is
exact at any time step. Two point-mass loads hang from the hand points.
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Dict, Optional, Tuple

import numpy as np
from scipy import linalg

from . import dynamics
from .dynamics import GeneralizedState
from .exceptions import InvalidParameter, SimulationFault
from .terrain import TerrainProfile
from .utils import as_vector
from .wbc import wheel_centre

logger = logging.getLogger('wbic')

INTEGRATORS = ('semi-implicit', 'rk4')
UP = np.array([0.0, 0.0, 1.0])


@dataclass(frozen=True)
class PlantConfig:
    dt: float = 2e-3
    integrator: str = 'semi-implicit'
    contact_stiffness: float = 1e5
    contact_damping: float = 1e3
    traction: float = 0.8
    rolling: Optional[float] = None
    leg_coulomb: float = 5.0
    leg_viscous: float = 1.0
    max_penetration: float = 0.05
    q_noise: float = 1e-5
    qd_noise: float = 1e-4
    seed: int = 0
    load_masses: Tuple[float, float] = (0.9, 0.9)
    hands: Tuple[str, str] = ('left_hand', 'right_hand')
    arm_stiffness: Tuple[float, float] = (350.0, 350.0)
    pgs_iterations: int = 40

    def __post_init__(self):
        if not self.dt > 0:
            raise InvalidParameter('plant dt must be positive')
        if self.integrator not in INTEGRATORS:
            raise InvalidParameter('unknown integrator "%s"' % self.integrator)
        if self.rolling is not None and not 0.0 <= self.rolling <= 1.0:
            raise InvalidParameter('rolling coefficient must lie in [0, 1]')
        if min(self.load_masses) <= 0 or min(self.arm_stiffness) <= 0:
            raise InvalidParameter('load masses and arm stiffness must be positive')


@dataclass(frozen=True, eq=False)
class PlantState:
    robot: GeneralizedState
    load_pos: np.ndarray
    load_vel: np.ndarray

    @property
    def t(self):
        return self.robot.t


@dataclass(frozen=True, eq=False)
class ContactReport:
    """Ground truth of one step; never handed to the controller."""
    forces: Dict[str, np.ndarray]
    normals: Dict[str, np.ndarray]
    penetration: Dict[str, float]
    object_forces: np.ndarray
    load_acc: np.ndarray
    friction: Dict[str, float] = field(default_factory=dict)
    ground: Dict[str, np.ndarray] = field(default_factory=dict)


@dataclass(frozen=True, eq=False)
class SensorReading:
    """What the controller gets to see."""
    t: float
    q: np.ndarray
    qd: np.ndarray
    tau: np.ndarray
    arm_deflection: np.ndarray
    arm_rate: np.ndarray

    def state(self):
        return GeneralizedState(self.q, self.qd, self.t)


class Plant:

    def __init__(self, tree, terrain: TerrainProfile, config: PlantConfig = PlantConfig()):
        self.tree = tree
        self.terrain = terrain
        self.config = config
        self.rng = np.random.default_rng(config.seed)
        for name in config.hands:
            tree.frame(name)
        self.contacts = tuple(tree.contacts)
        self._leg_dofs = [tree.joint_v_index[j.name] for j in tree.actuated if j.type == 'prismatic']
        self._wheel_dofs = {name: self._wheel_dof(name) for name in self.contacts}

    def _wheel_dof(self, contact):
        body = self.tree.frame(contact).body
        for joint in self.tree.actuated:
            if joint.child == body and joint.type == 'revolute':
                return self.tree.joint_v_index[joint.name]
        return None

    # ############################################
    # Initial state
    # ############################################

    def initial_state(self, x=0.0, leg_extension=0.15, pitch=0.0):
        """Standing pose with the wheels pressed to their static load on the terrain below."""
        tree = self.tree
        if not tree.planar:
            raise InvalidParameter('initial_state builds planar poses only')
        q = tree.neutral_configuration()
        q[0], q[2] = x, pitch
        for joint in tree.actuated:
            if joint.type == 'prismatic':
                q[tree.links[tree.body_link[joint.child]].q_index] = leg_extension
        state = GeneralizedState(q, np.zeros(tree.nv))
        kin = dynamics.Kinematics(tree, state)
        gaps = []
        for name in self.contacts:
            frame = tree.frame(name)
            centre, _, _ = kin.point(wheel_centre(frame))
            gaps.append(centre[2] - frame.radius - self.terrain.height(centre[0]))
        weight = (tree.total_mass + sum(self.config.load_masses)) * tree.gravity
        sink = weight / (len(self.contacts) * self.config.contact_stiffness)
        q[1] -= min(gaps) + sink
        robot = GeneralizedState(q, np.zeros(tree.nv))
        hands = self._hand_points(dynamics.Kinematics(tree, robot))
        sag = np.array([[0.0, 0.0, -m * tree.gravity / k]
                        for m, k in zip(self.config.load_masses, self.config.arm_stiffness)])
        return PlantState(robot, hands[0] + sag, np.zeros((2, 3)))

    # ############################################
    # Forces
    # ############################################

    def _hand_points(self, kin):
        pos, vel, jac = [], [], []
        for name in self.config.hands:
            p, J, _ = kin.point(self.tree.frame(name))
            pos.append(p)
            vel.append(J @ kin.state.qd)
            jac.append(J)
        return np.array(pos), np.array(vel), jac

    def _normal_contacts(self, kin):
        tree, terrain, cfg = self.tree, self.terrain, self.config
        out = {}
        for name in self.contacts:
            frame = tree.frame(name)
            centre, Jc, _ = kin.point(wheel_centre(frame))
            x = centre[0]
            n = terrain.normal(x)
            distance = (centre[2] - float(terrain.height(x))) * n[2] - frame.radius
            depth = -distance
            if depth > cfg.max_penetration:
                raise SimulationFault('wheel "%s" is %.3f m inside the terrain at t=%.3f'
                                      % (name, depth, kin.state.t))
            _, J, _ = kin.point(frame, n)
            if depth <= 0:
                out[name] = (0.0, n, J, depth, x)
                continue
            v_n = n @ (Jc @ kin.state.qd)
            f_n = max(0.0, cfg.contact_stiffness * depth - cfg.contact_damping * v_n)
            out[name] = (f_n, n, J, depth, x)
        return out

    def _load_forces(self, kin, load_pos, load_vel, damping):
        """Spring-damper force on each load, with hand-point Jacobians."""
        hand_pos, hand_vel, jac = self._hand_points(kin)
        forces = np.zeros((2, 3))
        for i in range(2):
            k = self.config.arm_stiffness[i]
            forces[i] = -k * (load_pos[i] - hand_pos[i]) - damping[i] * (load_vel[i] - hand_vel[i])
        if self.tree.planar:
            forces[:, 1] = 0.0
        return forces, jac

    def _smooth(self, state: PlantState, tau, damping):
        """Accelerations without the friction impulses."""
        tree, cfg = self.tree, self.config
        robot = state.robot
        terms = dynamics.compute_dynamics(tree, robot)
        kin = dynamics.Kinematics(tree, robot)
        contacts = self._normal_contacts(kin)
        load_forces, hand_jac = self._load_forces(kin, state.load_pos, state.load_vel, damping)
        Q = tree.S.T @ tau - terms.C
        for f_n, n, J, _, _ in contacts.values():
            Q += J.T @ (f_n * n)
        for i in range(2):
            Q -= hand_jac[i].T @ load_forces[i]
        for dof in self._leg_dofs:
            Q[dof] -= cfg.leg_viscous * robot.qd[dof]
        try:
            qdd = linalg.cho_solve(linalg.cho_factor(terms.B), Q)
        except linalg.LinAlgError as e:
            raise SimulationFault('inertia matrix lost positive definiteness: %s' % e)
        load_acc = load_forces / np.array(cfg.load_masses)[:, None] - tree.gravity * UP
        if tree.planar:
            load_acc[:, 1] = 0.0
        return qdd, load_acc, terms, contacts, load_forces

    def _friction(self, terms, contacts, v):
        """Projected Gauss-Seidel on traction, rolling resistance and leg friction."""
        tree, cfg, dt = self.tree, self.config, self.config.dt
        rows, bounds, labels = [], [], []
        for name, (f_n, n, J, _, x) in contacts.items():
            if f_n <= 0:
                continue
            tangent = np.cross(UP if abs(n[2]) < 0.999 else [0.0, 1.0, 0.0], n) if not tree.planar \
                else np.array([n[2], 0.0, -n[0]])
            tangents = [tangent / np.linalg.norm(tangent)]
            if not tree.planar:
                tangents.append(np.cross(n, tangents[0]))
            for t in tangents:
                rows.append(t @ J)
                bounds.append(cfg.traction * f_n * dt)
                labels.append(('traction', name, t))
            dof = self._wheel_dofs[name]
            if dof is not None:
                mu = cfg.rolling if cfg.rolling is not None else self.terrain.rolling_coefficient(x)
                row = np.zeros(tree.nv)
                row[dof] = 1.0
                rows.append(row)
                bounds.append(mu * f_n * tree.frame(name).radius * dt)
                labels.append(('rolling', name, None))
        for dof in self._leg_dofs:
            row = np.zeros(tree.nv)
            row[dof] = 1.0
            rows.append(row)
            bounds.append(cfg.leg_coulomb * dt)
            labels.append(('leg', dof, None))
        impulses = np.zeros(len(rows))
        if not rows:
            return v, impulses, labels
        factor = linalg.cho_factor(terms.B)
        rows = np.array(rows)
        response = linalg.cho_solve(factor, rows.T)
        mass = 1.0 / np.einsum('ij,ji->i', rows, response)
        v = v.copy()
        for _ in range(cfg.pgs_iterations):
            change = 0.0
            for i in range(rows.shape[0]):
                old = impulses[i]
                new = np.clip(old - mass[i] * (rows[i] @ v), -bounds[i], bounds[i])
                if new != old:
                    v += response[:, i] * (new - old)
                    impulses[i] = new
                    change = max(change, abs(new - old))
            if change < 1e-12:
                break
        return v, impulses, labels

    # ############################################
    # Stepping
    # ############################################

    def step(self, state: PlantState, tau, damping=None) -> Tuple[PlantState, ContactReport]:
        """Advance one period under joint torques ``tau`` and arm damping (2 x 3)."""
        tree, cfg, dt = self.tree, self.config, self.config.dt
        tau = as_vector(tau, tree.n, 'tau')
        damping = np.zeros((2, 3)) if damping is None else np.asarray(damping, dtype=float).reshape(2, 3)
        robot = state.robot
        qdd, load_acc, terms, contacts, load_forces = self._smooth(state, tau, damping)
        if cfg.integrator == 'semi-implicit':
            v_free = robot.qd + dt * qdd
            v, impulses, labels = self._friction(terms, contacts, v_free)
            q = dynamics.integrate_configuration(tree, robot.q, v, dt)
            load_vel = state.load_vel + dt * load_acc
            load_pos = state.load_pos + dt * load_vel
        else:
            q, v_free, load_pos, load_vel = self._rk4(state, tau, damping, qdd, load_acc)
            v, impulses, labels = self._friction(terms, contacts, v_free)
        next_state = PlantState(GeneralizedState(q, v, robot.t + dt), load_pos, load_vel)

        forces, normals, depth, friction, ground = {}, {}, {}, {}, {}
        for name, (f_n, n, _, d, x) in contacts.items():
            forces[name] = f_n * n
            normals[name] = n
            depth[name] = d
            ground[name] = np.array([x, float(self.terrain.height(x))])
        for impulse, (kind, key, direction) in zip(impulses, labels):
            if kind == 'traction':
                forces[key] = forces[key] + impulse / dt * direction
            label = '%s:%s' % (kind, key)
            friction[label] = friction.get(label, 0.0) + impulse / dt
        report = ContactReport(forces, normals, depth, -load_forces, load_acc, friction, ground)
        return next_state, report

    def _rk4(self, state, tau, damping, qdd1, acc1):
        tree, dt = self.tree, self.config.dt
        robot = state.robot

        def stage(scale, v_rate, q_rate, acc, vel):
            q = dynamics.integrate_configuration(tree, robot.q, q_rate, scale)
            qd = robot.qd + scale * v_rate
            s = PlantState(GeneralizedState(q, qd, robot.t + scale), state.load_pos + scale * vel,
                           state.load_vel + scale * acc)
            out = self._smooth(s, tau, damping)
            return qd, out[0], s.load_vel, out[1]

        v1, a1, lv1, la1 = robot.qd, qdd1, state.load_vel, acc1
        v2, a2, lv2, la2 = stage(dt / 2, a1, v1, la1, lv1)
        v3, a3, lv3, la3 = stage(dt / 2, a2, v2, la2, lv2)
        v4, a4, lv4, la4 = stage(dt, a3, v3, la3, lv3)
        q = dynamics.integrate_configuration(tree, robot.q, (v1 + 2 * v2 + 2 * v3 + v4) / 6, dt)
        qd = robot.qd + dt * (a1 + 2 * a2 + 2 * a3 + a4) / 6
        load_pos = state.load_pos + dt * (lv1 + 2 * lv2 + 2 * lv3 + lv4) / 6
        load_vel = state.load_vel + dt * (la1 + 2 * la2 + 2 * la3 + la4) / 6
        return q, qd, load_pos, load_vel

    # ############################################
    # Sensors
    # ############################################

    def sense(self, state: PlantState, tau) -> SensorReading:
        tree, cfg = self.tree, self.config
        q = state.robot.q + self.rng.normal(0.0, cfg.q_noise, tree.nq) if cfg.q_noise else state.robot.q.copy()
        qd = state.robot.qd + self.rng.normal(0.0, cfg.qd_noise, tree.nv) if cfg.qd_noise else state.robot.qd.copy()
        for link in tree.links:
            if link.kind == 'free':
                quat = q[link.q_index + 3:link.q_index + 7]
                q[link.q_index + 3:link.q_index + 7] = quat / np.linalg.norm(quat)
        kin = dynamics.Kinematics(tree, state.robot)
        hand_pos, hand_vel, _ = self._hand_points(kin)
        return SensorReading(state.t, q, qd, np.asarray(tau, dtype=float).copy(),
                             state.load_pos - hand_pos, state.load_vel - hand_vel)

    def base_height(self, state: PlantState):
        """Base origin height above the terrain directly below it."""
        p, _ = dynamics.base_pose(self.tree, state.robot)
        return float(p[2] - self.terrain.height(p[0]))

    def leg_extensions(self, state: PlantState):
        tree = self.tree
        return {j.name: float(state.robot.q[tree.links[tree.body_link[j.child]].q_index])
                for j in tree.actuated if j.type == 'prismatic'}

    def energy(self, state: PlantState):
        """Robot plus load mechanical energy (gravity potential from z = 0)."""
        tree = self.tree
        robot = dynamics.kinetic_energy(tree, state.robot) + dynamics.potential_energy(tree, state.robot)
        masses = np.array(self.config.load_masses)
        loads = 0.5 * float(masses @ np.sum(state.load_vel ** 2, axis=1)) \
            + tree.gravity * float(masses @ state.load_pos[:, 2])
        return robot + loads


def with_seed(config: PlantConfig, seed):
    return replace(config, seed=seed)

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

"""Floating-base rigid-body kinematics and dynamics.

The tree is expanded into *links*, each carrying one elementary joint:
``revolute``/``prismatic`` (one dof) or ``free`` (six dof, body-frame velocity,
scalar-last quaternion). A planar base becomes two massless prismatic links
(x, z) followed by a revolute pitch link, so that every motion subspace is
constant in link coordinates.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg
from scipy.spatial.transform import Rotation

from . import spatial
from .exceptions import DimensionError, DynamicsError, ModelError, NonFiniteInput, UnknownFrame
from .utils import as_vector

logger = logging.getLogger('wbic')

JOINT_TYPES = ('revolute', 'prismatic', 'planar', 'floating')
BASE_TYPES = ('planar', 'floating')
WORLD_UP = np.array([0.0, 0.0, 1.0])


@dataclass(frozen=True, eq=False)
class Body:
    name: str
    mass: float
    com: np.ndarray
    inertia: np.ndarray


@dataclass(frozen=True, eq=False)
class Joint:
    name: str
    type: str
    parent: Optional[str]
    child: str
    origin: np.ndarray = field(default_factory=lambda: np.zeros(3))
    axis: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))
    lower: float = -np.inf
    upper: float = np.inf
    velocity_limit: float = np.inf
    effort_limit: float = np.inf


@dataclass(frozen=True, eq=False)
class Frame:
    """A named point on a body. ``radius`` > 0 marks a wheel whose contact lies ``radius`` below the centre."""
    name: str
    body: str
    offset: np.ndarray = field(default_factory=lambda: np.zeros(3))
    radius: float = 0.0


@dataclass
class _Link:
    name: str
    kind: str
    parent: int
    axis: np.ndarray
    XT: np.ndarray
    I: np.ndarray
    q_index: int
    v_index: int
    nq: int
    nv: int
    S: np.ndarray


class KinematicTree:
    """Joint topology, inertias and limits of a floating-base robot."""

    def __init__(self, bodies: Sequence[Body], joints: Sequence[Joint],
                 contacts: Sequence[Frame] = (), tasks: Sequence[Frame] = (),
                 gravity: float = 9.81, name: str = 'robot'):
        self.name = name
        self.gravity = float(gravity)
        self.bodies = {b.name: b for b in bodies}
        if len(self.bodies) != len(bodies):
            raise ModelError('duplicate body names')
        self._validate_bodies()
        self.joints = self._order_joints(joints)
        self._build_links()
        self.contacts = {f.name: f for f in contacts}
        self.tasks = {f.name: f for f in tasks}
        for frame in list(self.contacts.values()) + list(self.tasks.values()):
            if frame.body not in self.bodies:
                raise ModelError('frame "%s" is attached to unknown body "%s"' % (frame.name, frame.body))

    # ############################################
    # Construction and validation
    # ############################################

    def _validate_bodies(self):
        for body in self.bodies.values():
            if not body.mass > 0:
                raise ModelError('body "%s" must have a positive mass' % body.name)
            inertia = np.asarray(body.inertia, dtype=float)
            if inertia.shape != (3, 3) or not np.allclose(inertia, inertia.T, atol=1e-12):
                raise ModelError('body "%s" inertia must be a symmetric 3x3 matrix' % body.name)
            if np.linalg.eigvalsh(inertia).min() <= 0:
                raise ModelError('body "%s" inertia must be positive definite' % body.name)

    def _order_joints(self, joints):
        roots = [j for j in joints if j.parent is None]
        if len(roots) != 1:
            raise ModelError('the tree needs exactly one floating base joint, found %d roots' % len(roots))
        if roots[0].type not in BASE_TYPES:
            raise ModelError('root joint "%s" must be planar or floating' % roots[0].name)
        children = {}
        for joint in joints:
            if joint.type not in JOINT_TYPES:
                raise ModelError('joint "%s" has unknown type "%s"' % (joint.name, joint.type))
            if joint.parent is not None and joint.type in BASE_TYPES:
                raise ModelError('joint "%s": only the root joint may be %s' % (joint.name, joint.type))
            if joint.child not in self.bodies:
                raise ModelError('joint "%s" moves unknown body "%s"' % (joint.name, joint.child))
            if joint.parent is not None and joint.parent not in self.bodies:
                raise ModelError('joint "%s" hangs from unknown body "%s"' % (joint.name, joint.parent))
            if joint.child in children:
                raise ModelError('body "%s" is moved by more than one joint' % joint.child)
            if not joint.lower < joint.upper:
                raise ModelError('joint "%s" limits must satisfy lower < upper' % joint.name)
            children[joint.child] = joint
        ordered, placed = [], set()
        pending = list(joints)
        while pending:
            ready = [j for j in pending if j.parent is None or j.parent in placed]
            if not ready:
                raise ModelError('joint graph contains a cycle')
            for joint in ready:
                ordered.append(joint)
                placed.add(joint.child)
                pending.remove(joint)
        missing = set(self.bodies) - placed
        if missing:
            raise ModelError('bodies not connected to the tree: %s' % ', '.join(sorted(missing)))
        return ordered

    def _build_links(self):
        self.links: List[_Link] = []
        self.body_link: Dict[str, int] = {}
        self.joint_v_index: Dict[str, int] = {}
        actuated = []
        q_index = v_index = 0
        zero_inertia = np.zeros((6, 6))

        def add(name, kind, parent, axis, origin, inertia):
            nonlocal q_index, v_index
            axis = np.asarray(axis, dtype=float)
            if kind == 'free':
                nq, nv, S = 7, 6, np.eye(6)
            elif kind == 'revolute':
                nq, nv, S = 1, 1, np.concatenate([axis, np.zeros(3)]).reshape(6, 1)
            else:
                nq, nv, S = 1, 1, np.concatenate([np.zeros(3), axis]).reshape(6, 1)
            self.links.append(_Link(name, kind, parent, axis, spatial.xlt(origin), inertia,
                                    q_index, v_index, nq, nv, S))
            q_index += nq
            v_index += nv
            return len(self.links) - 1

        for joint in self.joints:
            body = self.bodies[joint.child]
            I = spatial.inertia(body.mass, np.asarray(body.com, dtype=float),
                                np.asarray(body.inertia, dtype=float))
            parent = -1 if joint.parent is None else self.body_link[joint.parent]
            if joint.type == 'planar':
                px = add(joint.name + ':x', 'prismatic', parent, [1, 0, 0], joint.origin, zero_inertia)
                pz = add(joint.name + ':z', 'prismatic', px, [0, 0, 1], np.zeros(3), zero_inertia)
                link = add(joint.name + ':pitch', 'revolute', pz, [0, 1, 0], np.zeros(3), I)
            elif joint.type == 'floating':
                link = add(joint.name, 'free', parent, [0, 0, 1], joint.origin, I)
            else:
                axis = np.asarray(joint.axis, dtype=float)
                if not np.isclose(np.linalg.norm(axis), 1.0):
                    raise ModelError('joint "%s" axis must be a unit vector' % joint.name)
                link = add(joint.name, joint.type, parent, axis, joint.origin, I)
                self.joint_v_index[joint.name] = self.links[link].v_index
                actuated.append(joint)
            self.body_link[joint.child] = link

        self.nq, self.nv = q_index, v_index
        self.planar = self.joints[0].type == 'planar'
        self.base_nv = 3 if self.planar else 6
        self.actuated = actuated
        self.n = len(actuated)
        self.S = np.zeros((self.n, self.nv))
        for row, joint in enumerate(actuated):
            self.S[row, self.joint_v_index[joint.name]] = 1.0
        self.tau_max = np.array([j.effort_limit for j in actuated])
        self.tau_min = -self.tau_max
        self.ancestors = []
        for i, link in enumerate(self.links):
            chain, j = [], i
            while j >= 0:
                chain.append(j)
                j = self.links[j].parent
            self.ancestors.append(chain)

    # ############################################
    # Helpers
    # ############################################

    @property
    def total_mass(self):
        return sum(b.mass for b in self.bodies.values())

    @property
    def linear_rows(self):
        """World axes a point task/contact can act along: (x, z) in planar mode."""
        return [0, 2] if self.planar else [0, 1, 2]

    @property
    def actuated_names(self):
        return [j.name for j in self.actuated]

    def frame(self, name):
        if name in self.contacts:
            return self.contacts[name]
        if name in self.tasks:
            return self.tasks[name]
        if name in self.bodies:
            return Frame(name, name)
        raise UnknownFrame('unknown frame "%s"' % name)

    def neutral_configuration(self):
        q = np.zeros(self.nq)
        for link in self.links:
            if link.kind == 'free':
                q[link.q_index + 6] = 1.0
        return q

    def check_state(self, state):
        if state.q.shape != (self.nq,) or state.qd.shape != (self.nv,):
            raise DimensionError(
                'state has q%s, qd%s; tree "%s" needs q(%d,), qd(%d,)'
                % (state.q.shape, state.qd.shape, self.name, self.nq, self.nv))
        if not (np.all(np.isfinite(state.q)) and np.all(np.isfinite(state.qd))):
            raise NonFiniteInput('state contains non-finite values')
        for link in self.links:
            if link.kind == 'free':
                quat = state.q[link.q_index + 3:link.q_index + 7]
                if abs(np.linalg.norm(quat) - 1.0) > 1e-9:
                    raise DimensionError('base quaternion is not normalised')


@dataclass(frozen=True, eq=False)
class GeneralizedState:
    q: np.ndarray
    qd: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        q = np.array(self.q, dtype=float).ravel()
        qd = np.array(self.qd, dtype=float).ravel()
        q.flags.writeable = False
        qd.flags.writeable = False
        object.__setattr__(self, 'q', q)
        object.__setattr__(self, 'qd', qd)
        object.__setattr__(self, 't', float(self.t))


@dataclass(frozen=True, eq=False)
class DynamicsTerms:
    B: np.ndarray
    C: np.ndarray


@dataclass(frozen=True, eq=False)
class TaskJacobians:
    J_R: np.ndarray
    J_C: np.ndarray
    dJdq_R: np.ndarray
    dJdq_C: np.ndarray

    @property
    def J(self):
        return np.vstack([self.J_R, self.J_C])

    @property
    def dJdq(self):
        return np.concatenate([self.dJdq_R, self.dJdq_C])


# ############################################
# Recursive passes
# ############################################

def _joint_transform(link, q):
    qi = q[link.q_index:link.q_index + link.nq]
    if link.kind == 'revolute':
        return spatial.rot(spatial.axis_rotation(link.axis, qi[0]))
    if link.kind == 'prismatic':
        return spatial.xlt(link.axis * qi[0])
    R = Rotation.from_quat(qi[3:7]).as_matrix()
    return spatial.plucker(R.T, qi[:3])


class Kinematics:
    """Link transforms, velocities and bias accelerations at one state."""

    def __init__(self, tree: KinematicTree, state: GeneralizedState):
        tree.check_state(state)
        self.tree = tree
        self.state = state
        q, qd = state.q, state.qd
        nl = len(tree.links)
        self.Xup = [None] * nl
        self.X0 = [None] * nl
        self.E = [None] * nl
        self.p = [None] * nl
        self.v = [None] * nl
        self.a = [None] * nl
        for i, link in enumerate(tree.links):
            Xup = _joint_transform(link, q) @ link.XT
            vJ = link.S @ qd[link.v_index:link.v_index + link.nv]
            if link.parent < 0:
                X0, v, a = Xup, vJ, np.zeros(6)
            else:
                X0 = Xup @ self.X0[link.parent]
                v = Xup @ self.v[link.parent] + vJ
                a = Xup @ self.a[link.parent]
            a = a + spatial.crm(v) @ vJ
            self.Xup[i], self.X0[i], self.v[i], self.a[i] = Xup, X0, v, a
            self.E[i], self.p[i] = spatial.decompose(X0)

    def _link_and_offset(self, frame):
        tree = self.tree
        if isinstance(frame, str):
            frame = tree.frame(frame)
        return tree.body_link[frame.body], np.asarray(frame.offset, dtype=float), frame

    def point(self, frame, normal=None):
        """World position, linear Jacobian (3 x nv) and Jdot*qdot (3,) of a frame point.

        Wheel frames are shifted to the contact point ``centre - radius * normal``.
        """
        link, r, frame = self._link_and_offset(frame)
        E = self.E[link]
        pos = self.p[link] + E.T @ r
        J = np.zeros((3, self.tree.nv))
        J_ang = np.zeros((3, self.tree.nv))
        X0_inv_i = self.X0[link]
        for j in self.tree.ancestors[link]:
            lj = self.tree.links[j]
            cols = X0_inv_i @ spatial.inverse(self.X0[j]) @ lj.S
            sl = slice(lj.v_index, lj.v_index + lj.nv)
            J[:, sl] = E.T @ (cols[3:] - spatial.skew(r) @ cols[:3])
            J_ang[:, sl] = E.T @ cols[:3]
        dJdq = E.T @ spatial.point_acceleration(self.a[link], self.v[link], r)
        if frame.radius > 0:
            n = WORLD_UP if normal is None else np.asarray(normal, dtype=float)
            d = -frame.radius * n
            pos = pos + d
            J = J - spatial.skew(d) @ J_ang
            dJdq = dJdq - spatial.skew(d) @ (E.T @ self.a[link][:3])
        return pos, J, dJdq

    def orientation(self, body):
        """World rotation matrix, angular Jacobian (3 x nv) and its bias term for a body."""
        link = self.tree.body_link[body]
        E = self.E[link]
        J_ang = np.zeros((3, self.tree.nv))
        for j in self.tree.ancestors[link]:
            lj = self.tree.links[j]
            cols = self.X0[link] @ spatial.inverse(self.X0[j]) @ lj.S
            J_ang[:, lj.v_index:lj.v_index + lj.nv] = E.T @ cols[:3]
        return E.T, J_ang, E.T @ self.a[link][:3]

    def center_of_mass(self):
        """World CoM, CoM Jacobian and its bias acceleration."""
        tree = self.tree
        total = tree.total_mass
        pos, J, dJdq = np.zeros(3), np.zeros((3, tree.nv)), np.zeros(3)
        for body in tree.bodies.values():
            p, Jb, db = self.point(Frame(body.name + ':com', body.name, np.asarray(body.com, dtype=float)))
            pos += body.mass * p
            J += body.mass * Jb
            dJdq += body.mass * db
        return pos / total, J / total, dJdq / total


def _rnea(tree, q, qd, qdd, gravity=True):
    nl = len(tree.links)
    Xup, v, a, forces = [None] * nl, [None] * nl, [None] * nl, [None] * nl
    # gravity enters as an upward acceleration of the world
    a0 = np.array([0, 0, 0, 0, 0, tree.gravity]) if gravity else np.zeros(6)
    for i, link in enumerate(tree.links):
        sl = slice(link.v_index, link.v_index + link.nv)
        Xup[i] = _joint_transform(link, q) @ link.XT
        vJ = link.S @ qd[sl]
        if link.parent < 0:
            v[i] = vJ
            a[i] = Xup[i] @ a0 + link.S @ qdd[sl]
        else:
            v[i] = Xup[i] @ v[link.parent] + vJ
            a[i] = Xup[i] @ a[link.parent] + link.S @ qdd[sl]
        a[i] = a[i] + spatial.crm(v[i]) @ vJ
        forces[i] = link.I @ a[i] + spatial.crf(v[i]) @ link.I @ v[i]
    tau = np.zeros(tree.nv)
    for i in range(nl - 1, -1, -1):
        link = tree.links[i]
        tau[link.v_index:link.v_index + link.nv] = link.S.T @ forces[i]
        if link.parent >= 0:
            forces[link.parent] += Xup[i].T @ forces[i]
    return tau, Xup


def _crba(tree, q):
    nl = len(tree.links)
    Xup = [_joint_transform(link, q) @ link.XT for link in tree.links]
    Ic = [link.I.copy() for link in tree.links]
    for i in range(nl - 1, -1, -1):
        parent = tree.links[i].parent
        if parent >= 0:
            Ic[parent] += Xup[i].T @ Ic[i] @ Xup[i]
    B = np.zeros((tree.nv, tree.nv))
    for i, link in enumerate(tree.links):
        si = slice(link.v_index, link.v_index + link.nv)
        F = Ic[i] @ link.S
        B[si, si] = link.S.T @ F
        j = i
        while tree.links[j].parent >= 0:
            F = Xup[j].T @ F
            j = tree.links[j].parent
            lj = tree.links[j]
            sj = slice(lj.v_index, lj.v_index + lj.nv)
            B[si, sj] = F.T @ lj.S
            B[sj, si] = B[si, sj].T
    return 0.5 * (B + B.T)


def _external_generalized_force(tree, kin, f_ext, normals=None):
    total = np.zeros(tree.nv)
    if not f_ext:
        return total
    for name, force in f_ext.items():
        frame = tree.frame(name)
        normal = None if normals is None else normals.get(name)
        _, J, _ = kin.point(frame, normal)
        total += J.T @ as_vector(force, 3, 'force on "%s"' % name)
    return total


# ############################################
# Public operations
# ############################################

def compute_dynamics(tree: KinematicTree, state: GeneralizedState) -> DynamicsTerms:
    """Joint-space inertia ``B`` (composite rigid body) and bias force ``C`` (Newton-Euler, gravity included)."""
    tree.check_state(state)
    B = _crba(tree, state.q)
    C, _ = _rnea(tree, state.q, state.qd, np.zeros(tree.nv))
    return DynamicsTerms(B, C)


def inverse_dynamics(tree, state, qdd, f_ext=None, normals=None):
    """Generalized force ``B qdd + C - J_e^T f_ext``; the actuated entries are the joint torques."""
    tree.check_state(state)
    qdd = as_vector(qdd, tree.nv, 'qdd')
    tau, _ = _rnea(tree, state.q, state.qd, qdd)
    if f_ext:
        tau = tau - _external_generalized_force(tree, Kinematics(tree, state), f_ext, normals)
    return tau


def forward_dynamics(tree, state, tau, f_ext=None, normals=None, terms=None):
    """``qdd = B^-1 (S^T tau + J_e^T f_ext - C)``; ``f_ext`` maps frame names to world forces."""
    tree.check_state(state)
    tau = as_vector(tau, tree.n, 'tau')
    terms = terms or compute_dynamics(tree, state)
    rhs = tree.S.T @ tau - terms.C
    if f_ext:
        rhs = rhs + _external_generalized_force(tree, Kinematics(tree, state), f_ext, normals)
    try:
        factor = linalg.cho_factor(terms.B)
    except linalg.LinAlgError as e:
        raise DynamicsError('inertia matrix is not positive definite: %s' % e)
    return linalg.cho_solve(factor, rhs)


def compute_jacobians(tree: KinematicTree, state: GeneralizedState,
                      task_frames: Sequence[str], contact_frames: Sequence[str],
                      normals: Optional[Dict[str, np.ndarray]] = None, kin=None) -> TaskJacobians:
    """Point Jacobians of task and contact frames along ``tree.linear_rows``."""
    kin = kin or Kinematics(tree, state)
    rows = tree.linear_rows
    normals = normals or {}

    def stack(names):
        if not names:
            return np.zeros((0, tree.nv)), np.zeros(0)
        blocks = [kin.point(tree.frame(n), normals.get(n)) for n in names]
        return (np.vstack([J[rows] for _, J, _ in blocks]),
                np.concatenate([d[rows] for _, _, d in blocks]))

    J_R, dJdq_R = stack(task_frames)
    J_C, dJdq_C = stack(contact_frames)
    return TaskJacobians(J_R, J_C, dJdq_R, dJdq_C)


def integrate_configuration(tree, q, v, dt):
    """Advance ``q`` by the generalized velocity ``v`` over ``dt``."""
    q = np.array(q, dtype=float)
    for link in tree.links:
        qi, vi = link.q_index, link.v_index
        if link.kind != 'free':
            q[qi] += v[vi] * dt
            continue
        quat = q[qi + 3:qi + 7]
        R = Rotation.from_quat(quat)
        q[qi:qi + 3] += R.as_matrix() @ v[vi + 3:vi + 6] * dt
        quat = (R * Rotation.from_rotvec(v[vi:vi + 3] * dt)).as_quat()
        q[qi + 3:qi + 7] = quat / np.linalg.norm(quat)
    return q


def kinetic_energy(tree, state, terms=None):
    terms = terms or compute_dynamics(tree, state)
    return 0.5 * state.qd @ terms.B @ state.qd


def potential_energy(tree, state, kin=None):
    kin = kin or Kinematics(tree, state)
    energy = 0.0
    for body in tree.bodies.values():
        link = tree.body_link[body.name]
        z = (kin.p[link] + kin.E[link].T @ np.asarray(body.com, dtype=float))[2]
        energy += body.mass * tree.gravity * z
    return energy


def base_pose(tree, state) -> Tuple[np.ndarray, np.ndarray]:
    """World position and rotation matrix of the base body."""
    kin = Kinematics(tree, state)
    link = tree.body_link[tree.joints[0].child]
    return kin.p[link], kin.E[link].T


def frame_pose(tree, state, frame, kin=None) -> Tuple[np.ndarray, np.ndarray]:
    """World position and rotation matrix of a frame. Wheel frames give the wheel centre."""
    kin = kin or Kinematics(tree, state)
    link, r, _ = kin._link_and_offset(frame)
    R = kin.E[link].T
    return kin.p[link] + R @ r, R


def point_position(tree, state, frame, normal=None, kin=None):
    kin = kin or Kinematics(tree, state)
    return kin.point(frame, normal)[0]


def center_of_mass(tree, state, kin=None):
    kin = kin or Kinematics(tree, state)
    return kin.center_of_mass()[0]


def com_jacobian(tree, state, kin=None) -> Tuple[np.ndarray, np.ndarray]:
    """CoM Jacobian (3 x nv) and its bias acceleration."""
    kin = kin or Kinematics(tree, state)
    _, J, dJdq = kin.center_of_mass()
    return J, dJdq

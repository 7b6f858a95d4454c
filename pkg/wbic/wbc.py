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

"""Weighted-QP whole-body controller.

The decision vector is ``X = [qdd; tau; f_C]``. The equality block is::

    [ B    -S'   -J_C' ]       [ -C - S' tau_f + tau_known ]
    [ J_C   0     0    ]  X  = [ -Jd_C qd                  ]
    [ J_R   0     0    ]       [ xdd_des - Jd_R qd         ]

``tau_f`` is the compensating torque of the friction estimator: the plant loses
it to friction, so the commanded torque carries it on top of what the rows need.
"""

import dataclasses
import logging
from dataclasses import dataclass, field
from typing import Dict, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial.transform import Rotation

from . import dynamics
from .dynamics import Frame, GeneralizedState, KinematicTree
from .exceptions import InvalidParameter
from .qp import ActiveSetQP, QpProblem, QpResult
from .utils import as_vector, unit

logger = logging.getLogger('wbic')

TASK_KINDS = ('point', 'height', 'orientation', 'wheel_centroid', 'com')
FORCE_LIMIT_FACTOR = 4.0


# ############################################
# Tasks
# ############################################

@dataclass(frozen=True, eq=False)
class TaskReference:
    x: np.ndarray
    xd: np.ndarray
    xdd: np.ndarray

    @classmethod
    def hold(cls, x):
        x = np.asarray(x, dtype=float)
        return cls(x, np.zeros_like(x), np.zeros_like(x))


@dataclass(frozen=True, eq=False)
class TaskSpec:
    """A task acceleration constraint on world axes ``axes`` of a task quantity.

    ``kind`` selects the quantity: ``point`` (a frame point), ``height`` (base
    origin above the mean wheel contact), ``orientation`` (rotation vector of a
    body), ``wheel_centroid`` (mean wheel centre) or ``com``. A zero ``weight``
    switches the task off. ``limit`` saturates each commanded acceleration component.
    """
    name: str
    kind: str
    frame: Optional[str] = None
    axes: Tuple[int, ...] = (2,)
    kp: float = 0.0
    kd: float = 0.0
    reference: Optional[TaskReference] = None
    weight: float = 1.0
    limit: Optional[float] = None

    def __post_init__(self):
        if self.kind not in TASK_KINDS:
            raise InvalidParameter('task "%s" has unknown kind "%s"' % (self.name, self.kind))
        if self.kp < 0 or self.kd < 0 or self.weight < 0:
            raise InvalidParameter('task "%s" gains and weight must be non-negative' % self.name)
        if self.limit is not None and not self.limit > 0:
            raise InvalidParameter('task "%s" acceleration limit must be positive' % self.name)
        object.__setattr__(self, 'axes', tuple(int(a) for a in self.axes))

    @property
    def size(self):
        return len(self.axes)

    def with_reference(self, x, xd=None, xdd=None):
        x = np.asarray(x, dtype=float).ravel()
        return dataclasses.replace(self, reference=TaskReference(
            x, np.zeros_like(x) if xd is None else np.asarray(xd, dtype=float).ravel(),
            np.zeros_like(x) if xdd is None else np.asarray(xdd, dtype=float).ravel()))


def task_acceleration(task: TaskSpec, x, xd):
    """``xdd_ref + K_P (x_ref - x) + K_D (xd_ref - xd)``, clipped to ``task.limit``."""
    ref = task.reference
    if ref is None:
        raise InvalidParameter('task "%s" has no reference' % task.name)
    x, xd = as_vector(x, task.size, 'x'), as_vector(xd, task.size, 'xd')
    xdd = ref.xdd + task.kp * (ref.x - x) + task.kd * (ref.xd - xd)
    if task.limit is not None:
        xdd = np.clip(xdd, -task.limit, task.limit)
    return xdd


def wheel_centre(frame: Frame):
    return Frame(frame.name + ':centre', frame.body, frame.offset)


def task_kinematics(tree: KinematicTree, kin: dynamics.Kinematics, task: TaskSpec,
                    contacts: Sequence[str] = (), normals: Optional[Mapping[str, np.ndarray]] = None):
    """``(x, J, Jd qd)`` of a task along its axes."""
    normals = normals or {}
    axes = list(task.axes)
    if task.kind == 'point':
        pos, J, dJdq = kin.point(tree.frame(task.frame))
    elif task.kind == 'height':
        if not contacts:
            raise InvalidParameter('height task needs contact frames')
        pos, J, dJdq = kin.point(tree.frame(task.frame or tree.joints[0].child))
        for name in contacts:
            cp, cJ, cd = kin.point(tree.frame(name), normals.get(name))
            pos, J, dJdq = pos - cp / len(contacts), J - cJ / len(contacts), dJdq - cd / len(contacts)
    elif task.kind == 'orientation':
        R, J, dJdq = kin.orientation(task.frame or tree.joints[0].child)
        pos = Rotation.from_matrix(R).as_rotvec()
    elif task.kind == 'wheel_centroid':
        names = contacts or list(tree.contacts)
        blocks = [kin.point(wheel_centre(tree.frame(n))) for n in names]
        pos = sum(b[0] for b in blocks) / len(blocks)
        J = sum(b[1] for b in blocks) / len(blocks)
        dJdq = sum(b[2] for b in blocks) / len(blocks)
    else:
        pos, J, dJdq = kin.center_of_mass()
    return pos[axes], J[axes], dJdq[axes]


# ############################################
# Friction cones
# ############################################

@dataclass(frozen=True, eq=False)
class FrictionCone:
    normal: np.ndarray
    mu: float
    facets: int = 4

    def __post_init__(self):
        n = as_vector(self.normal, 3, 'cone normal')
        if abs(np.linalg.norm(n) - 1.0) > 1e-9:
            n = unit(n, 'cone normal')
        if not self.mu > 0:
            raise InvalidParameter('friction coefficient must be positive')
        if self.facets < 3:
            raise InvalidParameter('a friction pyramid needs at least 3 facets')
        object.__setattr__(self, 'normal', n)

    @property
    def mu_inscribed(self):
        return self.mu * np.cos(np.pi / self.facets)

    def tangents(self):
        n = self.normal
        t1 = np.cross([0.0, 1.0, 0.0], n)
        if np.linalg.norm(t1) < 1e-6:
            t1 = np.cross(n, [0.0, 0.0, 1.0])
        t1 = unit(t1, 'cone tangent')
        return t1, np.cross(n, t1)

    def rows(self, planar=False):
        """Facet rows ``G`` (world force, 3 columns) with ``G f <= 0``."""
        n = self.normal
        t1, t2 = self.tangents()
        if planar:
            return np.array([t1 - self.mu * n, -t1 - self.mu * n])
        angles = 2 * np.pi * np.arange(self.facets) / self.facets
        dirs = np.cos(angles)[:, None] * t1 + np.sin(angles)[:, None] * t2
        return dirs - self.mu_inscribed * n

    def contains(self, force, planar=False, tol=1e-8):
        force = np.asarray(force, dtype=float)
        return bool(force @ self.normal >= -tol and np.all(self.rows(planar) @ force <= tol))


def flat_cones(contacts, mu, facets=4):
    return {name: FrictionCone(np.array([0.0, 0.0, 1.0]), mu, facets) for name in contacts}


# ############################################
# Problem assembly
# ############################################

@dataclass(frozen=True)
class WbcWeights:
    qdd: float = 1e-3
    tau: float = 1e-6
    force: float = 1e-6
    tau_rate: float = 1e-4
    force_rate: float = 1e-4

    def __post_init__(self):
        if min(dataclasses.astuple(self)) < 0:
            raise InvalidParameter('WBC weights must be non-negative')


@dataclass(frozen=True, eq=False)
class WbcProblem:
    Z: np.ndarray
    N: np.ndarray
    H: np.ndarray
    g: np.ndarray
    G: np.ndarray
    h: np.ndarray
    families: Tuple[str, ...]
    nv: int
    n: int
    nf: int
    contacts: Tuple[str, ...]
    dt: float
    prev_tau: Optional[np.ndarray] = None
    prev_force: Optional[np.ndarray] = None
    metadata: Dict = field(default_factory=dict)

    @property
    def size(self):
        return self.nv + self.n + self.nf

    def split(self, X):
        X = np.asarray(X, dtype=float)
        nv, n = self.nv, self.n
        d = self.nf // max(len(self.contacts), 1)
        return X[:nv], X[nv:nv + n], X[nv + n:].reshape(len(self.contacts), d) if self.contacts else X[nv + n:]

    def to_qp(self):
        return QpProblem(self.H, self.g, self.Z, self.N, self.G, self.h, self.families)

    def dynamics_residual(self, X):
        rows = self.nv
        return float(np.max(np.abs(self.Z[:rows] @ X - self.N[:rows])))

    def cone_slack(self, X):
        rows = [i for i, f in enumerate(self.families) if f == 'friction_cone']
        if not rows:
            return np.inf
        return float(np.min(self.h[rows] - self.G[rows] @ X))


def _lift_force(rows, d, index, nc, planar_cols):
    """Place 3-column world rows onto the stacked force block of contact ``index``."""
    out = np.zeros((rows.shape[0], nc * d))
    out[:, index * d:(index + 1) * d] = rows[:, planar_cols]
    return out


def assemble(tree: KinematicTree, state: GeneralizedState, tasks: Sequence[TaskSpec],
             cones: Mapping[str, FrictionCone], tau_f=None, prev=None,
             weights: WbcWeights = WbcWeights(), dt=2e-3, tau_known=None,
             contacts: Optional[Sequence[str]] = None, force_limit=None, terms=None):
    """Build the QP for one control tick."""
    contacts = tuple(contacts if contacts is not None else tree.contacts)
    for name in contacts:
        if name not in cones:
            raise InvalidParameter('no friction cone for contact "%s"' % name)
    nv, n = tree.nv, tree.n
    rows3 = tree.linear_rows
    d, nc = len(rows3), len(contacts)
    nf = d * nc
    size = nv + n + nf

    terms = terms or dynamics.compute_dynamics(tree, state)
    kin = dynamics.Kinematics(tree, state)
    normals = {name: cones[name].normal for name in contacts}
    jac = dynamics.compute_jacobians(tree, state, (), contacts, normals, kin)
    tau_f = np.zeros(n) if tau_f is None else as_vector(tau_f, n, 'tau_f')
    tau_known = np.zeros(nv) if tau_known is None else as_vector(tau_known, nv, 'tau_known')
    qd = state.qd

    metadata = {'contact_rank_deficient': False, 'tasks': [], 'xdd_des': {}}
    if nc and np.linalg.matrix_rank(jac.J_C) < jac.J_C.shape[0]:
        metadata['contact_rank_deficient'] = True
        logger.warning('contact Jacobian is rank deficient at t=%.3f', state.t)

    # dynamics and contact rows
    blocks = [np.hstack([terms.B, -tree.S.T, -jac.J_C.T])]
    rhs = [-terms.C - tree.S.T @ tau_f + tau_known]
    if nc:
        blocks.append(np.hstack([jac.J_C, np.zeros((jac.J_C.shape[0], n + nf))]))
        rhs.append(-jac.dJdq_C)

    for task in tasks:
        if task.weight == 0:
            continue
        x, J, dJdq = task_kinematics(tree, kin, task, contacts, normals)
        xdd_des = task_acceleration(task, x, J @ qd)
        blocks.append(np.hstack([J, np.zeros((J.shape[0], n + nf))]))
        rhs.append(xdd_des - dJdq)
        metadata['tasks'].append(task.name)
        metadata['xdd_des'][task.name] = xdd_des
    Z, N = np.vstack(blocks), np.concatenate(rhs)

    # cost
    diag = np.concatenate([np.full(nv, weights.qdd), np.full(n, weights.tau), np.full(nf, weights.force)])
    H = 2.0 * np.diag(diag)
    g = np.zeros(size)
    prev_tau = prev_force = None
    if prev is not None:
        prev_tau, prev_force = as_vector(prev[0], n, 'previous tau'), as_vector(prev[1], nf, 'previous f_C')
        H[nv:nv + n, nv:nv + n] += 2.0 * weights.tau_rate * np.eye(n)
        H[nv + n:, nv + n:] += 2.0 * weights.force_rate * np.eye(nf)
        g[nv:nv + n] = -2.0 * weights.tau_rate * prev_tau
        g[nv + n:] = -2.0 * weights.force_rate * prev_force

    # inequalities
    G_rows, h_rows, families = [], [], []

    def add(rows, bound, family):
        G_rows.append(rows)
        h_rows.append(np.broadcast_to(bound, (rows.shape[0],)).astype(float))
        families.extend([family] * rows.shape[0])

    f_max = force_limit if force_limit is not None else FORCE_LIMIT_FACTOR * tree.total_mass * tree.gravity
    for i, name in enumerate(contacts):
        cone = cones[name]
        pad = np.zeros((1, nv + n))
        cone_rows = _lift_force(cone.rows(tree.planar), d, i, nc, rows3)
        add(np.hstack([np.zeros((cone_rows.shape[0], nv + n)), cone_rows]), 0.0, 'friction_cone')
        normal_row = _lift_force(-cone.normal[None, :], d, i, nc, rows3)
        add(np.hstack([pad, normal_row]), 0.0, 'force_bounds')
        add(np.hstack([pad, -normal_row]), f_max, 'force_bounds')
    if n:
        eye = np.eye(n)
        finite = np.isfinite(tree.tau_max)
        if np.any(finite):
            sel = eye[finite]
            add(np.hstack([np.zeros((sel.shape[0], nv)), sel, np.zeros((sel.shape[0], nf))]),
                tree.tau_max[finite], 'torque_bounds')
            add(np.hstack([np.zeros((sel.shape[0], nv)), -sel, np.zeros((sel.shape[0], nf))]),
                -tree.tau_min[finite], 'torque_bounds')
    G = np.vstack(G_rows) if G_rows else np.zeros((0, size))
    h = np.concatenate(h_rows) if h_rows else np.zeros(0)
    return WbcProblem(Z, N, H, g, G, h, tuple(families), nv, n, nf, contacts, dt,
                      prev_tau, prev_force, metadata)


# ############################################
# Solution
# ############################################

@dataclass(frozen=True, eq=False)
class WbcSolution:
    qdd: np.ndarray
    tau: np.ndarray
    forces: np.ndarray
    result: QpResult
    problem: WbcProblem

    @property
    def X(self):
        return self.result.x

    def force(self, contact):
        """World force at ``contact``, always 3 components."""
        i = self.problem.contacts.index(contact)
        f = self.forces[i]
        if f.shape[0] == 3:
            return f.copy()
        return np.array([f[0], 0.0, f[1]])


def solve(problem: WbcProblem, solver: Optional[ActiveSetQP] = None, warm_start=None) -> WbcSolution:
    solver = solver or ActiveSetQP()
    result = solver.solve(problem.to_qp(), warm_start)
    qdd, tau, forces = problem.split(result.x)
    return WbcSolution(qdd, tau, np.atleast_2d(forces) if problem.contacts else np.zeros((0, 3)),
                       result, problem)


class WholeBodyController:
    """Keeps the solver's warm start and the previous tick's torques and forces."""

    def __init__(self, tree: KinematicTree, weights: WbcWeights = WbcWeights(), dt=2e-3,
                 contacts: Optional[Sequence[str]] = None):
        self.tree = tree
        self.weights = weights
        self.dt = dt
        self.contacts = tuple(contacts if contacts is not None else tree.contacts)
        self.solver = ActiveSetQP()
        self.prev = None
        self.last = None

    def reset(self):
        self.solver.reset()
        self.prev = None
        self.last = None

    def step(self, state, tasks, cones, tau_f=None, tau_known=None, terms=None):
        problem = assemble(self.tree, state, tasks, cones, tau_f=tau_f, prev=self.prev,
                           weights=self.weights, dt=self.dt, tau_known=tau_known,
                           contacts=self.contacts, terms=terms)
        solution = solve(problem, self.solver)
        self.prev = (solution.tau.copy(), solution.forces.ravel().copy())
        self.last = solution
        return solution


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

"""External force observation and terrain frame estimation."""

import logging
from collections import deque
from dataclasses import dataclass
from typing import Callable, Dict, Mapping, Optional

import numpy as np
from scipy import linalg
from scipy.spatial.transform import Rotation

from . import dynamics
from .exceptions import InvalidParameter, NonFiniteInput
from .utils import as_vector, require_finite, unit
from .wbc import FrictionCone

logger = logging.getLogger('wbic')

UP = np.array([0.0, 0.0, 1.0])
LATERAL = np.array([0.0, 1.0, 0.0])
FORWARD = np.array([1.0, 0.0, 0.0])

V_MIN = 0.02
F_MIN = 5.0
PARALLEL_ANGLE = np.deg2rad(5.0)
HISTORY_WINDOW = 0.1
MIN_CHORD = 0.02
MAX_TURN = 0.05


# ############################################
# Generalized momentum observer
# ############################################

class MomentumObserver:
    """First-order generalized-momentum observer.

    With ``p = B qd`` the external generalized force satisfies
    ``tau_ext = pd - Bd qd - S' tau + C``; each sample of that balance is
    low-passed with time constant ``1 / K_O``.
    """

    def __init__(self, tree, K_O=50.0, dt=2e-3):
        gains = np.broadcast_to(np.asarray(K_O, dtype=float), (tree.nv,)).copy()
        if np.any(gains <= 0):
            raise InvalidParameter('observer gains must be positive')
        if not dt > 0:
            raise InvalidParameter('dt must be positive')
        self.tree = tree
        self.K_O = gains
        self.dt = dt
        self.alpha = np.exp(-gains * dt)
        self.reset()

    def reset(self):
        self.r = np.zeros(self.tree.nv)
        self._prev = None

    def step(self, state, tau, terms=None):
        """Feed the state reached after ``tau`` was applied for one period; returns the residual."""
        tree = self.tree
        tau = as_vector(tau, tree.n, 'tau')
        terms = terms or dynamics.compute_dynamics(tree, state)
        require_finite('dynamics terms', terms.B, terms.C)
        v = state.qd
        p = terms.B @ v
        if self._prev is not None:
            p_prev, B_prev, C_prev = self._prev
            pd = (p - p_prev) / self.dt
            Bd_v = (terms.B - B_prev) @ v / self.dt
            sample = pd - Bd_v - tree.S.T @ tau + C_prev
            self.r = self.alpha * self.r + (1.0 - self.alpha) * sample
        self._prev = (p, terms.B, terms.C)
        if not np.all(np.isfinite(self.r)):
            raise NonFiniteInput('momentum observer diverged')
        return self.r.copy()


def observer_step(obs: MomentumObserver, tree, state, tau, dt=None):
    if dt is not None and not np.isclose(dt, obs.dt):
        raise InvalidParameter('observer runs at dt=%g, got %g' % (obs.dt, dt))
    if tree is not obs.tree:
        raise InvalidParameter('observer was built for another tree')
    return obs.step(state, tau)


@dataclass(frozen=True, eq=False)
class ContactForceEstimate:
    forces: np.ndarray
    rank_deficient: bool = False

    def slice(self, index, size=3):
        return self.forces[index * size:(index + 1) * size]


def estimate_contact_force(tau_ext, J_e):
    """Minimum-norm ``f`` with ``J_e' f = tau_ext``."""
    J_e = np.atleast_2d(np.asarray(J_e, dtype=float))
    tau_ext = as_vector(tau_ext, J_e.shape[1], 'tau_ext')
    f, _, rank, _ = linalg.lstsq(J_e.T, tau_ext)
    deficient = rank < J_e.shape[0]
    if deficient:
        logger.warning('contact Jacobian has rank %d for %d force components', rank, J_e.shape[0])
    return ContactForceEstimate(f, deficient)


def wheel_force_jacobian(tree, state, contacts, normals=None, kin=None, rows=None):
    """Stacked world point Jacobians of the wheel contacts, restricted to ``rows`` of each."""
    kin = kin or dynamics.Kinematics(tree, state)
    normals = normals or {}
    rows = list(range(3)) if rows is None else list(rows)
    return np.vstack([kin.point(tree.frame(n), normals.get(n))[1][rows] for n in contacts])


# ############################################
# Terrain frames
# ############################################

class ConstraintSurface:
    """Rows of ``d psi / d x`` (unit norm) with the projector onto the admissible motion."""

    def __init__(self, rows, psi: Optional[Callable] = None, theta=None):
        rows = np.atleast_2d(np.asarray(rows, dtype=float))
        self.J = np.array([unit(r, 'constraint row') for r in rows])
        self.psi = psi
        self.theta = theta
        self.P = np.eye(3) - np.linalg.pinv(self.J) @ self.J

    @classmethod
    def from_height_field(cls, height, slope, x, planar=True):
        """``psi = z - h(x)`` at abscissa ``x``."""
        grad = np.array([-slope(x), 0.0, 1.0])
        rows = [grad, LATERAL] if planar else [grad]
        return cls(rows, psi=lambda p: p[2] - height(p[0]), theta=(height, slope))

    @classmethod
    def from_history(cls, points, lateral=LATERAL):
        """Local tangent from a total-least-squares line through a wheel-centre trajectory."""
        points = np.asarray(points, dtype=float)
        points = points - np.outer(points @ lateral, lateral)
        chord = points[-1] - points[0]
        _, _, vt = np.linalg.svd(points - points.mean(axis=0))
        tangent = vt[0] - (vt[0] @ lateral) * lateral
        if tangent @ chord < 0:
            tangent = -tangent
        tangent = unit(tangent, 'wheel chord')
        normal = unit(np.cross(tangent, lateral), 'surface normal')
        if normal[2] < 0:
            normal = -normal
        return cls([normal, lateral])

    def evaluate(self, point):
        if self.psi is None:
            raise InvalidParameter('surface has no constraint function')
        return float(self.psi(point))


@dataclass(frozen=True, eq=False)
class TerrainFrame:
    n_x: np.ndarray
    n_y: np.ndarray
    n_z: np.ndarray
    t: float = 0.0
    degenerate: bool = False
    held: bool = False
    stale: bool = False

    @classmethod
    def flat(cls, t=0.0):
        return cls(FORWARD.copy(), LATERAL.copy(), UP.copy(), t)

    def matrix(self):
        return np.column_stack([self.n_x, self.n_y, self.n_z])

    def angle_to(self, normal):
        return float(np.arccos(np.clip(self.n_z @ unit(normal), -1.0, 1.0)))


def estimate_nx(P, velocity, previous=None, v_min=V_MIN):
    """Projected forward direction; ``(n_x, stale)``. Below ``v_min`` the previous direction is held."""
    velocity = as_vector(velocity, 3, 'wheel velocity')
    held = FORWARD.copy() if previous is None else np.asarray(previous, dtype=float)
    if np.linalg.norm(velocity) < v_min:
        return held, True
    projected = np.asarray(P, dtype=float) @ velocity
    norm = np.linalg.norm(projected)
    if norm < v_min * 1e-3:
        return held, True
    return projected / norm, False


def estimate_frame(f_C, n_x, previous: Optional[TerrainFrame] = None, t=0.0,
                   f_min=F_MIN, parallel_angle=PARALLEL_ANGLE):
    """Normal from the contact force with its component along ``n_x`` removed."""
    f = as_vector(f_C, 3, 'contact force')
    n_x = unit(as_vector(n_x, 3, 'n_x'), 'n_x')
    fallback = previous or TerrainFrame.flat(t)
    norm_f = np.linalg.norm(f)
    if norm_f > 0:
        cos = abs(f @ n_x) / norm_f
        if cos > np.cos(parallel_angle):
            logger.debug('contact force within %.1f deg of n_x, holding frame', np.rad2deg(parallel_angle))
            return TerrainFrame(fallback.n_x, fallback.n_y, fallback.n_z, fallback.t,
                                degenerate=True, held=True)
    f_z = f - (f @ n_x) * n_x
    if np.linalg.norm(f_z) <= f_min:
        return TerrainFrame(fallback.n_x, fallback.n_y, fallback.n_z, fallback.t, held=True)
    n_z = f_z / np.linalg.norm(f_z)
    if n_z[2] < 0:
        n_z = -n_z
    n_y = np.cross(n_z, n_x)
    return TerrainFrame(n_x, n_y, n_z, t)


def limit_turn(previous, target, max_angle=MAX_TURN):
    """``target`` turned back towards ``previous`` until they are at most ``max_angle`` apart."""
    previous, target = unit(previous, 'previous direction'), unit(target, 'direction')
    angle = float(np.arccos(np.clip(previous @ target, -1.0, 1.0)))
    if angle <= max_angle:
        return target
    axis = np.cross(previous, target)
    if np.linalg.norm(axis) < 1e-12:
        return previous
    return Rotation.from_rotvec(max_angle * unit(axis)).apply(previous)


def update_cones(frames: Mapping[str, TerrainFrame], mu, facets=4,
                 previous: Optional[Mapping[str, FrictionCone]] = None) -> Dict[str, FrictionCone]:
    previous = previous or {}
    cones = {}
    for name, frame in frames.items():
        if frame.degenerate and name in previous:
            cones[name] = previous[name]
        else:
            cones[name] = FrictionCone(frame.n_z, mu, facets)
    return cones


class TerrainEstimator:
    """Per-contact wheel-centre history, forward direction and normal estimate."""

    def __init__(self, contacts, window=HISTORY_WINDOW, v_min=V_MIN, f_min=F_MIN, lateral=LATERAL,
                 min_chord=MIN_CHORD, max_turn=MAX_TURN):
        self.contacts = tuple(contacts)
        self.window = window
        self.v_min = v_min
        self.f_min = f_min
        self.min_chord = min_chord
        self.max_turn = max_turn
        self.lateral = np.asarray(lateral, dtype=float)
        self.history = {name: deque() for name in self.contacts}
        self.frames = {name: TerrainFrame.flat() for name in self.contacts}

    def record(self, t, centres: Mapping[str, np.ndarray]):
        for name in self.contacts:
            samples = self.history[name]
            samples.append((t, np.asarray(centres[name], dtype=float).copy()))
            while samples and samples[0][0] < t - self.window - 1e-12:
                samples.popleft()

    def surface(self, name):
        samples = self.history[name]
        if len(samples) < 2:
            return None
        points = np.array([p for _, p in samples])
        chord = points[-1] - points[0]
        if np.linalg.norm(chord - (chord @ self.lateral) * self.lateral) < self.min_chord:
            return None
        return ConstraintSurface.from_history(points, self.lateral)

    def update(self, t, velocities: Mapping[str, np.ndarray], forces: Mapping[str, np.ndarray]):
        """Frames from the recorded history. A contact that has not covered ``min_chord`` keeps its frame."""
        for name in self.contacts:
            previous = self.frames[name]
            surface = self.surface(name)
            if surface is None:
                n_x, stale = previous.n_x, True
            else:
                n_x, stale = estimate_nx(surface.P, velocities[name], previous.n_x, self.v_min)
            frame = estimate_frame(forces[name], n_x, previous, t, self.f_min)
            if not frame.held:
                frame = self._limited(previous, frame)
            if stale and not frame.held:
                frame = TerrainFrame(frame.n_x, frame.n_y, frame.n_z, t, stale=True)
            elif stale:
                frame = TerrainFrame(frame.n_x, frame.n_y, frame.n_z, frame.t, frame.degenerate, True, True)
            self.frames[name] = frame
        return dict(self.frames)

    def _limited(self, previous: TerrainFrame, frame: TerrainFrame):
        n_z = limit_turn(previous.n_z, frame.n_z, self.max_turn)
        if np.allclose(n_z, frame.n_z, rtol=0.0, atol=1e-12):
            return frame
        logger.debug('terrain normal turn limited to %.3f rad', self.max_turn)
        n_x = unit(frame.n_x - (frame.n_x @ n_z) * n_z, 'n_x')
        return TerrainFrame(n_x, np.cross(n_z, n_x), n_z, frame.t, frame.degenerate)

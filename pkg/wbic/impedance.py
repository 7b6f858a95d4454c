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

"""Impedance reference shaping.

An external wrench acting on a control point bends the raw task reference
``(x', xd', xdd')`` through the target dynamics ``M dxdd + D dxd + K dx = F_e``.
"""

import logging
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np

from . import dynamics
from .exceptions import DimensionError, InvalidParameter, NonFiniteInput
from .utils import as_vector

logger = logging.getLogger('wbic')

CONTROL_POINTS = ('base', 'centroid')
DEFAULT_CLAMP = 0.2


@dataclass(frozen=True, eq=False)
class ImpedanceParams:
    """Diagonal target impedance per controlled direction."""
    M: np.ndarray
    D: np.ndarray
    K: np.ndarray
    control_point: str = 'base'

    def __post_init__(self):
        M = as_vector(self.M, name='M')
        D = as_vector(self.D, M.shape[0], 'D')
        K = as_vector(self.K, M.shape[0], 'K')
        if np.any(M <= 0) or np.any(K <= 0):
            raise InvalidParameter('impedance M and K entries must be positive')
        if np.any(D < 0):
            raise InvalidParameter('impedance D entries must be non-negative')
        if self.control_point not in CONTROL_POINTS:
            raise InvalidParameter('unknown control point "%s"' % self.control_point)
        object.__setattr__(self, 'M', M)
        object.__setattr__(self, 'D', D)
        object.__setattr__(self, 'K', K)

    @property
    def size(self):
        return self.M.shape[0]

    def energy(self, dx, dxd):
        """``0.5 dxd' M dxd + 0.5 dx' K dx``"""
        dx, dxd = np.asarray(dx, dtype=float), np.asarray(dxd, dtype=float)
        return 0.5 * float(dxd @ (self.M * dxd) + dx @ (self.K * dx))


@dataclass(frozen=True, eq=False)
class ImpedanceReference:
    raw_x: np.ndarray
    raw_xd: np.ndarray
    raw_xdd: np.ndarray
    x: np.ndarray
    xd: np.ndarray
    xdd: np.ndarray


def impedance_update(params: ImpedanceParams, raw, state, F_e, dt, clamp: Optional[float] = DEFAULT_CLAMP):
    """One semi-implicit Euler step of the target impedance.

    ``raw`` is the raw reference triple, ``state`` the current ``(x, xd)`` of the
    control point. Returns an :class:`ImpedanceReference` whose ``x``/``xd`` are the
    references for the next tick and ``xdd`` the shaped acceleration.
    """
    if not dt > 0:
        raise InvalidParameter('dt must be positive, got %r' % dt)
    n = params.size
    raw_x, raw_xd, raw_xdd = (as_vector(v, n, name) for v, name in zip(raw, ('x_ref', 'xd_ref', 'xdd_ref')))
    x, xd = as_vector(state[0], n, 'x'), as_vector(state[1], n, 'xd')
    F = np.asarray(F_e, dtype=float).ravel()
    if F.shape != (n,):
        raise DimensionError('external wrench has length %d, expected %d' % (F.shape[0], n))
    if not np.all(np.isfinite(F)):
        raise NonFiniteInput('external wrench estimate is not finite')

    dx, dxd = x - raw_x, xd - raw_xd
    xdd = raw_xdd + (F - params.D * dxd - params.K * dx) / params.M
    xd_next = xd + dt * xdd
    x_next = x + dt * xd_next
    if clamp is not None:
        offset = x_next - raw_x
        limited = np.clip(offset, -clamp, clamp)
        if np.any(limited != offset):
            logger.debug('impedance reference clamped at %.3f m', clamp)
            xd_next = np.where(limited != offset, raw_xd, xd_next)
        x_next = raw_x + limited
    return ImpedanceReference(raw_x, raw_xd, raw_xdd, x_next, xd_next, xdd)


class ImpedanceFilter:
    """Admittance-form integrator: the filter's own reference is the state fed back."""

    def __init__(self, params: ImpedanceParams, dt, clamp: Optional[float] = DEFAULT_CLAMP):
        self.params = params
        self.dt = dt
        self.clamp = clamp
        self.x = None
        self.xd = None
        self.last = None

    def reset(self, x0, xd0=None):
        self.x = as_vector(x0, self.params.size, 'x0').copy()
        self.xd = np.zeros(self.params.size) if xd0 is None else as_vector(xd0, self.params.size, 'xd0').copy()

    def step(self, raw, F_e):
        if self.x is None:
            self.reset(raw[0], raw[1])
        self.last = impedance_update(self.params, raw, (self.x, self.xd), F_e, self.dt, self.clamp)
        self.x, self.xd = self.last.x, self.last.xd
        return self.last

    def deviation(self):
        if self.last is None:
            return np.zeros(self.params.size)
        return self.x - self.last.raw_x


# ############################################
# Wrench mapping
# ############################################

def check_selectors(selectors: Mapping[str, np.ndarray], size):
    """Selectors must pick disjoint 3-row slices that together cover ``f_ext``."""
    blocks = []
    for name, S in selectors.items():
        S = np.asarray(S, dtype=float)
        if S.ndim != 2 or S.shape[1] != size or S.shape[0] != 3:
            raise DimensionError('selector for "%s" must be 3 x %d' % (name, size))
        if not np.all((S == 0.0) | (S == 1.0)):
            raise InvalidParameter('selector for "%s" is not a 0/1 matrix' % name)
        blocks.append(S)
    if not blocks:
        raise InvalidParameter('no selectors given')
    stacked = np.vstack(blocks)
    if stacked.shape[0] != size or not (np.all(stacked.sum(axis=0) == 1.0) and np.all(stacked.sum(axis=1) == 1.0)):
        raise InvalidParameter('selectors do not partition f_ext')


def _planar(tree, wrench):
    """``[fx, fy, fz, mx, my, mz]`` -> ``[fx, fz, my]`` for planar trees."""
    return wrench[[0, 2, 4]] if tree.planar else wrench


def map_external_wrench(tree, state, f_ext, selectors: Mapping[str, np.ndarray],
                        control_point='base', normals=None):
    """Sum the world forces picked out of the stacked ``f_ext`` into one wrench at the control point.

    ``selectors`` maps frame names (hand points, wheel contacts) to 3-row 0/1 selector
    matrices. The result is ``[fx, fz, my]`` in planar mode and ``[f; m]`` (world axes) otherwise.
    At the base the moment is taken about the base origin, at the centroid about the CoM.
    """
    f_ext = as_vector(f_ext, name='f_ext')
    check_selectors(selectors, f_ext.shape[0])
    if control_point not in CONTROL_POINTS:
        raise InvalidParameter('unknown control point "%s"' % control_point)
    kin = dynamics.Kinematics(tree, state)
    normals = normals or {}

    if control_point == 'base':
        cols = slice(0, tree.base_nv)
        generalized = np.zeros(tree.base_nv)
        for name, S in selectors.items():
            _, J, _ = kin.point(tree.frame(name), normals.get(name))
            generalized += J[:, cols].T @ (np.asarray(S, dtype=float) @ f_ext)
        if tree.planar:
            return generalized
        # free joint columns give the body-frame [moment; force]
        R = kin.E[tree.body_link[tree.joints[0].child]].T
        return np.concatenate([R @ generalized[3:], R @ generalized[:3]])

    com, _, _ = kin.center_of_mass()
    wrench = np.zeros(6)
    for name, S in selectors.items():
        pos, _, _ = kin.point(tree.frame(name), normals.get(name))
        force = np.asarray(S, dtype=float) @ f_ext
        wrench[:3] += force
        wrench[3:] += np.cross(pos - com, force)
    return _planar(tree, wrench)


def selector_blocks(names: Sequence[str]):
    """Consecutive 3-row selectors for ``f_ext`` stacked in the order of ``names``."""
    size = 3 * len(names)
    blocks = {}
    for i, name in enumerate(names):
        S = np.zeros((3, size))
        S[:, 3 * i:3 * i + 3] = np.eye(3)
        blocks[name] = S
    return blocks

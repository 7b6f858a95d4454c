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

"""Impedance coordination of the body and two carried loads.

The body (mass ``M``) rides on the legs through ``K_b``/``D_b``; each load hangs
from a hand through ``K_X`` and a damping ``D_X`` that is switched between its
bounds. Everything is written in relative coordinates::

    s_b = dp_b - dL        s_L = dp_L - dp_b        s_R = dp_R - dp_b

stacked as ``x_s = [s_b, sd_b, s_L, sd_L, s_R, sd_R]`` (3-vectors each).
"""

import bisect
import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import integrate

from .exceptions import DimensionError, InvalidParameter, NonMonotonicTime
from .signals import damping_switched
from .utils import as_vector, require_finite

logger = logging.getLogger('wbic')

UP = np.array([0.0, 0.0, 1.0])
HYSTERESIS = 1e-4
SIDES = ('L', 'R')


def _diag3(value, name):
    return as_vector(np.broadcast_to(np.asarray(value, dtype=float), (3,)), 3, name)


@dataclass(frozen=True, eq=False)
class IccParams:
    M: float = 80.0
    m_L: float = 0.9
    m_R: float = 0.9
    K_b: np.ndarray = 100000.0
    D_b: np.ndarray = 600.0
    K_L: np.ndarray = 350.0
    K_R: np.ndarray = 350.0
    D_L_min: np.ndarray = 20.0
    D_L_max: np.ndarray = 200.0
    D_R_min: np.ndarray = 20.0
    D_R_max: np.ndarray = 200.0
    W_L: np.ndarray = field(default_factory=lambda: np.eye(3))
    W_R: np.ndarray = field(default_factory=lambda: np.eye(3))
    g: float = 9.81

    def __post_init__(self):
        for name in ('M', 'm_L', 'm_R'):
            if not float(getattr(self, name)) > 0:
                raise InvalidParameter('%s must be positive' % name)
        for name in ('K_b', 'D_b', 'K_L', 'K_R', 'D_L_min', 'D_L_max', 'D_R_min', 'D_R_max'):
            object.__setattr__(self, name, _diag3(getattr(self, name), name))
        for name in ('K_b', 'K_L', 'K_R'):
            if np.any(getattr(self, name) <= 0):
                raise InvalidParameter('%s diagonal must be positive' % name)
        if np.any(self.D_b < 0):
            raise InvalidParameter('D_b must be non-negative')
        for side in SIDES:
            lo, hi = self.bounds(side)
            if np.any(lo < 0) or np.any(lo >= hi):
                raise InvalidParameter('D_%s bounds must satisfy 0 <= min < max' % side)
        for name in ('W_L', 'W_R'):
            W = np.asarray(getattr(self, name), dtype=float)
            if W.shape != (3, 3) or not np.allclose(W, W.T) or np.linalg.eigvalsh(W).min() <= 0:
                raise InvalidParameter('%s must be symmetric positive definite' % name)
            object.__setattr__(self, name, W)

    def bounds(self, side):
        return (self.D_L_min, self.D_L_max) if side == 'L' else (self.D_R_min, self.D_R_max)

    def midpoint(self, side):
        lo, hi = self.bounds(side)
        return 0.5 * (lo + hi)

    @property
    def total_mass(self):
        return self.M + self.m_L + self.m_R


@dataclass(frozen=True, eq=False)
class IccState:
    x: np.ndarray
    D_L: np.ndarray
    D_R: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, 'x', as_vector(self.x, 18, 'x_s'))
        object.__setattr__(self, 'D_L', _diag3(self.D_L, 'D_L'))
        object.__setattr__(self, 'D_R', _diag3(self.D_R, 'D_R'))

    s_b = property(lambda self: self.x[0:3])
    sd_b = property(lambda self: self.x[3:6])
    s_L = property(lambda self: self.x[6:9])
    sd_L = property(lambda self: self.x[9:12])
    s_R = property(lambda self: self.x[12:15])
    sd_R = property(lambda self: self.x[15:18])

    @classmethod
    def from_absolute(cls, dp_b, dpd_b, dp_L, dpd_L, dp_R, dpd_R, dL, dLd, D_L, D_R):
        dp_b, dpd_b = np.asarray(dp_b, dtype=float), np.asarray(dpd_b, dtype=float)
        x = np.concatenate([dp_b - dL, dpd_b - dLd,
                            np.asarray(dp_L) - dp_b, np.asarray(dpd_L) - dpd_b,
                            np.asarray(dp_R) - dp_b, np.asarray(dpd_R) - dpd_b])
        return cls(x, D_L, D_R)


# ############################################
# Leg excitation
# ############################################

@dataclass(frozen=True, eq=False)
class LegExcitation:
    """Sampled leg-length variation ``dL`` with its first two derivatives (``N x 3`` each)."""
    t: np.ndarray
    L: np.ndarray
    Ld: np.ndarray
    Ldd: np.ndarray
    source: str = 'planned'

    @classmethod
    def sinusoid(cls, amplitude=0.02, frequency=1.0, duration=10.0, dt=1e-3, axis=2, phase=0.0):
        t = np.arange(int(round(duration / dt)) + 1) * dt
        w = 2 * np.pi * frequency
        L, Ld, Ldd = (np.zeros((t.shape[0], 3)) for _ in range(3))
        L[:, axis] = amplitude * np.sin(w * t + phase)
        Ld[:, axis] = amplitude * w * np.cos(w * t + phase)
        Ldd[:, axis] = -amplitude * w ** 2 * np.sin(w * t + phase)
        return cls(t, L, Ld, Ldd, 'planned')

    @classmethod
    def from_samples(cls, t, L, source='measured'):
        """Differentiate sampled ``dL`` with second-order central differences."""
        t = np.asarray(t, dtype=float)
        L = np.asarray(L, dtype=float).reshape(t.shape[0], 3)
        if np.any(np.diff(t) <= 0):
            raise NonMonotonicTime('excitation sample times must increase')
        Ld = np.gradient(L, t, axis=0, edge_order=2)
        Ldd = np.gradient(Ld, t, axis=0, edge_order=2)
        return cls(t, L, Ld, Ldd, source)

    @classmethod
    def still(cls, duration=10.0, dt=1e-3):
        t = np.arange(int(round(duration / dt)) + 1) * dt
        zero = np.zeros((t.shape[0], 3))
        return cls(t, zero, zero.copy(), zero.copy(), 'planned')

    @property
    def duration(self):
        return float(self.t[-1] - self.t[0])

    def at(self, t):
        """``(dL, dLd, dLdd)`` at time ``t`` by linear interpolation."""
        return tuple(np.array([np.interp(t, self.t, arr[:, i]) for i in range(3)])
                     for arr in (self.L, self.Ld, self.Ldd))

    def with_axis(self, axis, other):
        """Copy with ``axis`` taken from ``other`` (same time grid)."""
        arrays = [a.copy() for a in (self.L, self.Ld, self.Ldd)]
        for arr, src in zip(arrays, (other.L, other.Ld, other.Ldd)):
            arr[:, axis] = src[:, axis]
        return LegExcitation(self.t, *arrays, source=self.source)


# ############################################
# Coupled dynamics and energy terms
# ############################################

def system_matrix(params: IccParams, D_L, D_R):
    """The 18 x 18 ``A`` of ``xd_s = A x_s + b``."""
    D_L, D_R = _diag3(D_L, 'D_L'), _diag3(D_R, 'D_R')
    M = params.M
    C_L = 1.0 / params.m_L + 1.0 / M
    C_R = 1.0 / params.m_R + 1.0 / M
    diag = np.diag
    Z = np.zeros((3, 3))
    I = np.eye(3)
    K_b, D_b, K_L, K_R = diag(params.K_b), diag(params.D_b), diag(params.K_L), diag(params.K_R)
    DL, DR = diag(D_L), diag(D_R)
    return np.block([
        [Z, I, Z, Z, Z, Z],
        [-K_b / M, -D_b / M, K_L / M, DL / M, K_R / M, DR / M],
        [Z, Z, Z, I, Z, Z],
        [K_b / M, D_b / M, -K_L * C_L, -DL * C_L, -K_R / M, -DR / M],
        [Z, Z, Z, Z, Z, I],
        [K_b / M, D_b / M, -K_L / M, -DL / M, -K_R * C_R, -DR * C_R],
    ])


def forcing(Ldd):
    b = np.zeros(18)
    b[3:6] = -np.asarray(Ldd, dtype=float)
    return b


def icc_dynamics(params: IccParams, state: IccState, excitation):
    """``A x_s + b`` for one excitation sample ``(dL, dLd, dLdd)``."""
    Ldd = as_vector(excitation[2], 3, 'dLdd')
    return system_matrix(params, state.D_L, state.D_R) @ state.x + forcing(Ldd)


def _rates(params, x, D_L, D_R, Ldd):
    s_b, sd_b, s_L, sd_L, s_R, sd_R = x[0:3], x[3:6], x[6:9], x[9:12], x[12:15], x[15:18]
    F_L = params.K_L * s_L + D_L * sd_L
    F_R = params.K_R * s_R + D_R * sd_R
    body = -params.K_b * s_b - params.D_b * sd_b + F_L + F_R
    out = np.empty(18)
    out[0:3] = sd_b
    out[3:6] = body / params.M - Ldd
    out[6:9] = sd_L
    out[9:12] = -F_L / params.m_L - body / params.M
    out[12:15] = sd_R
    out[15:18] = -F_R / params.m_R - body / params.M
    return out


def locomotion_power(params: IccParams, state: IccState, Ld):
    """rho_1, the mechanical power the legs put into the body."""
    Ld = as_vector(Ld, 3, 'dLd')
    load = -params.K_b * state.s_b - params.D_b * state.sd_b + params.total_mass * params.g * UP
    return float(load @ Ld)


def stability_power(params: IccParams, state: IccState):
    """rho_2, weighted kinetic power of the loads relative to the body."""
    sd_L, sd_R = state.sd_L, state.sd_R
    return 0.5 * float(sd_L @ params.W_L @ sd_L + sd_R @ params.W_R @ sd_R)


def coupling_force(params: IccParams, dp_L, dp_R, dpd_L, dpd_R, D_L, D_R):
    """Force the two arm impedances apply to the body."""
    return (_diag3(D_L, 'D_L') * as_vector(dpd_L, 3, 'dpd_L')
            + _diag3(D_R, 'D_R') * as_vector(dpd_R, 3, 'dpd_R')
            + params.K_L * as_vector(dp_L, 3, 'dp_L')
            + params.K_R * as_vector(dp_R, 3, 'dp_R'))


# ############################################
# Bang-bang damping
# ############################################

class ZeroCrossingDetector:
    """Sign changes with hysteresis; the crossing time is interpolated between samples.

    A crossing is reported once the signal reaches the opposite side of the band,
    stamped with the last raw zero crossing seen on the way.
    """

    def __init__(self, hysteresis=HYSTERESIS):
        self.hysteresis = hysteresis
        self.sign = 0
        self._prev = None
        self._candidate = None

    def update(self, t, value):
        crossing = None
        if self._prev is not None:
            t0, v0 = self._prev
            if v0 * value < 0:
                self._candidate = t0 + (t - t0) * v0 / (v0 - value)
            elif value == 0.0 and v0 != 0.0:
                self._candidate = t
        if value > self.hysteresis:
            definite = 1
        elif value < -self.hysteresis:
            definite = -1
        else:
            definite = 0
        if definite:
            if self.sign and definite != self.sign:
                crossing = (t if self._candidate is None else self._candidate, definite)
            self.sign = definite
            self._candidate = None
        self._prev = (t, value)
        return crossing


class _AxisSwitch:

    def __init__(self, lo, hi, hysteresis):
        self.lo, self.hi = lo, hi
        self.rate = ZeroCrossingDetector(hysteresis)
        self.leg = ZeroCrossingDetector(hysteresis)
        self.pending = deque(maxlen=8)
        self.flips = []
        self.proxy = 0
        self.started = False

    def update(self, t, sd, Ld):
        crossing = self.rate.update(t, sd)
        if crossing is not None:
            self.pending.append(crossing)
        crossing = self.leg.update(t, Ld)
        if crossing is not None:
            t2 = crossing[0]
            for t1, direction in [c for c in self.pending if c[0] <= t2]:
                bisect.insort(self.flips, (2 * t2 - t1, direction))
                self.pending.remove((t1, direction))
        while self.flips and self.flips[0][0] <= t:
            _, self.proxy = self.flips.pop(0)
            self.started = True
        if not self.started:
            return 0.5 * (self.lo + self.hi)
        return self.hi if self.rate.sign * self.proxy < 0 else self.lo


class BangBangDamping:
    """Per-axis bang-bang damping for both arms, fed one sample at a time."""

    def __init__(self, params: IccParams, hysteresis=HYSTERESIS):
        self.params = params
        self.switches = {
            side: [_AxisSwitch(params.bounds(side)[0][i], params.bounds(side)[1][i], hysteresis)
                   for i in range(3)]
            for side in SIDES
        }
        self.t = None
        self.D = {side: params.midpoint(side).copy() for side in SIDES}

    def update(self, t, sd_L, sd_R, Ld):
        if self.t is not None and not t > self.t:
            raise NonMonotonicTime('damping update at t=%r after t=%r' % (t, self.t))
        self.t = t
        sd = {'L': as_vector(sd_L, 3, 'sd_L'), 'R': as_vector(sd_R, 3, 'sd_R')}
        Ld = as_vector(Ld, 3, 'dLd')
        for side in SIDES:
            for axis, switch in enumerate(self.switches[side]):
                value = switch.update(t, sd[side][axis], Ld[axis])
                if value != self.D[side][axis]:
                    self.D[side][axis] = value
                    logger.debug('D_%s[%d] -> %.1f at t=%.4f', side, axis, value, t)
                    damping_switched.send(sender=self.__class__, side=side, axis=axis, value=value, t=t)
        return self.D['L'].copy(), self.D['R'].copy()


class ConstantDamping:

    def __init__(self, D_L, D_R=None):
        self.D_L = _diag3(D_L, 'D_L')
        self.D_R = self.D_L.copy() if D_R is None else _diag3(D_R, 'D_R')

    def update(self, t, sd_L, sd_R, Ld):
        return self.D_L.copy(), self.D_R.copy()


def bang_bang_damping(params: IccParams, t, sd_L, sd_R, Ld, hysteresis=HYSTERESIS):
    """Damping schedule for whole histories (``N``, ``N x 3``...); returns ``(D_L, D_R)`` as ``N x 3``."""
    t = np.asarray(t, dtype=float)
    controller = BangBangDamping(params, hysteresis)
    D_L, D_R = np.zeros((t.shape[0], 3)), np.zeros((t.shape[0], 3))
    for k in range(t.shape[0]):
        D_L[k], D_R[k] = controller.update(t[k], sd_L[k], sd_R[k], Ld[k])
    return D_L, D_R


# ############################################
# Rollouts
# ############################################

@dataclass(frozen=True, eq=False)
class IccRollout:
    t: np.ndarray
    x: np.ndarray
    D_L: np.ndarray
    D_R: np.ndarray
    rho1: np.ndarray
    rho2: np.ndarray
    E1: np.ndarray
    E2: np.ndarray

    @property
    def E(self):
        return self.E1 + self.E2

    def energy(self, start=None, stop=None):
        """``integral (rho1 + rho2) dt`` over ``[start, stop]``."""
        mask = np.ones(self.t.shape[0], dtype=bool)
        if start is not None:
            mask &= self.t >= start - 1e-12
        if stop is not None:
            mask &= self.t <= stop + 1e-12
        return float(integrate.trapezoid(self.rho1[mask] + self.rho2[mask], self.t[mask]))

    def cycle_residual(self, period):
        """``|x(T_end) - x(T_end - period)| / max |x|`` over the last period."""
        k = int(round(period / (self.t[1] - self.t[0])))
        window = self.x[-k - 1:]
        scale = np.max(np.linalg.norm(window, axis=1))
        return float(np.linalg.norm(self.x[-1] - self.x[-k - 1]) / scale) if scale > 0 else 0.0


class IccModel:
    """Fixed-step RK4 rollout of the coupled system, damping held over each step."""

    def __init__(self, params: IccParams, dt=1e-3):
        if not dt > 0:
            raise InvalidParameter('dt must be positive')
        self.params = params
        self.dt = dt

    def step(self, x, D_L, D_R, excitation, t):
        p, h = self.params, self.dt
        Ldd0 = excitation.at(t)[2]
        Ldd1 = excitation.at(t + 0.5 * h)[2]
        Ldd2 = excitation.at(t + h)[2]
        k1 = _rates(p, x, D_L, D_R, Ldd0)
        k2 = _rates(p, x + 0.5 * h * k1, D_L, D_R, Ldd1)
        k3 = _rates(p, x + 0.5 * h * k2, D_L, D_R, Ldd1)
        k4 = _rates(p, x + h * k3, D_L, D_R, Ldd2)
        return x + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)

    def rollout(self, excitation: LegExcitation, controller=None, x0=None, duration=None):
        p = self.params
        controller = controller or BangBangDamping(p)
        duration = excitation.duration if duration is None else min(duration, excitation.duration)
        steps = int(round(duration / self.dt))
        t = excitation.t[0] + np.arange(steps + 1) * self.dt
        x = np.zeros((steps + 1, 18))
        if x0 is not None:
            x[0] = as_vector(x0, 18, 'x0')
        D_L, D_R = np.zeros((steps + 1, 3)), np.zeros((steps + 1, 3))
        rho1, rho2 = np.zeros(steps + 1), np.zeros(steps + 1)
        for k in range(steps + 1):
            _, Ld, _ = excitation.at(t[k])
            D_L[k], D_R[k] = controller.update(t[k], x[k, 9:12], x[k, 15:18], Ld)
            state = IccState(x[k], D_L[k], D_R[k])
            rho1[k] = locomotion_power(p, state, Ld)
            rho2[k] = stability_power(p, state)
            if k < steps:
                x[k + 1] = self.step(x[k], D_L[k], D_R[k], excitation, t[k])
        require_finite('ICC rollout', x)
        E1 = integrate.cumulative_trapezoid(rho1, t, initial=0.0)
        E2 = integrate.cumulative_trapezoid(rho2, t, initial=0.0)
        return IccRollout(t, x, D_L, D_R, rho1, rho2, E1, E2)


@dataclass(frozen=True)
class BenchmarkRow:
    label: str
    D: Optional[float]
    E: float
    E1: float
    E2: float


def damping_benchmark(params: IccParams, excitation: Optional[LegExcitation] = None,
                      grid: Sequence[float] = tuple(range(20, 201, 20)),
                      warmup=10.0, window=5.0, dt=1e-3):
    """Cost of bang-bang damping against constant dampings on one excitation.

    Costs are integrated over ``[warmup, warmup + window]`` so that start-up
    transients are excluded; pick ``window`` as a whole number of excitation periods.
    """
    excitation = excitation or LegExcitation.sinusoid(duration=warmup + window, dt=dt)
    if excitation.duration < warmup + window - 1e-9:
        raise DimensionError('excitation is shorter than warm-up plus window')
    model = IccModel(params, dt)
    start, stop = excitation.t[0] + warmup, excitation.t[0] + warmup + window
    rows = []
    for label, D, controller in [('bang-bang', None, BangBangDamping(params))] + [
            ('constant', float(D), ConstantDamping(D)) for D in grid]:
        run = model.rollout(excitation, controller, duration=warmup + window)
        mask = (run.t >= start - 1e-12) & (run.t <= stop + 1e-12)
        E1 = float(integrate.trapezoid(run.rho1[mask], run.t[mask]))
        E2 = float(integrate.trapezoid(run.rho2[mask], run.t[mask]))
        rows.append(BenchmarkRow(label, D, E1 + E2, E1, E2))
        logger.info('damping benchmark %s%s: E=%.6g J', label, '' if D is None else ' D=%g' % D, E1 + E2)
    return rows

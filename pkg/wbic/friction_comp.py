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

"""Model-free friction compensation.

Per direction, a friction magnitude ``F_f`` is integrated from the tracking error
``Fd_f = k_P sigma (ed + k_lambda e)`` and applied as ``tau_f = J' sigma F_f``.
"""

import logging

import numpy as np

from .exceptions import InvalidParameter
from .utils import as_vector

logger = logging.getLogger('wbic')

EPSILON_V = 1e-4
F_MAX = 30.0


def signum_activation(xd, u, eps=EPSILON_V):
    """Sign of the velocity, or of the command when the velocity is within ``eps`` of zero."""
    xd = np.asarray(xd, dtype=float)
    u = np.asarray(u, dtype=float)
    moving = np.abs(xd) > eps
    pushed = np.abs(u) > eps
    sigma = np.where(moving, np.sign(xd), np.where(pushed, np.sign(u), 0.0))
    return sigma if sigma.ndim else float(sigma)


class FrictionCompensator:
    """Adaptive friction magnitudes for ``size`` task directions."""

    def __init__(self, size, k_P=100.0, k_lambda=10.0, F_max=F_MAX, eps=EPSILON_V):
        self.size = size
        self.k_P = np.broadcast_to(np.asarray(k_P, dtype=float), (size,)).copy()
        self.k_lambda = np.broadcast_to(np.asarray(k_lambda, dtype=float), (size,)).copy()
        if np.any(self.k_P < 0) or np.any(self.k_lambda < 0):
            raise InvalidParameter('friction compensation gains must be non-negative')
        if not F_max > 0:
            raise InvalidParameter('F_max must be positive')
        self.F_max = F_max
        self.eps = eps
        self.reset()

    def reset(self):
        self.F_f = np.zeros(self.size)
        self.sigma = np.zeros(self.size)

    def activate(self, xd, u):
        self.sigma = np.atleast_1d(signum_activation(as_vector(xd, self.size, 'xd'),
                                                     as_vector(u, self.size, 'u'), self.eps))
        return self.sigma.copy()

    def update(self, e, ed, dt):
        """Integrate one step; ``activate`` sets the sign pattern first."""
        e = as_vector(e, self.size, 'tracking error')
        ed = as_vector(ed, self.size, 'tracking error rate')
        if not dt > 0:
            raise InvalidParameter('dt must be positive')
        rate = self.k_P * self.sigma * (ed + self.k_lambda * e)
        self.F_f = np.clip(self.F_f + dt * rate, -self.F_max, self.F_max)
        return self.F_f.copy()

    def torques(self, J):
        return to_joint_torques(J, self.sigma, self.F_f)


def to_joint_torques(J, sigma, F_f):
    """``J' sigma F_f``"""
    J = np.atleast_2d(np.asarray(J, dtype=float))
    sigma = np.atleast_1d(np.asarray(sigma, dtype=float))
    F_f = np.atleast_1d(np.asarray(F_f, dtype=float))
    return J.T @ (sigma * F_f)

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

"""Dense convex QP::

    minimize    1/2 x' H x + g' x
    subject to  A x  = b
                G x <= h

Equalities are eliminated through a null-space basis; the reduced problem is
solved with the Goldfarb-Idnani dual active-set method (``quadprog``).
"""

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np
import quadprog
from scipy import linalg, optimize

from .exceptions import DimensionError, InfeasibleProblem, SolverNotConverged

logger = logging.getLogger('wbic')

MAX_ITERATIONS = 200
REGULARIZATION = 1e-9
FEASIBILITY_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class QpProblem:
    H: np.ndarray
    g: np.ndarray
    A: np.ndarray
    b: np.ndarray
    G: np.ndarray
    h: np.ndarray
    families: Tuple[str, ...] = ()

    def __post_init__(self):
        n = np.asarray(self.g).shape[0]
        H = np.asarray(self.H, dtype=float)
        A = np.asarray(self.A, dtype=float).reshape(-1, n)
        G = np.asarray(self.G, dtype=float).reshape(-1, n)
        b = np.asarray(self.b, dtype=float).ravel()
        h = np.asarray(self.h, dtype=float).ravel()
        if H.shape != (n, n):
            raise DimensionError('H is %s, expected (%d, %d)' % (H.shape, n, n))
        if A.shape[0] != b.shape[0] or G.shape[0] != h.shape[0]:
            raise DimensionError('constraint matrices and right-hand sides disagree')
        families = tuple(self.families) or ('inequality',) * G.shape[0]
        if len(families) != G.shape[0]:
            raise DimensionError('%d family labels for %d inequality rows' % (len(families), G.shape[0]))
        for name, value in (('H', 0.5 * (H + H.T)), ('g', np.asarray(self.g, dtype=float)),
                            ('A', A), ('b', b), ('G', G), ('h', h), ('families', families)):
            object.__setattr__(self, name, value)

    @property
    def size(self):
        return self.g.shape[0]

    def objective(self, x):
        return 0.5 * float(x @ self.H @ x) + float(self.g @ x)


@dataclass(frozen=True, eq=False)
class QpResult:
    x: np.ndarray
    iterations: int
    equality_residual: float
    kkt_residual: float
    active: Tuple[int, ...]
    multipliers: np.ndarray
    warm: bool = False
    objective: float = field(default=0.0)

    @property
    def active_size(self):
        return len(self.active)


class ActiveSetQP:
    """One solver per control thread; remembers the last active set for warm starts."""

    def __init__(self, max_iterations=MAX_ITERATIONS, regularization=REGULARIZATION, tol=FEASIBILITY_TOL):
        self.max_iterations = max_iterations
        self.regularization = regularization
        self.tol = tol
        self.active = ()

    def reset(self):
        self.active = ()

    def solve(self, problem: QpProblem, warm_start: Optional[Sequence[int]] = None) -> QpResult:
        """Solve ``problem``; ``warm_start`` overrides the remembered active set."""
        x0, Z = self._eliminate(problem)
        Hr = Z.T @ problem.H @ Z + self.regularization * np.eye(Z.shape[1])
        gr = Z.T @ (problem.H @ x0 + problem.g)
        # reduced inequalities C y <= d
        C = problem.G @ Z
        d = problem.h - problem.G @ x0

        guess = self.active if warm_start is None else tuple(warm_start)
        attempt = self._try_active_set(Hr, gr, C, d, guess) if guess else None
        if attempt is not None:
            y, u, active = attempt
            iterations, warm = 0, True
        else:
            y, u, active, iterations = self._dual_active_set(Hr, gr, C, d, problem)
            warm = False

        x = x0 + Z @ y
        multipliers = np.zeros(problem.G.shape[0])
        multipliers[list(active)] = u
        eq_res = float(np.max(np.abs(problem.A @ x - problem.b), initial=0.0))
        kkt = self._kkt_residual(problem, x, multipliers)
        self.active = tuple(active)
        logger.debug('qp solved: %d iterations, %d active, warm=%s, kkt=%.2e', iterations, len(active), warm, kkt)
        return QpResult(x, iterations, eq_res, kkt, tuple(active), multipliers, warm, problem.objective(x))

    # ############################################
    # Internals
    # ############################################

    def _eliminate(self, problem):
        n = problem.size
        if problem.A.shape[0] == 0:
            return np.zeros(n), np.eye(n)
        x0, *_ = linalg.lstsq(problem.A, problem.b)
        residual = np.max(np.abs(problem.A @ x0 - problem.b))
        if residual > 1e-8 * (1.0 + np.max(np.abs(problem.b))):
            raise InfeasibleProblem('equality', 'rows are inconsistent (residual %.3e)' % residual)
        return x0, linalg.null_space(problem.A)

    def _try_active_set(self, Hr, gr, C, d, active):
        m = C.shape[0]
        active = tuple(i for i in active if i < m)
        if not active:
            return None
        N = C[list(active)]
        k = len(active)
        kkt = np.block([[Hr, N.T], [N, np.zeros((k, k))]])
        try:
            sol = np.linalg.solve(kkt, np.concatenate([-gr, d[list(active)]]))
        except np.linalg.LinAlgError:
            return None
        y, u = sol[:Hr.shape[0]], sol[Hr.shape[0]:]
        scale = 1.0 + np.max(np.abs(d), initial=0.0)
        if np.any(u < -self.tol) or np.any(C @ y - d > self.tol * scale):
            return None
        return y, np.maximum(u, 0.0), active

    def _dual_active_set(self, Hr, gr, C, d, problem):
        if Hr.shape[0] == 0:
            y = np.zeros(0)
            if np.any(d < -self.tol * (1.0 + np.max(np.abs(d), initial=0.0))):
                raise InfeasibleProblem(self._diagnose(problem), 'equalities leave no freedom')
            return y, np.zeros(0), (), 0
        try:
            if C.shape[0]:
                y, _, _, iterations, lagrangian, iact = quadprog.solve_qp(
                    Hr, -gr, np.ascontiguousarray(-C.T), -d, 0)
            else:
                y, _, _, iterations, lagrangian, iact = quadprog.solve_qp(Hr, -gr)
        except ValueError as e:
            if 'inconsistent' in str(e):
                raise InfeasibleProblem(self._diagnose(problem), str(e))
            raise SolverNotConverged(0, float('inf'))
        count = int(iterations[0])
        active = tuple(sorted(int(i) - 1 for i in iact if i > 0))
        if count > self.max_iterations:
            residual = float(np.max(C @ y - d, initial=0.0))
            raise SolverNotConverged(count, residual, active)
        return y, lagrangian[list(active)], active, count

    def _diagnose(self, problem):
        """Name the first constraint family that cannot be met together with the equalities."""
        families = list(dict.fromkeys(problem.families))
        for family in families:
            rows = [i for i, f in enumerate(problem.families) if f == family]
            if not self._feasible(problem, rows):
                return family
        return '+'.join(families) if families else 'inequality'

    def _feasible(self, problem, rows):
        n = problem.size
        result = optimize.linprog(
            np.zeros(n),
            A_ub=problem.G[rows] if rows else None, b_ub=problem.h[rows] if rows else None,
            A_eq=problem.A if problem.A.shape[0] else None, b_eq=problem.b if problem.A.shape[0] else None,
            bounds=[(None, None)] * n, method='highs')
        return result.status != 2

    @staticmethod
    def _kkt_residual(problem, x, multipliers):
        stationarity = problem.H @ x + problem.g + problem.G.T @ multipliers
        if problem.A.shape[0]:
            lam, *_ = linalg.lstsq(problem.A.T, -stationarity)
            stationarity = stationarity + problem.A.T @ lam
        return float(np.max(np.abs(stationarity), initial=0.0))


def solve_qp(H, g, A=None, b=None, G=None, h=None, families=(), solver=None):
    n = np.asarray(g).shape[0]
    problem = QpProblem(H, g,
                        np.zeros((0, n)) if A is None else A, np.zeros(0) if b is None else b,
                        np.zeros((0, n)) if G is None else G, np.zeros(0) if h is None else h,
                        families)
    return (solver or ActiveSetQP()).solve(problem)

class ModelError(Exception):
    pass


class DimensionError(ValueError):
    pass


class UnknownFrame(KeyError):
    pass


class NonFiniteInput(ValueError):
    pass


class DynamicsError(Exception):
    pass


class NonMonotonicTime(ValueError):
    pass


class InfeasibleProblem(Exception):
    """The QP has no point satisfying every constraint.

    ``family`` names the constraint group that could not be met
    (``equality``, ``friction_cone``, ``torque_bounds``, ``force_bounds``).
    """

    def __init__(self, family, detail=''):
        self.family = family
        self.detail = detail
        super().__init__('infeasible %s constraints%s' % (family, ': ' + detail if detail else ''))


class SolverNotConverged(Exception):

    def __init__(self, iterations, residual, active_set=()):
        self.iterations = iterations
        self.residual = residual
        self.active_set = tuple(active_set)
        super().__init__(
            'active-set solver stopped after %d iterations (residual %.3e, %d active)'
            % (iterations, residual, len(self.active_set)))


class SimulationFault(Exception):
    pass


class ExperimentConfigError(Exception):

    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        super().__init__('; '.join(str(d) for d in self.diagnostics))


class InvalidParameter(ValueError):
    pass

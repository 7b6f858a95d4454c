import numpy as np

from wbic.dynamics import Body, GeneralizedState, Joint, KinematicTree
from wbic.robot import DEFAULT_MODEL, load_model, parse_model


def free_body(mass=10.0, inertia=(0.1, 0.2, 0.3)):
    """A single planar body with no actuated joints."""
    return KinematicTree([Body('box', mass, np.zeros(3), np.diag(inertia))],
                         [Joint('base', 'planar', None, 'box')])


def robot(gravity=None):
    if gravity is None:
        return load_model()
    with open(DEFAULT_MODEL, encoding='utf-8') as handle:
        text = handle.read().replace('gravity = 9.81', 'gravity = %r' % gravity)
    return parse_model(text, '<zero-g>')


def random_state(tree, rng, speed=1.0):
    q = tree.neutral_configuration()
    q[:3] = rng.uniform(-0.3, 0.3, 3)
    q[3:5] = rng.uniform(0.05, 0.25, 2)
    q[5:] = rng.uniform(-np.pi, np.pi, tree.nq - 5)
    return GeneralizedState(q, speed * rng.normal(size=tree.nv))


def standing_state(tree, extension=0.15):
    """Wheels resting on z = 0 with both legs at ``extension``."""
    q = tree.neutral_configuration()
    q[1] = 0.45 + extension
    q[3] = q[4] = extension
    return GeneralizedState(q, np.zeros(tree.nv))

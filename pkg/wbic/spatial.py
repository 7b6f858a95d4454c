"""Spatial vector algebra, angular-first ordering ``[w; v]``.

Plücker transforms map motion vectors from a parent frame into a child frame:
``X = [[E, 0], [-E skew(p), E]]`` where ``E`` rotates parent coordinates into child
coordinates and ``p`` is the child origin expressed in the parent frame.
"""

import numpy as np
from scipy.spatial.transform import Rotation


def skew(v):
    x, y, z = v
    return np.array([[0.0, -z, y],
                     [z, 0.0, -x],
                     [-y, x, 0.0]])


def plucker(E, p):
    X = np.zeros((6, 6))
    X[:3, :3] = E
    X[3:, 3:] = E
    X[3:, :3] = -E @ skew(p)
    return X


def xlt(p):
    return plucker(np.eye(3), p)


def rot(E):
    return plucker(E, np.zeros(3))


def axis_rotation(axis, angle):
    """Coordinate transform (child <- parent) for a rotation of ``angle`` about ``axis``."""
    return Rotation.from_rotvec(np.asarray(axis, dtype=float) * angle).as_matrix().T


def inverse(X):
    E = X[:3, :3]
    Xi = np.zeros((6, 6))
    Xi[:3, :3] = E.T
    Xi[3:, 3:] = E.T
    Xi[3:, :3] = X[3:, :3].T
    return Xi


def decompose(X):
    """Return ``(E, p)`` of a Plücker transform."""
    E = X[:3, :3]
    px = -E.T @ X[3:, :3]
    return E, np.array([px[2, 1], px[0, 2], px[1, 0]])


def crm(v):
    w = skew(v[:3])
    out = np.zeros((6, 6))
    out[:3, :3] = w
    out[3:, 3:] = w
    out[3:, :3] = skew(v[3:])
    return out


def crf(v):
    return -crm(v).T


def inertia(mass, com, rotational):
    """Spatial inertia about the body origin from mass, centre of mass and inertia about the CoM."""
    c = skew(com)
    out = np.zeros((6, 6))
    out[:3, :3] = rotational + mass * c @ c.T
    out[:3, 3:] = mass * c
    out[3:, :3] = mass * c.T
    out[3:, 3:] = mass * np.eye(3)
    return out


def point_velocity(v, r):
    """Linear velocity of the body-fixed point ``r`` given the spatial velocity ``v`` (body coordinates)."""
    return v[3:] + np.cross(v[:3], r)


def point_acceleration(a, v, r):
    """Classical acceleration of body-fixed point ``r`` from spatial acceleration and velocity."""
    w = v[:3]
    return a[3:] + np.cross(a[:3], r) + np.cross(w, v[3:] + np.cross(w, r))

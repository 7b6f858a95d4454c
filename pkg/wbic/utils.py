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

import numpy as np
from django.conf import settings

from .exceptions import DimensionError, NonFiniteInput


def get_custom_setting(name, default=None):
    return getattr(settings, name, default)


def as_vector(value, size=None, name='vector'):
    """Return ``value`` as a 1-D float array, checking length and finiteness."""
    vec = np.atleast_1d(np.asarray(value, dtype=float)).ravel()
    if size is not None and vec.shape[0] != size:
        raise DimensionError('%s has length %d, expected %d' % (name, vec.shape[0], size))
    if not np.all(np.isfinite(vec)):
        raise NonFiniteInput('%s contains non-finite values' % name)
    return vec


def require_finite(name, *arrays):
    for arr in arrays:
        if not np.all(np.isfinite(arr)):
            raise NonFiniteInput('%s contains non-finite values' % name)


def diagonal(value, size, name='matrix'):
    """Accept a scalar, a vector of diagonal entries or a square matrix."""
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        return np.eye(size) * float(arr)
    if arr.ndim == 1:
        if arr.shape[0] != size:
            raise DimensionError('%s diagonal has length %d, expected %d' % (name, arr.shape[0], size))
        return np.diag(arr)
    if arr.shape != (size, size):
        raise DimensionError('%s has shape %s, expected (%d, %d)' % (name, arr.shape, size, size))
    return arr.copy()


def unit(vec, name='vector'):
    vec = np.asarray(vec, dtype=float)
    norm = np.linalg.norm(vec)
    if not np.isfinite(norm) or norm == 0.0:
        raise NonFiniteInput('%s cannot be normalised' % name)
    return vec / norm

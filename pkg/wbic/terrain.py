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

"""Height-field terrains ``z = h(x)`` for the sagittal plane."""

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, Sequence, Tuple

import numpy as np

from .exceptions import InvalidParameter

logger = logging.getLogger('wbic')

TERRAIN_KINDS = ('flat', 'ramp', 'cobblestone', 'wave', 'composite')
MAX_SLOPE = np.tan(0.3)
SLOPE_ANGLE = 0.22
BLEND = 0.2

# tyre rolling-resistance coefficient per surface
ROLLING = {
    'flat': 0.06,
    'ramp': 0.08,
    'cobblestone': 0.12,
    'wave': 0.08,
}


def _ramp_integral(x, start, width):
    """Integral of ``clip((x - start) / width, 0, 1)``."""
    u = np.clip(x - start, 0.0, width)
    return u * u / (2.0 * width) + np.maximum(x - start - width, 0.0)


@dataclass(frozen=True, eq=False)
class TerrainProfile:
    kind: str
    params: Dict
    height_fn: Callable = field(repr=False)
    slope_fn: Callable = field(repr=False)
    region: Tuple[float, float] = (-np.inf, np.inf)
    pieces: Tuple['TerrainProfile', ...] = ()

    def height(self, x):
        return self.height_fn(np.asarray(x, dtype=float))

    def slope(self, x):
        return self.slope_fn(np.asarray(x, dtype=float))

    def normal(self, x):
        s = float(self.slope(x))
        return np.array([-s, 0.0, 1.0]) / np.hypot(1.0, s)

    def tangent(self, x):
        s = float(self.slope(x))
        return np.array([1.0, 0.0, s]) / np.hypot(1.0, s)

    def angle(self, x):
        return np.arctan(self.slope(x))

    def rolling_coefficient(self, x):
        if self.kind != 'composite':
            return ROLLING[self.kind]
        inside = [ROLLING[p.kind] for p in self.pieces if p.region[0] <= x <= p.region[1]]
        return max(inside) if inside else ROLLING['flat']

    def sample(self, start=None, stop=None, step=0.005):
        start = self.params.get('start', 0.0) - 1.0 if start is None else start
        stop = self.params.get('stop', start + 10.0) + 1.0 if stop is None else stop
        xs = np.arange(start, stop + step / 2, step)
        return xs, self.height(xs), self.slope(xs)

    def max_slope(self, start=None, stop=None):
        _, _, slopes = self.sample(start, stop)
        return float(np.max(np.abs(slopes)))

    def height_range(self, start=None, stop=None, step=0.005):
        _, heights, _ = self.sample(start, stop, step)
        return float(np.max(heights) - np.min(heights))


def _flat(**params):
    return TerrainProfile('flat', params, lambda x: np.zeros_like(x), lambda x: np.zeros_like(x))


def _ramp(start=1.0, rise=0.2, angle=SLOPE_ANGLE, blend=BLEND, **params):
    """Straight incline of ``angle`` gaining ``rise`` (negative descends), corners rounded over ``blend``."""
    if not 0 < angle < np.pi / 2:
        raise InvalidParameter('ramp angle must lie in (0, pi/2)')
    grade = np.sign(rise) * np.tan(angle)
    stop = start + abs(rise) / np.tan(angle)
    if stop - start < blend:
        raise InvalidParameter('ramp is shorter than its corner blend')
    a, c = start - blend / 2, stop - blend / 2

    def height(x):
        return grade * (_ramp_integral(x, a, blend) - _ramp_integral(x, c, blend))

    def slope(x):
        return grade * (np.clip((x - a) / blend, 0, 1) - np.clip((x - c) / blend, 0, 1))

    params.update(start=start, stop=stop, rise=rise, angle=angle, blend=blend)
    return TerrainProfile('ramp', params, height, slope, (a, stop + blend / 2))


def _cobblestone(start=2.0, length=1.2, spacing=0.15, height=0.03, seed=0, **params):
    """Raised-cosine stones; the tallest reaches the cap, which keeps the steepest flank under ``MAX_SLOPE``."""
    cap = min(height, MAX_SLOPE * spacing / np.pi)
    count = int(np.floor(length / spacing))
    if count < 1:
        raise InvalidParameter('cobblestone stretch is shorter than one stone')
    rng = np.random.default_rng(seed)
    amplitudes = rng.uniform(0.5, 1.0, count) * cap
    amplitudes[np.argmax(amplitudes)] = cap
    stop = start + count * spacing

    def locate(x):
        idx = np.floor((x - start) / spacing).astype(int)
        inside = (x >= start) & (x < stop)
        idx = np.clip(idx, 0, count - 1)
        phase = 2 * np.pi * (x - start - idx * spacing) / spacing
        return inside, amplitudes[idx], phase

    def h(x):
        inside, amp, phase = locate(x)
        return np.where(inside, 0.5 * amp * (1 - np.cos(phase)), 0.0)

    def dh(x):
        inside, amp, phase = locate(x)
        return np.where(inside, amp * np.pi / spacing * np.sin(phase), 0.0)

    params.update(start=start, stop=stop, spacing=spacing, height=cap, seed=seed)
    return TerrainProfile('cobblestone', params, h, dh, (start, stop))


def _wave(start=1.0, amplitude=0.1, angle=SLOPE_ANGLE, periods=2, **params):
    """``A (1 - cos(2 pi (x - start) / wavelength))`` with peak slope ``tan(angle)``."""
    wavelength = 2 * np.pi * amplitude / np.tan(angle)
    stop = start + periods * wavelength
    k = 2 * np.pi / wavelength

    def h(x):
        inside = (x >= start) & (x <= stop)
        return np.where(inside, amplitude * (1 - np.cos(k * (x - start))), 0.0)

    def dh(x):
        inside = (x >= start) & (x <= stop)
        return np.where(inside, amplitude * k * np.sin(k * (x - start)), 0.0)

    params.update(start=start, stop=stop, amplitude=amplitude, angle=angle, wavelength=wavelength)
    return TerrainProfile('wave', params, h, dh, (start, stop))


def composite(pieces: Sequence[TerrainProfile], **params):
    """Sum of pieces; ramps keep their final height so later pieces stack on top."""
    pieces = tuple(pieces)
    if not pieces:
        raise InvalidParameter('a composite terrain needs at least one piece')

    def h(x):
        return sum(p.height(x) for p in pieces)

    def dh(x):
        return sum(p.slope(x) for p in pieces)

    params.setdefault('start', min(p.params.get('start', 0.0) for p in pieces))
    params.setdefault('stop', max(p.params.get('stop', 0.0) for p in pieces))
    return TerrainProfile('composite', params, h, dh, (params['start'], params['stop']), pieces)


def terrain_one(seed=0, lead_in=1.0, height=0.2, angle=SLOPE_ANGLE, plateau=1.2, spacing=0.15):
    """Uphill ramp, cobblestone plateau, downhill ramp; peak-to-valley equals ``height``."""
    stone = min(0.03, MAX_SLOPE * spacing / np.pi)
    rise = height - stone
    up = _ramp(start=lead_in, rise=rise, angle=angle)
    top = up.params['stop'] + BLEND
    stones = _cobblestone(start=top, length=plateau, spacing=spacing, height=stone, seed=seed)
    down = _ramp(start=stones.params['stop'] + BLEND, rise=-rise, angle=angle)
    return composite([up, stones, down], name='terrain1', seed=seed)


def terrain_two(lead_in=1.0, amplitude=0.1, angle=SLOPE_ANGLE, periods=2):
    wave = _wave(start=lead_in, amplitude=amplitude, angle=angle, periods=periods)
    return composite([wave], name='terrain2')


_BUILDERS = {
    'flat': _flat,
    'ramp': _ramp,
    'cobblestone': _cobblestone,
    'wave': _wave,
}


def make_terrain(kind, **params) -> TerrainProfile:
    """Build a profile; ``composite`` takes ``pieces`` (list of ``(kind, params)``) or ``preset``."""
    if kind == 'composite':
        preset = params.pop('preset', None)
        if preset == 'terrain1':
            return terrain_one(**params)
        if preset == 'terrain2':
            return terrain_two(**params)
        if preset is not None:
            raise InvalidParameter('unknown terrain preset "%s"' % preset)
        pieces = [make_terrain(k, **dict(p)) for k, p in params.pop('pieces', ())]
        return composite(pieces, **params)
    if kind not in _BUILDERS:
        raise InvalidParameter('unknown terrain kind "%s"; expected one of %s' % (kind, ', '.join(TERRAIN_KINDS)))
    profile = _BUILDERS[kind](**params)
    logger.debug('terrain %s built with %s', kind, profile.params)
    return profile

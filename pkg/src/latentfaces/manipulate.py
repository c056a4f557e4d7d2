"""Candidate-coordinate generators: class means, PC1 transitions, component
substitution, stepped grid sweeps, and one-at-a-time component swaps."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple

import numpy as np

from .errors import GridTooLargeError, InsufficientDataError, InvalidInputError
from .latentpca import LATENT_DIM, _as_vector

GRID_CAP = 10000
DEFAULT_STEPS = 9


def class_mean_coords(coords_by_label: dict) -> dict:
    """Arithmetic mean coordinates per label."""
    out = {}
    for label, coords in coords_by_label.items():
        m = np.asarray(coords, dtype=np.float64)
        if m.size == 0:
            raise InsufficientDataError(f"label {label!r} has no samples")
        out[label] = m.reshape(-1, LATENT_DIM).mean(axis=0)
    return out


def pc1_transition(from_mean, to_mean, num_steps: int) -> list[np.ndarray]:
    """Interpolate only the first component from one class mean toward another.

    Step j carries PC1 value (1-t)*from[0] + t*to[0] with t = j/(num_steps-1);
    every other component stays at the from-mean value.
    """
    if num_steps < 2:
        raise InvalidInputError(f"num_steps must be >= 2, got {num_steps}")
    a = _as_vector(from_mean)
    b = _as_vector(to_mean)
    out = []
    for j in range(num_steps):
        t = j / (num_steps - 1)
        c = a.copy()
        c[0] = (1.0 - t) * a[0] + t * b[0]
        out.append(c)
    return out


def substitute_except(original, reference, keep_indices: Iterable[int] = (0,)) -> np.ndarray:
    """Replace every component with the reference value except the kept indices."""
    keep = set(keep_indices)
    for k in keep:
        if not (0 <= int(k) < LATENT_DIM):
            raise InvalidInputError(f"keep index {k} outside [0, {LATENT_DIM - 1}]")
    orig = _as_vector(original)
    ref = _as_vector(reference)
    out = ref.copy()
    for k in keep:
        out[int(k)] = orig[int(k)]
    return out


@dataclass(frozen=True)
class SweepSpec:
    """A stepped grid over chosen components: same step count per index."""

    component_indices: list[int]
    ranges: list[tuple[float, float]]
    steps_per_index: int = DEFAULT_STEPS

    def __post_init__(self):
        idx = [int(i) for i in self.component_indices]
        if len(set(idx)) != len(idx):
            raise InvalidInputError("component indices must be distinct")
        for i in idx:
            if not (0 <= i < LATENT_DIM):
                raise InvalidInputError(f"component index {i} outside [0, {LATENT_DIM - 1}]")
        if len(self.ranges) != len(idx):
            raise InvalidInputError("one (low, high) range per index required")
        for lo, hi in self.ranges:
            if not (lo < hi):
                raise InvalidInputError(f"range ({lo}, {hi}) must satisfy low < high")
        if self.steps_per_index < 2:
            raise InvalidInputError("steps_per_index must be >= 2")
        if self.grid_size() > GRID_CAP:
            raise GridTooLargeError(self.grid_size(), GRID_CAP)

    def grid_size(self) -> int:
        return self.steps_per_index ** len(self.component_indices) if self.component_indices else 1

    def to_dict(self) -> dict:
        return {
            "indices": [int(i) for i in self.component_indices],
            "ranges": [[float(lo), float(hi)] for lo, hi in self.ranges],
            "steps": int(self.steps_per_index),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SweepSpec":
        try:
            return cls(
                component_indices=[int(i) for i in data["indices"]],
                ranges=[(float(lo), float(hi)) for lo, hi in data["ranges"]],
                steps_per_index=int(data["steps"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidInputError(f"malformed sweep spec: {exc}") from exc


class SweepCandidate(NamedTuple):
    coords: np.ndarray
    grid_position: tuple[int, ...]


def sweep(base, spec: SweepSpec) -> list[SweepCandidate]:
    """Cartesian product over the spec's indices, row-major in ascending index.

    Each swept index takes steps evenly spaced and inclusive of both range
    ends; unswept components stay at the base values.
    """
    base_v = _as_vector(base)
    order = np.argsort(spec.component_indices, kind="stable")
    indices = [spec.component_indices[i] for i in order]
    values = [
        np.linspace(spec.ranges[i][0], spec.ranges[i][1], spec.steps_per_index)
        for i in order
    ]
    out = []
    for pos in itertools.product(*(range(spec.steps_per_index) for _ in indices)):
        c = base_v.copy()
        for axis, step in enumerate(pos):
            c[indices[axis]] = values[axis][step]
        out.append(SweepCandidate(coords=c, grid_position=pos))
    return out


def component_ranges(coords) -> np.ndarray:
    """Per-component (min, max) over a population of coordinates.

    Accepts a flat array/list of coordinate vectors or a label->coords map,
    which is flattened across labels. Returns a (64, 2) array.
    """
    if isinstance(coords, dict):
        parts = [np.asarray(v, dtype=np.float64).reshape(-1, LATENT_DIM) for v in coords.values()]
        m = np.concatenate(parts) if parts else np.empty((0, LATENT_DIM))
    else:
        m = np.asarray(coords, dtype=np.float64).reshape(-1, LATENT_DIM)
    if m.shape[0] == 0:
        raise InsufficientDataError("component_ranges needs at least one vector")
    return np.stack([m.min(axis=0), m.max(axis=0)], axis=1)


def per_component_swaps(original, reference) -> list[np.ndarray]:
    """64 candidates: candidate k is the original with index k taken from the reference."""
    orig = _as_vector(original)
    ref = _as_vector(reference)
    out = []
    for k in range(LATENT_DIM):
        c = orig.copy()
        c[k] = ref[k]
        out.append(c)
    return out

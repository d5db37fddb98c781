"""Deterministic quasi-random point sampling for residual checks.

Halton sequences with a seeded Cranley-Patterson rotation: low-discrepancy
coverage of the sampling box, reproducible per seed.
"""

from __future__ import annotations

from typing import Mapping, Optional, Sequence

import numpy as np

from .bundles import CoJetPoint, JetPoint
from .coords import VarTable

DEFAULT_INTERVAL = (-1.0, 1.0)


def _primes(count: int) -> list:
    out = []
    candidate = 2
    while len(out) < count:
        if all(candidate % p for p in out):
            out.append(candidate)
        candidate += 1
    return out


def _radical_inverse(index: int, base: int) -> float:
    result = 0.0
    digit = 1.0 / base
    while index > 0:
        result += (index % base) * digit
        index //= base
        digit /= base
    return result


def halton(dim: int, count: int, seed: int = 0) -> np.ndarray:
    """count x dim points in [0, 1), Halton sequence rotated by the seed."""
    bases = _primes(dim)
    shift = np.random.default_rng(seed).uniform(size=dim)
    points = np.empty((count, dim))
    for j, base in enumerate(bases):
        column = np.array([_radical_inverse(i + 1, base) for i in range(count)])
        points[:, j] = (column + shift[j]) % 1.0
    return points


def sample_box(intervals: Sequence, count: int, seed: int = 0) -> np.ndarray:
    intervals = np.asarray(intervals, dtype=float)
    unit = halton(len(intervals), count, seed)
    return intervals[:, 0] + unit * (intervals[:, 1] - intervals[:, 0])


def _intervals_for(names, box: Optional[Mapping]) -> list:
    box = box or {}
    return [tuple(box.get(name, DEFAULT_INTERVAL)) for name in names]


def sample_jet_points(
    table: VarTable, count: int, seed: int = 0, box: Optional[Mapping] = None
) -> list:
    """JetPoints spread over the per-coordinate box (default [-1, 1] each)."""
    names = table.velocity_chart
    points = sample_box(_intervals_for(names, box), count, seed)
    n, k = table.n, table.k
    return [
        JetPoint(table, row[:n], row[n:].reshape(k, n).T)
        for row in points
    ]


def sample_cojet_points(
    table: VarTable, count: int, seed: int = 0, box: Optional[Mapping] = None
) -> list:
    names = table.momentum_chart
    points = sample_box(_intervals_for(names, box), count, seed)
    n, k = table.n, table.k
    return [
        CoJetPoint(table, row[:n], row[n:].reshape(k, n))
        for row in points
    ]


def sample_parameters(
    table: VarTable, count: int, seed: int = 0, t_box: Optional[Sequence] = None
) -> np.ndarray:
    """count x k parameter points; default box [0, 1] per axis."""
    if t_box is None:
        t_box = [(0.0, 1.0)] * table.k
    return sample_box(t_box, count, seed)

"""Transition distances: -log of entries of the exponentiated adjacency matrix."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError
from .signature import Ty

UNDERFLOW = 1e-300


def matrix_exponential(a, tol: float = 1e-14) -> np.ndarray:
    """e^A by scaling and squaring around a truncated Taylor series.

    The Taylor order is the smallest one whose remainder bound on the scaled
    matrix stays below ``tol / 2**s`` (``s`` squarings follow).
    """
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"matrix exponential needs a square matrix, got shape {a.shape}")
    n = a.shape[0]
    if n == 0:
        return np.zeros((0, 0))
    if not np.all(np.isfinite(a)):
        raise DimensionError("matrix has non-finite entries")
    norm = float(np.abs(a).sum(axis=1).max())
    s = max(0, math.ceil(math.log2(norm / 0.5))) if norm > 0.5 else 0
    b = a / (2.0 ** s)
    theta = norm / (2.0 ** s)
    target = tol / (2.0 ** s)
    m, term = 1, theta
    while m < 60:
        # ||R_m|| <= theta^(m+1)/(m+1)! * e^theta
        term *= theta / (m + 1)
        if term * math.exp(theta) < target:
            break
        m += 1
    eye = np.eye(n)
    t = eye.copy()
    for k in range(m, 0, -1):
        t = eye + (b @ t) / k
    for _ in range(s):
        t = t @ t
    return t


@dataclass(frozen=True)
class DistanceMatrix:
    entries: np.ndarray
    vertices: tuple[Ty, ...]

    def __post_init__(self):
        self.entries.setflags(write=False)

    def __call__(self, i, j) -> float:
        return transition_distance(self, i, j)

    def _idx(self, v) -> int:
        if isinstance(v, Ty):
            try:
                return self.vertices.index(v)
            except ValueError:
                raise IndexError(f"{v} is not a vertex") from None
        n = len(self.vertices)
        if not isinstance(v, (int, np.integer)) or not 0 <= v < n:
            raise IndexError(f"vertex index {v!r} outside 0..{n - 1}")
        return int(v)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([""] + [str(v) for v in self.vertices])
        for v, row in zip(self.vertices, self.entries):
            w.writerow([str(v)] + [repr(float(x)) for x in row])
        return buf.getvalue()


def distances_from_exponential(expa: np.ndarray, vertices) -> DistanceMatrix:
    with np.errstate(divide="ignore"):
        d = np.where(expa < UNDERFLOW, np.inf, -np.log(np.maximum(expa, UNDERFLOW)))
    d = d + 0.0  # -log(1) gives -0.0
    return DistanceMatrix(d, tuple(vertices))


def distance_matrix(graph) -> DistanceMatrix:
    return distances_from_exponential(matrix_exponential(graph.adjacency), graph.vertices)


def transition_distance(d: DistanceMatrix, i, j) -> float:
    return float(d.entries[d._idx(i), d._idx(j)])

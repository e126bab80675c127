"""Polytopic conical partitions of the plane into flow and jump cells.

Each cell is a closed cone ``{x : E x >= 0}`` and carries a continuity matrix
``F`` so that ``x' F' Phi F x`` is a continuous piecewise quadratic function
for every symmetric ``Phi``.  Cells are indexed from 0.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

FLOW = "flow"
JUMP = "jump"

_CONE_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class Cell:
    E: np.ndarray
    F: np.ndarray
    kind: str
    ray_lo: int | None = None
    ray_hi: int | None = None

    def contains(self, x, tol: float = _CONE_TOL) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(self.E @ x >= -tol * max(np.linalg.norm(x), 1e-300)))


@dataclass(frozen=True, eq=False)
class ConicalPartition:
    """Cells covering R^n.

    ``symmetric`` marks partitions whose cells stand for ``K`` together with
    ``-K``; that is only used for storage functions shared by all cells, where
    conditions on ``K`` and ``-K`` coincide.
    """

    cells: tuple[Cell, ...]
    n: int
    rays: np.ndarray | None = None
    symmetric: bool = False
    label: str = field(default="", compare=False)

    @property
    def flow_idx(self) -> tuple[int, ...]:
        return tuple(i for i, c in enumerate(self.cells) if c.kind == FLOW)

    @property
    def jump_idx(self) -> tuple[int, ...]:
        return tuple(i for i, c in enumerate(self.cells) if c.kind == JUMP)

    @property
    def phi_dim(self) -> int:
        return self.cells[0].F.shape[0]

    def __len__(self) -> int:
        return len(self.cells)

    def storage_matrices(self, Phi) -> list[np.ndarray]:
        Phi = np.asarray(Phi, dtype=float)
        return [c.F.T @ Phi @ c.F for c in self.cells]

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "label": self.label,
            "symmetric": self.symmetric,
            "ray_angles": None if self.rays is None else [math.atan2(v[1], v[0]) for v in self.rays],
            "cells": [
                {
                    "kind": c.kind,
                    "E": c.E.tolist(),
                    "F": c.F.tolist(),
                    "ray_lo": c.ray_lo,
                    "ray_hi": c.ray_hi,
                }
                for c in self.cells
            ],
            "flow_idx": list(self.flow_idx),
            "jump_idx": list(self.jump_idx),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ConicalPartition":
        cells = tuple(
            Cell(
                E=np.array(c["E"], dtype=float).reshape(-1, data["n"]),
                F=np.array(c["F"], dtype=float).reshape(-1, data["n"]),
                kind=c["kind"],
                ray_lo=c.get("ray_lo"),
                ray_hi=c.get("ray_hi"),
            )
            for c in data["cells"]
        )
        if any(c.kind not in (FLOW, JUMP) for c in cells):
            raise ValueError("cell kind must be 'flow' or 'jump'")
        if len({c.F.shape[0] for c in cells}) != 1:
            raise ValueError("all continuity matrices need the same number of rows")
        angles = data.get("ray_angles")
        rays = None if angles is None else np.array([[math.cos(a), math.sin(a)] for a in angles])
        return cls(cells, int(data["n"]), rays, bool(data.get("symmetric", False)), data.get("label", ""))


def save_partition(part: ConicalPartition, path) -> None:
    with open(path, "w") as fh:
        json.dump(part.to_dict(), fh, indent=1)
        fh.write("\n")


def load_partition(path) -> ConicalPartition:
    with open(path) as fh:
        return ConicalPartition.from_dict(json.load(fh))


def trivial_partition(n: int) -> ConicalPartition:
    """One flow cell covering everything: a common quadratic storage function."""
    cell = Cell(E=np.zeros((n, n)), F=np.eye(n), kind=FLOW)
    return ConicalPartition((cell,), n, label="trivial")


def _unit(theta: float) -> np.ndarray:
    return np.array([math.cos(theta), math.sin(theta)])


def _cone_matrix(va: np.ndarray, vb: np.ndarray) -> np.ndarray:
    # inward normals: va rotated +90 deg, vb rotated -90 deg
    return np.array([[-va[1], va[0]], [vb[1], -vb[0]]])


def _g(M: np.ndarray, theta: float) -> float:
    v = _unit(theta)
    return float(v @ M @ v)


def boundary_angles(M) -> list[float]:
    """Angles in [0, 2pi) of the four rays where x'Mx = 0 (M indefinite, 2x2)."""
    M = np.asarray(M, dtype=float)
    lam, Q = np.linalg.eigh(M)
    if not (lam[0] < 0 < lam[1]):
        raise ValueError("M must be indefinite to split the plane into two-cone sets")
    angles = []
    for sign in (1.0, -1.0):
        # eigen-coordinates with lam0*w0^2 + lam1*w1^2 = 0
        w = np.array([math.sqrt(lam[1]), sign * math.sqrt(-lam[0])])
        x = Q @ w
        base = math.atan2(x[1], x[0]) % (2 * math.pi)
        angles += [base, (base + math.pi) % (2 * math.pi)]
    return sorted(angles)


def _classify(M) -> str:
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1] or M.size == 0:
        raise ValueError(f"M must be square, got shape {M.shape}")
    if np.linalg.norm(M - M.T) > 1e-12 * max(1.0, np.linalg.norm(M)):
        raise ValueError("M must be symmetric")
    lam = np.linalg.eigvalsh(M)
    scale = max(1.0, abs(lam).max())
    if lam[0] >= -1e-14 * scale:
        return "psd"
    if M.shape != (2, 2):
        raise ValueError("the conical partition builder handles state dimension 2 only")
    if lam[1] <= 1e-14 * scale:
        raise ValueError("jump set is not a two-cone set: the flow set has empty interior")
    return "indefinite"


def build_partition(M, N: int) -> ConicalPartition:
    """Split each flow fan into (N-2)/2 equal-angle cones; each jump cone is one cell.

    ``N == 1`` gives the common quadratic partition.  When the jump set is empty
    the single-cell trivial partition is returned regardless of ``N``.
    """
    kind = _classify(M)
    if kind == "psd":
        return trivial_partition(len(M))
    if N == 1:
        return common_quadratic_partition(M)
    if N < 4 or (N - 2) % 2:
        raise ValueError(f"N must be >= 4 with N-2 even, got {N}")
    M = np.asarray(M, dtype=float)
    per_fan = (N - 2) // 2
    bounds = boundary_angles(M)
    ray_angles = []
    for k, start in enumerate(bounds):
        stop = bounds[(k + 1) % 4]
        span = (stop - start) % (2 * math.pi)
        mid = start + span / 2
        pieces = per_fan if _g(M, mid) >= 0 else 1
        ray_angles += [(start + span * j / pieces) % (2 * math.pi) for j in range(pieces)]
    ray_angles.sort()
    rays = np.array([_unit(a) for a in ray_angles])
    cells = []
    for i in range(N):
        a, b = i, (i + 1) % N
        V = np.column_stack([rays[a], rays[b]])
        Vinv = np.linalg.inv(V)
        F = np.zeros((N, 2))
        F[a] = Vinv[0]
        F[b] = Vinv[1]
        span = (ray_angles[b] - ray_angles[a]) % (2 * math.pi)
        mid = ray_angles[a] + span / 2
        kind_i = FLOW if _g(M, mid) >= 0 else JUMP
        cells.append(Cell(_cone_matrix(rays[a], rays[b]), F, kind_i, a, b))
    return ConicalPartition(tuple(cells), 2, rays, label=f"conical-{N}")


def common_quadratic_partition(M) -> ConicalPartition:
    """One flow cone and one jump cone, both standing for their negatives too.

    All cells share ``F = I`` so the storage function is a single quadratic form.
    """
    kind = _classify(M)
    if kind == "psd":
        return trivial_partition(len(M))
    M = np.asarray(M, dtype=float)
    bounds = boundary_angles(M)
    cells = []
    seen = set()
    for k, start in enumerate(bounds):
        stop = bounds[(k + 1) % 4]
        span = (stop - start) % (2 * math.pi)
        kind_k = FLOW if _g(M, start + span / 2) >= 0 else JUMP
        if kind_k in seen:
            continue
        seen.add(kind_k)
        cells.append(Cell(_cone_matrix(_unit(start), _unit(stop)), np.eye(2), kind_k))
    cells.sort(key=lambda c: c.kind != FLOW)
    return ConicalPartition(tuple(cells), 2, symmetric=True, label="common-quadratic")


def cell_of(part: ConicalPartition, x) -> int:
    """Lowest index of a cell containing ``x``; the origin maps to cell 0."""
    x = np.asarray(x, dtype=float).ravel()
    if not np.any(x):
        return 0
    for i, c in enumerate(part.cells):
        if c.contains(x) or (part.symmetric and c.contains(-x)):
            return i
    raise ValueError("partition does not cover x")


def _shared_rays(part: ConicalPartition) -> list[tuple[np.ndarray, list[int]]]:
    if part.rays is None:
        return []
    out = []
    for v in part.rays:
        for s in ((1.0, -1.0) if part.symmetric else (1.0,)):
            members = [i for i, c in enumerate(part.cells) if c.contains(s * v, 1e-9)]
            if len(members) > 1:
                out.append((s * v, members))
    return out


def check_continuity(part: ConicalPartition, trials: int = 100, seed: int = 0, tol: float = 1e-10) -> bool:
    """True iff ``F_k x == F_l x`` on every ray shared by cells ``k`` and ``l``."""
    return continuity_defect(part, trials, seed) <= tol


def continuity_defect(part: ConicalPartition, trials: int = 100, seed: int = 0) -> float:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for v, members in _shared_rays(part):
        for alpha in rng.uniform(0.1, 10.0, size=trials):
            x = alpha * v
            vals = [part.cells[i].F @ x for i in members]
            for other in vals[1:]:
                worst = max(worst, float(np.max(np.abs(other - vals[0]))) / alpha)
    return worst

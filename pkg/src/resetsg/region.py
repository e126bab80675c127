"""Intersections of disc interiors and exteriors centred on the real axis."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from skimage import measure

from .svg import SvgCanvas

INTERIOR = -1
EXTERIOR = 1


@dataclass(frozen=True)
class DiscConstraint:
    """``|z - center| <= radius`` for sigma=-1, ``|z - center| >= radius`` for sigma=+1."""

    sigma: int
    center: float
    radius: float

    def __post_init__(self):
        if self.sigma not in (INTERIOR, EXTERIOR):
            raise ValueError(f"sigma must be -1 or +1, got {self.sigma}")
        if not self.radius >= 0:
            raise ValueError(f"radius must be nonnegative, got {self.radius}")

    def margin(self, z):
        """Signed distance to the circle, positive when ``z`` satisfies the constraint."""
        d = np.abs(np.asarray(z) - self.center)
        return self.radius - d if self.sigma == INTERIOR else d - self.radius

    def holds(self, z, slack: float = 0.0) -> bool:
        return bool(self.margin(z) >= -slack)


@dataclass(frozen=True)
class Window:
    xmin: float
    xmax: float
    ymin: float
    ymax: float

    def __post_init__(self):
        if not (self.xmax > self.xmin and self.ymax > self.ymin):
            raise ValueError(f"empty window {self}")

    @property
    def area(self) -> float:
        return (self.xmax - self.xmin) * (self.ymax - self.ymin)

    @classmethod
    def parse(cls, value) -> "Window":
        if isinstance(value, Window):
            return value
        return cls(*map(float, value))


@dataclass(frozen=True)
class RegionSG:
    constraints: tuple[DiscConstraint, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "constraints", tuple(self.constraints))

    def __len__(self) -> int:
        return len(self.constraints)

    def margin(self, z):
        """Smallest constraint margin (``inf`` for the unconstrained plane)."""
        z = np.asarray(z, dtype=complex)
        out = np.full(z.shape, math.inf)
        for c in self.constraints:
            out = np.minimum(out, c.margin(z))
        return out if out.ndim else float(out)

    def contains(self, z, slack: float = 0.0):
        res = np.asarray(self.margin(z)) >= -slack
        return bool(res) if res.ndim == 0 else res

    def with_constraint(self, c: DiscConstraint) -> "RegionSG":
        return RegionSG(self.constraints + (c,))

    def scaled(self, interior_factor: float = 1.0, exterior_factor: float = 1.0) -> "RegionSG":
        """Copy with interior and exterior radii multiplied by the given factors."""
        return RegionSG(
            tuple(
                DiscConstraint(c.sigma, c.center, c.radius * (interior_factor if c.sigma == INTERIOR else exterior_factor))
                for c in self.constraints
            )
        )

    def to_dict(self) -> dict:
        return {"constraints": [{"sigma": c.sigma, "center": c.center, "radius": c.radius} for c in self.constraints]}

    @classmethod
    def from_dict(cls, data: dict) -> "RegionSG":
        return cls(tuple(DiscConstraint(int(c["sigma"]), float(c["center"]), float(c["radius"])) for c in data["constraints"]))


def save_region(reg: RegionSG, path, extra: dict | None = None) -> None:
    with open(path, "w") as fh:
        json.dump({**(extra or {}), **reg.to_dict()}, fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_region(path) -> RegionSG:
    with open(path) as fh:
        return RegionSG.from_dict(json.load(fh))


@dataclass
class Raster:
    mask: np.ndarray  # rows follow y, columns follow x
    xs: np.ndarray
    ys: np.ndarray
    polylines: list[np.ndarray]  # complex boundary loops


def grid(window: Window, res: int):
    if res < 2:
        raise ValueError("raster resolution must be at least 2")
    xs = np.linspace(window.xmin, window.xmax, res)
    ys = np.linspace(window.ymin, window.ymax, res)
    return xs, ys


def mask_contours(mask: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> list[np.ndarray]:
    """Marching-squares boundary loops of a boolean mask, in plane coordinates."""
    padded = np.pad(mask.astype(float), 1)
    loops = []
    dx, dy = xs[1] - xs[0], ys[1] - ys[0]
    for c in measure.find_contours(padded, 0.5):
        rows = np.clip(c[:, 0] - 1, 0, len(ys) - 1)
        cols = np.clip(c[:, 1] - 1, 0, len(xs) - 1)
        loops.append((xs[0] + cols * dx) + 1j * (ys[0] + rows * dy))
    return loops


def raster(reg: RegionSG, window, res: int) -> Raster:
    window = Window.parse(window)
    xs, ys = grid(window, res)
    Z = xs[None, :] + 1j * ys[:, None]
    mask = np.asarray(reg.contains(Z, 0.0), dtype=bool).reshape(Z.shape)
    return Raster(mask, xs, ys, mask_contours(mask, xs, ys))


def area(reg: RegionSG, window, res: int) -> float:
    """Cell-centred count of ``res x res`` cells inside the region."""
    window = Window.parse(window)
    if res < 1:
        raise ValueError("resolution must be positive")
    if any(c.sigma == INTERIOR and c.radius == 0.0 for c in reg.constraints):
        return 0.0  # at most one point
    hx = (window.xmax - window.xmin) / res
    hy = (window.ymax - window.ymin) / res
    xs = window.xmin + hx * (np.arange(res) + 0.5)
    ys = window.ymin + hy * (np.arange(res) + 0.5)
    inside = reg.contains(xs[None, :] + 1j * ys[:, None], 0.0)
    return float(np.count_nonzero(inside)) * hx * hy


def region_svg(reg: RegionSG, window, res: int = 401, canvas: SvgCanvas | None = None,
               fill: str = "#7fa7d9") -> SvgCanvas:
    window = Window.parse(window)
    canvas = canvas or SvgCanvas(window)
    canvas.path(raster(reg, window, res).polylines, fill=fill, stroke="#2b5d9c", fill_rule="evenodd")
    return canvas

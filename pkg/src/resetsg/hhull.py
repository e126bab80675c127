"""Hyperbolic convex hulls in the upper half-plane.

The lift ``z = x + iy -> (x, x^2 + y^2)`` sends geodesics (vertical lines and
circles centred on the real axis) to straight lines, so the hyperbolic hull of
a point set is the unlift of the Euclidean hull of the lifted points.  Points
are folded onto the closed upper half-plane first; the hull of the full set is
that upper hull together with its mirror image.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .region import RegionSG, Window
from .svg import SvgCanvas

DEDUP_TOL = 1e-12
BOUNDARY_SLACK = 1e-12


def fold(z):
    """Mirror points into the closed upper half-plane."""
    z = np.asarray(z, dtype=complex)
    return z.real + 1j * np.abs(z.imag)


def lift(z) -> np.ndarray:
    """``(x, x^2 + y^2)`` for each folded point; shape ``(..., 2)``."""
    z = fold(z)
    return np.stack([z.real, z.real ** 2 + z.imag ** 2], axis=-1)


def unlift(w) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    u, v = w[..., 0], w[..., 1]
    return u + 1j * np.sqrt(np.maximum(v - u * u, 0.0))


def _cross(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def _orient(o, a, b) -> int:
    """Exact sign of ``_cross(o, a, b)``: float filter, rational fallback."""
    c = _cross(o, a, b)
    bound = 1e-15 * (abs((a[0] - o[0]) * (b[1] - o[1])) + abs((a[1] - o[1]) * (b[0] - o[0])))
    if abs(c) > bound:
        return 1 if c > 0 else -1
    o, a, b = ([Fraction(float(v)) for v in p] for p in (o, a, b))
    e = (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
    return (e > 0) - (e < 0)


def _monotone_chain(pts: np.ndarray) -> list[int]:
    """Indices of the counter-clockwise convex hull, collinear points dropped.

    ``pts`` must be sorted lexicographically.  Orientation tests are exact, so
    every input point lies in the returned polygon exactly.
    """
    n = len(pts)
    if n <= 2:
        return list(range(n))

    def half(order):
        out: list[int] = []
        for i in order:
            while len(out) >= 2 and _orient(pts[out[-2]], pts[out[-1]], pts[i]) <= 0:
                out.pop()
            out.append(i)
        return out

    lower = half(range(n))
    upper = half(range(n - 1, -1, -1))
    return lower[:-1] + upper[:-1]


def _dedup(pts: np.ndarray) -> np.ndarray:
    """Sorted indices of points kept after merging near-duplicates.

    The merge radius is half the membership slack, so a dropped point stays
    inside the hull of the kept ones as seen by ``contains``.
    """
    if len(pts) == 0:
        return np.zeros(0, dtype=int)
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    tol = 0.5 * DEDUP_TOL * (1.0 + float(np.max(np.abs(pts))))
    keep = [int(order[0])]
    for i in order[1:]:
        p = pts[i]
        duplicate = False
        # kept points are in increasing abscissa, so scan back only while within tolerance
        for j in reversed(keep):
            if p[0] - pts[j][0] > tol:
                break
            if abs(p[1] - pts[j][1]) <= tol:
                duplicate = True
                break
        if not duplicate:
            keep.append(int(i))
    return np.array(keep, dtype=int)


@dataclass(frozen=True)
class Edge:
    """Geodesic between consecutive hull vertices.

    ``kind == "vertical"``: segment on ``Re z = center``.
    ``kind == "arc"``: arc of the circle ``|z - center| = radius`` between angles ``angle0`` and ``angle1``.
    """

    kind: str
    start: complex
    end: complex
    center: float
    radius: float = math.nan
    angle0: float = math.nan
    angle1: float = math.nan

    def points(self, count: int = 32) -> np.ndarray:
        t = np.linspace(0.0, 1.0, count)
        if self.kind == "vertical":
            return self.center + 1j * (self.start.imag + t * (self.end.imag - self.start.imag))
        ang = self.angle0 + t * (self.angle1 - self.angle0)
        return self.center + self.radius * np.exp(1j * ang)

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "start": [self.start.real, self.start.imag],
             "end": [self.end.real, self.end.imag], "center": self.center}
        if self.kind == "arc":
            d.update(radius=self.radius, angle0=self.angle0, angle1=self.angle1)
        return d


def _edge(p: np.ndarray, q: np.ndarray) -> Edge:
    a, b = complex(unlift(p)), complex(unlift(q))
    du = q[0] - p[0]
    if abs(du) <= DEDUP_TOL * (1.0 + abs(p[0]) + abs(q[0])):
        return Edge("vertical", a, b, float(0.5 * (p[0] + q[0])))
    s = (q[1] - p[1]) / du
    c = s / 2
    b0 = p[1] - s * p[0]
    r = math.sqrt(max(b0 + c * c, 0.0))
    return Edge("arc", a, b, float(c), r, math.atan2(a.imag, a.real - c), math.atan2(b.imag, b.real - c))


@dataclass
class HHull:
    lifted: np.ndarray  # (k, 2) counter-clockwise lifted hull polygon
    vertices: np.ndarray | None = None  # upper-half representatives in hull order
    edges: list[Edge] = field(init=False)

    def __post_init__(self):
        self.lifted = np.asarray(self.lifted, dtype=float).reshape(-1, 2)
        if self.vertices is None:
            self.vertices = unlift(self.lifted) if len(self.lifted) else np.zeros(0, dtype=complex)
        self.vertices = np.asarray(self.vertices, dtype=complex).reshape(-1)
        k = len(self.lifted)
        if k == 2:
            self.edges = [_edge(self.lifted[0], self.lifted[1])]
        elif k > 2:
            self.edges = [_edge(self.lifted[i], self.lifted[(i + 1) % k]) for i in range(k)]
        else:
            self.edges = []

    def __len__(self) -> int:
        return len(self.lifted)

    @property
    def lifted_area(self) -> float:
        if len(self) < 3:
            return 0.0
        u, v = self.lifted[:, 0], self.lifted[:, 1]
        return 0.5 * float(np.sum(u * np.roll(v, -1) - np.roll(u, -1) * v))

    def boundary(self, per_edge: int = 64) -> np.ndarray:
        """Closed upper-half boundary curve (sampled geodesics)."""
        if len(self) == 0:
            return np.zeros(0, dtype=complex)
        if len(self) == 1:
            return self.vertices.copy()
        k = len(self)
        segs = []
        for i in range(k if k > 2 else 1):
            p, q = self.lifted[i], self.lifted[(i + 1) % k]
            t = np.linspace(0.0, 1.0, per_edge)[:, None]
            segs.append(unlift(p + t * (q - p))[:-1] if k > 2 else unlift(p + t * (q - p)))
        return np.concatenate(segs)

    def to_dict(self) -> dict:
        return {
            "vertices": [[float(z.real), float(z.imag)] for z in self.vertices],
            "lifted": self.lifted.tolist(),
            "edges": [e.to_dict() for e in self.edges],
            "symmetric": True,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "HHull":
        v = np.array(data["vertices"], dtype=float).reshape(-1, 2)
        return cls(np.array(data["lifted"], dtype=float).reshape(-1, 2), v[:, 0] + 1j * v[:, 1])


def hhull(points) -> HHull:
    """Hyperbolic hull of the folded points (conjugates are implied)."""
    z = np.asarray(points, dtype=complex).ravel()
    if not np.all(np.isfinite(z)):
        raise ValueError("points must be finite")
    z = fold(z)
    w = lift(z).reshape(-1, 2)
    keep = _dedup(w)
    idx = keep[_monotone_chain(w[keep])] if len(keep) else keep
    # vertices keep the input coordinates so re-hulling them reproduces the lift exactly
    return HHull(w[idx], z[idx])


def _slack(w: np.ndarray, scale: float) -> np.ndarray:
    return BOUNDARY_SLACK * (1.0 + scale + np.abs(w[..., 0]) + np.abs(w[..., 1]))


def contains(h: HHull, z, slack: float | None = None):
    """Membership of ``z`` (or its conjugate) in the symmetric hull."""
    w = lift(z)
    scalar = w.ndim == 1
    w = w.reshape(-1, 2)
    k = len(h)
    scale = float(np.max(np.abs(h.lifted))) if k else 0.0
    tol = _slack(w, scale) if slack is None else np.full(len(w), slack)
    if k == 0:
        out = np.zeros(len(w), dtype=bool)
    elif k == 1:
        out = np.max(np.abs(w - h.lifted[0]), axis=1) <= tol
    elif k == 2:
        p, q = h.lifted
        d = q - p
        t = np.clip(((w - p) @ d) / (d @ d), 0.0, 1.0)
        out = np.linalg.norm(w - (p + t[:, None] * d), axis=1) <= tol * (1.0 + np.linalg.norm(d))
    else:
        out = np.ones(len(w), dtype=bool)
        for i in range(k):
            p, q = h.lifted[i], h.lifted[(i + 1) % k]
            e = q - p
            cross = e[0] * (w[:, 1] - p[1]) - e[1] * (w[:, 0] - p[0])
            out &= cross >= -tol * (1.0 + np.linalg.norm(e))
    return bool(out[0]) if scalar else out


def geodesic_midpoint(a: complex, b: complex) -> complex:
    """Point on the geodesic through ``a`` and ``b`` halfway along the lifted chord."""
    return complex(unlift(0.5 * (lift(a) + lift(b))))


@dataclass
class Certificate:
    verdict: bool
    margins: list[float]
    violating: list[int]
    spot_checks: int
    spot_failures: int
    slack: list[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "min_margin": min(self.margins) if self.margins else None,
            "violating": self.violating,
            "spot_checks": self.spot_checks,
            "spot_failures": self.spot_failures,
            "margins": self.margins,
        }


def default_slack(z) -> np.ndarray:
    """Membership slack for simulated samples: quadrature error plus bound resolution."""
    return 1e-6 * (1.0 + np.abs(np.asarray(z))) + 1e-3


def certify_inclusion(samples, reg: RegionSG, slack=None, spot_checks: int = 256, seed: int = 0) -> Certificate:
    """Check that the hull of ``samples`` lies in ``reg``.

    The region meets the closed upper half-plane in a set that is convex after
    lifting, so inclusion holds exactly when every sample is a member.  Random
    points on the hull edges are also tested directly.
    """
    z = fold(np.asarray(samples, dtype=complex).ravel())
    if len(z) == 0:
        raise ValueError("no samples to certify")
    tol = default_slack(z) if slack is None else np.broadcast_to(np.asarray(slack, dtype=float), z.shape)
    margins = np.asarray(reg.margin(z), dtype=float).reshape(-1)
    bad = np.flatnonzero(margins < -tol)
    failures = 0
    h = hhull(z)
    if spot_checks and h.edges:
        rng = np.random.default_rng(seed)
        idx = rng.integers(0, len(h.lifted), spot_checks)
        t = rng.uniform(0.0, 1.0, spot_checks)[:, None]
        nxt = (idx + 1) % len(h.lifted)
        pts = unlift(h.lifted[idx] + t * (h.lifted[nxt] - h.lifted[idx]))
        pm = np.asarray(reg.margin(pts), dtype=float).reshape(-1)
        failures = int(np.count_nonzero(pm < -(1e-6 * (1.0 + np.abs(pts)) + float(np.max(tol)))))
    return Certificate(
        verdict=bool(len(bad) == 0 and failures == 0),
        margins=[float(m) for m in margins],
        violating=[int(i) for i in bad],
        spot_checks=int(spot_checks if h.edges else 0),
        spot_failures=failures,
        slack=[float(s) for s in tol],
    )


def gap_metric(h: HHull, reg: RegionSG, window, res: int = 401) -> float:
    """``area(hull)/area(region)`` inside the window, by cell-centred counting."""
    window = Window.parse(window)
    hx = (window.xmax - window.xmin) / res
    hy = (window.ymax - window.ymin) / res
    xs = window.xmin + hx * (np.arange(res) + 0.5)
    ys = window.ymin + hy * (np.arange(res) + 0.5)
    Z = (xs[None, :] + 1j * ys[:, None]).ravel()
    in_reg = np.count_nonzero(reg.contains(Z, 0.0))
    if in_reg == 0:
        raise ValueError("region has zero area in the window")
    in_hull = np.count_nonzero(contains(h, Z))
    return float(in_hull) / float(in_reg)


def save_hull(h: HHull, path, extra: dict | None = None) -> None:
    with open(path, "w") as fh:
        json.dump({**(extra or {}), **h.to_dict()}, fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_hull(path) -> HHull:
    with open(path) as fh:
        return HHull.from_dict(json.load(fh))


def hull_svg(h: HHull, window, canvas: SvgCanvas | None = None, hatch: bool = True) -> SvgCanvas:
    """Hatched hull together with its mirror image."""
    window = Window.parse(window)
    canvas = canvas or SvgCanvas(window)
    b = h.boundary()
    if len(b) == 0:
        return canvas
    if len(h) < 3:
        canvas.polyline(b)
        canvas.polyline(np.conj(b))
        return canvas
    canvas.path([b, np.conj(b)], fill="none", stroke="black", hatch=hatch)
    return canvas

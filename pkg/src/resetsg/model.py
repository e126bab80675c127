"""Reset systems with quadratic flow and jump sets.

A reset system flows as ``x' = A x + B u`` while ``x'Mx >= 0`` and jumps to
``R x`` as soon as the state enters ``x'Mx < 0``; the output is
``y = C x + D u``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

SYMMETRY_TOL = 1e-12


class SingularResolvent(ValueError):
    """Raised when ``jwI - A`` cannot be inverted."""


def _as_matrix(value, name: str) -> np.ndarray:
    arr = np.array(value, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        # a flat list is read as a column for B and a row for C
        arr = arr.reshape(-1, 1) if name == "B" else arr.reshape(1, -1)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be a matrix, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class ResetSystem:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    R: np.ndarray
    M: np.ndarray
    name: str = field(default="", compare=False)

    def __post_init__(self):
        for key in ("A", "B", "C", "D", "R", "M"):
            object.__setattr__(self, key, _as_matrix(getattr(self, key), key))

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def p(self) -> int:
        return self.B.shape[1]

    def g(self, x) -> float:
        """Quadratic form ``x'Mx`` that separates flow from jump."""
        x = np.asarray(x, dtype=float)
        return float(x @ self.M @ x)

    def to_dict(self) -> dict:
        out = {k: getattr(self, k).tolist() for k in ("A", "B", "C", "D", "R", "M")}
        if self.name:
            out["name"] = self.name
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ResetSystem":
        missing = [k for k in ("A", "B", "C", "D", "R", "M") if k not in data]
        if missing:
            raise ValueError(f"system description lacks keys {missing}")
        return cls(*(data[k] for k in ("A", "B", "C", "D", "R", "M")), name=data.get("name", ""))


@dataclass
class ValidationReport:
    symmetric: bool
    hurwitz: bool
    dims_ok: bool
    messages: list[str]

    @property
    def ok(self) -> bool:
        # a non-Hurwitz A is only a warning
        return self.symmetric and self.dims_ok


def validate(sys: ResetSystem) -> ValidationReport:
    messages = []
    A, B, C, D, R, M = sys.A, sys.B, sys.C, sys.D, sys.R, sys.M
    n = A.shape[0]
    dims_ok = True
    checks = [
        (A.shape == (n, n), f"A must be square, got {A.shape}"),
        (B.shape[0] == n, f"B must have {n} rows, got {B.shape}"),
        (R.shape == (n, n), f"R must be {n}x{n}, got {R.shape}"),
        (M.shape == (n, n), f"M must be {n}x{n}, got {M.shape}"),
    ]
    if B.shape[0] == n:
        p = B.shape[1]
        checks += [
            (C.shape == (p, n), f"C must be {p}x{n} (square system), got {C.shape}"),
            (D.shape == (p, p), f"D must be {p}x{p} (square system), got {D.shape}"),
        ]
    for good, msg in checks:
        if not good:
            dims_ok = False
            messages.append(msg)

    symmetric = M.shape[0] == M.shape[1]
    if symmetric:
        scale = max(np.linalg.norm(M), 1.0)
        symmetric = bool(np.linalg.norm(M - M.T) <= SYMMETRY_TOL * scale)
    if not symmetric:
        messages.append("M is not symmetric")

    hurwitz = False
    if A.shape[0] == A.shape[1]:
        eig = np.linalg.eigvals(A)
        hurwitz = bool(np.all(eig.real < 0))
        if not hurwitz:
            messages.append(
                f"warning: A is not Hurwitz (max real part {eig.real.max():.3g}); "
                "trajectories may not settle"
            )
    return ValidationReport(symmetric, hurwitz, dims_ok, messages)


def in_flow(sys: ResetSystem, x) -> bool:
    x = np.asarray(x, dtype=float).ravel()
    if x.shape[0] != sys.n:
        raise ValueError(f"state must have dimension {sys.n}, got {x.shape[0]}")
    return bool(x @ sys.M @ x >= 0.0)


def in_jump(sys: ResetSystem, x) -> bool:
    return not in_flow(sys, x)


def lti_gain_at(sys: ResetSystem, omega: float) -> float:
    """Largest singular value of ``C (jwI - A)^-1 B + D``."""
    if math.isinf(omega):
        return float(np.linalg.norm(sys.D, 2))
    n = sys.n
    resolvent = 1j * omega * np.eye(n) - sys.A
    if np.linalg.cond(resolvent) > 1e14:
        raise SingularResolvent(f"j*{omega} is an eigenvalue of A")
    G = sys.C @ np.linalg.solve(resolvent, sys.B) + sys.D
    return float(np.linalg.svd(G, compute_uv=False)[0])


def load_system(path) -> ResetSystem:
    """Read a system description and reject it if the static checks fail."""
    with open(path) as fh:
        data = json.load(fh)
    sys = ResetSystem.from_dict(data)
    if not sys.name:
        object.__setattr__(sys, "name", Path(path).stem)
    report = validate(sys)
    if not report.ok:
        raise ValueError(f"invalid system {path}: " + "; ".join(report.messages))
    return sys


def save_system(sys: ResetSystem, path) -> None:
    with open(path, "w") as fh:
        json.dump(sys.to_dict(), fh, indent=2)
        fh.write("\n")


def r1_system() -> ResetSystem:
    """SISO example: two cascaded first-order lags with a full reset."""
    return ResetSystem(
        A=[[-1.0, 0.0], [1.0, -1.0]],
        B=[[1.0], [0.0]],
        C=[[0.0, 1.0]],
        D=[[0.0]],
        R=np.diag([0.0, 0.0]),
        M=np.diag([0.81, -1.0]),
        name="R1",
    )


def r2_system() -> ResetSystem:
    """MIMO example: same flow matrix, both states actuated and measured."""
    return ResetSystem(
        A=[[-1.0, 0.0], [1.0, -1.0]],
        B=np.eye(2),
        C=np.eye(2),
        D=np.zeros((2, 2)),
        R=np.diag([0.0, 0.0]),
        M=np.diag([0.81, -1.0]),
        name="R2",
    )

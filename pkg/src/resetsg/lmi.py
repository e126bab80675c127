"""Disc supply rates and the piecewise-quadratic dissipativity LMIs.

For a disc supply rate ``Pi(sigma, lambda_c, r)`` the reset system satisfies
the integral quadratic constraint (and so its scaled graph lies in the disc
interior or exterior) when a continuous piecewise-quadratic storage function
``V(x) = x' F_i' Phi F_i x`` on cell ``i`` satisfies the per-cell conditions
assembled by :func:`assemble`.  The radius enters affinely through
``rho = r**2``.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import sdp
from .model import ResetSystem
from .partition import ConicalPartition
from .region import DiscConstraint, RegionSG

log = logging.getLogger(__name__)

# an exterior disc this small carries no information
TRIVIAL_RADIUS = 1e-6


@dataclass(frozen=True)
class PiMatrix:
    sigma: int
    lambda_c: float
    r: float

    def matrix(self) -> np.ndarray:
        lc = self.lambda_c
        return self.sigma * np.array([[1.0, -lc], [-lc, lc * lc - self.r * self.r]])


def _lift(sys: ResetSystem) -> np.ndarray:
    # [y; u] = L [x; u]
    n, p = sys.n, sys.p
    return np.block([[sys.C, sys.D], [np.zeros((p, n)), np.eye(p)]])


def theta(pi: PiMatrix | np.ndarray, sys: ResetSystem) -> np.ndarray:
    """``L' (Pi kron I_p) L`` with ``L = [[C, D], [0, I]]``."""
    P = pi.matrix() if isinstance(pi, PiMatrix) else np.asarray(pi, dtype=float)
    L = _lift(sys)
    return L.T @ np.kron(P, np.eye(sys.p)) @ L


@dataclass(frozen=True)
class BoundTask:
    sigma: int
    lambda_c: float
    hard_sg: bool = False
    prune_pairs: bool = False

    def __post_init__(self):
        if self.sigma not in (-1, 1):
            raise ValueError("sigma must be -1 or +1")
        if not math.isfinite(self.lambda_c):
            raise ValueError("disc centre must be finite")


def _sym_basis(k: int) -> list[tuple[int, int, np.ndarray]]:
    out = []
    for a in range(k):
        for b in range(a, k):
            S = np.zeros((k, k))
            S[a, b] = S[b, a] = 1.0
            out.append((a, b, S))
    return out


@dataclass
class _Layout:
    phi: list[tuple[int, int]]
    u1: dict[int, list[int]] = field(default_factory=dict)
    u2: dict[int, list[int]] = field(default_factory=dict)
    u3: dict[int, list[int]] = field(default_factory=dict)
    u4: dict[int, list[int]] = field(default_factory=dict)
    rho: int = -1
    m: int = 0


def _congruence_terms(basis, idx, left: np.ndarray) -> dict[int, np.ndarray]:
    """Coefficients of ``left' S left`` for each symmetric basis matrix ``S``."""
    out = {}
    for k, (_, _, S) in zip(idx, basis):
        T = left.T @ S @ left
        if np.any(T):
            out[k] = T
    return out


def _add(acc: dict[int, np.ndarray], terms: dict[int, np.ndarray], sign: float = 1.0) -> None:
    for k, T in terms.items():
        acc[k] = acc[k] + sign * T if k in acc else sign * T


def _pair_reachable(part: ConicalPartition, R: np.ndarray, i: int, j: int, samples: int = 64) -> bool:
    """Whether some sampled ``x`` in cell ``j`` has ``R x`` in cell ``i``."""
    cj, ci = part.cells[j], part.cells[i]
    if part.rays is None or cj.ray_lo is None:
        return True
    va, vb = part.rays[cj.ray_lo], part.rays[cj.ray_hi]
    for t in np.linspace(0.0, 1.0, samples):
        x = (1 - t) * va + t * vb
        y = R @ x
        if np.linalg.norm(y) <= 1e-12 * np.linalg.norm(x) or ci.contains(y, 1e-9):
            return True
    return False


def assemble(sys: ResetSystem, part: ConicalPartition, task: BoundTask) -> sdp.SdpProblem:
    """Build the LMI problem in the variables (Phi, U1, U2, U3, U4, rho)."""
    n, p = sys.n, sys.p
    if part.n != n:
        raise ValueError(f"partition dimension {part.n} does not match state dimension {n}")
    flow, jump = part.flow_idx, part.jump_idx
    if not flow:
        raise ValueError("partition has no flow cells")
    A, B, R = sys.A, sys.B, sys.R

    k_phi = part.phi_dim
    phi_basis = _sym_basis(k_phi)
    u_basis = _sym_basis(n)
    names = [f"Phi[{a},{b}]" for a, b, _ in phi_basis]
    lay = _Layout(phi=[(a, b) for a, b, _ in phi_basis])
    phi_idx = list(range(len(phi_basis)))

    def new_u(tag):
        start = len(names)
        names.extend(f"{tag}[{a},{b}]" for a, b, _ in u_basis)
        return list(range(start, len(names)))

    for i in flow:
        lay.u1[i] = new_u(f"U1_{i}")
        lay.u2[i] = new_u(f"U2_{i}")
    for j in jump:
        lay.u3[j] = new_u(f"U3_{j}")
        lay.u4[j] = new_u(f"U4_{j}")
    lay.rho = len(names)
    names.append("rho")
    lay.m = len(names)

    nonneg = [k for d in (lay.u1, lay.u2, lay.u3, lay.u4) for v in d.values() for k in v] + [lay.rho]
    prob = sdp.SdpProblem(lay.m, nonneg_idx=sorted(nonneg), var_names=names)
    prob.objective = ("min" if task.sigma == -1 else "max", lay.rho)

    # P_i as a linear function of Phi, per cell
    P_terms = [_congruence_terms(phi_basis, phi_idx, c.F) for c in part.cells]

    Pi0 = PiMatrix(task.sigma, task.lambda_c, 0.0)
    const_a = -theta(Pi0, sys)
    rho_coef = task.sigma * np.diag(np.r_[np.zeros(n), np.ones(p)])
    seen: set[bytes] = set()
    # blocks per type before duplicates and all-zero blocks are dropped
    counts = {"flow": 0, "jump": 0, "pair": 0, "psd": 0}

    def add_unique(const, terms, tag):
        counts[tag[0]] += 1
        terms = {k: T for k, T in terms.items() if np.any(T)}
        key = const.tobytes() + b"|".join(
            str(k).encode() + T.tobytes() for k, T in sorted(terms.items())
        )
        if key in seen:
            return
        seen.add(key)
        prob.add_block(const, terms, tag)

    for i in flow:
        E = part.cells[i].E
        terms: dict[int, np.ndarray] = {}
        for k, P in P_terms[i].items():
            top = np.hstack([A.T @ P + P @ A, P @ B])
            terms[k] = np.vstack([top, np.hstack([B.T @ P, np.zeros((p, p))])])
        for k, T in _congruence_terms(u_basis, lay.u1[i], E).items():
            terms[k] = np.pad(T, ((0, p), (0, p)))
        terms[lay.rho] = rho_coef
        add_unique(const_a, terms, ("flow", i))

    zero_n = np.zeros((n, n))
    for j in jump:
        Ej = part.cells[j].E
        terms = {}
        _add(terms, {k: R.T @ P @ R - P for k, P in P_terms[j].items()})
        _add(terms, _congruence_terms(u_basis, lay.u3[j], Ej))
        add_unique(zero_n, terms, ("jump", j))
        for i in flow:
            if task.prune_pairs and not _pair_reachable(part, R, i, j):
                continue
            terms = {}
            _add(terms, {k: R.T @ P @ R for k, P in P_terms[i].items()})
            _add(terms, P_terms[j], -1.0)
            _add(terms, _congruence_terms(u_basis, lay.u4[j], Ej))
            _add(terms, _congruence_terms(u_basis, lay.u2[i], part.cells[i].E @ R))
            add_unique(zero_n, terms, ("pair", i, j))

    if task.hard_sg:
        for c, terms in enumerate(P_terms):
            add_unique(zero_n, {k: -P for k, P in terms.items()}, ("psd", c))

    prob.meta["layout"] = lay
    prob.meta["block_counts"] = counts
    prob.check()
    return prob


def storage_matrices(prob: sdp.SdpProblem, part: ConicalPartition, x) -> tuple[np.ndarray, list[np.ndarray]]:
    """Recover ``Phi`` and the per-cell ``P_i`` from a solution vector."""
    lay: _Layout = prob.meta["layout"]
    k = part.phi_dim
    Phi = np.zeros((k, k))
    for idx, (a, b) in enumerate(lay.phi):
        Phi[a, b] = Phi[b, a] = x[idx]
    return Phi, part.storage_matrices(Phi)


@dataclass
class BoundResult:
    sigma: int
    lambda_c: float
    status: str
    r: float | None
    solution: sdp.SdpSolution | None
    method: str = "direct"

    @property
    def informative(self) -> bool:
        if self.status != sdp.OPTIMAL or self.r is None:
            return False
        return self.sigma == -1 or self.r > TRIVIAL_RADIUS

    def report(self) -> dict:
        sol = self.solution
        return {
            "sigma": self.sigma,
            "lambda_c": self.lambda_c,
            "status": self.status,
            "r": self.r,
            "method": self.method,
            "iterations": None if sol is None else sol.iterations,
            "gap": None if sol is None or not math.isfinite(sol.gap) else sol.gap,
            "max_violation": None if sol is None or not math.isfinite(sol.max_violation) else sol.max_violation,
            "message": "" if sol is None else sol.message,
        }


def bound_radius(
    sys: ResetSystem,
    part: ConicalPartition,
    sigma: int,
    lambda_c: float,
    opts: sdp.SolverOptions | None = None,
    hard_sg: bool = False,
    prune_pairs: bool = False,
    method: str = "auto",
):
    """Tightest certified radius for the disc at ``lambda_c``.

    Returns ``(r, solution)``; ``r`` is ``None`` unless the status is optimal.
    ``method`` is ``direct``, ``bisect`` or ``auto`` (direct, bisection on failure).
    """
    res = _bound(sys, part, BoundTask(sigma, lambda_c, hard_sg, prune_pairs), opts, method)
    return res.r, res.solution


def _bound(sys, part, task: BoundTask, opts, method="auto") -> BoundResult:
    opts = opts or sdp.SolverOptions()
    prob = assemble(sys, part, task)
    rho_k = prob.meta["layout"].rho
    sol = None
    used = method
    if method in ("direct", "auto"):
        sol = sdp.solve(prob, opts)
        used = "direct"
    if method == "bisect" or (method == "auto" and sol.status == sdp.NUMERIC_FAILURE):
        log.info("sigma=%d lambda_c=%g: falling back to bisection", task.sigma, task.lambda_c)
        sol = sdp.bisect(prob, opts=opts)
        used = "bisect"
    r = None
    if sol.status == sdp.OPTIMAL:
        rho = float(sol.x[rho_k])
        r = math.sqrt(max(rho, 0.0))
    sol.meta["problem"] = prob
    return BoundResult(task.sigma, task.lambda_c, sol.status, r, sol, used)


@dataclass
class SweepResult:
    region: RegionSG
    results: list[BoundResult]

    def report(self) -> list[dict]:
        return [r.report() for r in self.results]


def _sweep_worker(args):
    sys, part, task, opts, method = args
    res = _bound(sys, part, task, opts, method)
    res.solution.meta.pop("problem", None)
    return res


def sweep(
    sys: ResetSystem,
    part: ConicalPartition,
    interior_centers,
    exterior_centers,
    opts: sdp.SolverOptions | None = None,
    hard_sg: bool = False,
    prune_pairs: bool = False,
    threads: int = 1,
    method: str = "auto",
) -> SweepResult:
    """Solve every disc task and intersect the informative discs."""
    tasks = [BoundTask(-1, float(c), hard_sg, prune_pairs) for c in interior_centers]
    tasks += [BoundTask(1, float(c), hard_sg, prune_pairs) for c in exterior_centers]
    if not tasks:
        raise ValueError("no disc centres given")
    jobs = [(sys, part, t, opts, method) for t in tasks]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_sweep_worker, jobs))
    else:
        results = [_sweep_worker(j) for j in jobs]
    discs = []
    for res in results:
        if res.informative:
            discs.append(DiscConstraint(res.sigma, res.lambda_c, res.r))
        else:
            log.info("disc task sigma=%d lambda_c=%g omitted (%s, r=%s)", res.sigma, res.lambda_c, res.status, res.r)
    if not any(r.status == sdp.OPTIMAL for r in results):
        raise RuntimeError("every disc task failed: " + "; ".join(sorted({r.status for r in results})))
    return SweepResult(RegionSG(tuple(discs)), results)


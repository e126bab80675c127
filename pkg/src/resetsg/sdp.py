"""Small dense semidefinite programs in inequality form.

A problem has scalar variables ``x`` and blocks ``G0 + sum_k x_k G_k <= 0``
(negative semidefinite), sign constraints ``x_k >= 0`` for a subset of the
variables, and optionally a linear objective in one variable.

The embedded solver is a primal-dual path-following method (HKM direction,
Mehrotra predictor-corrector) run on the standard dual form
``max b'y  s.t.  C - A'(y) >= 0``.  It always moves from a strictly feasible
``y`` so every returned witness satisfies the constraints up to rounding:

* phase 1 minimises a common shift ``t`` of all blocks to find a strictly
  feasible point (or show that none exists),
* phase 2 optimises the objective over the blocks relaxed by a fraction of
  ``feas_tol``.

All variables are boxed by ``|x_k| <= var_bound`` which keeps the dual strictly
feasible.  The box grows by factors of 100 up to ``max_var_bound`` while it
limits the answer; a target variable still on the largest box is reported as
unbounded.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

log = logging.getLogger(__name__)

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
NUMERIC_FAILURE = "numeric_failure"


@dataclass
class Block:
    const: np.ndarray
    idx: np.ndarray
    coef: np.ndarray
    tag: object = None

    @property
    def size(self) -> int:
        return self.const.shape[0]

    def value(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if len(self.idx) == 0:
            return self.const.copy()
        return self.const + np.tensordot(x[self.idx], self.coef, axes=1)

    def scale(self) -> float:
        norms = [np.linalg.norm(self.const)] + [np.linalg.norm(c) for c in self.coef]
        return max(norms)


@dataclass
class SdpProblem:
    m: int
    blocks: list[Block] = field(default_factory=list)
    nonneg_idx: list[int] = field(default_factory=list)
    objective: tuple[str, int] | None = None
    var_names: list[str] | None = None
    meta: dict = field(default_factory=dict)

    def add_block(self, const, terms: dict[int, np.ndarray] | None = None, tag=None, drop_zero=True) -> bool:
        """Append ``const + sum_k x_k terms[k] <= 0``; all-zero blocks are dropped."""
        const = np.asarray(const, dtype=float)
        s = const.shape[0]
        items = sorted((k, np.asarray(c, dtype=float)) for k, c in (terms or {}).items())
        items = [(k, c) for k, c in items if np.any(c)]
        if drop_zero and not items and not np.any(const):
            return False
        idx = np.array([k for k, _ in items], dtype=int)
        coef = np.array([c for _, c in items]).reshape(len(items), s, s)
        self.blocks.append(Block(const, idx, coef, tag))
        return True

    def check(self) -> None:
        for b in self.blocks:
            s = b.const.shape[0]
            if b.const.shape != (s, s) or b.coef.shape[1:] != (s, s):
                raise ValueError(f"block {b.tag} has inconsistent sizes")
            mats = [b.const, *b.coef]
            if any(np.abs(G - G.T).max(initial=0.0) > 1e-9 * max(1.0, np.abs(G).max(initial=0.0)) for G in mats):
                raise ValueError(f"block {b.tag} is not symmetric")
            if len(b.idx) and (b.idx.min() < 0 or b.idx.max() >= self.m):
                raise ValueError(f"block {b.tag} references a variable outside 0..{self.m - 1}")
        if any(k < 0 or k >= self.m for k in self.nonneg_idx):
            raise ValueError("nonneg index out of range")
        if self.objective is not None:
            sense, k = self.objective
            if sense not in ("min", "max") or not 0 <= k < self.m:
                raise ValueError(f"bad objective {self.objective}")

    def block_values(self, x) -> list[np.ndarray]:
        return [b.value(x) for b in self.blocks]

    def max_violation(self, x, normalized: bool = True) -> float:
        """Largest eigenvalue over all blocks (Frobenius-normalised), or sign violation."""
        x = np.asarray(x, dtype=float)
        worst = -math.inf
        for b in self.blocks:
            val = b.value(x)
            if normalized:
                sc = b.scale()
                val = val / sc if sc > 0 else val
            worst = max(worst, float(np.linalg.eigvalsh(val)[-1]))
        if self.nonneg_idx:
            worst = max(worst, float(-x[self.nonneg_idx].min()))
        return worst

    def fix(self, k: int, value: float) -> "SdpProblem":
        """Same problem with ``x_k`` frozen at ``value`` (variable kept, decoupled)."""
        out = SdpProblem(self.m, [], [i for i in self.nonneg_idx if i != k], None, self.var_names, dict(self.meta))
        for b in self.blocks:
            keep = b.idx != k
            const = b.const + value * b.coef[~keep].sum(axis=0) if (~keep).any() else b.const
            out.blocks.append(Block(const, b.idx[keep], b.coef[keep], b.tag))
        out.meta["fixed"] = {**self.meta.get("fixed", {}), k: value}
        return out

    def to_dict(self) -> dict:
        return {
            "format": "sdp-ineq-v1",
            "m": self.m,
            "var_names": self.var_names,
            "nonneg_idx": list(map(int, self.nonneg_idx)),
            "objective": None if self.objective is None else {"sense": self.objective[0], "index": int(self.objective[1])},
            "blocks": [
                {
                    "tag": None if b.tag is None else str(b.tag),
                    "size": int(b.size),
                    "const": b.const.tolist(),
                    "coefs": {str(int(k)): c.tolist() for k, c in zip(b.idx, b.coef)},
                }
                for b in self.blocks
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SdpProblem":
        obj = data.get("objective")
        prob = cls(
            int(data["m"]),
            nonneg_idx=list(data.get("nonneg_idx", [])),
            objective=None if obj is None else (obj["sense"], int(obj["index"])),
            var_names=data.get("var_names"),
        )
        for b in data["blocks"]:
            terms = {int(k): np.array(v) for k, v in b["coefs"].items()}
            prob.add_block(np.array(b["const"], dtype=float).reshape(b["size"], b["size"]), terms, b.get("tag"), drop_zero=False)
        prob.check()
        return prob


def save_problem(prob: SdpProblem, path) -> None:
    with open(path, "w") as fh:
        json.dump(prob.to_dict(), fh)


def load_problem(path) -> SdpProblem:
    with open(path) as fh:
        return SdpProblem.from_dict(json.load(fh))


@dataclass
class SolverOptions:
    feas_tol: float = 1e-8
    gap_tol: float = 1e-7
    max_iter: int = 200
    var_bound: float = 1e4
    max_var_bound: float = 1e8
    polish: bool = True
    bisect_tol: float = 1e-6


@dataclass
class SdpSolution:
    status: str
    x: np.ndarray
    objective: float | None = None
    max_violation: float = math.nan
    gap: float = math.nan
    iterations: int = 0
    message: str = ""
    bracket: tuple[float, float] | None = None
    meta: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.status == OPTIMAL


# ---------------------------------------------------------------------------
# standard-form data and the interior-point kernel


class _Group:
    """Dense blocks of one size, stacked: C (nb,s,s), A (nb,q,s,s), I (nb,q)."""

    def __init__(self, C, A, I):
        self.C = C
        self.A = A
        self.I = I


class _StdForm:
    # Z = C - A'(y) >= 0 ; LP rows z_r = c_r + s_r * y[k_r]

    def __init__(self, m, groups, lp_k, lp_s, lp_c, b):
        self.m = m
        self.groups = groups
        self.lp_k = lp_k
        self.lp_s = lp_s
        self.lp_c = lp_c
        self.b = b
        self.nu = sum(g.C.shape[0] * g.C.shape[1] for g in groups) + len(lp_c)

    def slack(self, y):
        ypad = np.append(y, 0.0)
        Zg = [g.C - np.einsum("bq,bqij->bij", ypad[g.I], g.A) for g in self.groups]
        zl = self.lp_c + self.lp_s * y[self.lp_k]
        return Zg, zl

    def apply_A(self, Xg, xl):
        out = np.zeros(self.m + 1)
        for g, X in zip(self.groups, Xg):
            vals = np.einsum("bqij,bij->bq", g.A, X)
            out += np.bincount(g.I.ravel(), vals.ravel(), minlength=self.m + 1)
        out[: self.m] += np.bincount(self.lp_k, -self.lp_s * xl, minlength=self.m)
        return out[: self.m]

    def apply_AT(self, dy):
        ypad = np.append(dy, 0.0)
        Sg = [np.einsum("bq,bqij->bij", ypad[g.I], g.A) for g in self.groups]
        sl = -self.lp_s * dy[self.lp_k]
        return Sg, sl


def _build_std(blocks, m, lp_rows, b, shift_var=None, relax=0.0):
    """Convert ``G(x) <= 0`` blocks into ``Z = -G0 + relax*I - sum x_k G_k``.

    ``shift_var`` adds ``+t I`` (phase 1) through variable index ``shift_var``.
    """
    by_size: dict[int, list] = {}
    for blk in blocks:
        by_size.setdefault(blk.size, []).append(blk)
    groups = []
    for s, blks in sorted(by_size.items()):
        q = max(len(bl.idx) for bl in blks) + (1 if shift_var is not None else 0)
        nb = len(blks)
        C = np.empty((nb, s, s))
        A = np.zeros((nb, q, s, s))
        I = np.full((nb, q), m, dtype=int)
        for j, bl in enumerate(blks):
            C[j] = -bl.const + relax * np.eye(s)
            k = len(bl.idx)
            A[j, :k] = bl.coef
            I[j, :k] = bl.idx
            if shift_var is not None:
                A[j, k] = -np.eye(s)
                I[j, k] = shift_var
        groups.append(_Group(C, A, I))
    lp_k = np.array([r[0] for r in lp_rows], dtype=int)
    lp_s = np.array([r[1] for r in lp_rows], dtype=float)
    lp_c = np.array([r[2] for r in lp_rows], dtype=float)
    return _StdForm(m, groups, lp_k, lp_s, lp_c, np.asarray(b, dtype=float))


def _chol_stack(S):
    try:
        return np.linalg.cholesky(S)
    except np.linalg.LinAlgError:
        return None


def _well_posed(L, ratio=1e-12):
    d = np.abs(np.diagonal(L, axis1=-2, axis2=-1))
    return bool(np.all(d.min(axis=-1) > ratio * d.max(axis=-1)))


def _inv_from_chol(L):
    Linv = np.linalg.inv(L)
    return np.swapaxes(Linv, -1, -2) @ Linv


def _max_step_psd(L, dX):
    # largest alpha with L L' + alpha dX >= 0, given the Cholesky factor L
    if dX.shape[0] == 0:
        return math.inf
    Linv = np.linalg.inv(L)
    W = Linv @ dX @ np.swapaxes(Linv, -1, -2)
    lmin = np.linalg.eigvalsh(0.5 * (W + np.swapaxes(W, -1, -2)))[:, 0].min()
    return math.inf if lmin >= 0 else -1.0 / lmin


def _max_step_lp(x, dx):
    neg = dx < 0
    if not neg.any():
        return math.inf
    return float(np.min(-x[neg] / dx[neg]))


@dataclass
class _IpmResult:
    y: np.ndarray
    pobj: float
    dobj: float
    iterations: int
    converged: bool
    stopped_early: bool = False
    message: str = ""
    xl: np.ndarray | None = None  # multipliers of the scalar rows
    pres1: float = math.inf  # 1-norm of the primal residual


def _ipm(std: _StdForm, y0, max_iter, gap_tol, inf_tol=1e-9, stop=None) -> _IpmResult:
    """Dual-feasible primal-dual HKM path following with Mehrotra correction."""
    m = std.m
    y = np.array(y0, dtype=float)
    Zg, zl = std.slack(y)
    Xg = [np.broadcast_to(np.eye(g.C.shape[1]), g.C.shape).copy() for g in std.groups]
    xl = np.ones_like(zl)
    bnorm = 1.0 + np.linalg.norm(std.b)
    pobj = dobj = math.nan
    relgap = pinf = pres1 = math.inf

    def stalled(it, msg):
        ok = relgap < gap_tol and pinf < 100 * inf_tol
        return _IpmResult(y, pobj, dobj, it, ok, message="" if ok else msg, xl=xl, pres1=pres1)

    for it in range(1, max_iter + 1):
        LZ = [_chol_stack(Z) for Z in Zg]
        if any(L is None or not _well_posed(L) for L in LZ) or np.any(zl <= 0):
            return stalled(it, "slack lost definiteness")
        Zinv = [_inv_from_chol(L) for L in LZ]
        gap = sum(float(np.einsum("bij,bij->", X, Z)) for X, Z in zip(Xg, Zg)) + float(xl @ zl)
        mu = gap / std.nu
        rp = std.b - std.apply_A(Xg, xl)
        pobj = sum(float(np.einsum("bij,bij->", X, g.C)) for X, g in zip(Xg, std.groups)) + float(xl @ std.lp_c)
        dobj = float(std.b @ y)
        relgap = gap / (1.0 + abs(pobj) + abs(dobj))
        pinf = np.linalg.norm(rp) / bnorm
        pres1 = float(np.abs(rp).sum())
        if stop is not None and stop(y, pobj, pres1):
            return _IpmResult(y, pobj, dobj, it, False, stopped_early=True, xl=xl, pres1=pres1)
        if relgap < gap_tol and pinf < inf_tol:
            return _IpmResult(y, pobj, dobj, it, True, xl=xl, pres1=pres1)

        # Schur complement M_pq = <A_p, X A_q Z^-1>
        Msch = np.zeros((m + 1) * (m + 1))
        for g, X, Zi in zip(std.groups, Xg, Zinv):
            W = X[:, None] @ g.A @ Zi[:, None]
            Mb = np.einsum("bpij,bqij->bpq", g.A, W)
            Mb = 0.5 * (Mb + np.swapaxes(Mb, 1, 2))
            flat = g.I[:, :, None] * (m + 1) + g.I[:, None, :]
            Msch += np.bincount(flat.ravel(), Mb.ravel(), minlength=(m + 1) * (m + 1))
        Msch = Msch.reshape(m + 1, m + 1)[:m, :m]
        Msch[np.diag_indices(m)] += np.bincount(std.lp_k, xl / zl, minlength=m)
        Msch[np.diag_indices(m)] += 1e-14 * (1.0 + np.abs(np.diag(Msch)).max())
        try:
            cho = np.linalg.cholesky(Msch)
        except np.linalg.LinAlgError:
            return stalled(it, "Schur complement not positive definite")

        def solve_m(rhs):
            return np.linalg.solve(cho.T, np.linalg.solve(cho, rhs))

        def direction(sigma_mu, corr_g=None, corr_l=None):
            # complementarity target X Z = sigma_mu I (minus second-order term)
            Tg = [sigma_mu * Zi - X for X, Zi in zip(Xg, Zinv)]
            tl = sigma_mu / zl - xl
            if corr_g is not None:
                Tg = [T - cg @ Zi for T, cg, Zi in zip(Tg, corr_g, Zinv)]
                tl = tl - corr_l / zl
            rhs = rp - std.apply_A(Tg, tl)
            dy = np.zeros(m)
            resid = rhs
            # iterative refinement against the exact operator keeps A(dX) = rp accurate
            for _ in range(3):
                dy = dy + solve_m(resid)
                dZg, dzl = std.apply_AT(dy)
                dZg = [-S for S in dZg]
                dzl = -dzl
                dXg = [T - X @ dZ @ Zi for T, X, dZ, Zi in zip(Tg, Xg, dZg, Zinv)]
                dXg = [0.5 * (D + np.swapaxes(D, -1, -2)) for D in dXg]
                dxl = tl - xl * dzl / zl
                resid = rp - std.apply_A(dXg, dxl)
                if np.linalg.norm(resid) <= 1e-3 * inf_tol * bnorm:
                    break
            return dy, dXg, dxl, dZg, dzl

        def steps(dXg, dxl, dZg, dzl):
            LX = [_chol_stack(X) for X in Xg]
            if any(L is None for L in LX):
                return 0.0, 0.0
            ap = min([_max_step_psd(L, D) for L, D in zip(LX, dXg)] + [_max_step_lp(xl, dxl)])
            ad = min([_max_step_psd(L, D) for L, D in zip(LZ, dZg)] + [_max_step_lp(zl, dzl)])
            return ap, ad

        dy, dXa, dxa, dZa, dza = direction(0.0)
        ap, ad = steps(dXa, dxa, dZa, dza)
        ap, ad = min(1.0, ap), min(1.0, ad)
        gap_aff = sum(
            float(np.einsum("bij,bij->", X + ap * dX, Z + ad * dZ)) for X, dX, Z, dZ in zip(Xg, dXa, Zg, dZa)
        ) + float((xl + ap * dxa) @ (zl + ad * dza))
        sigma = min(1.0, max(0.0, gap_aff / gap)) ** 3
        corr_g = [dX @ dZ for dX, dZ in zip(dXa, dZa)]
        corr_l = dxa * dza
        dy, dXg, dxl, dZg, dzl = direction(sigma * mu, corr_g, corr_l)
        ap, ad = steps(dXg, dxl, dZg, dzl)
        tau = 0.98
        ap, ad = min(1.0, tau * ap), min(1.0, tau * ad)
        log.debug("it %d pobj %.10g dobj %.10g relgap %.2e pinf %.2e sigma %.2e ap %.2e ad %.2e",
                  it, pobj, dobj, relgap, pinf, sigma, ap, ad)
        if ap < 1e-12 and ad < 1e-12:
            return stalled(it, "step length collapsed")
        Xg = [X + ap * dX for X, dX in zip(Xg, dXg)]
        xl = xl + ap * dxl
        y_new = y + ad * dy
        Zg_new, zl_new = std.slack(y_new)
        # recompute slacks from y; back off if rounding broke definiteness
        tries = 0
        while (any(_chol_stack(Z) is None for Z in Zg_new) or np.any(zl_new <= 0)) and tries < 30:
            ad *= 0.5
            y_new = y + ad * dy
            Zg_new, zl_new = std.slack(y_new)
            tries += 1
        if tries == 30:
            return stalled(it, "dual step failed")
        y, Zg, zl = y_new, Zg_new, zl_new
    return stalled(max_iter, "iteration limit")


# ---------------------------------------------------------------------------
# phases


def _normalized(prob: SdpProblem) -> list[Block]:
    out = []
    for b in prob.blocks:
        sc = b.scale()
        if sc == 0:
            continue
        out.append(Block(b.const / sc, b.idx, b.coef / sc, b.tag))
    return out


def _box_rows(m, bound, extra=()):
    rows = []
    for k in range(m):
        rows.append((k, 1.0, bound))
        rows.append((k, -1.0, bound))
    rows.extend(extra)
    return rows


def _relgap(res: _IpmResult) -> float:
    return abs(res.pobj - res.dobj) / (1.0 + abs(res.pobj) + abs(res.dobj))


def _presolve(prob: SdpProblem):
    used = np.zeros(prob.m, dtype=bool)
    for b in prob.blocks:
        used[b.idx] = True
    if prob.objective is not None:
        used[prob.objective[1]] = True
    keep = np.flatnonzero(used)
    remap = -np.ones(prob.m, dtype=int)
    remap[keep] = np.arange(len(keep))
    blocks = [Block(b.const, remap[b.idx], b.coef, b.tag) for b in _normalized(prob)]
    nonneg = [int(remap[k]) for k in prob.nonneg_idx if remap[k] >= 0]
    # sign constraints become 1x1 blocks so they are shifted and relaxed like the rest
    minus_one = -np.ones((1, 1, 1))
    blocks += [Block(np.zeros((1, 1)), np.array([k]), minus_one, ("sign", k)) for k in nonneg]
    return keep, blocks, nonneg


def _expand(keep, m, xr):
    x = np.zeros(m)
    x[keep] = xr
    return x


# relative change of the optimum per relative change of the box above which the box is widened
BOX_SENSITIVITY_TOL = 1e-6


def _box_sensitivity(res: _IpmResult, rows, bound: float, scale: float) -> float:
    """Derivative of the optimal value with respect to ``log(bound)``, relative to ``scale``."""
    if res.xl is None:
        return 0.0
    on_box = np.array([c == bound for _, _, c in rows])
    return float(res.xl[: len(rows)][on_box].sum()) * bound / (1.0 + abs(scale))


def _bounds(opts: SolverOptions):
    b = opts.var_bound
    while True:
        yield replace(opts, var_bound=b)
        if b >= opts.max_var_bound:
            return
        b = min(100.0 * b, opts.max_var_bound)


def feasible(prob: SdpProblem, opts: SolverOptions | None = None):
    """Phase-1 feasibility check.  Returns ``(is_feasible, witness, solution)``.

    The variable box is widened when a failed attempt ends near it.
    """
    opts = opts or SolverOptions()
    prob.check()
    for o in _bounds(opts):
        out = _feasible_once(prob, o)
        if out[0] or out[2].meta.get("box_sensitivity", 0.0) <= BOX_SENSITIVITY_TOL:
            return out
    return out


def _feasible_once(prob: SdpProblem, opts: SolverOptions):
    keep, blocks, nonneg = _presolve(SdpProblem(prob.m, prob.blocks, prob.nonneg_idx, None))
    m = len(keep)
    if m == 0:
        x = np.zeros(prob.m)
        viol = prob.max_violation(x)
        ok = viol <= opts.feas_tol
        sol = SdpSolution(OPTIMAL if ok else INFEASIBLE, x, None, viol, 0.0, 0)
        return ok, (x if ok else None), sol
    t, xr, res, lb, sens = _phase1_run(blocks, m, nonneg, opts)
    x = _expand(keep, prob.m, xr)
    viol = prob.max_violation(x)
    verdict = _phase1_verdict(t, lb, res, opts)
    if verdict == OPTIMAL and viol <= opts.feas_tol:
        return True, x, SdpSolution(OPTIMAL, x, None, viol, _relgap(res), res.iterations)
    meta = {"box_sensitivity": sens, "shift_lower_bound": lb}
    if verdict == INFEASIBLE:
        return False, None, SdpSolution(
            INFEASIBLE, x, None, viol, _relgap(res), res.iterations, f"phase-1 shift {t:.3g}", meta=meta
        )
    return False, None, SdpSolution(NUMERIC_FAILURE, x, None, viol, math.nan, res.iterations, res.message, meta=meta)


def _phase1_run(blocks, m, nonneg, opts):
    """Minimise ``t`` subject to ``G_b(x) <= t I``.

    Returns ``(t, x, ipm_result, lower_bound_on_t, box_sensitivity)``.
    """
    bound = opts.var_bound
    zero = np.zeros(m)
    t_zero = max((float(np.linalg.eigvalsh(b.value(zero))[-1]) for b in blocks), default=-math.inf)
    if t_zero <= 0.25 * opts.feas_tol:
        res = _IpmResult(zero, -t_zero, -t_zero, 0, True, pres1=0.0)
        return t_zero, zero, res, t_zero, 0.0
    x0 = zero.copy()
    x0[list(nonneg)] = 1.0
    t0 = max(float(np.linalg.eigvalsh(b.value(x0))[-1]) for b in blocks) + 1.0
    t0 = max(t0, 1.0)
    tmax = max(10.0 * t0, 1e3)
    rows = _box_rows(m, bound, extra=[(m, 1.0, 1.0), (m, -1.0, tmax)])
    b = np.zeros(m + 1)
    b[m] = -1.0
    std = _build_std(blocks, m + 1, rows, b, shift_var=m)
    ybound = max(bound, tmax)

    def lower(pobj, pres1):
        # weak duality with the primal residual charged at the box size
        return -pobj - ybound * pres1

    def stop(y, pobj, pres1):
        return y[m] <= 0.25 * opts.feas_tol or lower(pobj, pres1) > 0.5 * opts.feas_tol

    gap_tol = min(opts.gap_tol, 1e-3 * opts.feas_tol)
    res = _ipm(std, np.append(x0, t0), opts.max_iter, gap_tol, stop=stop)
    lb = lower(res.pobj, res.pres1) if math.isfinite(res.pobj) else -math.inf
    sens = _box_sensitivity(res, rows[:-2], bound, 0.0)
    return float(res.y[m]), res.y[:m], res, lb, sens


def _phase1_verdict(t, lb, res, opts) -> str:
    if t <= 0.5 * opts.feas_tol:
        return OPTIMAL
    if lb > 0.5 * opts.feas_tol or res.converged:
        return INFEASIBLE
    return NUMERIC_FAILURE


def solve(prob: SdpProblem, opts: SolverOptions | None = None) -> SdpSolution:
    """Optimise the scalar objective (or just find a feasible point).

    Starts with the box ``|x_k| <= var_bound`` and widens it while the answer
    is limited by the box.
    """
    opts = opts or SolverOptions()
    if prob.objective is None:
        ok, x, sol = feasible(prob, opts)
        return sol
    prob.check()
    target = prob.objective[1]
    iters = 0
    for o in _bounds(opts):
        sol = _solve_once(prob, o)
        iters += sol.iterations
        sol.iterations = iters
        if sol.status == UNBOUNDED or sol.meta.get("box_sensitivity", 0.0) > BOX_SENSITIVITY_TOL:
            continue
        return sol
    return sol


def _solve_once(prob: SdpProblem, opts: SolverOptions) -> SdpSolution:
    sense, target = prob.objective
    keep, blocks, nonneg = _presolve(prob)
    m = len(keep)
    tr = int(np.flatnonzero(keep == target)[0])
    t, xr, res1, lb1, sens1 = _phase1_run(blocks, m, nonneg, opts)
    iters = res1.iterations
    verdict = _phase1_verdict(t, lb1, res1, opts)
    if verdict != OPTIMAL:
        x = _expand(keep, prob.m, xr)
        meta = {"box_sensitivity": sens1, "shift_lower_bound": lb1}
        if verdict == INFEASIBLE:
            return SdpSolution(INFEASIBLE, x, None, prob.max_violation(x), _relgap(res1), iters,
                               f"phase-1 shift {t:.3g}", meta=meta)
        return SdpSolution(NUMERIC_FAILURE, x, None, prob.max_violation(x), math.nan, iters, res1.message, meta=meta)

    relax = 0.5 * (max(t, 0.0) + opts.feas_tol)
    rows = _box_rows(m, opts.var_bound)
    b = np.zeros(m)
    b[tr] = -1.0 if sense == "min" else 1.0
    std = _build_std(blocks, m, rows, b, relax=relax)
    res2 = _ipm(std, xr, opts.max_iter, opts.gap_tol)
    iters += res2.iterations
    x = _expand(keep, prob.m, res2.y)
    gap = _relgap(res2)
    meta = {"box_sensitivity": _box_sensitivity(res2, rows, opts.var_bound, res2.dobj)}
    if not res2.converged:
        viol = prob.max_violation(x)
        return SdpSolution(NUMERIC_FAILURE, x, float(x[target]), viol, gap, iters, res2.message, meta=meta)
    if abs(x[target]) >= 0.99 * opts.var_bound:
        return SdpSolution(UNBOUNDED, x, float(x[target]), prob.max_violation(x), gap, iters,
                           "objective variable reached the variable bound")

    if opts.polish:
        # the primal objective bounds the optimum; snap to it if that value is feasible
        bound_val = -res2.pobj if sense == "min" else res2.pobj
        if target in prob.nonneg_idx:
            bound_val = max(bound_val, 0.0)
        better = bound_val < x[target] if sense == "min" else bound_val > x[target]
        if better:
            ok, xw, sol_p = feasible(prob.fix(target, bound_val), opts)
            iters += sol_p.iterations
            if ok:
                xw = xw.copy()
                xw[target] = bound_val
                if prob.max_violation(xw) <= opts.feas_tol:
                    x = xw
    viol = prob.max_violation(x)
    if viol > opts.feas_tol:
        return SdpSolution(NUMERIC_FAILURE, x, float(x[target]), viol, gap, iters,
                           "returned point fails the independent eigenvalue check", meta=meta)
    return SdpSolution(OPTIMAL, x, float(x[target]), viol, gap, iters, meta=meta)


def bisect(prob: SdpProblem, lo: float | None = None, hi: float | None = None,
           opts: SolverOptions | None = None) -> SdpSolution:
    """Optimise the objective variable by bisection over feasibility problems.

    Maintains ``feasible(good) and not feasible(bad)`` until ``|good - bad| <= bisect_tol``;
    the returned ``bracket`` is ``(lo, hi)``.
    """
    opts = opts or SolverOptions()
    sense, k = prob.objective
    nonneg = k in prob.nonneg_idx
    iters = 0

    def test(v):
        nonlocal iters
        ok, x, sol = feasible(prob.fix(k, v), opts)
        iters += sol.iterations
        if sol.status == NUMERIC_FAILURE:
            raise FloatingPointError(f"feasibility check failed at {v}: {sol.message}")
        if ok:
            x = x.copy()
            x[k] = v
        return ok, x

    try:
        floor = 0.0 if nonneg else -opts.max_var_bound
        if sense == "min":
            # good = feasible upper end, bad = infeasible lower end
            ok, x = test(floor if lo is None else lo)
            if ok:
                return SdpSolution(OPTIMAL, x, float(x[k]), prob.max_violation(x), 0.0, iters, bracket=(x[k], x[k]))
            bad = floor if lo is None else lo
            good = max(1.0, abs(bad)) if hi is None else hi
            ok, xg = test(good)
            while not ok:
                bad, good = good, 2 * good if good > 0 else 1.0
                if good > opts.max_var_bound:
                    return SdpSolution(INFEASIBLE, np.zeros(prob.m), None, math.nan, math.nan, iters,
                                       "no feasible value below the variable bound")
                ok, xg = test(good)
        else:
            ok, xg = test(floor if lo is None else lo)
            if not ok:
                return SdpSolution(INFEASIBLE, np.zeros(prob.m), None, math.nan, math.nan, iters,
                                   "lower end infeasible")
            good = floor if lo is None else lo
            bad = max(1.0, 2 * abs(good)) if hi is None else hi
            ok, xb = test(bad)
            while ok:
                good, xg = bad, xb
                bad = 2 * bad
                if bad > opts.max_var_bound:
                    return SdpSolution(UNBOUNDED, xg, float(good), prob.max_violation(xg), math.nan, iters)
                ok, xb = test(bad)
        while abs(good - bad) > opts.bisect_tol:
            mid = 0.5 * (good + bad)
            ok, xm = test(mid)
            if ok:
                good, xg = mid, xm
            else:
                bad = mid
    except FloatingPointError as exc:
        return SdpSolution(NUMERIC_FAILURE, np.zeros(prob.m), None, math.nan, math.nan, iters, str(exc))
    br = (min(good, bad), max(good, bad))
    return SdpSolution(OPTIMAL, xg, float(good), prob.max_violation(xg), abs(good - bad), iters, bracket=br)


def solve_external(prob: SdpProblem, solver: str = "CLARABEL") -> SdpSolution:
    """Cross-check through cvxpy (optional dependency)."""
    import cvxpy as cp

    x = cp.Variable(prob.m)
    cons = []
    for b in prob.blocks:
        sc = b.scale() or 1.0
        expr = b.const / sc
        for k, c in zip(b.idx, b.coef):
            expr = expr + x[int(k)] * (c / sc)
        s = b.size
        S = cp.Variable((s, s), symmetric=True)
        cons += [S == -expr, S >> 0]
    if prob.nonneg_idx:
        cons.append(x[list(prob.nonneg_idx)] >= 0)
    if prob.objective is None:
        obj = cp.Minimize(0)
    else:
        sense, k = prob.objective
        obj = cp.Minimize(x[k]) if sense == "min" else cp.Maximize(x[k])
    problem = cp.Problem(obj, cons)
    problem.solve(solver=solver)
    status = {
        cp.OPTIMAL: OPTIMAL,
        cp.OPTIMAL_INACCURATE: OPTIMAL,
        cp.INFEASIBLE: INFEASIBLE,
        cp.INFEASIBLE_INACCURATE: INFEASIBLE,
        cp.UNBOUNDED: UNBOUNDED,
        cp.UNBOUNDED_INACCURATE: UNBOUNDED,
    }.get(problem.status, NUMERIC_FAILURE)
    xv = np.zeros(prob.m) if x.value is None else np.asarray(x.value, dtype=float)
    objv = None if prob.objective is None or x.value is None else float(xv[prob.objective[1]])
    return SdpSolution(status, xv, objv, prob.max_violation(xv) if x.value is not None else math.nan,
                       message=f"cvxpy/{solver}: {problem.status}")

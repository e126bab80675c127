"""Trajectories of reset systems, input batteries and scaled-graph samples.

The flow is integrated together with the running integrals of ``u.u``,
``y.y`` and ``u.y`` so that the L2 quantities come out of the same adaptive
step control as the state.  Jumps are located by bisection on the dense
output, then applied exactly as ``x+ = R x``.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import kernels
from ._kernel_py import ABSOLUTE, MULTISINE, SIGMOID, TIMER_RESET
from .model import ResetSystem

log = logging.getLogger(__name__)

SETTLE_RATIO = 1e-6
INPUT_FLOOR = 1e-6


class ZenoDetected(RuntimeError):
    """Too many jumps at one instant or per unit time."""


class TailNotSettled(RuntimeError):
    """The state did not decay before the horizon cap."""


class IntegratorFailure(RuntimeError):
    """Step size underflow in the flow integrator."""


@dataclass(frozen=True)
class InputSpec:
    """Square-integrable test input.

    ``multisine``: ``exp(-eps t) * sum_k amp[i,k] sin(omega[i,k] t + phase[i,k])`` on channel ``i``.
    ``sigmoid``: ``exp(-mu t) / (1 + exp(-a t + nu)) * direction``.
    With ``clock="timer_reset"`` the time argument restarts at every jump.
    """

    kind: str = "multisine"
    clock: str = "absolute"
    amplitudes: tuple = ()
    frequencies: tuple = ()
    phases: tuple = ()
    eps: float = 0.01
    mu: float = 0.001
    a: float = 1.0
    nu: float = 1.0
    direction: tuple = (1.0,)
    seed: int | None = None
    horizon: float | None = None  # input switched off here; None picks it from the decay rate

    def __post_init__(self):
        if self.kind not in ("multisine", "sigmoid"):
            raise ValueError(f"unknown input kind {self.kind!r}")
        if self.clock not in ("absolute", "timer_reset"):
            raise ValueError(f"unknown clock {self.clock!r}")
        for key in ("amplitudes", "frequencies", "phases"):
            object.__setattr__(self, key, tuple(tuple(float(v) for v in row) for row in getattr(self, key)))
        object.__setattr__(self, "direction", tuple(float(v) for v in self.direction))
        if self.kind == "multisine":
            if not self.amplitudes:
                raise ValueError("multisine needs at least one component")
            if self.eps <= 0:
                raise ValueError("multisine envelope rate must be positive")
        elif self.mu <= 0:
            raise ValueError("sigmoid decay rate must be positive")

    @property
    def width(self) -> int:
        return len(self.amplitudes) if self.kind == "multisine" else len(self.direction)

    def support(self) -> float:
        """Time after which the envelope is below ``INPUT_FLOOR``."""
        if self.horizon is not None:
            return float(self.horizon)
        rate = self.eps if self.kind == "multisine" else self.mu
        return math.log(1.0 / INPUT_FLOOR) / rate

    def kernel_args(self, p: int):
        if self.width != p:
            raise ValueError(f"input has {self.width} channels, system expects {p}")
        if self.kind == "multisine":
            amp = np.array(self.amplitudes, dtype=float).reshape(p, -1)
            omg = np.array(self.frequencies, dtype=float).reshape(p, -1)
            phs = np.array(self.phases, dtype=float).reshape(p, -1)
            dirv = np.ones(p)
        else:
            amp = omg = phs = np.zeros((p, 0))
            # samples are invariant to input scaling (homogeneous dynamics); start at |u(0)| = |direction|
            dirv = np.array(self.direction, dtype=float) * (1.0 + math.exp(min(self.nu, 700.0)))
        kind = MULTISINE if self.kind == "multisine" else SIGMOID
        clock = ABSOLUTE if self.clock == "absolute" else TIMER_RESET
        return kind, clock, amp, omg, phs, dirv

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "InputSpec":
        return cls(**data)


@dataclass(frozen=True)
class SimOptions:
    rtol: float = 1e-9
    atol_x: float = 1e-12
    atol_q: float = 1e-12
    max_step: float = 1.0
    event_tol: float = 1e-10
    max_consecutive_jumps: int = 100
    max_jumps_per_unit_time: float = 1e4
    t_max: float = 1e4
    chunk: float = 50.0
    record: bool = False
    # timer-reset inputs stop at the first jump after their support, or at this multiple of it
    reset_cutoff_factor: float = 2.0
    support_fraction: float = 0.25

    def refined(self, factor: float = 0.5) -> "SimOptions":
        return SimOptions(**{**asdict(self), "rtol": self.rtol * factor, "atol_x": self.atol_x * factor,
                             "atol_q": self.atol_q * factor})


@dataclass
class Trajectory:
    t: np.ndarray
    x: np.ndarray
    u: np.ndarray
    y: np.ndarray
    tau: np.ndarray
    jump_times: list[float]
    jump_states: list[np.ndarray]  # pre-jump states
    post_states: list[np.ndarray]
    u2: float
    y2: float
    uy: float
    t_end: float
    t_off: float
    x_end: np.ndarray
    peak: float
    settled: bool
    truncation_error: float
    steps: int
    spec: InputSpec

    @property
    def jumps(self) -> int:
        return len(self.jump_times)

    def dump_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            n, p = self.x.shape[1], self.u.shape[1]
            w.writerow(["t", "tau"] + [f"x{i}" for i in range(n)] + [f"u{i}" for i in range(p)]
                       + [f"y{i}" for i in range(self.y.shape[1])])
            for k in range(len(self.t)):
                w.writerow([repr(float(v)) for v in (self.t[k], self.tau[k], *self.x[k], *self.u[k], *self.y[k])])


def _tail_rate(sys: ResetSystem) -> float:
    eig = np.linalg.eigvals(sys.A)
    return float(-np.max(eig.real)) if sys.n else math.inf


def simulate(sys: ResetSystem, inp: InputSpec, opts: SimOptions | None = None) -> Trajectory:
    """Integrate from ``x(0) = 0`` until the input is off and the state has settled."""
    opts = opts or SimOptions()
    n, p = sys.n, sys.p
    kind, clock, amp, omg, phs, dirv = inp.kernel_args(p)
    A, B, C, D, M, R = (np.ascontiguousarray(getattr(sys, k), dtype=float) for k in "ABCDMR")
    # leave room after the input switch-off for the state to settle
    support = min(inp.support(), opts.support_fraction * opts.t_max)
    timer = clock == TIMER_RESET
    # timer-reset inputs are cut at a jump so the remaining state is R x
    t_off = support if not timer else min(opts.reset_cutoff_factor * support, 2 * opts.support_fraction * opts.t_max)
    x = np.zeros(n)
    q = np.zeros(3)
    t = 0.0
    t_reset = 0.0
    h = min(1e-3, opts.max_step)
    peak = 0.0
    steps = 0
    jump_t: list[float] = []
    jump_pre: list[np.ndarray] = []
    jump_post: list[np.ndarray] = []
    rec_t: list[float] = [0.0]
    rec_x: list[np.ndarray] = [x.copy()]
    rec_r: list[float] = [0.0]
    same_instant = 0
    last_jump = -math.inf
    settled = False

    while True:
        # the integration target is the next chunk boundary, the input switch-off or the cap
        target = min(t + opts.chunk, opts.t_max)
        if t < t_off:
            target = min(target, t_off)
        status, t_new, x, q, h, ns, pk, rt, rx = kernels.flow_segment(
            A, B, C, D, M, x, q, t, target, h, t_reset, t_off, kind, clock, inp.eps, inp.mu, inp.a, inp.nu,
            amp, omg, phs, dirv, opts.rtol, opts.atol_x, opts.atol_q, opts.max_step, opts.event_tol, opts.record)
        steps += ns
        peak = max(peak, pk)
        if opts.record and rt:
            rec_t += rt
            rec_x += rx
            rec_r += [t_reset] * len(rt)
        t = t_new
        if status == 2:
            raise IntegratorFailure(f"step size underflow at t={t:.6g}")
        if status == 1:
            same_instant = same_instant + 1 if t - last_jump <= 1e-12 * max(1.0, t) else 1
            last_jump = t
            x_pre = x.copy()
            x = R @ x_pre
            jump_t.append(t)
            jump_pre.append(x_pre)
            jump_post.append(x.copy())
            # repeated jumps at the same instant while R x stays in the jump set
            while x @ M @ x < 0.0:
                same_instant += 1
                if same_instant > opts.max_consecutive_jumps:
                    break
                x_pre = x.copy()
                x = R @ x_pre
                jump_t.append(t)
                jump_pre.append(x_pre)
                jump_post.append(x.copy())
            if same_instant > opts.max_consecutive_jumps:
                raise ZenoDetected(f"more than {opts.max_consecutive_jumps} consecutive jumps at t={t:.6g}")
            if len(jump_t) > opts.max_jumps_per_unit_time * max(t, 1.0):
                raise ZenoDetected(f"{len(jump_t)} jumps by t={t:.6g}")
            if timer:
                t_reset = t
                if support <= t < t_off:
                    t_off = t
            if opts.record:
                rec_t.append(t)
                rec_x.append(x.copy())
                rec_r.append(t_reset)
            h = min(h, 1e-3)
            continue
        if t >= t_off and np.linalg.norm(x) <= SETTLE_RATIO * peak:
            settled = True
            break
        if t >= t_off and peak == 0.0:
            settled = True
            break
        if t >= opts.t_max:
            break

    t_arr = np.array(rec_t)
    x_arr = np.array(rec_x).reshape(len(rec_t), n)
    u_arr = np.array([
        kernels.input_value(tt, rr, t_off, kind, clock, inp.eps, inp.mu, inp.a, inp.nu, amp, omg, phs, dirv)
        for tt, rr in zip(rec_t, rec_r)
    ]).reshape(len(rec_t), p)
    y_arr = x_arr @ C.T + u_arr @ D.T
    tau = t_arr - np.array(rec_r) if timer else t_arr.copy()
    alpha = _tail_rate(sys)
    cnorm = np.linalg.norm(C, 2) if C.size else 0.0
    x_norm = float(np.linalg.norm(x))
    # output energy after the horizon; the truncated input is itself the L2 signal being sampled
    tail_y = cnorm ** 2 * x_norm ** 2 / (2 * alpha) if alpha > 0 else (0.0 if x_norm == 0 else math.inf)
    return Trajectory(
        t=t_arr, x=x_arr, u=u_arr, y=y_arr, tau=tau, jump_times=jump_t, jump_states=jump_pre,
        post_states=jump_post, u2=float(q[0]), y2=float(q[1]), uy=float(q[2]), t_end=t, t_off=t_off,
        x_end=x.copy(), peak=peak, settled=settled, truncation_error=float(tail_y), steps=steps, spec=inp,
    )


@dataclass(frozen=True)
class SgSample:
    rho: float
    theta: float
    u_norm: float
    y_norm: float
    inner: float
    truncation_error: float = 0.0
    spec: InputSpec | None = field(default=None, compare=False)
    index: int = -1

    @property
    def z(self) -> complex:
        return complex(self.rho * math.cos(self.theta), self.rho * math.sin(self.theta))


def sample_from_integrals(u2: float, y2: float, uy: float, truncation_error: float = 0.0,
                          spec: InputSpec | None = None, index: int = -1) -> SgSample:
    if not u2 > 0:
        raise ValueError("input has zero energy")
    un = math.sqrt(u2)
    yn = math.sqrt(max(y2, 0.0))
    rho = yn / un
    if yn == 0.0:
        theta = 0.0
    else:
        theta = math.acos(min(1.0, max(-1.0, uy / (un * yn))))
    return SgSample(rho, theta, un, yn, uy, truncation_error, spec, index)


def sg_sample(traj: Trajectory, index: int = -1) -> SgSample:
    if not traj.settled:
        raise TailNotSettled(
            f"|x(T)|={np.linalg.norm(traj.x_end):.3g} vs peak {traj.peak:.3g} at T={traj.t_end:.6g}; extend the horizon"
        )
    return sample_from_integrals(traj.u2, traj.y2, traj.uy, traj.truncation_error, traj.spec, index)


def simulate_sample(sys: ResetSystem, inp: InputSpec, opts: SimOptions | None = None, index: int = -1) -> SgSample:
    return sg_sample(simulate(sys, inp, opts), index)


@dataclass(frozen=True)
class BatterySpec:
    multisine: int = 100
    sigmoid_a: int = 12  # grid points for the sigmoid rate
    sigmoid_nu: int = 10  # grid points for the sigmoid offset
    a_range: tuple = (0.05, 10.0)
    nu_range: tuple = (0.1, 100.0)
    omega_range: tuple = (1e-2, 1e2)
    max_components: int = 5
    eps: float = 0.01
    mu: float = 0.001

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "BatterySpec":
        data = dict(data)
        for key in ("a_range", "nu_range", "omega_range"):
            if key in data:
                data[key] = tuple(data[key])
        return cls(**data)


def battery_inputs(p: int, spec: BatterySpec, seed: int = 0) -> list[InputSpec]:
    """Deterministic list of multisine inputs followed by the sigmoid grid."""
    rng = np.random.default_rng(seed)
    out = []
    lo, hi = np.log(spec.omega_range[0]), np.log(spec.omega_range[1])
    for k in range(spec.multisine):
        K = int(rng.integers(1, spec.max_components + 1))
        amp = rng.standard_normal((p, K))
        amp /= np.linalg.norm(amp)
        omg = np.exp(rng.uniform(lo, hi, (p, K)))
        phs = rng.uniform(0.0, 2 * np.pi, (p, K))
        out.append(InputSpec("multisine", "absolute", amp.tolist(), omg.tolist(), phs.tolist(), eps=spec.eps,
                             direction=(1.0,) * p, seed=seed * 100003 + k))
    a_grid = np.geomspace(*spec.a_range, spec.sigmoid_a) if spec.sigmoid_a else []
    nu_grid = np.geomspace(*spec.nu_range, spec.sigmoid_nu) if spec.sigmoid_nu else []
    for a in a_grid:
        for nu in nu_grid:
            if p == 1:
                d = np.ones(1)
            else:
                d = rng.standard_normal(p)
                d /= np.linalg.norm(d)
            out.append(InputSpec("sigmoid", "timer_reset", mu=spec.mu, a=float(a), nu=float(nu),
                                 direction=tuple(d.tolist()), seed=seed))
    return out


@dataclass
class BatteryResult:
    samples: list[SgSample]
    failures: list[tuple[int, str]]


def _battery_worker(args):
    sys_dict, inp, opts, index = args
    sys = ResetSystem.from_dict(sys_dict)
    try:
        return index, simulate_sample(sys, inp, opts, index), None
    except (ZenoDetected, TailNotSettled, IntegratorFailure, ValueError) as exc:
        return index, None, f"{type(exc).__name__}: {exc}"


def run_battery(sys: ResetSystem, inputs: list[InputSpec], opts: SimOptions | None = None,
                threads: int = 1) -> BatteryResult:
    """Simulate every input; raises only if every member fails."""
    opts = opts or SimOptions()
    jobs = [(sys.to_dict(), inp, opts, k) for k, inp in enumerate(inputs)]
    if threads > 1:
        with ProcessPoolExecutor(threads) as ex:
            results = list(ex.map(_battery_worker, jobs))
    else:
        results = [_battery_worker(j) for j in jobs]
    results.sort(key=lambda r: r[0])
    samples = [s for _, s, _ in results if s is not None]
    failures = [(k, msg) for k, _, msg in results if msg is not None]
    for k, msg in failures:
        log.warning("battery member %d failed: %s", k, msg)
    if inputs and not samples:
        kinds = {m.split(":")[0] for _, m in failures}
        if kinds == {"ZenoDetected"}:
            raise ZenoDetected(failures[0][1])
        raise RuntimeError(f"all {len(inputs)} battery members failed; first: {failures[0][1]}")
    return BatteryResult(samples, failures)


def battery(sys: ResetSystem, spec: BatterySpec | None = None, seed: int = 0, opts: SimOptions | None = None,
            threads: int = 1) -> list[SgSample]:
    return run_battery(sys, battery_inputs(sys.p, spec or BatterySpec(), seed), opts, threads).samples


SAMPLE_COLUMNS = ["rho", "theta", "re_z", "im_z", "kind", "seed", "params", "truncation_error"]


def _params(spec: InputSpec | None) -> str:
    if spec is None:
        return "{}"
    d = spec.to_dict()
    for key in ("kind", "seed"):
        d.pop(key)
    return json.dumps(d, sort_keys=True, separators=(",", ":"))


def save_samples(samples: list[SgSample], path, header: dict | None = None) -> None:
    """CSV with one row per sample; ``header`` entries go into leading comment lines."""
    with open(path, "w", newline="") as fh:
        for key, val in sorted((header or {}).items()):
            fh.write(f"# {key}: {val}\n")
        w = csv.writer(fh)
        w.writerow(SAMPLE_COLUMNS)
        for s in samples:
            z = s.z
            w.writerow([repr(s.rho), repr(s.theta), repr(z.real), repr(z.imag),
                        s.spec.kind if s.spec else "", "" if s.spec is None or s.spec.seed is None else s.spec.seed,
                        _params(s.spec), repr(s.truncation_error)])


def load_samples(path) -> list[SgSample]:
    with open(path, newline="") as fh:
        rows = [line for line in fh if not line.startswith("#")]
    reader = csv.DictReader(rows)
    if reader.fieldnames is None or "rho" not in reader.fieldnames:
        raise ValueError(f"{path}: not a samples file")
    out = []
    for k, row in enumerate(reader):
        rho, theta = float(row["rho"]), float(row["theta"])
        spec = None
        if row.get("kind"):
            params = json.loads(row.get("params") or "{}")
            seed = int(row["seed"]) if row.get("seed") not in (None, "") else None
            spec = InputSpec.from_dict({**params, "kind": row["kind"], "seed": seed})
        out.append(SgSample(rho, theta, math.nan, math.nan, math.nan, float(row.get("truncation_error") or 0.0), spec, k))
    return out

"""Command-line pipeline: bound, sample, hull and check.

Exit codes: 0 success, 1 check verdict false, 2 configuration or usage error,
3 solver exhaustion, 4 Zeno behaviour detected.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import hhull as hh
from . import lmi, sdp
from .model import ResetSystem, load_system
from .partition import build_partition
from .region import RegionSG, Window, area, load_region, region_svg, save_region
from .simulator import (
    BatterySpec,
    SimOptions,
    ZenoDetected,
    battery_inputs,
    load_samples,
    run_battery,
    save_samples,
)
from .svg import SvgCanvas

log = logging.getLogger("resetsg")

EXIT_OK = 0
EXIT_FALSE = 1
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_ZENO = 4


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Grid:
    """``start + step * k`` for ``k = 0 .. count-1``."""

    start: float
    step: float
    count: int

    def values(self) -> np.ndarray:
        return self.start + self.step * np.arange(self.count)

    @classmethod
    def parse(cls, data) -> "Grid":
        if isinstance(data, dict):
            g = cls(float(data["start"]), float(data["step"]), int(data["count"]))
        else:
            start, step, count = data
            g = cls(float(start), float(step), int(count))
        if g.count < 0:
            raise ConfigError("grid count must be nonnegative")
        return g


def _known(cls, data: dict, what: str) -> dict:
    names = {f.name for f in fields(cls)}
    extra = set(data) - names
    if extra:
        raise ConfigError(f"unknown {what} keys: {sorted(extra)}")
    return data


@dataclass
class RunConfig:
    system: dict
    partition_n: int = 40
    interior_centers: Grid = Grid(-1.0, 0.05, 81)
    exterior_centers: Grid = Grid(-1.0, 0.25, 81)
    solver: sdp.SolverOptions = field(default_factory=sdp.SolverOptions)
    battery: BatterySpec = field(default_factory=BatterySpec)
    simulation: SimOptions = field(default_factory=SimOptions)
    seed: int = 0
    hard_sg: bool = False
    baseline: bool = False
    window: tuple = (-0.5, 1.5, -1.0, 1.0)
    raster: int = 401
    threads: int = 1
    out: str | None = None

    def __post_init__(self):
        n = self.partition_n
        if not (n == 1 or (n >= 4 and (n - 2) % 2 == 0)):
            raise ConfigError(f"partition_n must be 1 or >= 4 with N-2 even, got {n}")
        try:
            Window.parse(self.window)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad window {self.window}: {exc}") from exc
        if self.raster < 2:
            raise ConfigError("raster must be at least 2")

    @property
    def effective_n(self) -> int:
        return 1 if self.baseline else self.partition_n

    def reset_system(self) -> ResetSystem:
        return ResetSystem.from_dict(self.system)

    def canonical(self) -> dict:
        """Everything that affects results; the output path and thread count do not."""
        return {
            "system": self.system,
            "partition_n": self.effective_n,
            "interior_centers": asdict(self.interior_centers),
            "exterior_centers": asdict(self.exterior_centers),
            "solver": asdict(self.solver),
            "battery": self.battery.to_dict(),
            "simulation": asdict(self.simulation),
            "seed": self.seed,
            "hard_sg": self.hard_sg,
            "window": list(self.window),
            "raster": self.raster,
        }

    def hash(self) -> str:
        blob = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    return config_from_dict(data, path.parent)


def config_from_dict(data: dict, base: Path | None = None) -> RunConfig:
    data = dict(data)
    try:
        sys_entry = data.pop("system")
    except KeyError:
        raise ConfigError("config needs a 'system' entry") from None
    if isinstance(sys_entry, str):
        sys_path = Path(sys_entry)
        if not sys_path.is_absolute() and base is not None:
            sys_path = base / sys_path
        try:
            sys_entry = load_system(sys_path).to_dict()
        except (OSError, ValueError, KeyError) as exc:
            raise ConfigError(f"cannot load system {sys_path}: {exc}") from exc
    try:
        ResetSystem.from_dict(sys_entry)
        kw = _known(RunConfig, data, "config")
        for key in ("interior_centers", "exterior_centers"):
            if key in kw:
                kw[key] = Grid.parse(kw[key])
        if "solver" in kw:
            kw["solver"] = sdp.SolverOptions(**_known(sdp.SolverOptions, kw["solver"], "solver"))
        if "battery" in kw:
            kw["battery"] = BatterySpec.from_dict(_known(BatterySpec, kw["battery"], "battery"))
        if "simulation" in kw:
            kw["simulation"] = SimOptions(**_known(SimOptions, kw["simulation"], "simulation"))
        if "window" in kw:
            kw["window"] = tuple(float(v) for v in kw["window"])
        return RunConfig(system=sys_entry, **kw)
    except ConfigError:
        raise
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigError(f"invalid config: {exc}") from exc


def _write_json(path: Path, data: dict) -> None:
    with open(path, "w") as fh:
        json.dump(data, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _out_dir(args, cfg: RunConfig | None) -> Path:
    out = args.out or (cfg.out if cfg else None)
    if not out:
        raise ConfigError("no output directory (use --out)")
    p = Path(out)
    p.mkdir(parents=True, exist_ok=True)
    return p


def cmd_bound(cfg: RunConfig, out: Path) -> int:
    rs = cfg.reset_system()
    try:
        part = build_partition(rs.M, cfg.effective_n)
    except ValueError as exc:
        raise ConfigError(f"cannot partition the state space: {exc}") from exc
    try:
        res = lmi.sweep(rs, part, cfg.interior_centers.values(), cfg.exterior_centers.values(), cfg.solver,
                        hard_sg=cfg.hard_sg, threads=cfg.threads)
    except RuntimeError as exc:
        _write_json(out / "error.json", {"config_hash": cfg.hash(), "error": str(exc), "exit_code": EXIT_SOLVER})
        log.error("%s", exc)
        return EXIT_SOLVER
    h = cfg.hash()
    reg = res.region
    meta = {"config_hash": h, "partition_n": cfg.effective_n, "baseline": cfg.baseline, "hard_sg": cfg.hard_sg}
    save_region(reg, out / "region.json", meta)
    statuses: dict[str, int] = {}
    for r in res.results:
        statuses[r.status] = statuses.get(r.status, 0) + 1
    _write_json(out / "sweep_report.json", {
        **meta,
        "tasks": res.report(),
        "discs": len(reg),
        "statuses": statuses,
        "window": list(cfg.window),
        "raster": cfg.raster,
        "area": area(reg, cfg.window, cfg.raster) if len(reg) else None,
    })
    canvas = region_svg(reg, cfg.window, cfg.raster)
    canvas.comment(f"config_hash {h}")
    canvas.save(out / "region.svg")
    log.info("%d discs from %d tasks", len(reg), len(res.results))
    if len(reg) == 0:
        return EXIT_SOLVER
    return EXIT_OK


def cmd_sample(cfg: RunConfig, out: Path) -> int:
    rs = cfg.reset_system()
    inputs = battery_inputs(rs.p, cfg.battery, cfg.seed)
    if not inputs:
        raise ConfigError("battery is empty")
    try:
        res = run_battery(rs, inputs, cfg.simulation, cfg.threads)
    except ZenoDetected as exc:
        _write_json(out / "error.json", {"config_hash": cfg.hash(), "error": str(exc), "exit_code": EXIT_ZENO})
        log.error("%s", exc)
        return EXIT_ZENO
    except RuntimeError as exc:
        _write_json(out / "error.json", {"config_hash": cfg.hash(), "error": str(exc), "exit_code": EXIT_SOLVER})
        log.error("%s", exc)
        return EXIT_SOLVER
    save_samples(res.samples, out / "samples.csv", {"config_hash": cfg.hash(), "seed": cfg.seed})
    _write_json(out / "sample_report.json", {
        "config_hash": cfg.hash(),
        "members": len(inputs),
        "samples": len(res.samples),
        "failures": [{"index": k, "error": msg} for k, msg in res.failures],
    })
    log.info("%d samples, %d failures", len(res.samples), len(res.failures))
    return EXIT_OK


def _read_samples(path: Path) -> np.ndarray:
    try:
        samples = load_samples(path)
    except OSError as exc:
        raise ConfigError(f"cannot read samples {path}: {exc}") from exc
    except (ValueError, KeyError) as exc:
        raise ConfigError(str(exc)) from exc
    if not samples:
        raise ConfigError(f"{path}: no samples")
    return np.array([s.z for s in samples])


def cmd_hull(samples_path: Path, out: Path, window, config_hash: str | None) -> int:
    z = _read_samples(samples_path)
    h = hh.hhull(z)
    meta = {"config_hash": config_hash, "samples": len(z)}
    hh.save_hull(h, out / "hull.json", meta)
    canvas = SvgCanvas(Window.parse(window))
    if config_hash:
        canvas.comment(f"config_hash {config_hash}")
    hh.hull_svg(h, window, canvas)
    canvas.points(np.concatenate([z, np.conj(z)]))
    canvas.save(out / "hull.svg")
    return EXIT_OK


def cmd_check(region_path: Path, samples_path: Path, out: Path, window, res: int, config_hash: str | None,
              seed: int = 0) -> int:
    z = _read_samples(samples_path)
    try:
        reg = load_region(region_path)
    except (OSError, ValueError, KeyError) as exc:
        raise ConfigError(f"cannot read region {region_path}: {exc}") from exc
    cert = hh.certify_inclusion(z, reg, seed=seed)
    h = hh.hhull(z)
    gap = None
    if cert.verdict:
        try:
            gap = hh.gap_metric(h, reg, window, res)
        except ValueError as exc:
            log.warning("gap metric unavailable: %s", exc)
    report = {
        "config_hash": config_hash,
        **cert.to_dict(),
        "samples": len(z),
        "violating_samples": [{"index": i, "z": [z[i].real, z[i].imag], "margin": cert.margins[i]}
                              for i in cert.violating],
        "gap_metric": gap,
        "window": list(window),
        "raster": res,
    }
    _write_json(out / "certificate.json", report)
    canvas = region_svg(reg, window, res)
    if config_hash:
        canvas.comment(f"config_hash {config_hash}")
    hh.hull_svg(h, window, canvas)
    canvas.points(np.concatenate([z, np.conj(z)]))
    canvas.save(out / "overlay.svg")
    log.info("verdict %s, %d violating samples, gap metric %s", cert.verdict, len(cert.violating), gap)
    return EXIT_OK if cert.verdict else EXIT_FALSE


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="resetsg", description="Scaled-graph over-bounds and samples of reset systems.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("bound", "solve the disc sweep and write region.json"),
        ("sample", "simulate the input battery and write samples.csv"),
        ("hull", "hyperbolic hull of samples.csv"),
        ("check", "certify that the hull of the samples lies in the region"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=name in ("bound", "sample"), help="run configuration (JSON)")
        p.add_argument("--out", help="output directory")
        p.add_argument("--baseline", action="store_true", help="common quadratic storage (N=1)")
        p.add_argument("--hard-sg", action="store_true", help="require positive semidefinite storage")
        p.add_argument("--threads", type=int, help="worker processes")
        p.add_argument("--seed", type=int, help="battery seed")
        p.add_argument("-v", "--verbose", action="count", default=0)
        if name in ("hull", "check"):
            p.add_argument("--samples", help="samples CSV (default: <out>/samples.csv)")
        if name == "check":
            p.add_argument("--region", help="region JSON (default: <out>/region.json)")
    return ap


def _apply_flags(cfg: RunConfig, args) -> RunConfig:
    if args.baseline:
        cfg = replace(cfg, baseline=True)
    if args.hard_sg:
        cfg = replace(cfg, hard_sg=True)
    if args.threads is not None:
        if args.threads < 1:
            raise ConfigError("--threads must be positive")
        cfg = replace(cfg, threads=args.threads)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    return cfg


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _apply_flags(load_config(args.config), args) if args.config else None
        out = _out_dir(args, cfg)
        if args.command == "bound":
            return cmd_bound(cfg, out)
        if args.command == "sample":
            return cmd_sample(cfg, out)
        window = cfg.window if cfg else RunConfig.window
        res = cfg.raster if cfg else RunConfig.raster
        chash = cfg.hash() if cfg else None
        samples = Path(args.samples) if args.samples else out / "samples.csv"
        if args.command == "hull":
            return cmd_hull(samples, out, window, chash)
        region = Path(args.region) if args.region else out / "region.json"
        return cmd_check(region, samples, out, window, res, chash, cfg.seed if cfg else 0)
    except ConfigError as exc:
        print(f"resetsg: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

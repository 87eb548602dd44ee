"""Command-line driver.

    trefftz-maxwell run --scenario plane-wave --p 3 --h 1 --bc transparent --adapt
    trefftz-maxwell convergence --p 1 2 --h 1 0.5 0.25
    trefftz-maxwell compare-bc --p 1 2 3 4
    trefftz-maxwell dump-basis --p 3 --out dirs.csv
    trefftz-maxwell check

Settings may also come from an INI-style file (``--config``); flags given on
the command line win.  See README.md for the file layout.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import logging
import math
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import diagnostics as dg
from .basis import CONSTANT_MODES, directions_2d, directions_3d, write_directions_csv
from .geometry import SIDES, MeshError, mesh_with_size
from .scenarios import (OUTFLOW_CHOICES, ScenarioError, SCENARIOS,
                        consistent_pec, element_theta0, get_scenario, simple_spec, _NORMALS)
from .stepper import SolverError, run

log = logging.getLogger("trefftz_maxwell")

MAX_ORDER = 5
SNAPSHOT_SCHEMA = "# trefftz-maxwell snapshot v1"
RESIDUAL_SCHEMA = "# trefftz-maxwell residuals v1"
COMPARE_SCHEMA = "# trefftz-maxwell compare-bc v1"
DEFAULT_T = {"plane-wave": 24.0, "cylindrical": 40.0, "polynomial": 2.0}
TAG_CHOICES = OUTFLOW_CHOICES + ("pec-beta",)


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    scenario: str = "plane-wave"
    p: int = 3
    h: float = 1.0
    tau: float | None = None
    T: float | None = None
    bc: str = "sm"
    boundary: dict = field(default_factory=dict)  # per-tag overrides
    adapt: bool = False
    constants: str = "unit"
    large_domain: bool = False
    out: str = "out"
    solver: str = "auto"
    threads: int | None = None
    snapshots: int = 0  # every n-th slab, 0 = off
    raster: int = 101

    @property
    def step(self) -> float:
        return self.tau if self.tau is not None else self.h / 2.0

    @property
    def end_time(self) -> float:
        return self.T if self.T is not None else DEFAULT_T.get(self.scenario, 1.0)

    def validate(self):
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.scenario!r}; choose from {sorted(SCENARIOS)}")
        if not 0 <= self.p <= MAX_ORDER:
            raise ConfigError(f"p must lie in 0..{MAX_ORDER}, got {self.p}")
        if not self.h > 0:
            raise ConfigError(f"h must be positive, got {self.h}")
        if self.tau is not None and not self.tau > 0:
            raise ConfigError(f"tau must be positive, got {self.tau}")
        if self.bc not in TAG_CHOICES:
            raise ConfigError(f"unknown boundary condition {self.bc!r}; choose from {TAG_CHOICES}")
        for tag, name in self.boundary.items():
            if tag not in SIDES:
                raise ConfigError(f"unknown boundary tag {tag!r}; tags are {SIDES}")
            if name not in TAG_CHOICES:
                raise ConfigError(f"unknown boundary condition {name!r} for tag {tag!r}")
        if self.constants not in CONSTANT_MODES:
            raise ConfigError(f"constants must be one of {CONSTANT_MODES}")
        if self.solver not in ("auto", "direct", "iterative"):
            raise ConfigError(f"unknown solver {self.solver!r}")
        if self.large_domain and self.scenario != "cylindrical":
            raise ConfigError("--large-domain only applies to the cylindrical scenario")
        if self.threads is not None and self.threads < 1:
            raise ConfigError("threads must be positive")
        if self.T is not None and self.T < 0:
            raise ConfigError(f"T must be non-negative, got {self.T}")
        m = round(self.end_time / self.step)
        if abs(m * self.step - self.end_time) > 1e-9 * max(1.0, self.end_time):
            raise ConfigError(f"T={self.end_time:g} is not a multiple of the step {self.step:g}")
        return self


def _tag_spec(scenario, tag, name):
    fields = getattr(scenario, "fields", None)
    if name == "pec-beta":
        if fields is None:
            raise ConfigError("pec-beta needs a scenario with an exact solution")
        return consistent_pec(fields, _NORMALS[tag], 1.0)
    try:
        return simple_spec(name, fields, _NORMALS[tag])
    except ScenarioError as exc:
        raise ConfigError(str(exc)) from None


def build_problem(cfg: RunConfig):
    """(mesh, specs, scenario, theta0, energy_region) for a validated config."""
    sc = get_scenario(cfg.scenario)
    domain = sc.domain
    region = None
    bc = cfg.bc
    if cfg.large_domain:
        domain = sc.reference_domain
        bc = "sm"
    try:
        mesh = mesh_with_size(domain, cfg.h)
    except MeshError as exc:
        raise ConfigError(str(exc)) from None
    if cfg.large_domain:
        region = mesh.elements_inside(sc.domain)
    try:
        specs = sc.specs(bc) if bc != "pec-beta" else {t: _tag_spec(sc, t, bc) for t in SIDES}
    except ScenarioError as exc:
        raise ConfigError(str(exc)) from None
    for tag, name in cfg.boundary.items():
        specs[tag] = _tag_spec(sc, tag, name)
    theta0 = element_theta0(mesh, sc.policy(cfg.adapt))
    return mesh, specs, sc, theta0, region


def solve(cfg: RunConfig, callback=None, monitor=True):
    mesh, specs, sc, theta0, region = build_problem(cfg)
    res = run(mesh, cfg.p, specs, sc.initial, cfg.end_time, cfg.step, theta0=theta0,
              constants=cfg.constants, solver=cfg.solver, reference=sc.fields,
              energy_region=region, callback=callback, monitor=monitor)
    return mesh, sc, res


def _raster(mesh, n):
    d = mesh.domain
    xs = np.linspace(d.x_min, d.x_max, n)
    ys = np.linspace(d.y_min, d.y_max, n)
    X, Y = np.meshgrid(xs, ys)
    hx = (d.x_max - d.x_min) / mesh.nx
    hy = (d.y_max - d.y_min) / mesh.ny
    i = np.clip(((X - d.x_min) / hx).astype(int), 0, mesh.nx - 1)
    j = np.clip(((Y - d.y_min) / hy).astype(int), 0, mesh.ny - 1)
    return xs, ys, np.stack([X, Y], axis=-1).reshape(-1, 1, 2), (j * mesh.nx + i).ravel()


def write_snapshot(path, basis, sol, raster):
    xs, ys, pts, elems = raster
    ez = basis.field(sol.coeffs, elems, pts, sol.t_end - sol.t_start)[:, 0, 0]
    ez = ez.reshape(len(ys), len(xs))
    with open(path, "w", newline="") as fh:
        fh.write(f"{SNAPSHOT_SCHEMA} t={sol.t_end!r} x=[{xs[0]!r},{xs[-1]!r}] "
                 f"y=[{ys[0]!r},{ys[-1]!r}] rows=y cols=x\n")
        w = csv.writer(fh)
        for row in ez:
            w.writerow([repr(float(v)) for v in row])


def write_residuals_csv(path, entries):
    with open(path, "w", newline="") as fh:
        fh.write(RESIDUAL_SCHEMA + "\n")
        w = csv.writer(fh)
        w.writerow(["slab", "relative_residual", "iterations"])
        for e in entries:
            w.writerow([e.slab, repr(float(e.residual)), e.iterations])


def cmd_run(cfg: RunConfig) -> int:
    out = Path(cfg.out)
    # validation and assembly errors surface before anything is written
    mesh, specs, sc, theta0, region = build_problem(cfg)
    out.mkdir(parents=True, exist_ok=True)
    callback = None
    if cfg.snapshots:
        snapdir = out / "snapshots"
        snapdir.mkdir(exist_ok=True)
        raster = _raster(mesh, cfg.raster)

        def snap(n, sol, rec, basis):
            if n % cfg.snapshots == 0:
                write_snapshot(snapdir / f"ez_{n:05d}.csv", basis, sol, raster)
        callback = snap
    res = run(mesh, cfg.p, specs, sc.initial, cfg.end_time, cfg.step, theta0=theta0,
              constants=cfg.constants, solver=cfg.solver, reference=sc.fields,
              energy_region=region, callback=callback, keep=False)
    dg.write_energy_csv(out / "energy.csv", res.energy, res.region_energy[1:]
                        if res.region_energy is not None else None)
    write_residuals_csv(out / "residuals.csv", res.residuals)
    if res.error is not None:
        dg.write_error_csv(out / "errors.csv", [dg.ErrorRecord(cfg.p, mesh.h, cfg.step, res.error)])
        print(f"relative L2 space-time error (Ez): {res.error:.6e}")
    print(f"{len(res.energy)} slabs, {res.basis.n_dofs} dofs, solver {res.solver_method}, "
          f"max identity residual {res.max_identity_residual:.2e}")
    return 0


def cmd_convergence(cfg: RunConfig, orders, sizes) -> int:
    if len(sizes) < 2:
        raise ConfigError("a convergence study needs at least two mesh sizes")
    if cfg.tau is not None:
        raise ConfigError("the convergence study ties the step to the mesh (tau = h/2)")
    sizes = sorted(sizes, reverse=True)
    for p in orders:
        replace(cfg, p=p).validate()
    if get_scenario(cfg.scenario).fields is None:
        raise ConfigError(f"scenario {cfg.scenario!r} has no exact solution")
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    records = []
    for p in orders:
        samples = []
        for h in sizes:
            c = replace(cfg, p=p, h=h)
            _, _, res = solve(c, monitor=False)
            samples.append((h, res.error))
            records.append(dg.ErrorRecord(p, h, c.step, res.error))
            print(f"p={p} h={h:g} error={res.error:.4e}")
        rate = dg.convergence_rate(samples)
        records.append(dg.ErrorRecord(p, sizes[-1], float("nan"), samples[-1][1], rate))
        print(f"p={p} rate={rate:.3f}")
    dg.write_error_csv(out / "errors.csv", records)
    return 0


COMPARE_VARIANTS = (
    ("sm", "sm", False),
    ("transparent", "transparent", False),
    ("transparent-adapted", "transparent", True),
    ("pec-exact", "pec-exact", True),
)


def compare_bc(cfg: RunConfig, orders):
    """{variant: [error for p in orders]} for the plane-wave outflow study."""
    table = {}
    for label, bc, adapt in COMPARE_VARIANTS:
        table[label] = []
        for p in orders:
            _, _, res = solve(replace(cfg, scenario="plane-wave", p=p, bc=bc, adapt=adapt),
                              monitor=False)
            table[label].append(res.error)
    return table


def cmd_compare_bc(cfg: RunConfig, orders) -> int:
    for p in orders:
        replace(cfg, p=p).validate()
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    table = compare_bc(cfg, orders)
    with open(out / "compare_bc.csv", "w", newline="") as fh:
        fh.write(COMPARE_SCHEMA + "\n")
        w = csv.writer(fh)
        w.writerow(["p"] + [v[0] for v in COMPARE_VARIANTS])
        for i, p in enumerate(orders):
            w.writerow([p] + [repr(float(table[v[0]][i])) for v in COMPARE_VARIANTS])
    print("p  " + "  ".join(f"{v[0]:>20s}" for v in COMPARE_VARIANTS))
    for i, p in enumerate(orders):
        print(f"{p:<3d}" + "  ".join(f"{table[v[0]][i]:20.4e}" for v in COMPARE_VARIANTS))
    return 0


def cmd_dump_basis(p: int, theta0: float, dim: int, out: str) -> int:
    if not 1 <= p <= MAX_ORDER:
        raise ConfigError(f"p must lie in 1..{MAX_ORDER}, got {p}")
    if dim == 2:
        triples = {k: directions_2d(k, theta0) for k in range(1, p + 1)}
    else:
        triples = {k: directions_3d(k) for k in range(1, p + 1)}
    write_directions_csv(out, triples)
    print(f"wrote {sum(len(v) for v in triples.values())} triples to {out}")
    return 0


def cmd_check() -> int:
    """Quick invariant suite: exactness, dimensions, reproduction, energy identity."""
    from .basis import (build_element_basis, build_element_basis_3d, dimension_2d,
                        dimension_3d, gram_rank, maxwell_residual, derivative_scale)
    from .geometry import Element
    from .scenarios import PolynomialWaveScenario
    rng = np.random.default_rng(0)
    el = Element(0, (0.0, 0.0), (0.5, 0.5))
    ok = True

    def report(name, passed, detail):
        nonlocal ok
        ok &= bool(passed)
        print(f"{'PASS' if passed else 'FAIL'}  {name}: {detail}")

    worst = 0.0
    for p in range(MAX_ORDER + 1):
        b = build_element_basis(el, (0.0, 0.5), p)
        for f in b.functions:
            for x in rng.uniform(-0.5, 0.5, (5, 3)):
                r = np.abs(maxwell_residual(f, x[:2], x[2])).max()
                worst = max(worst, r / max(derivative_scale(f, x[:2], x[2]), 1e-300))
    report("trefftz exactness 2D", worst <= 1e-12, f"max relative residual {worst:.1e}")
    ranks = [gram_rank(build_element_basis(el, (0.0, 0.5), p), el, (0.0, 0.5)) == dimension_2d(p)
             for p in range(MAX_ORDER + 1)]
    report("dimension 2D", all(ranks), f"p=0..{MAX_ORDER}")
    ranks3 = []
    for p in range(3):
        b3 = build_element_basis_3d(np.zeros(3), np.full(3, 0.5), (0.0, 0.5), p)
        box = type("Box", (), {"center": np.zeros(3), "half_widths": np.full(3, 0.5)})
        ranks3.append(gram_rank(b3, box, (0.0, 0.5)) == dimension_3d(p))
    report("dimension 3D", all(ranks3), "p=0..2")
    sc = PolynomialWaveScenario()
    mesh = mesh_with_size(sc.domain, 0.5)
    res = run(mesh, 3, sc.specs(), sc.initial, 1.0, 0.1, reference=sc.fields)
    report("polynomial wave reproduction", res.error <= 1e-8, f"relative error {res.error:.1e}")
    report("energy identity", res.max_identity_residual <= 1e-10,
           f"max relative residual {res.max_identity_residual:.1e}")
    return 0 if ok else 1


def _read_config(path) -> dict:
    cp = configparser.ConfigParser()
    if not cp.read(path):
        raise ConfigError(f"cannot read config file {path}")
    values = {}
    for section in cp.sections():
        if section == "boundary":
            values["boundary"] = dict(cp[section])
            if "bc" in values["boundary"]:
                values["bc"] = values["boundary"].pop("bc")
        else:
            values.update(cp[section])
    return values


_CONVERT = {"p": int, "h": float, "tau": float, "T": float, "threads": int, "snapshots": int,
            "raster": int}


def _bool(v):
    if isinstance(v, bool):
        return v
    s = str(v).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {v!r}")


def make_config(args) -> RunConfig:
    values = _read_config(args.config) if getattr(args, "config", None) else {}
    if "t" in values:  # configparser lower-cases keys
        values["T"] = values.pop("t")
    for key in ("scenario", "p", "h", "tau", "T", "bc", "constants", "out", "solver",
                "threads", "snapshots", "raster"):
        v = getattr(args, key, None)
        if v is not None and not isinstance(v, list):
            values[key] = v
    if getattr(args, "adapt", None):
        values["adapt"] = True
    if getattr(args, "large_domain", None):
        values["large_domain"] = True
    known = set(RunConfig.__dataclass_fields__)
    unknown = sorted(set(values) - known)
    if unknown:
        raise ConfigError(f"unknown config key(s) {unknown}")
    try:
        for k, conv in _CONVERT.items():
            if k in values and values[k] is not None:
                values[k] = conv(values[k])
        for k in ("adapt", "large_domain"):
            if k in values:
                values[k] = _bool(values[k])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad config value: {exc}") from None
    return RunConfig(**values).validate()


def _common(p, mesh_size=True):
    p.add_argument("--config", help="INI-style settings file")
    p.add_argument("--scenario", help=f"one of {sorted(SCENARIOS)}")
    if mesh_size:
        p.add_argument("--h", type=float, help="mesh size")
    p.add_argument("--tau", type=float, help="time step (default h/2)")
    p.add_argument("--T", type=float, help="final time")
    p.add_argument("--bc", help=f"outflow condition: {', '.join(TAG_CHOICES)}")
    p.add_argument("--adapt", action="store_true", default=None,
                   help="rotate direction fans toward the propagation direction")
    p.add_argument("--constants", choices=CONSTANT_MODES, help="order-0 modes (default unit)")
    p.add_argument("--out", help="output directory")
    p.add_argument("--solver", choices=("auto", "direct", "iterative"))
    p.add_argument("--threads", type=int, help="BLAS thread count")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="trefftz-maxwell", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="single simulation")
    _common(p)
    p.add_argument("--p", type=int, help=f"polynomial order 0..{MAX_ORDER}")
    p.add_argument("--large-domain", action="store_true", default=None,
                   help="cylindrical reference run on the enlarged domain")
    p.add_argument("--snapshots", type=int, help="write an Ez raster every n slabs")
    p.add_argument("--raster", type=int, help="raster points per axis (default 101)")

    p = sub.add_parser("convergence", help="error and rate over mesh sizes")
    _common(p, mesh_size=False)
    p.add_argument("--p", type=int, nargs="+", default=[1, 2])
    p.add_argument("--h", dest="sizes", type=float, nargs="+", default=[1.0, 0.5, 0.25])

    p = sub.add_parser("compare-bc", help="outflow condition comparison versus p")
    _common(p)
    p.add_argument("--p", type=int, nargs="+", default=[1, 2, 3, 4])

    p = sub.add_parser("dump-basis", help="write the direction set as CSV")
    p.add_argument("--p", type=int, default=3)
    p.add_argument("--theta0", type=float, default=0.0, help="fan rotation in degrees")
    p.add_argument("--dim", type=int, choices=(2, 3), default=2)
    p.add_argument("--out", default="directions.csv")

    sub.add_parser("check", help="run the invariant suite")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "dump-basis":
            return cmd_dump_basis(args.p, math.radians(args.theta0), args.dim, args.out)
        if args.command == "check":
            return cmd_check()
        orders = args.p if isinstance(args.p, list) else None
        cfg = make_config(args)
        with _threads(cfg.threads):
            if args.command == "run":
                return cmd_run(cfg)
            if args.command == "convergence":
                return cmd_convergence(cfg, orders, args.sizes)
            return cmd_compare_bc(cfg, orders)
    except (ConfigError, ScenarioError, SolverError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


class _threads:
    def __init__(self, n):
        self.n = n
        self._ctl = None

    def __enter__(self):
        if self.n is not None:
            from threadpoolctl import threadpool_limits
            self._ctl = threadpool_limits(limits=self.n)
        return self

    def __exit__(self, *exc):
        if self._ctl is not None:
            self._ctl.unregister()
        return False


if __name__ == "__main__":
    sys.exit(main())

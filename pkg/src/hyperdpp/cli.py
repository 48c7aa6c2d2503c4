"""Batch front-end.

Every subcommand reads one TOML run configuration and writes plain CSV, JSON
or text reports.  Exit codes: 0 pass, 1 a checked inequality failed, 2 bad
configuration, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import bounds, dpp_core, geometry, kernels, sampler
from .geometry import GeometryError, GrowthProfile, SpaceModel
from .kernels import KernelError, RadialKernel
from .policy import NumericPolicy
from .quadrature import QuadratureGrid

log = logging.getLogger("hyperdpp")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3

CSV_HEADER = ["R", "expectation", "variance_lunule", "variance_direct",
              "variance_empirical", "stderr", "ratio", "C", "pass"]

# section -> key -> accepted types
SCHEMA: dict[str, dict[str, tuple]] = {
    "": {"seed": (int,)},
    "space": {"kind": (str,), "q": (int,)},
    "kernel": {"type": (str,), "alpha": (int, float), "q": (int,), "band": (list,),
               "halo_radius": (int,), "table": (str,), "koo": (int, float),
               "interpolation": (str,)},
    "profile": {"delta": (int, float), "r_min": (int, float), "r_max": (int, float),
                "grid_step": (int, float), "margin": (int, float), "c": (int, float),
                "alpha": (int, float), "c_search": (bool,)},
    "sweep": {"radii": (list,)},
    "empirical": {"n_samples": (int,), "radii": (list,)},
    "grid": {"radial_per_unit": (int, float), "radial_min": (int,), "angular_min": (int,),
             "angular_per_sinh": (int, float)},
    "verify": {"R_test": (int, float), "n_pairs": (int,)},
    "geometry": {"n_triangles": (int,), "sample_radius": (int, float), "n_trials": (int,),
                 "containment_radius": (int, float), "step": (int, float),
                 "fine_factor": (int,), "exhaustive_radius": (int,)},
    "sample": {"R": (int, float), "n_configs": (int,)},
    "policy": {},  # checked against NumericPolicy fields
    "output": {"dir": (str,)},
}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    seed: int
    space: SpaceModel
    kernel_spec: dict
    profile_spec: dict | None
    radii: list[float]
    empirical: dict | None
    grid: QuadratureGrid
    policy: NumericPolicy
    verify: dict
    geometry: dict
    sample: dict
    out_dir: Path
    base_dir: Path
    _kernel: RadialKernel | None = field(default=None, repr=False)

    def kernel(self) -> RadialKernel:
        if self._kernel is None:
            self._kernel = build_kernel(self.space, self.kernel_spec, self.base_dir)
        return self._kernel


# ---------------------------------------------------------------------------
# configuration

def _check_keys(raw: dict) -> None:
    for key, value in raw.items():
        if isinstance(value, dict):
            if key not in SCHEMA or key == "":
                raise ConfigError(f"unknown section [{key}]")
            allowed = SCHEMA[key]
            if key == "policy":
                continue
            for k, v in value.items():
                if k not in allowed:
                    raise ConfigError(f"unknown key '{k}' in [{key}]")
                if isinstance(v, bool) and bool not in allowed[k]:
                    raise ConfigError(f"[{key}] {k}: expected {allowed[k][0].__name__}")
                if not isinstance(v, allowed[k]):
                    raise ConfigError(f"[{key}] {k}: expected {allowed[k][0].__name__}, "
                                      f"got {type(v).__name__}")
        else:
            if key not in SCHEMA[""]:
                raise ConfigError(f"unknown top-level key '{key}'")
            if isinstance(value, bool) or not isinstance(value, SCHEMA[""][key]):
                raise ConfigError(f"{key}: expected integer")


def _floats(values, name) -> list[float]:
    try:
        out = [float(v) for v in values]
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be a list of numbers") from None
    if any(not math.isfinite(v) or v < 0 for v in out):
        raise ConfigError(f"{name} must be finite and nonnegative")
    return out


def load_config(path: str | Path, seed: int | None = None,
                out_dir: str | None = None) -> RunConfig:
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    _check_keys(raw)

    space_raw = raw.get("space", {})
    kind = space_raw.get("kind")
    if kind == "disk":
        if "q" in space_raw:
            raise ConfigError("[space] q applies to trees only")
        space = SpaceModel.disk()
    elif kind == "tree":
        if "q" not in space_raw:
            raise ConfigError("[space] tree needs q")
        try:
            space = SpaceModel.tree(space_raw["q"])
        except GeometryError as exc:
            raise ConfigError(str(exc)) from None
    else:
        raise ConfigError("[space] kind must be 'disk' or 'tree'")

    kernel_spec = dict(raw.get("kernel", {}))
    if "type" not in kernel_spec:
        raise ConfigError("[kernel] type is required")
    _check_kernel_model(space, kernel_spec)

    try:
        policy = NumericPolicy.from_mapping(raw.get("policy", {}))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"[policy] {exc}") from None
    try:
        grid = QuadratureGrid(**raw.get("grid", {}))
    except ValueError as exc:
        raise ConfigError(f"[grid] {exc}") from None

    empirical = raw.get("empirical")
    if empirical is not None:
        empirical = dict(empirical)
        empirical["radii"] = _floats(empirical.get("radii", [2.0]), "[empirical] radii")
        empirical.setdefault("n_samples", 20_000)
        if empirical["n_samples"] < sampler.MIN_SAMPLES:
            raise ConfigError(f"[empirical] n_samples must be >= {sampler.MIN_SAMPLES}")

    base_dir = path.resolve().parent
    out = Path(out_dir) if out_dir is not None else Path(raw.get("output", {}).get("dir", "."))
    if not out.is_absolute() and out_dir is None:
        out = base_dir / out
    return RunConfig(
        seed=int(seed if seed is not None else raw.get("seed", 0)),
        space=space,
        kernel_spec=kernel_spec,
        profile_spec=raw.get("profile"),
        radii=_floats(raw.get("sweep", {}).get("radii", []), "[sweep] radii"),
        empirical=empirical,
        grid=grid,
        policy=policy,
        verify=raw.get("verify", {}),
        geometry=raw.get("geometry", {}),
        sample=raw.get("sample", {}),
        out_dir=out,
        base_dir=base_dir,
    )


def _check_kernel_model(space: SpaceModel, spec: dict) -> None:
    kind = spec["type"]
    if kind == "bergman":
        if space.is_tree:
            raise ConfigError("bergman kernel lives on the disk, but [space] is a tree")
        extra = set(spec) - {"type", "alpha"}
    elif kind == "tree-spectral":
        if not space.is_tree:
            raise ConfigError("tree-spectral kernel lives on a tree, but [space] is the disk")
        if "q" in spec and spec["q"] != space.q:
            raise ConfigError(f"[kernel] q = {spec['q']} differs from [space] q = {space.q}")
        if "band" not in spec:
            raise ConfigError("[kernel] tree-spectral needs band = [a, b]")
        extra = set(spec) - {"type", "q", "band", "halo_radius"}
    elif kind == "custom":
        if "table" not in spec or "koo" not in spec:
            raise ConfigError("[kernel] custom needs table and koo")
        extra = set(spec) - {"type", "table", "koo", "interpolation"}
    else:
        raise ConfigError(f"[kernel] unknown type '{kind}'")
    if extra:
        raise ConfigError(f"[kernel] keys {sorted(extra)} do not apply to type '{kind}'")


def build_kernel(space: SpaceModel, spec: dict, base_dir: Path) -> RadialKernel:
    kind = spec["type"]
    try:
        if kind == "bergman":
            return kernels.bergman_kernel(float(spec.get("alpha", 0.0)))
        if kind == "tree-spectral":
            band = _floats_signed(spec["band"], "[kernel] band")
            if len(band) != 2:
                raise ConfigError("[kernel] band must have two entries")
            return kernels.tree_spectral_kernel(space.q, band, spec.get("halo_radius", 64))
        table_path = Path(spec["table"])
        if not table_path.is_absolute():
            table_path = base_dir / table_path
        if not table_path.exists():
            raise ConfigError(f"[kernel] table not found: {table_path}")
        table = np.loadtxt(table_path, ndmin=2)
        return kernels.custom_radial_kernel(space, float(spec["koo"]), table,
                                            spec.get("interpolation", "linear"))
    except KernelError as exc:
        raise ConfigError(f"[kernel] {exc}") from None


def _floats_signed(values, name) -> list[float]:
    try:
        return [float(v) for v in values]
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be a list of numbers") from None


def build_profile(cfg: RunConfig) -> GrowthProfile:
    spec = cfg.profile_spec
    if spec is None:
        raise ConfigError("[profile] section is required for this subcommand")
    for key in ("delta", "r_min", "r_max"):
        if key not in spec:
            raise ConfigError(f"[profile] {key} is required")
    try:
        if "c" in spec:
            return GrowthProfile(c=float(spec["c"]),
                                 alpha=float(spec.get("alpha", cfg.space.growth_rate)),
                                 delta=float(spec["delta"]), r_min=float(spec["r_min"]),
                                 r_max=float(spec["r_max"]))
        if "alpha" in spec:
            raise ConfigError("[profile] alpha may only be given together with c")
        return geometry.fit_growth_profile(cfg.space, float(spec["delta"]),
                                           float(spec["r_min"]), float(spec["r_max"]),
                                           float(spec.get("grid_step", 0.1)),
                                           float(spec.get("margin", 0.01)))
    except GeometryError as exc:
        raise ConfigError(f"[profile] {exc}") from None


# ---------------------------------------------------------------------------
# serialization

def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    return repr(float(value))


def variance_csv(rows: list[bounds.VarianceReport], with_bound: bool) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for v in rows:
        writer.writerow([
            _fmt(v.R), _fmt(v.expectation), _fmt(v.variance_lunule), _fmt(v.variance_direct),
            _fmt(v.variance_empirical), _fmt(v.stderr), _fmt(v.ratio),
            _fmt(v.C) if with_bound else "", _fmt(v.passed) if with_bound else "",
        ])
    return buf.getvalue()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    log.info("wrote %s", path)


def _write_json(path: Path, cfg: RunConfig, command: str, payload: dict) -> None:
    doc = {"command": command, "seed": cfg.seed, "policy": cfg.policy.as_dict(),
           "space": str(cfg.space), **payload}
    _write(path, json.dumps(_jsonable(doc), sort_keys=True, indent=2, allow_nan=False) + "\n")


def _profile_dict(p: GrowthProfile) -> dict:
    return {"c": p.c, "alpha": p.alpha, "delta": p.delta, "r_min": p.r_min,
            "r_max": p.r_max, "r0": p.r0}


def _empirical_options(cfg: RunConfig) -> bounds.EmpiricalOptions | None:
    if cfg.empirical is None:
        return None
    return bounds.EmpiricalOptions(n_samples=cfg.empirical["n_samples"], seed=cfg.seed,
                                   radii=tuple(cfg.empirical["radii"]), grid=cfg.grid)


def _numeric_failures(rows) -> list[str]:
    return [f"R={v.R:g}: {v.error}" for v in rows if v.error is not None]


# ---------------------------------------------------------------------------
# subcommands

def cmd_verify_kernel(cfg: RunConfig) -> int:
    kernel = cfg.kernel()
    R_test = float(cfg.verify.get("R_test", 3.0))
    rep = kernels.verify_projection(kernel, R_test, cfg.grid, cfg.policy,
                                    n_pairs=int(cfg.verify.get("n_pairs", 6)), seed=cfg.seed)
    mass = kernel.total_mass
    _write_json(cfg.out_dir / "verify_kernel.json", cfg, "verify-kernel", {
        "kernel": kernel.label, "verified": kernel.verified, "R_test": R_test,
        "min_eig": rep.min_eig, "max_eig": rep.max_eig, "tol": rep.tol, "size": rep.size,
        "reproducing_residual": rep.reproducing_residual, "cs_residual": rep.cs_residual,
        "koo": kernel.koo, "reproducing_mass": mass, "pass": rep.passed,
    })
    print(f"{kernel.label}: eigenvalues in [{rep.min_eig:.3e}, {rep.max_eig:.6f}] "
          f"-> {'pass' if rep.passed else 'FAIL'}")
    return EXIT_OK if rep.passed else EXIT_FAIL


def cmd_geometry_check(cfg: RunConfig) -> int:
    g = cfg.geometry
    profile = build_profile(cfg)
    dstep = float(g.get("step", 0.01))
    delta_hat = geometry.delta_estimate(cfg.space, int(g.get("n_triangles", 1000)),
                                        float(g.get("sample_radius", 4.0)), cfg.seed,
                                        step=dstep)
    step = float(cfg.profile_spec.get("grid_step", 0.1 if not cfg.space.is_tree else 1.0))
    fine = step / int(g.get("fine_factor", 10))
    fine_grid = geometry._grid(profile.r_min, profile.r_max, fine)
    growth_bad = profile.violations(cfg.space, fine_grid)
    R_c = float(g.get("containment_radius", 5.0))
    cont = geometry.containment_check(cfg.space, profile.delta, int(g.get("n_trials", 10_000)),
                                      R_c, cfg.seed)
    payload = {
        "delta_estimate": delta_hat, "profile": _profile_dict(profile),
        "growth_violations_fine_grid": growth_bad, "fine_grid_step": fine,
        "containment": {"R": R_c, "violations": cont.violations,
                        "max_excess": cont.max_excess, "accepted": cont.accepted},
    }
    ok = not growth_bad and cont.violations == 0 and delta_hat <= profile.delta + dstep
    if cfg.space.is_tree and "exhaustive_radius" in g:
        ex = geometry.tree_containment_exhaustive(cfg.space.q, int(g["exhaustive_radius"]),
                                                  profile.delta)
        payload["containment_exhaustive"] = {"R": int(g["exhaustive_radius"]),
                                             "violations": ex.violations,
                                             "max_excess": ex.max_excess, "checked": ex.accepted}
        ok = ok and ex.violations == 0
    payload["pass"] = ok
    _write_json(cfg.out_dir / "geometry.json", cfg, "geometry-check", payload)
    print(f"delta estimate {delta_hat:.6f}, c = {profile.c:.6f}, "
          f"containment violations {cont.violations} -> {'pass' if ok else 'FAIL'}")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_variance(cfg: RunConfig) -> int:
    kernel = cfg.kernel()
    C = None
    if cfg.profile_spec is not None:
        profile = build_profile(cfg)
        C = bounds.constant_C(kernel, profile, cfg.policy)
    emp = _empirical_options(cfg)
    rows = [bounds.variance_report(kernel, R, C if C is not None else math.nan, emp, cfg.policy)
            for R in cfg.radii]
    _write(cfg.out_dir / "variance.csv", variance_csv(rows, with_bound=C is not None))
    failures = _numeric_failures(rows)
    for msg in failures:
        print(msg, file=sys.stderr)
    return EXIT_NUMERIC if failures else EXIT_OK


def cmd_bound(cfg: RunConfig) -> int:
    kernel = cfg.kernel()
    profile = build_profile(cfg)
    outside = [R for R in cfg.radii if not profile.contains(R)]
    if outside:
        raise ConfigError(f"[sweep] radii {outside} outside the profile range "
                          f"[{profile.r_min:g}, {profile.r_max:g}]")
    if cfg.profile_spec.get("c_search", False):
        profile, _ = bounds.search_c(kernel, profile, policy=cfg.policy)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", bounds.DegenerateBoundWarning)
        report = bounds.theorem1_sweep(kernel, profile, cfg.radii, _empirical_options(cfg),
                                       cfg.policy)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    _write(cfg.out_dir / "bound.csv", variance_csv(report.sweep, with_bound=True))
    failures = _numeric_failures(report.sweep)
    emp_checks = []
    for v in report.sweep:
        if v.variance_empirical is not None:
            z = (v.variance_empirical - v.variance_lunule) / v.stderr if v.stderr else math.inf
            emp_checks.append({"R": v.R, "z": z, "within_4_stderr": abs(z) <= 4.0,
                               "ratio_empirical": v.variance_empirical / v.expectation,
                               "ratio_empirical_above_C": v.variance_empirical / v.expectation >= report.C})
    passed = report.passed and all(e["within_4_stderr"] and e["ratio_empirical_above_C"]
                                   for e in emp_checks)
    _write_json(cfg.out_dir / "bound.json", cfg, "bound", {
        "kernel": kernel.label, "profile": _profile_dict(profile), "C": report.C,
        "r0": report.r0, "radii": cfg.radii, "min_gap": min((v.gap for v in report.sweep),
                                                             default=None),
        "empirical": emp_checks, "errors": failures, "pass": passed,
        "n_samples": cfg.empirical["n_samples"] if cfg.empirical else None,
    })
    for msg in failures:
        print(msg, file=sys.stderr)
    print(f"{kernel.label}: C = {report.C:.6e}, r0 = {report.r0:.4f}, "
          f"{sum(v.passed for v in report.sweep)}/{len(report.sweep)} radii pass")
    if failures:
        return EXIT_NUMERIC
    return EXIT_OK if passed else EXIT_FAIL


def _word(w) -> str:
    return ".".join(str(a) for a in w) if len(w) else "o"


def cmd_sample(cfg: RunConfig) -> int:
    kernel = cfg.kernel()
    R = float(cfg.sample.get("R", 2.0))
    n = int(cfg.sample.get("n_configs", 1))
    if n < 1:
        raise ConfigError("[sample] n_configs must be >= 1")
    op = sampler.discretize(kernel, R, cfg.grid, cfg.policy)
    configs = sampler.sample_many(op, n, cfg.seed, policy=cfg.policy)
    lines = [f"# {kernel.label}, R={R!r}, seed={cfg.seed}"]
    for i, conf in enumerate(configs):
        lines.append(f"# configuration {i}: {len(conf)} points")
        for p in conf.points:
            lines.append(_word(p) if cfg.space.is_tree else f"{p.real!r},{p.imag!r}")
        # two blank lines separate gnuplot data blocks
        lines.extend(["", ""])
    _write(cfg.out_dir / "samples.txt", "\n".join(lines))
    print(f"wrote {n} configurations to {cfg.out_dir / 'samples.txt'}")
    return EXIT_OK


COMMANDS = {
    "verify-kernel": cmd_verify_kernel,
    "geometry-check": cmd_geometry_check,
    "variance": cmd_variance,
    "bound": cmd_bound,
    "sample": cmd_sample,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hyperdpp",
        description="Number variance of determinantal processes on hyperbolic spaces.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "verify-kernel": "check 0 <= K <= I on a ball and the reproducing identity",
        "geometry-check": "estimate delta, fit growth constants, check ball containment",
        "variance": "mean and variance of ball counts over [sweep] radii (CSV)",
        "bound": "constant C and the variance-to-mean sweep (CSV + JSON)",
        "sample": "draw configurations on a ball (text point lists)",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        p.add_argument("config", help="TOML run configuration")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--out", default=None, help="output directory (overrides [output] dir)")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, seed=args.seed, out_dir=args.out)
        return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (KernelError, GeometryError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numerical error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())

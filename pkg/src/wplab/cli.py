"""Command-line runner: ``python -m wplab <subcommand> [--config PATH] [--out DIR] [--seed N]``.

Exit codes: 0 pass, 1 certification failure, 2 configuration error,
3 solver failure.  A human-readable report is written in every case.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys
from dataclasses import dataclass

import numpy as np

from .errors import (ConfigError, CurveError, DegenerateDifferential, MapOutOfRange, NonConvergence, SolverError,
                     WplabError)

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2, 3
SUBCOMMANDS = ("surface", "qdiff", "solve", "sweep", "certify", "verify-all")
PERTURBATION = 0.02


@dataclass
class ScenarioConfig:
    genus: int = 2
    cover_degree: int = 2
    refine: int = 3
    q_seed: int = 0
    q_truncation: int = 6
    t_max: object = "auto"
    grid_points: int = 5
    solver_tol: float = 1e-10
    solver_max_iter: int = 100
    kernel_kappa: float = 1e-10
    seed: int = 0
    out_dir: str = "out"

    def items(self):
        return dataclasses.asdict(self).items()

    def solver(self):
        from .harmonic import SolverConfig

        return SolverConfig(tol=self.solver_tol, max_iter=self.solver_max_iter)


def _parse_t_max(text):
    return "auto" if text == "auto" else float(text)


_PARSERS = {
    "genus": int, "cover_degree": int, "refine": int, "q_seed": int, "q_truncation": int, "t_max": _parse_t_max,
    "grid_points": int, "solver_tol": float, "solver_max_iter": int, "kernel_kappa": float, "seed": int,
    "out_dir": str,
}

_RULES = {
    "genus": (lambda v: v >= 2, "must be at least 2"),
    "cover_degree": (lambda v: v >= 1, "must be at least 1"),
    "refine": (lambda v: v >= 0, "must be non-negative"),
    "q_seed": (lambda v: v >= 0, "must be non-negative"),
    "q_truncation": (lambda v: v >= 0, "must be non-negative"),
    "t_max": (lambda v: v == "auto" or (np.isfinite(v) and v > 0), "must be positive or 'auto'"),
    "grid_points": (lambda v: v >= 5 and v % 2 == 1, "must be odd and at least 5"),
    "solver_tol": (lambda v: v > 0, "must be positive"),
    "solver_max_iter": (lambda v: v >= 1, "must be at least 1"),
    "kernel_kappa": (lambda v: 0 < v < 1, "must lie in (0, 1)"),
    "seed": (lambda v: v >= 0, "must be non-negative"),
    "out_dir": (lambda v: len(v) > 0, "must not be empty"),
}


def _validated(key, value, line=None):
    ok, msg = _RULES[key]
    if not ok(value):
        raise ConfigError(f"{key} {msg}, got {value!r}", line)
    return value


def parse_config(text: str) -> ScenarioConfig:
    """Parse ``key=value`` lines; ``#`` starts a comment and missing keys take their defaults.

    Raises
    ------
    ConfigError
        For unknown keys, malformed lines or values, naming the 1-based line.
    """
    cfg = ScenarioConfig()
    seen = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected key=value, got {raw.strip()!r}", lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _PARSERS:
            raise ConfigError(f"unknown key {key!r}", lineno)
        if key in seen:
            raise ConfigError(f"duplicate key {key!r}", lineno)
        seen.add(key)
        try:
            parsed = _PARSERS[key](value)
        except ValueError:
            raise ConfigError(f"cannot parse {key}={value!r}", lineno) from None
        setattr(cfg, key, _validated(key, parsed, lineno))
    return cfg


def load_config(path=None) -> ScenarioConfig:
    if path is None:
        return ScenarioConfig()
    try:
        with open(path) as fh:
            return parse_config(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None


# ----------------------------------------------------------------------------
# reports

class Report:
    """Ordered key: value lines, written on close whatever the outcome."""

    def __init__(self, path, config: ScenarioConfig, command: str):
        self.path = path
        self.lines = [f"command: {command}"] + [f"config.{k}: {v}" for k, v in config.items()]

    def __setitem__(self, key, value):
        if isinstance(value, (float, np.floating)):
            value = repr(float(value))
        elif isinstance(value, (bool, np.bool_)):
            value = str(bool(value)).lower()
        self.lines.append(f"{key}: {value}")

    def write(self):
        with open(self.path, "w") as fh:
            fh.write("\n".join(self.lines) + "\n")


def _scenario(config):
    from .variation import covering_scenario

    sc = covering_scenario(config.genus, config.cover_degree, config.refine)
    sc.solver = config.solver()
    return sc


def _differential(config, surface):
    """HarmonicBeltrami for (q_seed, q_truncation); truncation 0 means the zero direction."""
    from .qdiff import HarmonicBeltrami, poincare_series, zero_differential

    if config.q_truncation == 0:
        return HarmonicBeltrami(zero_differential(surface))
    return HarmonicBeltrami(poincare_series(surface, config.q_seed, config.q_truncation))


# ----------------------------------------------------------------------------
# subcommands

def cmd_surface(config, rep, out):
    from .mesh import hyperbolic_area, write_mesh
    from .variation import covering_scenario

    sc = covering_scenario(config.genus, config.cover_degree, config.refine)
    dom = sc.domain
    S = dom.surface
    area = hyperbolic_area(dom)
    ref = -2.0 * np.pi * S.euler_characteristic
    err = abs(area - ref) / ref
    write_mesh(dom, os.path.join(out, "mesh.txt"))
    rep["domain_genus"] = dom.genus
    rep["euler_characteristic"] = S.euler_characteristic
    rep["faces"] = dom.n_faces
    rep["vertex_orbits"] = dom.n_orbits
    rep["relator_deviation"] = float(sc.target.relator_deviation())
    rep["cycle_deviation"] = float(S.cycle_deviation())
    rep["area"] = area
    rep["area_reference"] = ref
    rep["area_rel_error"] = err
    ok = err <= 1e-3
    rep["passed"] = ok
    return EXIT_PASS if ok else EXIT_FAIL


def cmd_qdiff(config, rep, out):
    from .qdiff import wp_norm_sq
    from .variation import covering_scenario
    from .wolf import WolfMetricFamily, alpha_bound_slack

    sc = covering_scenario(config.genus, config.cover_degree, config.refine)
    mu = _differential(config, sc.surface)
    q = mu.q
    for key in ("max_abs", "automorphy_residual", "holomorphy_residual", "terms"):
        if key in q.report:
            rep[f"q.{key}"] = q.report[key]
    rep["wp_norm_sq"] = wp_norm_sq(mu, sc.domain)
    fam = WolfMetricFamily(sc.domain, mu, t_max=config.t_max)
    margin, slack = alpha_bound_slack(fam)
    rep["t_max"] = fam.t_max
    rep["alpha_margin"] = margin
    rep["alpha_slack"] = slack
    ok = margin >= -slack
    rep["passed"] = ok
    return EXIT_PASS if ok else EXIT_FAIL


def cmd_solve(config, rep, out):
    from .harmonic import degree, hopf_differential, minimize, perturbed, write_map
    from .variation import hopf_sup_norm

    sc = _scenario(config)
    start = perturbed(sc.initial, PERTURBATION, config.seed)
    rep["start"] = f"covering map with hyperbolic perturbation {PERTURBATION!r} (seed {config.seed})"
    try:
        m, r = minimize(start, None, 0.0, sc.solver)
    except NonConvergence as exc:
        rep["converged"] = False
        rep["iterations"] = exc.report.iterations if exc.report is not None else "unknown"
        if exc.report is not None:
            rep["energy"] = exc.report.energy
            rep["gradient_norm"] = exc.report.gradient_norm
        raise
    write_map(m, os.path.join(out, "map.txt"))
    rep["converged"] = True
    rep["iterations"] = r.iterations
    rep["energy"] = r.energy
    rep["gradient_norm"] = r.gradient_norm
    rep["density_min"] = float(r.density.min())
    rep["density_max"] = float(r.density.max())
    k, x, _ = degree(m)
    rep["degree"] = k
    rep["degree_real"] = x
    rep["hopf_max"] = float(np.abs(hopf_differential(m)).max())
    rep["hopf_sup"] = hopf_sup_norm(m)
    return EXIT_PASS


def cmd_sweep(config, rep, out):
    from .jacobi import JacobiSystem
    from .variation import (MuRecord, energy_curve, first_variation_formula, second_variation_formula,
                            write_curve_csv, write_derivs_csv)
    from .wolf import WolfMetricFamily

    sc = _scenario(config)
    mu = _differential(config, sc.surface)
    m, _ = sc.critical()
    fam = WolfMetricFamily(sc.domain, mu, t_max=config.t_max)
    curve = energy_curve(m, mu, points=config.grid_points, family=fam, cfg=sc.solver)
    f1 = first_variation_formula(m, mu)
    if config.q_truncation == 0:
        f2 = wp4 = hp4 = 0.0
    else:
        sv = second_variation_formula(m, mu, JacobiSystem(m, config.kernel_kappa))
        f2, wp4, hp4 = sv.value, 4 * sv.wp_sq, 4 * sv.harmonic_sq
    write_curve_csv(os.path.join(out, "curve.csv"), curve)
    gap = float(np.min(curve.energy - curve.value(0.0)))
    rec = MuRecord(0, curve.fd_first, f1, curve.fd_second, f2, wp4, hp4, float("nan"), curve.fd_first_err,
                   curve.fd_second_err, float("nan"), gap)
    write_derivs_csv(os.path.join(out, "derivs.csv"), [rec])
    rep["t_max"] = fam.t_max
    rep["h"] = curve.h
    rep["energy_0"] = curve.value(0.0)
    rep["energy_spread"] = float(np.ptp(curve.energy))
    rep["fd1"] = curve.fd_first
    rep["fd1_err"] = curve.fd_first_err
    rep["formula1"] = f1
    rep["fd2"] = curve.fd_second
    rep["fd2_err"] = curve.fd_second_err
    rep["formula2"] = f2
    rep["curve_min_gap"] = gap
    ok = gap >= -1e-6
    rep["convex"] = ok
    return EXIT_PASS if ok else EXIT_FAIL


def cmd_certify(config, rep, out):
    from .variation import covering_certificate, covering_scenario, mu_list, write_derivs_csv

    sc = covering_scenario(config.genus, config.cover_degree, config.refine)
    mus = mu_list(sc.surface, 3, max(config.q_truncation, 1), start=config.q_seed)
    cert = covering_certificate(config.genus, config.cover_degree, config.refine, mus=mus, cfg=config.solver(),
                                kappa=config.kernel_kappa, t_max=config.t_max)
    write_derivs_csv(os.path.join(out, "derivs.csv"), cert.mus)
    for line in cert.lines():
        key, _, value = line.partition(": ")
        rep.lines.append(f"certificate.{key}: {value}")
    return EXIT_PASS if cert.passed else EXIT_FAIL


def cmd_verify_all(config, rep, out):
    from .acceptance import AcceptanceContext, run_all

    ctx = AcceptanceContext(config.genus, config.cover_degree, max(config.refine, 1), max(config.q_truncation, 1),
                            seed=config.seed, kappa=config.kernel_kappa, cfg=config.solver())
    results = run_all(ctx, emit=print)
    for r in results:
        rep[f"criterion.{r.number}"] = "pass" if r.passed else "fail"
        for c in r.checks:
            rep[f"criterion.{r.number}.{c.name}"] = (f"{'pass' if c.passed else 'fail'} value={c.value!r} "
                                                     f"reference={c.reference!r} tol={c.tolerance!r}")
    ok = all(r.passed for r in results)
    rep["passed"] = ok
    return EXIT_PASS if ok else EXIT_FAIL


COMMANDS = {
    "surface": (cmd_surface, "surface_report.txt"),
    "qdiff": (cmd_qdiff, "qdiff_report.txt"),
    "solve": (cmd_solve, "solve_report.txt"),
    "sweep": (cmd_sweep, "sweep_report.txt"),
    "certify": (cmd_certify, "certificate.txt"),
    "verify-all": (cmd_verify_all, "acceptance.txt"),
}


def run(subcommand: str, config: ScenarioConfig) -> int:
    """Run a pipeline stage, write its report into ``config.out_dir`` and return the exit code."""
    if subcommand not in COMMANDS:
        raise ConfigError(f"unknown subcommand {subcommand!r}")
    func, name = COMMANDS[subcommand]
    os.makedirs(config.out_dir, exist_ok=True)
    rep = Report(os.path.join(config.out_dir, name), config, subcommand)
    try:
        code = func(config, rep, config.out_dir)
    except (NonConvergence, CurveError, SolverError, MapOutOfRange) as exc:
        rep["error"] = f"{type(exc).__name__}: {exc}"
        code = EXIT_SOLVER
    except (ConfigError, DegenerateDifferential) as exc:
        rep["error"] = f"{type(exc).__name__}: {exc}"
        code = EXIT_CONFIG
    except WplabError as exc:
        rep["error"] = f"{type(exc).__name__}: {exc}"
        code = EXIT_FAIL
    rep["exit_code"] = code
    rep.write()
    return code


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="wplab", description="Energy of harmonic maps along Weil-Petersson geodesics.")
    parser.add_argument("subcommand", choices=SUBCOMMANDS)
    parser.add_argument("--config", help="key=value scenario file")
    parser.add_argument("--out", help="output directory (overrides out_dir)")
    parser.add_argument("--seed", type=int, help="random seed (overrides seed)")
    args = parser.parse_args(argv)
    try:
        config = load_config(args.config)
        if args.out is not None:
            config.out_dir = _validated("out_dir", args.out)
        if args.seed is not None:
            config.seed = _validated("seed", args.seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        out = args.out or "out"
        os.makedirs(out, exist_ok=True)
        with open(os.path.join(out, "config_error.txt"), "w") as fh:
            fh.write(f"command: {args.subcommand}\nerror: {exc}\nexit_code: {EXIT_CONFIG}\n")
        return EXIT_CONFIG
    code = run(args.subcommand, config)
    print(f"{args.subcommand}: exit {code} ({os.path.join(config.out_dir, COMMANDS[args.subcommand][1])})")
    return code

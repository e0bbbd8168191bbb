"""Command-line surface: exponents, sweeps, cone diagnostics, verification.

Four subcommands share one parser: ``exponent`` writes a JSON record for a
single domain, ``sweep`` writes a CSV over p/alpha grids (optionally an SVG),
``cone`` runs the truncated-cone diagnostics and writes the shell report,
and ``verify`` runs the property suite.  Outputs are deterministic for a
fixed config and seed; wall-clock columns can be suppressed with
``--no-timing`` when byte-identical reruns are required.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
import time
from dataclasses import dataclass

import numpy as np

from . import __version__
from .cone import (ConeDomain, contraction_check, decay_fit,
                   deformation_family, diagnostic_pair, nondegeneracy_check,
                   sandwich_check, solve_truncated, tau_lipschitz_check,
                   write_cone_report)
from .errors import ConfigError, ContractionFailure, RangeError, SpheigError
from .exponent import exponent_bracket, solve_domain
from .fields import Branch, ColatGrid, DiscreteField
from .geometry import DomainKind, PParams, SphericalDomain, parse_domain_file
from .verify import run_suite


@dataclass
class RunConfig:
    """Validated invocation record; everything downstream reads from here."""

    command: str
    params: PParams
    domain: SphericalDomain = None
    branch: Branch = Branch.SINGULAR
    tol: float = 1e-9
    mesh_h: float = 0.04
    steps: int = 0
    a: float = 1.0
    b: float = 256.0
    tau_grid: np.ndarray = None
    seed: int = 0
    trials: int = 10000
    only: str = None
    out: str = None
    svg: str = None
    timing: bool = True


def _parse_grid(text: str) -> list:
    """Comma list or start:step:stop (inclusive end, permissive rounding)."""
    if ":" in text:
        parts = [float(x) for x in text.split(":")]
        if len(parts) != 3 or parts[1] <= 0.0:
            raise ConfigError(f"bad range {text!r}; use start:step:stop")
        start, step, stop = parts
        n = int(math.floor((stop - start) / step + 1e-9)) + 1
        if n < 1:
            return []
        return [start + k * step for k in range(n)]
    return [float(x) for x in text.split(",") if x.strip()]


def _domain_from_args(args) -> SphericalDomain:
    if args.vertices_file:
        try:
            return parse_domain_file(args.vertices_file)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read domain file: {exc}") from exc
    if args.domain is None:
        raise ConfigError("need --domain or --vertices-file")
    if args.alpha is None:
        raise ConfigError("--alpha is required for arc and cap domains")
    if args.domain == "arc":
        return SphericalDomain.arc(args.alpha)
    if args.domain == "cap":
        return SphericalDomain.cap(args.alpha, args.dim)
    raise ConfigError("polygon domains are supplied via --vertices-file")


def _params_from_args(args, domain=None) -> PParams:
    p = args.p
    if p is None or p <= 1.0:
        raise ConfigError("--p must be given and > 1")
    dim = args.dim
    if domain is not None and domain.kind != DomainKind.ARC:
        dim = domain.dim_N
    if domain is not None and domain.kind == DomainKind.ARC:
        dim = 2
    if dim < 2:
        raise ConfigError("--dim must be >= 2")
    return PParams(p, dim)


def _emit_json(obj, out: str) -> None:
    text = json.dumps(obj, sort_keys=True, indent=2, allow_nan=True) + "\n"
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _samples(omega, limit: int = 33) -> list:
    """Deterministic coordinate/value pairs for the result record."""
    if isinstance(omega, ColatGrid):
        idx = np.unique(np.linspace(0, len(omega.nodes) - 1, limit).astype(int))
        return [[float(omega.nodes[i]), float(omega.values[i])] for i in idx]
    if isinstance(omega, DiscreteField):
        n = omega.mesh.n_vertices
        idx = np.unique(np.linspace(0, n - 1, limit).astype(int))
        verts = omega.mesh.vertices
        return [[float(verts[i][0]), float(verts[i][1]), float(verts[i][2]),
                 float(omega.values[i])] for i in idx]
    return []


def _domain_label(domain: SphericalDomain) -> dict:
    rec = {"kind": domain.kind.value, "dim": domain.dim_N}
    if domain.kind != DomainKind.POLYGON:
        rec["alpha"] = domain.alpha
    else:
        rec["n_vertices"] = len(domain.vertices)
    return rec


# ---------------------------------------------------------------------------
# subcommands


def cmd_exponent(cfg: RunConfig) -> int:
    domain = cfg.domain
    t0 = time.perf_counter()
    solvers = {}
    if domain.kind == DomainKind.POLYGON:
        solvers["fem"] = solve_domain(domain, cfg.params, cfg.branch,
                                      solver="fem", tol=cfg.tol,
                                      mesh_h=cfg.mesh_h)
    else:
        solvers["ode"] = solve_domain(domain, cfg.params, cfg.branch,
                                      solver="ode", tol=cfg.tol)
        if domain.kind == DomainKind.ARC or domain.dim_N == 3:
            solvers["fem"] = solve_domain(domain, cfg.params, cfg.branch,
                                          solver="fem", tol=cfg.tol,
                                          mesh_h=cfg.mesh_h)
    primary = solvers.get("ode", solvers.get("fem"))
    betas = sorted(pair.beta for pair in solvers.values())
    record = {
        "p": cfg.params.p,
        "N": cfg.params.dim_N,
        "domain": _domain_label(domain),
        "branch": cfg.branch.value,
        "beta": primary.beta,
        "beta_bracket": [betas[0], betas[-1]],
        "bracket_gap": betas[-1] - betas[0],
        "solvers": {k: v.beta for k, v in solvers.items()},
        "residual": primary.residual_norm,
        "normalization": 1.0,
        "tol": cfg.tol,
        "eigenfunction_samples": _samples(primary.omega),
    }
    if cfg.steps > 0:
        steps = [0.2 * 2.0 ** (-k) for k in range(cfg.steps + 1)]
        br = exponent_bracket(domain, cfg.params, cfg.branch, steps,
                              tol=cfg.tol, mesh_h=cfg.mesh_h)
        record["approximation"] = {
            "steps": list(br.steps),
            "beta_inner": list(br.beta_inner),
            "beta_outer": list(br.beta_outer),
            "beta_in_limit": br.beta_in_limit,
            "beta_out_limit": br.beta_out_limit,
            "gap": br.gap,
        }
    if cfg.timing:
        record["wall_ms"] = round(1000.0 * (time.perf_counter() - t0), 3)
    _emit_json(record, cfg.out)
    return 0


def _sweep_svg(rows: list, path: str) -> None:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    plt.rcParams["svg.hashsalt"] = "spheig"
    fig, ax = plt.subplots(figsize=(6, 4))
    alphas = sorted({r["alpha"] for r in rows if not r["error"]})
    for alpha in alphas:
        pts = [(r["p"], r["beta"]) for r in rows
               if r["alpha"] == alpha and not r["error"]]
        pts.sort()
        ax.plot([q[0] for q in pts], [q[1] for q in pts], marker="o",
                label=f"alpha={alpha:.6g}")
    ax.set_xlabel("p")
    ax.set_ylabel("beta")
    ax.legend()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def cmd_sweep(cfg: RunConfig, p_grid: list, alpha_grid: list,
              domain_kind: str) -> int:
    from .parallel import pmap

    jobs = [(p, alpha) for p in p_grid for alpha in alpha_grid]

    def run(job):
        p, alpha = job
        t0 = time.perf_counter()
        row = {"p": p, "alpha": alpha, "dim": cfg.params.dim_N,
               "branch": cfg.branch.value, "beta": float("nan"),
               "residual": float("nan"), "iterations": 0, "wall_ms": 0.0,
               "tol": cfg.tol, "error": ""}
        try:
            if domain_kind == "arc":
                dom = SphericalDomain.arc(alpha)
            else:
                dom = SphericalDomain.cap(alpha, cfg.params.dim_N)
            pair = solve_domain(dom, PParams(p, cfg.params.dim_N), cfg.branch,
                                solver="ode", tol=cfg.tol)
            row.update(beta=pair.beta, residual=pair.residual_norm,
                       iterations=pair.iterations)
        except (SpheigError, ValueError) as exc:
            row["error"] = f"{type(exc).__name__}: {exc}"
        row["wall_ms"] = round(1000.0 * (time.perf_counter() - t0), 3) \
            if cfg.timing else 0.0
        return row

    rows = pmap(run, jobs)
    rows.sort(key=lambda r: (r["p"], r["alpha"]))
    header = "p,alpha,dim,branch,beta,residual,iterations,wall_ms,tol,error"
    lines = [header]
    for r in rows:
        lines.append(",".join([
            "%.12g" % r["p"], "%.12g" % r["alpha"], str(r["dim"]),
            r["branch"], "%.12g" % r["beta"], "%.12g" % r["residual"],
            str(r["iterations"]), "%.12g" % r["wall_ms"], "%.12g" % r["tol"],
            r["error"].replace(",", ";"),
        ]))
    text = "\n".join(lines) + "\n"
    if cfg.out:
        with open(cfg.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if cfg.svg:
        _sweep_svg(rows, cfg.svg)
    return 0


def cmd_cone(cfg: RunConfig) -> int:
    domain = cfg.domain
    if domain.kind == DomainKind.POLYGON:
        raise ConfigError("cone diagnostics run on arc and cap sections")
    cone = ConeDomain(domain, cfg.a, cfg.b)
    theta, w, wp, beta_section = diagnostic_pair(domain, cfg.params)
    amb = cfg.a ** (-beta_section)

    u_w = solve_truncated(cone, cfg.params, amb * w, outer_zero=False)
    mid = 0.5 * domain.alpha if domain.kind == DomainKind.ARC else 0.0
    beta_fit, window = decay_fit(u_w, mid)

    family = deformation_family(cone, cfg.params, w, wp, cfg.tau_grid,
                                beta=beta_section)
    lip = tau_lipschitz_check(family)
    mid_idx = len(cfg.tau_grid) // 2
    sandwich = sandwich_check(family, mid_idx)
    try:
        contraction = contraction_check(family)
    except ContractionFailure as exc:
        raise ConfigError(
            f"{exc}; rerun with a larger --b (currently {cfg.b:g})") from exc
    c_hat = contraction["c_hat_est"]
    if cfg.b / cfg.a < c_hat * c_hat:
        raise ConfigError(
            f"b/a = {cfg.b / cfg.a:.3g} is below c_hat^2 = {c_hat * c_hat:.3g}; "
            f"increase --b to at least {cfg.a * c_hat * c_hat:.3g}")
    nondeg = nondegeneracy_check(u_w, 0.3)

    if cfg.out:
        write_cone_report(cfg.out, family, contraction, beta_fit)
    summary = {
        "p": cfg.params.p,
        "N": cfg.params.dim_N,
        "domain": _domain_label(domain),
        "a": cfg.a,
        "b": cfg.b,
        "beta_section": beta_section,
        "beta_fit": beta_fit,
        "fit_window": [window[0], window[1]],
        "delta1": family.delta1,
        "tau_lipschitz": lip,
        "sandwich": sandwich,
        "contraction": {k: v for k, v in contraction.items()
                        if k != "c_hat_sensitivity"},
        "c_hat_sensitivity": {k: (None if v is None else float(v))
                              for k, v in
                              contraction["c_hat_sensitivity"].items()},
        "nondegeneracy": nondeg,
        "tol": cfg.tol,
    }
    passed = lip["passed"] and sandwich["passed"] and contraction["passed"]
    summary["passed"] = passed
    _emit_json(summary, None)
    return 0 if passed else 1


def cmd_verify(cfg: RunConfig) -> int:
    results = run_suite(seed=cfg.seed, trials=cfg.trials)
    if cfg.only:
        results = [r for r in results if cfg.only in r["check"]]
        if not results:
            raise ConfigError(f"no check matches --only {cfg.only!r}")
    lines = []
    for rec in results:
        lines.append("%s %s slack=%.6e %s" % (
            "PASS" if rec["passed"] else "FAIL", rec["check"], rec["slack"],
            rec["detail"]))
    text = "\n".join(lines) + "\n"
    sys.stdout.write(text)
    if cfg.out:
        _emit_json(results, cfg.out)
    return 0 if all(r["passed"] for r in results) else 1


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="spheig",
        description="Separable p-harmonic exponents on spherical domains")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(sp, domain=True):
        sp.add_argument("--p", type=float, default=None)
        sp.add_argument("--dim", type=int, default=2)
        if domain:
            sp.add_argument("--domain", choices=("arc", "cap", "polygon"))
            sp.add_argument("--alpha", type=float, default=None)
            sp.add_argument("--vertices-file", default=None)
        sp.add_argument("--branch", choices=("singular", "regular"),
                        default="singular")
        sp.add_argument("--tol", type=float, default=1e-9)
        sp.add_argument("--out", default=None)
        sp.add_argument("--no-timing", action="store_true")

    sp = sub.add_parser("exponent", help="one domain, one branch, JSON out")
    common(sp)
    sp.add_argument("--mesh-h", type=float, default=0.04)
    sp.add_argument("--steps", type=int, default=0,
                    help="domain-approximation bracket depth k (0 = skip)")

    sp = sub.add_parser("sweep", help="p/alpha grid, CSV out")
    sp.add_argument("--p", required=True,
                    help="comma list or start:step:stop")
    sp.add_argument("--alpha", required=True,
                    help="comma list or start:step:stop")
    sp.add_argument("--dim", type=int, default=2)
    sp.add_argument("--domain", choices=("arc", "cap"), default="arc")
    sp.add_argument("--branch", choices=("singular", "regular"),
                    default="singular")
    sp.add_argument("--tol", type=float, default=1e-9)
    sp.add_argument("--out", default=None)
    sp.add_argument("--svg", default=None)
    sp.add_argument("--no-timing", action="store_true")

    sp = sub.add_parser("cone", help="truncated-cone diagnostics")
    common(sp)
    sp.add_argument("--a", type=float, default=1.0)
    sp.add_argument("--b", type=float, default=256.0)
    sp.add_argument("--tau-grid", default="0,0.2,0.4,0.6,0.8,1")

    sp = sub.add_parser("verify", help="property suite")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--trials", type=int, default=10000)
    sp.add_argument("--only", default=None)
    sp.add_argument("--out", default=None)

    return ap


def _config_from_args(args) -> RunConfig:
    if args.command == "verify":
        if args.trials < 1:
            raise ConfigError("--trials must be >= 1")
        return RunConfig(command="verify", params=PParams(1.5, 2),
                         seed=args.seed, trials=args.trials, only=args.only,
                         out=args.out)
    if args.command == "sweep":
        if args.dim < 2:
            raise ConfigError("--dim must be >= 2")
        if args.domain == "cap" and args.dim == 2:
            raise ConfigError("caps need --dim >= 3")
        cfg = RunConfig(command="sweep", params=PParams(2.0, args.dim),
                        branch=Branch(args.branch), tol=args.tol,
                        out=args.out, svg=args.svg, timing=not args.no_timing)
        return cfg
    domain = _domain_from_args(args)
    params = _params_from_args(args, domain)
    cfg = RunConfig(command=args.command, params=params, domain=domain,
                    branch=Branch(args.branch), tol=args.tol, out=args.out,
                    timing=not args.no_timing)
    if args.tol <= 0.0:
        raise ConfigError("--tol must be positive")
    if args.command == "exponent":
        cfg.mesh_h = args.mesh_h
        cfg.steps = args.steps
        if cfg.mesh_h <= 0.0:
            raise ConfigError("--mesh-h must be positive")
        if cfg.steps < 0:
            raise ConfigError("--steps must be >= 0")
    if args.command == "cone":
        cfg.a = args.a
        cfg.b = args.b
        if not 0.0 < cfg.a < cfg.b:
            raise ConfigError("need 0 < --a < --b")
        try:
            cfg.tau_grid = np.array([float(x) for x in
                                     args.tau_grid.split(",")])
        except ValueError as exc:
            raise ConfigError(f"bad --tau-grid: {exc}") from None
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _config_from_args(args)
        if cfg.command == "exponent":
            return cmd_exponent(cfg)
        if cfg.command == "sweep":
            return cmd_sweep(cfg, _parse_grid(args.p),
                             _parse_grid(args.alpha), args.domain)
        if cfg.command == "cone":
            return cmd_cone(cfg)
        return cmd_verify(cfg)
    except (ConfigError, RangeError) as exc:
        _emit_json({"error": {"type": type(exc).__name__,
                              "message": str(exc)}}, None)
        return 2
    except SpheigError as exc:
        _emit_json({"error": {"type": type(exc).__name__,
                              "message": str(exc)}}, None)
        return 1


if __name__ == "__main__":
    sys.exit(main())

"""Command line interface.

Subcommands: check-smallness, build-extension, solve, sweep-eta, verify, run.
Scenario configs are JSON objects with the fields of
:class:`pdflow.scenarios.Scenario`; ``calibration`` and ``solve`` are
nested objects (``"solve": null`` skips the solve stage) and a ``preset``
key selects the starting preset.
"""
import argparse
import json
import logging
import os
import sys

log = logging.getLogger("pdflow")


def _set_threads(n):
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ[var] = str(n)


def scenario_from_dict(cfg, base=None):
    from .scenarios import Scenario, get_preset
    from .smallness import Calibration
    from .solver import SolveConfig

    cfg = dict(cfg)
    preset = cfg.pop("preset", None)
    scen = base or (get_preset(preset) if preset else Scenario(cfg.get("name", "custom")))
    if "calibration" in cfg:
        cfg["calibration"] = Calibration(**cfg["calibration"])
    if "solve" in cfg and cfg["solve"] is not None:
        cfg["solve"] = SolveConfig(**cfg["solve"])
    unknown = set(cfg) - set(Scenario.__dataclass_fields__)
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    return scen.replace(**cfg)


def load_config(path):
    if path is None:
        return {}
    with open(path) as fh:
        return json.load(fh)


def _scenario(args):
    from .scenarios import get_preset

    cfg = load_config(args.config)
    base = get_preset(args.preset) if getattr(args, "preset", None) else None
    s = scenario_from_dict(cfg, base) if cfg or base is None else base
    if args.seed is not None:
        s = s.replace(seed=args.seed)
    return s


def cmd_check_smallness(args):
    from .report import csv_text
    from .smallness import Calibration, DataNorms, check_smallness, derive_exponents
    from .stress import StressModel, calibrate

    ex = derive_exponents(args.d, args.p, args.q, args.sigma)
    norms = DataNorms(args.K_d, args.K_f, args.K_n, args.K_t, args.delta)
    model = calibrate(args.p, args.delta, n_pairs=args.pairs, seed=args.seed or 0) if args.pairs else StressModel(args.p, args.delta)
    rep = check_smallness(norms, ex, Calibration(), model, (args.eta_lo, args.eta_hi))
    row = dict(rep.__dict__)
    row["C1"] = model.C1
    cols = ["eta_star", "L_min", "G1", "G2", "G3", "R", "satisfied", "direct_ok", "flag", "C1"]
    text = csv_text([row], cols)
    _emit(args, "smallness.csv", text)
    return 0 if rep.satisfied else 1


def _emit(args, name, text):
    from .report import _write

    if args.out:
        _write(os.path.join(args.out, name), text)
    sys.stdout.write(text)


def _exponents_from(args):
    from .smallness import derive_exponents

    return derive_exponents(2, args.p, args.q, args.sigma)


def cmd_build_extension(args):
    from .boundary import read_boundary_data
    from .extension import build_extension_pair
    from .mesh import read_mesh
    from .report import _write, csv_text

    mesh = read_mesh(args.mesh)
    data = read_boundary_data(args.data, mesh)
    ex = _exponents_from(args)
    pair = build_extension_pair(mesh, data, args.eta, ex)
    row = {"eta": args.eta, **pair.measured_norms}
    text = csv_text([row], list(row))
    if args.report:
        _write(args.report, text)
    _emit(args, "extension.csv", text)
    return 0


def cmd_solve(args):
    from .boundary import read_boundary_data
    from .extension import build_extension_pair
    from .mesh import read_mesh
    from .report import csv_text
    from .solver import SolveConfig, residual_weak_form, solve_regularized
    from .stress import StressModel, calibrate

    cfg = load_config(args.config)
    solve_cfg = SolveConfig(**{**cfg.get("solve", {}), "n_reg": args.n_reg, "sigma": args.sigma})
    ex = _exponents_from(args)
    solve_cfg.check_exponents(ex)
    mesh = read_mesh(args.mesh)
    data = read_boundary_data(args.data, mesh)
    model = calibrate(args.p, args.delta, n_pairs=args.pairs, seed=args.seed or 0) if args.pairs else StressModel(args.p, args.delta)
    pair = build_extension_pair(mesh, data, args.eta, ex)
    res = solve_regularized(mesh, pair, None, model, solve_cfg)
    w = residual_weak_form(res.v, res.pressure, data, None, model, penalty=(res.n_reg, res.sigma, res.u))
    row = {
        "status": res.status,
        "iterations": res.iterations,
        "final_residual": res.residual_history[-1] if res.residual_history else 0.0,
        "Du_norm_p": res.Du_norm_p,
        "Du_norm_sigma": res.Du_norm_sigma,
        "weak_residual": w.relative,
    }
    _emit(args, "solve.csv", csv_text([row], list(row)))
    if args.dump:
        write_fields(args.dump, mesh, res)
    return 0 if res.converged else 1


def write_fields(path, mesh, res):
    """Nodal dump in the mesh text layout with ``ux uy pressure`` columns."""
    from .report import FLOAT_FMT

    u = res.v.nodal()[: mesh.n_nodes]
    p = res.pressure.dofs
    lines = [f"NODES {mesh.n_nodes}"]
    for i, (x, y) in enumerate(mesh.nodes):
        vals = " ".join(FLOAT_FMT % v for v in (x, y, u[i, 0], u[i, 1], p[i]))
        lines.append(f"{i} {vals}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def cmd_sweep_eta(args):
    from .report import emit_report
    from .scenarios import sweep_eta

    s = _scenario(args)
    etas = sorted(float(e) for e in args.etas.split(","))
    rows = sweep_eta(s, etas, with_extension=args.extension)
    out = args.out or "."
    paths = emit_report(rows, "csv", out, f"{s.name}-sweep")
    if args.svg:
        paths += emit_report(rows, "svg-plot", out, f"{s.name}-sweep")
    for p in paths:
        print(p)
    return 0


def cmd_run(args):
    from .report import emit_report
    from .scenarios import run_scenario

    s = _scenario(args)
    rep = run_scenario(s)
    for p in emit_report(rep, "csv", args.out or ".", s.name):
        print(p)
    for stage, msg in sorted(rep.errors.items()):
        log.error("stage %s failed: %s", stage, msg)
    return 1 if rep.errors else 0


def cmd_verify(args):
    from .scenarios import run_scenario

    s = _scenario(args)
    rep = run_scenario(s)
    lines = []
    if rep.smallness is not None:
        lines.append(f"smallness satisfied: {rep.smallness.satisfied} (flag {rep.smallness.flag})")
    if rep.solve is not None:
        lines.append(f"solve: {rep.solve['status']} after {rep.solve['iterations']} iterations")
    if rep.verification is not None:
        v = rep.verification
        lines.append(f"a-priori bound: {v['apriori_status']}")
        lines.append(f"weak-form residual: {v['weak_residual']:.3e}")
    for stage, msg in sorted(rep.errors.items()):
        lines.append(f"stage {stage} failed: {msg}")
    print("\n".join(lines))
    ok = not rep.errors and rep.verification is not None and rep.verification["apriori_status"] != "violated"
    return 0 if ok else 1


def build_parser():
    ap = argparse.ArgumentParser(prog="pdflow", description=__doc__.splitlines()[0])
    ap.add_argument("--config", help="scenario JSON file")
    ap.add_argument("--seed", type=int, default=None)
    ap.add_argument("--out", help="output directory")
    ap.add_argument("--threads", type=int, default=None)
    ap.add_argument("--deterministic", action="store_true", help="single-threaded linear algebra")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def exps(p, need_q=True):
        p.add_argument("--p", type=float, required=True)
        p.add_argument("--q", type=float, required=need_q, default=None)
        p.add_argument("--sigma", type=float, default=None)

    c = sub.add_parser("check-smallness", help="evaluate the smallness condition for given norms")
    exps(c)
    c.add_argument("--d", type=int, default=2)
    c.add_argument("--delta", type=float, default=0.0)
    for k in ("K-d", "K-f", "K-n", "K-t"):
        c.add_argument(f"--{k}", type=float, default=0.0, dest=k.replace("-", "_"))
    c.add_argument("--eta-lo", type=float, default=1e-6)
    c.add_argument("--eta-hi", type=float, default=1e6)
    c.add_argument("--pairs", type=int, default=10**5, help="calibration pairs (0: C1 = C2 = 1)")
    c.set_defaults(func=cmd_check_smallness)

    b = sub.add_parser("build-extension", help="build h_eta and k for mesh and data files")
    b.add_argument("--mesh", required=True)
    b.add_argument("--data", required=True)
    b.add_argument("--eta", type=float, required=True)
    b.add_argument("--report")
    exps(b)
    b.set_defaults(func=cmd_build_extension)

    s = sub.add_parser("solve", help="solve the regularized problem for mesh and data files")
    s.add_argument("--mesh", required=True)
    s.add_argument("--data", required=True)
    s.add_argument("--eta", type=float, required=True)
    exps(s)
    s.add_argument("--delta", type=float, default=0.0)
    s.add_argument("--n-reg", type=int, default=None)
    s.add_argument("--pairs", type=int, default=10**5)
    s.add_argument("--dump", help="write nodal velocity and pressure to this file")
    s.set_defaults(func=cmd_solve)

    for name, fn, hlp in (
        ("sweep-eta", cmd_sweep_eta, "tabulate L and the coercivity constants over eta"),
        ("verify", cmd_verify, "run a scenario and print the verification verdicts"),
        ("run", cmd_run, "run the full pipeline and write the report CSV"),
    ):
        p = sub.add_parser(name, help=hlp)
        p.add_argument("--preset", default=None)
        if name == "sweep-eta":
            p.add_argument("--etas", default="0.001,0.01,0.1,0.2,0.4")
            p.add_argument("--svg", action="store_true")
            p.add_argument("--extension", action="store_true", help="add measured extension norms")
        p.set_defaults(func=fn)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.deterministic:
        _set_threads(1)
    elif args.threads:
        _set_threads(args.threads)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.command in ("sweep-eta", "verify", "run") and not (args.preset or args.config):
        args.preset = "tangential-cavity"
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        log.error("%s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())

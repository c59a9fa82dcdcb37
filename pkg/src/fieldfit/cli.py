"""Command-line interface wiring the pipeline into reproducible runs.

Commands: ``fit`` (adaptive surrogate construction), ``eval`` (sample a
saved surrogate on a grid), ``darcy`` (pressure solves and error reports),
``verify-theory`` (step-interface error law), and ``preset`` (canned
experiments).  Every output file starts with a provenance line echoing the
exact configuration; timing lives in dedicated columns so reruns are
byte-identical elsewhere.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
failure.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import io as fio
from .adaptive import AdaptiveConfig
from .darcy import (
    DarcyProblem,
    field_rel_error,
    pressure_rel_error,
    solve_darcy,
    triangulate,
    write_pressure_text,
)
from .elastic_net import ElasticNetConfig
from .errors import ConfigError, DataError, FieldfitError, NumericalError
from .fields import FieldData, box_field_2d, step_field_1d
from .geometry import build_mesh
from .partition import DictionarySpec, fit_parallel, load, make_partition, save

EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericalError, FloatingPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except FieldfitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fieldfit", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(required=True)

    f = sub.add_parser("fit", help="fit a surrogate to a field file")
    f.add_argument("--field", required=True, help="input field file")
    f.add_argument("--out", required=True, help="output surrogate file")
    f.add_argument("--reports", help="per-round report CSV")
    f.add_argument("--px", type=int, default=1)
    f.add_argument("--py", type=int, default=1)
    f.add_argument("--sigma", type=float, required=True, help="initial kernel width")
    f.add_argument("--g", type=int, help="lattice resolution (default: one basis per cell)")
    f.add_argument("--l1", default="0", help="l1 penalty, scalar or comma list per subdomain")
    f.add_argument("--l2", default="0", help="l2 penalty, scalar or comma list per subdomain")
    f.add_argument("--ktop", type=int, default=1, help="cells marked per round")
    f.add_argument("--mq", type=int, default=3, help="new centers per marked cell")
    f.add_argument("--eta", type=float, default=0.5, help="width shrink factor")
    f.add_argument("--mmax", type=int, default=0, help="maximum added bases")
    f.add_argument("--eps-tol", type=float, default=0.0, help="residual stopping tolerance")
    f.add_argument("--max-rounds", type=int, default=50)
    f.add_argument("--quad-order", type=int, default=1, choices=(1, 2))
    f.add_argument("--offsets", help="new-center offsets in cell units, e.g. '0,0;-0.25,0;0.25,0'")
    f.add_argument("--tol", type=float, default=1e-10, help="coordinate-descent tolerance")
    f.add_argument("--max-iters", type=int, default=100_000, help="coordinate-descent sweep cap")
    f.add_argument("--workers", type=int, default=1)
    f.set_defaults(func=cmd_fit)

    e = sub.add_parser("eval", help="evaluate a saved surrogate on a grid")
    e.add_argument("--surrogate", required=True)
    e.add_argument("--out", required=True)
    e.add_argument("--nx", type=int, required=True)
    e.add_argument("--ny", type=int)
    e.add_argument("--bounds", help="x0,x1[,y0,y1]; default: surrogate bounds")
    e.set_defaults(func=cmd_eval)

    d = sub.add_parser("darcy", help="solve the pressure equation")
    d.add_argument("--field", help="coefficient from a field file (staircase)")
    d.add_argument("--surrogate", help="coefficient from a saved surrogate")
    d.add_argument("--preset", default="left-right", choices=("left-right", "spe10"))
    d.add_argument("--nx", type=int)
    d.add_argument("--ny", type=int)
    d.add_argument("--out", help="pressure CSV")
    d.add_argument("--out-text", help="nodal pressure in the field-file grammar")
    d.add_argument("--report", help="error-report text file")
    d.add_argument("--sweep", help="comma list of mesh sizes for a convergence table")
    d.set_defaults(func=cmd_darcy)

    t = sub.add_parser("verify-theory", help="step-interface L1 error law check")
    t.add_argument("--c-values", default="0.5,1,2")
    t.add_argument("--sigma-values", default="0.05,0.1,0.2")
    t.add_argument("--b", type=float, default=0.0)
    t.add_argument("--out", required=True)
    t.set_defaults(func=cmd_verify_theory)

    r = sub.add_parser("preset", help="run a canned experiment")
    r.add_argument(
        "name",
        choices=("step1d", "case-uniform", "case-adaptive", "case-parallel", "spe10"),
    )
    r.add_argument("--outdir", required=True)
    r.add_argument("--spe10-file", help="path to spe_perm.dat (spe10 preset)")
    r.add_argument("--layer", type=int, default=0)
    r.add_argument("--workers", type=int, default=1)
    r.set_defaults(func=cmd_preset)
    return p


def _provenance(args) -> str:
    items = sorted(
        (k.replace("_", "-"), v)
        for k, v in vars(args).items()
        if k != "func" and v is not None
    )
    return "fieldfit " + " ".join(f"--{k}={v}" for k, v in items)


def _parse_lams(text: str, n: int, name: str) -> list[float]:
    try:
        vals = [float(t) for t in text.split(",")]
    except ValueError as exc:
        raise ConfigError(f"cannot parse {name}={text!r}: {exc}") from exc
    if len(vals) == 1:
        return vals * n
    if len(vals) != n:
        raise ConfigError(f"{name} has {len(vals)} entries for {n} subdomains")
    return vals


def _parse_offsets(text: str | None, dim: int):
    if text is None:
        return None
    try:
        offs = tuple(tuple(float(v) for v in part.split(",")) for part in text.split(";"))
    except ValueError as exc:
        raise ConfigError(f"cannot parse offsets {text!r}: {exc}") from exc
    if any(len(o) != dim for o in offs):
        raise ConfigError(f"offsets must have {dim} coordinates each")
    return offs


def cmd_fit(args) -> int:
    data = fio.read_field(args.field)
    mesh = data.mesh
    if args.py != 1 and mesh.dim == 1:
        raise ConfigError("--py must be 1 for 1-D fields")
    for n, p, axis in zip(mesh.counts, (args.px, args.py), "xy"):
        if p < 1 or n % p != 0:
            raise ConfigError(f"--p{axis}={p} does not divide n{axis}={n}")
    part = make_partition(mesh, args.px, args.py)
    n_sub = part.n_subdomains
    lam1 = _parse_lams(args.l1, n_sub, "--l1")
    lam2 = _parse_lams(args.l2, n_sub, "--l2")
    offsets = _parse_offsets(args.offsets, mesh.dim)
    if args.ktop < 1 or args.mq < 1 or not 0 < args.eta < 1:
        raise ConfigError("require ktop >= 1, mq >= 1 and 0 < eta < 1")
    if offsets is not None and len(offsets) != args.mq:
        raise ConfigError(f"--offsets needs exactly {args.mq} entries")
    configs = [
        AdaptiveConfig(
            k_top=args.ktop,
            m_max=args.mmax,
            eps_tol=args.eps_tol,
            eta=args.eta,
            m_q=args.mq,
            max_rounds=args.max_rounds,
            elastic=ElasticNetConfig(
                lam1=lam1[i], lam2=lam2[i], tol=args.tol, max_iters=args.max_iters
            ),
            offsets=offsets,
            quad_order=args.quad_order,
        )
        for i in range(n_sub)
    ]
    spec = DictionarySpec(sigma=args.sigma, lattice=args.g)
    surrogate, report = fit_parallel(
        data, part, configs, spec, workers=args.workers,
        metadata={"config": _provenance(args)},
    )
    save(surrogate, args.out)
    if args.reports:
        merged = []
        for i, rounds in enumerate(report.rounds):
            merged.extend((i, r) for r in rounds)
        _write_subdomain_reports(merged, args.reports, _provenance(args))
    err = field_rel_error(data, surrogate, order=args.quad_order)
    print(f"fit: {n_sub} subdomain(s), rel_l2={err:.6e}, wall={report.total_seconds:.2f}s")
    return 0


def _write_subdomain_reports(rows, path, provenance):
    lines = [f"# {provenance}", "subdomain,round,centers,max_RT,rel_L2,objective,seconds"]
    for i, r in rows:
        lines.append(
            f"{i},{r.round},{r.centers},{r.max_residual:.17g},{r.rel_l2:.17g},"
            f"{r.objective:.17g},{r.seconds:.6f}"
        )
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def _grid_points(nx, ny, bounds, dim):
    if dim == 1:
        mesh = build_mesh(1, nx, bounds[:2])
    else:
        mesh = build_mesh(2, (nx, ny), bounds)
    return mesh.centroids


def cmd_eval(args) -> int:
    surrogate = load(args.surrogate)
    mesh = surrogate.partition.mesh
    if args.bounds is not None:
        try:
            bounds = [float(v) for v in args.bounds.split(",")]
        except ValueError as exc:
            raise ConfigError(f"cannot parse bounds {args.bounds!r}") from exc
    else:
        bounds = [v for b in mesh.bounds for v in b]
    if mesh.dim == 2 and args.ny is None:
        raise ConfigError("--ny is required for 2-D surrogates")
    pts = _grid_points(args.nx, args.ny, bounds, mesh.dim)
    try:
        values = surrogate.evaluate(pts)
    except ValueError as exc:
        raise DataError(f"evaluation failed: {exc}") from exc
    fio.write_grid_csv(pts, values, args.out, provenance=_provenance(args))
    print(f"eval: wrote {pts.shape[0]} rows to {args.out}")
    return 0


def _bc_preset(name):
    if name == "left-right":
        return {"left": 1.0, "right": 0.0}
    if name == "spe10":
        return {"left": 100.0, "right": 0.0}
    raise ConfigError(f"unknown darcy preset {name!r}")


def cmd_darcy(args) -> int:
    if not args.field and not args.surrogate:
        raise ConfigError("darcy requires --field and/or --surrogate")
    data = fio.read_field(args.field) if args.field else None
    surrogate = load(args.surrogate) if args.surrogate else None
    ref = data if data is not None else surrogate.partition.mesh
    mesh0 = ref.mesh if isinstance(ref, FieldData) else ref
    if mesh0.dim != 2:
        raise ConfigError("the darcy command supports 2-D fields only")
    nx = args.nx or mesh0.counts[0]
    ny = args.ny or mesh0.counts[1]
    bounds = mesh0.bounds
    dirichlet = _bc_preset(args.preset)

    def run(coeff, n_x, n_y):
        tri = triangulate(n_x, n_y, bounds)
        problem = DarcyProblem(mesh=tri, coefficient=coeff, dirichlet=dirichlet)
        return solve_darcy(problem)

    lines = [f"# {_provenance(args)}"]
    solution = None
    if args.sweep:
        try:
            sizes = [int(t) for t in args.sweep.split(",")]
        except ValueError as exc:
            raise ConfigError(f"cannot parse sweep {args.sweep!r}") from exc
        coeff = surrogate.evaluate if surrogate else data.piecewise_eval
        ref_coeff = data.piecewise_eval if data is not None else coeff
        aspect = ny / nx
        fine = run(ref_coeff, max(sizes), max(1, round(max(sizes) * aspect)))
        lines.append("nx,h,rel_pressure_error")
        errors = []
        for n in sizes:
            sol = run(coeff, n, max(1, round(n * aspect)))
            err = pressure_rel_error(fine, sol)
            errors.append(err)
            lines.append(f"{n},{(bounds[0][1] - bounds[0][0]) / n:.17g},{err:.17g}")
        if len(sizes) >= 2:
            slope = np.polyfit(np.log([1.0 / n for n in sizes]), np.log(errors), 1)[0]
            lines.append(f"# slope={slope:.4f}")
    elif data is not None and surrogate is not None:
        p_true = run(data.piecewise_eval, nx, ny)
        p_star = run(surrogate.evaluate, nx, ny)
        err = pressure_rel_error(p_true, p_star)
        lines.append(f"rel_pressure_error,{err:.17g}")
        solution = p_star
    else:
        coeff = surrogate.evaluate if surrogate else data.piecewise_eval
        solution = run(coeff, nx, ny)

    if solution is not None and args.out:
        active = np.isfinite(solution.values)
        fio.write_grid_csv(
            solution.mesh.nodes[active], solution.values[active], args.out,
            provenance=_provenance(args),
        )
    if solution is not None and args.out_text:
        write_pressure_text(solution, args.out_text)
    if args.report:
        with open(args.report, "w") as fh:
            fh.write("\n".join(lines) + "\n")
    for line in lines[1:]:
        print(line)
    return 0


def cmd_verify_theory(args) -> int:
    from .step_approx import error_grid

    try:
        cs = [float(t) for t in args.c_values.split(",")]
        sigmas = [float(t) for t in args.sigma_values.split(",")]
    except ValueError as exc:
        raise ConfigError(f"cannot parse parameter grid: {exc}") from exc
    rows = error_grid(cs, sigmas, b=args.b)
    lines = [f"# {_provenance(args)}", "c,sigma,b,numeric,analytic,rel_diff"]
    lines.extend(",".join(f"{v:.17g}" for v in row) for row in rows)
    with open(args.out, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    worst = max(r[-1] for r in rows)
    print(f"verify-theory: {len(rows)} cases, worst rel_diff={worst:.3e}")
    return 0


# experiment presets: field construction + the pipeline configuration used
# in the corresponding test runs


def _preset_field(name):
    if name == "step1d":
        return step_field_1d(16)
    if name in ("case-uniform", "case-adaptive", "case-parallel"):
        return box_field_2d()
    raise ConfigError(f"unknown preset {name!r}")


def cmd_preset(args) -> int:
    import pathlib

    outdir = pathlib.Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    name = args.name
    if name == "spe10":
        if not args.spe10_file:
            raise ConfigError("the spe10 preset requires --spe10-file")
        data = fio.read_spe10(args.spe10_file, args.layer)
        field_path = outdir / f"spe10_layer{args.layer}.txt"
        fio.write_field(data, field_path)
        fit_args = [
            "fit", "--field", str(field_path),
            "--out", str(outdir / "spe10_surrogate.txt"),
            "--reports", str(outdir / "spe10_reports.csv"),
            "--sigma", "0.00159", "--px", "2", "--py", "2",
            "--l1", "4.59e-4", "--l2", "4.64e-6",
            "--ktop", "660", "--mq", "3", "--mmax", "3960", "--max-rounds", "3",
            "--offsets", "0,0;-0.25,0;0.25,0",
            "--tol", "1e-6", "--max-iters", "2000",
            "--workers", str(args.workers),
        ]
        rc = main(fit_args)
        if rc != 0:
            return rc
        return main(
            [
                "darcy", "--field", str(field_path),
                "--surrogate", str(outdir / "spe10_surrogate.txt"),
                "--preset", "spe10",
                "--report", str(outdir / "spe10_pressure_report.txt"),
                "--out", str(outdir / "spe10_pressure.csv"),
            ]
        )

    data = _preset_field(name)
    stem = name.replace("-", "_")
    field_path = outdir / f"{stem}_field.txt"
    fio.write_field(data, field_path)
    lam2 = "4.64e-6" if name == "step1d" else "1e-4"
    common = ["--field", str(field_path), "--l1", "4.59e-4", "--l2", lam2]
    if name == "step1d":
        return main(
            ["fit", *common,
             "--out", str(outdir / f"{stem}_surrogate.txt"),
             "--reports", str(outdir / f"{stem}_reports.csv"),
             "--sigma", "0.0019", "--ktop", "1", "--mq", "3",
             "--eta", "0.5", "--mmax", "6", "--max-rounds", "10"]
        )
    if name == "case-uniform":
        return main(
            ["fit", *common,
             "--out", str(outdir / f"{stem}_surrogate.txt"),
             "--reports", str(outdir / f"{stem}_reports.csv"),
             "--sigma", "0.031", "--tol", "1e-6", "--max-iters", "4000"]
        )
    if name == "case-adaptive":
        return main(
            ["fit", *common,
             "--out", str(outdir / f"{stem}_surrogate.txt"),
             "--reports", str(outdir / f"{stem}_reports.csv"),
             "--sigma", "0.031", "--ktop", "204", "--mq", "3", "--eta", "0.5",
             "--mmax", "1836", "--max-rounds", "4",
             "--offsets", "0,0;-0.25,0;0.25,0",
             "--tol", "1e-6", "--max-iters", "4000"]
        )
    if name == "case-parallel":
        return main(
            ["fit", *common,
             "--out", str(outdir / f"{stem}_surrogate.txt"),
             "--reports", str(outdir / f"{stem}_reports.csv"),
             "--sigma", "0.031", "--px", "2", "--py", "2",
             "--workers", str(args.workers),
             "--tol", "1e-6", "--max-iters", "4000"]
        )
    raise ConfigError(f"unknown preset {name!r}")


if __name__ == "__main__":
    sys.exit(main())

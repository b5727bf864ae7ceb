"""Command-line front end.

Exit codes: 0 success, 1 assertion failure, 2 usage or config error,
3 numerical abort.  All file outputs are written atomically (temp file
plus rename), and every CSV starts with a provenance comment carrying the
tool version, the seed, and the scenario hash.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile

import numpy as np

from . import __version__
from .config import ConfigError, Scenario, dump_config, load_scenario
from .density import BulkDensity, HookeTensor
from .drivers import eps_sweep, gradient_check, predict_limit
from .energy import PsiSpec, assemble_energy
from .grid import write_snapshot
from .limits import (JumpTemplate, limit_constants, limit_constants_quadrature,
                     limsup_check, optimal_profile)
from .operators import (KernelField, classify_ellipticity, kernel_residual,
                        operator_from_name)
from .solve import NumericalAbort, alternate_minimize, apply_notch, elastic_initializer

EXIT_OK = 0
EXIT_ASSERT = 1
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


def _atomic_write(path: str, text: str):
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _provenance(seed, scenario_hash="-"):
    return f"# phasefrac {__version__} seed={seed} scenario={scenario_hash}\n"


def _fmt(x) -> str:
    if x is None:
        return ""
    return repr(float(x))


def _json_complexpair(witness):
    if witness is None:
        return None
    v, z = witness
    enc = lambda arr: [[float(c.real), float(c.imag)] for c in np.atleast_1d(arr)]
    return {"v": enc(v), "z": enc(z)}


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_classify(args) -> int:
    op = operator_from_name(args.op, args.dim)
    report = classify_ellipticity(op, n_samples=args.samples, tol=args.tol,
                                  seed=args.seed)
    payload = {
        "operator": args.op,
        "dim": args.dim,
        "r_elliptic": report.r_elliptic,
        "c_elliptic": report.c_elliptic,
        "min_sigma_real": report.min_sigma_real,
        "min_sigma_complex": report.min_sigma_complex,
        "witness": _json_complexpair(report.witness),
        "samples": report.samples,
        "tol": report.tol,
    }
    print(json.dumps(payload, indent=2))
    return EXIT_OK


def cmd_limit_constants(args) -> int:
    psi = PsiSpec(args.psi0, args.m)
    consts = limit_constants(args.p, args.q, args.gamma, psi)
    check = limit_constants_quadrature(args.p, args.q, args.gamma, psi)
    print(f"a = {_fmt(consts.a)}")
    print(f"b = {_fmt(consts.b)}")
    print(f"a_quadrature = {_fmt(check.a)}")
    return EXIT_OK


def cmd_profile(args) -> int:
    psi = PsiSpec(args.psi0, args.m)
    sol = optimal_profile(args.gamma, args.q, psi, args.eps,
                          table_points=args.points)
    lines = [_provenance(args.seed)]
    lines.append(f"# rho = {_fmt(sol.rho)} tau = {_fmt(sol.tau)} "
                 f"T = {_fmt(sol.T) if np.isfinite(sol.T) else 'inf'}\n")
    lines.append("t,w\n")
    for t, w in zip(sol.table_t, sol.table_w):
        lines.append(f"{_fmt(t)},{_fmt(w)}\n")
    text = "".join(lines)
    if args.out:
        _atomic_write(args.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_kernel_check(args) -> int:
    op = operator_from_name(args.op, args.dim)
    rng = np.random.default_rng(args.seed)
    if args.kind == "rigid":
        g = rng.standard_normal((args.dim, args.dim))
        fld = KernelField.rigid(M=g - g.T, b=rng.standard_normal(args.dim))
    else:
        fld = KernelField.conformal(a=rng.standard_normal(args.dim),
                                    b=rng.standard_normal(args.dim))
    res = kernel_residual(op, fld, seed=args.seed)
    print(json.dumps({"operator": args.op, "dim": args.dim,
                      "kind": args.kind, "max_residual": res}))
    return EXIT_OK


def _load(args) -> Scenario:
    return load_scenario(args.scenario,
                         allow_non_c_elliptic=getattr(args, "allow_non_c_elliptic", False))


def cmd_minimize(args) -> int:
    scn = _load(args)
    if args.seed is not None:
        scn.solver = type(scn.solver)(scn.solver.tol_rel, scn.solver.max_outer,
                                      scn.solver.max_inner, scn.solver.inner_tol,
                                      args.seed)
    eps = args.eps if args.eps is not None else scn.eps_list[0]
    params = scn.params_for(eps)
    grid = scn.grid_for(eps)
    mu, mv = scn.masks_for(grid)
    start = elastic_initializer(grid, scn.u0_values(grid), mu, mv, params,
                                scn.operator, scn.density, scn.solver)
    if scn.notch:
        start = apply_notch(start)
    log_rows = []

    def log(outer, bd, gu, gv):
        log_rows.append((outer, bd, gu, gv))

    fieldv, history = alternate_minimize(grid, start, params, scn.operator,
                                         scn.density, scn.solver, log=log)
    bd = history.records[-1].breakdown
    if scn.output_csv:
        lines = [_provenance(scn.solver.seed, scn.hash)]
        lines.append("iter,E_total,E_A,E_rest,E_psi,E_gradv,grad_u_norm,grad_v_norm\n")
        for outer, b, gu, gv in log_rows:
            lines.append(",".join([str(outer), _fmt(b.total), _fmt(b.term_A),
                                   _fmt(b.term_rest), _fmt(b.term_psi),
                                   _fmt(b.term_gradv), _fmt(gu), _fmt(gv)]) + "\n")
        _atomic_write(scn.output_csv, "".join(lines))
    if scn.output_snapshot:
        write_snapshot(scn.output_snapshot, grid, fieldv)
    print(json.dumps({"eps": eps, "E_total": bd.total, "E_A": bd.term_A,
                      "E_rest": bd.term_rest, "E_psi": bd.term_psi,
                      "E_gradv": bd.term_gradv,
                      "outer_iterations": len(history.records)}))
    return EXIT_OK


def _sweep_csv(scn: Scenario, rows) -> str:
    lines = [_provenance(scn.solver.seed, scn.hash)]
    lines.append("eps,eta,E_total,E_A,E_rest,E_psi,E_gradv,"
                 "a_variation,psi_mass,D_limit_prediction,runtime_s\n")
    for r in rows:
        b = r.breakdown
        lines.append(",".join([
            _fmt(r.eps), _fmt(r.eta), _fmt(b.total), _fmt(b.term_A),
            _fmt(b.term_rest), _fmt(b.term_psi), _fmt(b.term_gradv),
            _fmt(r.a_variation), _fmt(r.psi_mass), _fmt(r.prediction),
            _fmt(r.runtime_s),
        ]) + "\n")
    return "".join(lines)


def cmd_sweep(args) -> int:
    scn = _load(args)
    try:
        result = eps_sweep(scn, keep_fields=bool(scn.output_snapshot))
        rows, fields = result if scn.output_snapshot else (result, [])
    except NumericalAbort as exc:
        partial = getattr(exc, "partial_rows", [])
        if scn.output_csv and partial:
            _atomic_write(scn.output_csv, _sweep_csv(scn, partial))
        print(f"numerical abort: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    if scn.output_csv:
        _atomic_write(scn.output_csv, _sweep_csv(scn, rows))
    else:
        sys.stdout.write(_sweep_csv(scn, rows))
    if scn.output_snapshot:
        for i, (grid, fieldv) in enumerate(fields):
            write_snapshot(f"{scn.output_snapshot}.row{i}.txt", grid, fieldv)
    return EXIT_OK


def cmd_limsup(args) -> int:
    scn = _load(args)
    if scn.template is None:
        raise ConfigError("template.plane_c", "limsup requires a template")
    rows = limsup_check(scn.template, scn.operator, scn.density, scn.gamma,
                        scn.q, scn.psi, scn.eps_list, scn.eta_rule,
                        scn.extents, grid_factor=scn.limsup_factor,
                        taper_width=scn.limsup_taper,
                        max_cells=scn.limsup_max_cells)
    lines = [_provenance(scn.solver.seed, scn.hash)]
    lines.append("eps,E_eps_total,E_eps_A,E_eps_rest,E_eps_psi,E_eps_gradv,"
                 "D_limit,ratio\n")
    for r in rows:
        b = r.breakdown
        lines.append(",".join([
            _fmt(r.eps), _fmt(b.total), _fmt(b.term_A), _fmt(b.term_rest),
            _fmt(b.term_psi), _fmt(b.term_gradv), _fmt(r.d_limit), _fmt(r.ratio),
        ]) + "\n")
    text = "".join(lines)
    if scn.output_csv:
        _atomic_write(scn.output_csv, text)
    else:
        sys.stdout.write(text)
    if args.assert_ratio is not None:
        final = rows[-1].ratio
        if abs(final - 1.0) > args.assert_ratio:
            print(f"assertion failed: final ratio {final} deviates from 1 "
                  f"by more than {args.assert_ratio}", file=sys.stderr)
            return EXIT_ASSERT
    return EXIT_OK


def cmd_gradient_check(args) -> int:
    scn = _load(args)
    results = gradient_check(scn, n_states=args.states, seed=args.seed or 0,
                             corrupt=args.corrupt)
    ok = all(r.passed for r in results)
    for r in results:
        print(f"{r.what}: max relative error {r.rel_error:.3e} "
              f"{'PASS' if r.passed else 'FAIL'}")
    return EXIT_OK if ok else EXIT_ASSERT


def cmd_dump(args) -> int:
    scn = _load(args)
    sys.stdout.write(dump_config(scn.raw))
    return EXIT_OK


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="phasefrac", allow_abbrev=False)
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("classify", allow_abbrev=False)
    p.add_argument("--op", required=True, choices=["full-strain", "deviatoric"])
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--samples", type=int, default=10_000)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("limit-constants", allow_abbrev=False)
    p.add_argument("--p", type=float, default=2.0)
    p.add_argument("--q", type=float, default=2.0)
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--psi0", type=float, default=1.0)
    p.add_argument("--m", type=float, default=2.0)
    p.set_defaults(func=cmd_limit_constants)

    p = sub.add_parser("profile", allow_abbrev=False)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--q", type=float, default=2.0)
    p.add_argument("--psi0", type=float, default=1.0)
    p.add_argument("--m", type=float, default=2.0)
    p.add_argument("--points", type=int, default=512)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_profile)

    p = sub.add_parser("kernel-check", allow_abbrev=False)
    p.add_argument("--op", required=True, choices=["full-strain", "deviatoric"])
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--kind", required=True, choices=["rigid", "conformal"])
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_kernel_check)

    for name, fn in (("minimize", cmd_minimize), ("sweep", cmd_sweep),
                     ("limsup", cmd_limsup), ("gradient-check", cmd_gradient_check),
                     ("dump", cmd_dump)):
        p = sub.add_parser(name, allow_abbrev=False)
        p.add_argument("--scenario", required=True)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--allow-non-c-elliptic", action="store_true")
        if name == "minimize":
            p.add_argument("--eps", type=float, default=None)
        if name == "limsup":
            p.add_argument("--assert-ratio", type=float, default=None,
                           dest="assert_ratio")
        if name == "gradient-check":
            p.add_argument("--states", type=int, default=20)
            p.add_argument("--corrupt", action="store_true",
                           help=argparse.SUPPRESS)  # test hook
        p.set_defaults(func=fn)
    return ap


def main(argv=None) -> int:
    threads = os.environ.get("PHASEFRAC_THREADS")
    if threads:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ.setdefault(var, threads)
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_CONFIG
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalAbort as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

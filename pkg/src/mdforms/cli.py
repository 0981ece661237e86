"""Command-line front end.

Exit codes: 0 success, 1 property or validation failure, 2 input error,
3 solver failure. Reports are canonical JSON (sorted keys, floats with 17
significant digits) so identical runs give identical bytes.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import _kernels
from .cochains import MixedForm, read_form, write_form
from .geometry import ParseError, load_geometry, validate_conforming
from .hodge import SolverError, betti_numbers, hodge_decompose, poincare_constant
from .laplace import (
    CoefficientField,
    coercivity_estimate,
    load_coefficients,
    solve_hodge_laplace,
    write_vtk,
)
from .operators import free_mask, layout, mixed_derivative, stokes_check, _D

EXIT_OK, EXIT_FAIL, EXIT_INPUT, EXIT_SOLVER = 0, 1, 2, 3
COMMANDS = ("check", "verify", "betti", "decompose", "solve", "poincare")


class InputError(Exception):
    pass


# -- canonical JSON -----------------------------------------------------------


def _fmt(obj) -> str:
    if isinstance(obj, (bool, np.bool_)) or obj is None:
        return json.dumps(None if obj is None else bool(obj))
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return '"NaN"'
        if math.isinf(x):
            return '"Infinity"' if x > 0 else '"-Infinity"'
        return "%.17g" % x
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        items = sorted((str(k), v) for k, v in obj.items())
        return "{" + ",".join(f"{json.dumps(k)}:{_fmt(v)}" for k, v in items) + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        return "[" + ",".join(_fmt(v) for v in obj) + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def canonical_json(obj) -> str:
    return _fmt(obj) + "\n"


# -- helpers ------------------------------------------------------------------------


def _max_abs(mat) -> int:
    return int(abs(mat).max()) if mat.nnz else 0


def _load(args):
    try:
        return load_geometry(args.geometry)
    except (OSError, UnicodeDecodeError) as exc:
        raise InputError(f"cannot read geometry: {exc}") from exc


def _random_form(g, k, bc, rng):
    mask = free_mask(g, k, bc)
    x = np.zeros(len(mask))
    x[mask] = rng.standard_normal(int(mask.sum()))
    return MixedForm(k, x)


def _read_optional_form(path, k, g):
    if path is None:
        return None
    try:
        form, meta = read_form(path)
    except (OSError, ValueError, KeyError) as exc:
        raise InputError(f"cannot read form {path}: {exc}") from exc
    if form.k != k:
        raise InputError(f"form {path} has degree {form.k}, expected {k}")
    n = layout(g, k).total
    if len(form.coefficients) != n:
        raise InputError(f"form {path} has {len(form.coefficients)} values, layout has {n}")
    return form


def _coefficients(args, k):
    if args.coeff is None:
        return CoefficientField(k)
    try:
        rf = load_coefficients(args.coeff)
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise InputError(f"bad coefficient file: {exc}") from exc
    if rf.k != k:
        raise InputError(f"coefficient file is for degree {rf.k}, solving degree {k}")
    return rf


# -- commands ---------------------------------------------------------------------


def cmd_check(args):
    g = _load(args)
    rep = validate_conforming(g)
    return (EXIT_OK if rep.ok else EXIT_FAIL), {"geometry_hash": g.hash, **rep.to_dict()}


def structure_report(g, weights="measure", bc="natural", seed=42, pairs=50, tol=None) -> dict:
    """Run the cochain-complex, adjointness and Stokes checks for every degree."""
    rng = np.random.default_rng(seed)
    adj_tol = 1e-10 if tol is None else tol
    stokes_tol = 1e-12 if tol is None else tol
    degrees = []
    for k in range(g.n):
        dl0, J0, D0 = _D(g, k)
        entry = {"k": k}
        if k + 1 < g.n:
            dl1, J1, D1 = _D(g, k + 1)
            entry["dd_max_abs"] = _max_abs(D1 @ D0)
            entry["anticommutator_max_abs"] = _max_abs(dl1 @ J0 + J1 @ dl0)
            entry["jj_max_abs"] = _max_abs(J1 @ J0)
        else:
            entry["dd_max_abs"] = entry["anticommutator_max_abs"] = entry["jj_max_abs"] = 0
        b = mixed_derivative(g, k, weights, bc)
        worst = 0.0
        for _ in range(pairs):
            a = rng.standard_normal(b.D.shape[1])
            y = rng.standard_normal(b.D.shape[0])
            lhs = (b.Df @ a) @ b.M_k1.apply(y)
            rhs = a @ b.M_k.apply(b.codiff_apply(y))
            na = math.sqrt(a @ b.M_k.apply(a))
            ny = math.sqrt(y @ b.M_k1.apply(y))
            worst = max(worst, abs(lhs - rhs) / max(na * ny, 1e-300))
        entry["adjointness_max_rel"] = worst
        entry["pass"] = (
            entry["dd_max_abs"] == 0
            and entry["anticommutator_max_abs"] == 0
            and entry["jj_max_abs"] == 0
            and worst <= adj_tol
        )
        degrees.append(entry)
    stokes = 0.0
    closed_exact = True
    for _ in range(pairs):
        a = MixedForm(g.n - 1, rng.standard_normal(layout(g, g.n - 1).total))
        lhs, rhs = stokes_check(g, a)
        stokes = max(stokes, abs(lhs - rhs) / max(np.abs(a.coefficients).sum(), 1e-300))
    if g.is_closed():
        a = MixedForm(g.n - 1, rng.integers(-5, 6, layout(g, g.n - 1).total).astype(float))
        closed_exact = stokes_check(g, a) == (0.0, 0.0)
    return {
        "degrees": degrees,
        "stokes": {"max_rel": stokes, "closed": g.is_closed(), "closed_exact": closed_exact, "pass": stokes <= stokes_tol and closed_exact},
        "pass": all(d["pass"] for d in degrees) and stokes <= stokes_tol and closed_exact,
    }


def cmd_verify(args):
    g = _load(args)
    rep = validate_conforming(g)
    out = {"geometry_hash": g.hash, "conforming": rep.ok, "weights": args.weights, "bc": args.bc}
    if not rep.ok:
        out["violations"] = [v.to_dict() for v in rep.violations]
        return EXIT_FAIL, out
    out.update(structure_report(g, args.weights, args.bc, args.seed, tol=args.tol))
    return (EXIT_OK if out["pass"] else EXIT_FAIL), out


def cmd_betti(args):
    g = _load(args)
    betti = betti_numbers(g, args.bc)
    out = {"geometry_hash": g.hash, "bc": args.bc, "betti": betti}
    expected = g.meta.get("betti", {}).get(args.bc)
    if expected is not None:
        out["expected"] = expected
        out["matches_expected"] = list(expected) == betti
    return EXIT_OK, out


def cmd_decompose(args):
    g = _load(args)
    k = args.k if args.k is not None else min(1, g.n)
    _check_degree(g, k)
    rng = np.random.default_rng(args.seed)
    form = _read_optional_form(args.form, k, g)
    if form is None:
        form = _random_form(g, k, args.bc, rng)
    dec = hodge_decompose(g, form, args.bc, args.weights)
    betti = betti_numbers(g, args.bc)
    C = poincare_constant(g, k, args.bc, args.weights)
    tol = 1e-8 if args.tol is None else args.tol
    out = {
        "geometry_hash": g.hash,
        "k": k,
        "bc": args.bc,
        "betti": betti,
        "harmonic_dim": betti[k],
        "poincare_constant": C,
        "residuals": dec.residuals,
        "pass": max(dec.residuals.values()) <= tol,
    }
    if args.out:
        for name in ("a_d", "a_dstar", "a_0"):
            write_form(Path(args.out) / f"{name}.csv", getattr(dec, name), g.hash)
    return (EXIT_OK if out["pass"] else EXIT_FAIL), out


def cmd_solve(args):
    g = _load(args)
    k = args.k if args.k is not None else g.n
    _check_degree(g, k)
    rf = _coefficients(args, k)
    f = _read_optional_form(args.rhs, k, g)
    rep = solve_hodge_laplace(g, k, rf, f, args.weights, args.bc, tol=args.tol or 1e-10)
    coerc = coercivity_estimate(g, k, rf, args.weights, args.bc) if layout(g, k).total <= 4000 else None
    out = {
        "geometry_hash": g.hash,
        "k": k,
        "bc": args.bc,
        "energy": rep.energy,
        "residuals": rep.residuals,
        "iterations": rep.iterations,
        "coercivity": coerc,
        "solution_max_abs": float(np.abs(rep.a.coefficients).max()) if len(rep.a) else 0.0,
    }
    if args.out:
        write_form(Path(args.out) / "solution.csv", rep.a, g.hash)
        if rep.sigma is not None:
            write_form(Path(args.out) / "sigma.csv", rep.sigma, g.hash)
        if args.vtk:
            out["vtk"] = [p.name for p in write_vtk(g, rep.a, Path(args.out) / "solution")]
    return EXIT_OK, out


def cmd_poincare(args):
    g = _load(args)
    degrees = [args.k] if args.k is not None else list(range(g.n + 1))
    for k in degrees:
        _check_degree(g, k)
    consts = {str(k): poincare_constant(g, k, args.bc, args.weights) for k in degrees}
    out = {"geometry_hash": g.hash, "bc": args.bc, "betti": betti_numbers(g, args.bc), "poincare_constant": consts}
    if args.k is not None:
        out["coercivity_unit"] = coercivity_estimate(g, args.k, CoefficientField(args.k), args.weights, args.bc)
    return EXIT_OK, out


def _check_degree(g, k):
    if not 0 <= k <= g.n:
        raise InputError(f"degree {k} outside [0, {g.n}]")


HANDLERS = {
    "check": cmd_check,
    "verify": cmd_verify,
    "betti": cmd_betti,
    "decompose": cmd_decompose,
    "solve": cmd_solve,
    "poincare": cmd_poincare,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mdforms", description="Mixed-dimensional exterior calculus on forest geometries.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--geometry", required=True, help="geometry JSON file")
    p.add_argument("--k", type=int, default=None, help="form degree")
    p.add_argument("--weights", choices=("measure", "unit"), default="measure")
    p.add_argument("--bc", choices=("natural", "essential"), default=None)
    p.add_argument("--coeff", default=None, help="coefficient JSON (solve)")
    p.add_argument("--rhs", default=None, help="right-hand side CSV (solve)")
    p.add_argument("--form", default=None, help="input form CSV (decompose)")
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--vtk", action="store_true", help="also write VTK files (solve)")
    return p


def main(argv=None) -> int:
    threads = os.environ.get("MDFORMS_THREADS")
    if threads:
        _kernels.set_threads(int(threads))
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    if args.bc is None:
        args.bc = "essential" if args.command == "solve" else "natural"
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
    code, report = EXIT_OK, None
    try:
        code, report = HANDLERS[args.command](args)
    except (ParseError, InputError) as exc:
        code, report = EXIT_INPUT, {"error": str(exc), "kind": "input"}
    except SolverError as exc:
        code, report = EXIT_SOLVER, {"error": str(exc), "kind": "solver"}
    except (np.linalg.LinAlgError, ArithmeticError, RuntimeError) as exc:
        code, report = EXIT_SOLVER, {"error": f"{type(exc).__name__}: {exc}", "kind": "solver"}
    report = {"command": args.command, "seed": args.seed, "exit_code": code, **report}
    text = canonical_json(report)
    if args.out:
        (Path(args.out) / f"{args.command}.json").write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

"""Command-line front end.

    rdut solve    CONFIG [--grid N] [--out-dir DIR]
    rdut envelope CONFIG [--grid N] [--out-dir DIR]
    rdut eut      CONFIG [--grid N] [--out-dir DIR]
    rdut verify   CONFIG [--samples N] [--seed S] [--out-dir DIR]
    rdut oracle   CONFIG [--grid N] [--exhaustive] [--out-dir DIR]

Exit codes: 0 success, 1 configuration error, 2 infeasible budget,
3 ill-posed problem, 4 a verification or comparison band failed.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from rdut import oracle
from rdut.config import ConfigError, load_config
from rdut.envelope import build_phi, concave_envelope, write_envelope_csv
from rdut.errors import DomainError, IllPosed, Infeasible
from rdut.eut_link import (
    diagnose,
    solve_eut,
    transformed_kernel,
    write_atoms_csv,
    write_rho_tilde_csv,
)
from rdut.solver import solve
from rdut.verify import end_to_end

EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_ILLPOSED, EXIT_FAILED = 0, 1, 2, 3, 4


def _fmt(v: float) -> str:
    return f"{v:.17g}"


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_solve(args) -> int:
    p = load_config(args.config, grid_n=args.grid)
    s = solve(p)
    out = _out_dir(args)
    _write_json(out / "solution.json", s.to_dict())
    e = s.envelope
    cols = [e.nodes, e.phi.values, e.values, e.delta_prime(e.nodes), s.q_nodes, s.g_nodes]
    with open(out / "curves.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "phi", "delta", "delta_prime", "Q_star", "G_star"])
        for row in zip(*cols):
            w.writerow([_fmt(v) for v in row])
    print(f"lambda* = {s.lambda_star:.12g}  objective = {s.objective_value:.12g}  "
          f"budget residual = {s.budget_residual:.3g}  nodes = {s.grid_size}")
    return EXIT_OK


def cmd_envelope(args) -> int:
    p = load_config(args.config, grid_n=args.grid)
    e = concave_envelope(build_phi(p.kernel, p.weighting, p.n, p.refine_ends))
    out = _out_dir(args)
    write_envelope_csv(out / "envelope.csv", e)
    print(f"hull vertices = {e.hull_index.size}  affine pieces = {len(e.affine_pieces())}")
    return EXIT_OK


def cmd_eut(args) -> int:
    p = load_config(args.config, grid_n=args.grid)
    s = solve(p)
    t = transformed_kernel(s.envelope)
    e = solve_eut(p.utility, t, p.x0)
    diff = np.abs(s.q_cells - e.wealth_cells)
    dist = float(np.max(diff))
    rel = float(np.max(diff / s.q_cells))
    out = _out_dir(args)
    write_rho_tilde_csv(out / "rho_tilde.csv", t)
    write_atoms_csv(out / "rho_tilde_atoms.csv", t)
    report = {
        "sup_distance": dist,
        "relative_sup_distance": rel,
        "lambda_star": s.lambda_star,
        "eta": e.eta,
        "objective_rdut": s.objective_value,
        "objective_eut": e.objective_value,
        "mean_rho": p.kernel.mean(),
        "mean_rho_tilde": t.mean(),
        "atoms": [{"value": v, "mass": m} for v, m in t.atoms],
        "diagnostics": diagnose(p).to_dict(),
    }
    _write_json(out / "eut_report.json", report)
    print(f"sup |Q* - Q_eut| = {dist:.3g} (relative {rel:.3g})  atoms = {len(t.atoms)}  "
          f"E[rho] = {report['mean_rho']:.12g}  E[rho~] = {report['mean_rho_tilde']:.12g}")
    return EXIT_OK


def cmd_verify(args) -> int:
    p = load_config(args.config, grid_n=args.grid)
    r = end_to_end(p, args.samples, args.seed)
    _write_json(_out_dir(args) / "verify_report.json", r.to_dict())
    print(f"objective: analytic {r.objective_analytic:.10g}  empirical {r.objective_empirical:.10g}  "
          f"rel err {r.objective_rel_error:.3g}  [{'ok' if r.objective_ok else 'FAIL'}]")
    print(f"budget: {r.budget_empirical:.10g} +/- {r.budget_se:.3g}  z = {r.budget_z:.3g}  "
          f"[{'ok' if r.budget_ok else 'FAIL'}]")
    return EXIT_OK if r.passed else EXIT_FAILED


def cmd_oracle(args) -> int:
    p = load_config(args.config)
    out = _out_dir(args)
    if args.exhaustive:
        check = oracle.lattice_check(oracle.DiscreteProblem.from_problem(p, 5))
        _write_json(out / "oracle_report.json", check)
        print(f"PAVA {check['pava_objective']:.12g}  enumeration {check['enum_objective']:.12g}  "
              f"equal = {check['equal']}")
        return EXIT_OK if check["equal"] else EXIT_FAILED

    n = args.grid if args.grid is not None else 2000
    s = solve(p)
    d = oracle.discrete_solve(oracle.DiscreteProblem.from_problem(p, n))
    gap = abs(s.objective_value - d.objective) / abs(s.objective_value)
    x = (np.arange(n) + 0.5) / n
    l1 = float(np.mean(np.abs(d.g - s.g_star(x))))
    report = {
        "grid": n,
        "objective_solver": s.objective_value,
        "objective_oracle": d.objective,
        "relative_gap": gap,
        "l1_quantile_distance": l1,
        "lambda_solver": s.lambda_star,
        "lambda_oracle": d.lam,
    }
    _write_json(out / "oracle_report.json", report)
    print(f"solver {s.objective_value:.12g}  oracle {d.objective:.12g}  "
          f"relative gap {gap:.3g}  L1 distance {l1:.3g}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rdut", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("config", help="JSON problem configuration")
        sp.add_argument("--grid", type=int, default=None, help="grid size override")
        sp.add_argument("--out-dir", default=".", help="directory for output files")
        sp.set_defaults(func=func)
        return sp

    add("solve", cmd_solve, "solve and write solution.json + curves.csv")
    add("envelope", cmd_envelope, "write phi and its concave envelope to envelope.csv")
    add("eut", cmd_eut, "solve via the transformed kernel and compare")
    sp = add("verify", cmd_verify, "Monte-Carlo check of the optimal wealth")
    sp.add_argument("--samples", type=int, default=1_000_000)
    sp.add_argument("--seed", type=int, default=12345)
    sp = add("oracle", cmd_oracle, "compare with the discrete brute-force solver")
    sp.add_argument("--exhaustive", action="store_true",
                    help="5-cell lattice enumeration instead of the grid comparison")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Infeasible as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except IllPosed as exc:
        print(f"ill-posed: {exc}", file=sys.stderr)
        return EXIT_ILLPOSED
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

"""Command line: ``gridshell solve | sweep | validate``.

Exit codes: 0 optimal and reconstructable, 1 bad input, 2 infeasible,
3 counterweight present (no pure grid-shell), 4 numerical failure.
The solver backend follows ``GRIDSHELL_SOLVER_BACKEND`` unless ``--backend``
is given.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import io
from .assembly import LUMPED, SolveResult, assemble, equilibrium_maps, solve_problem
from .geometry import (GeometryError, GroundStructure, ProblemSpec, generate_ground_structure,
                       restrict_topology)
from .memberadd import MemberAddingError, optimize_adaptive
from .reconstruct import (ReconstructionError, build_shell, elevations,
                          verify_compatibility, walk_elevations)
from .socp import (DUAL_INFEASIBLE, PRIMAL_INFEASIBLE, BackendUnavailable, ConicSolution,
                   NumericalError)
from .sweep import parse_rho_list, run_sweep

EXIT_OK, EXIT_INPUT, EXIT_INFEASIBLE, EXIT_CRITERIA, EXIT_NUMERICAL = 0, 1, 2, 3, 4

log = logging.getLogger("gridshell")


@dataclass
class SolveOptions:
    topology: str = "full"
    keep: list | None = None
    member_adding: bool = False
    formulation: str = "auto"
    samples: int = 17
    backend: str | None = None
    out: Path | None = None


def ground_structure(spec: ProblemSpec, topology="full", keep=None):
    connectivity = "explicit" if spec.elements is not None else "full"
    gs = generate_ground_structure(spec, connectivity)
    if topology != "full":
        gs = restrict_topology(gs, topology, keep)
    return gs


def run_solve(spec: ProblemSpec, options: SolveOptions):
    """Solve, reconstruct and write artifacts; returns ``(exit_code, summary)``."""
    gs = ground_structure(spec, options.topology, options.keep)
    summary = {"problem": spec.name, "rho_g": spec.rho_g, "sigma": spec.sigma,
               "topology": options.topology, "elements": gs.m}
    try:
        if options.member_adding:
            ad = optimize_adaptive(spec, gs, options.formulation, backend=options.backend)
            res = ad.result
            summary["member_adding"] = {"history": ad.state.history, **ad.certificate}
        else:
            res = solve_problem(spec, gs, options.formulation, options.backend)
    except (NumericalError, MemberAddingError) as exc:
        summary["status"] = "numerical_error"
        summary["message"] = str(exc)
        return EXIT_NUMERICAL, summary
    summary.update(status=res.status, volume=res.volume, iterations=res.solution.iterations)
    if options.out is not None:
        io.write_solution(res, options.out)
    if res.status in (PRIMAL_INFEASIBLE, DUAL_INFEASIBLE):
        ray = res.solution.ray or {}
        summary["certificate_residual"] = ray.get("residual")
        return EXIT_INFEASIBLE, summary
    if not res.optimal:
        return EXIT_NUMERICAL, summary
    if res.kind == LUMPED:
        # no consistent shell exists; report how far the elevations disagree
        summary["cycle_residual"] = walk_elevations(res).max_residual
        return EXIT_CRITERIA, summary
    try:
        shell = build_shell(res, samples_per_element=options.samples)
    except ReconstructionError as exc:
        summary["message"] = str(exc)
        return EXIT_NUMERICAL, summary
    crit = shell.criteria
    summary.update(max_z=float(np.max(shell.z, initial=0.0)), margin=crit.margin,
                   counterweight_nodes=int(crit.counterweight.size),
                   compatibility=crit.compatibility.as_dict())
    if options.out is not None:
        io.export_shell(shell, options.out)
        (Path(options.out) / "criteria.json").write_text(json.dumps(summary, indent=1) + "\n")
    if crit.counterweight.size:
        return EXIT_CRITERIA, summary
    return EXIT_OK, summary


def validate_solution(spec: ProblemSpec, solution_dir, tol=1e-6):
    """Re-check a stored solution against the problem; returns ``(ok, report)``."""
    doc = io.read_solution(solution_dir)
    # the stored unit weight wins over the file's (solve --rho-g overrides it)
    spec = spec.with_rho_g(doc.get("rho_g", spec.rho_g))
    report = {"status": doc["status"]}
    if doc["status"] != "optimal":
        report["message"] = "stored solution is not optimal"
        return False, report
    gs = GroundStructure(spec.nodes, doc["pairs"], spec.rho_g / spec.sigma)
    asm = assemble(spec, gs, doc["kind"])
    stub = ConicSolution(doc["status"], np.zeros(0), np.zeros(0), np.zeros(0),
                         doc["volume"], doc["volume"], doc["residuals"], doc["iterations"])
    res = SolveResult(asm, stub, doc["primal"], doc["dual"], doc["volume"])
    p = doc["primal"]
    maps = equilibrium_maps(spec, gs)
    qa = p["qA"] if "qA" in p else p["q"]
    qb = p["qB"] if "qB" in p else -p["q"]
    scale = max(1.0, float(np.abs(spec.loads).max()))
    report["equilibrium"] = float(max(np.abs(maps.B @ p["s"] - maps.f_xy).max(initial=0.0),
                                      np.abs(maps.DA @ qa + maps.DB @ qb - maps.f_z).max(initial=0.0))
                                  / scale)
    z = elevations(doc["dual"]["w"], spec.rho_g, spec.sigma)
    csv_path = Path(solution_dir) / "shell.csv"
    if csv_path.exists():
        table = io.read_nodes_csv(csv_path)
        mask = np.array([lab == "gridshell" for lab in table["label"]])
        report["elevation_mismatch"] = float(np.abs(table["z"][mask] - z[mask]).max(initial=0.0))
        z = np.where(mask, table["z"], 0.0)
    report["compatibility"] = verify_compatibility(res, z).as_dict() if doc["kind"] != "lumped" else {}
    worst = max([report["equilibrium"], report.get("elevation_mismatch", 0.0),
                 *report["compatibility"].values()])
    report["worst"] = worst
    return worst <= tol, report


# --------------------------------------------------------------------------- argparse

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _topology(text):
    if text in ("full", "archgrid", "diagonals"):
        return text, None
    if text.startswith("list:"):
        path = Path(text[5:])
        try:
            pairs = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise argparse.ArgumentTypeError(f"cannot read element list {path}: {exc}")
        return "list", pairs
    raise argparse.ArgumentTypeError("expected full, archgrid, diagonals or list:<path>")


def build_parser():
    parser = _Parser(prog="gridshell", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    parser.add_argument("--backend", help="embedded or external:clarabel")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("solve", help="optimize one problem and export the shell")
    p.add_argument("problem", type=Path)
    p.add_argument("--topology", type=_topology, default=("full", None))
    p.add_argument("--member-adding", choices=("on", "off"), default="off")
    p.add_argument("--rho-g", type=float)
    p.add_argument("--formulation", choices=("auto", "selfweight", "weightless", "lumped"),
                   default="auto")
    p.add_argument("--samples", type=int, default=17)
    p.add_argument("--out", type=Path)

    p = sub.add_parser("sweep", help="volume over a range of unit weights")
    p.add_argument("problem", type=Path)
    p.add_argument("--rho-g", required=True, help="start:stop:step or a comma list")
    p.add_argument("--topology", type=_topology, default=("full", None))
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", type=Path, help="CSV path (default: stdout)")

    p = sub.add_parser("validate", help="re-check a stored solution")
    p.add_argument("problem", type=Path)
    p.add_argument("solution_dir", type=Path)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(name)s: %(message)s")
    try:
        spec = io.parse_problem(args.problem)
        if getattr(args, "rho_g", None) is not None and args.command == "solve":
            spec = spec.with_rho_g(args.rho_g)
        if args.command == "solve":
            topo, keep = args.topology
            opts = SolveOptions(topo, keep, args.member_adding == "on", args.formulation,
                                args.samples, args.backend, args.out)
            code, summary = run_solve(spec, opts)
            print(json.dumps(summary, indent=1, default=float))
            return code
        if args.command == "sweep":
            topo, keep = args.topology
            result = run_sweep(spec, parse_rho_list(args.rho_g), topo, keep, args.backend,
                               args.workers)
            if args.out:
                with open(args.out, "w", newline="") as fh:
                    result.write_csv(fh)
            else:
                result.write_csv(sys.stdout)
            return EXIT_OK
        ok, report = validate_solution(spec, args.solution_dir)
        print(json.dumps(report, indent=1, default=float))
        return EXIT_OK if ok else EXIT_CRITERIA
    except (io.ProblemFileError, GeometryError, ValueError, BackendUnavailable) as exc:
        print(f"gridshell: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"gridshell: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

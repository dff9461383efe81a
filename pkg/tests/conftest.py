import functools
from pathlib import Path

import pytest

from gridshell import problems
from gridshell.assembly import solve_problem
from gridshell.geometry import generate_ground_structure, restrict_topology

ROOT = Path(__file__).resolve().parents[1]
PROBLEMS = ROOT / "problems"

# PASS/FAIL lines written by the acceptance tests
ACCEPTANCE = []


@functools.lru_cache(maxsize=None)
def solved(name, rho_g, formulation="auto", topology="full", **kw):
    """Cached (spec, gs, result) for a standard problem."""
    spec = problems.BUILDERS[name](rho_g=rho_g, **kw)
    connectivity = "explicit" if spec.elements is not None else "full"
    gs = generate_ground_structure(spec, connectivity)
    if topology != "full":
        gs = restrict_topology(gs, topology)
    return spec, gs, solve_problem(spec, gs, formulation)


@pytest.fixture
def problem_dir():
    return PROBLEMS


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE):
            terminalreporter.write_line(line)

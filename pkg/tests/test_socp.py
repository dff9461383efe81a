import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from gridshell.socp import (DUAL_INFEASIBLE, OPTIMAL, PRIMAL_INFEASIBLE, BackendUnavailable,
                            ConicError, ConicProgram, adapter_solve, dump_program, load_program,
                            resolve_backend, solve, solve_with)
from gridshell.socp.certify import certify_infeasible, project

clarabel = pytest.importorskip("clarabel")


def random_program(seed, n_orth=4, n_cones=3, n_free=2, m=5):
    """Feasible, bounded program: b from an interior point, c from an interior dual point."""
    rng = np.random.default_rng(seed)
    n = n_orth + 3 * n_cones + n_free
    orth = np.arange(n_orth)
    rot = (n_orth + np.arange(3 * n_cones)).reshape(-1, 3)
    A = sp.random(m, n, density=0.6, random_state=rng, format="csc")
    A = A + sp.csc_matrix((np.ones(m), (np.arange(m), rng.integers(0, n, m))), shape=(m, n))
    # free variables must be pinned by A for boundedness; give them their own rows
    A = sp.vstack([A, sp.csc_matrix((np.ones(n_free), (np.arange(n_free), n - n_free + np.arange(n_free))),
                                    shape=(n_free, n))], format="csc")

    def interior(size):
        v = np.zeros(n)
        v[orth] = rng.uniform(0.5, 2.0, n_orth)
        for i, j, l in rot:
            v[l] = rng.normal()
            v[i] = rng.uniform(0.5, 2.0)
            v[j] = (v[l] ** 2 + rng.uniform(0.1, 1.0)) / (2 * v[i])
        return v
    x0 = interior(n)
    x0[n - n_free:] = rng.normal(size=n_free)
    z0 = interior(n)
    z0[n - n_free:] = 0.0
    y0 = rng.normal(size=A.shape[0])
    return ConicProgram(A.T @ y0 + z0, A, A @ x0, orth, rot)


def lp(c, A, b):
    return ConicProgram(np.asarray(c, float), sp.csc_matrix(np.asarray(A, float)),
                        np.asarray(b, float), np.arange(len(c)))


# --------------------------------------------------------------------------- fixed programs

def test_small_lp():
    # min x0 + 2 x1  s.t.  x0 + x1 = 1
    sol = solve(lp([1, 2], [[1, 1]], [1]))
    assert sol.status == OPTIMAL
    assert sol.x == pytest.approx([1.0, 0.0], abs=1e-7)
    assert sol.primal_objective == pytest.approx(1.0, abs=1e-8)
    assert sol.y == pytest.approx([1.0], abs=1e-7)


def test_rotated_cone_minimum():
    # min x_i + x_j  s.t. x_l = 2, 2 x_i x_j >= x_l^2  ->  x_i = x_j = sqrt(2)
    prog = ConicProgram([1.0, 1.0, 0.0], sp.csc_matrix([[0.0, 0.0, 1.0]]), [2.0],
                        rotated=[[0, 1, 2]])
    sol = solve(prog)
    assert sol.status == OPTIMAL
    assert sol.primal_objective == pytest.approx(2 * np.sqrt(2.0), rel=1e-8)
    assert sol.x[:2] == pytest.approx([np.sqrt(2.0)] * 2, rel=1e-6)
    assert prog.cone_violation(sol.x) < 1e-8


def test_free_variables_and_offset():
    prog = ConicProgram([1.0, 0.0], sp.csc_matrix([[1.0, -1.0]]), [3.0], orthant=[0], offset=5.0)
    sol = solve(prog)
    assert sol.status == OPTIMAL
    assert sol.primal_objective == pytest.approx(5.0, abs=1e-7)
    assert sol.x[1] == pytest.approx(-3.0, abs=1e-6)


def test_primal_infeasible_certificate():
    # x >= 0, x0 + x1 = -1
    prog = lp([1, 1], [[1, 1]], [-1])
    sol = solve(prog)
    assert sol.status == PRIMAL_INFEASIBLE
    y, z = sol.ray["y"], sol.ray["z"]
    assert prog.b @ y == pytest.approx(1.0)
    assert np.linalg.norm(prog.A.T @ y + z) < 1e-7
    assert np.all(z >= -1e-9)


def test_dual_infeasible_certificate():
    # min -x0  s.t. x0 - x1 = 0, x >= 0: unbounded
    prog = lp([-1, 0], [[1, -1]], [0])
    sol = solve(prog)
    assert sol.status == DUAL_INFEASIBLE
    x = sol.ray["x"]
    assert prog.c @ x == pytest.approx(-1.0)
    assert np.linalg.norm(prog.A @ x) < 1e-7
    assert np.all(x >= -1e-9)


@pytest.mark.parametrize("prog", [lp([1, 1], [[1, 1]], [-1]), lp([-1, 0], [[1, -1]], [0])],
                         ids=["infeasible", "unbounded"])
def test_status_parity_with_external(prog):
    assert solve(prog).status == adapter_solve(prog).status


def test_malformed_programs():
    with pytest.raises(ConicError):
        ConicProgram([1.0, 1.0], sp.csc_matrix([[1.0]]), [1.0])
    with pytest.raises(ConicError):
        ConicProgram([1.0], sp.csc_matrix([[1.0]]), [1.0], orthant=[3])
    with pytest.raises(ConicError):
        ConicProgram([1.0, 0, 0], sp.csc_matrix([[1.0, 0, 0]]), [1.0], orthant=[0],
                     rotated=[[0, 1, 2]])
    with pytest.raises(ConicError):
        ConicProgram([np.nan], sp.csc_matrix([[1.0]]), [1.0])


def test_backend_resolution(monkeypatch):
    monkeypatch.delenv("GRIDSHELL_SOLVER_BACKEND", raising=False)
    assert resolve_backend() == "embedded"
    monkeypatch.setenv("GRIDSHELL_SOLVER_BACKEND", "external:clarabel")
    assert resolve_backend() == "external:clarabel"
    assert resolve_backend("embedded") == "embedded"
    with pytest.raises(BackendUnavailable):
        resolve_backend("external:nope")
    assert solve_with(lp([1, 2], [[1, 1]], [1])).backend == "external:clarabel"


def test_dump_load_round_trip(tmp_path):
    prog = random_program(7)
    prog.offset = 1.25
    path = tmp_path / "p.txt"
    dump_program(prog, path)
    back = load_program(path)
    assert np.array_equal(back.c, prog.c) and np.array_equal(back.b, prog.b)
    assert (back.A != prog.A).nnz == 0
    assert np.array_equal(back.orthant, prog.orthant)
    assert np.array_equal(back.rotated, prog.rotated)
    assert back.offset == prog.offset


def test_load_rejects_other_files(tmp_path):
    p = tmp_path / "x.txt"
    p.write_text("hello\n")
    with pytest.raises(ConicError):
        load_program(p)


# --------------------------------------------------------------------------- random programs

@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_cross_solver_agreement(seed):
    prog = random_program(seed)
    ours, ref = solve(prog), adapter_solve(prog)
    assert ours.status == OPTIMAL and ref.status == OPTIMAL
    scale = max(1.0, abs(ref.primal_objective))
    assert abs(ours.primal_objective - ref.primal_objective) <= 1e-6 * scale


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_certificates_of_optimality(seed):
    prog = random_program(seed, n_orth=3, n_cones=5, n_free=1, m=6)
    sol = solve(prog)
    assert sol.status == OPTIMAL
    x, y, z = sol.x, sol.y, sol.z
    scale = 1.0 + np.abs(prog.b).max()
    assert np.abs(prog.A @ x - prog.b).max() <= 1e-7 * scale
    assert np.abs(prog.c - prog.A.T @ y - z).max() <= 1e-7 * (1.0 + np.abs(prog.c).max())
    assert prog.cone_violation(x) <= 1e-8 * scale
    assert prog.cone_violation(z) <= 1e-8 * (1.0 + np.abs(prog.c).max())
    assert abs(sol.primal_objective - sol.dual_objective) <= 1e-6 * max(1.0, abs(sol.primal_objective))


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000), st.floats(1e-3, 1e3))
def test_objective_scaling(seed, factor):
    prog = random_program(seed)
    base = solve(prog).primal_objective
    assert solve(prog.scaled(factor)).primal_objective == pytest.approx(factor * base, rel=1e-6, abs=1e-8)


# --------------------------------------------------------------------------- certificates

def _cone_program(n_orth, n_cones, n_free=1):
    n = n_orth + 3 * n_cones + n_free
    rot = (n_orth + np.arange(3 * n_cones)).reshape(-1, 3)
    return ConicProgram(np.zeros(n), sp.csc_matrix((0, n)), np.zeros(0),
                        orthant=np.arange(n_orth), rotated=rot)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_projection_moreau_decomposition(seed):
    prog = _cone_program(3, 4)
    v = np.random.default_rng(seed).normal(0.0, 2.0, prog.n)
    p, q = project(prog, v), project(prog, -v)
    free = np.ones(prog.n, dtype=bool)
    free[prog.orthant] = free[prog.rotated.ravel()] = False
    # self-dual cone: v = P(v) - P(-v) with the two parts orthogonal
    assert np.allclose((p - q)[~free], v[~free], atol=1e-12)
    assert abs(p @ q) <= 1e-10 * (1 + v @ v)
    assert prog.cone_violation(p) <= 1e-12
    assert project(prog, p) == pytest.approx(p, abs=1e-12)


def test_certificate_for_infeasible_cone_program():
    # 2 x0 x1 >= x2^2 with x0 = -1 cannot hold
    A = sp.csc_matrix([[1.0, 0.0, 0.0]])
    prog = ConicProgram([0.0, 0.0, 1.0], A, [-1.0], rotated=[[0, 1, 2]])
    ray = certify_infeasible(prog, solve)
    assert ray is not None
    assert prog.b @ ray["y"] == pytest.approx(1.0)
    assert prog.cone_violation(ray["z"]) <= 1e-12
    assert np.linalg.norm(prog.A.T @ ray["y"] + ray["z"]) <= 1e-8


@pytest.mark.parametrize("seed", range(5))
def test_no_certificate_for_feasible_program(seed):
    prog = random_program(seed)
    assert certify_infeasible(prog, solve) is None

from collections import deque

import numpy as np
import pytest

from metaset.metrics import UnitCell2D
from metaset.mech import fem
from metaset.mech.connectivity import (InterfaceTables, interface_ratio, interface_touches,
                                       n_disconnected, r_disconnected)
from metaset.mech.dataset import DatasetError, family_weights, gen2d_dataset
from metaset.mech.elements import element_stiffness, plane_stress
from metaset.mech.experiment import experiment_mbb, summarize, write_report
from metaset.mech.ga import GAConfig, exhaustive_design, ga_design
from metaset.mech.homogenize import homogenize2d, laminate_tensor


@pytest.fixture(scope="module")
def small_dataset():
    return gen2d_dataset(count=4, seed=1)


# --- elements and homogenization ------------------------------------------------

def test_element_stiffness_rigid_modes():
    ke = element_stiffness(plane_stress())
    assert np.allclose(ke, ke.T)
    vals = np.linalg.eigvalsh(ke)
    assert np.sum(np.abs(vals) < 1e-12) == 3 and vals.min() > -1e-12


def test_full_solid_tensor():
    C = homogenize2d(np.ones((10, 10), bool)).C
    assert np.allclose(C, plane_stress(), rtol=1e-6, atol=1e-12)


def test_laminate_alternating_rows():
    solid = np.zeros((10, 10), bool)
    solid[::2] = True
    C = homogenize2d(solid).C
    lam = laminate_tensor([0.5, 0.5], [plane_stress(), 1e-9 * plane_stress()])
    assert C[0, 0] == pytest.approx(lam[0, 0], rel=1e-6)
    assert C[1, 1] < 1e-6


def test_tensor_symmetric_and_rotation():
    rng = np.random.default_rng(0)
    solid = rng.random((12, 12)) < 0.7
    a = homogenize2d(solid).C
    b = homogenize2d(solid.T).C  # swaps the x and y axes
    assert np.allclose(a, a.T)
    assert b[0, 0] == pytest.approx(a[1, 1], rel=1e-8)
    assert b[2, 2] == pytest.approx(a[2, 2], rel=1e-8)


def test_translation_invariant():
    rng = np.random.default_rng(1)
    solid = rng.random((12, 12)) < 0.7
    assert np.allclose(homogenize2d(solid).C, homogenize2d(np.roll(solid, (3, 5), (0, 1))).C,
                       rtol=1e-7, atol=1e-12)


def test_homogenize_rejects_bad_shape():
    with pytest.raises(ValueError):
        homogenize2d(np.ones(5, bool))


# --- connectivity ---------------------------------------------------------------

def _bfs_n_dc(grid):
    """Flood fill over cells using direct pixel comparisons."""
    rows, cols = len(grid), len(grid[0])
    nbrs = {(r, c): [] for r in range(rows) for c in range(cols)}
    for r in range(rows):
        for c in range(cols):
            if c + 1 < cols and any(grid[r][c][y, -1] and grid[r][c + 1][y, 0] for y in range(grid[r][c].shape[0])):
                nbrs[r, c].append((r, c + 1))
                nbrs[r, c + 1].append((r, c))
            if r + 1 < rows and any(grid[r][c][-1, x] and grid[r + 1][c][0, x] for x in range(grid[r][c].shape[1])):
                nbrs[r, c].append((r + 1, c))
                nbrs[r + 1, c].append((r, c))
    seen, best = set(), 0
    for start in nbrs:
        if start in seen:
            continue
        size, q = 0, deque([start])
        seen.add(start)
        while q:
            cur = q.popleft()
            size += 1
            for nb in nbrs[cur]:
                if nb not in seen:
                    seen.add(nb)
                    q.append(nb)
        best = max(best, size)
    return rows * cols - best


def test_n_dc_against_flood_fill():
    rng = np.random.default_rng(2)
    for _ in range(20):
        rows, cols = rng.integers(1, 5, size=2)
        grid = [[rng.random((6, 6)) < 0.15 for _ in range(cols)] for _ in range(rows)]
        assert n_disconnected(grid) == _bfs_n_dc(grid)


def test_interface_examples():
    a = np.zeros((4, 4), bool)
    b = np.zeros((4, 4), bool)
    a[:, -1] = [1, 1, 0, 0]
    b[:, 0] = [0, 1, 1, 0]
    assert interface_touches(a, b, 1)
    # solid on either side at rows 0, 1, 2; mismatched at rows 0 and 2
    assert interface_ratio(a, b, 1) == pytest.approx(2 / 3)
    assert interface_ratio(np.zeros((4, 4), bool), np.zeros((4, 4), bool), 0) == 0.0
    full = np.ones((4, 4), bool)
    assert r_disconnected([[full, full], [full, full]]) == 0.0
    assert n_disconnected([[full, np.zeros((4, 4), bool)]]) == 1


def test_tables_match_direct():
    rng = np.random.default_rng(3)
    cells = [rng.random((5, 5)) < 0.5 for _ in range(6)]
    tables = InterfaceTables(cells)
    for _ in range(30):
        genes = rng.integers(0, 6, size=6)
        grid = [[cells[genes[r * 3 + c]] for c in range(3)] for r in range(2)]
        assert tables.n_dc(genes, 2, 3) == n_disconnected(grid)
        assert tables.r_dc(genes, 2, 3) == pytest.approx(r_disconnected(grid), abs=1e-12)


# --- macro FE -------------------------------------------------------------------

def _uniform(problem, C):
    return np.tile(fem.tensor_components([C]), (problem.n_cells, 1))


def test_zero_load_zero_displacement():
    p = fem.cantilever_problem(load=0.0)
    assert np.all(fem.MacroSolver(p).solve(_uniform(p, plane_stress())) == 0)


def test_linear_in_stiffness():
    p = fem.mbb_problem(rows=2, cols=3)
    s = fem.MacroSolver(p)
    u1 = s.solve(_uniform(p, plane_stress()))
    u2 = s.solve(_uniform(p, 2 * plane_stress()))
    assert np.allclose(u1, 2 * u2, rtol=1e-10)


def test_cantilever_against_beam_theory():
    # Timoshenko beam: P L^3 / (3 E I) + P L / (kappa G A), unit thickness
    E, nu, L, h = 1.0, 0.3, 8.0, 2.0
    G = E / (2 * (1 + nu))
    beam = L ** 3 / (3 * E * h ** 3 / 12) + L / (5 / 6 * G * h)
    p = fem.cantilever_problem(m=16)
    tip = fem.MacroSolver(p).solve(_uniform(p, plane_stress()))[-1]
    assert abs(tip) == pytest.approx(beam, rel=0.02)


def test_mesh_refinement_converges():
    tips = []
    for m in (4, 16):
        p = fem.cantilever_problem(m=m)
        tips.append(fem.MacroSolver(p).solve(_uniform(p, plane_stress()))[-1])
    assert abs(tips[0] - tips[1]) / abs(tips[1]) < 0.05


def test_unsupported_problem_is_singular():
    p = fem.AssemblyProblem(1, 2, 2, supports=[{"node": [0, 0], "dofs": "xy"}],
                            loads=[{"node": [4, 0], "fy": -1.0}])
    with pytest.raises(fem.SingularSystemError):
        fem.MacroSolver(p).solve(_uniform(p, plane_stress()))


def test_problem_validation_and_round_trip(tmp_path):
    p = fem.mbb_problem(rows=2, cols=2)
    fem.save_problem(tmp_path / "p.json", p)
    q = fem.load_problem(tmp_path / "p.json")
    assert np.array_equal(q.target, p.target) and q.symmetry
    with pytest.raises(ValueError):
        fem.AssemblyProblem(2, 2, 4, supports=[{"node": [99, 0], "dofs": "xy"}]).validate()
    bad = p.to_dict()
    bad["target_profile"] = [0.0]
    with pytest.raises(ValueError):
        fem.AssemblyProblem.from_dict(bad).validate()


def test_shipped_problem_loads():
    p = fem.load_problem(fem.shipped_problem_path())
    assert (p.rows, p.cols) == (4, 4) and len(p.target) == p.n_centerline


def test_assemble_and_solve_checks_genes(small_dataset):
    p = fem.mbb_problem(rows=2, cols=2)
    tensors = [c.properties for c in small_dataset]
    assert fem.assemble_and_solve(p, [0, 1, 2, 3], tensors).shape == (p.n_centerline,)
    with pytest.raises(ValueError):
        fem.assemble_and_solve(p, [0, 1, 2, 9], tensors)


# --- dataset ------------------------------------------------------------------------

def test_dataset_contract(small_dataset):
    for cell in small_dataset:
        assert 0.70 <= cell.volume_fraction <= 0.95
        assert cell.solid.shape == (50, 50)
        assert np.allclose(cell.properties, cell.properties.T)
    assert np.allclose(family_weights(3).sum(), 1.0)
    again = gen2d_dataset(count=4, seed=1)
    assert [c.cell_id for c in again] == [c.cell_id for c in small_dataset]
    with pytest.raises(DatasetError):
        gen2d_dataset(catalog_2d=[], count=2)


# --- GA --------------------------------------------------------------------------

@pytest.fixture(scope="module")
def tiny(small_dataset):
    return fem.mbb_problem(rows=2, cols=2, m=2), small_dataset[:2]


def test_ga_matches_exhaustive(tiny):
    problem, cells = tiny
    best, _ = exhaustive_design(problem, cells)
    for seed in range(3):
        res = ga_design(problem, cells, GAConfig(population=10, generations=10, seed=seed))
        assert res.best.fitness == best.fitness


def test_ga_deterministic_and_elitist(small_dataset):
    problem = fem.mbb_problem(rows=2, cols=2, m=2)
    cfg = GAConfig(population=12, generations=8, seed=5)
    a, b = ga_design(problem, small_dataset, cfg), ga_design(problem, small_dataset, cfg)
    assert np.array_equal(a.best.genes, b.best.genes) and a.history == b.history
    assert all(x >= y for x, y in zip(a.history, a.history[1:]))


def test_ga_seeded_with_exact_assembly(small_dataset):
    problem = fem.mbb_problem(rows=2, cols=2, m=2)
    genes = np.array([0, 1, 2, 3])
    problem.target = fem.assemble_and_solve(problem, genes, [c.properties for c in small_dataset])
    cells = [UnitCell2D(np.ones((50, 50), bool), c.properties) for c in small_dataset]
    res = ga_design(problem, cells, GAConfig(population=8, generations=2, initial=[genes]))
    assert res.mse == 0.0 and res.feasible


def test_single_cell_dataset(small_dataset):
    problem = fem.mbb_problem(rows=2, cols=2, m=2)
    res = ga_design(problem, small_dataset[:1])
    assert res.generations == 0 and np.all(res.best.genes == 0)


def test_bad_initial_rejected(tiny):
    problem, cells = tiny
    with pytest.raises(ValueError):
        ga_design(problem, cells, GAConfig(population=4, generations=1, initial=[[0, 5, 0, 0]]))


def test_experiment_rows(tmp_path, small_dataset):
    problem = fem.mbb_problem(rows=2, cols=2, m=2)
    rows = experiment_mbb(problem, small_dataset, {"a": [0, 1], "b": lambda s: [2, 3]}, runs=2,
                          config=GAConfig(population=6, generations=2))
    assert [r["subset"] for r in rows] == ["a", "b", "a", "b"]
    assert set(rows[1]["genes"]) <= {2, 3}
    assert summarize(rows)["a"]["runs"] == 2
    write_report(tmp_path / "r.csv", rows)
    assert (tmp_path / "r.csv").read_text().startswith("subset,seed,mse,r_dc")

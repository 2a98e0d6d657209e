"""Macro-scale plane-stress FE for assemblies of homogenized cells.

Every macro cell is meshed with ``m x m`` square Q4 elements carrying the
cell's homogenized tensor.  Nodes are addressed ``(i, j)`` with ``i`` the
column (left to right) and ``j`` the row counted from the top; ``y`` points
up, so a downward load has negative ``fy``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.linalg import LinAlgError, solveh_banded
from scipy.sparse import coo_matrix

from .elements import plane_stress, stiffness_basis


class SingularSystemError(RuntimeError):
    """Global stiffness is singular, typically from missing supports."""


class SolverError(RuntimeError):
    """The linear solve failed or produced non-finite values."""


_EDGES = ("left", "right", "top", "bottom")


@dataclass
class AssemblyProblem:
    rows: int
    cols: int
    m: int = 4
    supports: list = field(default_factory=list)
    loads: list = field(default_factory=list)
    target: np.ndarray | None = None
    symmetry: bool = False
    meta: dict = field(default_factory=dict)

    @property
    def n_cells(self):
        return self.rows * self.cols

    @property
    def nx(self):
        return self.cols * self.m

    @property
    def ny(self):
        return self.rows * self.m

    @property
    def n_centerline(self):
        return self.nx + 1

    @property
    def centerline_row(self):
        return self.ny // 2

    def validate(self):
        if self.rows < 1 or self.cols < 1 or self.m < 1:
            raise ValueError("grid and element_subdiv must be positive")
        if self.ny % 2:
            raise ValueError("rows * m must be even to have a centerline node row")
        for s in self.supports:
            if "edge" in s:
                if s["edge"] not in _EDGES:
                    raise ValueError(f"unknown support edge {s['edge']!r}")
            else:
                self._check_node(s["node"])
            if not set(s.get("dofs", "xy")) <= {"x", "y"}:
                raise ValueError(f"support dofs must be drawn from 'xy': {s}")
        for ld in self.loads:
            if "edge" in ld:
                if ld["edge"] not in _EDGES:
                    raise ValueError(f"unknown load edge {ld['edge']!r}")
            else:
                self._check_node(ld["node"])
        if self.target is not None and len(self.target) != self.n_centerline:
            raise ValueError(f"target has {len(self.target)} values, expected {self.n_centerline}")
        return self

    def _check_node(self, node):
        i, j = node
        if not (0 <= i <= self.nx and 0 <= j <= self.ny):
            raise ValueError(f"node {node} lies outside the {self.nx}x{self.ny} element mesh")

    def to_dict(self):
        out = {
            "grid": [self.rows, self.cols],
            "element_subdiv": self.m,
            "supports": self.supports,
            "loads": self.loads,
            "target_profile": None if self.target is None else [float(v) for v in self.target],
            "symmetry": self.symmetry,
        }
        out.update(self.meta)
        return out

    @classmethod
    def from_dict(cls, d):
        rows, cols = d["grid"]
        target = d.get("target_profile")
        known = {"grid", "element_subdiv", "supports", "loads", "target_profile", "symmetry"}
        return cls(int(rows), int(cols), int(d.get("element_subdiv", 4)),
                   list(d.get("supports", [])), list(d.get("loads", [])),
                   None if target is None else np.asarray(target, dtype=float),
                   bool(d.get("symmetry", False)),
                   {k: v for k, v in d.items() if k not in known}).validate()


def load_problem(path):
    return AssemblyProblem.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def save_problem(path, problem):
    Path(path).write_text(json.dumps(problem.to_dict(), indent=2) + "\n", encoding="utf-8")


def _component_basis():
    """Element matrices multiplying ``C11, C12, C22, C33`` respectively."""
    K = stiffness_basis()
    return np.array([K[0, 0], K[0, 1] + K[1, 0], K[1, 1], K[2, 2]])


def tensor_components(tensors):
    """``(n, 4)`` array of ``C11, C12, C22, C33`` from tensors or 3x3 matrices."""
    out = []
    for t in tensors:
        if hasattr(t, "vector"):
            out.append(t.vector())
        else:
            a = np.asarray(t, dtype=float)
            out.append(a if a.shape == (4,) else np.array([a[0, 0], a[0, 1], a[1, 1], a[2, 2]]))
    return np.array(out, dtype=float)


class MacroSolver:
    """Reusable solver for one problem; stiffness is linear in the cell tensors."""

    def __init__(self, problem):
        self.problem = problem.validate()
        p = problem
        nnx, nny = p.nx + 1, p.ny + 1
        self.n_nodes = nnx * nny
        ndof = 2 * self.n_nodes

        def node(i, j):
            return j * nnx + i

        fixed = set()
        for s in p.supports:
            for i, j in self._support_nodes(s):
                for d in s.get("dofs", "xy"):
                    fixed.add(2 * node(i, j) + (0 if d == "x" else 1))
        if p.symmetry:
            for j in range(nny):
                fixed.add(2 * node(0, j))
        self.fixed = np.array(sorted(fixed), dtype=np.int64)
        free = np.setdiff1d(np.arange(ndof), self.fixed)
        self.free = free
        self._constrained = self._constrains_rigid_modes(nnx, nny)

        F = np.zeros(ndof)
        for ld in p.loads:
            # edge loads give the total force, spread with trapezoid weights
            nodes = self._support_nodes(ld)
            wts = np.ones(len(nodes))
            if len(nodes) > 1:
                wts[[0, -1]] = 0.5
            wts /= wts.sum()
            for (i, j), wt in zip(nodes, wts):
                F[2 * node(i, j)] += wt * ld.get("fx", 0.0)
                F[2 * node(i, j) + 1] += wt * ld.get("fy", 0.0)
        self.F = F[free]

        # element DOFs, corners ccw from bottom-left in the y-up frame
        ei, ej = np.meshgrid(np.arange(p.nx), np.arange(p.ny), indexing="xy")
        ei, ej = ei.ravel(), ej.ravel()
        corners = np.stack([node(ei, ej + 1), node(ei + 1, ej + 1), node(ei + 1, ej), node(ei, ej)], 1)
        edof = np.empty((len(ei), 8), dtype=np.int64)
        edof[:, 0::2] = 2 * corners
        edof[:, 1::2] = 2 * corners + 1
        cell_of = (ej // p.m) * p.cols + (ei // p.m)

        # reduced numbering; fixed DOFs map to -1
        remap = -np.ones(ndof, dtype=np.int64)
        remap[free] = np.arange(len(free))
        red = remap[edof]
        gi = np.repeat(red, 8, axis=1)
        gj = np.tile(red, (1, 8))
        keep = (gi >= 0) & (gj >= 0) & (gi <= gj)
        self.bandwidth = int(np.max((gj - gi)[keep])) if keep.any() else 0
        nfree = len(free)
        u = self.bandwidth
        # flat index into the (u+1, nfree) upper band storage
        band_pos = (u + gi - gj) * nfree + gj

        basis = _component_basis().reshape(4, 64)
        rows_, cols_, vals = [], [], []
        for q in range(4):
            vq = np.broadcast_to(basis[q], gi.shape)
            rows_.append(band_pos[keep])
            cols_.append(cell_of[:, None].repeat(64, 1)[keep] * 4 + q)
            vals.append(vq[keep])
        self._band_map = coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows_), np.concatenate(cols_))),
            shape=((u + 1) * nfree, p.n_cells * 4)).tocsr()
        self._band_shape = (u + 1, nfree)
        self._free_pos = remap
        centre = [node(i, p.centerline_row) for i in range(nnx)]
        self._centre_dofs = remap[2 * np.array(centre) + 1]

    def _support_nodes(self, s):
        """Nodes addressed by a support or load entry (single node or edge)."""
        p = self.problem
        if "edge" not in s:
            return [tuple(s["node"])]
        e = s["edge"]
        if e == "left":
            return [(0, j) for j in range(p.ny + 1)]
        if e == "right":
            return [(p.nx, j) for j in range(p.ny + 1)]
        if e == "top":
            return [(i, 0) for i in range(p.nx + 1)]
        return [(i, p.ny) for i in range(p.nx + 1)]

    def _constrains_rigid_modes(self, nnx, nny):
        jj, ii = np.divmod(np.arange(self.n_nodes), nnx)
        x, y = ii.astype(float), -jj.astype(float)
        modes = np.zeros((2 * self.n_nodes, 3))
        modes[0::2, 0] = 1.0
        modes[1::2, 1] = 1.0
        modes[0::2, 2] = -y
        modes[1::2, 2] = x
        if len(self.fixed) == 0:
            return False
        return np.linalg.matrix_rank(modes[self.fixed]) == 3

    def band_matrix(self, components):
        """Upper band storage of the reduced stiffness for per-cell components."""
        coef = np.asarray(components, dtype=float).reshape(-1)
        return (self._band_map @ coef).reshape(self._band_shape)

    def solve_full(self, components):
        """Free-DOF displacement vector for ``(n_cells, 4)`` tensor components."""
        comps = np.asarray(components, dtype=float)
        if comps.shape != (self.problem.n_cells, 4):
            raise ValueError(f"expected ({self.problem.n_cells}, 4) components, got {comps.shape}")
        if not self._constrained:
            raise SingularSystemError("supports do not remove all rigid-body modes")
        if not np.any(self.F):
            return np.zeros_like(self.F)
        try:
            U = solveh_banded(self.band_matrix(comps), self.F, lower=False, check_finite=False)
        except LinAlgError as exc:
            raise SingularSystemError(f"stiffness matrix is not positive definite: {exc}") from exc
        except ValueError as exc:
            raise SolverError(str(exc)) from exc
        if not np.all(np.isfinite(U)):
            raise SolverError("non-finite displacements")
        return U

    def centerline(self, U):
        out = np.zeros(len(self._centre_dofs))
        ok = self._centre_dofs >= 0
        out[ok] = U[self._centre_dofs[ok]]
        return out

    def solve(self, components):
        return self.centerline(self.solve_full(components))


def assemble_and_solve(problem, l, tensors):
    """Centerline vertical displacements of the assembly ``l``.

    ``l`` lists one dataset index per macro cell in row-major order and
    ``tensors`` holds the dataset's homogenized tensors.
    """
    comps = tensor_components(tensors)
    genes = np.asarray(l, dtype=np.int64)
    if genes.shape != (problem.n_cells,):
        raise ValueError(f"assembly needs {problem.n_cells} genes, got {genes.shape}")
    if genes.min() < 0 or genes.max() >= len(comps):
        raise ValueError("gene outside the dataset index range")
    return MacroSolver(problem).solve(comps[genes])


def target_shape(kind, n):
    """Unit-amplitude target profiles sampled at ``n`` centerline nodes.

    ``x`` runs from the symmetry line (0) to the support (1).
    """
    x = np.linspace(0.0, 1.0, n)
    if kind == "parabola":
        return -(1.0 - x * x)
    if kind == "sine":
        return -np.cos(0.5 * np.pi * x)
    if kind == "wave":
        return -(1.0 - x * x) * (1.0 + 0.25 * np.sin(2.0 * np.pi * x))
    raise ValueError(f"unknown target kind {kind!r}")


def mbb_problem(rows=4, cols=4, m=4, target="wave", amplitude=None, reference=None):
    """Right half of an MBB beam: mirror line on the left, roller bottom right.

    The target amplitude defaults to 1.2 times the mid-span deflection of a
    uniform assembly of ``reference`` (``0.8 x`` solid plane stress when
    omitted), which keeps it within reach of dense cell datasets.
    """
    problem = AssemblyProblem(
        rows, cols, m,
        supports=[{"node": [cols * m, rows * m], "dofs": "y"}],
        loads=[{"node": [0, 0], "fy": -1.0}],
        symmetry=True,
    )
    if amplitude is None:
        ref = 0.8 * plane_stress() if reference is None else reference
        comps = np.tile(tensor_components([ref]), (problem.n_cells, 1))
        amplitude = 1.2 * abs(MacroSolver(problem).solve(comps)[0])
    problem.target = float(amplitude) * target_shape(target, problem.n_centerline)
    problem.meta = {"target_spec": {"kind": target, "amplitude": float(amplitude)}}
    return problem.validate()


def cantilever_problem(rows=2, cols=8, m=4, load=-1.0):
    """Clamped left edge, total shear ``load`` spread over the right edge."""
    return AssemblyProblem(
        rows, cols, m,
        supports=[{"edge": "left", "dofs": "xy"}],
        loads=[{"edge": "right", "fy": float(load)}],
    ).validate()


def shipped_problem_path(name="mbb_half"):
    return Path(__file__).resolve().parent.parent / "data" / f"{name}.json"

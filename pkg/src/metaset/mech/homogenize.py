"""Periodic homogenization of binary 2D unit cells.

One Q4 element per pixel, three unit test strains with periodic fluctuation
fields, and energy averaging of the corrected fields.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.linalg import splu

from .elements import affine_displacements, element_stiffness, plane_stress


class HomogenizationError(RuntimeError):
    pass


@dataclass
class ElasticTensor2D:
    C: np.ndarray  # 3x3 Voigt, engineering shear strain
    E: float = 1.0
    nu: float = 0.3

    @property
    def C11(self):
        return float(self.C[0, 0])

    @property
    def C12(self):
        return float(self.C[0, 1])

    @property
    def C22(self):
        return float(self.C[1, 1])

    @property
    def C33(self):
        return float(self.C[2, 2])

    def vector(self):
        """Property vector ``(C11, C12, C22, C33)``."""
        return np.array([self.C11, self.C12, self.C22, self.C33])


def _periodic_dofs(nely, nelx):
    """Element DOF table on a periodic pixel mesh.

    Pixel ``(r, c)`` (row from the top) has corners ccw from bottom-left:
    ``(r+1, c), (r+1, c+1), (r, c+1), (r, c)`` with wraparound.
    """
    r, c = np.meshgrid(np.arange(nely), np.arange(nelx), indexing="ij")
    r, c = r.ravel(), c.ravel()

    def node(rr, cc):
        return (rr % nely) * nelx + (cc % nelx)

    corners = np.stack([node(r + 1, c), node(r + 1, c + 1), node(r, c + 1), node(r, c)], axis=1)
    edof = np.empty((len(r), 8), dtype=np.int64)
    edof[:, 0::2] = 2 * corners
    edof[:, 1::2] = 2 * corners + 1
    return edof


def homogenize2d(solid, E=1.0, nu=0.3, E_min=1e-9):
    """Homogenized plane-stress tensor of a periodic binary cell.

    Solid pixels use modulus ``E``, void pixels the ersatz modulus ``E_min``.
    """
    solid = np.asarray(solid, dtype=bool)
    if solid.ndim != 2 or min(solid.shape) < 2:
        raise ValueError("homogenize2d needs a 2D cell of at least 2x2 pixels")
    nely, nelx = solid.shape
    nel = nely * nelx
    ndof = 2 * nel
    ke0 = element_stiffness(plane_stress(1.0, nu))
    moduli = np.where(solid.ravel(), E, E_min).astype(float)
    edof = _periodic_dofs(nely, nelx)

    rows = np.repeat(edof, 8, axis=1).ravel()
    cols = np.tile(edof, (1, 8)).ravel()
    vals = (moduli[:, None] * ke0.ravel()[None, :]).ravel()
    K = coo_matrix((vals, (rows, cols)), shape=(ndof, ndof)).tocsc()

    chi0 = affine_displacements()  # (8, 3)
    fe = ke0 @ chi0  # element force per unit modulus
    F = np.zeros((ndof, 3))
    for case in range(3):
        np.add.at(F[:, case], edof, moduli[:, None] * fe[:, case][None, :])

    # pin node 0 to remove rigid translation
    free = np.arange(2, ndof)
    try:
        lu = splu(K[free][:, free].tocsc())
    except RuntimeError as exc:
        raise HomogenizationError(f"singular periodic system: {exc}") from exc
    chi = np.zeros((ndof, 3))
    chi[free] = lu.solve(F[free])
    if not np.all(np.isfinite(chi)):
        raise HomogenizationError("non-finite fluctuation field")

    C = np.zeros((3, 3))
    diff = chi0[None, :, :] - chi[edof]  # (nel, 8, 3)
    for i in range(3):
        for j in range(i, 3):
            energy = np.einsum("ea,ab,eb->e", diff[:, :, i], ke0, diff[:, :, j])
            C[i, j] = C[j, i] = np.dot(moduli, energy) / nel
    return ElasticTensor2D(C, E, nu)


def laminate_tensor(fractions, tensors):
    """Exact effective tensor of layers stacked along y (layers parallel to x).

    Standard laminate averaging: ``sigma_22`` and ``sigma_12`` are uniform
    through the stack while ``eps_11`` is shared by all layers.
    """
    f = np.asarray(fractions, dtype=float)
    Cs = [np.asarray(C, dtype=float) for C in tensors]
    c11 = np.array([C[0, 0] for C in Cs])
    c12 = np.array([C[0, 1] for C in Cs])
    c22 = np.array([C[1, 1] for C in Cs])
    c33 = np.array([C[2, 2] for C in Cs])
    C22 = 1.0 / np.sum(f / c22)
    ratio = np.sum(f * c12 / c22)
    C12 = ratio * C22
    C11 = np.sum(f * (c11 - c12 * c12 / c22)) + ratio * ratio * C22
    C33 = 1.0 / np.sum(f / c33)
    return np.array([[C11, C12, 0.0], [C12, C22, 0.0], [0.0, 0.0, C33]])

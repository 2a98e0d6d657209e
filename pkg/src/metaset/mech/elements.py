"""Bilinear quadrilateral (Q4) plane elements.

Node order is counter-clockwise from the bottom-left corner in a y-up frame;
DOFs are interleaved ``(u0, v0, u1, v1, ...)``.  For a square element the
stiffness does not depend on its side length, so everything is computed on
the unit square.
"""
import numpy as np

_NODES = np.array([[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]])
_GAUSS = np.array([-1.0, 1.0]) / np.sqrt(3.0)


def plane_stress(E=1.0, nu=0.3):
    """Voigt plane-stress stiffness ``[[C11, C12, 0], [C12, C22, 0], [0, 0, C33]]``."""
    f = E / (1.0 - nu * nu)
    return np.array([[f, nu * f, 0.0], [nu * f, f, 0.0], [0.0, 0.0, E / (2.0 * (1.0 + nu))]])


def _b_matrices():
    """Strain-displacement matrices at the 2x2 Gauss points of a unit square."""
    out = []
    for xi in _GAUSS:
        for eta in _GAUSS:
            dn_dxi = 0.25 * _NODES[:, 0] * (1.0 + _NODES[:, 1] * eta)
            dn_deta = 0.25 * _NODES[:, 1] * (1.0 + _NODES[:, 0] * xi)
            # unit square: x = (xi + 1) / 2, so d/dx = 2 d/dxi
            dn_dx, dn_dy = 2.0 * dn_dxi, 2.0 * dn_deta
            B = np.zeros((3, 8))
            B[0, 0::2] = dn_dx
            B[1, 1::2] = dn_dy
            B[2, 0::2] = dn_dy
            B[2, 1::2] = dn_dx
            out.append(B)
    return np.array(out)


_B = _b_matrices()
_DETJ_W = 0.25  # Jacobian determinant of the unit square times unit weights


def stiffness_basis():
    """``K[a, b]`` with ``ke(C) = sum_ab C[a, b] * K[a, b]`` (shape 3x3x8x8)."""
    basis = np.zeros((3, 3, 8, 8))
    for B in _B:
        basis += _DETJ_W * np.einsum("ai,bj->abij", B, B)
    return basis


_BASIS = stiffness_basis()


def element_stiffness(C):
    """8x8 Q4 stiffness for the 3x3 Voigt tensor ``C``."""
    return np.einsum("ab,abij->ij", np.asarray(C, dtype=float), _BASIS)


def affine_displacements():
    """Nodal displacements of unit macro strains ``e11``, ``e22``, ``g12``.

    Columns are the three load cases on the unit square element.
    """
    xy = (_NODES + 1.0) / 2.0
    out = np.zeros((8, 3))
    out[0::2, 0] = xy[:, 0]
    out[1::2, 1] = xy[:, 1]
    out[0::2, 2] = 0.5 * xy[:, 1]
    out[1::2, 2] = 0.5 * xy[:, 0]
    return out

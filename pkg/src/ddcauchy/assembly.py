"""P1 finite-element assembly of the weighted bilinear forms.

Diffuse forms on the background mesh:

    K_omega  = <M grad u, grad v> weighted by omega       (stiffness)
    M_omega  = <u, v>             weighted by omega       (bulk mass)
    B_H, B_B = <u, v> weighted by |grad omega| gamma_H/B  (band masses)
    mean_vec = <basis_i, 1> in the U-norm = row sums of B_H

Sharp forms on the annulus mesh:

    K_D              stiffness with M at quadrature points
    T_inner, T_outer exact P1 edge mass matrices on the tagged polygons
    mean_vec_sharp   row sums of T_inner

All weights are evaluated analytically at (subdivided) quadrature points;
elements that never meet the support of the weight are skipped, so the
matrices carry structural zeros there.  Active DOF sets are read off the
diagonals afterwards.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .geometry import ConductivityTensor, PhaseField
from .mesh import QuadratureRule, TriMesh, _radial_interval

ACTIVE_RTOL = 1e-14


class AssemblyError(RuntimeError):
    pass


def _element_geometry(mesh: TriMesh, tri_ids=None):
    """Areas and constant P1 gradients per element.

    Returns (ids, areas, grads) with grads of shape (m, 3, 2):
    grads[e, i] is the gradient of the hat function of local vertex i.
    """
    tris = mesh.triangles if tri_ids is None else mesh.triangles[tri_ids]
    p = mesh.vertices[tris]
    v0, v1, v2 = p[:, 0], p[:, 1], p[:, 2]
    det = ((v1[:, 0] - v0[:, 0]) * (v2[:, 1] - v0[:, 1])
           - (v2[:, 0] - v0[:, 0]) * (v1[:, 1] - v0[:, 1]))
    if np.any(det <= 0):
        raise AssemblyError("mesh contains non-positively oriented triangles")
    areas = 0.5 * det
    grads = np.empty((len(tris), 3, 2))
    grads[:, 0, 0] = (v1[:, 1] - v2[:, 1]) / det
    grads[:, 0, 1] = (v2[:, 0] - v1[:, 0]) / det
    grads[:, 1, 0] = (v2[:, 1] - v0[:, 1]) / det
    grads[:, 1, 1] = (v0[:, 0] - v2[:, 0]) / det
    grads[:, 2, 0] = (v0[:, 1] - v1[:, 1]) / det
    grads[:, 2, 1] = (v1[:, 0] - v0[:, 0]) / det
    return tris, areas, grads


def _quad_points(mesh: TriMesh, tris: np.ndarray, rule: QuadratureRule):
    """Physical quadrature points, shape (m, q, 2)."""
    p = mesh.vertices[tris]
    return np.einsum("qi,mid->mqd", rule.points, p)


def _support_mask(mesh: TriMesh, field: PhaseField, kind: str) -> np.ndarray:
    """Elements whose radial interval meets the support of the weight."""
    r_low, r_high = _radial_interval(mesh.vertices, mesh.triangles)
    geo = field.geometry
    eps = field.epsilon
    if kind == "bulk":
        return (r_high > geo.r_inner - eps) & (r_low < geo.r_outer + eps)
    radius = geo.r_inner if kind == "H" else geo.r_outer
    return (r_high > radius - eps) & (r_low < radius + eps)


def _scatter(ni: np.ndarray, local: np.ndarray, n: int) -> sp.csr_matrix:
    """Accumulate per-element 3x3 blocks into a CSR matrix."""
    rows = np.repeat(ni, 3, axis=1).ravel()
    cols = np.tile(ni, (1, 3)).ravel()
    mat = sp.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n))
    return mat.tocsr()


def assemble_weighted_stiffness(mesh: TriMesh, tensor: ConductivityTensor,
                                field: PhaseField,
                                rule: QuadratureRule) -> sp.csr_matrix:
    """K[i, j] = int omega * grad phi_j . M grad phi_i dx."""
    mask = _support_mask(mesh, field, "bulk")
    tris, areas, grads = _element_geometry(mesh, mask)
    qp = _quad_points(mesh, tris, rule)
    _, omega, _ = field.phase_and_weights(qp)
    m_q = tensor.evaluate(qp)
    if not np.all(np.isfinite(m_q)):
        raise AssemblyError("conductivity tensor evaluated to non-finite values")
    # effective tensor per element: area * sum_q w_q omega_q M(x_q)
    m_eff = np.einsum("q,mq,mqab->mab", rule.weights, omega, m_q)
    m_eff *= areas[:, None, None]
    local = np.einsum("mia,mab,mjb->mij", grads, m_eff, grads)
    return _scatter(tris, local, mesh.num_vertices)


def assemble_bulk_mass(mesh: TriMesh, field: PhaseField,
                       rule: QuadratureRule) -> sp.csr_matrix:
    """M[i, j] = int omega * phi_i phi_j dx."""
    mask = _support_mask(mesh, field, "bulk")
    tris, areas, _ = _element_geometry(mesh, mask)
    qp = _quad_points(mesh, tris, rule)
    _, omega, _ = field.phase_and_weights(qp)
    lam = rule.points
    local = np.einsum("q,mq,qi,qj->mij", rule.weights, omega, lam, lam)
    local *= areas[:, None, None]
    return _scatter(tris, local, mesh.num_vertices)


def assemble_band_mass(mesh: TriMesh, field: PhaseField, which: str,
                       rule: QuadratureRule) -> sp.csr_matrix:
    """B[i, j] = int |grad omega| gamma_which * phi_i phi_j dx."""
    mask = _support_mask(mesh, field, which)
    if not mask.any():
        raise AssemblyError(f"no elements meet the {which}-band; "
                            f"eps or the mesh is misconfigured")
    tris, areas, _ = _element_geometry(mesh, mask)
    qp = _quad_points(mesh, tris, rule)
    _, _, gradmag = field.phase_and_weights(qp)
    gamma = field.geometry.boundary_weight(which, qp)
    weight = gradmag * gamma
    lam = rule.points
    local = np.einsum("q,mq,qi,qj->mij", rule.weights, weight, lam, lam)
    local *= areas[:, None, None]
    out = _scatter(tris, local, mesh.num_vertices)
    if out.diagonal().max() <= 0.0:
        raise AssemblyError(f"{which}-band mass is identically zero")
    return out


def diffuse_functional(mesh: TriMesh, field: PhaseField, integrand,
                       kind: str, rule: QuadratureRule) -> float:
    """int g * omega dx (kind='bulk') or int g |grad omega| gamma dx
    (kind='band_H'/'band_B'), by subdivided quadrature on the mesh."""
    if kind == "bulk":
        mask = _support_mask(mesh, field, "bulk")
    elif kind in ("band_H", "band_B"):
        mask = _support_mask(mesh, field, kind[-1])
    else:
        raise ValueError(f"unknown kind {kind!r}")
    tris, areas, _ = _element_geometry(mesh, mask)
    qp = _quad_points(mesh, tris, rule)
    _, omega, gradmag = field.phase_and_weights(qp)
    if kind == "bulk":
        weight = omega
    else:
        weight = gradmag * field.geometry.boundary_weight(kind[-1], qp)
    g = np.asarray(integrand(qp.reshape(-1, 2)), dtype=float).reshape(qp.shape[:2])
    return float(np.einsum("q,mq,mq,m->", rule.weights, weight, g, areas))


def active_sets(b_h: sp.csr_matrix, k_omega: sp.csr_matrix,
                m_omega: sp.csr_matrix):
    """Index sets of control and state DOFs actually touched by the weights.

    active_u: diagonal of B_H above threshold; active_v: diagonal of
    M_omega + K_omega above threshold.  All solves are restricted to them.
    """
    du = b_h.diagonal()
    dv = (m_omega + k_omega).diagonal()
    active_u = np.flatnonzero(du > ACTIVE_RTOL * du.max())
    active_v = np.flatnonzero(dv > ACTIVE_RTOL * dv.max())
    if active_u.size == 0 or active_v.size == 0:
        raise AssemblyError("empty active set")
    return active_u, active_v


@dataclass
class OperatorSet:
    """Assembled diffuse operators plus bookkeeping for one (mesh, eps)."""

    mesh: TriMesh
    field: PhaseField
    tensor: ConductivityTensor
    rule: QuadratureRule
    k_omega: sp.csr_matrix
    m_omega: sp.csr_matrix
    b_h: sp.csr_matrix
    b_b: sp.csr_matrix
    mean_vec: np.ndarray
    active_u: np.ndarray
    active_v: np.ndarray
    k_identity: sp.csr_matrix = None  # plain-Laplacian variant, on demand

    @classmethod
    def build(cls, mesh: TriMesh, field: PhaseField,
              tensor: ConductivityTensor, rule: QuadratureRule,
              with_identity_stiffness: bool = False) -> "OperatorSet":
        k_omega = assemble_weighted_stiffness(mesh, tensor, field, rule)
        m_omega = assemble_bulk_mass(mesh, field, rule)
        b_h = assemble_band_mass(mesh, field, "H", rule)
        b_b = assemble_band_mass(mesh, field, "B", rule)
        mean_vec = np.asarray(b_h.sum(axis=1)).ravel()
        a_u, a_v = active_sets(b_h, k_omega, m_omega)
        k_id = None
        if with_identity_stiffness:
            k_id = assemble_weighted_stiffness(
                mesh, ConductivityTensor.identity(), field, rule)
        return cls(mesh, field, tensor, rule, k_omega, m_omega, b_h, b_b,
                   mean_vec, a_u, a_v, k_identity=k_id)

    def riesz_u(self) -> sp.csr_matrix:
        """U-inner-product Gram matrix on the active control set."""
        return self.b_h[np.ix_(self.active_u, self.active_u)].tocsr()

    def riesz_h(self) -> sp.csr_matrix:
        """H-inner-product Gram matrix (M-stiffness + bulk mass) on active_v."""
        r = (self.k_omega + self.m_omega)
        return r[np.ix_(self.active_v, self.active_v)].tocsr()


@dataclass
class SharpOperatorSet:
    """Operators of the sharp reference problem on the annulus mesh."""

    mesh: TriMesh
    tensor: ConductivityTensor
    k_d: sp.csr_matrix
    t_inner: sp.csr_matrix
    t_outer: sp.csr_matrix
    mean_vec_sharp: np.ndarray
    inner_nodes: np.ndarray
    outer_nodes: np.ndarray


def _edge_mass(mesh: TriMesh, tag: str) -> sp.csr_matrix:
    """Exact P1 mass matrix of a tagged polygonal boundary."""
    edges = [(i, j) for i, j, t in mesh.boundary_edges if t == tag]
    if not edges:
        raise AssemblyError(f"no boundary edges tagged {tag!r}")
    n = mesh.num_vertices
    rows, cols, vals = [], [], []
    for i, j in edges:
        ell = float(np.linalg.norm(mesh.vertices[i] - mesh.vertices[j]))
        rows += [i, i, j, j]
        cols += [i, j, i, j]
        vals += [ell / 3.0, ell / 6.0, ell / 6.0, ell / 3.0]
    return sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()


def assemble_sharp(mesh: TriMesh, tensor: ConductivityTensor,
                   quad_degree: int = 2) -> SharpOperatorSet:
    """Stiffness and boundary mass matrices of the sharp weak form."""
    from .mesh import boundary_nodes, quadrature

    rule = quadrature(quad_degree, 1)
    tris, areas, grads = _element_geometry(mesh)
    qp = _quad_points(mesh, tris, rule)
    m_q = tensor.evaluate(qp)
    m_eff = np.einsum("q,mqab->mab", rule.weights, m_q) * areas[:, None, None]
    local = np.einsum("mia,mab,mjb->mij", grads, m_eff, grads)
    k_d = _scatter(tris, local, mesh.num_vertices)
    t_inner = _edge_mass(mesh, "inner")
    t_outer = _edge_mass(mesh, "outer")
    mean_vec = np.asarray(t_inner.sum(axis=1)).ravel()
    return SharpOperatorSet(mesh, tensor, k_d, t_inner, t_outer, mean_vec,
                            boundary_nodes(mesh, "inner"),
                            boundary_nodes(mesh, "outer"))


def dump_matrix(mat: sp.spmatrix) -> str:
    """Coordinate (row, col, value) text dump for external verification."""
    coo = mat.tocoo()
    lines = [f"{coo.shape[0]} {coo.shape[1]} {coo.nnz}"]
    order = np.lexsort((coo.col, coo.row))
    for r, c, v in zip(coo.row[order], coo.col[order], coo.data[order]):
        lines.append(f"{r} {c} {v.hex()}")
    return "\n".join(lines) + "\n"

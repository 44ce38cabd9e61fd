"""P1 finite element assembly, gradient/Hessian recovery and interpolation."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .meshing import TriMesh, _points_polyline_distance


class FemError(RuntimeError):
    pass


@dataclass
class FemOperators:
    """Sparse P1 operators on a fixed mesh.

    K is the (negative-Laplacian) stiffness form, M the consistent mass,
    M_lumped its row-sum diagonal; boundary_weights are lumped arc-length
    weights (nonzero on boundary vertices only).
    """

    mesh: TriMesh
    K: sp.csr_matrix
    M: sp.csr_matrix
    M_lumped: np.ndarray
    boundary_weights: np.ndarray
    grads: np.ndarray  # (n_tri, 3, 2) P1 basis gradients per triangle
    areas: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def boundary_matrix(self, weight) -> sp.csr_matrix:
        """Lumped boundary mass with nodal weight w: diag(w_i * ds_i)."""
        w = np.asarray(weight, dtype=float)
        vals = self.boundary_weights.copy()
        if w.ndim == 0:
            vals *= float(w)
        else:
            nb = self.mesh.n_boundary
            full = np.zeros(self.mesh.n_vertices)
            full[:nb] = w
            vals *= full
        return sp.diags(vals).tocsr()

    def boundary_load(self, weight) -> np.ndarray:
        """Lumped boundary load vector l_i = w_i * ds_i."""
        nb = self.mesh.n_boundary
        out = np.zeros(self.mesh.n_vertices)
        out[:nb] = self.boundary_weights[:nb] * np.asarray(weight, dtype=float)
        return out

    def weak_laplacian(self, f, boundary_flux=None) -> np.ndarray:
        """Nodal Laplacian from the weak form with Neumann data grad f . nu.

        Solves M_lumped * lap = l(beta) - K f, with beta the prescribed
        normal derivative on the boundary (zero if omitted).
        """
        rhs = -self.K @ np.asarray(f, dtype=float)
        if boundary_flux is not None:
            rhs = rhs + self.boundary_load(boundary_flux)
        return rhs / self.M_lumped


def assemble(mesh: TriMesh) -> FemOperators:
    v = mesh.vertices
    t = mesh.triangles
    nt = len(t)
    n = mesh.n_vertices

    a, b, c = v[t[:, 0]], v[t[:, 1]], v[t[:, 2]]
    det = (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (
        c[:, 0] - a[:, 0]
    )
    if np.any(det <= 0):
        raise FemError("degenerate or inverted triangle in assembly")
    areas = 0.5 * det

    # gradients of the three barycentric basis functions
    grads = np.empty((nt, 3, 2))
    grads[:, 0, 0] = b[:, 1] - c[:, 1]
    grads[:, 0, 1] = c[:, 0] - b[:, 0]
    grads[:, 1, 0] = c[:, 1] - a[:, 1]
    grads[:, 1, 1] = a[:, 0] - c[:, 0]
    grads[:, 2, 0] = a[:, 1] - b[:, 1]
    grads[:, 2, 1] = b[:, 0] - a[:, 0]
    grads /= det[:, None, None]

    ke = np.einsum("tid,tjd->tij", grads, grads) * areas[:, None, None]
    me_ref = (np.ones((3, 3)) + np.eye(3)) / 12.0
    me = me_ref[None, :, :] * areas[:, None, None]

    rows = np.repeat(t, 3, axis=1).ravel()
    cols = np.tile(t, (1, 3)).ravel()
    K = sp.coo_matrix((ke.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    M = sp.coo_matrix((me.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    M_lumped = np.asarray(M.sum(axis=1)).ravel()

    nb = mesh.n_boundary
    bl = np.linalg.norm(
        v[(np.arange(nb) + 1) % nb] - v[np.arange(nb)], axis=1
    )
    bw = np.zeros(n)
    bw[:nb] = 0.5 * (bl + np.roll(bl, 1))

    return FemOperators(mesh, K, M, M_lumped, bw, grads, areas)


def triangle_gradients(ops: FemOperators, f) -> np.ndarray:
    """Per-triangle constant gradient of a P1 field, shape (n_tri, 2)."""
    f = np.asarray(f, dtype=float)
    return np.einsum("tid,ti->td", ops.grads, f[ops.mesh.triangles])


def recover_gradient(ops: FemOperators, f) -> np.ndarray:
    """Area-weighted nodal average of per-triangle gradients."""
    gt = triangle_gradients(ops, f)
    n = ops.mesh.n_vertices
    acc = np.zeros((n, 2))
    wsum = np.zeros(n)
    w = ops.areas / 3.0
    for k in range(3):
        idx = ops.mesh.triangles[:, k]
        np.add.at(acc, idx, gt * w[:, None])
        np.add.at(wsum, idx, w)
    if np.any(wsum == 0):
        raise FemError("isolated vertex in gradient recovery")
    return acc / wsum[:, None]


def recover_hessian(ops: FemOperators, f) -> np.ndarray:
    """ZZ-style double recovery: nodal symmetric 2x2 Hessian, shape (n, 2, 2)."""
    g = recover_gradient(ops, f)
    hx = recover_gradient(ops, g[:, 0])
    hy = recover_gradient(ops, g[:, 1])
    H = np.empty((ops.mesh.n_vertices, 2, 2))
    H[:, 0, 0] = hx[:, 0]
    H[:, 1, 1] = hy[:, 1]
    H[:, 0, 1] = H[:, 1, 0] = 0.5 * (hx[:, 1] + hy[:, 0])
    return H


def _barycentric(mesh: TriMesh, tri_idx, points):
    t = mesh.triangles[tri_idx]
    a = mesh.vertices[t[:, 0]]
    b = mesh.vertices[t[:, 1]]
    c = mesh.vertices[t[:, 2]]
    v0, v1 = b - a, c - a
    v2 = points - a
    d00 = np.sum(v0 * v0, axis=1)
    d01 = np.sum(v0 * v1, axis=1)
    d11 = np.sum(v1 * v1, axis=1)
    d20 = np.sum(v2 * v0, axis=1)
    d21 = np.sum(v2 * v1, axis=1)
    den = d00 * d11 - d01 * d01
    w1 = (d11 * d20 - d01 * d21) / den
    w2 = (d00 * d21 - d01 * d20) / den
    return np.column_stack([1.0 - w1 - w2, w1, w2])


def locate(mesh: TriMesh, points) -> np.ndarray:
    """Containing triangle per query point (-1 if outside), by walk-free scan."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    from scipy.spatial import cKDTree

    key = "centroid_tree"
    if key not in mesh._cache:
        cen = mesh.vertices[mesh.triangles].mean(axis=1)
        mesh._cache[key] = (cKDTree(cen), cen)
    tree, _ = mesh._cache[key]
    kmax = min(32, len(mesh.triangles))
    _, cand = tree.query(pts, k=kmax)
    cand = np.atleast_2d(cand)
    out = np.full(len(pts), -1, dtype=int)
    pending = np.arange(len(pts))
    for col in range(cand.shape[1]):
        if not len(pending):
            break
        tri_idx = cand[pending, col]
        lam = _barycentric(mesh, tri_idx, pts[pending])
        ok = np.all(lam >= -1e-10, axis=1)
        out[pending[ok]] = tri_idx[ok]
        pending = pending[~ok]
    return out


def interpolate(source_ops: FemOperators, f, target_points) -> np.ndarray:
    """Barycentric interpolation; outside points take the nearest-boundary value.

    Points farther than 2h outside the source domain are rejected.
    """
    mesh = source_ops.mesh
    f = np.asarray(f, dtype=float)
    pts = np.atleast_2d(np.asarray(target_points, dtype=float))
    tri_idx = locate(mesh, pts)
    out = np.empty(len(pts))
    inside = tri_idx >= 0
    if inside.any():
        lam = _barycentric(mesh, tri_idx[inside], pts[inside])
        out[inside] = np.sum(lam * f[mesh.triangles[tri_idx[inside]]], axis=1)
    if (~inside).any():
        q = pts[~inside]
        bnd = mesh.vertices[: mesh.n_boundary]
        dist = _points_polyline_distance(q, bnd)
        if np.any(dist > 2 * mesh.h):
            raise FemError(
                f"target point {dist.max():.3g} outside source domain (> 2h)"
            )
        out[~inside] = _boundary_projection_values(mesh, f, q)
    return out


def _boundary_projection_values(mesh: TriMesh, f, points):
    """Value of the P1 boundary trace at the closest boundary point."""
    nb = mesh.n_boundary
    p1 = mesh.vertices[:nb]
    p2 = mesh.vertices[(np.arange(nb) + 1) % nb]
    d = p2 - p1
    dd = np.sum(d * d, axis=1)
    vals = np.empty(len(points))
    for i, q in enumerate(points):
        w = q[None, :] - p1
        t = np.clip(np.einsum("jk,jk->j", w, d) / dd, 0.0, 1.0)
        proj = p1 + t[:, None] * d
        dist = np.linalg.norm(q[None, :] - proj, axis=1)
        j = int(np.argmin(dist))
        f1, f2 = f[j], f[(j + 1) % nb]
        vals[i] = (1 - t[j]) * f1 + t[j] * f2
    return vals

"""Rate-of-change identity and Harnack-type boundary integrand along a flow.

Given a flow trajectory and the backward conjugate-heat solve on it, each
snapshot's entropy rate is split into the volume part

    2 tau int |Hess f - I/(2 tau)|^2 u dx

and the boundary part -int <grad W, nu> u dS, the latter computed two ways:
directly from the nodal W field via least-squares patches, and through the
Harnack identity

    -<grad W, nu> = 2 tau (db/dt - 2 grad_M b . grad_M f
                           + A(grad_M f, grad_M f) - b / (2 tau)),

with b the Robin weight (the curvature along the flow).  The agreement of
the two routes and of their sum with the finite-difference entropy rate is
what the identity gaps measure.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from . import conjugate, fem, functional
from .conjugate import BackwardSolveState

DEFAULT_SKIP = 5  # snapshots dropped right before t0 (compatibility window)
PATCH_K = 45  # nearest neighbors per local cubic fit (10 coefficients)
QUAD_K = 36  # nearest neighbors per boundary quadratic patch (radius ~ 3h)


class HarnackError(RuntimeError):
    pass


@dataclass
class HarnackReport:
    records: list  # one dict per evaluated snapshot
    skipped_window: tuple  # (first skipped index, t0 index)
    meta: dict = field(default_factory=dict)

    COLUMNS = (
        "t",
        "tau",
        "W_beta",
        "dW_dt_fd",
        "volume_term",
        "boundary_term_direct",
        "boundary_term_harnack",
        "identity_gap_a",
        "identity_gap_gradw",
    )

    def column(self, name):
        return np.array([r[name] for r in self.records])

    def _centered(self):
        """Records whose time stencils are centered (the identity's gauge).

        Endpoint records fall back to one-sided stencils and are flagged; the
        identity gaps there measure the stencil, not the discretization, so
        the summary statistics skip them (unless nothing else is left).
        """
        kept = [r for r in self.records if not r.get("one_sided", False)]
        return kept or self.records

    def max_gap_a_rel(self) -> float:
        out = 0.0
        for r in self._centered():
            scale = max(abs(r["volume_term"]) + abs(r["boundary_term_direct"]), 1e-3)
            out = max(out, r["identity_gap_a"] / scale)
        return out

    def max_gap_gradw_rel(self) -> float:
        out = 0.0
        for r in self._centered():
            scale = max(abs(r["boundary_term_harnack"]), 1e-3)
            out = max(out, r["identity_gap_gradw"] / scale)
        return out


def _cubic_fit_coeffs(mesh, f, pts, tree=None, k=PATCH_K):
    """Least-squares cubic models of the nodal f around each sample point.

    Returns (c, R): c[b] holds the 10 coefficients in the monomial order
    1, x, y, x2, xy, y2, x3, x2y, xy2, y3 with coordinates scaled by the
    patch radius R[b] (distance to the k-th neighbor), so derivatives of the
    model at the sample point are read off the low-order coefficients.
    """
    k = min(k, mesh.n_vertices)
    if k < 15:
        raise HarnackError(f"mesh too small for cubic patches ({k} vertices)")
    if tree is None:
        tree = cKDTree(mesh.vertices)
    d, idx = tree.query(pts, k=k)
    R = d[:, -1]
    dx = (mesh.vertices[idx] - pts[:, None, :]) / R[:, None, None]
    x, y = dx[..., 0], dx[..., 1]
    A = np.stack(
        [np.ones_like(x), x, y, x * x, x * y, y * y,
         x**3, x * x * y, x * y * y, y**3],
        axis=-1,
    )
    AtA = np.einsum("bki,bkj->bij", A, A)
    Atf = np.einsum("bki,bk->bi", A, f[idx])
    c = np.linalg.solve(AtA, Atf[..., None])[..., 0]
    return c, R


def _hessian_from_fits(mesh, f, layer_exclude: float = 1.5):
    """Per-vertex Hessian of f from local cubic fits (exact on quadratics).

    Fit points closer than ``layer_exclude`` boundary spacings to the
    boundary are dropped: fields transported by the moving-mesh solver carry
    a mesh-scale boundary layer whose second differences do not vanish under
    refinement, and keeping those nodes out of the patches removes it while
    the one-sided cubic models still extrapolate cleanly to the boundary.
    The Hessian is still evaluated at every vertex.
    """
    nb = mesh.n_boundary
    bpos = mesh.vertices[:nb]
    spacing = np.linalg.norm(np.roll(bpos, -1, axis=0) - bpos, axis=1).mean()
    dist = mesh.interior_distance_to_boundary()
    keep = np.flatnonzero(dist >= layer_exclude * spacing)
    k = min(PATCH_K, len(keep))
    if k < 15:
        raise HarnackError(f"mesh too small for cubic patches ({k} fit points)")
    tree = cKDTree(mesh.vertices[keep])
    d, idx = tree.query(mesh.vertices, k=k)
    idx = keep[idx]
    R = d[:, -1]
    dx = (mesh.vertices[idx] - mesh.vertices[:, None, :]) / R[:, None, None]
    x, y = dx[..., 0], dx[..., 1]
    A = np.stack(
        [np.ones_like(x), x, y, x * x, x * y, y * y,
         x**3, x * x * y, x * y * y, y**3],
        axis=-1,
    )
    AtA = np.einsum("bki,bkj->bij", A, A)
    Atf = np.einsum("bki,bk->bi", A, f[idx])
    c = np.linalg.solve(AtA, Atf[..., None])[..., 0]
    H = np.empty((len(f), 2, 2))
    H[:, 0, 0] = 2.0 * c[:, 3]
    H[:, 0, 1] = H[:, 1, 0] = c[:, 4]
    H[:, 1, 1] = 2.0 * c[:, 5]
    return H / R[:, None, None] ** 2


def volume_term(ops: fem.FemOperators, f, u, tau: float) -> float:
    """2 tau int |Hess f - I/(2 tau)|^2 u dx over the whole domain.

    The Hessian comes from local cubic least-squares fits rather than
    double gradient recovery: the fits stay second-order accurate up to the
    boundary (one-sided patches), so no boundary ring has to be discarded
    and the near-boundary share of the integral is kept.
    """
    H = _hessian_from_fits(ops.mesh, np.asarray(f, dtype=float))
    H[:, 0, 0] -= 1.0 / (2.0 * tau)
    H[:, 1, 1] -= 1.0 / (2.0 * tau)
    dens = np.einsum("nij,nij->n", H, H)
    return 2.0 * tau * float(ops.M_lumped @ (u * dens))


def _ddt_stencil(times, i: int, last: int):
    """Indices and weights of a second-order d/dt stencil at times[i].

    Centered where possible, three-point one-sided at the ends; weights are
    the derivatives of the Lagrange basis, so nonuniform spacing is fine.
    """
    if 0 < i < last:
        ks = [i - 1, i, i + 1]
        one_sided = False
    else:
        ks = [0, 1, 2] if i == 0 else [last - 2, last - 1, last]
        one_sided = True
    t = [times[k] for k in ks]
    w = []
    for j in range(3):
        others = [m for m in range(3) if m != j]
        denom = (t[j] - t[others[0]]) * (t[j] - t[others[1]])
        w.append((2.0 * times[i] - t[others[0]] - t[others[1]]) / denom)
    return ks, np.array(w), one_sided


def _nodal_w_field(state: BackwardSolveState, snapshot: int):
    """Nodal W via the evolution form W = -2 tau df/dt + tau |grad f|^2 + f.

    Because u solves the conjugate heat equation, 2 lap f - |grad f|^2 =
    -2 df/dt + |grad f|^2 + 2/tau pointwise, which removes all second
    derivatives from W: the time derivative comes from neighboring snapshots
    (corrected for the mesh motion) and the gradient from local cubic fits.
    Differentiating a W assembled from a recovered Laplacian instead is
    hopeless -- its nodal noise does not vanish near the boundary.
    """
    snaps = state.trajectory.snapshots
    times = [s.t for s in snaps]
    ks, w, one_sided = _ddt_stencil(times, snapshot, state.t0_index)
    mesh = state.meshes[snapshot]
    dfdt = np.zeros(mesh.n_vertices)
    v = np.zeros((mesh.n_vertices, 2))
    for k, wk in zip(ks, w):
        dfdt += wk * conjugate.f_from_state(state, k)
        v += wk * state.meshes[k].vertices
    f = conjugate.f_from_state(state, snapshot)
    c, R = _cubic_fit_coeffs(mesh, f, mesh.vertices)
    gf = c[:, 1:3] / R[:, None]
    dtf = dfdt - np.einsum("ij,ij->i", v, gf)  # fixed-point time derivative
    tau = snaps[snapshot].tau
    return -2.0 * tau * dtf + tau * np.einsum("ij,ij->i", gf, gf) + f, one_sided


def _boundary_normal_gradient(mesh, W: np.ndarray) -> np.ndarray:
    """<grad W, nu> at boundary vertices from one-sided quadratic patches."""
    nb = mesh.n_boundary
    k = min(QUAD_K, mesh.n_vertices)
    if k < 9:
        raise HarnackError(f"mesh too small for quadratic patches ({k} vertices)")
    tree = cKDTree(mesh.vertices)
    d, idx = tree.query(mesh.vertices[:nb], k=k)
    R = d[:, -1]
    dx = (mesh.vertices[idx] - mesh.vertices[:nb, None, :]) / R[:, None, None]
    x, y = dx[..., 0], dx[..., 1]
    A = np.stack([np.ones_like(x), x, y, x * x, x * y, y * y], axis=-1)
    AtA = np.einsum("bki,bkj->bij", A, A)
    Atw = np.einsum("bki,bk->bi", A, W[idx])
    c = np.linalg.solve(AtA, Atw[..., None])[..., 0]
    gW = c[:, 1:3] / R[:, None]
    nu = mesh.boundary_curve().outward_normal()
    return np.einsum("ij,ij->i", gW, nu)


def boundary_term_direct(state: BackwardSolveState, snapshot: int) -> float:
    """-int <grad W, nu> u dS from patch fits of the nodal W field."""
    ops = state.ops_at(snapshot)
    W, _ = _nodal_w_field(state, snapshot)
    dWdnu = _boundary_normal_gradient(ops.mesh, W)
    u = state.u_fields[snapshot]
    nb = ops.mesh.n_boundary
    return -float(ops.boundary_weights[:nb] @ (u[:nb] * dWdnu))


def _beta_at(state: BackwardSolveState, snapshot: int) -> np.ndarray:
    """Curvature of the flow curve at the mesh boundary parameters."""
    params = state.meshes[state.t0_index].boundary_param
    kappa = state.trajectory.snapshots[snapshot].curve.curvature()
    return conjugate.interp_periodic(kappa, params)


def _tangential_derivative(values: np.ndarray, positions: np.ndarray) -> np.ndarray:
    """Centered d/ds along a closed polygon of boundary vertices."""
    ds = np.linalg.norm(np.roll(positions, -1, axis=0) - positions, axis=1)
    return (np.roll(values, -1) - np.roll(values, 1)) / (ds + np.roll(ds, 1))


def boundary_term_harnack(state: BackwardSolveState, snapshot: int):
    """2 tau int (db/dt - 2 b_s f_s + kappa f_s^2 - b/2tau) u dS.

    db/dt follows the normal motion of the boundary: the fixed-parameter time
    derivative of the curvature, corrected by the tangential slide of the
    parametrization (the snapshots keep uniform arc length, which is not the
    normal-motion gauge the identity is stated in).
    """
    snaps = state.trajectory.snapshots
    i = snapshot
    if state.t0_index < 2:
        raise HarnackError("need at least three snapshots for db/dt")
    times = [s.t for s in snaps]
    ks, wts, one_sided = _ddt_stencil(times, i, state.t0_index)
    params = state.meshes[state.t0_index].boundary_param

    mesh = state.meshes[i]
    nb = mesh.n_boundary
    bc = mesh.boundary_curve()
    pos = mesh.vertices[:nb]
    tang = bc.unit_tangent()
    kappa_mesh = _beta_at(state, i)

    db_dt_param = np.zeros(nb)
    vel = np.zeros((nb, 2))
    for k, wk in zip(ks, wts):
        db_dt_param += wk * conjugate.interp_periodic(snaps[k].curve.curvature(), params)
        vel += wk * conjugate.boundary_positions(snaps[k].curve.vertices, params)
    v_tan = np.einsum("ij,ij->i", vel, tang)

    beta = kappa_mesh
    db_ds = _tangential_derivative(beta, pos)
    db_dt = db_dt_param - v_tan * db_ds

    f = conjugate.f_from_state(state, i)
    df_ds = _tangential_derivative(f[:nb], pos)

    tau = snaps[i].tau
    integrand = 2.0 * tau * (
        db_dt - 2.0 * db_ds * df_ds + kappa_mesh * df_ds**2 - beta / (2.0 * tau)
    )
    u = state.u_fields[i][:nb]
    ops = state.ops_at(i)
    value = float(ops.boundary_weights[:nb] @ (u * integrand))
    return value, integrand, one_sided


def _w_beta_at(state: BackwardSolveState, snapshot: int) -> float:
    ops = state.ops_at(snapshot)
    snap = state.trajectory.snapshots[snapshot]
    f = conjugate.f_from_state(state, snapshot)
    return functional.w_beta(ops, f, snap.tau, _beta_at(state, snapshot)).w_beta


def rate_identity_check(
    state: BackwardSolveState,
    skip: int = DEFAULT_SKIP,
) -> HarnackReport:
    """Evaluate every term of the entropy rate identity per snapshot.

    The last ``skip`` snapshots before t0 are excluded: with minimizer end
    data the third derivatives of f need not be continuous at t0, so the
    boundary quantities there are not trustworthy.
    """
    snaps = state.trajectory.snapshots
    n_eval = state.t0_index + 1 - max(skip, 0)
    if n_eval < 3:
        raise HarnackError("not enough snapshots outside the compatibility window")

    n_W = min(n_eval + 1, state.t0_index + 1)
    W = [_w_beta_at(state, i) for i in range(n_W)]
    times = [s.t for s in snaps]

    records = []
    warnings_ = []
    for i in range(n_eval):
        ks, wts, one_sided_W = _ddt_stencil(times, i, n_W - 1)
        dW_fd = float(sum(wk * W[k] for k, wk in zip(ks, wts)))
        if one_sided_W:
            warnings_.append(f"one-sided dW/dt at snapshot {i}")
        ops = state.ops_at(i)
        f = conjugate.f_from_state(state, i)
        u = state.u_fields[i]
        tau = snaps[i].tau
        vol = volume_term(ops, f, u, tau)
        bdir = boundary_term_direct(state, i)
        bhar, _, one_sided = boundary_term_harnack(state, i)
        if one_sided:
            warnings_.append(f"one-sided db/dt at snapshot {i}")
        records.append(
            {
                "t": snaps[i].t,
                "tau": tau,
                "W_beta": W[i],
                "dW_dt_fd": dW_fd,
                "volume_term": vol,
                "boundary_term_direct": bdir,
                "boundary_term_harnack": bhar,
                "identity_gap_a": abs(dW_fd - (vol + bdir)),
                "identity_gap_gradw": abs(bdir - bhar),
                "conjecture_value": bhar,
                "one_sided": bool(one_sided_W or one_sided),
            }
        )
    return HarnackReport(
        records,
        (n_eval, state.t0_index),
        meta={"skip": skip, "warnings": warnings_, "h": state.meshes[0].h},
    )


# ---------------------------------------------------------------------------
# static-grid verification of the evolution identity (Perelman form)


def _d1(a, dx, axis):
    """Fourth-order centered first derivative on a uniform grid."""
    return (
        -np.roll(a, -2, axis) + 8 * np.roll(a, -1, axis)
        - 8 * np.roll(a, 1, axis) + np.roll(a, 2, axis)
    ) / (12.0 * dx)


def _d2(a, dx, axis):
    return (
        -np.roll(a, -2, axis) + 16 * np.roll(a, -1, axis) - 30 * a
        + 16 * np.roll(a, 1, axis) - np.roll(a, 2, axis)
    ) / (12.0 * dx**2)


def _grid_fields(X, Y, tau, centers):
    u = np.zeros_like(X)
    for (cx, cy) in centers:
        u += np.exp(-((X - cx) ** 2 + (Y - cy) ** 2) / (4.0 * tau))
    u /= len(centers) * 4.0 * np.pi * tau
    f = -np.log(u) - np.log(4.0 * np.pi * tau)
    return u, f


def _grid_W(X, Y, tau, centers, dx):
    _, f = _grid_fields(X, Y, tau, centers)
    fx, fy = _d1(f, dx, 0), _d1(f, dx, 1)
    lap = _d2(f, dx, 0) + _d2(f, dx, 1)
    return tau * (2.0 * lap - (fx**2 + fy**2)) + f - 2.0, f, fx, fy


def appendix_c_residual(
    centers=((-1.0, 0.0), (1.0, 0.0)),
    tau: float = 1.0,
    half_width: float = 3.0,
    n: int = 161,
    dt: float = 1e-4,
) -> dict:
    """Residual of (d/dt + Lap) W = 2 tau |Hess f - I/2tau|^2 + 2 grad W . grad f
    for the Gaussian-mixture profile, on a static grid patch, plus the two
    intermediate identities (Bochner, and the equation for w = 2 Lap f -
    |grad f|^2 - 2/tau) the proof routes through.
    """
    x = np.linspace(-half_width, half_width, n)
    dx = x[1] - x[0]
    X, Y = np.meshgrid(x, x, indexing="ij")

    W0, f, fx, fy = _grid_W(X, Y, tau, centers, dx)
    Wp = _grid_W(X, Y, tau - dt, centers, dx)[0]  # t + dt means tau - dt
    Wm = _grid_W(X, Y, tau + dt, centers, dx)[0]
    Wt = (Wp - Wm) / (2.0 * dt)

    fxx, fyy = _d2(f, dx, 0), _d2(f, dx, 1)
    fxy = _d1(fx, dx, 1)
    lapW = _d2(W0, dx, 0) + _d2(W0, dx, 1)
    Wx, Wy = _d1(W0, dx, 0), _d1(W0, dx, 1)

    half = 1.0 / (2.0 * tau)
    hess_dev = (fxx - half) ** 2 + 2.0 * fxy**2 + (fyy - half) ** 2
    lhs = Wt + lapW
    rhs = 2.0 * tau * hess_dev + 2.0 * (Wx * fx + Wy * fy)

    m = 4 * 2  # margin: two stencil applications deep
    win = (slice(m, -m), slice(m, -m))
    perelman = float(np.abs(lhs[win] - rhs[win]).max())

    # w-equation, d/dt = partial_t - grad f . grad
    def w_of(tau_):
        Wv, f_, fx_, fy_ = _grid_W(X, Y, tau_, centers, dx)
        lap_ = _d2(f_, dx, 0) + _d2(f_, dx, 1)
        return 2.0 * lap_ - (fx_**2 + fy_**2) - 2.0 / tau_

    w0 = w_of(tau)
    wt = (w_of(tau - dt) - w_of(tau + dt)) / (2.0 * dt)
    wx, wy = _d1(w0, dx, 0), _d1(w0, dx, 1)
    lapw = _d2(w0, dx, 0) + _d2(w0, dx, 1)
    hess2 = fxx**2 + 2.0 * fxy**2 + fyy**2
    lhs_w = wt - (fx * wx + fy * wy) + lapw
    rhs_w = 2.0 * hess2 - 2.0 / tau**2 + (fx * wx + fy * wy)
    w_eq = float(np.abs(lhs_w[win] - rhs_w[win]).max())

    return {
        "perelman_identity": perelman,
        "w_equation": w_eq,
        "dx": dx,
        "window": m,
    }


def bochner_residual_cubic(half_width: float = 2.0, n: int = 41) -> float:
    """Bochner identity for f = x1^2 x2 with analytic derivatives.

    Lap |grad f|^2 = 2 |Hess f|^2 + 2 grad f . grad Lap f, every term in
    closed form, so the residual is pure floating-point arithmetic.
    """
    x = np.linspace(-half_width, half_width, n)
    X, Y = np.meshgrid(x, x, indexing="ij")
    fx, fy = 2.0 * X * Y, X**2
    fxx, fxy, fyy = 2.0 * Y, 2.0 * X, np.zeros_like(X)
    lapf = 2.0 * Y
    # |grad f|^2 = 4 x^2 y^2 + x^4; Lap of it = 8y^2 + 8x^2 + 12x^2
    lap_grad2 = 8.0 * Y**2 + 8.0 * X**2 + 12.0 * X**2
    hess2 = fxx**2 + 2.0 * fxy**2 + fyy**2
    grad_lapf = (np.zeros_like(X), 2.0 * np.ones_like(X))
    rhs = 2.0 * hess2 + 2.0 * (fx * grad_lapf[0] + fy * grad_lapf[1])
    return float(np.abs(lap_grad2 - rhs).max())

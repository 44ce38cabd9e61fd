"""Discrete differential geometry of embedded closed planar curves.

Curves are closed polylines with counter-clockwise orientation, so the
outward normal points away from the enclosed region.  Curvature uses the
turning-angle formula, which satisfies the discrete Gauss-Bonnet identity
sum(kappa_i * ds_i) = 2*pi exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np


class GeometryError(ValueError):
    """Raised for degenerate or self-intersecting curve input."""


def _as_vertex_array(vertices) -> np.ndarray:
    v = np.asarray(vertices, dtype=float)
    if v.ndim != 2 or v.shape[1] != 2:
        raise GeometryError("vertices must be an (m, 2) array")
    if v.shape[0] >= 2 and np.allclose(v[0], v[-1]):
        v = v[:-1]
    return v


def segments_intersect(p1, p2, q1, q2) -> np.ndarray:
    """Vectorized proper-intersection test for segment pairs."""

    def orient(a, b, c):
        return (b[..., 0] - a[..., 0]) * (c[..., 1] - a[..., 1]) - (
            b[..., 1] - a[..., 1]
        ) * (c[..., 0] - a[..., 0])

    d1 = orient(q1, q2, p1)
    d2 = orient(q1, q2, p2)
    d3 = orient(p1, p2, q1)
    d4 = orient(p1, p2, q2)
    return (d1 * d2 < 0) & (d3 * d4 < 0)


@dataclass
class PlanarCurve:
    """Embedded closed polyline representing the boundary of a planar region."""

    vertices: np.ndarray
    check_embedded: bool = True
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        self.vertices = _as_vertex_array(self.vertices)
        m = len(self.vertices)
        if m < 3:
            raise GeometryError("need at least 3 distinct vertices")
        if np.any(self.edge_lengths() < 1e-14):
            raise GeometryError("degenerate (zero-length) segment")
        if self.check_embedded and not self.is_embedded():
            raise GeometryError("curve is not embedded (self-intersection)")

    # -- basic queries ---------------------------------------------------

    def __len__(self) -> int:
        return len(self.vertices)

    @property
    def ccw(self) -> bool:
        return self.signed_area() > 0.0

    def edges(self) -> np.ndarray:
        v = self.vertices
        return np.roll(v, -1, axis=0) - v

    def edge_lengths(self) -> np.ndarray:
        return np.linalg.norm(self.edges(), axis=1)

    def signed_area(self) -> float:
        v = self.vertices
        w = np.roll(v, -1, axis=0)
        return 0.5 * float(np.sum(v[:, 0] * w[:, 1] - w[:, 0] * v[:, 1]))

    def enclosed_area(self) -> float:
        return abs(self.signed_area())

    def arc_length(self) -> float:
        return float(self.edge_lengths().sum())

    def centroid(self) -> np.ndarray:
        # area centroid of the enclosed polygon
        v = self.vertices
        w = np.roll(v, -1, axis=0)
        cross = v[:, 0] * w[:, 1] - w[:, 0] * v[:, 1]
        a = 0.5 * cross.sum()
        cx = np.sum((v[:, 0] + w[:, 0]) * cross) / (6.0 * a)
        cy = np.sum((v[:, 1] + w[:, 1]) * cross) / (6.0 * a)
        return np.array([cx, cy])

    def is_embedded(self) -> bool:
        """O(m^2) sweep over non-adjacent segment pairs."""
        v = self.vertices
        m = len(v)
        w = np.roll(v, -1, axis=0)
        i, j = np.triu_indices(m, k=2)
        # segments (m-1, 0) and (0, 1) are adjacent through the wrap-around
        keep = ~((i == 0) & (j == m - 1))
        i, j = i[keep], j[keep]
        hits = segments_intersect(v[i], w[i], v[j], w[j])
        return not bool(hits.any())

    # -- differential quantities ----------------------------------------

    def arc_coordinates(self) -> np.ndarray:
        """Cumulative arc length of each vertex, starting at 0."""
        ds = self.edge_lengths()
        s = np.concatenate([[0.0], np.cumsum(ds[:-1])])
        return s

    def turning_angles(self) -> np.ndarray:
        """Signed exterior angle at each vertex (positive where CCW-convex)."""
        e = self.edges()
        e_prev = np.roll(e, 1, axis=0)
        cross = e_prev[:, 0] * e[:, 1] - e_prev[:, 1] * e[:, 0]
        dot = np.sum(e_prev * e, axis=1)
        return np.arctan2(cross, dot)

    def curvature(self) -> np.ndarray:
        """Discrete curvature: turning angle over averaged adjacent edge length.

        Positive where the curve bends toward the enclosed region; for a
        CCW convex curve this gives kappa > 0 everywhere.
        """
        ds = self.vertex_weights()
        return self.turning_angles() / ds

    def vertex_weights(self) -> np.ndarray:
        """Arc-length quadrature weight per vertex (half of adjacent edges)."""
        L = self.edge_lengths()
        return 0.5 * (L + np.roll(L, 1))

    def outward_normal(self) -> np.ndarray:
        """Unit outward normals per vertex (for CCW orientation)."""
        e = self.edges()
        t = np.roll(e, 1, axis=0) + e
        t /= np.linalg.norm(t, axis=1)[:, None]
        return np.column_stack([t[:, 1], -t[:, 0]])

    def unit_tangent(self) -> np.ndarray:
        e = self.edges()
        t = np.roll(e, 1, axis=0) + e
        return t / np.linalg.norm(t, axis=1)[:, None]

    def tangential_gradient(self, values) -> np.ndarray:
        """Arc-length derivative d/ds of a per-vertex field, O(h^2) centered."""
        f = np.asarray(values, dtype=float)
        if len(f) != len(self.vertices):
            raise GeometryError("field length must equal vertex count")
        if len(f) < 3:
            raise GeometryError("need at least 3 vertices")
        L = self.edge_lengths()
        hm = np.roll(L, 1)          # |x_i - x_{i-1}|
        hp = L                      # |x_{i+1} - x_i|
        fm = np.roll(f, 1)
        fp = np.roll(f, -1)
        return (fp * hm**2 - fm * hp**2 + f * (hp**2 - hm**2)) / (
            hm * hp * (hm + hp)
        )

    def second_fundamental_quadratic(self, tangential_magnitude) -> np.ndarray:
        """A(V, V) = kappa * V^2 for a tangential field of magnitude V."""
        V = np.asarray(tangential_magnitude, dtype=float)
        return self.curvature() * V**2

    # -- construction helpers -------------------------------------------

    @staticmethod
    def circle(radius: float, m: int, center=(0.0, 0.0)) -> "PlanarCurve":
        th = 2 * np.pi * np.arange(m) / m
        v = np.column_stack(
            [center[0] + radius * np.cos(th), center[1] + radius * np.sin(th)]
        )
        return PlanarCurve(v, check_embedded=False)

    @staticmethod
    def ellipse(a: float, b: float, m: int, center=(0.0, 0.0)) -> "PlanarCurve":
        th = 2 * np.pi * np.arange(m) / m
        v = np.column_stack(
            [center[0] + a * np.cos(th), center[1] + b * np.sin(th)]
        )
        return PlanarCurve(v, check_embedded=False)

    @staticmethod
    def rectangle(x0, y0, x1, y1, m_per_side: int = 1) -> "PlanarCurve":
        def side(p, q):
            t = np.linspace(0.0, 1.0, m_per_side, endpoint=False)[:, None]
            return (1 - t) * np.asarray(p) + t * np.asarray(q)

        v = np.vstack(
            [
                side((x0, y0), (x1, y0)),
                side((x1, y0), (x1, y1)),
                side((x1, y1), (x0, y1)),
                side((x0, y1), (x0, y0)),
            ]
        )
        return PlanarCurve(v, check_embedded=False)

    def contains_points(self, points) -> np.ndarray:
        """Even-odd crossing test, vectorized over query points."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        v = self.vertices
        w = np.roll(v, -1, axis=0)
        x, y = pts[:, 0][:, None], pts[:, 1][:, None]
        x1, y1 = v[:, 0][None, :], v[:, 1][None, :]
        x2, y2 = w[:, 0][None, :], w[:, 1][None, :]
        cond = (y1 <= y) != (y2 <= y)
        with np.errstate(divide="ignore", invalid="ignore"):
            xs = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
        crossings = np.sum(cond & (x < xs), axis=1)
        return crossings % 2 == 1


# -- analytic example domains -------------------------------------------


@dataclass(frozen=True)
class AnalyticDomain:
    """Explicit domain with exact membership and boundary curvature data.

    Variants: disk(R, center), half_plane(a), slab(d, dim), grim_reaper_2d,
    grim_reaper_product(n), catenoid_3d, ball(R, dim), ellipse(a, b).
    Positive size parameters are required where applicable.
    """

    variant: str
    params: tuple = ()

    def __post_init__(self):
        sizes = {
            "disk": 1,
            "ball": 1,
            "slab": 1,
            "ellipse": 2,
        }
        n = sizes.get(self.variant)
        if n is not None:
            for p in self.params[:n]:
                if not p > 0:
                    raise GeometryError(
                        f"{self.variant} requires positive size parameters"
                    )

    # constructors
    @staticmethod
    def disk(R, center=(0.0, 0.0)):
        return AnalyticDomain("disk", (R, float(center[0]), float(center[1])))

    @staticmethod
    def half_plane(a):
        """Half-space x2 < a in the plane."""
        return AnalyticDomain("half_plane", (float(a),))

    @staticmethod
    def slab(d, dim=2):
        """|x_dim| < d in R^dim (last coordinate bounded)."""
        return AnalyticDomain("slab", (float(d), int(dim)))

    @staticmethod
    def grim_reaper_2d():
        return AnalyticDomain("grim_reaper_2d")

    @staticmethod
    def grim_reaper_product(n=1):
        """R^(n-1) x G in R^(n+1); n = 1 is the planar grim reaper region."""
        return AnalyticDomain("grim_reaper_product", (int(n),))

    @staticmethod
    def catenoid_3d():
        return AnalyticDomain("catenoid_3d")

    @staticmethod
    def ball(R, dim=3):
        return AnalyticDomain("ball", (float(R), int(dim)))

    @staticmethod
    def ellipse(a, b):
        return AnalyticDomain("ellipse", (float(a), float(b)))

    @property
    def dim(self) -> int:
        if self.variant in ("ball", "slab"):
            return int(self.params[1])
        if self.variant == "grim_reaper_product":
            return int(self.params[0]) + 1
        if self.variant == "catenoid_3d":
            return 3
        return 2

    # membership -----------------------------------------------------------

    def contains(self, points) -> np.ndarray:
        x = np.atleast_2d(np.asarray(points, dtype=float))
        if self.variant == "disk":
            R, cx, cy = self.params
            return np.hypot(x[:, 0] - cx, x[:, 1] - cy) < R
        if self.variant == "ball":
            R = self.params[0]
            return np.linalg.norm(x, axis=1) < R
        if self.variant == "half_plane":
            return x[:, -1] < self.params[0]
        if self.variant == "slab":
            return np.abs(x[:, -1]) < self.params[0]
        if self.variant == "ellipse":
            a, b = self.params
            return (x[:, 0] / a) ** 2 + (x[:, 1] / b) ** 2 < 1.0
        if self.variant in ("grim_reaper_2d", "grim_reaper_product"):
            # region G in the last two coordinates, free in the others
            xn, xz = x[:, -2], x[:, -1]
            inside = np.abs(xn) < np.pi / 2
            out = np.zeros(len(x), dtype=bool)
            out[inside] = xz[inside] > -np.log(np.cos(xn[inside]))
            return out
        if self.variant == "catenoid_3d":
            rho = np.hypot(x[:, 0], x[:, 1])
            inside = rho >= 1.0
            out = np.zeros(len(x), dtype=bool)
            out[inside] = np.abs(x[inside, 2]) <= np.arccosh(rho[inside])
            return out
        raise GeometryError(f"unknown variant {self.variant!r}")

    # boundary data --------------------------------------------------------

    def boundary_H(self, point) -> float:
        """Exact mean curvature at a boundary point, outward normal convention."""
        p = np.asarray(point, dtype=float)
        if self.variant == "disk":
            return 1.0 / self.params[0]
        if self.variant == "ball":
            R, dim = self.params
            return (dim - 1) / R
        if self.variant in ("half_plane", "slab", "catenoid_3d"):
            return 0.0
        if self.variant in ("grim_reaper_2d", "grim_reaper_product"):
            if abs(p[-2]) >= np.pi / 2:
                raise GeometryError(
                    "grim reaper boundary is parametrized over |x1| < pi/2"
                )
            return float(np.exp(-p[-1]))
        if self.variant == "ellipse":
            a, b = self.params
            th = np.arctan2(p[1] / b, p[0] / a)
            return float(
                a * b / (a**2 * np.sin(th) ** 2 + b**2 * np.cos(th) ** 2) ** 1.5
            )
        raise GeometryError(f"no boundary curvature for {self.variant!r}")

    def boundary_normal(self, point) -> np.ndarray:
        p = np.asarray(point, dtype=float)
        if self.variant == "disk":
            R, cx, cy = self.params
            d = p - np.array([cx, cy])
            return d / np.linalg.norm(d)
        if self.variant == "ball":
            return p / np.linalg.norm(p)
        if self.variant == "half_plane":
            nu = np.zeros_like(p)
            nu[-1] = 1.0
            return nu
        if self.variant == "slab":
            nu = np.zeros_like(p)
            nu[-1] = np.sign(p[-1]) or 1.0
            return nu
        if self.variant in ("grim_reaper_2d", "grim_reaper_product"):
            if abs(p[-2]) >= np.pi / 2:
                raise GeometryError(
                    "grim reaper boundary is parametrized over |x1| < pi/2"
                )
            nu = np.zeros_like(p)
            nu[-2] = np.sin(p[-2])
            nu[-1] = -np.cos(p[-2])
            return nu
        if self.variant == "ellipse":
            a, b = self.params
            g = np.array([2 * p[0] / a**2, 2 * p[1] / b**2])
            return g / np.linalg.norm(g)
        raise GeometryError(f"no boundary normal for {self.variant!r}")

    def boundary_curve(self, m: int) -> PlanarCurve:
        """Sampled boundary polyline for 2D bounded variants."""
        if self.variant == "disk":
            R, cx, cy = self.params
            return PlanarCurve.circle(R, m, center=(cx, cy))
        if self.variant == "ellipse":
            a, b = self.params
            return PlanarCurve.ellipse(a, b, m)
        raise GeometryError(f"{self.variant!r} has no bounded 2D boundary curve")


# -- domain description files -------------------------------------------


def load_domain(path_or_obj):
    """Load a domain description: polyline curve or analytic variant.

    JSON schema: {"type": "polyline", "vertices": [[x, y], ...]} or
    {"type": "analytic", "variant": "...", "params": {...}}.
    """
    if isinstance(path_or_obj, dict):
        obj = path_or_obj
    else:
        with open(path_or_obj) as fh:
            obj = json.load(fh)
    kind = obj.get("type")
    if kind == "polyline":
        return PlanarCurve(np.asarray(obj["vertices"], dtype=float))
    if kind == "analytic":
        variant = obj["variant"]
        params = obj.get("params", {})
        ctor = {
            "disk": lambda: AnalyticDomain.disk(params["R"], params.get("center", (0, 0))),
            "half_plane": lambda: AnalyticDomain.half_plane(params["a"]),
            "slab": lambda: AnalyticDomain.slab(params["d"], params.get("dim", 2)),
            "grim_reaper_2d": AnalyticDomain.grim_reaper_2d,
            "grim_reaper_product": lambda: AnalyticDomain.grim_reaper_product(
                params.get("n", 1)
            ),
            "catenoid_3d": AnalyticDomain.catenoid_3d,
            "ball": lambda: AnalyticDomain.ball(params["R"], params.get("dim", 3)),
            "ellipse": lambda: AnalyticDomain.ellipse(params["a"], params["b"]),
        }.get(variant)
        if ctor is None:
            raise GeometryError(f"unknown analytic variant {variant!r}")
        return ctor()
    raise GeometryError(f"unknown domain type {kind!r}")

"""Triangulation of star-shaped domains.

Boundary vertices sit exactly on the curve at stored parameters ``theta`` so that
normals and curvature can always be taken from the curve itself.  Interior
nodes are relaxed with a spring (DistMesh-style) iteration and the final
connectivity is the Delaunay triangulation restricted to the domain.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import Delaunay, cKDTree

from .geometry import BoundaryCurve, BoundaryLocator, area_perimeter, theta_grid

MIN_ANGLE_DEG = 20.0


class MeshingError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class Mesh:
    vertices: np.ndarray          # (nv, 2)
    triangles: np.ndarray         # (nt, 3), counterclockwise
    boundary_vertices: np.ndarray  # (nb,) loop order, counterclockwise
    boundary_thetas: np.ndarray   # (nb,) curve parameter of each boundary vertex, increasing
    curve: BoundaryCurve
    h_max: float

    @property
    def boundary_edges(self) -> np.ndarray:
        bv = self.boundary_vertices
        return np.stack([bv, np.roll(bv, -1)], axis=1)

    @property
    def boundary_edge_thetas(self) -> np.ndarray:
        t = self.boundary_thetas
        t_next = np.roll(t, -1)
        t_next[-1] += 2 * np.pi
        return np.stack([t, t_next], axis=1)

    @property
    def boundary_normals(self) -> np.ndarray:
        """Outward curve normal at the parameter midpoint of each boundary edge."""
        return self.curve.normal(self.boundary_edge_thetas.mean(axis=1))

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    def triangle_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        e1, e2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    def area(self) -> float:
        return float(self.triangle_areas().sum())

    def boundary_length(self) -> float:
        e = self.vertices[self.boundary_edges]
        return float(np.linalg.norm(e[:, 1] - e[:, 0], axis=1).sum())

    def min_angle(self) -> float:
        """Smallest interior angle in degrees."""
        return float(np.degrees(triangle_angles(self.vertices, self.triangles).min()))

    def edges(self) -> np.ndarray:
        e = np.concatenate([self.triangles[:, [0, 1]], self.triangles[:, [1, 2]],
                            self.triangles[:, [2, 0]]])
        return np.unique(np.sort(e, axis=1), axis=0)

    def euler_characteristic(self) -> int:
        return self.n_vertices - len(self.edges()) + len(self.triangles)

    def mean_edge_length(self) -> float:
        e = self.edges()
        return float(np.linalg.norm(self.vertices[e[:, 1]] - self.vertices[e[:, 0]], axis=1).mean())

    # -- serialization -------------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "vertices": self.vertices.tolist(),
            "triangles": self.triangles.tolist(),
            "boundary_edges": self.boundary_edges.tolist(),
            "boundary_thetas": self.boundary_thetas.tolist(),
            "h_max": self.h_max,
            "curve": self.curve.to_dict(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "Mesh":
        edges = np.asarray(d["boundary_edges"], dtype=np.int64)
        bv = edges[:, 0]
        if not np.array_equal(np.roll(bv, -1), edges[:, 1]):
            raise MeshingError("boundary edges do not form an ordered loop")
        return cls(np.asarray(d["vertices"], dtype=float),
                   np.asarray(d["triangles"], dtype=np.int64), bv,
                   np.asarray(d["boundary_thetas"], dtype=float),
                   BoundaryCurve.from_dict(d["curve"]), float(d["h_max"]))

    @classmethod
    def from_json(cls, text: str) -> "Mesh":
        return cls.from_dict(json.loads(text))


def triangle_angles(p: np.ndarray, tri: np.ndarray) -> np.ndarray:
    x = p[tri]
    out = []
    for i in range(3):
        a = x[:, (i + 1) % 3] - x[:, i]
        b = x[:, (i + 2) % 3] - x[:, i]
        cosang = np.einsum("ij,ij->i", a, b) / (np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1))
        out.append(np.arccos(np.clip(cosang, -1.0, 1.0)))
    return np.stack(out, axis=1)


def check_mesh(mesh: Mesh, min_angle: float = MIN_ANGLE_DEG) -> list[str]:
    """Return a list of violated invariants (empty when the mesh is valid)."""
    problems = []
    if np.any(mesh.triangle_areas() <= 0):
        problems.append("non-positive triangle area")
    ang = mesh.min_angle()
    if ang < min_angle:
        problems.append(f"minimum angle {ang:.2f} deg < {min_angle}")
    pts = mesh.curve.point(mesh.boundary_thetas)
    off = np.abs(pts - mesh.vertices[mesh.boundary_vertices]).max()
    if off > 1e-12 * mesh.curve.a0:
        problems.append(f"boundary vertex off curve by {off:.3g}")
    # boundary loop = edges used by exactly one triangle
    e = np.sort(np.concatenate([mesh.triangles[:, [0, 1]], mesh.triangles[:, [1, 2]],
                                mesh.triangles[:, [2, 0]]]), axis=1)
    uniq, counts = np.unique(e, axis=0, return_counts=True)
    single = {tuple(x) for x in uniq[counts == 1]}
    loop = {tuple(sorted(x)) for x in mesh.boundary_edges.tolist()}
    if single != loop:
        problems.append("boundary edges do not match the triangulation's free edges")
    if np.any(counts > 2):
        problems.append("non-manifold edge")
    if mesh.euler_characteristic() != 1:
        problems.append(f"Euler characteristic {mesh.euler_characteristic()} != 1")
    return problems


# ---------------------------------------------------------------------------
# construction
# ---------------------------------------------------------------------------

def _arclength_thetas(curve: BoundaryCurve, n: int) -> np.ndarray:
    """n parameters, starting at 0, equally spaced in arclength."""
    m = 64 * n
    th = np.linspace(0.0, 2 * np.pi, m + 1)
    sp = curve.speed(th)
    s = np.concatenate([[0.0], np.cumsum(0.5 * (sp[1:] + sp[:-1]) * np.diff(th))])
    target = np.arange(n) * s[-1] / n
    return np.interp(target, s, th)


def _hex_lattice(lo, hi, h):
    dy = h * math.sqrt(3) / 2
    ys = np.arange(lo[1], hi[1] + dy, dy)
    rows = []
    for j, y in enumerate(ys):
        xs = np.arange(lo[0] + (0.5 * h if j % 2 else 0.0), hi[0] + h, h)
        rows.append(np.column_stack([xs, np.full_like(xs, y)]))
    return np.concatenate(rows)


def _radial_gap(curve, pts):
    d = pts - np.asarray(curve.center)
    return curve.radius(np.arctan2(d[:, 1], d[:, 0])) - np.hypot(d[:, 0], d[:, 1])


def _inside_triangles(curve, pts, tri):
    cen = pts[tri].mean(axis=1)
    return tri[curve.contains(cen)]


def _orient(pts, tri):
    p = pts[tri]
    e1, e2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
    neg = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0] < 0
    tri = tri.copy()
    tri[neg] = tri[neg][:, [0, 2, 1]]
    return tri


def _bars(tri):
    e = np.concatenate([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [2, 0]]])
    return np.unique(np.sort(e, axis=1), axis=0)


def _drop_encroaching(bpts, ipts):
    """Remove interior points inside the diametral circle of a boundary segment."""
    if len(ipts) == 0:
        return ipts
    a, b = bpts, np.roll(bpts, -1, axis=0)
    mid, half = 0.5 * (a + b), 0.5 * np.linalg.norm(b - a, axis=1)
    tree = cKDTree(ipts)
    bad = set()
    for m, r in zip(mid, half):
        bad.update(tree.query_ball_point(m, r * 1.05))
    keep = np.ones(len(ipts), dtype=bool)
    keep[sorted(bad)] = False
    return ipts[keep]


def triangulate(curve: BoundaryCurve, h_max: float, max_iter: int = 150) -> Mesh:
    """Quality triangulation with boundary edge length <= h_max."""
    if not h_max > 0 or h_max > curve.a0 / 4:
        raise ValueError(f"h_max must be in (0, a0/4], got {h_max}")
    curve.check_star_shaped()
    _, perim = area_perimeter(curve, 2048)
    nb = int(math.ceil(perim / h_max))
    thetas = _arclength_thetas(curve, nb)
    bpts = curve.point(thetas)
    h0 = perim / nb

    dense = curve.point(theta_grid(max(4096, 8 * nb)))
    lo, hi = dense.min(axis=0), dense.max(axis=0)
    ipts = _hex_lattice(lo, hi, h0)
    ipts = ipts[curve.contains(ipts)]
    locator = BoundaryLocator(curve, max(4096, 8 * nb))
    th_d = theta_grid(4096)
    slope = float(np.min(curve.radius(th_d) / curve.speed(th_d)))
    ipts = ipts[locator.distance(ipts) > 0.55 * h0]

    nbp = len(bpts)
    pts = np.concatenate([bpts, ipts])
    ref = pts.copy()
    tri = None
    for _ in range(max_iter):
        if tri is None or np.max(np.linalg.norm(pts - ref, axis=1)) > 0.1 * h0:
            ref = pts.copy()
            tri = _inside_triangles(curve, pts, Delaunay(pts).simplices)
            bars = _bars(tri)
        vec = pts[bars[:, 0]] - pts[bars[:, 1]]
        L = np.linalg.norm(vec, axis=1)
        L0 = 1.2 * math.sqrt(np.sum(L * L) / len(L))
        F = np.maximum(L0 - L, 0.0)
        fv = (F / L)[:, None] * vec
        force = np.zeros_like(pts)
        np.add.at(force, bars[:, 0], fv)
        np.add.at(force, bars[:, 1], -fv)
        force[:nbp] = 0.0
        move = 0.2 * force
        pts = pts + move
        # keep interior nodes at least ~h0/3 away from the boundary
        inner = pts[nbp:]
        gap = _radial_gap(curve, inner)
        bad = gap <= 0
        near = (~bad) & (gap < 0.7 * h0 / slope)
        if np.any(near):
            bad[near] = locator.distance(inner[near], newton_steps=2) < 0.35 * h0
        if np.any(bad):
            c = np.asarray(curve.center)
            v = inner[bad] - c
            rho = np.linalg.norm(v, axis=1)
            th = np.arctan2(v[:, 1], v[:, 0])
            target = curve.radius(th) - 0.4 * h0
            inner[bad] = c + v * (np.maximum(target, 0.5 * rho) / rho)[:, None]
            pts[nbp:] = inner
        if np.max(np.linalg.norm(move[nbp:], axis=1), initial=0.0) < 1e-3 * h0:
            break

    ipts = _drop_encroaching(bpts, pts[nbp:])
    mesh = _finish(curve, bpts, thetas, ipts, h_max)
    for _ in range(5):
        if mesh.min_angle() >= MIN_ANGLE_DEG:
            break
        mesh = _smooth(mesh)
    problems = check_mesh(mesh)
    if problems:
        raise MeshingError(f"triangulate(h_max={h_max}) failed: {'; '.join(problems)}")
    return mesh


def _finish(curve, bpts, thetas, ipts, h_max) -> Mesh:
    pts = np.concatenate([bpts, ipts])
    tri = _orient(pts, _inside_triangles(curve, pts, Delaunay(pts).simplices))
    used = np.zeros(len(pts), dtype=bool)
    used[tri.ravel()] = True
    if not used[: len(bpts)].all():
        raise MeshingError("boundary vertex dropped by the triangulation")
    # drop orphan interior points and renumber
    new = -np.ones(len(pts), dtype=np.int64)
    new[used] = np.arange(used.sum())
    return Mesh(pts[used], new[tri], np.arange(len(bpts)), np.asarray(thetas, dtype=float),
                curve, float(h_max))


def _smooth(mesh: Mesh) -> Mesh:
    """One Laplacian pass over interior nodes, then re-triangulate."""
    nb = len(mesh.boundary_vertices)
    e = mesh.edges()
    pts = mesh.vertices
    acc = np.zeros_like(pts)
    cnt = np.zeros(len(pts))
    np.add.at(acc, e[:, 0], pts[e[:, 1]])
    np.add.at(acc, e[:, 1], pts[e[:, 0]])
    np.add.at(cnt, e[:, 0], 1)
    np.add.at(cnt, e[:, 1], 1)
    new = pts.copy()
    new[nb:] = acc[nb:] / cnt[nb:, None]
    ipts = _drop_encroaching(pts[:nb], new[nb:])
    return _finish(mesh.curve, pts[:nb], mesh.boundary_thetas, ipts, mesh.h_max)


def refine(mesh: Mesh) -> Mesh:
    """Uniform red refinement; boundary midpoints are placed on the curve."""
    tri = mesh.triangles
    nv = mesh.n_vertices
    e_all = np.concatenate([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [2, 0]]])
    edges, inv = np.unique(np.sort(e_all, axis=1), axis=0, return_inverse=True)
    inv = inv.reshape(3, -1).T  # per-triangle local edges (01, 12, 20)
    mid = 0.5 * (mesh.vertices[edges[:, 0]] + mesh.vertices[edges[:, 1]])

    be = mesh.boundary_edges
    bth = mesh.boundary_edge_thetas.mean(axis=1)
    edge_id = {tuple(x): i for i, x in enumerate(edges.tolist())}
    b_mid_idx = np.array([edge_id[(min(a, b), max(a, b))] for a, b in be.tolist()])
    mid[b_mid_idx] = mesh.curve.point(bth)

    verts = np.concatenate([mesh.vertices, mid])
    m = nv + inv
    v0, v1, v2 = tri[:, 0], tri[:, 1], tri[:, 2]
    m01, m12, m20 = m[:, 0], m[:, 1], m[:, 2]
    new_tri = np.concatenate([
        np.stack([v0, m01, m20], axis=1),
        np.stack([m01, v1, m12], axis=1),
        np.stack([m20, m12, v2], axis=1),
        np.stack([m01, m12, m20], axis=1),
    ])
    nb = len(be)
    bv = np.empty(2 * nb, dtype=np.int64)
    bv[0::2] = mesh.boundary_vertices
    bv[1::2] = nv + b_mid_idx
    bt = np.empty(2 * nb)
    bt[0::2] = mesh.boundary_thetas
    bt[1::2] = bth
    return Mesh(verts, new_tri, bv, bt, mesh.curve, mesh.h_max / 2)

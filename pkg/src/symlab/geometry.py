"""Star-shaped planar domains described by a truncated Fourier radius.

The boundary is ``x(theta) = center + r(theta) * (cos theta, sin theta)`` with
``r(theta) = a0 + sum_k c_k cos(k theta) + s_k sin(k theta)``, ``k >= 1``.
Curvature is taken with respect to the inner normal, so convex arcs have
positive curvature and a circle of radius rho has curvature 1/rho.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize
from scipy.spatial import cKDTree

N_DIM = 2


class InvalidCurveError(ValueError):
    pass


class StarShapednessError(ValueError):
    pass


@dataclass(frozen=True)
class BoundaryCurve:
    a0: float
    cos_coeffs: tuple[float, ...] = ()
    sin_coeffs: tuple[float, ...] = ()
    center: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        object.__setattr__(self, "a0", float(self.a0))
        object.__setattr__(self, "cos_coeffs", tuple(float(c) for c in self.cos_coeffs))
        object.__setattr__(self, "sin_coeffs", tuple(float(s) for s in self.sin_coeffs))
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        values = (self.a0, *self.cos_coeffs, *self.sin_coeffs, *self.center)
        if not all(math.isfinite(v) for v in values):
            raise InvalidCurveError("non-finite Fourier data")
        if len(self.center) != 2:
            raise InvalidCurveError("center must be a 2-vector")
        if self.a0 <= 0:
            raise InvalidCurveError("a0 must be positive")

    # -- construction helpers ------------------------------------------------
    @classmethod
    def circle(cls, radius: float = 1.0, center=(0.0, 0.0)) -> "BoundaryCurve":
        return cls(radius, (), (), center)

    @classmethod
    def mode(cls, k: int, eps: float, a0: float = 1.0, center=(0.0, 0.0)) -> "BoundaryCurve":
        """``r = a0 + eps cos(k theta)``."""
        coeffs = [0.0] * k
        coeffs[k - 1] = eps
        return cls(a0, tuple(coeffs), (), center)

    def translated(self, shift) -> "BoundaryCurve":
        c = np.asarray(self.center) + np.asarray(shift, dtype=float)
        return BoundaryCurve(self.a0, self.cos_coeffs, self.sin_coeffs, tuple(c))

    def scaled(self, lam: float) -> "BoundaryCurve":
        """Image under ``x -> lam x`` (the center moves as well)."""
        return BoundaryCurve(
            lam * self.a0,
            tuple(lam * c for c in self.cos_coeffs),
            tuple(lam * s for s in self.sin_coeffs),
            tuple(lam * c for c in self.center),
        )

    @property
    def is_circle(self) -> bool:
        return all(abs(c) < 1e-12 for c in (*self.cos_coeffs, *self.sin_coeffs))

    # -- serialization -------------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "a0": self.a0,
            "cos": list(self.cos_coeffs),
            "sin": list(self.sin_coeffs),
            "center": list(self.center),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BoundaryCurve":
        unknown = set(d) - {"a0", "cos", "sin", "center"}
        if unknown:
            raise InvalidCurveError(f"unknown curve keys: {sorted(unknown)}")
        if "a0" not in d:
            raise InvalidCurveError("curve needs 'a0'")
        try:
            return cls(d["a0"], tuple(d.get("cos", ())), tuple(d.get("sin", ())),
                       tuple(d.get("center", (0.0, 0.0))))
        except TypeError as exc:
            raise InvalidCurveError(str(exc)) from None

    # -- radius and derivatives ----------------------------------------------
    def _modes(self):
        kc = np.arange(1, len(self.cos_coeffs) + 1, dtype=float)
        ks = np.arange(1, len(self.sin_coeffs) + 1, dtype=float)
        return kc, np.asarray(self.cos_coeffs), ks, np.asarray(self.sin_coeffs)

    def radius(self, theta, order: int = 0):
        """``d^order r / d theta^order`` for order in 0..3."""
        theta = np.asarray(theta, dtype=float)
        kc, c, ks, s = self._modes()
        out = np.full(theta.shape, self.a0 if order == 0 else 0.0)
        if kc.size:
            arg = np.multiply.outer(theta, kc)
            # derivative of cos(k t): cycle cos, -sin, -cos, sin
            trig = [np.cos, lambda x: -np.sin(x), lambda x: -np.cos(x), np.sin][order % 4]
            out = out + trig(arg) @ (c * kc**order)
        if ks.size:
            arg = np.multiply.outer(theta, ks)
            trig = [np.sin, np.cos, lambda x: -np.sin(x), lambda x: -np.cos(x)][order % 4]
            out = out + trig(arg) @ (s * ks**order)
        return out

    def point(self, theta):
        theta = np.asarray(theta, dtype=float)
        r = self.radius(theta)
        return np.stack([self.center[0] + r * np.cos(theta),
                         self.center[1] + r * np.sin(theta)], axis=-1)

    def derivatives(self, theta):
        """Position and its first two theta-derivatives."""
        theta = np.asarray(theta, dtype=float)
        r, r1, r2 = (self.radius(theta, k) for k in range(3))
        c, s = np.cos(theta), np.sin(theta)
        p = np.stack([self.center[0] + r * c, self.center[1] + r * s], axis=-1)
        d1 = np.stack([r1 * c - r * s, r1 * s + r * c], axis=-1)
        d2 = np.stack([(r2 - r) * c - 2 * r1 * s, (r2 - r) * s + 2 * r1 * c], axis=-1)
        return p, d1, d2

    def speed(self, theta):
        r, r1 = self.radius(theta), self.radius(theta, 1)
        return np.sqrt(r * r + r1 * r1)

    def curvature(self, theta):
        r, r1, r2 = (self.radius(theta, k) for k in range(3))
        return (r * r + 2 * r1 * r1 - r * r2) / (r * r + r1 * r1) ** 1.5

    def normal(self, theta):
        """Outward unit normal."""
        _, d1, _ = self.derivatives(theta)
        t = d1 / np.linalg.norm(d1, axis=-1, keepdims=True)
        return np.stack([t[..., 1], -t[..., 0]], axis=-1)

    def contains(self, pts) -> np.ndarray:
        """Strict interior test (star-shaped about center)."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        d = pts - np.asarray(self.center)
        rho = np.hypot(d[:, 0], d[:, 1])
        return rho < self.radius(np.arctan2(d[:, 1], d[:, 0]))

    def check_star_shaped(self, n: int = 4096):
        r = self.radius(np.linspace(0.0, 2 * np.pi, n, endpoint=False))
        if np.min(r) <= 0:
            raise StarShapednessError(f"r(theta) <= 0 somewhere (min {np.min(r):.3g})")


def theta_grid(n: int) -> np.ndarray:
    return np.linspace(0.0, 2 * np.pi, n, endpoint=False)


def eval_boundary(curve: BoundaryCurve, theta):
    """Point, unit tangent, outward unit normal and curvature at ``theta``."""
    p, d1, _ = curve.derivatives(theta)
    t = d1 / np.linalg.norm(d1, axis=-1, keepdims=True)
    nrm = np.stack([t[..., 1], -t[..., 0]], axis=-1)
    return p, t, nrm, curve.curvature(theta)


# ---------------------------------------------------------------------------
# global quantities
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GeometrySummary:
    area: float
    perimeter: float
    R: float
    H0: float
    diameter: float
    r_i: float
    r_e: float  # inf when no exterior ball ever re-touches (convex case)

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        return {k: (v if math.isfinite(v) else None) for k, v in d.items()}


def area_perimeter(curve: BoundaryCurve, n: int = 2048) -> tuple[float, float]:
    th = theta_grid(n)
    r = curve.radius(th)
    w = 2 * np.pi / n
    return 0.5 * w * float(np.sum(r * r)), w * float(np.sum(curve.speed(th)))


def touching_radii(curve: BoundaryCurve, n: int = 2048) -> tuple[float, float]:
    """Sampled uniform interior/exterior touching radii.

    For a sample p with unit normal m (inner for r_i, outer for r_e), the largest
    ball tangent at p on that side has radius ``min_x |x-p|^2 / (2 (x-p).m)`` over
    the other samples with ``(x-p).m > 0``; the local limit 1/|kappa| enters when
    the boundary bends towards that side.
    """
    th = theta_grid(n)
    p, _, nu, kappa = eval_boundary(curve, th)
    scale = curve.a0
    out = []
    for sign in (-1.0, 1.0):  # -1: interior side, +1: exterior side
        m = sign * nu
        best = np.full(n, np.inf)
        # row blocks keep the pairwise arrays small
        for lo in range(0, n, 512):
            hi = min(lo + 512, n)
            d = p[None, :, :] - p[lo:hi, None, :]
            proj = np.einsum("ijk,ik->ij", d, m[lo:hi])
            dist2 = np.einsum("ijk,ijk->ij", d, d)
            ok = proj > 1e-13 * scale * np.sqrt(dist2)
            ratio = np.where(ok, dist2 / (2 * np.where(ok, proj, 1.0)), np.inf)
            best[lo:hi] = ratio.min(axis=1)
        k_side = -sign * kappa  # curvature bending toward the side
        local = np.where(k_side > 0, 1.0 / np.where(k_side > 0, k_side, 1.0), np.inf)
        out.append(float(np.min(np.minimum(best, local))))
    return out[0], out[1]


def diameter(curve: BoundaryCurve, n: int = 1024) -> float:
    th = theta_grid(n)
    p = curve.point(th)
    d2 = np.sum((p[:, None, :] - p[None, :, :]) ** 2, axis=-1)
    i, j = np.unravel_index(np.argmax(d2), d2.shape)

    def neg(t):
        a, b = curve.point(np.array(t))
        return -float(np.sum((a - b) ** 2))

    res = optimize.minimize(neg, x0=[th[i], th[j]], method="Nelder-Mead",
                            options={"xatol": 1e-12, "fatol": 1e-15, "maxiter": 400})
    return math.sqrt(max(-res.fun, d2[i, j]))


def geometry_summary(curve: BoundaryCurve, n_samples: int = 2048) -> GeometrySummary:
    if n_samples < 64:
        raise ValueError("n_samples must be >= 64")
    curve.check_star_shaped(max(n_samples, 1024))
    area, perim = area_perimeter(curve, n_samples)
    R = N_DIM * area / perim
    r_i, r_e = touching_radii(curve, n_samples)
    return GeometrySummary(area, perim, R, 1.0 / R, diameter(curve, min(n_samples, 2048)),
                           r_i, r_e)


# ---------------------------------------------------------------------------
# distances from a point
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RadiiAtPoint:
    z: tuple[float, float]
    rho_i: float
    rho_e: float
    delta_gamma: float
    interior: bool


def radii_at(curve: BoundaryCurve, z, n: int = 4096) -> RadiiAtPoint:
    """Min/max distance from ``z`` to the boundary, refined by 1-D searches."""
    z = np.asarray(z, dtype=float)
    th = theta_grid(n)
    dist = np.linalg.norm(curve.point(th) - z, axis=-1)
    step = 2 * np.pi / n

    def refine(i0, sign):
        f = lambda t: sign * float(np.linalg.norm(curve.point(np.array(t)) - z))
        res = optimize.minimize_scalar(f, bounds=(th[i0] - 2 * step, th[i0] + 2 * step),
                                       method="bounded", options={"xatol": 1e-13})
        return float(min(sign * res.fun, sign * dist[i0]) * sign)

    rho_i = refine(int(np.argmin(dist)), 1.0)
    rho_e = refine(int(np.argmax(dist)), -1.0)
    inside = bool(curve.contains(z[None, :])[0])
    return RadiiAtPoint((float(z[0]), float(z[1])), rho_i, rho_e, rho_i, inside)


class BoundaryLocator:
    """Nearest-point queries against a curve (KD-tree seed + Newton on theta)."""

    def __init__(self, curve: BoundaryCurve, n: int = 4096):
        self.curve = curve
        self.theta = theta_grid(n)
        self.step = 2 * np.pi / n
        self.tree = cKDTree(curve.point(self.theta))

    def closest_theta(self, pts, newton_steps: int = 4) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        _, idx = self.tree.query(pts)
        t0 = self.theta[idx]
        t = t0.copy()
        for _ in range(newton_steps):
            p, d1, d2 = self.curve.derivatives(t)
            diff = p - pts
            g = np.einsum("ij,ij->i", diff, d1)
            hess = np.einsum("ij,ij->i", d1, d1) + np.einsum("ij,ij->i", diff, d2)
            dt = np.where(hess > 0, -g / np.where(hess > 0, hess, 1.0), 0.0)
            t = np.clip(t + dt, t0 - 2 * self.step, t0 + 2 * self.step)
        return t

    def distance(self, pts, newton_steps: int = 4) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        t = self.closest_theta(pts, newton_steps)
        return np.linalg.norm(self.curve.point(t) - pts, axis=-1)


def distance_to_boundary(curve: BoundaryCurve, pts, n: int = 4096, newton_steps: int = 4):
    """Euclidean distance from each point to the curve."""
    return BoundaryLocator(curve, n).distance(pts, newton_steps)


# ---------------------------------------------------------------------------
# asymmetry
# ---------------------------------------------------------------------------

def _sector_area(p, q, rad):
    ang = np.arctan2(p[..., 0] * q[..., 1] - p[..., 1] * q[..., 0],
                     np.einsum("...k,...k->...", p, q))
    return 0.5 * rad * rad * ang


def polygon_disk_intersection_area(poly, center, rad) -> np.ndarray:
    """Area of (simple CCW polygon) ∩ disk, exact for the polygon.

    ``center`` may be an array of shape (m, 2); the result then has shape (m,).
    Each edge contributes the signed area of triangle(center, a, b) ∩ disk.
    """
    poly = np.asarray(poly, dtype=float)
    c = np.atleast_2d(np.asarray(center, dtype=float))
    a = poly[None, :, :] - c[:, None, :]
    b = np.roll(poly, -1, axis=0)[None, :, :] - c[:, None, :]
    d = b - a
    qa = np.einsum("...k,...k->...", d, d)
    qb = np.einsum("...k,...k->...", a, d)
    qc = np.einsum("...k,...k->...", a, a) - rad * rad
    disc = qb * qb - qa * qc
    sq = np.sqrt(np.maximum(disc, 0.0))
    safe = np.where(qa > 0, qa, 1.0)
    t1 = np.where(disc > 0, (-qb - sq) / safe, 1.0)
    t2 = np.where(disc > 0, (-qb + sq) / safe, 1.0)
    s1 = np.clip(t1, 0.0, 1.0)[..., None]
    s2 = np.clip(t2, 0.0, 1.0)[..., None]
    p1 = a + s1 * d
    p2 = a + s2 * d
    tri = 0.5 * (p1[..., 0] * p2[..., 1] - p1[..., 1] * p2[..., 0])
    total = _sector_area(a, p1, rad) + tri + _sector_area(p2, b, rad)
    out = total.sum(axis=-1)
    return out if np.ndim(center) > 1 else out[0]


def polygon_area(poly) -> float:
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def symmetric_difference_ratio(poly, center, rad):
    """|Ω Δ B_rad(center)| / |B_rad| for the polygonal Ω."""
    inter = polygon_disk_intersection_area(poly, center, rad)
    disk = math.pi * rad * rad
    return (polygon_area(poly) + disk - 2 * inter) / disk


@dataclass(frozen=True)
class AsymmetryResult:
    value: float
    center: tuple[float, float]
    converged: bool
    notes: tuple[str, ...] = field(default=())

    def __float__(self):
        return self.value


def asymmetry(curve: BoundaryCurve, R: float, n_poly: int = 8192,
              xtol: float = 1e-8) -> AsymmetryResult:
    """inf over centers x of |Ω Δ B_R(x)| / |B_R(x)|.

    Coarse grid (step R/10) over the bounding box, then Nelder-Mead.
    """
    if not R > 0:
        raise ValueError("R must be positive")
    poly = curve.point(theta_grid(n_poly))
    lo, hi = poly.min(axis=0), poly.max(axis=0)
    step = R / 10
    gx = np.arange(lo[0], hi[0] + 0.5 * step, step)
    gy = np.arange(lo[1], hi[1] + 0.5 * step, step)
    cand = np.array([(x, y) for x in gx for y in gy])  # lexicographic order
    cand = cand[curve.contains(cand)]
    if cand.size == 0:
        cand = np.asarray(curve.center, dtype=float)[None, :]
    vals = np.concatenate([symmetric_difference_ratio(poly, cand[i:i + 256], R)
                           for i in range(0, len(cand), 256)])
    best = cand[int(np.argmin(vals))]
    f = lambda x: float(symmetric_difference_ratio(poly, x, R))
    res = optimize.minimize(f, best, method="Nelder-Mead",
                            options={"xatol": xtol, "fatol": 1e-15, "maxiter": 2000,
                                     "initial_simplex": np.array([best, best + [step, 0],
                                                                  best + [0, step]])})
    notes = ()
    if not res.success:
        warnings.warn(f"asymmetry optimizer: {res.message}", RuntimeWarning)
        notes = (str(res.message),)
    x = res.x if res.fun <= np.min(vals) else best
    value = max(min(float(res.fun), float(np.min(vals))), 0.0)
    return AsymmetryResult(value, (float(x[0]), float(x[1])), bool(res.success), notes)

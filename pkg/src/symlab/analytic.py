"""Closed-form radial solutions and arithmetic desk checks, in any dimension."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate


class ParameterError(ValueError):
    pass


def unit_ball_volume(n: int) -> float:
    return math.pi ** (n / 2) / math.gamma(n / 2 + 1)


def sphere_area(n: int) -> float:
    """``ω_N = N |B_1|``, the measure of the unit sphere in R^N."""
    return n * unit_ball_volume(n)


# ---------------------------------------------------------------------------
# radial solutions
# ---------------------------------------------------------------------------

def _d1(f, r, h):
    """Fourth-order central difference."""
    return (f(r - 2 * h) - 8 * f(r - h) + 8 * f(r + h) - f(r + 2 * h)) / (12 * h)


@dataclass(frozen=True)
class RadialSolution:
    """``value(r)`` and ``deriv(r)`` of a radial function solving
    ``(r^{N-1} |u'|^{p-2} u')' = source · r^{N-1}``.
    """
    N: int
    kind: str
    params: dict
    value: Callable = field(repr=False)
    deriv: Callable = field(repr=False)
    p: float = 2.0
    source: float = 0.0

    def flux(self, r):
        d = self.deriv(r)
        return np.asarray(r, float) ** (self.N - 1) * np.abs(d) ** (self.p - 2) * d

    def ode_residual(self, r, rel_step: float = 1e-3) -> np.ndarray:
        """Residual of the divergence-form ODE, scaled by the local flux size.

        The flux is differenced with a fourth-order stencil.
        """
        r = np.asarray(r, float)
        h = rel_step * r
        lhs = _d1(self.flux, r, h) / r ** (self.N - 1)
        scale = np.maximum(np.abs(self.flux(r)) / r**self.N, abs(self.source))
        scale = np.where(scale > 0, scale, 1.0)
        return (lhs - self.source) / scale

    def derivative_mismatch(self, r, rel_step: float = 1e-4) -> np.ndarray:
        """Closed-form derivative against finite differences of the value."""
        r = np.asarray(r, float)
        fd = _d1(self.value, r, rel_step * r)
        d = self.deriv(r)
        return np.abs(fd - d) / np.maximum(np.abs(d), 1.0)


def ball_torsion(N: int, rho: float) -> RadialSolution:
    if N < 1 or not rho > 0:
        raise ParameterError("need N >= 1 and rho > 0")
    return RadialSolution(N, "ball-torsion", {"rho": rho},
                          lambda r: 0.5 * (np.asarray(r, float) ** 2 - rho**2),
                          lambda r: np.asarray(r, float), 2.0, float(N))


def annulus_torsion(N: int, r: float, R: float) -> RadialSolution:
    """Torsion function of the annulus ``r < |x| < R`` vanishing on both spheres."""
    if N < 2:
        raise ParameterError("N must be >= 2")
    if not (0 < r < R):
        raise ParameterError("need 0 < r < R")
    k = r / R
    if N == 2:
        c = 0.5 * R**2 * (1 - k**2) / math.log(k)
        val = lambda x: 0.5 * np.asarray(x, float) ** 2 + c * np.log(np.asarray(x, float) / r) - 0.5 * r**2
        der = lambda x: np.asarray(x, float) + c / np.asarray(x, float)
    else:
        c = 0.5 * R**2 / (1 - k ** (N - 2))
        val = lambda x: (0.5 * np.asarray(x, float) ** 2
                         + c * ((1 - k**2) * (np.asarray(x, float) / r) ** (2 - N) + k**N - 1))
        der = lambda x: (np.asarray(x, float)
                         + c * (1 - k**2) * (2 - N) * (np.asarray(x, float) / r) ** (1 - N) / r)
    return RadialSolution(N, "annulus-torsion", {"r": r, "R": R}, val, der, 2.0, float(N))


def annulus_inner_flux(N: int, r: float, R: float) -> float:
    """Normal derivative on the inner sphere, normal pointing to the center."""
    return float(-annulus_torsion(N, r, R).deriv(r))


def f_kappa(N: int, k, variant: str = "printed"):
    """Profile ``f(κ)`` with ``w_ν = R(R−r)/r · f(κ)`` on the inner sphere.

    ``variant="printed"`` is the reference closed form.  For N = 2 the
    ``"corrected"`` variant flips the sign of the numerator, which makes it agree
    with the annulus solution and with the N → 2 limit of the N ≥ 3 formula.
    """
    k = np.asarray(k, float)
    if N == 2:
        L = np.log(1 / k)
        num = 2 * k**2 * L + k**2 - 1
        if variant == "corrected":
            num = -num
        elif variant != "printed":
            raise ValueError(variant)
        return num / (2 * (1 - k) * L)
    return (2 * k**N - N * k**2 + N - 2) / (2 * (1 - k) * (1 - k ** (N - 2)))


def f_kappa_limits(N: int, variant: str = "printed") -> tuple[float, float]:
    """Limits of ``f`` at κ → 0⁺ and κ → 1⁻ (from series expansions)."""
    if N == 2:
        s = -1.0 if variant == "printed" else 1.0
        return 0.0, s * 1.0
    return (N - 2) / 2, N / 2


@dataclass(frozen=True)
class GradientConstant:
    N: int
    variant: str
    sup: float
    argsup: float
    attained_at_endpoint: bool
    claimed: float

    @property
    def matches_claim(self) -> bool:
        return abs(self.sup - self.claimed) <= 1e-3


def gradient_bound_constant(N: int, step: float = 1e-4, variant: str = "printed") -> GradientConstant:
    """``sup_{0<κ<1} f(κ)`` on a uniform grid plus the endpoint limits."""
    if step > 1e-4:
        raise ParameterError("grid step must be <= 1e-4")
    k = np.arange(step, 1.0 - 0.5 * step, step)
    v = f_kappa(N, k, variant)
    i = int(np.argmax(v))
    lo, hi = f_kappa_limits(N, variant)
    best, arg, end = float(v[i]), float(k[i]), False
    for val, at in ((lo, 0.0), (hi, 1.0)):
        if val > best:
            best, arg, end = val, at, True
    claimed = 1.5 if N == 2 else N / 2
    return GradientConstant(N, variant, best, arg, end, claimed)


def p_capacity_ball(N: int, p: float, rho: float) -> dict:
    """Capacity of ``B_ρ``, boundary gradient ``c`` and the radial potential."""
    if not (1 < p < N):
        raise ParameterError("need 1 < p < N")
    if not rho > 0:
        raise ParameterError("rho must be positive")
    w = sphere_area(N)
    g = (N - p) / (p - 1)
    cap = w * g ** (p - 1) * rho ** (N - p)
    perim, n_vol = w * rho ** (N - 1), w * rho**N  # |Γ| and N|Ω|
    cap_isop = g ** (p - 1) * perim**p / n_vol ** (p - 1)
    c = g / rho  # H0 = 1/rho
    pot = RadialSolution(N, "p-capacity-exterior", {"rho": rho, "p": p},
                         lambda r: (rho / np.asarray(r, float)) ** g,
                         lambda r: -g / rho * (rho / np.asarray(r, float)) ** (g + 1), p, 0.0)
    return {"capacity": cap, "capacity_isoperimetric": cap_isop, "c": c,
            "gradient_on_sphere": float(abs(pot.deriv(rho))), "potential": pot}


def capacity_energy(N: int, p: float, rho: float) -> float:
    """``∫_{|x|>ρ} |∇u|^p`` for the radial potential, by quadrature."""
    pot = p_capacity_ball(N, p, rho)["potential"]
    w = sphere_area(N)
    # r = rho / t maps (rho, inf) to (0, 1)
    f = lambda t: (rho / t) ** (N - 1) * abs(float(pot.deriv(rho / t))) ** p * rho / t**2
    val, _ = integrate.quad(f, 0.0, 1.0, epsabs=0, epsrel=1e-13, limit=200)
    return w * val


def n_capacity_log(N: int, rho: float, c: float = 1.0, const: float = 0.0) -> RadialSolution:
    """``u = −c (|Γ|/ω)^{1/(N−1)} log r + const`` for the sphere of radius ρ."""
    if N < 2 or not rho > 0:
        raise ParameterError("need N >= 2 and rho > 0")
    w = sphere_area(N)
    amp = c * (w * rho ** (N - 1) / w) ** (1 / (N - 1))
    return RadialSolution(N, "N-capacity-log", {"rho": rho, "c": c},
                          lambda r: -amp * np.log(np.asarray(r, float)) + const,
                          lambda r: -amp / np.asarray(r, float), float(N), 0.0)


def p_interior_punctured(N: int, p: float, rho: float) -> RadialSolution:
    """``u = (p−1)/(N−p) (|Γ|/ω)^{1/(p−1)} |x|^{−(N−p)/(p−1)}`` in the punctured ball."""
    if not (1 < p < N):
        raise ParameterError("need 1 < p < N")
    w = sphere_area(N)
    g = (N - p) / (p - 1)
    amp = (w * rho ** (N - 1) / w) ** (1 / (p - 1))
    return RadialSolution(N, "p-interior-punctured", {"rho": rho, "p": p},
                          lambda r: amp / g * np.asarray(r, float) ** (-g),
                          lambda r: -amp * np.asarray(r, float) ** (-g - 1), p, 0.0)


# ---------------------------------------------------------------------------
# cone checks in R^{2m}, via the reduction to s = |x'|, t = |x''|
# ---------------------------------------------------------------------------

def div_unit_gradient(m: int, s, t, Fs, Ft, Fss, Fst, Ftt):
    """``div(∇F/|∇F|)`` for ``F(|x'|, |x''|)`` in R^{2m}."""
    g = np.sqrt(Fs**2 + Ft**2)
    lap = Fss + (m - 1) * Fs / s + Ftt + (m - 1) * Ft / t
    return lap / g - (Fs**2 * Fss + 2 * Fs * Ft * Fst + Ft**2 * Ftt) / g**3


def simons_curvature(m: int, s, t):
    """Summed curvature of the level sets of ``s² − t²``."""
    return div_unit_gradient(m, s, t, 2 * s, -2 * t, 2.0, 0.0, -2.0)


def div_X(m: int, s, t):
    """``div(∇ũ/|∇ũ|)`` for ``ũ = s⁴ − t⁴``, in closed form."""
    a, b = s * s, t * t
    return (a - b) * (a + b) * ((m - 1) * (a - b) ** 2 + (m - 4) * a * b) / (a**3 + b**3) ** 1.5


def div_X_general(m: int, s, t):
    return div_unit_gradient(m, s, t, 4 * s**3, -4 * t**3, 12 * s**2, 0.0, -12 * t**2)


def _fd_divergence(grad, x, h):
    """Central-difference divergence of the unit field ``grad/|grad|`` at ``x`` (n, d)."""
    def unit(y):
        g = grad(y)
        return g / np.linalg.norm(g, axis=-1, keepdims=True)
    d = x.shape[1]
    out = np.zeros(len(x))
    for i in range(d):
        e = np.zeros(d)
        e[i] = h
        out += (unit(x + e)[:, i] - unit(x - e)[:, i]) / (2 * h)
    return out


def _split(x, m):
    return np.linalg.norm(x[:, :m], axis=1), np.linalg.norm(x[:, m:], axis=1)


@dataclass(frozen=True)
class ConeReport:
    m: int
    seed: int
    n_points: int
    max_abs_curvature: float
    curvature_fd_error: float
    sign_agreement: int
    sign_total: int
    divx_formula_error: float
    divx_fd_error: float
    violation: list | None

    @property
    def curvature_ok(self) -> bool:
        return self.max_abs_curvature <= 1e-8

    @property
    def all_signs_agree(self) -> bool:
        return self.sign_agreement == self.sign_total

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["curvature_ok"] = self.curvature_ok
        d["all_signs_agree"] = self.all_signs_agree
        return d


def cone_checks(m: int, n_points: int = 1000, seed: int = 0, search: int = 10_000,
                fd_step: float = 1e-5) -> ConeReport:
    if m < 1:
        raise ParameterError("m must be >= 1")
    rng = np.random.default_rng(seed)
    dim = 2 * m

    def sample(k):
        out = np.empty((0, dim))
        while len(out) < k:
            x = rng.standard_normal((k, dim))
            s, t = _split(x, m)
            # keep away from the origin, the axes and (for off-cone samples) the cone
            ok = (s > 1e-3) & (t > 1e-3) & (np.abs(s - t) > 1e-6 * (s + t))
            out = np.concatenate([out, x[ok]])
        return out[:k]

    # (a) points on the cone
    x = sample(n_points)
    s, t = _split(x, m)
    x_c = x.copy()
    x_c[:, m:] *= (s / t)[:, None]
    sc, tc = _split(x_c, m)
    H = simons_curvature(m, sc, tc)
    grad_u = lambda y: np.concatenate([2 * y[:, :m], -2 * y[:, m:]], axis=1)
    H_fd = _fd_divergence(grad_u, x_c, fd_step)
    # (b) sign of div X off the cone
    x = sample(n_points)
    s, t = _split(x, m)
    dx = div_X(m, s, t)
    dxg = div_X_general(m, s, t)
    grad_ut = lambda y: np.concatenate([4 * np.sum(y[:, :m] ** 2, 1, keepdims=True) * y[:, :m],
                                        -4 * np.sum(y[:, m:] ** 2, 1, keepdims=True) * y[:, m:]], 1)
    dx_fd = _fd_divergence(grad_ut, x, fd_step)
    ut = s**4 - t**4
    agree = int(np.sum(np.sign(dx) == np.sign(ut)))
    scale = np.maximum(np.abs(dx), 1.0)
    # (c) violation search
    violation = None
    xs = sample(search)
    ss, ts = _split(xs, m)
    bad = np.flatnonzero(np.sign(div_X(m, ss, ts)) != np.sign(ss**4 - ts**4))
    if len(bad):
        j = int(bad[0])
        violation = [float(ss[j]), float(ts[j]), float(div_X(m, ss[j], ts[j])),
                     float(ss[j] ** 4 - ts[j] ** 4)]
    return ConeReport(m, seed, n_points, float(np.max(np.abs(H))),
                      float(np.max(np.abs(H_fd - H))), agree, n_points,
                      float(np.max(np.abs(dxg - dx) / scale)),
                      float(np.max(np.abs(dx_fd - dx) / scale)), violation)


# ---------------------------------------------------------------------------
# Hardy inequality, dimension windows, extremal solution
# ---------------------------------------------------------------------------

def hardy_constant(n: int) -> float:
    return (n - 2) ** 2 / 4


def _radial_integral(f, lo, hi):
    """``∫_lo^hi f(r) dr`` in the variable log r."""
    if hi <= lo:
        return 0.0
    g = lambda s: f(math.exp(s)) * math.exp(s)
    val, _ = integrate.quad(g, math.log(lo), math.log(hi), epsabs=0, epsrel=1e-12, limit=200)
    return val


def cutoff_profile_integrals(n: int, alpha: float, delta: float) -> dict:
    """Radial integrals of ``ξ = r^{-α} − 1`` on [δ, 1], constant on [0, δ].

    The common factor ``|S^{n-1}|`` is omitted.
    """
    c = delta ** (-alpha) - 1
    grad = _radial_integral(lambda r: alpha**2 * r ** (n - 3 - 2 * alpha), delta, 1.0)
    w_in = delta ** (n - 2) / (n - 2)  # ∫_0^δ r^{n-3} dr
    hard = c * c * w_in + _radial_integral(lambda r: r ** (n - 3) * (r ** (-alpha) - 1) ** 2, delta, 1.0)
    mass = c * c * delta**n / n + _radial_integral(lambda r: r ** (n - 1) * (r ** (-alpha) - 1) ** 2,
                                                    delta, 1.0)
    return {"grad": grad, "hardy": hard, "mass": mass}


def rayleigh_quotient(n: int, a: float, alpha: float, delta: float) -> float:
    I = cutoff_profile_integrals(n, alpha, delta)
    return (I["grad"] - a * I["hardy"]) / I["mass"]


@dataclass(frozen=True)
class HardyReport:
    n: int
    a: float | None
    hardy_min_ratio: float
    alpha: float | None
    quotient_sequence: list
    reached_bound: bool
    window_exists: bool
    window_example: tuple | None
    extremal_residual: float
    stability_flag: bool

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def window(n: int):
    """(α, β) with α² < 2, β² < 2 and α < (n−5)/2 < β, or None; exact test ``(n−5)² < 8``."""
    if n < 3:
        raise ParameterError("n must be >= 3")
    if (n - 5) ** 2 >= 8:
        return None
    mid = (n - 5) / 2
    gap = (math.sqrt(2) - abs(mid)) / 2
    return (mid - gap, mid + gap)


def extremal_stability_flag(n: int) -> bool:
    """``2(n−2) ≤ (n−2)²/4`` in integer arithmetic."""
    return 8 * (n - 2) <= (n - 2) ** 2


def extremal_residual(n: int, radii=None) -> float:
    """Max relative residual of ``−Δ(−2 log r) = 2(n−2) r^{-2}`` by finite differences."""
    radii = np.geomspace(0.1, 10, 50) if radii is None else np.asarray(radii, float)
    u = lambda r: -2 * np.log(r)
    h = 1e-3 * radii
    d1 = _d1(u, radii, h)
    d2 = (-u(radii + 2 * h) + 16 * u(radii + h) - 30 * u(radii) + 16 * u(radii - h)
          - u(radii - 2 * h)) / (12 * h * h)
    lap = d2 + (n - 1) * d1 / radii
    rhs = 2 * (n - 2) * np.exp(u(radii))
    return float(np.max(np.abs(-lap - rhs) / rhs))


def hardy_and_windows(n: int, a: float | None = None, bound: float = -1e3,
                      max_k: int = 400) -> HardyReport:
    if n < 3:
        raise ParameterError("n must be >= 3")
    hc = hardy_constant(n)
    # Hardy inequality on a family of admissible cutoff profiles
    ratios = []
    for alpha in (0.25 * (n - 2), 0.5 * (n - 2), 0.49 * (n - 2)):
        for k in (1, 3, 6):
            I = cutoff_profile_integrals(n, alpha, 10.0**-k)
            ratios.append(I["grad"] / (hc * I["hardy"]))
    seq, alpha, reached = [], None, False
    if a is not None and a > hc:
        alpha = 0.5 * ((n - 2) / 2 + math.sqrt(a))
        for k in range(1, max_k + 1):
            q = rayleigh_quotient(n, a, alpha, 10.0**-k)
            seq.append([k, q])
            if q < bound:
                reached = True
                break
    return HardyReport(n, a, float(min(ratios)), alpha, seq, reached, window(n) is not None,
                       window(n), extremal_residual(n), extremal_stability_flag(n))

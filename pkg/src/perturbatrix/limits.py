"""Large-N behaviour of the rank-one family ``A_N = diag(n/N)``, ``e_{N,n} = sqrt(f(n/N)/N)``.

``m_N`` is the Riemann sum of ``m_inf(lambda) = int_0^1 f(s) / (s - lambda) ds``.
Couplings ``gamma`` with ``-1/gamma`` outside the range of ``m_inf`` are
forbidden: there the top imaginary part ``mu_N(gamma)`` of the spectrum tends
to zero as ``N`` grows.  The disc ``|gamma - i c| <= c``, ``c = 1/(2 pi ||f||_inf)``,
is always forbidden because ``0 < Im m_inf < pi ||f||_inf``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from . import _kernels
from .errors import (
    InputError,
    NotInUpperHalfPlane,
    OutOfSector,
    QuadratureFailure,
    UnboundedDerivative,
)
from .problem import Problem

QUAD_ABS_TOL = 1e-10
SUP_SAMPLES = 4097
MAX_N = 512
CURVE_STEP = 0.02
CURVE_MAX_POINTS = 400_000


def _log_ratio(lam):
    """``log((lambda - 1) / lambda)`` on the branch continuous in the upper half-plane."""
    return np.log(lam - 1.0) - np.log(lam)


def _require_upper(lam) -> np.ndarray:
    lam = np.asarray(lam, dtype=np.complex128)
    if np.any(~(lam.imag > 0)):
        raise NotInUpperHalfPlane("lambda must have positive imaginary part")
    return lam


@dataclass(frozen=True)
class LimitModel:
    """Nonnegative density ``f`` on ``[0, 1]``.

    ``kind`` is ``"uniform"`` (``f = 1``), ``"linear"`` (``f(s) = s``),
    ``"grid"`` (piecewise linear through ``(nodes, values)``) or
    ``"callable"``.  All but callables evaluate ``m_inf`` exactly; callables
    go through quadrature.
    """

    kind: str
    sup: float
    nodes: np.ndarray | None = None
    values: np.ndarray | None = None
    func: object = field(default=None, compare=False)

    @classmethod
    def uniform(cls) -> "LimitModel":
        return cls("uniform", 1.0)

    @classmethod
    def linear(cls) -> "LimitModel":
        return cls("linear", 1.0)

    @classmethod
    def from_grid(cls, nodes, values) -> "LimitModel":
        s = np.asarray(nodes, dtype=float).ravel()
        f = np.asarray(values, dtype=float).ravel()
        if s.size != f.size or s.size < 2:
            raise InputError("grid density needs matching nodes and values (at least 2)")
        if np.any(np.diff(s) <= 0) or abs(s[0]) > 1e-14 or abs(s[-1] - 1.0) > 1e-14:
            raise InputError("grid nodes must increase strictly from 0 to 1")
        if np.any(f < 0) or not np.all(np.isfinite(f)):
            raise InputError("density values must be finite and nonnegative")
        return cls("grid", float(f.max()), s, f)

    @classmethod
    def from_function(cls, func, sup: float | None = None) -> "LimitModel":
        """``sup`` defaults to the maximum over a uniform sample of ``[0, 1]``."""
        if sup is None:
            s = np.linspace(0.0, 1.0, SUP_SAMPLES)
            vals = np.asarray(func(s), dtype=float)
            if np.any(vals < 0):
                raise InputError("density must be nonnegative")
            sup = float(np.max(vals[np.isfinite(vals)]))
        return cls("callable", float(sup), func=func)

    @property
    def closed_form(self) -> bool:
        return self.kind in ("uniform", "linear")

    def density(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        if self.kind == "uniform":
            return np.ones_like(s)
        if self.kind == "linear":
            return s.copy()
        if self.kind == "grid":
            return np.interp(s, self.nodes, self.values)
        return np.asarray(self.func(s), dtype=float) * np.ones_like(s)

    @property
    def mass(self) -> float:
        """``int_0^1 f``; the unit-vector normalization holds when this is 1."""
        if self.kind == "uniform":
            return 1.0
        if self.kind == "linear":
            return 0.5
        if self.kind == "grid":
            return float(np.trapezoid(self.values, self.nodes))
        val, err = integrate.quad(lambda s: float(self.density(s)), 0.0, 1.0,
                                  epsabs=QUAD_ABS_TOL, epsrel=0.0, limit=200)
        if err > QUAD_ABS_TOL:
            raise QuadratureFailure(f"mass quadrature error estimate {err:.3e}")
        return float(val)

    @property
    def divergence(self) -> tuple[bool, bool]:
        """Whether ``int f/s`` and ``int f/(1-s)`` diverge (positive density at the endpoint)."""
        if self.kind == "uniform":
            return True, True
        if self.kind == "linear":
            return False, True
        f0, f1 = self.density(np.array([0.0, 1.0]))
        return bool(f0 > 0), bool(f1 > 0)

    def breakpoints(self) -> np.ndarray:
        if self.kind == "grid":
            return self.nodes[1:-1]
        return np.zeros(0)

    def m_infty(self, lam) -> np.ndarray | complex:
        return m_infty(self, lam)

    def m_N(self, n: int, lam) -> np.ndarray | complex:
        return m_N(self, n, lam)

    def problem(self, n: int) -> Problem:
        """``A_N = diag(k/N)`` and ``B_N = <., e_N> e_N`` with ``e_{N,k} = sqrt(f(k/N)/N)``."""
        if not 1 <= n <= MAX_N:
            raise InputError(f"N must lie in [1, {MAX_N}]")
        s = np.arange(1, n + 1) / n
        e = np.sqrt(self.density(s) / n)
        c = float(e @ e)
        if c == 0.0:
            raise InputError("density vanishes at every sample point")
        return Problem.rank_one(np.diag(s), e / math.sqrt(c), scale=c)


def _cauchy_quad(model: LimitModel, lam: complex) -> complex:
    """``int_0^1 f(s)/(s - lam) ds`` with the pole's residue part subtracted analytically."""
    x = lam.real
    fx = float(model.density(x)) if 0.0 <= x <= 1.0 else 0.0
    if not math.isfinite(fx):
        fx = 0.0
    pts = set(model.breakpoints().tolist())
    if 0.0 < x < 1.0:
        pts.add(x)
    pts = sorted(pts) or None

    def part(s, which):
        v = (model.density(s) - fx) / (s - lam)
        return v.real if which == 0 else v.imag

    total = fx * complex(_log_ratio(lam))
    for which in (0, 1):
        with warnings.catch_warnings():
            # the error estimate is checked below
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            val, err = integrate.quad(part, 0.0, 1.0, args=(which,), points=pts,
                                      epsabs=0.5 * QUAD_ABS_TOL, epsrel=0.0, limit=400)
        if not err <= 0.5 * QUAD_ABS_TOL:
            raise QuadratureFailure(f"quadrature error estimate {err:.3e} at lambda = {lam}")
        total += val if which == 0 else 1j * val
    return total


def _piecewise_linear_cauchy(nodes: np.ndarray, values: np.ndarray, lam: np.ndarray) -> np.ndarray:
    """Exact ``int f/(s - lam)`` for ``f`` linear on each ``[s_k, s_k+1]``."""
    h = np.diff(nodes)
    slope = np.diff(values) / h
    icpt = values[:-1] - slope * nodes[:-1]
    z = lam[..., None]
    logs = np.log(nodes[1:] - z) - np.log(nodes[:-1] - z)
    return np.sum(slope * h + (icpt + slope * z) * logs, axis=-1)


def m_infty(model: LimitModel, lam):
    """``int_0^1 f(s) / (s - lambda) ds`` for ``lambda`` in the upper half-plane."""
    scalar = np.ndim(lam) == 0
    lam = _require_upper(lam)
    if model.kind == "uniform":
        out = _log_ratio(lam)
    elif model.kind == "linear":
        out = 1.0 + lam * _log_ratio(lam)
    elif model.kind == "grid":
        out = _piecewise_linear_cauchy(model.nodes, model.values, lam)
    else:
        flat = lam.ravel()
        out = np.array([_cauchy_quad(model, complex(z)) for z in flat]).reshape(lam.shape)
    return complex(out) if scalar else out


def m_N(model: LimitModel, n: int, lam):
    """``(1/N) sum_k f(k/N) / (k/N - lambda)``, the Herglotz function of ``model.problem(N)``."""
    scalar = np.ndim(lam) == 0
    lam = np.asarray(lam, dtype=np.complex128)
    s = np.arange(1, n + 1) / n
    w = model.density(s) / n
    flat = lam.ravel()
    out = np.empty(flat.size, dtype=np.complex128)
    chunk = max(1, 2_000_000 // max(n, 1))
    for i in range(0, flat.size, chunk):
        z = flat[i:i + chunk]
        out[i:i + chunk] = np.sum(w[None, :] / (s[None, :] - z[:, None]), axis=1)
    out = out.reshape(lam.shape)
    return complex(out) if scalar else out


def mu_N(problem: Problem, gamma: complex) -> float:
    """Largest imaginary part of ``Spec(A + gamma B)``."""
    gamma = complex(gamma)
    if not gamma.imag > 0:
        raise OutOfSector("gamma must lie in the open upper half-plane")
    if problem.n > MAX_N:
        raise InputError(f"N = {problem.n} exceeds {MAX_N}")
    return float(np.max(problem.spectrum(gamma).imag))


def mu_grid(problem: Problem, re_axis, im_axis) -> np.ndarray:
    """``mu_N`` on the grid ``re + i im``, shaped ``(len(im_axis), len(re_axis))``."""
    re_axis = np.asarray(re_axis, dtype=float)
    im_axis = np.asarray(im_axis, dtype=float)
    out = np.empty((im_axis.size, re_axis.size))
    for j, y in enumerate(im_axis):
        for i, x in enumerate(re_axis):
            out[j, i] = mu_N(problem, complex(x, y))
    return out


def _derivative_sup(model: LimitModel, lam: np.ndarray) -> np.ndarray:
    """``sup_s |d/ds f(s)/(s - lambda)|`` on ``[0, 1]``."""
    dist = np.abs(lam - np.clip(lam.real, 0.0, 1.0))
    if model.kind == "uniform":
        return 1.0 / dist ** 2
    if model.kind == "linear":
        # d/ds s/(s - lambda) = -lambda/(s - lambda)^2
        return np.abs(lam) / dist ** 2
    raise UnboundedDerivative(f"no derivative bound available for a {model.kind!r} density")


def convergence_error(n: int, model: LimitModel, lam):
    """Riemann-sum bound ``||k'||_inf / (2N)`` on ``|m_N - m_inf|``, ``k(s) = f(s)/(s - lambda)``."""
    scalar = np.ndim(lam) == 0
    lam = _require_upper(lam)
    out = _derivative_sup(model, lam) / (2.0 * n)
    return float(out) if scalar else out


# ---------------------------------------------------------------------------
# forbidden couplings
# ---------------------------------------------------------------------------

def _boundary_point(u: np.ndarray, epsilon: float, r: float) -> np.ndarray:
    """Counter-clockwise parametrization of the boundary of ``{Im >= eps, |lambda| <= r}``.

    ``u`` in ``[0, 1)`` runs along ``Im = eps``, ``[1, 2)`` along the arc.
    """
    half = math.sqrt(r * r - epsilon * epsilon)
    phi0 = math.asin(epsilon / r)
    u = np.asarray(u, dtype=float)
    seg = -half + 2.0 * half * u + 1j * epsilon
    arc = r * np.exp(1j * (phi0 + (math.pi - 2.0 * phi0) * (u - 1.0)))
    return np.where(u < 1.0, seg, arc)


def boundary_curve(model: LimitModel, epsilon: float, r: float, *,
                   step: float = CURVE_STEP) -> tuple[np.ndarray, np.ndarray]:
    """Closed curve ``m_inf`` along the boundary of ``{Im >= eps, |lambda| <= r}``.

    Parameter intervals are bisected until consecutive curve points are at
    most ``step`` apart.  Returns ``(lambda, sigma)``.
    """
    half = math.sqrt(r * r - epsilon * epsilon)
    u = np.unique(np.concatenate([
        np.linspace(0.0, 1.0, 2001),
        [(c + half) / (2.0 * half) for c in (0.0, 1.0) if -half < c < half],
        np.linspace(1.0, 2.0, 401),
    ]))
    sig = np.asarray(m_infty(model, _boundary_point(u, epsilon, r)))
    while True:
        closed = np.append(sig, sig[0])
        gaps = np.abs(np.diff(closed))
        bad = np.nonzero(gaps > step)[0]
        if bad.size == 0:
            break
        if u.size + bad.size > CURVE_MAX_POINTS:
            raise QuadratureFailure("boundary curve refinement exceeded the point budget")
        u_next = np.append(u, 2.0)
        mids = 0.5 * (u[bad] + u_next[bad + 1])
        new = np.asarray(m_infty(model, _boundary_point(mids, epsilon, r)))
        order = np.argsort(np.concatenate([u, mids]), kind="stable")
        u = np.concatenate([u, mids])[order]
        sig = np.concatenate([sig, new])[order]
    return _boundary_point(u, epsilon, r), sig


def _winding(sigma: np.ndarray, z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.complex128)
    w = _kernels.winding_numbers(np.ascontiguousarray(sigma.real), np.ascontiguousarray(sigma.imag),
                                 np.ascontiguousarray(z.real.ravel()), np.ascontiguousarray(z.imag.ravel()))
    return w.reshape(z.shape)


@dataclass
class ForbiddenRegion:
    """Couplings ``gamma`` in the upper half-plane with ``-1/gamma`` outside the range of ``m_inf``.

    ``mask[j, i]`` flags the grid point ``re_axis[i] + i im_axis[j]``.
    ``boundary_points`` are grid-edge crossings refined by bisection.
    Near ``gamma = 0`` the computed region is unreliable because ``m_inf``
    grows only logarithmically at the endpoints; that zone is
    ``|gamma| <= artifact_radius``.
    """

    disc_center: complex
    disc_radius: float
    epsilon: float
    r: float
    lam_curve: np.ndarray
    sigma: np.ndarray
    re_axis: np.ndarray
    im_axis: np.ndarray
    mask: np.ndarray
    boundary_points: np.ndarray
    artifact_radius: float

    @property
    def gamma_curve(self) -> np.ndarray:
        """Image ``-1/sigma`` of the boundary curve; encloses the forbidden set."""
        with np.errstate(divide="ignore", invalid="ignore"):
            return -1.0 / self.sigma

    @property
    def polygon(self) -> np.ndarray:
        """Part of ``gamma_curve`` in the upper half-plane and inside the grid box."""
        g = self.gamma_curve
        keep = ((g.imag >= 0) & (g.real >= self.re_axis[0]) & (g.real <= self.re_axis[-1])
                & (g.imag <= self.im_axis[-1]))
        return g[keep]

    def in_disc(self, gamma) -> np.ndarray:
        return np.abs(np.asarray(gamma) - self.disc_center) <= self.disc_radius

    def is_forbidden(self, gamma) -> np.ndarray:
        """Direct winding-number test, independent of the grid."""
        g = np.asarray(gamma, dtype=np.complex128)
        return (g.imag > 0) & (_winding(self.sigma, -1.0 / g) == 0)

    def disc_violations(self, margin: float | None = None) -> int:
        """Grid points inside the disc (by more than ``margin``) that are not flagged forbidden."""
        h = max(self.re_axis[1] - self.re_axis[0], self.im_axis[1] - self.im_axis[0])
        margin = 2.0 * h if margin is None else margin
        g = self.re_axis[None, :] + 1j * self.im_axis[:, None]
        inside = np.abs(g - self.disc_center) < self.disc_radius - margin
        inside &= np.abs(g) > self.artifact_radius
        return int(np.sum(inside & ~self.mask))

    def hausdorff_to_disc(self, *, exclude_radius: float | None = None, samples: int = 4000) -> float:
        """Hausdorff distance between the disc boundary and ``boundary_points`` outside the artifact zone."""
        rad = self.artifact_radius if exclude_radius is None else exclude_radius
        phi = 2.0 * np.pi * np.arange(samples) / samples
        circ = self.disc_center + self.disc_radius * np.exp(1j * phi)
        circ = circ[np.abs(circ) > rad]
        pts = self.boundary_points[np.abs(self.boundary_points) > rad]
        if circ.size == 0 or pts.size == 0:
            return math.inf
        d_pts = np.abs(np.abs(pts - self.disc_center) - self.disc_radius).max()
        d_circ = 0.0
        for i in range(0, circ.size, 512):
            c = circ[i:i + 512]
            d_circ = max(d_circ, float(np.abs(c[:, None] - pts[None, :]).min(axis=1).max()))
        return float(max(d_pts, d_circ))

    def as_dict(self) -> dict:
        return {
            "disc": {"center": [self.disc_center.real, self.disc_center.imag], "radius": self.disc_radius},
            "epsilon": self.epsilon,
            "r": self.r,
            "artifact_radius": self.artifact_radius,
            "polygon": [[float(z.real), float(z.imag)] for z in self.polygon],
        }


def _default_box(gamma_curve: np.ndarray, disc_radius: float, r: float):
    g = gamma_curve[np.isfinite(gamma_curve) & (np.abs(gamma_curve) <= math.sqrt(r))]
    top = g.imag.max() if g.size else 0.0
    g = g[g.imag > 1e-3 * top]
    x0 = min(g.real.min(), -disc_radius) if g.size else -disc_radius
    x1 = max(g.real.max(), disc_radius) if g.size else disc_radius
    y1 = max(top, 2.0 * disc_radius)
    pad = 0.15 * max(x1 - x0, y1)
    return x0 - pad, x1 + pad, 0.0, y1 + pad


def forbidden_region(model: LimitModel, epsilon: float = 1e-8, r: float = 100.0, *,
                     box=None, grid: int = 400, refine: int = 12) -> ForbiddenRegion:
    """Forbidden couplings by winding numbers of ``m_inf`` along the boundary of ``{Im >= eps, |lambda| <= r}``.

    ``-1/gamma`` lies in the range of ``m_inf`` restricted to that set exactly
    when the boundary curve winds around it.  ``box`` is ``(re0, re1, im0, im1)``
    in the ``gamma`` plane; grid rows start just above ``im0``.
    """
    if not 0.0 < epsilon <= 1e-2:
        raise InputError("epsilon must lie in (0, 1e-2]")
    if r < 10.0:
        raise InputError("r must be at least 10")
    if model.sup <= 0:
        raise InputError("density must have positive sup norm")
    lam, sigma = boundary_curve(model, epsilon, r)
    radius = 1.0 / (2.0 * math.pi * model.sup)
    center = 1j * radius
    with np.errstate(divide="ignore", invalid="ignore"):
        gcurve = -1.0 / sigma
    x0, x1, y0, y1 = _default_box(gcurve, radius, r) if box is None else box
    re_axis = np.linspace(x0, x1, grid)
    hy = (y1 - y0) / grid
    im_axis = y0 + hy * (np.arange(grid) + 0.5)
    g = re_axis[None, :] + 1j * im_axis[:, None]
    mask = _winding(sigma, -1.0 / g) == 0

    # bisect along grid edges where the classification flips
    lo, hi = [], []
    flips = mask[:, 1:] != mask[:, :-1]
    lo.append(g[:, :-1][flips])
    hi.append(g[:, 1:][flips])
    flips = mask[1:, :] != mask[:-1, :]
    lo.append(g[:-1, :][flips])
    hi.append(g[1:, :][flips])
    a = np.concatenate(lo)
    b = np.concatenate(hi)
    fa = _winding(sigma, -1.0 / a) == 0
    for _ in range(refine):
        mid = 0.5 * (a + b)
        fm = _winding(sigma, -1.0 / mid) == 0
        same = fm == fa
        a = np.where(same, mid, a)
        b = np.where(same, b, mid)
    boundary = 0.5 * (a + b)

    big = float(np.max(np.abs(sigma)))
    return ForbiddenRegion(center, radius, epsilon, r, lam, sigma, re_axis, im_axis,
                           mask, boundary, 2.0 / big)

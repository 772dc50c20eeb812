"""Compression of a spectral measure over an interval, and Rouche certification of zero pairings.

Replacing the atoms of ``Q`` inside ``[a, b]`` by the single block
``X^1/2 (Y - lambda)^-1 X^1/2`` changes ``m`` by at most
``2 (b - a)^2 ||Q([a, b])|| / L^3`` wherever ``dist(lambda, [a, b]) >= L``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyInterval, HypothesisUnverifiable, InputError, NumericalError
from .herglotz import HerglotzFunction, SpectralMeasure
from .linalg import hermitian_eig, operator_norm, poly_roots
from .problem import Problem

PINV_RTOL = 1e-12
WINDING_TOL = 0.25
NODES_START = 256
NODES_CAP = 8192


# ---------------------------------------------------------------------------
# compression
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CompressedHerglotz:
    """``m~(lambda) = sum_{s_j not in [a,b]} Q_j/(s_j - lambda) + X^1/2 (Y - lambda)^-1 X^1/2``."""

    kept: SpectralMeasure
    X: np.ndarray
    Y: np.ndarray
    a: float
    b: float
    x_half: np.ndarray

    @property
    def dimension(self) -> int:
        return self.X.shape[0]

    def block(self, lam: complex) -> np.ndarray:
        n = self.Y.shape[0]
        r = np.linalg.solve(self.Y - complex(lam) * np.eye(n), self.x_half)
        return self.x_half @ r

    def __call__(self, lam: complex):
        lam = complex(lam)
        out = self.block(lam)
        if self.kept.size:
            out = out + np.tensordot(1.0 / (self.kept.locations - lam), self.kept.weights, axes=1)
        return complex(out[0, 0]) if self.dimension == 1 else out

    def measure(self) -> SpectralMeasure:
        """The equivalent atomic measure: kept atoms plus the spectral atoms of ``Y``."""
        es = hermitian_eig(self.Y)
        vecs = self.x_half @ es.eigenvectors
        locs = list(self.kept.locations)
        ws = list(self.kept.weights)
        for k, y in enumerate(es.eigenvalues):
            v = vecs[:, k]
            w = np.outer(v, v.conj())
            if np.linalg.norm(w) == 0.0:
                continue
            locs.append(float(y))
            ws.append(w)
        order = np.argsort(locs, kind="stable")
        locs = np.asarray(locs)[order]
        ws = np.asarray(ws)[order]
        # merge exact coincidences (e.g. Y has a repeated eigenvalue)
        keep_l, keep_w = [locs[0]], [ws[0]]
        for s, w in zip(locs[1:], ws[1:]):
            if s == keep_l[-1]:
                keep_w[-1] = keep_w[-1] + w
            else:
                keep_l.append(s)
                keep_w.append(w)
        return SpectralMeasure(np.asarray(keep_l), np.asarray(keep_w), self.kept.basis)

    def herglotz(self) -> HerglotzFunction:
        return HerglotzFunction(self.measure())


def compress(measure: SpectralMeasure, a: float, b: float) -> CompressedHerglotz:
    """Replace the atoms in ``[a, b]`` by ``X = Q([a,b])`` and ``Y`` with ``X^1/2 Y X^1/2 = int_a^b s dQ``.

    On ``Ker(X)`` the block ``Y`` is set to the midpoint ``(a + b)/2``, so
    ``a <= Y <= b`` holds on the whole space.
    """
    a, b = float(a), float(b)
    if a > b:
        raise EmptyInterval(f"[{a}, {b}] is empty")
    mask = measure.mask(a, b)
    if not np.any(mask):
        raise EmptyInterval(f"no atom of the measure lies in [{a}, {b}]")
    inside = measure.weights[mask]
    x = inside.sum(axis=0)
    x = 0.5 * (x + x.conj().T)
    z = np.tensordot(measure.locations[mask], inside, axes=1)
    z = 0.5 * (z + z.conj().T)
    es = hermitian_eig(x, tol=1e-8)
    top = max(abs(es.eigenvalues[0]), abs(es.eigenvalues[-1]))
    pos = es.eigenvalues > PINV_RTOL * top
    u = es.eigenvectors
    w = np.clip(es.eigenvalues, 0.0, None)
    x_half = (u * np.sqrt(w)) @ u.conj().T
    inv_half = (u[:, pos] / np.sqrt(w[pos])) @ u[:, pos].conj().T
    ker = u[:, ~pos] @ u[:, ~pos].conj().T
    y = inv_half @ z @ inv_half + 0.5 * (a + b) * ker
    y = 0.5 * (y + y.conj().T)
    kept = SpectralMeasure(measure.locations[~mask], measure.weights[~mask], measure.basis)
    return CompressedHerglotz(kept, x, y, a, b, x_half)


def compression_error_bound(comp: CompressedHerglotz, L: float) -> float:
    """``2 (b - a)^2 ||X|| / L^3``, valid where ``dist(lambda, [a, b]) >= L``."""
    if not L > 0:
        raise InputError("L must be positive")
    width = comp.b - comp.a
    if width == 0.0:
        return 0.0
    return 2.0 * width ** 2 * operator_norm(comp.X) / L ** 3


def q_interval_bound(measure: SpectralMeasure, f_sup: float, a: float, b: float) -> float:
    """``||f||_inf ||Q([a, b])||``, an upper bound for ``||int_a^b f dQ||``."""
    return float(f_sup) * operator_norm(measure.mass_on(a, b))


def compressed_rank_one_problem(comp: CompressedHerglotz) -> Problem:
    """``(A~, e~)`` with ``A~ = diag(locations)``, ``e~_j = sqrt(weight_j)`` reproducing ``m~``."""
    if comp.dimension != 1:
        raise InputError("only scalar compressions define a rank-one problem")
    mu = comp.measure()
    w = mu.weights[:, 0, 0].real
    e = np.sqrt(w / w.sum())
    return Problem.rank_one(np.diag(mu.locations), e, scale=w.sum())


# ---------------------------------------------------------------------------
# contours and winding numbers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Disc:
    center: complex
    radius: float

    def contains(self, z) -> np.ndarray:
        return np.abs(np.asarray(z) - self.center) < self.radius

    def distance(self, z) -> np.ndarray:
        """Distance to the region (0 inside)."""
        return np.maximum(np.abs(np.asarray(z) - self.center) - self.radius, 0.0)

    def boundary(self, n: int) -> np.ndarray:
        phi = 2.0 * np.pi * np.arange(n) / n
        return self.center + self.radius * np.exp(1j * phi)

    def box(self, pad: float):
        r = self.radius + pad
        c = complex(self.center)
        return c.real - r, c.real + r, c.imag - r, c.imag + r

    def mapped(self, c: complex, rho: float) -> "Disc":
        return Disc((complex(self.center) - c) / rho, self.radius / rho)


@dataclass(frozen=True)
class Rect:
    x0: float
    x1: float
    y0: float
    y1: float

    def contains(self, z) -> np.ndarray:
        z = np.asarray(z)
        return (z.real > self.x0) & (z.real < self.x1) & (z.imag > self.y0) & (z.imag < self.y1)

    def distance(self, z) -> np.ndarray:
        z = np.asarray(z)
        dx = np.maximum(np.maximum(self.x0 - z.real, z.real - self.x1), 0.0)
        dy = np.maximum(np.maximum(self.y0 - z.imag, z.imag - self.y1), 0.0)
        return np.hypot(dx, dy)

    def boundary(self, n: int) -> np.ndarray:
        """Counter-clockwise perimeter samples, spaced by arc length."""
        w, h = self.x1 - self.x0, self.y1 - self.y0
        s = np.arange(n) * (2 * (w + h) / n)
        z = np.empty(n, dtype=np.complex128)
        for i, si in enumerate(s):
            if si < w:
                z[i] = complex(self.x0 + si, self.y0)
            elif si < w + h:
                z[i] = complex(self.x1, self.y0 + si - w)
            elif si < 2 * w + h:
                z[i] = complex(self.x1 - (si - w - h), self.y1)
            else:
                z[i] = complex(self.x0, self.y1 - (si - 2 * w - h))
        return z

    def box(self, pad: float):
        return self.x0 - pad, self.x1 + pad, self.y0 - pad, self.y1 + pad

    def mapped(self, c: complex, rho: float) -> "Rect":
        c = complex(c)
        return Rect((self.x0 - c.real) / rho, (self.x1 - c.real) / rho,
                    (self.y0 - c.imag) / rho, (self.y1 - c.imag) / rho)


def winding_number(f, region, *, tol: float = WINDING_TOL, start: int = NODES_START,
                   cap: int = NODES_CAP) -> tuple[int, int]:
    """Zeros minus poles of ``f`` inside ``region`` by the argument principle.

    The phase increments are summed along the boundary; nodes double from
    ``start`` until two successive counts agree, each within ``tol`` of an
    integer and with every phase step below ``pi/4``.  Returns ``(count, nodes)``.
    """
    n = start
    prev = None
    while n <= cap:
        z = region.boundary(n)
        v = np.asarray(f(z), dtype=np.complex128)
        if not np.all(np.isfinite(v)) or np.any(v == 0):
            raise HypothesisUnverifiable("function vanishes or blows up on the contour",
                                         where=complex(z[np.argmin(np.abs(v))]))
        steps = np.angle(np.roll(v, -1) / v)
        w = float(steps.sum() / (2.0 * np.pi))
        k = int(round(w))
        good = abs(w - k) <= tol and float(np.max(np.abs(steps))) < np.pi / 4
        if good and prev == k:
            return k, n
        prev = k if good else None
        n *= 2
    raise NumericalError(f"winding number did not settle with {cap} nodes")


# ---------------------------------------------------------------------------
# Rouche certification
# ---------------------------------------------------------------------------

@dataclass
class IsolatingDisc:
    center: complex          # root of p, original coordinates
    radius: float            # original coordinates
    winding_p: int
    winding_q: int
    q_zero: complex | None = None


@dataclass
class RoucheCertificate:
    region: object
    epsilon: float
    center: complex          # the rescaling z = center + rho * w
    rho: float
    count_p: int
    count_q: int
    discs: list = field(default_factory=list)
    min_abs_p_band: float = math.inf
    max_abs_diff: float = 0.0
    nodes: int = 0

    @property
    def certified(self) -> bool:
        return (self.count_p == self.count_q and len(self.discs) == self.count_p
                and all(d.winding_p == 1 and d.winding_q == 1 for d in self.discs))


def _grid(box, h):
    x0, x1, y0, y1 = box
    nx = max(2, int(math.ceil((x1 - x0) / h)) + 1)
    ny = max(2, int(math.ceil((y1 - y0) / h)) + 1)
    xs = np.linspace(x0, x1, nx)
    ys = np.linspace(y0, y1, ny)
    zz = xs[None, :] + 1j * ys[:, None]
    return zz.ravel(), max(xs[1] - xs[0], ys[1] - ys[0])


def _sample_check(fun, dfun, points, spacing, threshold, *, above: bool):
    """Grid check of ``|fun| > threshold`` (``above``) or ``< threshold`` with a Lipschitz margin.

    ``dfun`` bounds ``|fun'|`` at the samples; the margin uses 1.5x its max
    over the grid times the covering radius ``spacing / sqrt(2)``.
    Returns ``(ok, extreme_value, worst_point)``.
    """
    vals = np.abs(fun(points))
    lip = 1.5 * float(np.max(np.abs(dfun(points)))) if points.size else 0.0
    margin = lip * spacing / math.sqrt(2.0)
    if above:
        k = int(np.argmin(vals))
        return bool(vals[k] - margin > threshold), float(vals[k]), complex(points[k])
    k = int(np.argmax(vals))
    return bool(vals[k] + margin < threshold), float(vals[k]), complex(points[k])


def _default_scaling(roots: np.ndarray) -> tuple[complex, float]:
    if roots.size < 2:
        return (complex(roots[0]) if roots.size else 0j), 1.0
    d = np.abs(roots[:, None] - roots[None, :])
    np.fill_diagonal(d, np.inf)
    return complex(np.mean(roots)), float(d.min()) / 2.0


def rouche_certify(p_coeffs, q, region, epsilon: float, *, center: complex | None = None,
                   rho: float | None = None, grid_points: int = 160,
                   max_grid_points: int = 1280) -> RoucheCertificate:
    """Certify a one-to-one pairing of the zeros of polynomial ``p`` and analytic ``q`` in ``region``.

    Coordinates are rescaled as ``z = center + rho w`` with ``p^(w) = p(z)/rho^n``
    monic; by default ``rho`` is half the smallest root distance of ``p`` so
    the roots in ``w`` are at least 2 apart.  Both ``|p^| > eps`` on the
    band ``U_eps \\ U`` and ``|p^ - q^| < eps`` on ``U_eps`` are checked on
    grids with a Lipschitz margin, refined up to ``max_grid_points`` per side.
    ``q`` takes an array of ``z`` in original coordinates.
    """
    if not 0.0 < epsilon < 0.5:
        raise InputError("epsilon must lie in (0, 1/2)")
    c = np.asarray(p_coeffs, dtype=np.complex128).ravel()
    if c.size < 2 or c[0] == 0:
        raise InputError("p must have degree >= 1 and nonzero leading coefficient")
    c = c / c[0]
    deg = c.size - 1
    roots = poly_roots(c)
    dc, drho = _default_scaling(roots)
    center = dc if center is None else complex(center)
    rho = drho if rho is None else float(rho)
    if not rho > 0:
        raise HypothesisUnverifiable("p has a repeated root; no rescaling separates them")
    w_roots = (roots - center) / rho
    sep = np.abs(w_roots[:, None] - w_roots[None, :])
    np.fill_diagonal(sep, np.inf)
    if deg > 1 and sep.min() < 2.0 - 1e-12:
        raise HypothesisUnverifiable("rescaled roots of p are closer than 2", where=float(sep.min()))

    norm = rho ** deg
    dcoef = np.polyder(c)

    def p_hat(w):
        return np.polyval(c, center + rho * w) / norm

    def dp_hat(w):
        return rho * np.polyval(dcoef, center + rho * w) / norm

    def q_hat(w):
        return np.asarray(q(center + rho * np.asarray(w)), dtype=np.complex128) / norm

    def diff(w):
        return p_hat(w) - q_hat(w)

    u = region.mapped(center, rho)
    band_width = 2.0 * epsilon
    box = u.box(band_width)
    size = max(box[1] - box[0], box[3] - box[2])
    npts = grid_points
    while True:
        pts, h = _grid(box, size / npts)
        dist = u.distance(pts)
        in_ueps = dist < band_width
        band = in_ueps & ~u.contains(pts)

        def ddiff(w, _h=h):
            return (diff(w + 0.5 * _h) - diff(w - 0.5 * _h)) / _h

        ok_p, min_p, where_p = _sample_check(p_hat, dp_hat, pts[band], h, epsilon, above=True)
        ok_d, max_d, where_d = _sample_check(diff, ddiff, pts[in_ueps], h, epsilon, above=False)
        if ok_p and ok_d:
            break
        value_fail = (not ok_p and min_p <= epsilon) or (not ok_d and max_d >= epsilon)
        if value_fail or npts * 2 > max_grid_points:
            if not ok_p:
                raise HypothesisUnverifiable(
                    f"|p| <= eps + margin on the band (min {min_p:.3e})", where=center + rho * where_p)
            raise HypothesisUnverifiable(
                f"|p - q| >= eps - margin near U (max {max_d:.3e} vs eps {epsilon})",
                where=center + rho * where_d)
        npts *= 2

    count_p, n1 = winding_number(p_hat, u)
    count_q, n2 = winding_number(q_hat, u)
    cert = RoucheCertificate(region, epsilon, center, rho, count_p, count_q,
                             min_abs_p_band=min_p, max_abs_diff=max_d, nodes=max(n1, n2))
    for wr in w_roots[u.contains(w_roots)]:
        d = Disc(complex(wr), epsilon)
        wp, _ = winding_number(p_hat, d)
        wq, _ = winding_number(q_hat, d)
        cert.discs.append(IsolatingDisc(center + rho * complex(wr), rho * epsilon, wp, wq,
                                        _newton_zero(q, center + rho * complex(wr), rho * epsilon)))
    return cert


def _newton_zero(q, z0: complex, radius: float, iters: int = 50) -> complex | None:
    """Zero of ``q`` near ``z0`` by Newton with a centred-difference derivative."""
    z = complex(z0)
    for _ in range(iters):
        h = 1e-7 * max(radius, 1e-12)
        f = complex(np.asarray(q(np.array([z])))[0])
        df = complex((np.asarray(q(np.array([z + h])))[0] - np.asarray(q(np.array([z - h])))[0]) / (2 * h))
        if df == 0:
            return None
        step = f / df
        z -= step
        if abs(z - z0) > radius:
            return None
        if abs(step) <= 1e-15 * max(1.0, abs(z)):
            break
    return z


@dataclass
class PairedDisc:
    center: complex
    radius: float
    ratio: float             # max |f - g| / |g| on the circle
    winding_f: int
    winding_g: int

    @property
    def certified(self) -> bool:
        return self.ratio < 1.0 and self.winding_f == 1 and self.winding_g == 1


@dataclass
class PairingCertificate:
    discs: list
    count_f: int
    count_g: int

    @property
    def certified(self) -> bool:
        return self.count_f == self.count_g == len(self.discs) and all(d.certified for d in self.discs)


def isolating_radii(centers, *, fraction: float = 0.45, axis_fraction: float = 0.9) -> np.ndarray:
    """Disc radii that keep the discs disjoint and off the real axis."""
    z = np.asarray(centers, dtype=np.complex128).ravel()
    d = np.abs(z[:, None] - z[None, :])
    np.fill_diagonal(d, np.inf)
    sep = d.min(axis=1) if z.size > 1 else np.full(z.size, np.inf)
    r = np.minimum(fraction * sep, axis_fraction * np.abs(z.imag))
    if np.any(~np.isfinite(r)) or np.any(r <= 0):
        raise HypothesisUnverifiable("a zero lies on the real axis or has no finite isolating radius")
    return r


def rouche_pairing(f, g, centers, radii=None, *, count_f: int | None = None,
                   count_g: int | None = None) -> PairingCertificate:
    """Pair zeros of ``f`` and ``g`` one-to-one on discs about ``centers`` (zeros of ``g``).

    On each circle ``|f - g| < |g|`` is checked on the winding-number nodes,
    and both functions must wind exactly once.  ``f`` and ``g`` take arrays
    and must be analytic on the closed discs.  ``count_f``/``count_g`` are
    the zero counts in the surrounding region when known.
    """
    z = np.asarray(centers, dtype=np.complex128).ravel()
    r = isolating_radii(z) if radii is None else np.asarray(radii, dtype=float).ravel()
    discs = []
    for zk, rk in zip(z, r):
        disc = Disc(complex(zk), float(rk))
        wg, n = winding_number(g, disc)
        wf, n2 = winding_number(f, disc)
        pts = disc.boundary(2 * max(n, n2))
        gv = np.asarray(g(pts), dtype=np.complex128)
        ratio = float(np.max(np.abs(np.asarray(f(pts)) - gv) / np.abs(gv)))
        discs.append(PairedDisc(complex(zk), float(rk), ratio, wf, wg))
    cf = len(discs) if count_f is None else int(count_f)
    cg = len(discs) if count_g is None else int(count_g)
    return PairingCertificate(discs, cf, cg)

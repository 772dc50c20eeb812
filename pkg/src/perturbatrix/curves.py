"""Eigenvalue curves of ``A + t e^{i theta} B`` for ``t > 0``, their endpoints and monodromy.

Each curve starts at an eigenvalue ``alpha_r`` of ``A``.  As ``t`` grows,
``M = rank(B)`` curves diverge like ``beta t e^{i theta}`` and the other
``N - M`` converge to eigenvalues ``delta`` of ``A`` compressed to
``Ker(B)``.  The endpoint index ``tau(r)`` numbers the limits as
``delta_1 < ... < delta_{N-M}`` followed by the ``betas`` in the fixed
order of :func:`perturbatrix.problem.order_betas`; in the rank-one case
this is the convention ``delta_N = infinity``.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import (
    AmbiguousMatch,
    AuditFailure,
    CollisionDetected,
    HypothesisViolated,
    MaxStepsExceeded,
    OutOfSector,
)
from .linalg import hermitian_eig, match_spectra, spectral_distance
from .problem import Problem

AUDIT_RTOL = 1e-7
NEWTON_RTOL = 1e-12
NEWTON_MAX_ITER = 30
COLLISION_FACTOR = 10.0
MATCH_GAP_FACTOR = 10.0


@dataclass(frozen=True)
class RaySpec:
    """A ray ``gamma = t e^{i theta}``; ``None`` defaults are filled from the problem."""

    theta: float
    t0: float | None = None
    t_max: float | None = None
    max_ratio: float = 0.25
    min_ratio: float = 1e-10
    audit_every: int = 25
    max_steps: int = 20000
    t_stops: tuple = ()

    @classmethod
    def degrees(cls, theta_deg: float, **kw) -> "RaySpec":
        return cls(math.radians(theta_deg), **kw)

    def resolved(self, problem: Problem) -> "RaySpec":
        nb = problem.norm_b
        na = problem.norm_a
        t0 = self.t0 if self.t0 is not None else 1e-6 * max(na, 1e-3) / nb
        t_max = self.t_max if self.t_max is not None else default_t_max(problem)
        if not t0 > 0:
            raise ValueError("t0 must be positive")
        if not t_max > t0:
            raise ValueError("t_max must exceed t0")
        return replace(self, t0=float(t0), t_max=float(t_max))


def default_t_max(problem: Problem) -> float:
    """Large enough for endpoint classification: ``1e4 max(||A||, 1) / min(1, min|beta|)``."""
    bmin = float(np.min(np.abs(problem.betas))) if problem.rank else 1.0
    return 1e4 * max(problem.norm_a, 1.0) / min(1.0, bmin)


@dataclass
class Endpoint:
    kind: str                # "divergent" | "convergent"
    index: int               # 0-based into betas (divergent) or deltas (convergent)
    target: complex          # beta or delta
    estimate: complex        # lambda / gamma, or the extrapolated limit
    offset: complex = 0j     # lambda - beta gamma (divergent only)
    residual: float = 0.0
    gap: float = math.inf


@dataclass
class SpectralCurveSet:
    """Samples ``lam[k, r] = lambda_r(t[k])`` along one ray.

    ``start_labels[r] = r`` indexes the ascending eigenvalues of ``A``.
    After :func:`classify_endpoints`, ``tau[r]`` is the 0-based endpoint
    index of curve ``r`` and ``end_class[r]`` holds the details.
    """

    theta: float
    t: np.ndarray
    lam: np.ndarray
    start_labels: np.ndarray
    betas: np.ndarray
    deltas: np.ndarray
    audit_max: float = 0.0
    audit_count: int = 0
    min_speed: float = math.inf
    min_separation: float = math.inf
    closest: tuple = ()      # (t, r, s, lambda_r, lambda_s) at the tightest approach
    collision: bool = False
    end_class: list = field(default_factory=list)
    tau: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.lam.shape[1]

    @property
    def gammas(self) -> np.ndarray:
        return self.t * cmath.exp(1j * self.theta)

    @property
    def permutation(self) -> tuple:
        """1-based ``tau`` as printed in monodromy tables."""
        return tuple(int(x) + 1 for x in self.tau)

    def curve(self, r: int) -> np.ndarray:
        return self.lam[:, r]


def _check_ray(problem: Problem, theta: float):
    if not problem.sector.angle_inside(theta):
        raise OutOfSector(
            f"theta = {math.degrees(theta):.6g} deg outside the coupling sector "
            f"({math.degrees(problem.sector.lower):.6g}, {math.degrees(problem.sector.upper):.6g})")


def _correct(problem: Problem, gamma: complex, lam: np.ndarray, tol: float):
    """Newton on each entry; returns ``(lam, converged)``."""
    x = lam.copy()
    for _ in range(NEWTON_MAX_ITER):
        step = problem.newton_steps(gamma, x)
        if not np.all(np.isfinite(step)):
            return x, False
        x = x + step
        if np.max(np.abs(step)) <= tol:
            return x, True
    return x, False


def _pair_min(lam: np.ndarray):
    d = np.abs(lam[:, None] - lam[None, :])
    np.fill_diagonal(d, np.inf)
    flat = int(np.argmin(d))
    r, s = divmod(flat, lam.size)
    return d, float(d[r, s]), r, s


def trace_ray(problem: Problem, ray: RaySpec, *, force: bool = False) -> SpectralCurveSet:
    """Follow all ``N`` eigenvalues from ``t0`` to ``t_max`` by predictor-corrector continuation.

    The predictor uses the eigenvalue derivative ``e^{i theta} dlambda/dgamma``;
    the corrector is Newton on ``det(A_gamma - lambda)``.  A step is rejected
    and halved when Newton fails or when a corrected value lands within
    ``10x`` its correction of another curve.
    """
    if not force:
        report = problem.hypotheses()
        if not report.passed:
            raise HypothesisViolated(f"hypotheses fail: {', '.join(report.failures)}")
    _check_ray(problem, ray.theta)
    n = problem.n
    if problem.rank == 0:
        ray = replace(ray, t0=ray.t0 or 1e-6, t_max=ray.t_max or 1.0)
        t = np.array([ray.t0, ray.t_max])
        lam = np.tile(problem.alphas.astype(np.complex128), (2, 1))
        return SpectralCurveSet(ray.theta, t, lam, np.arange(n), problem.betas, problem.deltas)

    ray = ray.resolved(problem)
    u = cmath.exp(1j * ray.theta)
    vecs = problem.eig.eigenvectors
    first_order = np.einsum("ir,ij,jr->r", vecs.conj(), problem.b, vecs)
    t = ray.t0
    lam = problem.alphas + t * u * first_order
    lam, ok = _correct(problem, t * u, lam, NEWTON_RTOL * problem.scale(t))
    _, sep, _, _ = _pair_min(lam)
    if not ok or sep <= 1e-10 * problem.scale(t):
        raise CollisionDetected("corrector failed at the starting point; reduce t0")

    stops = sorted(s for s in ray.t_stops if ray.t0 < s < ray.t_max) + [ray.t_max]
    ts = [t]
    lams = [lam.copy()]
    out = SpectralCurveSet(ray.theta, np.array(ts), np.array(lams), np.arange(n),
                           problem.betas, problem.deltas)
    out.min_separation = sep
    ratio = ray.max_ratio
    accepted = 0
    steps = 0
    deriv = u * problem.dlambda_dgamma(t * u, lam)
    out.min_speed = float(np.min(np.abs(deriv)))
    while t < ray.t_max:
        steps += 1
        if steps > ray.max_steps:
            out.t, out.lam = np.array(ts), np.array(lams)
            raise MaxStepsExceeded(f"stopped at t = {t:.6g} after {ray.max_steps} steps", out)
        t_new = min(t * (1.0 + ratio), stops[0])
        dt = t_new - t
        pred = lam + deriv * dt
        scale = problem.scale(t_new)
        new, ok = _correct(problem, t_new * u, pred, NEWTON_RTOL * scale)
        if ok:
            d, sep, r, s = _pair_min(new)
            moved = np.abs(new - pred)
            ok = sep > 1e-10 * scale and bool(np.all(d.min(axis=1) > COLLISION_FACTOR * moved))
        if not ok:
            ratio *= 0.5
            if ratio < ray.min_ratio:
                out.t, out.lam = np.array(ts), np.array(lams)
                out.collision = True
                raise CollisionDetected(
                    f"curves indistinguishable near t = {t:.6g} (theta likely exceptional)", out)
            continue
        t, lam = t_new, new
        if t >= stops[0]:
            stops.pop(0)
        ts.append(t)
        lams.append(lam.copy())
        accepted += 1
        if sep < out.min_separation:
            out.min_separation = sep
            out.closest = (t, r, s, complex(lam[r]), complex(lam[s]))
        deriv = u * problem.dlambda_dgamma(t * u, lam)
        out.min_speed = min(out.min_speed, float(np.min(np.abs(deriv))))
        if accepted % ray.audit_every == 0:
            _audit(problem, out, t * u, lam, scale)
        ratio = min(ratio * 1.5, ray.max_ratio)
    _audit(problem, out, t * u, lam, problem.scale(t))
    out.t = np.array(ts)
    out.lam = np.array(lams)
    return out


def _audit(problem: Problem, out: SpectralCurveSet, gamma: complex, lam: np.ndarray, scale: float):
    dist = spectral_distance(lam, problem.spectrum(gamma))
    out.audit_max = max(out.audit_max, dist / scale)
    out.audit_count += 1
    if dist > AUDIT_RTOL * scale:
        raise AuditFailure(f"traced spectrum off the eigensolver by {dist:.3e} at gamma = {gamma}")


def _assign(values: np.ndarray, targets: np.ndarray):
    """Match ``values`` to ``targets``; returns per-value (index, residual, gap)."""
    _, perm = match_spectra(values, targets)
    out = []
    for i, j in enumerate(perm):
        res = abs(values[i] - targets[j])
        others = np.delete(targets, j)
        gap = float(np.min(np.abs(values[i] - others))) if others.size else math.inf
        out.append((int(j), float(res), gap))
    return out


def classify_endpoints(curves: SpectralCurveSet, problem: Problem) -> SpectralCurveSet:
    """Tag each curve as divergent (slope ``beta``) or convergent (limit ``delta``) and build ``tau``."""
    t_end = float(curves.t[-1])
    n, m = problem.n, problem.rank
    betas, deltas = problem.betas, problem.deltas
    lam_end = curves.lam[-1]
    end_class: list = [None] * n
    tau = np.full(n, -1)
    if m == 0:
        assignment = _assign(lam_end, deltas.astype(np.complex128))
        for r, (j, res, gap) in enumerate(assignment):
            end_class[r] = Endpoint("convergent", j, complex(deltas[j]), complex(lam_end[r]), 0j, res, gap)
            tau[r] = j
        curves.end_class, curves.tau = end_class, tau
        return curves
    gamma_end = t_end * cmath.exp(1j * curves.theta)
    threshold = 0.5 * t_end * float(np.min(np.abs(betas)))
    div = np.abs(lam_end) > threshold
    if int(div.sum()) != m:
        raise AmbiguousMatch(
            f"{int(div.sum())} curves look divergent but rank(B) = {m}; raise t_max")
    idx_div = np.flatnonzero(div)
    idx_con = np.flatnonzero(~div)
    slopes = lam_end[idx_div] / gamma_end
    for k, (j, res, gap) in enumerate(_assign(slopes, betas)):
        r = idx_div[k]
        if gap <= MATCH_GAP_FACTOR * res:
            raise AmbiguousMatch(f"slope of curve {r} is not clearly matched (gap {gap:.3g}, residual {res:.3g})")
        offset = lam_end[r] - betas[j] * gamma_end
        end_class[r] = Endpoint("divergent", j, complex(betas[j]), complex(slopes[k]),
                                complex(offset), res, gap)
        tau[r] = (n - m) + j
    if idx_con.size:
        limits = _extrapolate(curves, idx_con)
        for k, (j, res, gap) in enumerate(_assign(limits, deltas.astype(np.complex128))):
            r = idx_con[k]
            if gap <= MATCH_GAP_FACTOR * res:
                raise AmbiguousMatch(
                    f"limit of curve {r} is not clearly matched (gap {gap:.3g}, residual {res:.3g})")
            end_class[r] = Endpoint("convergent", j, complex(deltas[j]),
                                    complex(limits[k]), 0j, res, gap)
            tau[r] = j
    curves.end_class = end_class
    curves.tau = tau
    return curves


def _extrapolate(curves: SpectralCurveSet, idx: np.ndarray) -> np.ndarray:
    """Richardson limit assuming ``lambda(t) = delta + c/t + O(t^-2)``."""
    if curves.t.size < 2:
        return curves.lam[-1, idx]
    t1, t2 = curves.t[-2], curves.t[-1]
    l1, l2 = curves.lam[-2, idx], curves.lam[-1, idx]
    return (t2 * l2 - t1 * l1) / (t2 - t1)


def monodromy(problem: Problem, theta: float, *, force: bool = False, **ray_kw) -> SpectralCurveSet:
    """Trace and classify one ray."""
    return classify_endpoints(trace_ray(problem, RaySpec(theta, **ray_kw), force=force), problem)


# ---------------------------------------------------------------------------
# exceptional angles
# ---------------------------------------------------------------------------

@dataclass
class ExceptionalBracket:
    theta_lo: float
    theta_hi: float
    tau_lo: tuple
    tau_hi: tuple
    gamma_c: complex | None = None
    lambda_c: complex | None = None
    residual: float = math.inf
    converged: bool = False

    @property
    def width(self) -> float:
        return self.theta_hi - self.theta_lo

    def contains(self, theta: float) -> bool:
        return self.theta_lo <= theta <= self.theta_hi


@dataclass
class ExceptionalAngles:
    brackets: list
    scanned: list            # (theta, 1-based tau or None) in scan order


def _tau_at(problem: Problem, theta: float, nudge: float, cache: dict, ray_kw: dict):
    """``(theta_used, tau)``; on a collision retries at ``theta +- nudge``."""
    for th in (theta, theta + nudge, theta - nudge):
        if th in cache:
            return th, cache[th][0]
        try:
            cs = monodromy(problem, th, force=True, **ray_kw)
        except (CollisionDetected, AmbiguousMatch):
            continue
        cache[th] = (cs.permutation, cs)
        return th, cs.permutation
    return theta, None


def find_exceptional_angles(problem: Problem, theta_range: tuple | None = None,
                            resolution: float = math.radians(0.01), *, n_grid: int = 18,
                            localize: bool = True, force: bool = False,
                            **ray_kw) -> ExceptionalAngles:
    """Bracket the angles where the monodromy permutation changes.

    Scans ``n_grid - 1`` equally spaced interior angles of ``theta_range``
    (default: the coupling sector), then bisects every interval whose
    endpoint permutations differ until it is narrower than ``resolution``.
    Two changes inside one scan interval that cancel are not detected.
    """
    if not force:
        report = problem.hypotheses()
        if not report.passed:
            raise HypothesisViolated(f"hypotheses fail: {', '.join(report.failures)}")
    lo, hi = theta_range if theta_range is not None else (problem.sector.lower, problem.sector.upper)
    grid = [lo + (hi - lo) * k / n_grid for k in range(1, n_grid)]
    if theta_range is not None:
        grid = [lo] + grid + [hi]
    cache: dict = {}
    nudge = resolution / 4
    scanned = []
    for th in grid:
        scanned.append(_tau_at(problem, th, nudge, cache, ray_kw))
    brackets = []

    def bisect(a, ta, b, tb):
        if b - a <= resolution:
            brackets.append(ExceptionalBracket(a, b, ta, tb))
            return
        mid, tm = _tau_at(problem, 0.5 * (a + b), nudge, cache, ray_kw)
        if tm is None or not a < mid < b:
            brackets.append(ExceptionalBracket(a, b, ta, tb))
            return
        if tm != ta:
            bisect(a, ta, mid, tm)
        if tm != tb:
            bisect(mid, tm, b, tb)

    known = [(th, tau) for th, tau in scanned if tau is not None]
    for (a, ta), (b, tb) in zip(known, known[1:]):
        if ta != tb:
            bisect(a, ta, b, tb)
    if localize:
        for br in brackets:
            _localize(problem, br, cache)
    return ExceptionalAngles(brackets, scanned)


def _critical_system(problem: Problem, z: np.ndarray) -> np.ndarray:
    det, ddet = problem.relative_det(z[0], z[1], derivative=True)
    return np.array([det, ddet])


def localize_critical_point(problem: Problem, gamma0: complex, lambda0: complex,
                            *, tol: float = 1e-13, max_iter: int = 60):
    """Newton on ``(p~, dp~/dlambda) = 0`` for a double eigenvalue.

    ``p~`` is the relative determinant, whose zeros in the upper half-plane
    are those of ``det(A_gamma - lambda)``.  The Jacobian is taken by
    central differences, valid because both components are analytic.
    Returns ``(gamma_c, lambda_c, residual, converged)``.
    """
    z = np.array([complex(gamma0), complex(lambda0)])
    f = _critical_system(problem, z)
    converged = False
    for _ in range(max_iter):
        jac = np.empty((2, 2), dtype=np.complex128)
        for k in range(2):
            h = 1e-6 * max(1.0, abs(z[k]))
            e = np.zeros(2, dtype=np.complex128)
            e[k] = h
            jac[:, k] = (_critical_system(problem, z + e) - _critical_system(problem, z - e)) / (2 * h)
        try:
            step = np.linalg.solve(jac, -f)
        except np.linalg.LinAlgError:
            break
        z = z + step
        f = _critical_system(problem, z)
        if np.max(np.abs(step) / np.maximum(1.0, np.abs(z))) <= tol:
            converged = True
            break
    return complex(z[0]), complex(z[1]), float(np.max(np.abs(f))), converged


def _localize(problem: Problem, br: ExceptionalBracket, cache: dict):
    best = None
    for th in (br.theta_lo, br.theta_hi):
        entry = cache.get(th)
        if entry is None or entry[1] is None:
            continue
        cs = entry[1]
        if cs.closest and (best is None or cs.min_separation < best.min_separation):
            best = cs
    if best is None:
        return
    t, r, s, lr, ls = best.closest
    theta_mid = 0.5 * (br.theta_lo + br.theta_hi)
    g0 = t * cmath.exp(1j * theta_mid)
    l0 = 0.5 * (lr + ls)
    g, lam, res, ok = localize_critical_point(problem, g0, l0)
    br.gamma_c, br.lambda_c, br.residual, br.converged = g, lam, res, ok


def homotopy_invariance_check(problem: Problem, theta_a: float, theta_b: float, **ray_kw) -> bool:
    """Whether rays at ``theta_a`` and ``theta_b`` induce the same permutation."""
    if theta_a == theta_b:
        return True
    ta = monodromy(problem, theta_a, force=True, **ray_kw).permutation
    tb = monodromy(problem, theta_b, force=True, **ray_kw).permutation
    return ta == tb


def same_component(theta_a: float, theta_b: float, exceptional: ExceptionalAngles) -> bool:
    """True when no exceptional bracket separates the two angles."""
    lo, hi = sorted((theta_a, theta_b))
    return not any(br.theta_hi >= lo and br.theta_lo <= hi for br in exceptional.brackets)


def real_coupling_spectra(problem: Problem, gammas) -> np.ndarray:
    """Eigenvalues of ``A + g B`` (ascending) for real ``g``; needs Hermitian ``B``."""
    gammas = np.asarray(gammas, dtype=float)
    return np.array([hermitian_eig(problem.a + g * problem.b).eigenvalues for g in gammas])

"""Topological entropy estimators with honest brackets.

Three routes are provided: lap-number growth (Fekete upper bound plus a
horseshoe lower bound), the kneading power-series determinant (smallest zero
t* in (0,1) gives h = -log t*), and an exact transition-matrix computation
for maps whose critical orbits are all eventually periodic.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BudgetError,
    DomainError,
    InconsistencyError,
    NeedsHigherOrderError,
    NotApplicableError,
)
from .families import PiecewiseLinearMap, PolynomialMap
from .symbolic import (
    DEFAULT_BUDGET,
    kneading_data,
    lap_counts,
    refinement_steps,
)

PCF_HORIZON = 4096
PCF_TOL = 1e-9


@dataclass
class EntropyEstimate:
    """Entropy value in nats with an honest bracket [lower, upper]."""

    value: float
    lower: float
    upper: float
    method: str
    depth: int
    converged: bool = True

    @property
    def width(self) -> float:
        return self.upper - self.lower

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "lower": self.lower,
            "upper": self.upper,
            "method": self.method,
            "depth": self.depth,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def default_tol(m) -> float:
    return 1e-4 if isinstance(m, PolynomialMap) else 1e-6


# ---------------------------------------------------------------------------
# lap-number estimator


def _horseshoe_count(dec) -> int:
    """Largest set of branches of f^n each mapping across all the others."""
    mono = ~dec.const
    if not mono.any():
        return 1
    a = dec.a[mono]
    b = dec.b[mono]
    lo = np.minimum(dec.image_left[mono], dec.image_right[mono])
    hi = np.maximum(dec.image_left[mono], dec.image_right[mono])
    pts = np.unique(np.quantile(a, np.linspace(0.0, 1.0, 9)))
    pts = np.unique(np.concatenate([[-1.0], pts, [1.0]]))
    best = 1
    for i in range(len(pts)):
        for j in range(i + 1, len(pts)):
            p, q = pts[i], pts[j]
            k = int(np.count_nonzero((a >= p) & (b <= q) & (lo <= p) & (hi >= q)))
            if k > best:
                best = k
    return best


def entropy_lap(m, n_max: int = 24, tol: float | None = None,
                budget: int = DEFAULT_BUDGET) -> EntropyEstimate:
    """Bracket from lap growth: Fekete upper bound, horseshoe lower bound.

    The upper bound min_n (1/n) log l(f^n) is non-increasing, the horseshoe
    bound non-decreasing; the estimate is the bracket midpoint and is flagged
    unconverged when the budget runs out before the bracket closes.
    """
    if tol is None:
        tol = default_tol(m)
    upper = math.inf
    lower = 0.0
    depth = 0
    converged = False
    horseshoe_at = set(range(2, 9)) | {n for n in range(9, n_max + 1) if n % 4 == 0} | {n_max}
    try:
        for n, dec in refinement_steps(m, n_max, budget):
            depth = n
            ell = dec.lap_count
            upper = min(upper, math.log(ell) / n)
            if n in horseshoe_at:
                k = _horseshoe_count(dec)
                lower = max(lower, math.log(k) / n)
            if upper - lower < tol:
                converged = True
                break
    except BudgetError as exc:
        dec = exc.partial
        if dec is not None and dec.lap_count and depth:
            k = _horseshoe_count(dec)
            lower = max(lower, math.log(k) / depth)
    if not math.isfinite(upper):
        upper = math.log(max(len(getattr(m, "critical_points", ())) + 1, 2))
    upper = max(upper, 0.0)
    lower = min(lower, upper)
    value = 0.5 * (lower + upper)
    if upper - lower < tol:
        converged = True
    return EntropyEstimate(value, lower, upper, "lap", depth, converged)


# ---------------------------------------------------------------------------
# kneading determinant estimator


def _kneading_series(m, order: int):
    """Coefficients of the kneading increments nu_i over the lap basis.

    Returns (N, eta) with N[i, j, p] the coefficient of t^p on column L_j in
    row i, and eta the per-lap orientation signs.
    """
    kd = kneading_data(m, order)
    b = len(kd.per_critical)
    eta = kd.orientations
    N = np.zeros((b, b + 1, order + 1))
    for i in range(1, b + 1):
        seq = kd.per_critical[i - 1]
        N[i - 1, i, 0] += 1.0
        N[i - 1, i - 1, 0] -= 1.0
        scale = 2.0 * int(eta[i])
        laps = seq.laps
        taus = seq.taus
        # theta coefficient at step t feeds power t+1
        np.add.at(N[i - 1], (laps, np.arange(1, order + 1)), scale * taus)
    return N, eta


def _det_error_bound(b: int, t: float, order: int) -> float:
    delta = 2.0 * t ** (order + 1) / (1.0 - t)
    row = math.sqrt(b) * ((1.0 + t) / (1.0 - t) + delta)
    return b * math.sqrt(b) * delta * row ** (b - 1)


class _KneadingDeterminant:
    """Evaluator for the reduced b x b kneading determinant D(t)."""

    def __init__(self, m, order: int):
        N, eta = _kneading_series(m, order)
        b = N.shape[0]
        drop = next(j for j in range(b + 1) if eta[j] < 0)
        cols = [j for j in range(b + 1) if j != drop]
        self.minor = N[:, cols, :]            # (b, b, order+1)
        self.sign = -1.0 if drop % 2 else 1.0
        self.eta_drop = int(eta[drop])
        self.order = order
        self.b = b

    def value(self, t):
        t = np.asarray(t, dtype=float)
        coeffs = np.moveaxis(self.minor, 2, 0)           # (order+1, b, b)
        vals = np.polynomial.polynomial.polyval(t, coeffs)
        if t.ndim == 0:
            det = float(np.linalg.det(vals))
        else:
            det = np.linalg.det(np.moveaxis(vals, -1, 0))
        return self.sign * det / (1.0 - self.eta_drop * t)

    def error(self, t):
        t = np.asarray(t, dtype=float)
        bound = np.vectorize(lambda s: _det_error_bound(self.b, s, self.order))(t)
        return bound / np.abs(1.0 - self.eta_drop * t)


def _smallest_kneading_root(D: _KneadingDeterminant, grid_step: float = 1e-3):
    """First certified sign change of D on (0, 1); None when there is none."""
    ts = np.arange(grid_step, 1.0, grid_step)
    vals = D.value(ts)
    errs = D.error(ts)
    anchor = None
    anchor_val = None
    for t, v, e in zip(ts, vals, errs):
        if v > e:
            anchor = t
        elif v < -e:
            if anchor is None:
                # determinant starts at +1 at t=0; bracket from near 0
                anchor = grid_step * 1e-3
            lo, hi = anchor, t
            for _ in range(64):
                mid = 0.5 * (lo + hi)
                if D.value(mid) > 0:
                    lo = mid
                else:
                    hi = mid
            root = 0.5 * (lo + hi)
            width = hi - lo
            h = 1e-6
            slope = abs(D.value(root + h) - D.value(root - h)) / (2 * h)
            err = float(D.error(root))
            dt = err / max(slope, 1e-300) + width
            return root, dt
    return None


def entropy_kneading(m, order: int = 256, tol: float | None = None,
                     grid_step: float = 1e-3) -> EntropyEstimate:
    """h = -log t* for the smallest zero t* of the kneading determinant.

    Raises NeedsHigherOrderError when the series truncation error at the
    root makes the bracket wider than ``tol``.
    """
    if tol is None:
        tol = default_tol(m)
    if getattr(m, "has_plateaus", False):
        raise NotApplicableError("kneading requires nondegenerate turning points")
    b = len(m.critical_points)
    if b == 0:
        return EntropyEstimate(0.0, 0.0, 0.0, "kneading", order)
    D = _KneadingDeterminant(m, order)
    found = _smallest_kneading_root(D, grid_step)
    if found is None:
        upper = _shallow_lap_upper(m)
        return EntropyEstimate(0.0, 0.0, upper, "kneading", order)
    root, dt = found
    value = -math.log(root)
    t_hi = min(root + dt, 1.0 - 1e-12)
    t_lo = max(root - dt, 1e-12)
    lower = max(-math.log(t_hi), 0.0)
    upper = -math.log(t_lo)
    if upper - lower > max(tol, 4e-16 / root):
        raise NeedsHigherOrderError(
            f"kneading bracket {upper - lower:.3g} exceeds tol {tol:g} at order {order}"
        )
    return EntropyEstimate(value, lower, upper, "kneading", order)


def _shallow_lap_upper(m, depth: int = 8) -> float:
    try:
        counts = lap_counts(m, depth, budget=200_000)
    except BudgetError as exc:
        if exc.partial is None or exc.depth in (None, 0):
            return math.log(len(m.critical_points) + 1)
        counts = [exc.partial.lap_count]
        depth = exc.depth
        return math.log(counts[-1]) / depth
    return math.log(counts[-1]) / len(counts)


# ---------------------------------------------------------------------------
# Markov estimator for post-critically finite maps


def _orbit_eventually_periodic(m, y0: float, horizon: int, tol: float):
    """Orbit of y0 with first revisit (preperiod, period), or None."""
    pts = [float(y0)]
    buckets: dict[int, list[int]] = {}

    def keys(y):
        k = int(round(y / 1e-8))
        return (k - 1, k, k + 1)

    for k in keys(pts[0]):
        buckets.setdefault(k, []).append(0)
    y = float(y0)
    for step in range(1, horizon + 1):
        y = m(y)
        k0 = int(round(y / 1e-8))
        for k in (k0 - 1, k0, k0 + 1):
            for j in buckets.get(k, ()):
                if abs(pts[j] - y) <= tol:
                    return pts, j, step - j
        pts.append(y)
        for k in keys(y):
            buckets.setdefault(k, []).append(step)
    return None


def critical_orbit_periods(m, horizon: int = PCF_HORIZON, tol: float = PCF_TOL):
    """Per-critical-value orbit data [(points, preperiod, period) or None]."""
    out = []
    for i in range(1, len(m.critical_points) + 1):
        v = m.critical_values[i - 1] if getattr(m, "critical_values", None) else m(m.critical_points[i - 1])
        out.append(_orbit_eventually_periodic(m, float(v), horizon, tol))
    return out

def is_postcritically_finite(m, horizon: int = PCF_HORIZON, tol: float = PCF_TOL) -> bool:
    if not m.critical_points:
        return True
    return all(o is not None for o in critical_orbit_periods(m, horizon, tol))


def _trim_transient(A: np.ndarray) -> np.ndarray:
    """Drop states with no outgoing or no incoming edges; preserves the radius."""
    M = A
    while len(M):
        rows = M.any(axis=1)
        if not rows.all():
            M = M[rows][:, rows]
            continue
        cols = M.any(axis=0)
        if not cols.all():
            M = M[cols][:, cols]
            continue
        break
    return M


def _power_iterate_shifted(A: np.ndarray, tol: float, max_iter: int):
    """Power iteration on A + I (primitive for irreducible A), shifted back.

    Returns (rayleigh, lower, upper); the bounds are Collatz-Wielandt ratios
    of the final strictly positive iterate, tight for irreducible blocks.
    """
    n = len(A)
    M = A + np.eye(n)
    x = np.ones(n)
    lam = 0.0
    for _ in range(max_iter):
        y = M @ x
        lam_new = float(x @ y) / float(x @ x)
        x = y / float(np.linalg.norm(y))
        if abs(lam_new - lam) < tol / 10.0:
            lam = lam_new
            break
        lam = lam_new
    ratios = (M @ x) / x
    return lam - 1.0, float(np.min(ratios)) - 1.0, float(np.max(ratios)) - 1.0


def _power_radius(A: np.ndarray, tol: float, max_iter: int = 10_000):
    """Spectral radius of a nonnegative matrix with honest bounds.

    The radius is the maximum over strongly connected components, each
    handled by power iteration; single states without a self-loop carry
    radius zero.
    """
    A = _trim_transient(np.asarray(A, dtype=float))
    n = A.shape[0]
    if n == 0 or not A.any():
        return 0.0, 0.0, 0.0
    reach = (A > 0) | np.eye(n, dtype=bool)
    for _ in range(max(1, int(np.ceil(np.log2(n))) + 1)):
        reach = reach | (reach @ reach)
    mutual = reach & reach.T
    seen = np.zeros(n, dtype=bool)
    best = (0.0, 0.0, 0.0)
    for i in range(n):
        if seen[i]:
            continue
        comp = np.flatnonzero(mutual[i])
        seen[comp] = True
        sub = A[np.ix_(comp, comp)]
        if len(comp) == 1 and sub[0, 0] == 0.0:
            continue
        lam, lo, hi = _power_iterate_shifted(sub, tol, max_iter)
        if lam > best[0]:
            best = (lam, lo, hi)
    return best


def markov_partition(m, horizon: int = PCF_HORIZON, tol: float = PCF_TOL):
    """Partition points and 0/1 covering matrix from the critical orbit closure."""
    orbits = critical_orbit_periods(m, horizon, tol)
    if any(o is None for o in orbits):
        raise NotApplicableError("a critical orbit is not eventually periodic within the horizon")
    pts = [-1.0, 1.0]
    pts.extend(float(c) for c in m.critical_points)
    for lo, hi in getattr(m, "plateaus", ()) or ():
        pts.extend((float(lo), float(hi)))
    for orbit in orbits:
        o_pts, pre, per = orbit
        pts.extend(o_pts[: pre + per])
    pts = sorted(pts)
    reps = [pts[0]]
    for p in pts[1:]:
        if p - reps[-1] > 1e-8:
            reps.append(p)
    reps = np.asarray(reps)
    k = len(reps) - 1
    A = np.zeros((k, k))
    snap = 1e-7
    plateaus = getattr(m, "plateaus", ()) or ()
    for i in range(k):
        lo_x, hi_x = reps[i], reps[i + 1]
        mid = 0.5 * (lo_x + hi_x)
        if any(plo <= mid <= phi for plo, phi in plateaus):
            continue  # constant piece covers nothing
        fl, fr = m(float(lo_x)), m(float(hi_x))
        im_lo, im_hi = min(fl, fr), max(fl, fr)
        A[i] = (im_lo <= reps[:-1] + snap) & (reps[1:] - snap <= im_hi)
    return reps, A


def entropy_markov(m, tol: float = 1e-8, horizon: int = PCF_HORIZON) -> EntropyEstimate:
    """Exact entropy for post-critically finite maps via the transition matrix."""
    if not m.critical_points:
        return EntropyEstimate(0.0, 0.0, 0.0, "markov", 0)
    reps, A = markov_partition(m, horizon)
    lam, lo, hi = _power_radius(A, tol)
    value = max(0.0, math.log(lam)) if lam > 0 else 0.0
    lower = max(0.0, math.log(lo)) if lo > 0 else 0.0
    upper = max(0.0, math.log(hi)) if hi > 0 else 0.0
    value = min(max(value, lower), upper)
    return EntropyEstimate(value, lower, upper, "markov", len(reps) - 1)


# ---------------------------------------------------------------------------
# dispatcher and the renormalization entropy floor


def entropy(m, method: str = "auto", tol: float | None = None,
            pcf_horizon: int = PCF_HORIZON, **kwargs) -> EntropyEstimate:
    """Entropy via the requested route; ``auto`` picks markov for PCF maps,
    else kneading when there are no plateaus, else lap counting.

    When both markov and kneading apply their results are cross-checked and
    must agree within the combined brackets.
    """
    if method == "lap":
        return entropy_lap(m, tol=tol, **kwargs)
    if method == "kneading":
        return entropy_kneading(m, tol=tol, **kwargs)
    if method == "markov":
        return entropy_markov(m, **kwargs)
    if method != "auto":
        raise DomainError(f"unknown entropy method {method!r}")

    if not getattr(m, "critical_points", ()):
        return EntropyEstimate(0.0, 0.0, 0.0, "lap", 0)
    pcf = is_postcritically_finite(m, horizon=pcf_horizon)
    no_plateaus = not getattr(m, "has_plateaus", False)
    if pcf and no_plateaus:
        est_m = entropy_markov(m)
        est_k = entropy_kneading(m, tol=tol)
        gap = abs(est_m.value - est_k.value)
        allowance = est_m.width + est_k.width + 1e-9
        if gap > allowance:
            raise InconsistencyError(
                f"markov {est_m.value!r} and kneading {est_k.value!r} disagree by {gap:.3g}"
            )
        return est_m
    if pcf:
        return entropy_markov(m)
    if no_plateaus:
        return entropy_kneading(m, tol=tol)
    return entropy_lap(m, tol=tol, **kwargs)


def renormalization_floor(p: int, r: int = 0) -> float:
    """2^{-r} log(lambda_p) with lambda_p the largest root of x^p - 2x^{p-2} = 1."""
    if p < 3 or p % 2 == 0:
        raise DomainError("p must be an odd integer >= 3")
    if r < 0:
        raise DomainError("r must be >= 0")

    def g(x):
        return x ** p - 2.0 * x ** (p - 2) - 1.0

    lo, hi = math.sqrt(2.0), 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if g(mid) < 0:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-16:
            break
    return math.log(0.5 * (lo + hi)) / 2 ** r

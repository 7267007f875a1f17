"""Periodic orbits, critical-orbit fate, parameter solving and saddle-node
detection for one-parameter families of interval maps.

A family is any callable t -> map; maps only need evaluation, derivative and
critical structure, so tent, stunted and polynomial members all work.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BracketError,
    BudgetError,
    ConvergenceError,
    InconsistencyError,
    NotABasinError,
)
from .symbolic import DEFAULT_BUDGET, branch_decomposition, preimages

SUPERATTRACTING_TOL = 1e-8
PARABOLIC_BAND = 1e-6


def _iterate(m, x: float, n: int) -> float:
    for _ in range(n):
        x = m(x)
    return x


def _orbit_multiplier(m, x: float, period: int) -> float:
    mult = 1.0
    y = x
    for _ in range(period):
        mult *= m.derivative(y)
        y = m(y)
    return mult


def classify_multiplier(mult: float) -> str:
    if abs(mult) < SUPERATTRACTING_TOL:
        return "superattracting"
    if abs(abs(mult) - 1.0) <= PARABOLIC_BAND:
        return "parabolic"
    if abs(mult) < 1.0:
        return "attracting"
    return "repelling"


@dataclass(frozen=True)
class PeriodicOrbit:
    point: float
    period: int
    multiplier: float
    stability: str

    def orbit_points(self, m) -> list[float]:
        out = [self.point]
        for _ in range(self.period - 1):
            out.append(m(out[-1]))
        return out


def _polish_periodic(m, x: float, period: int, tol: float = 1e-13) -> float:
    for _ in range(60):
        g = _iterate(m, x, period) - x
        if abs(g) <= tol:
            return x
        dg = _orbit_multiplier(m, x, period) - 1.0
        if abs(dg) < 1e-9:
            break
        step = g / dg
        if abs(step) > 0.1:
            step = math.copysign(0.1, step)
        x -= step
    return x


def periodic_orbits(m, N: int, budget: int = DEFAULT_BUDGET) -> list[PeriodicOrbit]:
    """All orbits through fixed points of f^N, one representative per orbit.

    Plateaus crossing the diagonal contribute a single superattracting
    representative.  Periods reported are minimal (divisors of N).
    """
    from .families import PiecewiseLinearMap

    dec = branch_decomposition(m, N, budget)
    # PL branches are affine, so one diagonal crossing each; smooth branches
    # can cross several times where the slope passes through 1
    subdiv = 1 if isinstance(m, PiecewiseLinearMap) else 32
    roots: list[float] = []
    for i in range(dec.lap_count):
        a, b = float(dec.a[i]), float(dec.b[i])
        va, vb = float(dec.image_left[i]), float(dec.image_right[i])
        if dec.const[i]:
            if a - 1e-12 <= va <= b + 1e-12:
                roots.append(va)
            continue
        da, db = va - a, vb - b
        if da == 0.0:
            roots.append(a)
        if db == 0.0:
            roots.append(b)
        xs = np.linspace(a, b, subdiv + 1)
        ds = [da] + [_iterate(m, float(x), N) - float(x) for x in xs[1:-1]] + [db]
        for j in range(subdiv):
            d0, d1 = ds[j], ds[j + 1]
            if d0 * d1 < 0.0:
                lo, hi = float(xs[j]), float(xs[j + 1])
                for _ in range(70):
                    mid = 0.5 * (lo + hi)
                    g = _iterate(m, mid, N) - mid
                    if (g < 0) == (d0 < 0):
                        lo = mid
                    else:
                        hi = mid
                roots.append(_polish_periodic(m, 0.5 * (lo + hi), N))

    # dedupe points, then group into orbits
    roots.sort()
    pts = []
    for x in roots:
        if not pts or x - pts[-1] > 1e-9:
            pts.append(x)
    orbits: list[PeriodicOrbit] = []
    used = [False] * len(pts)
    for j, x in enumerate(pts):
        if used[j]:
            continue
        period = N
        for p in range(1, N + 1):
            if N % p == 0 and abs(_iterate(m, x, p) - x) <= 1e-9:
                period = p
                break
        orbit = [x]
        y = x
        for _ in range(period - 1):
            y = m(y)
            orbit.append(y)
        for k, z in enumerate(pts):
            if not used[k] and any(abs(z - w) <= 1e-9 for w in orbit):
                used[k] = True
        mult = _orbit_multiplier(m, x, period)
        orbits.append(PeriodicOrbit(min(orbit), period, mult, classify_multiplier(mult)))
    return orbits


# ---------------------------------------------------------------------------
# critical fate


@dataclass(frozen=True)
class CriticalFate:
    index: int
    verdict: str            # "attracted" | "eventually-periodic-repelling" | "undecided"
    period: int | None = None
    multiplier: float | None = None
    target: float | None = None
    tail: tuple[float, ...] = ()


def critical_fate(m, i: int, horizon: int = 4096, tol: float = 1e-9) -> CriticalFate:
    """Fate of the i-th critical value under iteration."""
    from .entropy import _orbit_eventually_periodic

    if not 1 <= i <= len(m.critical_points):
        raise BracketError(f"critical index {i} out of range")
    v = m.critical_values[i - 1] if getattr(m, "critical_values", None) else m(m.critical_points[i - 1])
    found = _orbit_eventually_periodic(m, float(v), horizon, tol)
    if found is None:
        return CriticalFate(i, "undecided")
    pts, pre, per = found
    x = _polish_periodic(m, pts[pre], per)
    if abs(_iterate(m, x, per) - x) > 1e-8:
        x = pts[pre]
    mult = _orbit_multiplier(m, x, per)
    # reduce to the minimal period
    for p in range(1, per + 1):
        if per % p == 0 and abs(_iterate(m, x, p) - x) <= 1e-8:
            per = p
            mult = _orbit_multiplier(m, x, p)
            break
    tail = tuple(pts[max(0, pre - 2): pre + per])
    if abs(mult) < 1.0:
        return CriticalFate(i, "attracted", per, mult, x, tail)
    return CriticalFate(i, "eventually-periodic-repelling", per, mult, x, tail)


def window_membership(m, expected) -> bool | None:
    """Proxy for hyperbolic-window membership from critical fates.

    ``expected`` lists, per critical point, either an attractor period (int)
    or "eventually-fixed"/"eventually-periodic".  Returns None when any fate
    is undecided.
    """
    b = len(m.critical_points)
    if len(expected) != b:
        raise BracketError(f"expected {b} entries, got {len(expected)}")
    for i, want in enumerate(expected, start=1):
        fate = critical_fate(m, i)
        if fate.verdict == "undecided":
            return None
        if isinstance(want, int):
            if fate.verdict != "attracted" or fate.period != want:
                return False
        elif want in ("eventually-fixed", "eventually-periodic"):
            if fate.verdict != "eventually-periodic-repelling":
                return False
        else:
            raise BracketError(f"unrecognised expectation {want!r}")
    return True


# ---------------------------------------------------------------------------
# parameter solving


def solve_superattracting(family, i: int, p: int, bracket, tol: float = 1e-12) -> float:
    """Parameter t in the bracket with f_t^p(c_i(t)) = c_i(t)."""

    def G(t):
        m = family(t)
        c = m.critical_points[i - 1]
        return _iterate(m, c, p) - c

    lo, hi = float(bracket[0]), float(bracket[1])
    glo, ghi = G(lo), G(hi)
    if glo == 0.0:
        return lo
    if ghi == 0.0:
        return hi
    if glo * ghi > 0:
        raise BracketError(
            f"no sign change of f^{p}(c_{i}) - c_{i} over [{lo}, {hi}] ({glo:.3g}, {ghi:.3g})"
        )
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        g = G(mid)
        if g == 0.0:
            return mid
        if (g < 0) == (glo < 0):
            lo, glo = mid, g
        else:
            hi, ghi = mid, g
        if hi - lo < 1e-15:
            break
    # secant polish
    t0, t1 = lo, hi
    g0, g1 = glo, ghi
    for _ in range(8):
        if g1 == g0:
            break
        t2 = t1 - g1 * (t1 - t0) / (g1 - g0)
        if not lo <= t2 <= hi:
            break
        t0, g0, t1, g1 = t1, g1, t2, G(t2)
    t = t1 if abs(g1) < abs(G(0.5 * (lo + hi))) else 0.5 * (lo + hi)
    if abs(G(t)) > max(tol, 1e-12):
        t = 0.5 * (lo + hi)
    return float(t)


def _extremum(fun, lo: float, hi: float, seek_max: bool, samples: int = 41):
    xs = np.linspace(lo, hi, samples)
    vals = np.array([fun(float(x)) for x in xs])
    j = int(np.argmax(vals) if seek_max else np.argmin(vals))
    a = xs[max(j - 1, 0)]
    b = xs[min(j + 1, samples - 1)]
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c, d = b - invphi * (b - a), a + invphi * (b - a)
    fc, fd = fun(c), fun(d)
    for _ in range(60):
        if (fc > fd) == seek_max:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = fun(d)
        if b - a < 1e-13:
            break
    x = 0.5 * (a + b)
    return x, fun(x)


def detect_saddle_node(family, N: int, bracket, tol: float = 1e-10):
    """Parameter t* where an attracting/repelling orbit pair of f^N merges.

    Tracks the local extremum of f_t^N(x) - x between the pair and bisects on
    its sign.  Returns (t_star, q_star).
    """
    t_lo, t_hi = float(bracket[0]), float(bracket[1])

    def displacement(t):
        m = family(t)
        return lambda x: _iterate(m, x, N) - x

    # find the merging pair at t_lo
    m_lo = family(t_lo)
    orbs = periodic_orbits(m_lo, N)
    fixed = sorted(x for o in orbs for x in o.orbit_points(m_lo) if -1 + 1e-9 < x < 1 - 1e-9)
    candidates = []
    for x1, x2 in zip(fixed, fixed[1:]):
        if x2 - x1 < 1e-9:
            continue
        pad = 0.15 * (x2 - x1)
        window = (x1 + pad, x2 - pad)
        d_lo = displacement(t_lo)
        mid_val = d_lo(0.5 * (x1 + x2))
        seek_max = mid_val < 0
        xe, e_lo = _extremum(d_lo, *window, seek_max)
        e_hi = _extremum(displacement(t_hi), *window, seek_max)[1]
        if e_lo * e_hi < 0:
            candidates.append((x1, x2, window, seek_max, e_lo))
    if not candidates:
        raise BracketError("orbit pair present or absent at both bracket ends")
    x1, x2, window, seek_max, _ = candidates[0]

    lo_t, hi_t = t_lo, t_hi
    e_ref = _extremum(displacement(lo_t), *window, seek_max)[1]
    q_star = 0.5 * (x1 + x2)
    for _ in range(80):
        mid_t = 0.5 * (lo_t + hi_t)
        xe, e = _extremum(displacement(mid_t), *window, seek_max)
        if e == 0.0:
            lo_t = hi_t = mid_t
            q_star = xe
            break
        if (e < 0) == (e_ref < 0):
            lo_t = mid_t
        else:
            hi_t = mid_t
        q_star = xe
        if hi_t - lo_t < max(tol, 1e-14):
            break
    t_star = 0.5 * (lo_t + hi_t)
    m_star = family(t_star)
    resid = abs(_iterate(m_star, q_star, N) - q_star)
    h = 1e-6
    dnum = (_iterate(m_star, q_star + h, N) - _iterate(m_star, q_star - h, N)) / (2 * h)
    if resid > max(100 * tol, 1e-7):
        raise ConvergenceError(f"merge point residual {resid:.3g} too large", best_residual=resid)
    if abs(dnum - 1.0) > 1e-4:
        raise ConvergenceError(
            f"multiplier at merge point is {dnum:.6f}, not within 1e-4 of 1", best_residual=abs(dnum - 1)
        )
    return float(t_star), float(q_star)


# ---------------------------------------------------------------------------
# fundamental domains


def fundamental_domain(f, q_star: float, N: int, x0: float, samples: int = 2001):
    """Interval F = [x0, f^N(x0)] verified to tile the one-sided basin of q_star.

    ``f`` may be any callable; verification uses dense sampling of f^N on F.
    """
    def fN(x):
        y = x
        for _ in range(N):
            y = f(y)
        return y

    x1 = fN(x0)
    if x1 == x0:
        raise NotABasinError("x0 is fixed under f^N")
    side = math.copysign(1.0, x1 - x0)
    seq = [x0, x1]
    for _ in range(64):
        nxt = fN(seq[-1])
        seq.append(nxt)
        if abs(nxt - q_star) < 1e-12:
            break
    diffs = np.diff(seq)
    dists = np.abs(np.asarray(seq) - q_star)
    if not (np.all(np.sign(diffs) == side) and np.all(np.diff(dists) <= 1e-12)):
        raise NotABasinError("x0 does not converge monotonically to q_star under f^N")

    lo, hi = (x0, x1) if x0 < x1 else (x1, x0)
    grid = np.linspace(lo, hi, samples)
    img = np.array([fN(float(x)) for x in grid])
    im_lo, im_hi = float(img.min()), float(img.max())
    end_lo, end_hi = sorted((float(img[0]), float(img[-1])))
    scale = max(hi - lo, 1e-12)
    # (ii) the image boundary must come from the endpoint images
    if abs(im_lo - end_lo) > 1e-9 + 1e-6 * scale or abs(im_hi - end_hi) > 1e-9 + 1e-6 * scale:
        raise InconsistencyError("image boundary of F is not the image of its endpoints")
    # (i) F and f^N(F) share exactly one point
    inter_lo = max(lo, im_lo)
    inter_hi = min(hi, im_hi)
    if not -1e-9 <= inter_hi - inter_lo <= 1e-9 + 1e-6 * scale:
        raise InconsistencyError("F and f^N(F) overlap in more than one point")
    return (lo, hi)


# ---------------------------------------------------------------------------
# transfer data for the reference tent map


@dataclass(frozen=True)
class TransferData:
    qhat: float
    Jhat: tuple[float, float]
    xhat: float
    Vhat: tuple[float, float]
    N: int
    k: int


@dataclass
class TransferReport:
    c1_monotone: bool
    c2_monotone_onto: bool
    xhat_in_image: bool
    orbit_clear_of_turns: bool
    min_turn_distance: float
    delta: float
    depth: int
    image_of_Jhat: tuple[float, float]

    @property
    def passed(self) -> bool:
        return (self.c1_monotone and self.c2_monotone_onto
                and self.xhat_in_image and self.orbit_clear_of_turns)

    def text(self) -> str:
        lines = [
            "transfer data verification",
            f"  C1 monotone on Jhat over N steps: {'pass' if self.c1_monotone else 'FAIL'}",
            f"  C2 monotone onto Jhat from Vhat:  {'pass' if self.c2_monotone_onto else 'FAIL'}",
            f"  xhat inside T^N(Jhat):            {'pass' if self.xhat_in_image else 'FAIL'}",
            f"  orbit of qhat avoids turns:       {'pass' if self.orbit_clear_of_turns else 'FAIL'}"
            f" (min distance {self.min_turn_distance:.3g})",
            f"  preimage density to depth {self.depth}: delta = {self.delta:.6g}",
            f"  T^N(Jhat) = [{self.image_of_Jhat[0]!r}, {self.image_of_Jhat[1]!r}]",
            "  note: density is certified only to the reported depth",
        ]
        return "\n".join(lines)


def _interval_walk(T, interval, steps: int):
    """Push an interval through T; returns (monotone, final interval)."""
    nodes = T.breakpoints[1:-1]
    lo, hi = float(interval[0]), float(interval[1])
    for _ in range(steps):
        if np.any((nodes > lo + 1e-15) & (nodes < hi - 1e-15)):
            return False, (lo, hi)
        a, b = T(lo), T(hi)
        lo, hi = (a, b) if a <= b else (b, a)
    return True, (lo, hi)


def verify_transfer_data(T, data: TransferData, depth: int = 12) -> TransferReport:
    """Check the combinatorial transfer conditions on a tent map exactly."""
    c1, imgJ = _interval_walk(T, data.Jhat, data.N)
    c2_mono, imgV = _interval_walk(T, data.Vhat, data.k)
    onto = (abs(imgV[0] - data.Jhat[0]) <= 1e-9) and (abs(imgV[1] - data.Jhat[1]) <= 1e-9)
    xin = imgJ[0] - 1e-12 <= data.xhat <= imgJ[1] + 1e-12

    turns = np.asarray(T.critical_points)
    y = data.qhat
    min_dist = math.inf
    for _ in range(data.N):
        min_dist = min(min_dist, float(np.min(np.abs(turns - y))))
        y = T(y)
    clear = min_dist > 1e-9

    pts = [data.qhat]
    current = [data.qhat]
    for n in range(1, depth + 1):
        current = sorted(float(p) for t in current for p in preimages(T, t, 1))
        pts.extend(current)
    pts = np.unique(np.asarray(pts))
    gaps = np.diff(pts)
    delta = max(pts[0] + 1.0, 1.0 - pts[-1], float(gaps.max()) / 2.0 if len(gaps) else 2.0)

    return TransferReport(
        c1_monotone=c1,
        c2_monotone_onto=bool(c2_mono and onto),
        xhat_in_image=bool(xin),
        orbit_clear_of_turns=bool(clear),
        min_turn_distance=min_dist,
        delta=float(delta),
        depth=depth,
        image_of_Jhat=imgJ,
    )

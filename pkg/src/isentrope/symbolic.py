"""Exact combinatorics of iterates: addresses, branch decompositions,
preimage counts and signed kneading sequences.

The branch decomposition of f^n is computed by iterated pullback: every
monotone branch of f^n is split where its image crosses a node of f, so the
arrays stay exact for piecewise-linear maps (node values are looked up, never
re-solved).  Polynomial maps use per-branch bisection instead.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass

import numpy as np

from .errors import BudgetError, DomainError, RetargetError
from .families import PiecewiseLinearMap, PolynomialMap

SNAP = 1e-9
DEFAULT_BUDGET = 2_000_000


# ---------------------------------------------------------------------------
# addresses and itineraries


@dataclass(frozen=True)
class Itinerary:
    """Address sequence over {L_0, C_1, L_1, ..., C_b, L_b}."""

    symbols: tuple[str, ...]

    def __len__(self):
        return len(self.symbols)

    def __iter__(self):
        return iter(self.symbols)


def _critical_points(m) -> list[float]:
    return list(m.critical_points)


def _critical_value(m, i: int) -> float:
    """Value at the i-th interior critical point (1-based), exact when stored."""
    if getattr(m, "critical_values", None):
        return float(m.critical_values[i - 1])
    return float(m(m.critical_points[i - 1]))


def address(m, y: float, snap: float = SNAP):
    """("C", i) at critical points and plateau interiors, else ("L", lap index).

    Breakpoint and boundary ties resolve to the adjacent-left lap.
    """
    cs = _critical_points(m)
    for i, c in enumerate(cs, start=1):
        if abs(y - c) <= snap:
            return ("C", i)
    for i, (lo, hi) in enumerate(getattr(m, "plateaus", ()) or (), start=1):
        if lo < y < hi:
            return ("C", i)
    return ("L", bisect.bisect_left(cs, y))


def itinerary(m, x: float, n: int) -> Itinerary:
    """Length-n address sequence of x; plateau hits collapse to the critical symbol."""
    if n < 1:
        raise DomainError("itinerary length must be >= 1")
    syms = []
    y = float(x)
    for _ in range(n):
        kind, idx = address(m, y)
        if kind == "C":
            syms.append(f"C{idx}")
            y = _critical_value(m, idx)
        else:
            syms.append(f"L{idx}")
            y = m(y)
        if y <= -1.0 + SNAP:
            y = -1.0
        elif y >= 1.0 - SNAP:
            y = 1.0
    return Itinerary(tuple(syms))


def lap_orientations(m) -> np.ndarray:
    """Per-lap orientation signs, sampled at lap midpoints away from plateaus."""
    cs = _critical_points(m)
    edges = [-1.0] + cs + [1.0]
    out = []
    for j in range(len(edges) - 1):
        mid = 0.5 * (edges[j] + edges[j + 1])
        d = m.derivative(mid)
        if d == 0.0:
            # midpoint fell on a plateau; probe near the lap edges
            for t in (0.15, 0.85, 0.05, 0.95):
                d = m.derivative(edges[j] + t * (edges[j + 1] - edges[j]))
                if d != 0.0:
                    break
        out.append(1 if d > 0 else -1)
    return np.asarray(out, dtype=int)


# ---------------------------------------------------------------------------
# branch decomposition


@dataclass
class BranchDecomposition:
    """Maximal strictly-monotone or constant intervals of f^n with their images."""

    n: int
    a: np.ndarray
    b: np.ndarray
    image_left: np.ndarray
    image_right: np.ndarray
    const: np.ndarray

    @property
    def lap_count(self) -> int:
        return len(self.a)

    @property
    def variation(self) -> float:
        return float(np.sum(np.abs(self.image_right - self.image_left)))

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("left,right,image_left,image_right\n")
            for row in zip(self.a, self.b, self.image_left, self.image_right):
                fh.write(",".join(repr(float(x)) for x in row) + "\n")


def _initial_decomposition(m) -> BranchDecomposition:
    if isinstance(m, PiecewiseLinearMap):
        xs, ys = m.breakpoints, m.values
        a, b = xs[:-1].copy(), xs[1:].copy()
        va, vb = ys[:-1].copy(), ys[1:].copy()
        const = va == vb
        dec = BranchDecomposition(1, a, b, va, vb, const)
        return _merge_constant_runs(dec)
    if isinstance(m, PolynomialMap):
        edges = np.array([-1.0] + list(m.critical_points) + [1.0])
        a, b = edges[:-1], edges[1:]
        va = np.array([m(float(x)) for x in a])
        vb = np.array([m(float(x)) for x in b])
        const = np.zeros(len(a), dtype=bool)
        return BranchDecomposition(1, a, b, va, vb, const)
    raise DomainError(f"unsupported map type {type(m).__name__}")


def _merge_constant_runs(dec: BranchDecomposition) -> BranchDecomposition:
    if len(dec.a) < 2:
        return dec
    const = dec.const
    same = (
        const[1:]
        & const[:-1]
        & (dec.image_left[1:] == dec.image_left[:-1])
        & (dec.a[1:] == dec.b[:-1])
    )
    if not same.any():
        return dec
    keep = np.concatenate([[True], ~same])
    starts = np.flatnonzero(keep)
    return BranchDecomposition(
        dec.n,
        dec.a[starts],
        np.maximum.reduceat(dec.b, starts),
        dec.image_left[starts],
        dec.image_right[starts],
        const[starts],
    )


def _refine_pl(m: PiecewiseLinearMap, dec: BranchDecomposition, budget: int) -> BranchDecomposition:
    xs, ys = m.breakpoints, m.values
    flat = np.diff(ys) == 0.0

    a, b = dec.a, dec.b
    va, vb = dec.image_left, dec.image_right
    const = dec.const

    lo = np.minimum(va, vb)
    hi = np.maximum(va, vb)
    kl = np.searchsorted(xs, lo, side="right")
    kh = np.searchsorted(xs, hi, side="left")
    ncuts = np.where(const, 0, kh - kl)
    counts = ncuts + 1
    total = int(counts.sum())
    if total > budget:
        raise BudgetError(
            f"interval budget {budget} exceeded at depth {dec.n + 1} ({total} intervals)",
            partial=dec,
            depth=dec.n,
        )

    idx = np.repeat(np.arange(len(a)), counts)
    starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
    within = np.arange(total) - starts[idx]
    up = va <= vb

    const_row = const[idx]
    mono_row = ~const_row
    first = within == 0
    last = within == ncuts[idx]

    # node index whose value is the left image endpoint of this sub-branch
    node_left = np.where(up[idx], kl[idx] + within - 1, kh[idx] - within)
    node_right = np.where(up[idx], kl[idx] + within, kh[idx] - within - 1)
    seg = np.where(up[idx], kl[idx] + within - 1, kh[idx] - within - 1)
    seg = np.clip(seg, 0, len(xs) - 2)

    new_a = np.empty(total)
    new_b = np.empty(total)
    cut_mask = mono_row & ~first
    if cut_mask.any():
        q = xs[node_left[cut_mask]]
        r = idx[cut_mask]
        new_a[cut_mask] = a[r] + (q - va[r]) * (b[r] - a[r]) / (vb[r] - va[r])
    new_a[first] = a[idx[first]]
    new_b[:-1] = new_a[1:]
    new_b[last] = b[idx[last]]

    # f^n values at the new endpoints (exact node lookups at the cuts)
    u_left = np.where(first, va[idx], xs[np.clip(node_left, 0, len(xs) - 1)])
    u_right = np.where(last, vb[idx], xs[np.clip(node_right, 0, len(xs) - 1)])

    fa = np.interp(u_left, xs, ys)
    fb = np.interp(u_right, xs, ys)

    new_const = np.zeros(total, dtype=bool)
    flat_row = mono_row & flat[seg]
    if flat_row.any():
        val = ys[seg[flat_row]]
        fa[flat_row] = val
        fb[flat_row] = val
        new_const[flat_row] = True
    if const_row.any():
        cval = np.interp(va[idx[const_row]], xs, ys)
        fa[const_row] = cval
        fb[const_row] = cval
        new_const[const_row] = True

    out = BranchDecomposition(dec.n + 1, new_a, new_b, fa, fb, new_const)
    return _merge_constant_runs(out)


def _iterate_poly(m, x: float, n: int) -> float:
    for _ in range(n):
        x = m(x)
    return x


def _solve_monotone(m, n: int, a: float, b: float, fa: float, fb: float, target: float) -> float:
    """Bisection for f^n(x) = target on a branch where f^n is monotone."""
    up = fb >= fa
    lo, hi = a, b
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        val = _iterate_poly(m, mid, n)
        if (val < target) == up:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-12:
            break
    return 0.5 * (lo + hi)


def _refine_poly(m: PolynomialMap, dec: BranchDecomposition, budget: int) -> BranchDecomposition:
    cs = list(m.critical_points)
    n = dec.n
    rows_a, rows_b, rows_fa, rows_fb = [], [], [], []
    total = 0
    for r in range(len(dec.a)):
        a, b = float(dec.a[r]), float(dec.b[r])
        va, vb = float(dec.image_left[r]), float(dec.image_right[r])
        lo, hi = min(va, vb), max(va, vb)
        inner = [c for c in cs if lo < c < hi]
        if va > vb:
            inner = inner[::-1]
        xs_cuts = [_solve_monotone(m, n, a, b, va, vb, c) for c in inner]
        edges = [a] + xs_cuts + [b]
        uvals = [va] + inner + [vb]
        total += len(edges) - 1
        if total > budget:
            raise BudgetError(
                f"interval budget {budget} exceeded at depth {n + 1}",
                partial=dec,
                depth=n,
            )
        for j in range(len(edges) - 1):
            rows_a.append(edges[j])
            rows_b.append(edges[j + 1])
            rows_fa.append(m(uvals[j]))
            rows_fb.append(m(uvals[j + 1]))
    return BranchDecomposition(
        n + 1,
        np.array(rows_a),
        np.array(rows_b),
        np.array(rows_fa),
        np.array(rows_fb),
        np.zeros(len(rows_a), dtype=bool),
    )


def refinement_steps(m, n_max: int, budget: int = DEFAULT_BUDGET):
    """Yield (n, BranchDecomposition) for n = 1..n_max; raises BudgetError."""
    dec = _initial_decomposition(m)
    yield 1, dec
    refine = _refine_pl if isinstance(m, PiecewiseLinearMap) else _refine_poly
    for _ in range(n_max - 1):
        dec = refine(m, dec, budget)
        yield dec.n, dec


def branch_decomposition(m, n: int, budget: int = DEFAULT_BUDGET) -> BranchDecomposition:
    """Exact maximal monotone/constant intervals of f^n."""
    if n < 1:
        raise DomainError("depth must be >= 1")
    dec = None
    for _, dec in refinement_steps(m, n, budget):
        pass
    return dec


def lap_counts(m, n_max: int, budget: int = DEFAULT_BUDGET) -> list[int]:
    """Lap numbers of f^1..f^{n_max}."""
    return [dec.lap_count for _, dec in refinement_steps(m, n_max, budget)]


# ---------------------------------------------------------------------------
# preimages


def _pl_preimages_one(m: PiecewiseLinearMap, t: float):
    xs, ys = m.breakpoints, m.values
    out = []
    for i in range(len(xs) - 1):
        y0, y1 = ys[i], ys[i + 1]
        if y0 == y1:
            continue
        lo, hi = (y0, y1) if y0 < y1 else (y1, y0)
        if lo <= t <= hi:
            out.append(xs[i] + (t - y0) * (xs[i + 1] - xs[i]) / (y1 - y0))
    return out


def _poly_preimages_one(m: PolynomialMap, t: float):
    edges = [-1.0] + list(m.critical_points) + [1.0]
    out = []
    for j in range(len(edges) - 1):
        a, b = edges[j], edges[j + 1]
        fa, fb = m(a), m(b)
        lo, hi = (fa, fb) if fa < fb else (fb, fa)
        if lo <= t <= hi:
            out.append(_solve_monotone(m, 1, a, b, fa, fb, t))
    return out


def preimages(m, x: float, n: int, budget: int = DEFAULT_BUDGET) -> np.ndarray:
    """All solutions of f^n(y) = x, by branch-wise monotone inversion."""
    crit_vals = [
        _critical_value(m, i) for i in range(1, len(_critical_points(m)) + 1)
    ]
    one = _pl_preimages_one if isinstance(m, PiecewiseLinearMap) else _poly_preimages_one
    targets = [float(x)]
    for _ in range(n):
        for t in targets:
            for v in crit_vals:
                if abs(t - v) <= SNAP:
                    raise RetargetError(
                        f"target {t!r} hits a critical value; perturb the query point",
                        suggested=float(x) + 3.7e-7,
                    )
        nxt = []
        for t in targets:
            nxt.extend(one(m, t))
        nxt.sort()
        dedup = []
        for y in nxt:
            if not dedup or y - dedup[-1] > 1e-12:
                dedup.append(y)
        targets = dedup
        if len(targets) > budget:
            raise BudgetError("preimage budget exceeded", depth=n)
    return np.asarray(targets)


def preimage_count(m, x: float, n: int, budget: int = DEFAULT_BUDGET) -> int:
    """|f^{-n}(x)| for a generic point x."""
    return len(preimages(m, x, n, budget))


# ---------------------------------------------------------------------------
# kneading data


@dataclass(frozen=True)
class KneadingSequence:
    """Signed one-sided itinerary of one critical value."""

    symbols: tuple[str, ...]   # display form, C symbols kept
    laps: np.ndarray           # side-resolved lap index per step
    taus: np.ndarray           # cumulative orientation before each step; taus[0] = 1
    initial_side: int


@dataclass(frozen=True)
class KneadingData:
    """Kneading sequences for every critical value plus lap orientations."""

    per_critical: tuple[KneadingSequence, ...]
    orientations: np.ndarray
    depth: int


def _signed_itinerary(m, y0: float, side0: int, n: int, eta, cs, snap: float) -> KneadingSequence:
    symbols = []
    laps = np.empty(n, dtype=int)
    taus = np.empty(n, dtype=int)
    y, s = float(y0), int(side0)
    tau = 1
    plateaus = getattr(m, "plateaus", ()) or ()
    for t in range(n):
        taus[t] = tau
        hit = None
        for i, c in enumerate(cs, start=1):
            if abs(y - c) <= snap:
                hit = i
                break
        if hit is None:
            for i, (lo, hi) in enumerate(plateaus, start=1):
                if lo < y < hi:
                    hit = i
                    break
        if hit is not None:
            lap = hit - 1 if s < 0 else hit
            symbols.append(f"C{hit}")
            laps[t] = lap
            tau *= int(eta[lap])
            y = _critical_value(m, hit)
            peak = int(eta[hit - 1])  # rising into c_i means a local max
            s = -peak
        else:
            # the endpoints are invariant for anchored families; pinning
            # stops float drift from amplifying along repelling landings
            if y <= -1.0 + snap:
                y, s = -1.0, 1
            elif y >= 1.0 - snap:
                y, s = 1.0, -1
            lap = bisect.bisect_left(cs, y)
            symbols.append(f"L{lap}")
            laps[t] = lap
            tau *= int(eta[lap])
            y = m(y)
            s *= int(eta[lap])
        if y <= -1.0 + snap:
            y = -1.0
        elif y >= 1.0 - snap:
            y = 1.0
    return KneadingSequence(tuple(symbols), laps, taus, int(side0))


def kneading_data(m, n: int, snap: float = SNAP) -> KneadingData:
    """Signed itineraries of all critical values to depth n.

    An orbit landing on a critical point (within ``snap``) is resolved to the
    one-sided lap dictated by the tracked perturbation direction, and the
    orbit continues through the exact critical value, so periodic kneading
    stays exactly periodic.
    """
    cs = _critical_points(m)
    if not cs:
        raise DomainError("map has no interior critical points")
    eta = lap_orientations(m)
    seqs = []
    for i in range(1, len(cs) + 1):
        vi = _critical_value(m, i)
        peak = int(eta[i - 1])
        seqs.append(_signed_itinerary(m, vi, -peak, n, eta, cs, snap))
    return KneadingData(tuple(seqs), eta, n)

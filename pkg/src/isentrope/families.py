"""Map families on [-1, 1]: tent, stunted sawtooth, and anchored polynomials.

Every family member sends [-1, 1] to itself with f(-1) = epsilon in {-1, +1}
and b interior turning points.  Piecewise-linear members put their turning
points on the canonical grid c_i = -1 + 2i/(b+1); polynomial members (cubic,
quartic) are anchored at the endpoints and parametrised by coefficients or,
through a damped Newton solve, by their critical values.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError, DomainError, ShapeError, SingularityError

_ENDPOINT_TOL = 1e-14


@dataclass(frozen=True)
class ModalShape:
    """Number of interior turning points and the value carried at x = -1."""

    b: int
    epsilon: int

    def __post_init__(self):
        if self.b < 1:
            raise DomainError(f"need at least one turning point, got b={self.b}")
        if self.epsilon not in (-1, 1):
            raise DomainError(f"epsilon must be -1 or +1, got {self.epsilon}")

    @property
    def critical_abscissas(self) -> np.ndarray:
        """Canonical grid c_i = -1 + 2i/(b+1) for i = 0..b+1."""
        return -1.0 + 2.0 * np.arange(self.b + 2) / (self.b + 1)

    @property
    def interior_abscissas(self) -> np.ndarray:
        return self.critical_abscissas[1:-1]

    def peak_sign(self, i: int) -> int:
        """+1 if c_i is a local maximum of the unstunted sawtooth, else -1."""
        return self.epsilon * (-1) ** i

    def boundary_values(self) -> tuple[float, float]:
        """(v_0, v_{b+1}) forced by the normalisation."""
        return float(self.epsilon), float((-1) ** (self.b + 1) * self.epsilon)


def _check_alternation(shape: ModalShape, v: tuple[float, ...]) -> None:
    v0, vlast = shape.boundary_values()
    ext = (v0,) + tuple(v) + (vlast,)
    eps = shape.epsilon
    for i in range(1, len(ext)):
        d = (ext[i] - ext[i - 1]) * eps
        if i % 2 == 1:
            if not d < 0:
                raise ShapeError(i, f"alternation fails at i={i}: (v_{i}-v_{i-1})*eps = {d:.3g} not < 0")
        else:
            if not d > 0:
                raise ShapeError(i, f"alternation fails at i={i}: (v_{i}-v_{i-1})*eps = {d:.3g} not > 0")


@dataclass(frozen=True)
class CriticalValues:
    """Interior critical values v_1..v_b; boundary values are implied."""

    shape: ModalShape
    v: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "v", tuple(float(x) for x in self.v))
        if len(self.v) != self.shape.b:
            raise DomainError(f"expected {self.shape.b} critical values, got {len(self.v)}")
        if any(abs(x) > 1 for x in self.v):
            raise DomainError("critical values must lie in [-1, 1]")
        _check_alternation(self.shape, self.v)

    @property
    def extended(self) -> np.ndarray:
        """v_0..v_{b+1} including the forced boundary values."""
        v0, vlast = self.shape.boundary_values()
        return np.array((v0,) + self.v + (vlast,))

    def to_zeta(self) -> "ZetaCoords":
        eps = self.shape.epsilon
        zeta = tuple(eps * (-1) ** i * vi for i, vi in enumerate(self.v, start=1))
        return ZetaCoords(self.shape, zeta)

    @classmethod
    def from_zeta(cls, shape: ModalShape, zeta) -> "CriticalValues":
        eps = shape.epsilon
        v = tuple(eps * (-1) ** i * z for i, z in enumerate(zeta, start=1))
        return cls(shape, v)


@dataclass(frozen=True)
class ZetaCoords:
    """Plateau coordinates zeta_i = eps*(-1)^i*v_i; larger zeta, narrower plateau."""

    shape: ModalShape
    zeta: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "zeta", tuple(float(z) for z in self.zeta))
        # validation is delegated to the v-coordinates
        self.to_critical_values()

    def to_critical_values(self) -> CriticalValues:
        return CriticalValues.from_zeta(self.shape, self.zeta)


class _MapBase:
    """Shared conveniences for concrete map classes."""

    def orbit(self, x: float, n: int) -> list[float]:
        """x, f(x), ..., f^n(x)."""
        out = [float(x)]
        for _ in range(n):
            out.append(self(out[-1]))
        return out

    def iterate(self, x: float, n: int) -> float:
        for _ in range(n):
            x = self(x)
        return x


@dataclass(frozen=True)
class PiecewiseLinearMap(_MapBase):
    """Continuous piecewise-linear map given by its breakpoint graph.

    ``plateaus`` lists the closed intervals (possibly degenerate) on which the
    map is constant at a critical value; tent maps carry an empty tuple.
    """

    xs: tuple[float, ...]
    ys: tuple[float, ...]
    plateaus: tuple[tuple[float, float], ...] = ()
    kind: str = "pl"
    shape: ModalShape | None = None
    critical_values: tuple[float, ...] | None = None

    def __post_init__(self):
        xs = np.asarray(self.xs, dtype=float)
        ys = np.asarray(self.ys, dtype=float)
        if xs.ndim != 1 or xs.shape != ys.shape or len(xs) < 2:
            raise DomainError("breakpoints and values must be 1-d arrays of equal length >= 2")
        if not np.all(np.diff(xs) > 0):
            raise DomainError("breakpoints must be strictly increasing")
        object.__setattr__(self, "_xs", xs)
        object.__setattr__(self, "_ys", ys)
        with np.errstate(divide="ignore", invalid="ignore"):
            slopes = np.diff(ys) / np.diff(xs)
        object.__setattr__(self, "_slopes", slopes)
        object.__setattr__(self, "_xs_list", xs.tolist())
        object.__setattr__(self, "_ys_list", ys.tolist())
        object.__setattr__(self, "_slopes_list", slopes.tolist())

    # -- evaluation ---------------------------------------------------------

    def __call__(self, x):
        if np.isscalar(x) or isinstance(x, float):
            return self.eval_scalar(float(x))
        return np.interp(np.asarray(x, dtype=float), self._xs, self._ys)

    def eval_scalar(self, x: float) -> float:
        xs = self._xs_list
        seg = _segment_index(xs, x)
        y0 = self._ys_list[seg]
        s = self._slopes_list[seg]
        return y0 + s * (x - xs[seg])

    def derivative(self, x: float) -> float:
        """One-sided (left) slope at x; breakpoint ties resolve left."""
        xs = self._xs_list
        n = len(xs)
        lo, hi = 0, n - 1
        while lo + 1 < hi:
            mid = (lo + hi) // 2
            if xs[mid] < x:
                lo = mid
            else:
                hi = mid
        seg = lo if x <= xs[lo + 1] or lo == n - 2 else lo + 1
        # points exactly on a breakpoint take the segment to their left
        if x > xs[0] and x == xs[lo + 1] and lo + 1 < n - 1:
            seg = lo
        return self._slopes_list[seg]

    # -- structure ----------------------------------------------------------

    @property
    def breakpoints(self) -> np.ndarray:
        return self._xs

    @property
    def values(self) -> np.ndarray:
        return self._ys

    @property
    def b(self) -> int:
        if self.shape is not None:
            return self.shape.b
        return len(self.turning_points)

    @property
    def epsilon(self) -> int:
        if self.shape is not None:
            return self.shape.epsilon
        return int(np.sign(self._ys[0])) or 1

    @property
    def critical_points(self) -> tuple[float, ...]:
        if self.shape is not None:
            return tuple(self.shape.interior_abscissas)
        return self.turning_points

    @property
    def turning_points(self) -> tuple[float, ...]:
        """Interior abscissas where the slope sign flips (plateau centres count once)."""
        if self.shape is not None:
            return tuple(self.shape.interior_abscissas)
        pts = []
        slopes = self._slopes
        nz = [(i, s) for i, s in enumerate(slopes) if s != 0]
        for (i1, s1), (i2, s2) in zip(nz, nz[1:]):
            if s1 * s2 < 0:
                # turning happens at the midpoint of the (possibly flat) gap
                pts.append(0.5 * (self._xs[i1 + 1] + self._xs[i2]))
        return tuple(pts)

    @property
    def has_plateaus(self) -> bool:
        return any(hi > lo for lo, hi in self.plateaus)


def _segment_index(xs_list, x: float) -> int:
    """Index of the segment containing x, resolving breakpoint ties left."""
    n = len(xs_list)
    if x <= xs_list[0]:
        return 0
    if x >= xs_list[-1]:
        return n - 2
    lo, hi = 0, n - 1
    while lo + 1 < hi:
        mid = (lo + hi) // 2
        if xs_list[mid] < x:
            lo = mid
        else:
            hi = mid
    return lo


@dataclass(frozen=True)
class PolynomialMap(_MapBase):
    """Endpoint-anchored polynomial with its real interior critical structure."""

    coeffs: tuple[float, ...]  # ascending powers
    kind: str = "cubic"
    epsilon: int = -1

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))
        c = np.asarray(self.coeffs)
        dc = c[1:] * np.arange(1, len(c))
        object.__setattr__(self, "_dcoeffs", tuple(dc))
        crits = _real_roots_in_open_interval(tuple(dc), -1.0, 1.0)
        object.__setattr__(self, "_critical_points", tuple(crits))

    def __call__(self, x):
        if np.isscalar(x) or isinstance(x, float):
            acc = 0.0
            for c in reversed(self.coeffs):
                acc = acc * x + c
            return acc
        xarr = np.asarray(x, dtype=float)
        return np.polynomial.polynomial.polyval(xarr, np.asarray(self.coeffs))

    def derivative(self, x: float) -> float:
        acc = 0.0
        for c in reversed(self._dcoeffs):
            acc = acc * x + c
        return acc

    @property
    def b(self) -> int:
        return len(self._critical_points)

    @property
    def critical_points(self) -> tuple[float, ...]:
        return self._critical_points

    @property
    def critical_values(self) -> tuple[float, ...]:
        return tuple(self(c) for c in self._critical_points)

    @property
    def plateaus(self) -> tuple:
        return ()

    @property
    def has_plateaus(self) -> bool:
        return False

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1


@dataclass(frozen=True)
class CubicMap(PolynomialMap):
    """f(x) = alpha*x^3 + beta*x^2 + (1-alpha)*x - beta, anchored at (+-1, +-1)."""

    alpha: float = 0.0
    beta: float = 0.0


def _real_roots_in_open_interval(coeffs, lo, hi, imag_tol=1e-9):
    c = np.asarray(coeffs, dtype=float)
    nz = np.nonzero(c)[0]
    if len(nz) == 0:
        return []
    c = c[: nz[-1] + 1]
    if len(c) <= 1:
        return []
    roots = np.polynomial.polynomial.polyroots(c)
    out = [float(r.real) for r in roots if abs(r.imag) <= imag_tol and lo < r.real < hi]
    out.sort()
    # collapse numerically coincident roots
    dedup = []
    for r in out:
        if not dedup or r - dedup[-1] > 1e-12:
            dedup.append(r)
        # keep multiplicity-two roots as a single turning abscissa
    return dedup


# ---------------------------------------------------------------------------
# constructors


def _as_critical_values(shape: ModalShape, v) -> CriticalValues:
    if isinstance(v, CriticalValues):
        return v
    if isinstance(v, ZetaCoords):
        return v.to_critical_values()
    return CriticalValues(shape, tuple(v))


def make_tent(shape: ModalShape, v) -> PiecewiseLinearMap:
    """Tent map through (c_i, v_i) by linear interpolation; no plateaus."""
    cv = _as_critical_values(shape, v)
    xs = shape.critical_abscissas
    ys = cv.extended
    return PiecewiseLinearMap(
        xs=tuple(xs), ys=tuple(ys), plateaus=(), kind="tent", shape=shape,
        critical_values=cv.v,
    )


def make_stunted(shape: ModalShape, v) -> PiecewiseLinearMap:
    """Stunted sawtooth: the full slope +-(b+1) sawtooth truncated at the v_i.

    Around each c_i the map is constant v_i on the maximal closed interval
    Z_i where eps*(-1)^i*(S_0(x) - v_i) >= 0; elsewhere it equals S_0.
    """
    cv = _as_critical_values(shape, v)
    zeta = cv.to_zeta().zeta
    b = shape.b
    cs = shape.critical_abscissas
    v0, vlast = shape.boundary_values()

    xs = [cs[0]]
    ys = [v0]
    plateaus = []
    for i in range(1, b + 1):
        w = (1.0 - zeta[i - 1]) / (b + 1)
        lo, hi = cs[i] - w, cs[i] + w
        plateaus.append((lo, hi))
        vi = cv.v[i - 1]
        if w > 0:
            xs.extend([lo, hi])
            ys.extend([vi, vi])
        else:
            xs.append(cs[i])
            ys.append(vi)
    xs.append(cs[b + 1])
    ys.append(vlast)
    return PiecewiseLinearMap(
        xs=tuple(xs), ys=tuple(ys), plateaus=tuple(plateaus), kind="stunted",
        shape=shape, critical_values=cv.v,
    )


def make_cubic(alpha: float, beta: float) -> CubicMap:
    """Anchored cubic; admissible for 0 < alpha <= 4 and |beta| <= 2*sqrt(alpha)-alpha."""
    alpha = float(alpha)
    beta = float(beta)
    if not 0 < alpha <= 4:
        raise DomainError(f"alpha={alpha} outside (0, 4]")
    bound = 2.0 * np.sqrt(alpha) - alpha
    if abs(beta) > bound + 1e-12:
        raise DomainError(f"|beta|={abs(beta)} exceeds 2*sqrt(alpha)-alpha={bound}")
    coeffs = (-beta, 1.0 - alpha, beta, alpha)
    m = CubicMap(coeffs=coeffs, kind="cubic", epsilon=-1, alpha=alpha, beta=beta)
    assert abs(m(-1.0) + 1.0) <= _ENDPOINT_TOL and abs(m(1.0) - 1.0) <= _ENDPOINT_TOL
    return m


def cubic_critical_points(alpha: float, beta: float) -> tuple[float, float]:
    """Closed-form critical points of the anchored cubic, sorted ascending."""
    disc = beta * beta - 3.0 * alpha * (1.0 - alpha)
    if disc < 0:
        raise DomainError("cubic has no real critical points for these parameters")
    root = np.sqrt(disc)
    c_minus = (-beta - root) / (3.0 * alpha)
    c_plus = (-beta + root) / (3.0 * alpha)
    return (min(c_minus, c_plus), max(c_minus, c_plus))


def boundary_cubic(alpha: float) -> CubicMap:
    """Cubic on the curve beta = 2*sqrt(alpha)-alpha, where f(c_2) = -1."""
    return make_cubic(alpha, 2.0 * np.sqrt(alpha) - alpha)


def boundary_first_critical_value(alpha: float) -> float:
    """Closed form for v_1(alpha) = f(c_1) along the beta = 2*sqrt(alpha)-alpha curve."""
    s = np.sqrt(alpha)
    return 32.0 / 27.0 * alpha - 48.0 / 27.0 * s - 1.0 / 9.0 - 4.0 / (27.0 * s)


def _quartic_from_params(p: float, q: float, r: float) -> PolynomialMap:
    # f = -1 + (x^2-1)(p x^2 + q x + r); both endpoints anchored at -1
    coeffs = (-1.0 - r, -q, r - p, q, p)
    return PolynomialMap(coeffs=coeffs, kind="quartic", epsilon=-1)


def _newton_to_targets(residual, starts, ndim, *, tol=1e-10, fd_step=1e-7, max_iter=100):
    """Damped multivariate Newton with finite-difference Jacobian and multi-start."""
    best = np.inf
    for x0 in starts:
        x = np.asarray(x0, dtype=float)
        res = residual(x)
        if res is None:
            continue
        for _ in range(max_iter):
            norm = float(np.max(np.abs(res)))
            best = min(best, norm)
            if norm <= tol:
                return x
            jac = np.empty((ndim, ndim))
            singular = False
            for j in range(ndim):
                xp = x.copy()
                xp[j] += fd_step
                rp = residual(xp)
                if rp is None:
                    xp[j] = x[j] - fd_step
                    rp = residual(xp)
                    if rp is None:
                        singular = True
                        break
                    jac[:, j] = (res - rp) / fd_step
                else:
                    jac[:, j] = (rp - res) / fd_step
            if singular:
                break
            try:
                step = np.linalg.solve(jac, res)
            except np.linalg.LinAlgError:
                break
            lam = 1.0
            improved = False
            while lam >= 1.0 / 1024:
                xn = x - lam * step
                rn = residual(xn)
                if rn is not None and float(np.max(np.abs(rn))) < norm:
                    x, res = xn, rn
                    improved = True
                    break
                lam *= 0.5
            if not improved:
                break
        else:
            continue
    raise ConvergenceError(
        f"Newton failed to reach residual {tol:g} from all starts (best {best:.3g})",
        best_residual=best,
    )


def map_from_critical_values(shape: ModalShape, v, *, x0=None, tol=1e-10) -> PolynomialMap:
    """Unique anchored polynomial (b = 2 or 3) with the prescribed critical values.

    Solved by damped Newton on parameters -> critical values; ``x0`` optionally
    seeds the solve (useful when walking a parameter path).
    """
    if shape.b not in (2, 3):
        raise DomainError(f"only b in {{2, 3}} supported, got b={shape.b}")
    if shape.epsilon != -1:
        raise DomainError("polynomial families are anchored with epsilon = -1")
    vv = tuple(float(x) for x in v)
    if shape.b == 3 and abs(vv[1] - vv[0]) <= 1e-12:
        raise SingularityError("v_2 = v_1 lies on the singular boundary")
    cv = CriticalValues(shape, vv)  # alternation check
    target = np.asarray(cv.v)

    if shape.b == 2:
        def residual(u):
            # iterates may leave the admissible wedge; only real critical
            # structure is required to evaluate the residual
            a, bta = u
            if not (1e-9 < a <= 4.0 + 1e-9):
                return None
            disc = bta * bta - 3.0 * a * (1.0 - a)
            if disc <= 0:
                return None
            c1, c2 = cubic_critical_points(a, bta)
            f1 = ((a * c1 + bta) * c1 + (1.0 - a)) * c1 - bta
            f2 = ((a * c2 + bta) * c2 + (1.0 - a)) * c2 - bta
            return np.array([f1 - target[0], f2 - target[1]])

        starts = [(a, s * (2.0 * np.sqrt(a) - a))
                  for a in (3.5, 2.5, 1.5, 0.8) for s in (0.45, -0.45)]
        if x0 is not None:
            starts = [tuple(x0)] + starts
        sol = _newton_to_targets(residual, starts, 2, tol=tol)
        alpha, beta = float(sol[0]), float(sol[1])
        # boundary targets (v_2 = -1) may overshoot the admissible wedge by roundoff
        bound = 2.0 * np.sqrt(alpha) - alpha
        if abs(beta) > bound and abs(beta) <= bound + 1e-7:
            beta = bound if beta > 0 else -bound
        return make_cubic(alpha, beta)

    def residual(u):
        p, q, r = u
        if p >= -1e-6 or p < -200.0:
            return None
        m = _quartic_from_params(p, q, r)
        if m.b != 3:
            return None
        vals = np.asarray(m.critical_values)
        if np.max(np.abs(vals)) > 3.0:
            return None
        return vals - target

    starts = [(p, q, r)
              for p in (-8.0, -4.0)
              for q in (0.5, -0.5)
              for r in (0.3, -0.3)]
    if x0 is not None:
        starts = [tuple(x0)] + starts
    sol = _newton_to_targets(residual, starts, 3, tol=tol)
    return _quartic_from_params(*sol)


# ---------------------------------------------------------------------------
# serialization


def map_to_json(m) -> str:
    """Versioned JSON for any constructed family member."""
    if isinstance(m, PiecewiseLinearMap):
        doc = {
            "version": 1,
            "kind": m.kind,
            "b": m.b,
            "epsilon": m.epsilon,
            "v": list(m.critical_values or ()),
            "coeffs": [],
        }
    elif isinstance(m, CubicMap):
        doc = {
            "version": 1,
            "kind": "cubic",
            "b": m.b,
            "epsilon": m.epsilon,
            "v": list(m.critical_values),
            "coeffs": list(m.coeffs),
            "alpha": m.alpha,
            "beta": m.beta,
        }
    elif isinstance(m, PolynomialMap):
        doc = {
            "version": 1,
            "kind": m.kind,
            "b": m.b,
            "epsilon": m.epsilon,
            "v": list(m.critical_values),
            "coeffs": list(m.coeffs),
        }
    else:
        raise DomainError(f"cannot serialize {type(m).__name__}")
    return json.dumps(doc)


def map_from_json(text: str):
    doc = json.loads(text)
    if doc.get("version") != 1:
        raise DomainError(f"unsupported map serialization version {doc.get('version')}")
    kind = doc["kind"]
    if kind in ("tent", "stunted"):
        shape = ModalShape(doc["b"], doc["epsilon"])
        maker = make_tent if kind == "tent" else make_stunted
        return maker(shape, doc["v"])
    if kind == "cubic":
        if "alpha" in doc:
            return make_cubic(doc["alpha"], doc["beta"])
        c = doc["coeffs"]
        return make_cubic(c[3], c[2])
    if kind == "quartic":
        return PolynomialMap(coeffs=tuple(doc["coeffs"]), kind="quartic", epsilon=doc["epsilon"])
    raise DomainError(f"unknown map kind {kind!r}")

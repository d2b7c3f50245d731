"""Floating-point checks for derivative growth of interval diffeomorphisms.

Derivative products along orbits are accumulated in log space so iterate
counts in the tens of thousands cannot overflow; grid maxima are always
lower bounds on the true suprema, so the growth bound below is tested as a
necessary consequence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

FIXED_POINT_TOL = 1e-10
PARABOLIC_TOL = 1e-9


class HyperbolicFixedPointError(ValueError):
    """A declared fixed point has derivative away from 1."""


@dataclass(frozen=True)
class SmoothMap:
    """Closed-form interval map with derivative access."""

    name: str
    f: Callable[[np.ndarray], np.ndarray]
    df: Callable[[np.ndarray], np.ndarray]
    a: float
    b: float
    fixed_points: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        if not self.a < self.b:
            raise ValueError("need a < b")
        for p in self.fixed_points:
            if abs(float(self.f(np.float64(p))) - p) > FIXED_POINT_TOL:
                raise ValueError(f"declared fixed point {p} moves under the map")

    @property
    def length(self) -> float:
        return self.b - self.a

    def grid(self, n: int) -> np.ndarray:
        return np.linspace(self.a, self.b, n)

    def restrict(self, a2: float, b2: float) -> "SmoothMap":
        """Restriction to an invariant-enough subinterval (no new fixed points)."""
        if not self.a <= a2 < b2 <= self.b:
            raise ValueError("subinterval escapes the domain")
        fps = tuple(p for p in self.fixed_points if a2 <= p <= b2)
        return SmoothMap(f"{self.name}|[{a2},{b2}]", self.f, self.df, a2, b2, fps)

    def renormalize(self) -> "SmoothMap":
        """Affine conjugate living on [0,1]; its derivative is df(phi^-1(u))."""
        a, b, L = self.a, self.b, self.length
        f, df = self.f, self.df
        return SmoothMap(
            f"{self.name}~",
            lambda u: (f(a + L * u) - a) / L,
            lambda u: df(a + L * u),
            0.0,
            1.0,
            tuple((p - a) / L for p in self.fixed_points),
        )


def identity_map() -> SmoothMap:
    return SmoothMap("identity", lambda x: x, lambda x: np.ones_like(x), 0.0, 1.0, (0.0, 1.0))


def affine_map(slope: float, a: float = 0.0, b: float = 1.0) -> SmoothMap:
    """x -> a + slope*(x-a); contraction toward a when slope < 1."""
    if slope <= 0:
        raise ValueError("slope must be positive")
    fps = (a,) if slope != 1 else (a, b)
    return SmoothMap(
        f"affine({slope})",
        lambda x: a + slope * (x - a),
        lambda x: np.full_like(np.asarray(x, dtype=float), slope),
        a,
        b,
        fps,
    )


def parabolic_map(c: float) -> SmoothMap:
    """x + c*x^2*(1-x)^2 on [0,1]: both endpoints parabolic, no interior
    fixed points, derivative positive for c < 3*sqrt(3)."""
    if not 0 < c < 4:
        raise ValueError("parameter must lie in (0, 4)")
    return SmoothMap(
        f"parabolic({c})",
        lambda x: x + c * x ** 2 * (1 - x) ** 2,
        lambda x: 1 + 2 * c * x * (1 - x) * (1 - 2 * x),
        0.0,
        1.0,
        (0.0, 1.0),
    )


def doubling_fixed_point_map() -> SmoothMap:
    """2x/(1+x) on [0,1]: hyperbolic at 0 with derivative 2."""
    return SmoothMap(
        "mobius-doubling",
        lambda x: 2 * x / (1 + x),
        lambda x: 2 / (1 + x) ** 2,
        0.0,
        1.0,
        (0.0, 1.0),
    )


def mobius_contraction_map() -> SmoothMap:
    """x/(2-x) on [0,1]: onto, contracting toward 0 (inverse of doubling)."""
    return SmoothMap(
        "mobius-contraction",
        lambda x: x / (2 - x),
        lambda x: 2 / (2 - x) ** 2,
        0.0,
        1.0,
        (0.0, 1.0),
    )


# ---------------------------------------------------------------------------
# iterate derivatives
# ---------------------------------------------------------------------------


def _log_derivative_sweep(g: SmoothMap, k_max: int, grid: int) -> np.ndarray:
    """max over the grid of log(Dg^k), for every k = 1..k_max."""
    x = g.grid(grid)
    logprod = np.zeros_like(x)
    out = np.empty(k_max)
    for k in range(k_max):
        d = g.df(x)
        if np.any(d <= 0):
            raise ValueError("derivative must stay positive")
        logprod += np.log(d)
        out[k] = logprod.max()
        x = np.clip(g.f(x), g.a, g.b)
    return out


def iterate_derivative_max(
    g: SmoothMap, k: int, grid: int = 10_001, refine_rounds: int = 2
) -> float:
    """Grid maximum of Dg^k with local refinement near the argmax.

    Always a lower bound for the true supremum.
    """
    if k == 0:
        return 1.0
    x = g.grid(grid)
    best = -math.inf
    for _ in range(refine_rounds + 1):
        xs = x.copy()
        logprod = np.zeros_like(x)
        for _ in range(k):
            d = g.df(xs)
            if np.any(d <= 0):
                raise ValueError("derivative must stay positive")
            logprod += np.log(d)
            xs = np.clip(g.f(xs), g.a, g.b)
        i = int(np.argmax(logprod))
        best = max(best, float(logprod[i]))
        lo = x[max(0, i - 1)]
        hi = x[min(len(x) - 1, i + 1)]
        x = np.linspace(lo, hi, 513)
    return float(math.exp(best))


@dataclass(frozen=True)
class HolderEstimate:
    alpha: float
    constant: float
    grid: int
    pairs: int


def holder_constant_estimate(
    g: SmoothMap, alpha: float, grid: int = 1025
) -> HolderEstimate:
    """Grid-pair estimate of the Holder constant of log(Dg)."""
    if not 0 < alpha <= 1:
        raise ValueError("exponent must lie in (0, 1]")
    x = g.grid(grid)
    d = g.df(x)
    if np.any(d <= 0):
        raise ValueError("derivative must stay positive")
    ld = np.log(d)
    num = np.abs(ld[:, None] - ld[None, :])
    den = np.abs(x[:, None] - x[None, :]) ** alpha
    np.fill_diagonal(den, 1.0)
    np.fill_diagonal(num, 0.0)
    c = float((num / den).max())
    return HolderEstimate(alpha, c, grid, grid * (grid - 1) // 2)


@dataclass(frozen=True)
class GrowthBoundReport:
    alpha: float
    c_g: float
    k_checked: int
    all_pass: bool
    first_failure: int | None
    min_log_slack: float  # min over k of log(bound) - log(grid max)


def growth_bound_check(
    g: SmoothMap,
    alpha: float,
    k_max: int,
    grid: int = 4097,
    holder_grid: int = 1025,
) -> GrowthBoundReport:
    """Test  max Dg^k <= exp(3 * C * |I|^alpha * k^(1-alpha))  for k <= k_max.

    Requires every declared fixed point to be parabolic (derivative 1).
    """
    if not 0 < alpha < 1:
        raise ValueError("exponent must lie in (0, 1)")
    for p in g.fixed_points:
        dp = float(g.df(np.float64(p)))
        if abs(dp - 1.0) > PARABOLIC_TOL:
            raise HyperbolicFixedPointError(
                f"fixed point {p} has derivative {dp}, bound requires 1"
            )
    c = holder_constant_estimate(g, alpha, holder_grid).constant
    logmax = _log_derivative_sweep(g, k_max, grid)
    ks = np.arange(1, k_max + 1, dtype=float)
    logbound = 3.0 * c * g.length ** alpha * ks ** (1.0 - alpha)
    ok = logmax <= logbound + 1e-12
    first_fail = None if bool(ok.all()) else int(np.argmin(ok)) + 1
    return GrowthBoundReport(
        alpha,
        c,
        k_max,
        bool(ok.all()),
        first_fail,
        float((logbound - logmax).min()),
    )


def blowup_scan(g: SmoothMap, k_max: int, grid: int = 4097) -> list[int]:
    """All k <= k_max with grid-max Dg^k > k."""
    logmax = _log_derivative_sweep(g, k_max, grid)
    ks = np.arange(1, k_max + 1, dtype=float)
    return [int(k) for k, ok in zip(ks, logmax > np.log(ks)) if ok]


# ---------------------------------------------------------------------------
# wandering intervals
# ---------------------------------------------------------------------------


def _invert(g: SmoothMap, y: float, tol: float = 1e-14) -> float:
    """Preimage under the increasing map by bisection."""
    lo, hi = g.a, g.b
    if float(g.f(np.float64(lo))) >= y:
        return lo
    if float(g.f(np.float64(hi))) <= y:
        return hi
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if float(g.f(np.float64(mid))) < y:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class WanderingReport:
    disjoint: bool
    partial_sums: tuple[float, ...]
    final_sum: float
    within_interval: bool


def wandering_sum_check(g: SmoothMap, x0: float, k_max: int) -> WanderingReport:
    """Check the backward images of (x0, g(x0)) are disjoint with summable
    lengths bounded by |I|.

    The k-th backward image has endpoints c_k, c_(k+1) on the single
    preimage orbit c_0 = g(x0), c_(k+1) = g^-1(c_k); sharing the computed
    endpoint makes disjointness an exact monotonicity check.
    """
    gx0 = float(g.f(np.float64(x0)))
    if abs(gx0 - x0) <= FIXED_POINT_TOL:
        raise ValueError(f"{x0} is (numerically) a fixed point")
    orbit = [gx0, x0]
    for _ in range(k_max):
        orbit.append(_invert(g, orbit[-1]))
    steps = [b - a for a, b in zip(orbit, orbit[1:])]
    # open intervals: shared endpoints and (converged) empty images are fine
    disjoint = all(s >= 0 for s in steps) or all(s <= 0 for s in steps)
    sums = []
    acc = 0.0
    for s in steps[1:]:  # lengths of the k >= 1 backward images
        acc += abs(s)
        sums.append(acc)
    return WanderingReport(
        disjoint,
        tuple(sums),
        acc,
        acc <= g.length + 1e-12,
    )

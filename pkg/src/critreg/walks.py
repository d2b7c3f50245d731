"""Seeded Markov walks on the nonnegative orthant with path certificates.

The kernel favors large coordinates: from state i the walk increments
coordinate j with probability (1+i_j)/(|i|+d), which makes the arrival law
after n steps exactly uniform on the sphere of radius n.  A sampled path is
certified against two bounds with B = max(3(L/A_d)^(1/d), 3L/A_d) and
A_d = 1/(d-1)!:

* cost bound:      sum of weight^(1/d) over the first n points
                   <= B * (log2(n+1))^(1-1/d)
* terminal bound:  weight at the endpoint <= B / (n+1)^(d-1)

Logarithms here are base 2: the harmonic-sum comparison H_n <= log_b(n+1)
behind the cost bound holds for every base b <= 2 and for no larger base,
so base 2 is the choice that keeps the stated constants valid.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .lattice import (
    Coords,
    LatticePath,
    LengthFamily,
    SizeGuardError,
    path_cost,
    sphere_constant,
    sphere_size,
)

SPHERE_GUARD = 10 ** 6
DP_STATE_GUARD = 2 * 10 ** 6
COST_REL_TOL = 1e-12


@dataclass(frozen=True)
class WalkKernel:
    d: int

    def __post_init__(self) -> None:
        if self.d < 1:
            raise ValueError("dimension must be positive")


def transition_distribution(
    kernel: WalkKernel, state: Coords
) -> list[tuple[int, Fraction]]:
    """Exact per-direction step probabilities from a cone state."""
    if len(state) != kernel.d:
        raise ValueError("state dimension mismatch")
    if any(c < 0 for c in state):
        raise ValueError(f"state {state} outside the nonnegative cone")
    denom = sum(state) + kernel.d
    return [(j, Fraction(1 + state[j], denom)) for j in range(kernel.d)]


def arrival_distribution(kernel: WalkKernel, n: int) -> dict[Coords, Fraction]:
    """Exact n-step arrival law from the origin, by sphere-to-sphere DP."""
    if n < 0:
        raise ValueError("step count must be nonnegative")
    if sphere_size(kernel.d, n) > SPHERE_GUARD:
        raise SizeGuardError(f"sphere of radius {n} exceeds {SPHERE_GUARD} states")
    dist: dict[Coords, Fraction] = {tuple([0] * kernel.d): Fraction(1)}
    for _ in range(n):
        nxt: dict[Coords, Fraction] = {}
        for state, p in dist.items():
            for j, q in transition_distribution(kernel, state):
                t = list(state)
                t[j] += 1
                key = tuple(t)
                nxt[key] = nxt.get(key, Fraction(0)) + p * q
        dist = nxt
    return dist


def lemma_bound(family: LengthFamily, d: int) -> tuple[float, Fraction]:
    """(B as float, exact rational used for the terminal-weight side).

    When L/A_d >= 1 the max is attained by the exact branch 3L/A_d; in the
    other case the float value is frozen into an exact binary rational so
    the terminal check stays deterministic.
    """
    L = family.total_mass
    a_d = sphere_constant(d)
    exact = 3 * L / a_d
    root = 3.0 * float(L / a_d) ** (1.0 / d)
    if exact >= root:
        return float(exact), exact
    return root, Fraction(root)


def cost_bound(b: float, d: int, n: int) -> float:
    return b * math.log2(n + 1) ** (1.0 - 1.0 / d)


@dataclass(frozen=True)
class PathCertificate:
    """The two path bounds evaluated on one sampled walk."""

    path: LatticePath
    n: int
    cost: float
    terminal_weight: Fraction
    bound_b: float
    bound_b_exact: Fraction
    first_ok: bool
    second_ok: bool

    @property
    def ok(self) -> bool:
        return self.first_ok and self.second_ok


def certify(path: LatticePath, family: LengthFamily) -> PathCertificate:
    """Recompute both bounds for a path, independently of how it was drawn."""
    d = family.d
    n = len(path)
    cost = float(path_cost(path, family, Fraction(1, d)))
    terminal = family.weight(path.points[-1])
    b_float, b_exact = lemma_bound(family, d)
    first = cost <= cost_bound(b_float, d, n) * (1.0 + COST_REL_TOL)
    second = terminal * (n + 1) ** (d - 1) <= b_exact
    return PathCertificate(path, n, cost, terminal, b_float, b_exact, first, second)


def sample_path(kernel: WalkKernel, n: int, seed: int) -> LatticePath:
    """One seeded walk of n steps from the origin; exact integer sampling.

    At step t the direction weights 1+i_j sum to t+d, so a uniform draw in
    range(t+d) reproduces the kernel probabilities without any floats.
    """
    rng = random.Random(seed)
    state = [0] * kernel.d
    pts = [tuple(state)]
    for t in range(n):
        r = rng.randrange(t + kernel.d)
        acc = 0
        for j in range(kernel.d):
            acc += 1 + state[j]
            if r < acc:
                state[j] += 1
                break
        pts.append(tuple(state))
    return LatticePath(tuple(pts))


class CertificateSearchError(RuntimeError):
    """Exhausted the attempt budget; carries the best certificate seen."""

    def __init__(self, attempts: int, best: PathCertificate | None) -> None:
        super().__init__(f"no certified path within {attempts} attempts")
        self.attempts = attempts
        self.best = best


def _attempt_seed(seed: int, attempt: int) -> int:
    return (seed * 0x9E3779B97F4A7C15 + attempt) % 2 ** 63


def sample_and_certify(
    kernel: WalkKernel,
    family: LengthFamily,
    n: int,
    seed: int,
    max_attempts: int = 100,
) -> tuple[PathCertificate, int]:
    """First certified sampled path, with the number of attempts used."""
    if family.d != kernel.d:
        raise ValueError("family dimension mismatch")
    best: PathCertificate | None = None
    for attempt in range(1, max_attempts + 1):
        path = sample_path(kernel, n, _attempt_seed(seed, attempt))
        cert = certify(path, family)
        if cert.ok:
            return cert, attempt
        if best is None or cert.cost < best.cost:
            best = cert
    raise CertificateSearchError(max_attempts, best)


@dataclass(frozen=True)
class BatchSummary:
    d: int
    n: int
    samples: int
    success_fraction: float
    mean_cost: float
    mean_cost_bound: float
    cost_bound: float
    bound_b: float

    @property
    def mean_ok(self) -> bool:
        return self.mean_cost <= self.mean_cost_bound


def batch_certificates(
    kernel: WalkKernel,
    family: LengthFamily,
    n: int,
    samples: int,
    seed: int,
    mean_slack: float = 1.05,
) -> BatchSummary:
    """Vectorized Monte-Carlo pass: joint success fraction and mean cost.

    Walk states for all samples advance in lockstep (the step-t denominator
    t+d is state-independent); costs accumulate through log2 weights so the
    endpoint weights of long walks cannot underflow.  Terminal-weight checks
    are done exactly per sample afterwards.
    """
    d = kernel.d
    rng = np.random.default_rng(seed)
    counts = np.zeros((samples, d), dtype=np.int64)
    costs = np.zeros(samples)
    for t in range(n):
        costs += np.exp2(family.np_log2_weight(counts) / d)
        r = rng.integers(0, t + d, size=samples)
        cum = np.cumsum(counts + 1, axis=1)
        j = np.argmax(r[:, None] < cum, axis=1)
        counts[np.arange(samples), j] += 1
    b_float, b_exact = lemma_bound(family, d)
    cb = cost_bound(b_float, d, n)
    first = costs <= cb * (1.0 + COST_REL_TOL)
    rhs = b_exact
    second = np.fromiter(
        (
            family.weight(tuple(int(c) for c in row)) * (n + 1) ** (d - 1) <= rhs
            for row in counts
        ),
        dtype=bool,
        count=samples,
    )
    mean_bound = float(family.total_mass / sphere_constant(d)) ** (1.0 / d)
    mean_bound *= math.log2(n + 1) ** (1.0 - 1.0 / d) * mean_slack
    return BatchSummary(
        d=d,
        n=n,
        samples=samples,
        success_fraction=float(np.mean(first & second)),
        mean_cost=float(np.mean(costs)),
        mean_cost_bound=mean_bound,
        cost_bound=cb,
        bound_b=b_float,
    )


def brute_min_cost(
    family: LengthFamily, d: int, n: int
) -> tuple[LatticePath, float]:
    """Minimum-cost monotone path from the origin, by exact sphere DP.

    Serves as the independent oracle for the sampled certificates: the
    returned cost is a true minimum over all monotone paths of length n.
    """
    states = sum(sphere_size(d, j) for j in range(n + 1))
    if states > DP_STATE_GUARD:
        raise SizeGuardError(f"{states} DP states exceed {DP_STATE_GUARD}")
    origin = tuple([0] * d)
    best: dict[Coords, tuple[float, Coords | None]] = {origin: (0.0, None)}
    frontier = [origin]
    for _ in range(n):
        nxt: dict[Coords, tuple[float, Coords | None]] = {}
        for state in frontier:
            base = best[state][0] + 2.0 ** (family.log2_weight(state) / d)
            for j in range(d):
                t = list(state)
                t[j] += 1
                key = tuple(t)
                if key not in nxt or base < nxt[key][0]:
                    nxt[key] = (base, state)
        best.update(nxt)
        frontier = list(nxt)
    end = min(frontier, key=lambda s: best[s][0])
    pts = [end]
    while True:
        prev = best[pts[-1]][1]
        if prev is None:
            break
        pts.append(prev)
    return LatticePath(tuple(reversed(pts))), best[end][0]


def enumerate_min_cost(
    family: LengthFamily, d: int, n: int, limit: int = 10 ** 5
) -> float:
    """Exhaustive minimum over all d^n monotone paths (test oracle)."""
    if d ** n > limit:
        raise SizeGuardError(f"{d ** n} paths exceed {limit}")
    best = math.inf

    def rec(state: list[int], j: int, acc: float) -> None:
        nonlocal best
        if j == n:
            best = min(best, acc)
            return
        acc += 2.0 ** (family.log2_weight(tuple(state)) / d)
        for k in range(d):
            state[k] += 1
            rec(state, j + 1, acc)
            state[k] -= 1

    rec([0] * d, 0, 0.0)
    return best

"""Inductive parallelepiped sequences, their multiplicity, roundness, and
the vertical subdivision with level classification.

Three box constructions are provided:

* ``B-d2``  -- staggered planar rectangles whose endpoints are floors of
  4^(n*alpha); two factors, every step raises one lower and one upper
  endpoint by the factor's own growth base.
* ``B-general`` -- the d >= 3 analogue seeded at [[1, 4^d]]^d: at step n the
  factor indexed by the residue class m(n) has its lower endpoint scaled by
  2^(d*alpha_m) (with a catch-up to one growth factor below the upper one,
  which is what keeps the cover multiplicity at d+2) and the cyclically
  next factor has its upper endpoint scaled likewise.
* ``FF`` -- the (d-1)-dimensional sequence seeded at [1, 1+4^(d+1)]^(d-1)
  whose factor i scales by 4^i, once per cycle on each endpoint, the last
  factor moving first.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Sequence

from .lattice import Box

N_MAX_GUARD = 200


def integer_root(x: int, q: int) -> int:
    """Largest r >= 0 with r**q <= x (exact, arbitrary precision)."""
    if x < 0 or q < 1:
        raise ValueError("need x >= 0 and q >= 1")
    if x in (0, 1) or q == 1:
        return x
    r = int(round(x ** (1.0 / q))) + 1
    while r ** q > x:
        r -= 1
    while (r + 1) ** q <= x:
        r += 1
    return r


def floor_power(base: int, exponent: Fraction) -> int:
    """floor(base**exponent) for a nonnegative rational exponent, exactly."""
    e = Fraction(exponent)
    if e < 0:
        raise ValueError("exponent must be nonnegative")
    return integer_root(base ** e.numerator, e.denominator)


def _scale_floor(value: int, base2_exponent: Fraction) -> int:
    """floor(2**base2_exponent * value) exactly, for value >= 0."""
    e = Fraction(base2_exponent)
    return integer_root((2 ** e.numerator) * value ** e.denominator, e.denominator)


def _scale_ceil_inv(value: int, base2_exponent: Fraction) -> int:
    """ceil(value / 2**base2_exponent) exactly, for value >= 0."""
    e = Fraction(base2_exponent)
    p, q = e.numerator, e.denominator
    target = value ** q
    r = integer_root(target // (2 ** p), q)
    while r ** q * 2 ** p < target:
        r += 1
    return r


@dataclass(frozen=True)
class BoxSequence:
    kind: str
    start_index: int
    boxes: tuple[Box, ...]
    alphas: tuple[Fraction, ...] | None = None
    d: int | None = None

    def box(self, n: int) -> Box:
        return self.boxes[n - self.start_index]

    def indices(self) -> range:
        return range(self.start_index, self.start_index + len(self.boxes))

    def __len__(self) -> int:
        return len(self.boxes)

    def touched(self, n: int) -> tuple[int, int]:
        """(lower-raised axis, upper-raised axis) of the step Q(n) -> Q(n+1)."""
        if self.kind == "B-d2":
            low = n % 2
        elif self.kind == "B-general":
            low = (n - 1) % len(self.boxes[0].intervals)
        elif self.kind == "FF":
            low = (n - 1) % self.boxes[0].dim
        else:
            raise ValueError(f"unknown kind {self.kind!r}")
        return low, (low + 1) % self.boxes[0].dim


def _check_alphas(alphas: Sequence[Fraction]) -> tuple[Fraction, ...]:
    a = tuple(Fraction(x) for x in alphas)
    if any(not 0 < x <= 1 for x in a):
        raise ValueError("exponents must lie in (0, 1]")
    if sum(a) != 1:
        raise ValueError(f"exponent sum must be 1, got {sum(a)}")
    return a


def _build_b_d2(alphas: Sequence[Fraction], n_max: int) -> BoxSequence:
    a1, a2 = _check_alphas(alphas)
    if len((a1, a2)) != 2:
        raise ValueError("B-d2 takes two exponents")
    boxes = []
    for n in range(1, n_max + 1):
        m, odd = divmod(n - 1, 2)
        if odd == 0:  # n = 2m+1
            iv1 = (floor_power(4, m * a1), floor_power(4, (m + 1) * a1))
            iv2 = (floor_power(4, m * a2), floor_power(4, (m + 2) * a2))
        else:  # n = 2m+2
            iv1 = (floor_power(4, m * a1), floor_power(4, (m + 2) * a1))
            iv2 = (floor_power(4, (m + 1) * a2), floor_power(4, (m + 2) * a2))
        boxes.append(Box((iv1, iv2)))
    return BoxSequence("B-d2", 1, tuple(boxes), alphas=(a1, a2), d=2)


def _build_b_general(alphas: Sequence[Fraction], n_max: int) -> BoxSequence:
    a = _check_alphas(alphas)
    d = len(a)
    if d < 3:
        raise ValueError("B-general needs d >= 3 (use B-d2 for two factors)")
    growth = [d * ak for ak in a]  # endpoints scale by 2^(d*alpha_k)
    boxes = [Box(tuple((1, 4 ** d) for _ in range(d)))]
    for n in range(1, n_max):
        prev = boxes[-1].intervals
        m = (n - 1) % d  # 0-based residue of n; factor m lower, factor m+1 upper
        mm = (m + 1) % d
        ivs = list(prev)
        x, y = ivs[m]
        # the raised lower endpoint also catches up to within one growth
        # factor of the upper one; without the catch-up the seed's aspect
        # ratio 4^d persists and the cover multiplicity exceeds d+2
        new_x = max(_scale_floor(x, growth[m]), _scale_ceil_inv(y, growth[m]))
        if new_x > y:
            raise ValueError(f"sequence degenerates at step {n}: {new_x} > {y}")
        ivs[m] = (new_x, y)
        x2, y2 = ivs[mm]
        ivs[mm] = (x2, _scale_floor(y2, growth[mm]))
        boxes.append(Box(tuple(ivs)))
    return BoxSequence("B-general", 1, tuple(boxes), alphas=a, d=d)


def _build_ff(d: int, n_max: int) -> BoxSequence:
    if d < 3:
        raise ValueError("FF sequence needs d >= 3")
    dim = d - 1
    side = 1 + 4 ** (d + 1)
    boxes = [Box(tuple((1, side) for _ in range(dim)))]
    for n in range(0, n_max):
        prev = boxes[-1].intervals
        i = (n - 1) % dim  # 0-based factor whose lower scales by 4^(i+1)
        j = (i + 1) % dim  # cyclically next factor, upper scales by 4^(j+1)
        ivs = list(prev)
        x, y = ivs[i]
        new_x = 4 ** (i + 1) * x
        if new_x > y:
            raise ValueError(f"sequence degenerates at step {n}: {new_x} > {y}")
        ivs[i] = (new_x, y)
        x2, y2 = ivs[j]
        ivs[j] = (x2, 4 ** (j + 1) * y2)
        boxes.append(Box(tuple(ivs)))
    return BoxSequence("FF", 0, tuple(boxes), d=d)


def build_sequence(
    kind: str,
    *,
    alphas: Sequence[Fraction] | None = None,
    d: int | None = None,
    n_max: int,
) -> BoxSequence:
    """Build one of the inductive box sequences.

    ``B-d2`` and ``B-general`` take per-direction exponents summing to 1 and
    produce boxes Q(1)..Q(n_max); ``FF`` takes the dimension d and produces
    Q(0)..Q(n_max) in Z^(d-1).
    """
    if not 1 <= n_max <= N_MAX_GUARD:
        raise ValueError(f"n_max must be in [1, {N_MAX_GUARD}]")
    if kind == "B-d2":
        if alphas is None:
            raise ValueError("B-d2 needs alphas")
        return _build_b_d2(alphas, n_max)
    if kind == "B-general":
        if alphas is None:
            raise ValueError("B-general needs alphas")
        return _build_b_general(alphas, n_max)
    if kind == "FF":
        if d is None:
            raise ValueError("FF needs d")
        return _build_ff(d, n_max)
    raise ValueError(f"unknown sequence kind {kind!r}")


def sequence_multiplicity(seq: BoxSequence | Sequence[Box]) -> int:
    """Maximum number of boxes covering a common lattice point.

    Sweeps the corner-induced cell decomposition instead of enumerating
    points: the cover count is constant on every cell of the arrangement.
    """
    boxes = tuple(seq.boxes if isinstance(seq, BoxSequence) else seq)
    if not boxes:
        return 0
    dim = boxes[0].dim
    cuts = []
    for k in range(dim):
        vals = set()
        for b in boxes:
            lo, hi = b.intervals[k]
            vals.add(lo)
            vals.add(hi + 1)
        cuts.append(sorted(vals)[:-1])  # cell representatives: left edges
    best = 0

    def rec(k: int, partial: list[Box]) -> None:
        nonlocal best
        if k == dim:
            if len(partial) > best:
                best = len(partial)
            return
        for v in cuts[k]:
            nxt = [b for b in partial if b.intervals[k][0] <= v <= b.intervals[k][1]]
            if len(nxt) > best:
                rec(k + 1, nxt)

    rec(0, list(boxes))
    return best


# ---------------------------------------------------------------------------
# A-roundness
# ---------------------------------------------------------------------------


def minimal_round_constant(box: Box) -> Fraction | None:
    """Least A >= 1 making the box A-round, or None if no A works.

    The constraints compare every endpoint and side of factor i against the
    i-th power of the first side length; they force positive coordinates.
    """
    s = box.side(0)
    out = Fraction(1)
    for i in range(1, box.dim + 1):
        x, y = box.intervals[i - 1]
        if x <= 0:
            return None
        p = Fraction(s) ** i
        side = 1 + y - x
        for c in (p / x, Fraction(y) / p, p / side, Fraction(side) / p):
            if c > out:
                out = c
    return out


def is_a_round(box: Box, a: Fraction) -> bool:
    """Check the four inequality families of roundness exactly."""
    if a < 1:
        raise ValueError("roundness constant must be >= 1")
    m = minimal_round_constant(box)
    return m is not None and m <= a


# ---------------------------------------------------------------------------
# vertical subdivision
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SubdivisionNode:
    box: Box
    depth: int  # number of chain indices leading here (root: 0)
    chain: tuple[int, ...]  # 1-based piece indices
    trailing: bool  # True when this piece has index M at its level

    def is_leaf(self, tree: "SubdivisionTree") -> bool:
        return self.trailing or self.depth == tree.depth


@dataclass(frozen=True)
class LevelInfo:
    level: int
    chain: tuple[int, ...]
    admissible: bool


@dataclass(frozen=True)
class SubdivisionTree:
    """Nested cut of an A-round box along its last coordinate.

    At depth k the pieces have last-axis extent ``piece_lengths[k-1]`` (the
    trailing piece may be shorter) and there are ``counts[k-1]`` of them per
    full parent.  A level is admissible when its chain never lands in a
    trailing piece.
    """

    box: Box
    a: Fraction
    depth: int
    piece_lengths: tuple[int, ...]
    counts: tuple[int, ...]
    levels: tuple[LevelInfo, ...]

    def level(self, i: int) -> LevelInfo:
        lo, _ = self.box.intervals[-1]
        return self.levels[i - lo]

    def non_admissible_fraction(self) -> Fraction:
        bad = sum(1 for lv in self.levels if not lv.admissible)
        return Fraction(bad, len(self.levels))

    def chain_box(self, chain: Sequence[int]) -> Box:
        """The nested piece reached by a (1-based) chain prefix."""
        node = self.box
        axis = self.box.dim - 1
        for k, m in enumerate(chain):
            lo, hi = node.intervals[axis]
            plen = self.piece_lengths[k]
            lo_k = lo + (m - 1) * plen
            hi_k = min(lo_k + plen - 1, hi)
            if m < 1 or lo_k > hi:
                raise ValueError(f"chain index {m} out of range at depth {k + 1}")
            ivs = list(node.intervals)
            ivs[axis] = (lo_k, hi_k)
            node = Box(tuple(ivs))
        return node

    def nodes(self) -> Iterator[SubdivisionNode]:
        """Walk the tree; children of every node partition its extent."""
        axis = self.box.dim - 1

        def rec(node: SubdivisionNode) -> Iterator[SubdivisionNode]:
            yield node
            if node.is_leaf(self):
                return
            lo, hi = node.box.intervals[axis]
            plen = self.piece_lengths[node.depth]
            m = 0
            while lo <= hi:
                m += 1
                top = min(lo + plen - 1, hi)
                ivs = list(node.box.intervals)
                ivs[axis] = (lo, top)
                child = SubdivisionNode(
                    Box(tuple(ivs)),
                    node.depth + 1,
                    node.chain + (m,),
                    trailing=(top == hi),
                )
                yield from rec(child)
                lo = top + 1

        yield from rec(SubdivisionNode(self.box, 0, (), trailing=False))

    def leaves(self) -> Iterator[SubdivisionNode]:
        return (n for n in self.nodes() if n.depth > 0 and n.is_leaf(self))


def vertical_subdivision(box: Box, a: Fraction) -> SubdivisionTree:
    """Cut an A-round box along its last axis into the nested piece tree.

    Depth-k pieces have last-axis length ``y_(dim-k) - 1`` taken from the
    ambient box's upper endpoints, so the piece lengths shrink geometrically
    down to ``y_1 - 1``.  Per-depth branching counts are uniform because all
    non-trailing pieces at one depth share the same extent.
    """
    if box.dim < 2:
        raise ValueError("vertical subdivision needs at least 2 axes")
    if not is_a_round(box, a):
        raise ValueError(f"box is not {a}-round (minimal {minimal_round_constant(box)})")
    dim = box.dim
    depth = dim - 1
    plens = []
    for k in range(1, depth + 1):
        y = box.intervals[dim - k - 1][1]
        if y < 2:
            raise ValueError(f"degenerate piece length from endpoint y={y}")
        plens.append(y - 1)
    # uniform per-depth counts: root extent for depth 1, full piece after that
    counts = []
    extent = box.side(dim - 1)
    for k, plen in enumerate(plens):
        counts.append(max(1, -(-extent // plen)))
        extent = plen
    lo, hi = box.intervals[-1]
    levels = []
    for i in range(lo, hi + 1):
        chain: list[int] = []
        seg_lo, seg_hi = lo, hi
        admissible = True
        for k, plen in enumerate(plens):
            m = (i - seg_lo) // plen + 1
            chain.append(m)
            top = min(seg_lo + m * plen - 1, seg_hi)
            is_trailing = top == seg_hi
            if is_trailing:
                admissible = False
                break
            seg_lo, seg_hi = seg_lo + (m - 1) * plen, top
        levels.append(LevelInfo(i, tuple(chain), admissible))
    return SubdivisionTree(
        box, Fraction(a), depth, tuple(plens), tuple(counts), tuple(levels)
    )


def side_growth_bracket(seq: BoxSequence) -> float:
    """Smallest c with side_i(n) / 4^(i*n/(d-1)) in [1/c, c] over the FF range."""
    if seq.kind != "FF" or seq.d is None:
        raise ValueError("side bracket is defined for FF sequences")
    dim = seq.d - 1
    c = 1.0
    for n in seq.indices():
        b = seq.box(n)
        for i in range(1, dim + 1):
            # compare through log2 so huge endpoints cannot overflow
            gap = abs(math.log2(b.side(i - 1)) - 2.0 * i * n / dim)
            c = max(c, 2.0 ** gap)
    return c


def inocent_constant(seq: BoxSequence) -> Fraction:
    """Largest D2 with the two side-retention inequalities along the sequence.

    Measures min over steps of new-side/old-side for the lower-raised factor
    and old-side/new-side for the upper-raised factor.
    """
    if seq.kind not in ("B-d2", "B-general"):
        raise ValueError("inocent constant applies to B sequences")
    out = None
    for n in seq.indices():
        if n + 1 not in seq.indices():
            break
        cur, nxt = seq.box(n), seq.box(n + 1)
        low, up = seq.touched(n)
        r1 = Fraction(nxt.side(low), cur.side(low))
        r2 = Fraction(cur.side(up), nxt.side(up))
        for r in (r1, r2):
            out = r if out is None else min(out, r)
    if out is None or out <= 0:
        raise ValueError("sequence too short to measure the retention constant")
    return out

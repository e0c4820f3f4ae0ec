"""Tree-based geometric partitioners over grid elements.

Cuts always fall on grid-element boundaries. A cut at depth ``d`` is along
x when ``(first_dim + d)`` is even, unless the node's rectangle cannot be
split that way, in which case the other axis is used.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator, List, Optional, TextIO, Tuple

import numpy as np

from .grid import CostField, GridElementGrid, Rect

X, Y = 0, 1


@dataclass(frozen=True)
class Subdomain:
    """Leaf record: rank id, element rectangle and depth below the root."""

    pid: int
    rect: Rect
    height: int


@dataclass
class TreeNode:
    rect: Rect
    rank0: int
    nranks: int
    height: int
    cut_dim: Optional[int] = None
    cut_index: Optional[int] = None  # absolute element boundary
    left: Optional["TreeNode"] = None
    right: Optional["TreeNode"] = None

    @property
    def is_leaf(self) -> bool:
        return self.left is None

    def subdomain(self) -> Subdomain:
        return Subdomain(self.rank0, self.rect, self.height)


@dataclass
class PartitionTree:
    root: TreeNode
    geg: GridElementGrid
    first_dim: int = X

    @property
    def n_ranks(self) -> int:
        return self.root.nranks

    def nodes(self) -> Iterator[TreeNode]:
        """Pre-order traversal."""
        stack = [self.root]
        while stack:
            node = stack.pop()
            yield node
            if not node.is_leaf:
                stack.append(node.right)
                stack.append(node.left)

    def internal_nodes(self) -> List[TreeNode]:
        return [n for n in self.nodes() if not n.is_leaf]

    def leaves(self) -> List[Subdomain]:
        return sorted((n.subdomain() for n in self.nodes() if n.is_leaf), key=lambda s: s.pid)

    @property
    def depth(self) -> int:
        return max(n.height for n in self.nodes() if n.is_leaf)


@dataclass
class PartitionMap:
    owner: np.ndarray  # (gx, gy) int rank ids
    n_ranks: int

    def __post_init__(self):
        self.owner = np.asarray(self.owner, dtype=np.int64)
        if self.owner.ndim != 2:
            raise ValueError("owner must be a 2D (gx, gy) array")
        if self.owner.size and (self.owner.min() < 0 or self.owner.max() >= self.n_ranks):
            raise ValueError("owner ids out of range [0, P)")

    @property
    def shape(self) -> Tuple[int, int]:
        return self.owner.shape

    def rank_loads(self, cf: CostField) -> np.ndarray:
        return np.bincount(self.owner.ravel(), weights=cf.cost.ravel(), minlength=self.n_ranks)

    def elements_owned(self) -> np.ndarray:
        return np.bincount(self.owner.ravel(), minlength=self.n_ranks)

    def __eq__(self, other):
        return (isinstance(other, PartitionMap) and self.n_ranks == other.n_ranks
                and np.array_equal(self.owner, other.owner))


# -- cut search ---------------------------------------------------------------

def _extent(rect: Rect, dim: int) -> int:
    return rect[1] - rect[0] if dim == X else rect[3] - rect[2]


def _left_cost(cf: CostField, rect: Rect, dim: int, k: int):
    ix0, ix1, iy0, iy1 = rect
    if dim == X:
        return cf.region_cost((ix0, ix0 + k, iy0, iy1))
    return cf.region_cost((ix0, ix1, iy0, iy0 + k))


def _first_at_least(cf, rect, dim, value, lo, hi):
    """Smallest k in [lo, hi] with left cost >= value, or hi + 1."""
    hi += 1
    while lo < hi:
        mid = (lo + hi) // 2
        if _left_cost(cf, rect, dim, mid) >= value:
            hi = mid
        else:
            lo = mid + 1
    return lo


def find_cut(cf: CostField, rect: Rect, dim: int, target_fraction: float,
             k_min: int = 1, k_max: Optional[int] = None) -> int:
    """Relative boundary k whose left cost is closest to fraction * total.

    Bisection over element boundaries using the prefix sums; ties go to
    the smaller k. ``k_min``/``k_max`` narrow the admissible range.
    """
    extent = _extent(rect, dim)
    if extent < 2:
        raise ValueError(f"cannot cut rect {rect} along {'xy'[dim]}: extent {extent} < 2")
    if not 0.0 < target_fraction < 1.0:
        raise ValueError(f"target fraction must be in (0, 1), got {target_fraction}")
    k_min = max(1, k_min)
    k_max = extent - 1 if k_max is None else min(k_max, extent - 1)
    if k_min > k_max:
        raise ValueError(f"empty cut range [{k_min}, {k_max}] for rect {rect}")
    target = target_fraction * cf.region_cost(rect)
    ka = _first_at_least(cf, rect, dim, target, k_min, k_max)
    if ka > k_max:
        best = _left_cost(cf, rect, dim, k_max)
    elif ka == k_min:
        return k_min
    else:
        lo_val = _left_cost(cf, rect, dim, ka - 1)
        hi_val = _left_cost(cf, rect, dim, ka)
        if abs(hi_val - target) < abs(lo_val - target):
            return ka
        best = lo_val
    return _first_at_least(cf, rect, dim, best, k_min, k_max)


# -- recursive bisection --------------------------------------------------------

def _split(rect: Rect, dim: int, cut: int) -> Tuple[Rect, Rect]:
    ix0, ix1, iy0, iy1 = rect
    if dim == X:
        return (ix0, cut, iy0, iy1), (cut, ix1, iy0, iy1)
    return (ix0, ix1, iy0, cut), (ix0, ix1, cut, iy1)


@lru_cache(maxsize=None)
def hostable(w: int, h: int, n: int) -> bool:
    """Whether a w x h element rectangle can be bisected down to n leaves.

    Monotone in w and h, so admissible cut positions form an interval.
    """
    if n == 1:
        return w * h >= 1
    if w * h < n:
        return False
    a, b = n // 2, n - n // 2
    for extent, across in ((w, h), (h, w)):
        for k in range(1, extent):
            if hostable(k, across, a) if extent == w else hostable(across, k, a):
                rest = extent - k
                if hostable(rest, across, b) if extent == w else hostable(across, rest, b):
                    return True
    return False


def _child_ok(rect: Rect, dim: int, k: int, n: int) -> bool:
    w, h = _extent(rect, X), _extent(rect, Y)
    return hostable(k, h, n) if dim == X else hostable(w, k, n)


def _cut_range(rect: Rect, dim: int, n_left: int, n_right: int):
    """Admissible relative cut range keeping both children splittable."""
    extent = _extent(rect, dim)
    ks = range(1, extent)
    lo = next((k for k in ks if _child_ok(rect, dim, k, n_left)), extent)
    hi = next((k for k in reversed(ks) if _child_ok(rect, dim, extent - k, n_right)), 0)
    return lo, hi


def _choose_dim(rect: Rect, preferred: int, n_left: int, n_right: int) -> int:
    for dim in (preferred, 1 - preferred):
        if _extent(rect, dim) >= 2:
            lo, hi = _cut_range(rect, dim, n_left, n_right)
            if lo <= hi:
                return dim
    raise ValueError(f"rect {rect} cannot be bisected into {n_left + n_right} rectangular subdomains")


def _bisect(cf, rect, rank0, n, height, first_dim) -> TreeNode:
    node = TreeNode(rect, rank0, n, height)
    if n == 1:
        return node
    n_left = n // 2
    n_right = n - n_left
    dim = _choose_dim(rect, (first_dim + height) % 2, n_left, n_right)
    lo, hi = _cut_range(rect, dim, n_left, n_right)
    k = find_cut(cf, rect, dim, n_left / n, lo, hi)
    start = rect[0] if dim == X else rect[2]
    node.cut_dim, node.cut_index = dim, start + k
    lrect, rrect = _split(rect, dim, start + k)
    node.left = _bisect(cf, lrect, rank0, n_left, height + 1, first_dim)
    node.right = _bisect(cf, rrect, rank0 + n_left, n_right, height + 1, first_dim)
    return node


def _check_grid(cf: CostField, geg: GridElementGrid):
    if cf.shape != geg.shape:
        raise ValueError(f"cost field shape {cf.shape} does not match grid {geg.shape}")


def urb(cf: CostField, P: int, geg: GridElementGrid, first_dim: int = X) -> PartitionTree:
    """Unbalanced recursive bisection: P ranks, cut fraction follows the rank split."""
    _check_grid(cf, geg)
    if P < 1:
        raise ValueError("need at least one rank")
    if P > geg.n_elements:
        raise ValueError(f"{P} ranks exceed {geg.n_elements} grid elements")
    if not hostable(geg.gx, geg.gy, P):
        raise ValueError(f"{geg.gx}x{geg.gy} elements cannot be bisected into {P} rectangles")
    return PartitionTree(_bisect(cf, geg.full_rect, 0, P, 0, first_dim), geg, first_dim)


def is_power_of_two(n: int) -> bool:
    return n >= 1 and n & (n - 1) == 0


def rcb(cf: CostField, P: int, geg: GridElementGrid, first_dim: int = X) -> PartitionTree:
    """Recursive coordinate bisection (half-load cuts); P must be a power of two."""
    if not is_power_of_two(P):
        raise ValueError(f"RCB needs a power-of-two rank count, got {P}; use URB for arbitrary counts")
    return urb(cf, P, geg, first_dim)


def urb_limited(prev: PartitionTree, cf: CostField, adjust_depth_min: int = 1) -> PartitionTree:
    """Re-optimize only cuts at depth >= adjust_depth_min of ``prev``.

    Topology, rank ranges and cut axes are kept; shallower cuts stay at
    their previous element boundary.
    """
    _check_grid(cf, prev.geg)

    def rebuild(old: TreeNode, rect: Rect) -> TreeNode:
        node = TreeNode(rect, old.rank0, old.nranks, old.height)
        if old.is_leaf:
            return node
        if old.height < adjust_depth_min:
            dim, cut = old.cut_dim, old.cut_index
        else:
            n_left = old.left.nranks
            dim = _choose_dim(rect, old.cut_dim, n_left, old.nranks - n_left)
            lo, hi = _cut_range(rect, dim, n_left, old.nranks - n_left)
            start = rect[0] if dim == X else rect[2]
            cut = start + find_cut(cf, rect, dim, n_left / old.nranks, lo, hi)
        node.cut_dim, node.cut_index = dim, cut
        lrect, rrect = _split(rect, dim, cut)
        node.left = rebuild(old.left, lrect)
        node.right = rebuild(old.right, rrect)
        return node

    return PartitionTree(rebuild(prev.root, prev.geg.full_rect), prev.geg, prev.first_dim)


def tree_to_map(tree: PartitionTree) -> PartitionMap:
    owner = np.full(tree.geg.shape, -1, dtype=np.int64)
    for leaf in tree.leaves():
        ix0, ix1, iy0, iy1 = leaf.rect
        owner[ix0:ix1, iy0:iy1] = leaf.pid
    return PartitionMap(owner, tree.n_ranks)


# -- static blocks --------------------------------------------------------------

def factor_pairs(P: int) -> List[Tuple[int, int]]:
    """(ranks along x, ranks along y) pairs, most square first, wider-in-x first."""
    pairs = []
    for b in range(1, int(math.isqrt(P)) + 1):
        if P % b == 0:
            a = P // b
            pairs.append((a, b))
            if a != b:
                pairs.append((b, a))
    return sorted(pairs, key=lambda ab: (abs(ab[0] - ab[1]), -ab[0]))


def uniform_blocks(P: int, geg: GridElementGrid) -> PartitionMap:
    """Same number of grid elements per rank (to within one per axis)."""
    if P < 1:
        raise ValueError("need at least one rank")
    if P > geg.n_elements:
        raise ValueError(f"{P} ranks exceed {geg.n_elements} grid elements")
    for pr, pc in factor_pairs(P):
        if pr <= geg.gx and pc <= geg.gy:
            break
    else:
        raise ValueError(f"no rank grid for P={P} fits {geg.gx}x{geg.gy} elements")
    xe = np.arange(pr + 1) * geg.gx // pr
    ye = np.arange(pc + 1) * geg.gy // pc
    owner = np.empty(geg.shape, dtype=np.int64)
    for bx in range(pr):
        for by in range(pc):
            owner[xe[bx]:xe[bx + 1], ye[by]:ye[by + 1]] = bx * pc + by
    return PartitionMap(owner, P)


# -- metrics ---------------------------------------------------------------------

def migration_cost(old: PartitionMap, new: PartitionMap, cf: CostField):
    """Total cost of elements whose owner changed."""
    if old.shape != new.shape or old.shape != cf.shape:
        raise ValueError("partition maps and cost field must share extents")
    return cf.cost[old.owner != new.owner].sum()


def boundary_perimeter(pmap: PartitionMap) -> int:
    """Adjacent element pairs (periodic 4-neighbourhood) with different owners."""
    o = pmap.owner
    return int((o != np.roll(o, -1, 0)).sum() + (o != np.roll(o, -1, 1)).sum())


# -- text format -----------------------------------------------------------------

def format_partition_map(pmap: PartitionMap) -> str:
    gx, gy = pmap.shape
    lines = [f"{gx} {gy} {pmap.n_ranks}"]
    for j in range(gy):
        lines.append(" ".join(str(int(v)) for v in pmap.owner[:, j]))
    return "\n".join(lines) + "\n"


def write_partition_map(pmap: PartitionMap, fh: TextIO) -> None:
    fh.write(format_partition_map(pmap))


def read_partition_map(fh: TextIO | str) -> PartitionMap:
    if isinstance(fh, str):
        fh = io.StringIO(fh)
    rows = [line.split() for line in fh if line.strip()]
    if not rows or len(rows[0]) != 3:
        raise ValueError("partition map header must be 'gx gy P'")
    gx, gy, P = (int(v) for v in rows[0])
    body = rows[1:]
    if len(body) != gy or any(len(r) != gx for r in body):
        raise ValueError(f"expected {gy} rows of {gx} owner ids")
    owner = np.array([[int(v) for v in r] for r in body], dtype=np.int64).T
    return PartitionMap(owner, P)

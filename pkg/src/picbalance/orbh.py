"""ORB-H strip decomposition with pairwise diffusion exchange.

The x axis is cut into columns; each column's y range is cut into one
row band per rank. Load moves between row neighbours every round and
between neighbouring columns every ``M`` rounds, always in whole
grid-element rows/columns next to the shared frontier.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from .grid import CostField
from .partition import X, Y, PartitionMap, find_cut


@dataclass(frozen=True)
class DiffusionParams:
    alpha: float = 0.5
    eta: float = 0.0
    c: float = 0.0
    M: int = 4

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if self.M < 1:
            raise ValueError("inter-column period M must be >= 1")


@dataclass
class OrbHLayout:
    col_cuts: np.ndarray          # C+1 boundaries over [0, gx]
    row_cuts: List[np.ndarray]    # per column, n_c+1 boundaries over [0, gy]
    ranks: List[List[int]]        # per column, rank id of each row slot (bottom up)

    @property
    def n_columns(self) -> int:
        return len(self.col_cuts) - 1

    @property
    def n_ranks(self) -> int:
        return sum(len(r) for r in self.ranks)

    @property
    def shape(self) -> Tuple[int, int]:
        return int(self.col_cuts[-1]), int(self.row_cuts[0][-1])

    def copy(self) -> "OrbHLayout":
        return OrbHLayout(self.col_cuts.copy(), [r.copy() for r in self.row_cuts],
                          [list(r) for r in self.ranks])

    def rect(self, col: int, slot: int):
        return (int(self.col_cuts[col]), int(self.col_cuts[col + 1]),
                int(self.row_cuts[col][slot]), int(self.row_cuts[col][slot + 1]))

    def rank_loads(self, cf: CostField) -> np.ndarray:
        loads = np.zeros(self.n_ranks, dtype=cf.cost.dtype)
        for c, col_ranks in enumerate(self.ranks):
            for s, r in enumerate(col_ranks):
                loads[r] = cf.region_cost(self.rect(c, s))
        return loads

    def validate(self) -> None:
        gx, gy = self.shape
        if self.col_cuts[0] != 0 or np.any(np.diff(self.col_cuts) < 1):
            raise ValueError("column cuts must start at 0 and strictly increase")
        seen = []
        for cuts, col_ranks in zip(self.row_cuts, self.ranks):
            if cuts[0] != 0 or cuts[-1] != gy or np.any(np.diff(cuts) < 1):
                raise ValueError("row cuts must tile [0, gy) with non-empty bands")
            if len(cuts) != len(col_ranks) + 1:
                raise ValueError("one row band per rank")
            seen.extend(col_ranks)
        if sorted(seen) != list(range(len(seen))):
            raise ValueError("rank ids must be 0..P-1, each once")


def _sequential_cuts(cf: CostField, rect, dim: int, counts: Sequence[int]) -> np.ndarray:
    """Cut ``rect`` along ``dim`` into len(counts) parts with loads ~ counts."""
    start = rect[0] if dim == X else rect[2]
    stop = rect[1] if dim == X else rect[3]
    cuts = [start]
    remaining = sum(counts)
    for idx, n in enumerate(counts[:-1]):
        parts_left = len(counts) - idx - 1
        cur = list(rect)
        if dim == X:
            cur[0] = cuts[-1]
        else:
            cur[2] = cuts[-1]
        k = find_cut(cf, tuple(cur), dim, n / remaining, 1, stop - cuts[-1] - parts_left)
        cuts.append(cuts[-1] + k)
        remaining -= n
    cuts.append(stop)
    return np.array(cuts, dtype=np.int64)


def _row_cuts(cf: CostField, x0: int, x1: int, n: int) -> np.ndarray:
    gy = cf.shape[1]
    if n > gy:
        raise ValueError(f"column with {n} ranks but only {gy} element rows")
    if n == 1:
        return np.array([0, gy], dtype=np.int64)
    return _sequential_cuts(cf, (x0, x1, 0, gy), Y, [1] * n)


def orbh_init(cf: CostField, column_ranks: Sequence[int]) -> OrbHLayout:
    """Columns by load share of their rank count, then equal-load rows per column."""
    column_ranks = list(column_ranks)
    if not column_ranks or any(n < 1 for n in column_ranks):
        raise ValueError("every column needs at least one rank")
    gx, gy = cf.shape
    if len(column_ranks) > gx:
        raise ValueError(f"{len(column_ranks)} columns but only {gx} element columns")
    if len(column_ranks) == 1:
        col_cuts = np.array([0, gx], dtype=np.int64)
    else:
        col_cuts = _sequential_cuts(cf, (0, gx, 0, gy), X, column_ranks)
    row_cuts = [_row_cuts(cf, int(col_cuts[c]), int(col_cuts[c + 1]), n)
                for c, n in enumerate(column_ranks)]
    ranks, nxt = [], 0
    for n in column_ranks:
        ranks.append(list(range(nxt, nxt + n)))
        nxt += n
    return OrbHLayout(col_cuts, row_cuts, ranks)


def diffusion_target(w_i, w_j, p: DiffusionParams = DiffusionParams()):
    """Load j should send to i (negative: i sends to j)."""
    return p.alpha * (w_j - w_i) + p.eta - p.c


def _closest_prefix(costs: Sequence, target) -> int:
    """Number of leading entries whose cumulative cost is closest to target; ties -> fewer."""
    best_n, best_err, acc = 0, abs(target), 0
    for n, c in enumerate(costs, start=1):
        acc += c
        err = abs(acc - target)
        if err < best_err:
            best_n, best_err = n, err
    return best_n


def row_pairs(layout: OrbHLayout, t: int) -> List[Tuple[int, int]]:
    """(column, lower slot) pairs for round t: even rounds pair (0,1),(2,3)...; odd (1,2),(3,4)..."""
    start = t % 2
    return [(c, s) for c, col in enumerate(layout.ranks) for s in range(start, len(col) - 1, 2)]


def diffusion_round(layout: OrbHLayout, cf: CostField, t: int, p: DiffusionParams = DiffusionParams()):
    """One round of within-column exchange.

    Returns the new layout and a list of ``((rank_i, rank_j), rows, cost)``
    where ``rows > 0`` means rank_j (upper) gave rows to rank_i (lower).
    """
    out = layout.copy()
    moves = []
    for c, s in row_pairs(layout, t):
        x0, x1 = int(out.col_cuts[c]), int(out.col_cuts[c + 1])
        cuts = out.row_cuts[c]
        lo, mid, hi = int(cuts[s]), int(cuts[s + 1]), int(cuts[s + 2])
        w_i = cf.region_cost((x0, x1, lo, mid))
        w_j = cf.region_cost((x0, x1, mid, hi))
        target = diffusion_target(w_i, w_j, p)
        if target > 0:
            rows = [cf.region_cost((x0, x1, y, y + 1)) for y in range(mid, hi - 1)]
            n = _closest_prefix(rows, target)
            moved, shift = sum(rows[:n]), n
        elif target < 0:
            rows = [cf.region_cost((x0, x1, y, y + 1)) for y in range(mid - 1, lo, -1)]
            n = _closest_prefix(rows, -target)
            moved, shift = sum(rows[:n]), -n
        else:
            moved, shift = 0, 0
        cuts[s + 1] = mid + shift
        moves.append(((out.ranks[c][s], out.ranks[c][s + 1]), shift, moved))
    return out, moves


def column_exchange(layout: OrbHLayout, cf: CostField, t: int, p: DiffusionParams = DiffusionParams()) -> OrbHLayout:
    """Shift column cuts between neighbouring columns every M-th round.

    The transfer equalizes per-rank column load, which reduces to the
    pairwise half-difference when both columns hold the same rank count.
    """
    out = layout.copy()
    if t % p.M != 0 or out.n_columns < 2:
        return out
    gy = cf.shape[1]
    start = (t // p.M) % 2
    for a in range(start, out.n_columns - 1, 2):
        b = a + 1
        x0, mid, x1 = (int(v) for v in out.col_cuts[a:a + 3])
        n_a, n_b = len(out.ranks[a]), len(out.ranks[b])
        L_a = cf.region_cost((x0, mid, 0, gy))
        L_b = cf.region_cost((mid, x1, 0, gy))
        per_rank = diffusion_target(L_a / n_a, L_b / n_b, p)
        target = per_rank * 2.0 * n_a * n_b / (n_a + n_b)
        if target > 0:
            cols = [cf.region_cost((x, x + 1, 0, gy)) for x in range(mid, x1 - 1)]
            shift = _closest_prefix(cols, target)
        elif target < 0:
            cols = [cf.region_cost((x, x + 1, 0, gy)) for x in range(mid - 1, x0, -1)]
            shift = -_closest_prefix(cols, -target)
        else:
            shift = 0
        if shift:
            out.col_cuts[a + 1] = mid + shift
            for col in (a, b):
                out.row_cuts[col] = _row_cuts(cf, int(out.col_cuts[col]), int(out.col_cuts[col + 1]),
                                              len(out.ranks[col]))
    return out


def orbh_to_map(layout: OrbHLayout) -> PartitionMap:
    owner = np.full(layout.shape, -1, dtype=np.int64)
    for c, col_ranks in enumerate(layout.ranks):
        for s, r in enumerate(col_ranks):
            x0, x1, y0, y1 = layout.rect(c, s)
            owner[x0:x1, y0:y1] = r
    return PartitionMap(owner, layout.n_ranks)


def split_ranks(P: int, n_columns: int) -> List[int]:
    """Near-equal per-column rank counts, smaller columns first (2+3 for P=5)."""
    if not 1 <= n_columns <= P:
        raise ValueError(f"need 1 <= columns <= P, got {n_columns} for P={P}")
    base, extra = divmod(P, n_columns)
    return [base] * (n_columns - extra) + [base + 1] * extra


def grid_color_pairs(t: int, nrows: int, ncols: int) -> List[Tuple[int, int]]:
    """Four-colour exchange schedule on a non-periodic nrows x ncols rank grid.

    Ranks are numbered row-major from 0. ``t mod 4`` selects the channel:
    1 -> horizontal links starting on an even column, 2 -> odd column,
    3 -> vertical links starting on an even row, 0 -> odd row. Ranks with
    no link of the current colour sit the round out.
    """
    colour = t % 4
    pairs = []
    if colour in (1, 2):
        for r in range(nrows):
            for c in range(colour - 1, ncols - 1, 2):
                pairs.append((r * ncols + c, r * ncols + c + 1))
    else:
        first = 0 if colour == 3 else 1
        for r in range(first, nrows - 1, 2):
            for c in range(ncols):
                pairs.append((r * ncols + c, (r + 1) * ncols + c))
    return pairs

"""Path costs under an order and open-path TSP baselines.

All quantities are open-path (free endpoints): the cost of a set is the sum
of consecutive distances in the visiting order, and tsp is the minimum of
that sum over all orders. Exact values come from subset dynamic programming
up to EXACT_CUTOFF points; beyond that only certified lower/upper bounds
are reported.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import SizeError, WitnessError
from .geometry import Point
from .orders import OrderOracle

EXACT_CUTOFF = 16
_EPS = 1e-12


def _coords(points: Sequence[Point]) -> np.ndarray:
    return np.array([(p.x, p.y) for p in points], dtype=float).reshape(-1, 2)


def _pairwise(xy: np.ndarray) -> np.ndarray:
    diff = xy[:, None, :] - xy[None, :, :]
    return np.sqrt((diff ** 2).sum(axis=2))


def path_length(points: Sequence[Point]) -> float:
    xy = _coords(points)
    if len(xy) < 2:
        return 0.0
    return float(np.sqrt(((xy[1:] - xy[:-1]) ** 2).sum(axis=1)).sum())


def cost_under_order(oracle: OrderOracle, points: Iterable[Point]) -> float:
    """Sum of consecutive distances when the set is visited in the order."""
    ordered = oracle.sort_by_order(list(points))
    return path_length(ordered)


@functools.lru_cache(maxsize=None)
def _masks_by_popcount(n: int) -> tuple:
    masks = np.arange(1 << n, dtype=np.int64)
    pc = np.zeros(1 << n, dtype=np.int64)
    for b in range(n):
        pc += (masks >> b) & 1
    return tuple(masks[pc == k] for k in range(n + 1))


def tsp_exact_path(points: Sequence[Point]) -> float:
    """Exact open-path optimum by dynamic programming over (subset, endpoint)."""
    pts = list(points)
    n = len(pts)
    if n > EXACT_CUTOFF:
        raise SizeError(f"exact tsp limited to {EXACT_CUTOFF} points, got {n}")
    if n < 2:
        return 0.0
    if n == 2:
        return math.dist(tuple(pts[0]), tuple(pts[1]))
    D = _pairwise(_coords(pts))
    full = 1 << n
    dp = np.full((full, n), np.inf)
    for i in range(n):
        dp[1 << i, i] = 0.0
    levels = _masks_by_popcount(n)
    for k in range(2, n + 1):
        for j in range(n):
            bit = 1 << j
            sel = levels[k][(levels[k] & bit) != 0]
            if sel.size == 0:
                continue
            prev = sel ^ bit
            cand = dp[prev] + D[:, j][None, :]
            dp[sel, j] = cand.min(axis=1)
    return float(dp[full - 1].min())


def tsp_lower_mst(points: Sequence[Point]) -> float:
    """Spanning-tree weight; a lower bound since any path spans the set."""
    pts = list(points)
    n = len(pts)
    if n < 2:
        return 0.0
    D = _pairwise(_coords(pts))
    in_tree = np.zeros(n, dtype=bool)
    best = np.full(n, np.inf)
    in_tree[0] = True
    best = D[0].copy()
    best[0] = np.inf
    total = 0.0
    for _ in range(n - 1):
        j = int(np.argmin(np.where(in_tree, np.inf, best)))
        total += best[j]
        in_tree[j] = True
        best = np.minimum(best, D[j])
    return float(total)


def _nearest_neighbor_path(xy: np.ndarray) -> list[int]:
    n = len(xy)
    start = int(np.lexsort((xy[:, 1], xy[:, 0]))[0])  # westmost, then southmost
    unvisited = np.ones(n, dtype=bool)
    unvisited[start] = False
    path = [start]
    cur = start
    for _ in range(n - 1):
        d = np.sqrt(((xy - xy[cur]) ** 2).sum(axis=1))
        d[~unvisited] = np.inf
        nxt = int(np.argmin(d))
        unvisited[nxt] = False
        path.append(nxt)
        cur = nxt
    return path


def _two_opt(xy: np.ndarray, path: list[int], max_rounds: int = 10_000) -> list[int]:
    """Best-improvement segment reversals until locally optimal."""
    n = len(path)
    if n < 3:
        return path
    order = np.asarray(path)
    for _ in range(max_rounds):
        p = xy[order]
        seg = np.sqrt(((p[1:] - p[:-1]) ** 2).sum(axis=1))
        # delta[i, j] = change when reversing positions i..j
        D = np.sqrt(((p[:, None, :] - p[None, :, :]) ** 2).sum(axis=2))
        i_idx = np.arange(n)
        cost_in = np.concatenate(([0.0], seg))   # edge entering position i
        cost_out = np.concatenate((seg, [0.0]))  # edge leaving position j
        new_in = np.where(i_idx[:, None] > 0, D[np.maximum(i_idx - 1, 0)][:, :], 0.0)
        new_out = np.where(i_idx[None, :] < n - 1, D[:, np.minimum(i_idx + 1, n - 1)], 0.0)
        delta = (new_in - cost_in[:, None]) + (new_out - cost_out[None, :])
        mask = i_idx[:, None] >= i_idx[None, :]  # need i < j
        delta = np.where(mask, np.inf, delta)
        best = np.unravel_index(np.argmin(delta), delta.shape)
        if delta[best] >= -_EPS:
            break
        i, j = best
        order[i : j + 1] = order[i : j + 1][::-1]
    return list(order)


def tsp_upper_heuristic(points: Sequence[Point]) -> float:
    """Length of a concrete path: nearest neighbor then 2-opt; deterministic."""
    pts = list(points)
    if len(pts) < 2:
        return 0.0
    xy = _coords(pts)
    path = _two_opt(xy, _nearest_neighbor_path(xy))
    p = xy[path]
    return float(np.sqrt(((p[1:] - p[:-1]) ** 2).sum(axis=1)).sum())


def tsp_upper_tour(points: Sequence[Point], path: Sequence[Point]) -> float:
    """Length of an explicit path, checked to be a permutation of the set."""
    key = lambda p: (round(p.x, 15), round(p.y, 15))
    if sorted(map(key, points)) != sorted(map(key, path)):
        raise WitnessError("supplied path is not a permutation of the point set")
    return path_length(list(path))


@dataclass(frozen=True)
class RatioReport:
    """Cost under an order against certified tsp bounds for one point set."""

    n: int
    cost_order: float
    tsp_lower: float
    tsp_upper: float
    tsp_exact: Optional[float] = None
    ratio_lower: Optional[float] = None
    ratio_exact: Optional[float] = None
    ratio_defined: bool = True

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "cost_order": self.cost_order,
            "tsp_lower": self.tsp_lower,
            "tsp_upper": self.tsp_upper,
            "tsp_exact": self.tsp_exact,
            "ratio_lower": self.ratio_lower,
            "ratio_exact": self.ratio_exact,
            "ratio_defined": self.ratio_defined,
        }


def measure_order_ratio(
    oracle: OrderOracle,
    points: Sequence[Point],
    tsp_upper_override: Optional[float] = None,
) -> RatioReport:
    """Full report; an externally certified tour may tighten the upper bound."""
    pts = list(points)
    n = len(pts)
    cost = cost_under_order(oracle, pts)
    if n < 2:
        return RatioReport(
            n=n, cost_order=0.0, tsp_lower=0.0, tsp_upper=0.0,
            tsp_exact=0.0, ratio_defined=False,
        )
    lower = tsp_lower_mst(pts)
    upper = tsp_upper_heuristic(pts)
    if tsp_upper_override is not None:
        upper = min(upper, tsp_upper_override)
    exact = tsp_exact_path(pts) if n <= EXACT_CUTOFF else None
    return RatioReport(
        n=n,
        cost_order=cost,
        tsp_lower=lower,
        tsp_upper=upper,
        tsp_exact=exact,
        ratio_lower=cost / upper if upper > 0 else None,
        ratio_exact=(cost / exact) if exact else None,
        ratio_defined=upper > 0,
    )

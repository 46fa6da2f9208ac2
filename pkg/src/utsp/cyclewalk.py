"""Walks on the M-cycle and the zig-zag-or-confined dichotomy.

A walk of length N takes unit steps on Z/M. Every time index is classified
by what the walk does before revisiting the same residue: never returns
(`none`), stays within the oscillation window (`small`), or leaves it
(`large`). The dichotomy turns that classification into one of two
machine-checked witnesses: a zig-zag that alternates many times between a
value and the window boundary, or a short interval in which one value is
revisited many times while the walk stays confined.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .errors import ConstructionError, ParameterError, WitnessError

_NO_VISIT = np.iinfo(np.int64).max


def integer_cube_root(m: int) -> int:
    s = int(round(m ** (1.0 / 3.0)))
    while s > 1 and s * s * s > m:
        s -= 1
    while (s + 1) ** 3 <= m:
        s += 1
    return s


def cycle_distance(a, b, M: int):
    d = np.abs(np.asarray(a, np.int64) - np.asarray(b, np.int64)) % M
    return np.minimum(d, M - d)


@dataclass(frozen=True)
class CycleWalk:
    """Residue sequence a_0..a_{N-1} with consecutive differences +-1 mod M."""

    M: int
    values: np.ndarray  # canonical residues in [0, M)

    def __post_init__(self):
        if self.M < 3:
            raise ParameterError(f"cycle size must be >= 3, got {self.M}")
        vals = np.asarray(self.values, np.int64) % self.M
        object.__setattr__(self, "values", vals)
        if len(vals) < 2:
            raise ParameterError("walk needs at least two positions")
        step = (vals[1:] - vals[:-1]) % self.M
        bad = ~((step == 1) | (step == self.M - 1))
        if bad.any():
            j = int(np.argmax(bad))
            raise ParameterError(f"step at index {j} is not +-1 mod M")

    @property
    def N(self) -> int:
        return len(self.values)

    def lifted(self) -> np.ndarray:
        """Integer lift b with b_0 = a_0 and unit steps matching the walk."""
        step = (self.values[1:] - self.values[:-1]) % self.M
        inc = np.where(step == 1, 1, -1).astype(np.int64)
        out = np.empty(self.N, np.int64)
        out[0] = self.values[0]
        np.cumsum(inc, out=out[1:])
        out[1:] += out[0]
        return out


@dataclass(frozen=True)
class OscillationTag:
    tag: str  # "none" | "small" | "large"
    next_visit: Optional[int] = None


def _next_hit_of_level(b: np.ndarray, query_pos: np.ndarray, query_level: np.ndarray) -> np.ndarray:
    """First index j > pos with b[j] == level, or _NO_VISIT; fully vectorized."""
    n = len(b)
    shift = int(b.min())
    span = int(b.max()) - shift + 1
    stride = n + 1
    composite = (b.astype(np.int64) - shift) * stride + np.arange(n, dtype=np.int64)
    order = np.argsort(composite, kind="stable")
    comp_sorted = composite[order]
    want = (query_level.astype(np.int64) - shift) * stride + (query_pos + 1)
    valid = (query_level >= shift) & (query_level < shift + span)
    idx = np.searchsorted(comp_sorted, np.where(valid, want, 0))
    out = np.full(len(query_pos), _NO_VISIT, np.int64)
    ok = valid & (idx < n)
    cand = np.where(ok, comp_sorted[np.minimum(idx, n - 1)], -1)
    match = ok & (cand // stride == np.where(valid, query_level - shift, -1))
    out[match] = cand[match] % stride
    return out


def _classify_arrays(walk: CycleWalk, delta: int):
    """Per-index classification codes (0 none, 1 small, 2 large) plus times.

    Returns (codes, next_visit, exit_time). The exit time is the first index
    after j whose value leaves the closed delta-window around a_j; boundary
    bookkeeping uses the lifted walk, where both next visit and window exit
    are level-hitting times.
    """
    if delta < 1:
        raise ParameterError(f"oscillation window must be >= 1, got {delta}")
    b = walk.lifted()
    n = walk.N
    pos = np.arange(n, dtype=np.int64)
    M = walk.M

    nv = np.minimum(
        _next_hit_of_level(b, pos, b),  # same level
        np.minimum(
            _next_hit_of_level(b, pos, b + M),
            _next_hit_of_level(b, pos, b - M),
        ),
    )
    if 2 * delta + 1 < M:
        ex = np.minimum(
            _next_hit_of_level(b, pos, b + delta + 1),
            _next_hit_of_level(b, pos, b - delta - 1),
        )
    else:
        ex = np.full(n, _NO_VISIT, np.int64)  # window covers the whole cycle

    codes = np.zeros(n, np.int8)
    has_next = nv != _NO_VISIT
    codes[has_next & (ex < nv)] = 2
    codes[has_next & ~(ex < nv)] = 1
    return codes, nv, ex


def classify_times(walk: CycleWalk, delta: int) -> list[OscillationTag]:
    """One oscillation tag per time index."""
    codes, nv, _ = _classify_arrays(walk, delta)
    names = {0: "none", 1: "small", 2: "large"}
    return [
        OscillationTag(names[int(c)], None if v == _NO_VISIT else int(v))
        for c, v in zip(codes, nv)
    ]


@dataclass(frozen=True)
class ZigZag:
    """m alternations between value `a` and the window boundary a +- s^2."""

    a: int
    i_times: np.ndarray
    j_times: np.ndarray
    both_boundaries: bool = False

    @property
    def m(self) -> int:
        return len(self.i_times)


@dataclass(frozen=True)
class Confined:
    """Interval of fewer than s^3 steps revisiting one value many times."""

    start: int
    stop: int  # inclusive
    a: int
    visits: np.ndarray
    diameter: int = 0
    tight_diameter: bool = False  # walk also met the stronger 3s^2+1 bound

    @property
    def m(self) -> int:
        return len(self.visits)


DichotomyOutcome = Union[ZigZag, Confined]


def validate_outcome(walk: CycleWalk, s: int, outcome: DichotomyOutcome) -> dict:
    """Check every witness invariant; raises WitnessError on failure."""
    M, N = walk.M, walk.N
    a = walk.values
    checks: dict = {"kind": type(outcome).__name__.lower(), "N": N, "M": M, "s": s}
    if isinstance(outcome, ZigZag):
        i_t, j_t = outcome.i_times, outcome.j_times
        m = outcome.m
        if m == 0 or len(j_t) != m:
            raise WitnessError("zig-zag witness must pair equally many i and j times")
        inter = np.empty(2 * m, np.int64)
        inter[0::2] = i_t
        inter[1::2] = j_t
        if not (np.diff(inter) > 0).all():
            raise WitnessError("zig-zag times are not strictly interleaved")
        if inter[0] < 0 or inter[-1] >= N:
            raise WitnessError("zig-zag times out of range")
        if not (a[i_t] == outcome.a).all():
            raise WitnessError("some i-time does not sit on the zig-zag value")
        hi = (outcome.a + s * s) % M
        lo = (outcome.a - s * s) % M
        at_j = a[j_t]
        if not ((at_j == hi) | (at_j == lo)).all():
            raise WitnessError("some j-time is not on the window boundary")
        threshold = N / (s * M)  # N = M^2 gives the M/s form
        if not m > threshold:
            raise WitnessError(f"zig-zag count m={m} not above threshold {threshold}")
        checks["m"] = m
        checks["threshold"] = threshold
        checks["both_boundaries"] = bool((at_j == hi).any() and (at_j == lo).any())
        return checks
    if isinstance(outcome, Confined):
        if not (0 <= outcome.start <= outcome.stop < N):
            raise WitnessError("confined interval out of range")
        if outcome.stop - outcome.start >= s ** 3:
            raise WitnessError("confined interval is not shorter than s^3")
        v = outcome.visits
        if len(v) == 0 or not ((v >= outcome.start) & (v <= outcome.stop)).all():
            raise WitnessError("confined visits leave the interval")
        if not (np.diff(v) > 0).all():
            raise WitnessError("confined visits are not increasing")
        if not (a[v] == outcome.a).all():
            raise WitnessError("confined visits do not share one value")
        need = max(1, -(-s // 7))  # ceil(s/7)
        if len(v) < need:
            raise WitnessError(f"confined witness has {len(v)} visits, needs {need}")
        window = walk.values[outcome.start : outcome.stop + 1]
        diam = _arc_diameter(walk.lifted()[outcome.start : outcome.stop + 1], M)
        if diam > 6 * s * s + 2:
            raise WitnessError(f"confined diameter {diam} exceeds 6s^2+2")
        checks["m"] = len(v)
        checks["need"] = need
        checks["diameter"] = diam
        checks["tight_diameter"] = diam <= 3 * s * s + 1
        return checks
    raise WitnessError(f"unknown outcome type {type(outcome)!r}")


def _arc_diameter(b_window: np.ndarray, M: int) -> int:
    span = int(b_window.max() - b_window.min())
    if span >= M:
        return M // 2
    return min(span, M - span)


def dichotomy(walk: CycleWalk, s: int) -> DichotomyOutcome:
    """Produce and verify a zig-zag or confinement witness for the walk.

    The oscillation window is s^2. Walks of any length are accepted; the
    case thresholds scale with N (for N = M^2 they reduce to the canonical
    M^2/s and M/s forms).
    """
    M, N = walk.M, walk.N
    if not (1 <= s and s ** 3 <= M):
        raise ParameterError(f"need 1 <= s <= M^(1/3); got s={s}, M={M}")
    if N < s ** 3:
        raise ParameterError(f"walk of length {N} is shorter than s^3={s ** 3}")
    delta = s * s
    codes, nv, ex = _classify_arrays(walk, delta)
    large = np.flatnonzero(codes == 2)
    none_ct = int((codes == 0).sum())
    if none_ct > M:
        raise ConstructionError("more never-revisited times than cycle values")

    if len(large) > N / s:
        # most frequent value among large-oscillation times; ties to lowest
        vals = walk.values[large]
        counts = np.bincount(vals, minlength=M)
        a = int(np.argmax(counts))
        i_times = large[vals == a]
        j_times = ex[i_times] - 1
        at_j = walk.values[j_times]
        hi, lo = (a + delta) % M, (a - delta) % M
        out = ZigZag(
            a=a,
            i_times=i_times.astype(np.int64),
            j_times=j_times.astype(np.int64),
            both_boundaries=bool((at_j == hi).any() and (at_j == lo).any()),
        )
        try:
            validate_outcome(walk, s, out)
        except WitnessError as exc:
            raise ConstructionError(f"zig-zag witness failed validation: {exc}") from exc
        return out

    # confinement: split [N] into full intervals of s^3 steps, drop the tail
    span = s ** 3
    n_int = N // span
    busy = (codes != 1).astype(np.int64)  # large or none
    counts = busy[: n_int * span].reshape(n_int, span).sum(axis=1)
    b = walk.lifted()
    order = np.argsort(counts, kind="stable")
    chosen = None
    for idx in order:
        lo_i = int(idx) * span
        hi_i = lo_i + span - 1
        if _arc_diameter(b[lo_i : hi_i + 1], M) <= 6 * s * s + 2:
            chosen = (lo_i, hi_i)
            break
    if chosen is None:
        raise ConstructionError("no interval satisfies the confinement diameter bound")
    lo_i, hi_i = chosen
    window_vals = walk.values[lo_i : hi_i + 1]
    counts_v = np.bincount(window_vals, minlength=M)
    a = int(np.argmax(counts_v))
    visits = lo_i + np.flatnonzero(window_vals == a)
    diam = _arc_diameter(b[lo_i : hi_i + 1], M)
    out = Confined(
        start=lo_i,
        stop=hi_i,
        a=a,
        visits=visits.astype(np.int64),
        diameter=diam,
        tight_diameter=diam <= 3 * s * s + 1,
    )
    try:
        validate_outcome(walk, s, out)
    except WitnessError as exc:
        raise ConstructionError(f"confinement witness failed validation: {exc}") from exc
    return out


# ---------------------------------------------------------------------------
# Walk generators
# ---------------------------------------------------------------------------

WALK_KINDS = ("winding", "constant", "revolution", "tight", "random")


def make_walk(kind: str, M: int, s: int = 0, seed: int = 0, length: Optional[int] = None) -> CycleWalk:
    """Deterministic generator walks of length M^2 (overridable)."""
    if kind not in WALK_KINDS:
        raise ParameterError(f"unknown walk kind {kind!r}")
    N = M * M if length is None else length
    if N < 2:
        raise ParameterError(f"walk length must be >= 2, got {N}")
    if kind == "winding":
        vals = np.arange(N, dtype=np.int64) % M
    elif kind == "constant":
        vals = np.zeros(N, np.int64)
        vals[1::2] = 1
    elif kind == "revolution":
        steps = np.empty(N - 1, np.int64)
        toggle = 1
        for j in range(N - 1):
            if M >= 2 and j % M in (0, 1):
                steps[j] = 1
                toggle = 1
            else:
                steps[j] = -1 if toggle else 1
                toggle ^= 1
        vals = np.concatenate(([0], np.cumsum(steps)))
    elif kind == "tight":
        if not (1 <= s and s ** 3 <= M):
            raise ParameterError(f"tight walk needs 1 <= s <= M^(1/3), got s={s}")
        up = np.ones(s * s, np.int64)
        cycle = [up if k % 2 == 0 else -up for k in range(2 * s - 1)]
        block = np.concatenate(cycle)  # oscillate s-ish times, end one level up
        reps = -(-(N - 1) // len(block))
        steps = np.tile(block, reps)[: N - 1]
        vals = np.concatenate(([0], np.cumsum(steps)))
    else:  # random
        rng = np.random.default_rng(seed)
        steps = rng.choice(np.asarray([-1, 1], np.int64), size=N - 1)
        vals = np.concatenate(([0], np.cumsum(steps)))
    return CycleWalk(M=M, values=vals % M)


# ---------------------------------------------------------------------------
# Walk file format: "M=<int> N=<int>" / start residue / one signed step per line
# ---------------------------------------------------------------------------


def write_walk(walk: CycleWalk, path: str) -> None:
    b = walk.lifted()
    steps = b[1:] - b[:-1]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"M={walk.M} N={walk.N}\n")
        fh.write(f"{int(walk.values[0])}\n")
        for st in steps:
            fh.write(f"{'+1' if st > 0 else '-1'}\n")


def read_walk(path: str) -> CycleWalk:
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip() and not ln.startswith("#")]
    if len(lines) < 2:
        raise ParameterError("walk file needs a header and a start residue")
    head = dict(part.split("=", 1) for part in lines[0].split())
    M, N = int(head["M"]), int(head["N"])
    start = int(lines[1])
    steps = np.asarray([int(x) for x in lines[2:]], np.int64)
    if len(steps) != N - 1:
        raise ParameterError(f"expected {N - 1} steps, found {len(steps)}")
    vals = np.concatenate(([start], start + np.cumsum(steps)))
    return CycleWalk(M=M, values=vals % M)

"""Multi-stream GLR-CUSUM over a class of candidate affected subsets.

    Psi_n = max_k max_{B} sum_{theta in B} S_{theta,k}(n)

where S_{theta,k}(n) is the single-stream candidate sum of stream theta.
The change point k is shared by all streams of a subset, so Psi_n is in
general smaller than summing per-stream maxima.
"""

from __future__ import annotations

import copy
import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .detector import (
    DEFAULT_WINDOW,
    PRUNE_DELTA,
    DetectionEvent,
    RobustNsState,
    ThresholdSchedule,
    run_detector,
)
from .laws import HorizonError, LflPair


@dataclass(frozen=True)
class StreamSet:
    """M streams and the collection of candidate affected subsets."""

    M: int
    subsets: tuple
    K: int | None = None

    def __post_init__(self):
        if self.M < 1:
            raise ValueError("need at least one stream")
        subsets = tuple(tuple(sorted(int(t) for t in b)) for b in self.subsets)
        if not subsets:
            raise ValueError("subset collection is empty")
        if len(set(subsets)) != len(subsets):
            raise ValueError("subsets must be distinct")
        for b in subsets:
            if not b:
                raise ValueError("subsets must be non-empty")
            if len(set(b)) != len(b) or b[0] < 0 or b[-1] >= self.M:
                raise ValueError(f"invalid subset {b} for M={self.M}")
        K = max(len(b) for b in subsets)
        if self.K is not None and K > self.K:
            raise ValueError(f"subset larger than K={self.K}")
        object.__setattr__(self, "subsets", subsets)
        object.__setattr__(self, "K", self.K if self.K is not None else K)
        ind = np.zeros((len(subsets), self.M))
        for j, b in enumerate(subsets):
            ind[j, list(b)] = 1.0
        ind.setflags(write=False)
        object.__setattr__(self, "_indicator", ind)

    @property
    def indicator(self) -> np.ndarray:
        """|B| x M 0/1 membership matrix."""
        return self._indicator

    def __len__(self):
        return len(self.subsets)

    def index(self, subset) -> int:
        return self.subsets.index(tuple(sorted(subset)))

    @classmethod
    def explicit(cls, M: int, subsets) -> "StreamSet":
        return cls(M, tuple(subsets))


def enumerate_subsets(M: int, K: int) -> StreamSet:
    """All non-empty subsets of {0..M-1} of size <= K, by size then lexicographically."""
    if not 1 <= K <= M:
        raise ValueError(f"need 1 <= K <= M, got K={K}, M={M}")
    subsets = [c for j in range(1, K + 1) for c in itertools.combinations(range(M), j)]
    return StreamSet(M, tuple(subsets), K)


def subset_count(M: int, K: int) -> int:
    return sum(math.comb(M, j) for j in range(1, K + 1))


def _broadcast_lfls(lfls, M: int) -> list[LflPair]:
    if isinstance(lfls, LflPair):
        return [lfls] * M
    lfls = list(lfls)
    if len(lfls) != M:
        raise ValueError(f"expected {M} per-stream LFL pairs, got {len(lfls)}")
    return lfls


@dataclass
class MultiStreamState:
    """Running Psi statistic.

    ``mode='recursion'`` keeps one scalar W_B = max(W_B + sum_B Z, 0) per
    subset and needs constant LFLs; the reported statistic is then 0-clipped.
    ``mode='candidates'`` keeps per-stream candidate sums S_{theta,k} and
    evaluates the exact statistic (possibly negative).  ``'auto'`` picks
    the recursion whenever every stream has constant LFLs.
    """

    streamset: StreamSet
    lfls: Sequence[LflPair] | LflPair
    threshold: ThresholdSchedule
    mode: str = "auto"
    window: int | None = DEFAULT_WINDOW
    delta: float = PRUNE_DELTA
    n: int = 0

    def __post_init__(self):
        M = self.streamset.M
        self.lfls = _broadcast_lfls(self.lfls, M)
        all_const = all(l.is_constant for l in self.lfls)
        if self.mode == "auto":
            self.mode = "recursion" if all_const else "candidates"
        if self.mode not in ("recursion", "candidates"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode == "recursion" and not all_const:
            raise ValueError("per-subset recursion needs constant LFLs on every stream")
        self._ind = self.streamset.indicator
        self.W = np.zeros(len(self.streamset))
        self.ks = np.empty(0, dtype=int)
        self.S = np.empty((M, 0))
        self._values = None

    def _stream_llrs(self, n: int, ks: np.ndarray, row: np.ndarray) -> np.ndarray:
        out = np.empty((len(self.lfls), ks.size))
        for t, lfl in enumerate(self.lfls):
            out[t] = lfl.llr(n, ks if not lfl.is_constant else n, row[t])
        return out

    def step(self, row) -> float:
        row = np.asarray(row, dtype=float)
        if row.shape != (self.streamset.M,):
            raise ValueError(f"expected {self.streamset.M} observations, got shape {row.shape}")
        n = self.n + 1
        for t, lfl in enumerate(self.lfls):
            if lfl.pre.horizon is not None and n > lfl.pre.horizon:
                raise HorizonError(f"stream {t}: observation {n} beyond law horizon")
            lfl.pre.density(1).check_support(row[t])
        self.n = n
        if self.mode == "recursion":
            z = self._stream_llrs(n, np.array([n]), row)[:, 0]
            self.W = np.maximum(self.W + self._ind @ z, 0.0)
            return self.statistic
        ks = np.append(self.ks, n)
        S = np.concatenate([self.S, np.zeros((self.streamset.M, 1))], axis=1)
        S += self._stream_llrs(n, ks, row)
        self.ks, self.S = ks, S
        self._values = self._ind @ S
        self._prune()
        return self.statistic

    def _prune(self):
        if self.ks.size < 2:
            return
        colmax = self._values.max(axis=0)
        top = colmax.max()
        keep = ~((colmax <= top - self.delta) & np.all(self.S < 0, axis=0))
        if self.window is not None and keep.sum() > self.window:
            order = np.argsort(-np.where(keep, colmax, -np.inf), kind="stable")
            keep = np.zeros_like(keep)
            keep[order[: self.window]] = True
        if not keep.all():
            self.ks, self.S, self._values = self.ks[keep], self.S[:, keep], self._values[:, keep]

    @property
    def subset_values(self) -> np.ndarray:
        """Per-subset statistic max_k sum_B S (or W_B in recursion mode)."""
        if self.mode == "recursion":
            return self.W.copy()
        if self._values is None:
            return np.zeros(len(self.streamset))
        return self._values.max(axis=1)

    @property
    def statistic(self) -> float:
        if self.n == 0:
            return 0.0
        return float(self.subset_values.max())

    @property
    def argmax_subset(self) -> tuple | None:
        if self.n == 0:
            return None
        return self.streamset.subsets[int(np.argmax(self.subset_values))]

    # DetectionEvent reports a change-point candidate; for multi-stream
    # runs that is the best shared k
    @property
    def argmax(self) -> int | None:
        if self.mode == "recursion" or self._values is None:
            return None
        j = int(np.argmax(self._values.max(axis=1)))
        return int(self.ks[int(np.argmax(self._values[j]))])


def psi_step(state: MultiStreamState, xs) -> MultiStreamState:
    """Return a new state advanced by one row of observations."""
    new = copy.deepcopy(state)
    new.step(xs)
    return new


def _llr_table(xs: Sequence[float], lfl: LflPair) -> list[list[float]]:
    """Z[i][k] = log g_{i,k}(x_i) - log f_i(x_i) via per-density logpdf."""
    T = len(xs)
    Z = [[0.0] * (T + 1) for _ in range(T + 1)]
    for i in range(1, T + 1):
        lf = lfl.pre.density(i).logpdf(xs[i - 1])
        cache = {}
        for k in range(1, i + 1):
            g = lfl.post.density(i, k)
            if g not in cache:
                cache[g] = g.logpdf(xs[i - 1])
            Z[i][k] = cache[g] - lf
    return Z


def psi_bruteforce(xss, streamset: StreamSet, lfls) -> list[float]:
    """Direct evaluation of Psi_n for n = 1..T, no recursion and no pruning."""
    xss = np.asarray(xss, dtype=float)
    if xss.ndim != 2 or xss.shape[0] < 1:
        raise ValueError("xss must be a non-empty T x M matrix")
    T, M = xss.shape
    if M != streamset.M:
        raise ValueError(f"matrix has {M} columns but streamset has M={streamset.M}")
    lfls = _broadcast_lfls(lfls, M)
    Zs = [_llr_table(list(xss[:, t]), lfls[t]) for t in range(M)]
    out = []
    for n in range(1, T + 1):
        best = -math.inf
        for k in range(1, n + 1):
            per_stream = [math.fsum(Zs[t][i][k] for i in range(k, n + 1)) for t in range(M)]
            for b in streamset.subsets:
                best = max(best, math.fsum(per_stream[t] for t in b))
        out.append(best)
    return out


def phi_statistic(xss, lfls, window: int | None = None, delta: float = math.inf) -> list[float]:
    """Phi_n = max over streams of the single-stream robust statistic (exact by default)."""
    xss = np.asarray(xss, dtype=float)
    if xss.ndim != 2 or xss.shape[0] < 1:
        raise ValueError("xss must be a non-empty T x M matrix")
    T, M = xss.shape
    lfls = _broadcast_lfls(lfls, M)
    dummy = ThresholdSchedule.constant(1.0)
    states = [RobustNsState(l, dummy, window=window, delta=delta) for l in lfls]
    out = []
    for row in xss:
        out.append(max(s.step(x) for s, x in zip(states, row)))
    return out


def run_multistream_detector(xss, state: MultiStreamState, horizon: int | None = None) -> DetectionEvent:
    """Stop at the first n with Psi_n >= A_n; ``state`` is advanced in place."""
    xss = np.asarray(xss, dtype=float)
    if xss.ndim != 2:
        raise ValueError("xss must be a T x M matrix")
    return run_detector(list(xss), state, horizon)


@dataclass
class IdentificationResult:
    subset: tuple
    subset_index: int
    change_point: int
    value: float
    n_used: int
    extra_used: int
    contributions: dict = field(default_factory=dict)

    @property
    def stream(self) -> int:
        """The identified stream when subsets are singletons."""
        if len(self.subset) != 1:
            raise ValueError("identified subset is not a singleton")
        return self.subset[0]


def subset_scores(xss, streamset: StreamSet, lfls) -> tuple[np.ndarray, np.ndarray]:
    """Per-(subset, k) sums at the last row of ``xss``, evaluated directly.

    Returns (values, S) with values[j, k-1] = sum_{theta in B_j} S[theta, k-1]
    and S[theta, k-1] = sum_{i=k}^{n} Z_{theta,i,k}.
    """
    xss = np.asarray(xss, dtype=float)
    n, M = xss.shape
    lfls = _broadcast_lfls(lfls, M)
    ii, kk = np.meshgrid(np.arange(1, n + 1), np.arange(1, n + 1), indexing="ij")
    mask = kk <= ii
    S = np.empty((M, n))
    for t, lfl in enumerate(lfls):
        Z = np.zeros((n, n))
        for i in range(1, n + 1):
            Z[i - 1, :i] = lfl.llr(i, np.arange(1, i + 1), xss[i - 1, t])
        S[t] = np.where(mask, Z, 0.0).sum(axis=0)
    return streamset.indicator @ S, S


def identify(xss, tau: int | None, streamset: StreamSet, lfls, extra: int = 10) -> IdentificationResult:
    """argmax over subsets of max_k sum_B S_{theta,k}, using up to ``extra`` rows past tau.

    Ties go to the earliest subset in the collection, then to the smallest k.
    """
    if tau is None:
        raise ValueError("no detection: identification needs a stop time")
    if extra < 0:
        raise ValueError("extra must be >= 0")
    xss = np.asarray(xss, dtype=float)
    T = xss.shape[0]
    if not 1 <= tau <= T:
        raise ValueError(f"stop time {tau} outside data of length {T}")
    n = min(tau + extra, T)
    values, S = subset_scores(xss[:n], streamset, lfls)
    per_subset = values.max(axis=1)
    j = int(np.argmax(per_subset))
    k = int(np.argmax(values[j])) + 1
    b = streamset.subsets[j]
    return IdentificationResult(
        subset=b,
        subset_index=j,
        change_point=k,
        value=float(values[j, k - 1]),
        n_used=n,
        extra_used=n - tau,
        contributions={t: float(S[t, k - 1]) for t in b},
    )

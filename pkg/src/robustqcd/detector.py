"""Single-stream detectors: classical CUSUM and the robust non-stationary CUSUM.

The robust statistic keeps one running log-likelihood sum per candidate
change point k,

    S_k(n) = sum_{i=k}^{n} log( g_{i,k}(X_i) / f_i(X_i) ),

and reports max_k S_k(n).  With constant LFLs every candidate receives the
same increment, so the 0-clipped statistic collapses to the CUSUM recursion.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .laws import Density, HorizonError, LflPair, log_likelihood_ratio

PRUNE_DELTA = 50.0
DEFAULT_WINDOW = 10_000


@dataclass(frozen=True)
class ThresholdSchedule:
    """Constant threshold A, or a tabulated sequence A_1, A_2, ..."""

    values: tuple

    def __post_init__(self):
        vals = tuple(float(v) for v in np.atleast_1d(self.values))
        if not vals:
            raise ValueError("threshold schedule is empty")
        if any(not v > 0 for v in vals):
            raise ValueError("thresholds must be > 0")
        object.__setattr__(self, "values", vals)

    @classmethod
    def constant(cls, a: float) -> "ThresholdSchedule":
        return cls((a,))

    @classmethod
    def tabulated(cls, values: Sequence[float]) -> "ThresholdSchedule":
        if len(values) < 2:
            # a one-entry table would be indistinguishable from a constant
            raise ValueError("tabulated schedule needs at least two entries")
        return cls(tuple(values))

    @classmethod
    def from_alpha(cls, alpha: float, n_hypotheses: int = 1) -> "ThresholdSchedule":
        """A = log(n_hypotheses / alpha)."""
        if not 0 < alpha < 1:
            raise ValueError("alpha must be in (0, 1)")
        return cls.constant(math.log(n_hypotheses / alpha))

    @property
    def is_constant(self) -> bool:
        return len(self.values) == 1

    def __call__(self, n: int) -> float:
        if self.is_constant:
            return self.values[0]
        if not 1 <= n <= len(self.values):
            raise HorizonError(f"no threshold tabulated for n={n}")
        return self.values[n - 1]

    def array(self, ns) -> np.ndarray:
        ns = np.asarray(ns, dtype=int)
        if self.is_constant:
            return np.full(ns.shape, self.values[0])
        if np.any(ns < 1) or np.any(ns > len(self.values)):
            raise HorizonError("threshold schedule exhausted")
        return np.asarray(self.values)[ns - 1]


@dataclass
class CusumState:
    """Classical CUSUM W_n = (W_{n-1} + log g(X_n)/f(X_n))^+ for a constant pair."""

    lfl: LflPair
    threshold: ThresholdSchedule
    W: float = 0.0
    n: int = 0

    def __post_init__(self):
        if not self.lfl.is_constant:
            raise ValueError("classical CUSUM needs constant pre and post laws")
        self._f: Density = self.lfl.pre.densities[0]
        self._g: Density = self.lfl.post.densities[0]

    @property
    def statistic(self) -> float:
        return self.W

    def step(self, x: float) -> float:
        self.W = max(self.W + log_likelihood_ratio(self._g, self._f, x), 0.0)
        self.n += 1
        return self.W

    def reset(self):
        self.W, self.n = 0.0, 0


@dataclass
class RobustNsState:
    """Robust non-stationary CUSUM over retained candidate change points.

    ``ks`` holds candidate change points (ascending) and ``sums`` their
    running log-likelihood sums.  Candidates whose sum is negative and at
    least ``delta`` below the current maximum are dropped; at most
    ``window`` candidates are kept (the lowest sums go first).  Pass
    ``window=None`` and ``delta=math.inf`` for the exact, unpruned statistic.
    """

    lfl: LflPair
    threshold: ThresholdSchedule
    window: int | None = DEFAULT_WINDOW
    delta: float = PRUNE_DELTA
    n: int = 0
    ks: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=int))
    sums: np.ndarray = field(default_factory=lambda: np.empty(0))

    def __post_init__(self):
        if self.window is not None and self.window < 1:
            raise ValueError("window must be >= 1")
        self._family = self.lfl.family
        self._constant = self.lfl.is_constant
        self._pre = self.lfl.pre
        self._post = self.lfl.post

    @property
    def statistic(self) -> float:
        """max_k S_k, or 0 before the first observation."""
        return float(self.sums.max()) if self.sums.size else 0.0

    @property
    def argmax(self) -> int | None:
        """Candidate change point achieving the maximum (smallest k on ties)."""
        return int(self.ks[np.argmax(self.sums)]) if self.sums.size else None

    def increments(self, n: int, ks: np.ndarray, x: float) -> np.ndarray:
        """Z_{n,k}(x) for every k in ``ks``."""
        if self._constant:
            return np.full(ks.shape, self.lfl.llr(n, n, x))
        return np.asarray(self.lfl.llr(n, ks, x), dtype=float)

    def step(self, x: float) -> float:
        n = self.n + 1
        if self._pre.horizon is not None and n > self._pre.horizon:
            raise HorizonError(f"observation {n} beyond tabulated law horizon {self._pre.horizon}")
        self._pre.density(1).check_support(x)
        ks = np.append(self.ks, n)
        sums = np.append(self.sums, 0.0) + self.increments(n, ks, x)
        self.ks, self.sums, self.n = ks, sums, n
        self._prune()
        return self.statistic

    def _prune(self):
        sums = self.sums
        if sums.size < 2:
            return
        top = sums.max()
        keep = ~((sums <= top - self.delta) & (sums < 0))
        if self.window is not None and keep.sum() > self.window:
            order = np.argsort(-np.where(keep, sums, -np.inf), kind="stable")
            keep = np.zeros_like(keep)
            keep[order[: self.window]] = True
        if not keep.all():
            self.ks, self.sums = self.ks[keep], sums[keep]

    def copy(self) -> "RobustNsState":
        return copy.deepcopy(self)


def cusum_step(state: CusumState, x: float) -> CusumState:
    """Return a new state advanced by one observation."""
    new = copy.copy(state)
    new.step(x)
    return new


def robust_step(state: RobustNsState, x: float) -> RobustNsState:
    """Return a new state advanced by one observation."""
    new = state.copy()
    new.step(x)
    return new


def robust_statistic_bruteforce(xs: Sequence[float], lfl: LflPair) -> list[float]:
    """max_{1<=k<=n} sum_{i=k}^{n} log g_{i,k}(x_i)/f_i(x_i), evaluated directly.

    Test oracle: densities are evaluated through ``logpdf`` one at a time,
    with no recursion and no pruning.
    """
    xs = list(xs)
    if not xs:
        raise ValueError("xs must be non-empty")
    T = len(xs)
    # Z[i][k] for k <= i, 1-based
    Z = [[0.0] * (T + 1) for _ in range(T + 1)]
    for i in range(1, T + 1):
        f = lfl.pre.density(i)
        lf = f.logpdf(xs[i - 1])
        cache: dict[Density, float] = {}
        for k in range(1, i + 1):
            g = lfl.post.density(i, k)
            if g not in cache:
                cache[g] = g.logpdf(xs[i - 1])
            Z[i][k] = cache[g] - lf
    out = []
    for n in range(1, T + 1):
        best = -math.inf
        for k in range(1, n + 1):
            best = max(best, math.fsum(Z[i][k] for i in range(k, n + 1)))
        out.append(best)
    return out


def cusum_maxform(llrs: Sequence[float]) -> list[float]:
    """Classical CUSUM written as max over k of trailing LLR sums (no clipping)."""
    out = []
    for n in range(1, len(llrs) + 1):
        out.append(max(math.fsum(llrs[k - 1 : n]) for k in range(1, n + 1)))
    return out


@dataclass
class DetectionEvent:
    stopped: bool
    stop_time: int | None
    statistic_at_stop: float | None
    trace: list[float]
    thresholds: list[float]
    argmax_k: int | None = None

    def __post_init__(self):
        if self.stopped:
            tau = self.stop_time
            assert self.statistic_at_stop >= self.thresholds[tau - 1]
            assert all(s < a for s, a in zip(self.trace[: tau - 1], self.thresholds))


def run_detector(stream: Sequence[float], state, horizon: int | None = None) -> DetectionEvent:
    """Step ``state`` through ``stream`` until the statistic reaches the threshold.

    ``state`` is any object with ``step(x)``, ``n`` and ``threshold``;
    it is advanced in place.
    """
    if len(stream) < 1:
        raise ValueError("stream must contain at least one observation")
    if horizon is None:
        horizon = len(stream)
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    trace: list[float] = []
    thresholds: list[float] = []
    for x in stream[:horizon]:
        stat = state.step(x)
        a = state.threshold(state.n)
        trace.append(stat)
        thresholds.append(a)
        if stat >= a:
            return DetectionEvent(True, state.n, stat, trace, thresholds, getattr(state, "argmax", None))
    return DetectionEvent(False, None, None, trace, thresholds)

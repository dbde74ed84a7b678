"""Monte-Carlo calibration: mean time to false alarm, detection delay,
threshold search and empirical checks of the LFL dominance inequalities.

Every trial draws from its own generator seeded by (master seed, trial
index), so results do not depend on how trials are split across workers.
"""

from __future__ import annotations

import dataclasses
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats

from .detector import DEFAULT_WINDOW, PRUNE_DELTA, RobustNsState, ThresholdSchedule
from .laws import LflPair, PostChangeLaw, PreChangeLaw, llr_params
from .multistream import MultiStreamState, StreamSet, _broadcast_lfls


@dataclass(frozen=True)
class McConfig:
    trials: int = 2000
    horizon: int = 100_000
    seed: int = 20240601
    confidence: float = 0.95
    workers: int = 1
    chunk: int = 512

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("need at least one trial")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if not 0 < self.confidence < 1:
            raise ValueError("confidence must be in (0, 1)")


@dataclass
class McEstimate:
    metric: str
    mean: float
    stderr: float
    ci_low: float
    ci_high: float
    censored_fraction: float
    trials: int
    seed: int
    extra: dict = field(default_factory=dict)

    @property
    def flagged(self) -> bool:
        """More than half the runs hit the horizon without stopping."""
        return self.censored_fraction >= 0.5

    def to_record(self) -> str:
        fields = [
            f"metric={self.metric}",
            f"mean={self.mean:.17g}",
            f"stderr={self.stderr:.17g}",
            f"ci=[{self.ci_low:.17g},{self.ci_high:.17g}]",
            f"trials={self.trials}",
            f"seed={self.seed}",
            f"censored_fraction={self.censored_fraction:.17g}",
        ]
        fields += [f"{k}={v:.17g}" if isinstance(v, float) else f"{k}={v}" for k, v in self.extra.items()]
        if self.flagged:
            fields.append("flag=censored")
        return " ".join(fields)


def _estimate(metric, values, censored, cfg: McConfig, **extra) -> McEstimate:
    values = np.asarray(values, dtype=float)
    n = values.size
    if n == 0:
        return McEstimate(metric, math.nan, math.nan, math.nan, math.nan, 1.0, 0, cfg.seed, extra)
    mean = float(values.mean())
    se = float(values.std(ddof=1) / math.sqrt(n)) if n > 1 else math.inf
    z = stats.norm.ppf(0.5 + cfg.confidence / 2)
    half = z * se if math.isfinite(se) else math.inf
    return McEstimate(metric, mean, se, mean - half, mean + half, float(np.mean(censored)), n, cfg.seed, extra)


# ---------------------------------------------------------------------------
# detectors and observation sources


@dataclass(frozen=True)
class DetectorSpec:
    """What to simulate: LFL pair(s), threshold and optional subset class.

    With ``streamset`` the detector is the multi-stream Psi rule; without
    it, the single-stream robust CUSUM.
    """

    lfls: LflPair | tuple
    threshold: ThresholdSchedule
    streamset: StreamSet | None = None
    window: int | None = DEFAULT_WINDOW
    delta: float = PRUNE_DELTA

    def __post_init__(self):
        if self.streamset is None and not isinstance(self.lfls, LflPair):
            raise ValueError("single-stream detector takes one LflPair")
        if self.streamset is not None:
            object.__setattr__(self, "lfls", tuple(_broadcast_lfls(self.lfls, self.streamset.M)))

    @property
    def M(self) -> int:
        return 1 if self.streamset is None else self.streamset.M

    @property
    def stream_lfls(self) -> list[LflPair]:
        return [self.lfls] if self.streamset is None else list(self.lfls)

    @property
    def fast(self) -> bool:
        return all(l.is_constant for l in self.stream_lfls)

    def with_threshold(self, a: float) -> "DetectorSpec":
        return dataclasses.replace(self, threshold=ThresholdSchedule.constant(a))

    def make_state(self):
        if self.streamset is None:
            return RobustNsState(self.lfls, self.threshold, self.window, self.delta)
        return MultiStreamState(self.streamset, list(self.lfls), self.threshold, "auto", self.window, self.delta)


def _as_list(laws, M: int) -> list:
    if laws is None or not isinstance(laws, (list, tuple)):
        return [laws] * M
    if len(laws) != M:
        raise ValueError(f"expected {M} per-stream laws, got {len(laws)}")
    return list(laws)


@dataclass
class Source:
    """Observation generator: pre-change laws, post-change laws and change point.

    Any object with ``sample(rng, ns)`` (pre) or ``sample(rng, ns, nu)``
    (post) works as a law.  Streams whose post law is None never change.
    """

    pre: list
    post: list
    nu: int | None = None

    @classmethod
    def build(cls, M: int, pre, post=None, nu: int | None = None, affected=None) -> "Source":
        pre = _as_list(pre, M)
        post = _as_list(post, M)
        if affected is not None:
            post = [p if t in set(affected) else None for t, p in enumerate(post)]
        if nu is not None and nu < 1:
            raise ValueError("change point must be >= 1")
        return cls(pre, post, nu)

    def sample(self, rng_pre, rng_post, n0: int, count: int) -> np.ndarray:
        ns = np.arange(n0, n0 + count)
        out = np.empty((count, len(self.pre)))
        cut = count if self.nu is None else int(np.clip(self.nu - n0, 0, count))
        for t, (f, g) in enumerate(zip(self.pre, self.post)):
            if cut:
                out[:cut, t] = f.sample(rng_pre, ns[:cut])
            if cut < count:
                if g is None:
                    out[cut:, t] = f.sample(rng_post, ns[cut:])
                else:
                    out[cut:, t] = g.sample(rng_post, ns[cut:], self.nu)
        return out


def trial_rng(seed: int, trial: int, arm: int = 0) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(trial, arm)))


def _stop_fast(spec: DetectorSpec, source: Source, horizon: int, rng_pre, rng_post, chunk: int) -> int | None:
    """First crossing for constant LFLs via S_n - min_{j<=n} S_j per subset."""
    lfls = spec.stream_lfls
    fam = [l.family for l in lfls]
    pre = [l.pre.densities[0].param for l in lfls]
    post = [l.post.densities[0].param for l in lfls]
    ind = None if spec.streamset is None else spec.streamset.indicator.T
    level = None  # running statistic per subset carried across chunks
    n0 = 1
    while n0 <= horizon:
        c = min(chunk, horizon - n0 + 1)
        x = source.sample(rng_pre, rng_post, n0, c)
        z = np.empty_like(x)
        for t in range(x.shape[1]):
            z[:, t] = llr_params(fam[t], post[t], pre[t], x[:, t])
        if ind is not None:
            z = z @ ind
        if level is None:
            level = np.zeros(z.shape[1])
        S = level + np.cumsum(z, axis=0)
        low = np.minimum(np.minimum.accumulate(S, axis=0), 0.0)
        W = (S - low).max(axis=1)
        hit = np.nonzero(W >= spec.threshold.array(np.arange(n0, n0 + c)))[0]
        if hit.size:
            return n0 + int(hit[0])
        level = S[-1] - low[-1]
        n0 += c
    return None


def _stop_slow(spec: DetectorSpec, source: Source, horizon: int, rng_pre, rng_post, chunk: int) -> int | None:
    state = spec.make_state()
    n0 = 1
    while n0 <= horizon:
        c = min(chunk, horizon - n0 + 1)
        x = source.sample(rng_pre, rng_post, n0, c)
        for row in x:
            stat = state.step(row[0] if spec.streamset is None else row)
            if stat >= spec.threshold(state.n):
                return state.n
        n0 += c
    return None


def stop_time(spec: DetectorSpec, source: Source, horizon: int, rng_pre, rng_post=None, chunk: int = 512):
    """Simulate one run and return the stop time (None if censored)."""
    rng_post = rng_pre if rng_post is None else rng_post
    run = _stop_fast if spec.fast else _stop_slow
    return run(spec, source, horizon, rng_pre, rng_post, chunk)


def _trial_block(args):
    spec, source, cfg, trials, shared_prefix, arm = args
    out = []
    for i in trials:
        if shared_prefix:
            out.append(stop_time(spec, source, cfg.horizon, trial_rng(cfg.seed, i, 0), trial_rng(cfg.seed, i, arm), cfg.chunk))
        else:
            out.append(stop_time(spec, source, cfg.horizon, trial_rng(cfg.seed, i, arm), None, cfg.chunk))
    return out


def simulate_stop_times(spec: DetectorSpec, source: Source, cfg: McConfig, shared_prefix=False, arm=0) -> list:
    """Stop times of ``cfg.trials`` independent runs, in trial order.

    With ``shared_prefix`` the pre-change observations of trial i come from
    a generator shared across arms (common random numbers) and the
    post-change ones from an arm-specific generator.
    """
    idx = list(range(cfg.trials))
    if cfg.workers <= 1:
        return _trial_block((spec, source, cfg, idx, shared_prefix, arm))
    blocks = [idx[w :: cfg.workers] for w in range(cfg.workers)]
    with ProcessPoolExecutor(cfg.workers) as ex:
        parts = list(ex.map(_trial_block, [(spec, source, cfg, b, shared_prefix, arm) for b in blocks]))
    out = [None] * cfg.trials
    for b, part in zip(blocks, parts):
        for i, tau in zip(b, part):
            out[i] = tau
    return out


# ---------------------------------------------------------------------------
# estimators


def estimate_arl(spec: DetectorSpec, pre_law, cfg: McConfig) -> McEstimate:
    """Mean stop time under no change; censored runs count as the horizon."""
    taus = simulate_stop_times(spec, Source.build(spec.M, pre_law), cfg)
    censored = np.array([t is None for t in taus])
    values = [cfg.horizon if t is None else t for t in taus]
    return _estimate("arl", values, censored, cfg)


def delays(taus, nu: int, horizon: int):
    """(delays, false_alarm mask, censored mask) with delay = tau - nu + 1."""
    taus = np.array([horizon + 1 if t is None else t for t in taus])
    censored = taus > horizon
    false_alarm = taus < nu
    d = np.where(censored, horizon - nu + 1, taus - nu + 1)
    return np.maximum(d, 0), false_alarm, censored


def estimate_cadd(spec: DetectorSpec, pre, post, nu: int, cfg: McConfig, affected=None) -> McEstimate:
    """Mean of (tau - nu + 1) over runs with tau >= nu.

    Runs that stop before nu are reported as ``false_alarm_fraction``.
    """
    if nu < 1:
        raise ValueError("change point must be >= 1")
    if nu > cfg.horizon:
        raise ValueError("change point beyond horizon")
    source = Source.build(spec.M, pre, post, nu, affected)
    d, fa, cens = delays(simulate_stop_times(spec, source, cfg), nu, cfg.horizon)
    ok = ~fa
    return _estimate("cadd", d[ok], cens[ok], cfg, nu=nu, false_alarm_fraction=float(fa.mean()))


def worst_case_delay(spec: DetectorSpec, pre, post, cfg: McConfig, nus=(1, 10, 25, 50), affected=None):
    """Max of CADD over a grid of change points (approximation to WADD)."""
    ests = [estimate_cadd(spec, pre, post, nu, cfg, affected) for nu in nus]
    return max(ests, key=lambda e: e.mean), ests


@dataclass
class Calibration:
    threshold: float
    estimate: McEstimate
    iterations: int
    history: list


def calibrate_threshold(
    spec: DetectorSpec,
    pre_law,
    target_arl: float,
    cfg: McConfig,
    rel_tol: float = 0.1,
    max_iter: int = 40,
    expansions: int = 4,
) -> Calibration:
    """Bisection on a constant threshold until the MC ARL is within target*(1 +- rel_tol).

    The same seed is reused at every threshold, so the estimated ARL is a
    non-decreasing function of the threshold and bisection is well posed.
    """
    if not target_arl > 1:
        raise ValueError("target ARL must be > 1")
    history = []

    def arl(a):
        est = estimate_arl(spec.with_threshold(a), pre_law, cfg)
        history.append((a, est.mean))
        return est

    lo, hi = math.log(target_arl) / 2, 3 * math.log(target_arl)
    for _ in range(expansions + 1):
        e_lo, e_hi = arl(lo), arl(hi)
        if e_lo.mean <= target_arl <= e_hi.mean:
            break
        if e_lo.mean > target_arl:
            lo /= 2
        if e_hi.mean < target_arl:
            hi *= 2
    else:
        raise RuntimeError(
            f"could not bracket target ARL {target_arl}: ARL({lo:.4g})={e_lo.mean:.4g}, "
            f"ARL({hi:.4g})={e_hi.mean:.4g} (increase horizon?)"
        )

    best = min(((lo, e_lo), (hi, e_hi)), key=lambda p: abs(p[1].mean - target_arl))
    for it in range(1, max_iter + 1):
        if abs(best[1].mean - target_arl) <= rel_tol * target_arl:
            return Calibration(best[0], best[1], it - 1, history)
        mid = 0.5 * (lo + hi)
        e = arl(mid)
        if e.mean < target_arl:
            lo = mid
        else:
            hi = mid
        if abs(e.mean - target_arl) < abs(best[1].mean - target_arl):
            best = (mid, e)
    if abs(best[1].mean - target_arl) <= rel_tol * target_arl:
        return Calibration(best[0], best[1], max_iter, history)
    raise RuntimeError(f"bisection did not reach target ARL {target_arl} within tolerance")


# ---------------------------------------------------------------------------
# dominance checks


@dataclass
class DominanceReport:
    """Empirical check that the LFL arm is (stochastically) worse than a member arm.

    For every N, ``p_lfl[N]`` should be >= ``p_member[N]`` up to sampling
    noise; ``margin = p_member - p_lfl - band`` is positive only on a
    violation.
    """

    metric: str
    ns: list
    p_lfl: list
    p_member: list
    band: list
    trials: int
    level: float

    @property
    def margins(self) -> list:
        return [pm - pl - b for pl, pm, b in zip(self.p_lfl, self.p_member, self.band)]

    @property
    def max_violation(self) -> float:
        return max(self.margins)

    @property
    def violations(self) -> list:
        return [n for n, m in zip(self.ns, self.margins) if m > 0]

    @property
    def passed(self) -> bool:
        return not self.violations

    def max_abs_gap_over_band(self) -> float:
        """Largest |p_lfl - p_member| - band; <= 0 means statistically indistinguishable."""
        return max(abs(pl - pm) - b for pl, pm, b in zip(self.p_lfl, self.p_member, self.band))

    def lines(self) -> list[str]:
        out = [f"# {self.metric} trials={self.trials} level={self.level}"]
        for row in zip(self.ns, self.p_lfl, self.p_member, self.band):
            out.append("N=%d p_lfl=%.6f p_member=%.6f band=%.6f" % row)
        return out


def _band(p1: np.ndarray, p2: np.ndarray, n: int, level: float) -> np.ndarray:
    z = stats.norm.ppf(0.5 + level / 2)
    return z * np.sqrt((p1 * (1 - p1) + p2 * (1 - p2)) / n)


def _param_range(law, n: int, nu: int | None = None) -> tuple[float, float]:
    if hasattr(law, "param_range"):
        return law.param_range(n)
    p = (law.density(n) if nu is None else law.density(n, nu)).param
    return p, p


def _pre_member_ok(member, lfl_pre, horizon: int, uclass=None) -> bool:
    if uclass is not None and isinstance(member, PreChangeLaw):
        return uclass.contains_pre(member, horizon)
    if member.family != lfl_pre.family:
        return False
    return all(_param_range(member, n)[1] <= lfl_pre.density(n).param + 1e-12 for n in range(1, horizon + 1))


def _post_member_ok(member, lfl_post, horizon: int, uclass=None) -> bool:
    if uclass is not None and isinstance(member, PostChangeLaw):
        return uclass.contains_post(member, horizon)
    if member.family != lfl_post.family:
        return False
    for n in range(1, horizon + 1):
        for nu in range(1, n + 1):
            if _param_range(member, n, nu)[0] < lfl_post.density(n, nu).param - 1e-12:
                return False
    return True


def dominance_test_false_alarm(
    spec: DetectorSpec,
    lfl_pre,
    member,
    n_grid: Sequence[int],
    cfg: McConfig,
    uclass=None,
    level: float = 0.99,
    check_horizon: int = 50,
) -> DominanceReport:
    """Compare P(tau <= N) under the pre-change LFL and under a class member.

    The LFL arm should alarm at least as often as the member arm.
    """
    members = _as_list(member, spec.M)
    lfl_pres = _as_list(lfl_pre, spec.M)
    for m, f in zip(members, lfl_pres):
        if not _pre_member_ok(m, f, check_horizon, uclass):
            raise ValueError("pre-change member outside the uncertainty class")
    ns = sorted(int(n) for n in n_grid)
    run_cfg = dataclasses.replace(cfg, horizon=max(ns))
    t_lfl = simulate_stop_times(spec, Source.build(spec.M, lfl_pres), run_cfg, arm=1)
    t_mem = simulate_stop_times(spec, Source.build(spec.M, members), run_cfg, arm=2)
    big = max(ns) + 1
    a = np.array([big if t is None else t for t in t_lfl])
    b = np.array([big if t is None else t for t in t_mem])
    p1 = np.array([(a <= n).mean() for n in ns])
    p2 = np.array([(b <= n).mean() for n in ns])
    band = _band(p1, p2, cfg.trials, level)
    return DominanceReport("P(tau <= N)", ns, p1.tolist(), p2.tolist(), band.tolist(), cfg.trials, level)


def dominance_test_delay(
    spec: DetectorSpec,
    pre,
    lfl_post,
    member,
    nu: int,
    n_grid: Sequence[int],
    cfg: McConfig,
    affected=None,
    uclass=None,
    level: float = 0.99,
    check_horizon: int = 50,
) -> DominanceReport:
    """Compare P((tau - nu + 1)^+ > N) under the post-change LFL and a member.

    Both arms share the first nu-1 observations of each trial (common
    random numbers), which realizes the conditioning on the pre-change past.
    """
    lfl_posts = _as_list(lfl_post, spec.M)
    members = _as_list(member, spec.M)
    chk = range(spec.M) if affected is None else affected
    for t in chk:
        if not _post_member_ok(members[t], lfl_posts[t], check_horizon, uclass):
            raise ValueError("post-change member outside the uncertainty class")
    ns = sorted(int(n) for n in n_grid)
    run_cfg = dataclasses.replace(cfg, horizon=nu + max(ns))
    src_lfl = Source.build(spec.M, pre, lfl_posts, nu, affected)
    src_mem = Source.build(spec.M, pre, members, nu, affected)
    d1, _, _ = delays(simulate_stop_times(spec, src_lfl, run_cfg, shared_prefix=True, arm=1), nu, run_cfg.horizon)
    d2, _, _ = delays(simulate_stop_times(spec, src_mem, run_cfg, shared_prefix=True, arm=2), nu, run_cfg.horizon)
    p1 = np.array([(d1 > n).mean() for n in ns])
    p2 = np.array([(d2 > n).mean() for n in ns])
    band = _band(p1, p2, cfg.trials, level)
    return DominanceReport("P(delay > N)", ns, p1.tolist(), p2.tolist(), band.tolist(), cfg.trials, level)

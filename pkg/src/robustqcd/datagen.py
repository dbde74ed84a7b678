"""Synthetic observation streams for the single- and multi-stream scenarios.

Scenario kinds:

* ``lfl``       -- pre/post fixed at one parameter each
* ``random``    -- parameter drawn uniformly per time step from an interval
* ``ipid``      -- parameters cycle through a list with period T (indexed by n)
* ``exploding`` -- constant pre; post parameter h_{n-nu+1} from a list

Parameter draws and observation noise use separate generators spawned
from the scenario seed, so the same parameters can be replayed under
fresh noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .laws import Density, Family, sample_params

KINDS = ("lfl", "random", "ipid", "exploding")


@dataclass(frozen=True)
class RandomParamLaw:
    """Law whose parameter is redrawn uniformly in [lo, hi] at every step.

    Usable anywhere a pre- or post-change law is sampled (``nu`` ignored).
    """

    family: Family
    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo <= self.hi:
            raise ValueError("empty parameter interval")
        if self.family == "poisson" and self.lo <= 0:
            raise ValueError("Poisson rates must be > 0")

    def draw_params(self, rng: np.random.Generator, size) -> np.ndarray:
        p = rng.uniform(self.lo, self.hi, size)
        assert np.all((p >= self.lo) & (p <= self.hi))
        return p

    def sample(self, rng: np.random.Generator, ns, nu=None) -> np.ndarray:
        ns = np.asarray(ns)
        return sample_params(self.family, self.draw_params(rng, ns.shape), rng)

    def param_range(self, n: int) -> tuple[float, float]:
        return self.lo, self.hi


@dataclass(frozen=True)
class ScenarioSpec:
    """One synthetic stream.

    ``pre`` and ``post`` are interpreted per kind: a number for ``lfl``,
    an interval (lo, hi) for ``random``, equal-length lists for ``ipid``,
    and a number / list of h-parameters for ``exploding``.  ``nu=None``
    means no change.
    """

    kind: str
    family: Family
    pre: object
    post: object
    nu: int | None
    horizon: int
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown scenario kind {self.kind!r}")
        if self.family not in ("gaussian", "poisson"):
            raise ValueError(f"unknown family {self.family!r}")
        if self.horizon < 0:
            raise ValueError("horizon must be >= 0")
        if self.nu is not None and self.nu < 1:
            raise ValueError("change point must be >= 1")
        pre, post = self.pre, self.post
        if self.kind == "lfl":
            pre, post = float(pre), float(post)
        elif self.kind == "random":
            pre, post = _interval(pre), _interval(post)
        elif self.kind == "ipid":
            pre, post = tuple(map(float, pre)), tuple(map(float, post))
            if not pre or len(pre) != len(post):
                raise ValueError("ipid pre and post lists must have equal, non-zero length")
        else:
            pre, post = float(pre), tuple(map(float, np.atleast_1d(post)))
            if not post:
                raise ValueError("exploding scenario needs a non-empty h list")
        if self.family == "poisson":
            flat = np.concatenate([np.atleast_1d(pre), np.atleast_1d(post)])
            if np.any(flat <= 0):
                raise ValueError("Poisson rates must be > 0")
        object.__setattr__(self, "pre", pre)
        object.__setattr__(self, "post", post)

    @property
    def period(self) -> int | None:
        return len(self.pre) if self.kind == "ipid" else None

    def to_dict(self) -> dict:
        def plain(v):
            return list(v) if isinstance(v, tuple) else v

        return {
            "kind": self.kind,
            "family": self.family,
            "pre": plain(self.pre),
            "post": plain(self.post),
            "nu": self.nu,
            "horizon": self.horizon,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioSpec":
        nu = d.get("nu")
        if isinstance(nu, str) and nu.lower() in ("inf", "none", "never"):
            nu = None
        return cls(d["kind"], d["family"], d["pre"], d["post"], nu, int(d["horizon"]), int(d.get("seed", 0)))


def _interval(v) -> tuple[float, float]:
    lo, hi = map(float, v)
    if not lo <= hi:
        raise ValueError(f"empty interval {v!r}")
    return lo, hi


def scenario_rngs(seed: int) -> tuple[np.random.Generator, np.random.Generator]:
    """(parameter generator, noise generator) for a scenario seed."""
    p, x = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(p), np.random.default_rng(x)


def scenario_params(spec: ScenarioSpec, rng_params: np.random.Generator | None = None) -> np.ndarray:
    """Per-step density parameters of the scenario, for n = 1..horizon."""
    if rng_params is None:
        rng_params = scenario_rngs(spec.seed)[0]
    T = spec.horizon
    ns = np.arange(1, T + 1)
    post_mask = np.zeros(T, dtype=bool) if spec.nu is None else ns >= spec.nu
    if spec.kind == "lfl":
        return np.where(post_mask, spec.post, spec.pre)
    if spec.kind == "random":
        # draw both arms for every n so the pre/post split does not shift the draws
        pre = rng_params.uniform(*spec.pre, T)
        post = rng_params.uniform(*spec.post, T)
        out = np.where(post_mask, post, pre)
        lo = np.where(post_mask, spec.post[0], spec.pre[0])
        hi = np.where(post_mask, spec.post[1], spec.pre[1])
        assert np.all((out >= lo) & (out <= hi))
        return out
    if spec.kind == "ipid":
        slot = (ns - 1) % spec.period
        return np.where(post_mask, np.asarray(spec.post)[slot], np.asarray(spec.pre)[slot])
    h = np.asarray(spec.post)
    lag = np.zeros(T, dtype=int) if spec.nu is None else np.clip(ns - spec.nu, 0, len(h) - 1)
    return np.where(post_mask, h[lag], spec.pre)


def gen_single(spec: ScenarioSpec, return_params: bool = False):
    """Observations X_1..X_horizon of one scenario."""
    rng_p, rng_x = scenario_rngs(spec.seed)
    params = scenario_params(spec, rng_p)
    x = sample_params(spec.family, params, rng_x)
    return (x, params) if return_params else x


@dataclass(frozen=True)
class MultiScenarioSpec:
    """M independent streams; streams in ``affected`` follow ``scenario``,
    the others follow ``unaffected`` throughout."""

    M: int
    affected: tuple
    scenario: ScenarioSpec
    unaffected: Density
    nu: int | None
    horizon: int
    seed: int = 0
    per_stream: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.M < 1:
            raise ValueError("need at least one stream")
        b = tuple(sorted(set(int(t) for t in self.affected)))
        if any(t < 0 or t >= self.M for t in b):
            raise ValueError(f"affected streams {b} outside 0..{self.M - 1}")
        if self.nu is not None and not b:
            raise ValueError("a change needs a non-empty affected subset")
        object.__setattr__(self, "affected", b)


def gen_multi(spec: MultiScenarioSpec, return_params: bool = False):
    """T x M matrix; each stream gets its own child seed."""
    children = np.random.SeedSequence(spec.seed).spawn(spec.M)
    X = np.empty((spec.horizon, spec.M))
    P = np.empty((spec.horizon, spec.M))
    for t in range(spec.M):
        child_seed = int(children[t].generate_state(1)[0])
        if t in spec.affected:
            base = spec.per_stream.get(t, spec.scenario)
            s = ScenarioSpec(base.kind, base.family, base.pre, base.post, spec.nu, spec.horizon, child_seed)
        else:
            d = spec.unaffected
            s = ScenarioSpec("lfl", d.family, d.param, d.param, None, spec.horizon, child_seed)
        X[:, t], P[:, t] = gen_single(s, return_params=True)
    return (X, P) if return_params else X


def add_noise(series, noise: Density, seed: int) -> np.ndarray:
    """series + independent draws from ``noise``."""
    series = np.asarray(series, dtype=float)
    if not np.all(np.isfinite(series)):
        raise ValueError("series must be finite")
    rng = np.random.default_rng(seed)
    return series + noise.sample(rng, series.shape)


def default_ipid_lists(family: Family) -> tuple[list[float], list[float]]:
    """The period-11 parameter lists of the single-stream experiments."""
    steps = np.arange(11)
    if family == "gaussian":
        return list(np.round(0.1 * steps, 10)), list(np.round(2 + 0.1 * steps, 10))
    return list(np.round(0.4 + 0.01 * steps, 10)), list(np.round(1 + 0.01 * steps, 10))


def single_stream_bundle(family: Family, nu: int, horizon: int, seed: int) -> dict[str, ScenarioSpec]:
    """The LFL / random / periodic scenario triple used in the single-stream study."""
    if family == "gaussian":
        pre_i, post_i = (0.0, 1.0), (2.0, 3.0)
    else:
        pre_i, post_i = (0.4, 0.5), (1.0, 1.1)
    pre_l, post_l = default_ipid_lists(family)
    return {
        "lfl": ScenarioSpec("lfl", family, pre_i[1], post_i[0], nu, horizon, seed),
        "random": ScenarioSpec("random", family, pre_i, post_i, nu, horizon, seed + 1),
        "ipid": ScenarioSpec("ipid", family, pre_l, post_l, nu, horizon, seed + 2),
    }


def nu_label(nu) -> str:
    return "inf" if nu is None or (isinstance(nu, float) and math.isinf(nu)) else str(nu)

"""Densities, non-stationary laws, uncertainty classes and least favorable laws.

Only two families are supported: Gaussian (unit variance in uncertainty
classes) and Poisson.  Every density is a frozen value object; laws are
sequences of densities indexed by time ``n`` (pre-change) or by time and
change point ``(n, nu)`` (post-change).  Time indices start at 1.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Literal, Sequence

import numpy as np
from scipy import special, stats

Family = Literal["gaussian", "poisson"]
FAMILIES = ("gaussian", "poisson")

# log-ratio slack used by the order checks
ORDER_TOL = 1e-12


class SupportError(ValueError):
    """Observation outside the support of a density."""


class SeparationError(ValueError):
    """Pre-change upper bound not strictly below post-change lower bound."""

    def __init__(self, n: int, nu: int | None, pre: float, post: float):
        self.n, self.nu, self.pre, self.post = n, nu, pre, post
        where = f"n={n}" if nu is None else f"(n={n}, nu={nu})"
        super().__init__(
            f"separation violated at {where}: pre-change bound {pre!r} "
            f"is not below post-change bound {post!r}"
        )


@dataclass(frozen=True)
class Density:
    """A Gaussian or Poisson density.

    ``param`` is the mean for Gaussian and the rate for Poisson.
    """

    family: Family
    param: float
    variance: float = 1.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        if not math.isfinite(self.param):
            raise ValueError("density parameter must be finite")
        if self.family == "gaussian":
            if not self.variance > 0:
                raise ValueError("Gaussian variance must be > 0")
        else:
            if not self.param > 0:
                raise ValueError("Poisson rate must be > 0")
            if self.variance != 1.0:
                raise ValueError("Poisson densities take no variance")
        object.__setattr__(self, "param", float(self.param))
        object.__setattr__(self, "variance", float(self.variance))

    @classmethod
    def gaussian(cls, mean: float, variance: float = 1.0) -> "Density":
        return cls("gaussian", mean, variance)

    @classmethod
    def poisson(cls, rate: float) -> "Density":
        return cls("poisson", rate)

    @property
    def continuous(self) -> bool:
        return self.family == "gaussian"

    @property
    def mean(self) -> float:
        return self.param

    def check_support(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.family == "poisson":
            if np.any(x < 0) or np.any(x != np.floor(x)):
                raise SupportError("Poisson observations must be non-negative integers")
        elif not np.all(np.isfinite(x)):
            raise SupportError("Gaussian observations must be finite")
        return x

    def logpdf(self, x):
        """Log density (Gaussian) or log mass (Poisson) at ``x``."""
        x = self.check_support(x)
        if self.family == "gaussian":
            v = self.variance
            out = -0.5 * (x - self.param) ** 2 / v - 0.5 * math.log(2 * math.pi * v)
        else:
            lam = self.param
            out = special.xlogy(x, lam) - lam - special.gammaln(x + 1)
        return out if out.ndim else float(out)

    def survival(self, t):
        """P(X >= t)."""
        t = np.asarray(t, dtype=float)
        if self.family == "gaussian":
            out = special.ndtr((self.param - t) / math.sqrt(self.variance))
        else:
            # P(X >= t) = P(X > ceil(t) - 1)
            out = stats.poisson.sf(np.ceil(t) - 1, self.param)
            out = np.where(t <= 0, 1.0, out)
        return out if out.ndim else float(out)

    def sample(self, rng: np.random.Generator, size=None):
        if self.family == "gaussian":
            return rng.normal(self.param, math.sqrt(self.variance), size)
        return rng.poisson(self.param, size).astype(float)

    def __str__(self):
        if self.family == "gaussian":
            return f"N({self.param:g}, {self.variance:g})"
        return f"Pois({self.param:g})"


def _same_family(g: Density, f: Density):
    if g.family != f.family:
        raise ValueError(f"densities from different families: {g.family} vs {f.family}")


def log_likelihood_ratio(g: Density, f: Density, x):
    """log g(x) - log f(x), in closed form for both families."""
    _same_family(g, f)
    x = f.check_support(x)
    if g.family == "gaussian":
        out = llr_gaussian(g.param, f.param, x, g.variance, f.variance)
    else:
        out = llr_poisson(g.param, f.param, x)
    return out if np.ndim(out) else float(out)


def llr_gaussian(mu_g, mu_f, x, var_g=1.0, var_f=1.0):
    """Vectorized Gaussian log-likelihood ratio; broadcasts over all arguments."""
    if np.all(np.asarray(var_g) == 1.0) and np.all(np.asarray(var_f) == 1.0):
        return (mu_g - mu_f) * x - (mu_g * mu_g - mu_f * mu_f) / 2.0
    return (
        -0.5 * (x - mu_g) ** 2 / var_g
        + 0.5 * (x - mu_f) ** 2 / var_f
        - 0.5 * np.log(np.asarray(var_g) / var_f)
    )


def llr_poisson(lam_g, lam_f, x):
    """Vectorized Poisson log-likelihood ratio ``x log(lam_g/lam_f) - lam_g + lam_f``."""
    return x * np.log(np.asarray(lam_g) / lam_f) - lam_g + lam_f


def llr_params(family: Family, post, pre, x):
    """Log-likelihood ratio given raw parameters (unit-variance Gaussian or Poisson)."""
    if family == "gaussian":
        return llr_gaussian(post, pre, x)
    return llr_poisson(post, pre, x)


def kl_divergence(g: Density, f: Density) -> float:
    """D(g || f) in closed form."""
    _same_family(g, f)
    if g.family == "gaussian":
        vg, vf = g.variance, f.variance
        return 0.5 * (vg / vf + (g.param - f.param) ** 2 / vf - 1.0 + math.log(vf / vg))
    lg, lf = g.param, f.param
    return lg * math.log(lg / lf) - lg + lf


def _check_grid(grid) -> np.ndarray:
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 3:
        raise ValueError("grid must be one-dimensional with at least 3 points")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be strictly ascending")
    return grid


def check_mlr_order(g: Density, f: Density, grid) -> bool:
    """True iff g(x)/f(x) is non-decreasing over the grid."""
    _same_family(g, f)
    grid = _check_grid(grid)
    r = np.asarray(g.logpdf(grid)) - np.asarray(f.logpdf(grid))
    return bool(np.all(np.diff(r) >= -ORDER_TOL))


def check_stochastic_dominance(a: Density, b: Density, grid) -> bool:
    """True iff ``a`` is stochastically larger than ``b`` on every grid point."""
    _same_family(a, b)
    grid = _check_grid(grid)
    return bool(np.all(np.asarray(a.survival(grid)) >= np.asarray(b.survival(grid)) - ORDER_TOL))


def standard_grid(*densities: Density, points: int = 1000) -> np.ndarray:
    """Deterministic validation grid covering all the given densities."""
    fam = {d.family for d in densities}
    if len(fam) != 1:
        raise ValueError("standard_grid needs densities of one family")
    params = [d.param for d in densities]
    if densities[0].family == "gaussian":
        sd = max(math.sqrt(d.variance) for d in densities)
        return np.linspace(min(params) - 8 * sd, max(params) + 8 * sd, points)
    return np.arange(0, math.ceil(20 * max(params)) + 1, dtype=float)


# ---------------------------------------------------------------------------
# non-stationary laws


PRE_KINDS = ("constant", "periodic", "explicit", "tabulated")
POST_KINDS = ("constant", "periodic", "nu_indexed", "change_aligned")


def _check_index(n: int, name: str = "n"):
    if int(n) != n or n < 1:
        raise IndexError(f"{name} must be an integer >= 1, got {n!r}")


class HorizonError(IndexError):
    """A tabulated law was queried beyond its horizon."""


@dataclass(frozen=True)
class PreChangeLaw:
    """Pre-change density sequence {f_n}.

    Build with :meth:`constant`, :meth:`periodic`, :meth:`explicit` or
    :meth:`tabulated` rather than calling the constructor directly.
    """

    kind: str
    densities: tuple = ()
    fn: Callable[[int], Density] | None = field(default=None, compare=False)
    family_: Family | None = None

    def __post_init__(self):
        if self.kind not in PRE_KINDS:
            raise ValueError(f"unknown pre-change kind {self.kind!r}")
        if self.kind == "explicit":
            if self.fn is None or self.family_ is None:
                raise ValueError("explicit laws need fn and family")
        else:
            if not self.densities:
                raise ValueError(f"{self.kind} law needs at least one density")
            if self.kind == "constant" and len(self.densities) != 1:
                raise ValueError("constant law takes exactly one density")
            fams = {d.family for d in self.densities}
            if len(fams) != 1:
                raise ValueError("all densities of a law must share a family")
            object.__setattr__(self, "family_", fams.pop())

    @classmethod
    def constant(cls, d: Density) -> "PreChangeLaw":
        return cls("constant", (d,))

    @classmethod
    def periodic(cls, ds: Sequence[Density]) -> "PreChangeLaw":
        return cls("periodic", tuple(ds))

    @classmethod
    def explicit(cls, fn: Callable[[int], Density], family: Family) -> "PreChangeLaw":
        return cls("explicit", (), fn, family)

    @classmethod
    def tabulated(cls, ds: Sequence[Density]) -> "PreChangeLaw":
        return cls("tabulated", tuple(ds))

    @property
    def family(self) -> Family:
        return self.family_

    @property
    def period(self) -> int | None:
        return len(self.densities) if self.kind == "periodic" else None

    @property
    def horizon(self) -> int | None:
        return len(self.densities) if self.kind == "tabulated" else None

    def density(self, n: int) -> Density:
        _check_index(n)
        if self.kind == "constant":
            return self.densities[0]
        if self.kind == "periodic":
            return self.densities[(n - 1) % len(self.densities)]
        if self.kind == "tabulated":
            if n > len(self.densities):
                raise HorizonError(f"n={n} beyond tabulated horizon {len(self.densities)}")
            return self.densities[n - 1]
        d = self.fn(n)
        if d.family != self.family_:
            raise ValueError(f"explicit law returned {d.family} at n={n}")
        return d

    def params(self, ns) -> np.ndarray:
        """Vector of density parameters at times ``ns``."""
        ns = np.asarray(ns, dtype=int)
        if self.kind == "constant":
            return np.full(ns.shape, self.densities[0].param)
        if np.any(ns < 1):
            raise IndexError("time indices start at 1")
        table = np.array([d.param for d in self.densities])
        if self.kind == "periodic":
            return table[(ns - 1) % len(table)]
        if self.kind == "tabulated":
            if np.any(ns > len(table)):
                raise HorizonError(f"n beyond tabulated horizon {len(table)}")
            return table[ns - 1]
        return np.array([self.density(int(n)).param for n in ns.ravel()]).reshape(ns.shape)

    def sample(self, rng: np.random.Generator, ns) -> np.ndarray:
        return sample_params(self.family, self.params(ns), rng)


@dataclass(frozen=True)
class PostChangeLaw:
    """Post-change density family {g_{n,nu}}, defined for n >= nu >= 1.

    ``change_aligned`` laws use g_{n,nu} = h_{n-nu+1}; the last h repeats
    once the lag exceeds the list length.
    """

    kind: str
    densities: tuple = ()
    fn: Callable[[int, int], Density] | None = field(default=None, compare=False)
    family_: Family | None = None

    def __post_init__(self):
        if self.kind not in POST_KINDS:
            raise ValueError(f"unknown post-change kind {self.kind!r}")
        if self.kind == "nu_indexed":
            if self.fn is None or self.family_ is None:
                raise ValueError("nu_indexed laws need fn and family")
        else:
            if not self.densities:
                raise ValueError(f"{self.kind} law needs at least one density")
            if self.kind == "constant" and len(self.densities) != 1:
                raise ValueError("constant law takes exactly one density")
            fams = {d.family for d in self.densities}
            if len(fams) != 1:
                raise ValueError("all densities of a law must share a family")
            object.__setattr__(self, "family_", fams.pop())

    @classmethod
    def constant(cls, d: Density) -> "PostChangeLaw":
        return cls("constant", (d,))

    @classmethod
    def periodic(cls, ds: Sequence[Density]) -> "PostChangeLaw":
        return cls("periodic", tuple(ds))

    @classmethod
    def nu_indexed(cls, fn: Callable[[int, int], Density], family: Family) -> "PostChangeLaw":
        return cls("nu_indexed", (), fn, family)

    @classmethod
    def change_aligned(cls, hs: Sequence[Density]) -> "PostChangeLaw":
        return cls("change_aligned", tuple(hs))

    @property
    def family(self) -> Family:
        return self.family_

    @property
    def period(self) -> int | None:
        return len(self.densities) if self.kind == "periodic" else None

    @property
    def depends_on_nu(self) -> bool:
        return self.kind in ("nu_indexed", "change_aligned")

    def density(self, n: int, nu: int) -> Density:
        _check_index(n)
        _check_index(nu, "nu")
        if nu > n:
            raise IndexError(f"post-change law undefined for nu={nu} > n={n}")
        if self.kind == "constant":
            return self.densities[0]
        if self.kind == "periodic":
            return self.densities[(n - 1) % len(self.densities)]
        if self.kind == "change_aligned":
            return self.densities[min(n - nu, len(self.densities) - 1)]
        d = self.fn(n, nu)
        if d.family != self.family_:
            raise ValueError(f"nu_indexed law returned {d.family} at (n={n}, nu={nu})")
        return d

    def params(self, ns, nus) -> np.ndarray:
        """Vector of parameters g_{n,nu}; ``ns`` and ``nus`` broadcast."""
        ns, nus = np.broadcast_arrays(np.asarray(ns, dtype=int), np.asarray(nus, dtype=int))
        if np.any(nus < 1) or np.any(nus > ns):
            raise IndexError("post-change law needs 1 <= nu <= n")
        if self.kind == "constant":
            return np.full(ns.shape, self.densities[0].param)
        table = np.array([d.param for d in self.densities])
        if self.kind == "periodic":
            return table[(ns - 1) % len(table)]
        if self.kind == "change_aligned":
            return table[np.minimum(ns - nus, len(table) - 1)]
        flat = [self.density(int(n), int(v)).param for n, v in zip(ns.ravel(), nus.ravel())]
        return np.array(flat).reshape(ns.shape)

    def sample(self, rng: np.random.Generator, ns, nu: int) -> np.ndarray:
        return sample_params(self.family, self.params(ns, nu), rng)


def sample_params(family: Family, params, rng: np.random.Generator) -> np.ndarray:
    """One draw per parameter entry (unit-variance Gaussian or Poisson)."""
    params = np.asarray(params, dtype=float)
    if family == "gaussian":
        return params + rng.standard_normal(params.shape)
    return rng.poisson(params).astype(float)


def _law_parts(law):
    return law.kind, law.densities


def law_to_dict(law) -> dict:
    """Serializable form of a law (function-backed kinds cannot be serialized)."""
    if law.kind in ("explicit", "nu_indexed"):
        raise ValueError(f"{law.kind} laws are function-backed and cannot be serialized")
    params = [d.param for d in law.densities]
    return {
        "kind": law.kind,
        "family": law.family,
        "params": params[0] if law.kind == "constant" else params,
    }


def law_from_dict(d: dict, post: bool):
    family, kind, params = d["family"], d["kind"], d["params"]
    cls = PostChangeLaw if post else PreChangeLaw
    if kind == "constant":
        return cls.constant(Density(family, float(params)))
    if not isinstance(params, (list, tuple)):
        raise ValueError(f"{kind} law needs a list of parameters")
    return cls(kind, tuple(Density(family, float(p)) for p in params))


# ---------------------------------------------------------------------------
# LFL pairs


@dataclass(frozen=True)
class LflPair:
    """Least favorable pre/post pair (F̄, Ḡ) used to design a detector.

    Construction checks that both laws share a family and that
    D(ḡ_{n,nu} || f̄_n) > 0 on a validation grid of (n, nu).
    """

    pre: PreChangeLaw
    post: PostChangeLaw
    validate_upto: int = 30

    def __post_init__(self):
        if self.pre.family != self.post.family:
            raise ValueError("pre and post LFLs must share a family")
        top = self.validate_upto
        if self.pre.horizon is not None:
            top = min(top, self.pre.horizon)
        for n in range(1, top + 1):
            f = self.pre.density(n)
            nus = range(1, n + 1) if self.post.depends_on_nu else (n,)
            for nu in nus:
                if kl_divergence(self.post.density(n, nu), f) <= 0:
                    raise ValueError(
                        f"identical pre/post LFL at (n={n}, nu={nu}): "
                        "Kullback-Leibler divergence must be positive"
                    )

    @property
    def family(self) -> Family:
        return self.pre.family

    @property
    def is_constant(self) -> bool:
        return self.pre.kind == "constant" and self.post.kind == "constant"

    def llr(self, n: int, nu, x):
        """Z_{n,nu}(x) = log ḡ_{n,nu}(x) / f̄_n(x); ``nu`` may be an array."""
        pre = self.pre.params([n])[0]
        post = self.post.params(n, nu)
        return llr_params(self.family, post, pre, x)

    def to_dict(self) -> dict:
        return {"pre": law_to_dict(self.pre), "post": law_to_dict(self.post)}

    @classmethod
    def from_dict(cls, d: dict) -> "LflPair":
        return cls(law_from_dict(d["pre"], post=False), law_from_dict(d["post"], post=True))

    def __str__(self):
        if self.is_constant:
            return f"({self.pre.densities[0]}, {self.post.densities[0]})"
        return f"LflPair(pre={self.pre.kind}, post={self.post.kind})"


def constant_lfl(pre: Density, post: Density) -> LflPair:
    return LflPair(PreChangeLaw.constant(pre), PostChangeLaw.constant(post))


# ---------------------------------------------------------------------------
# uncertainty classes


BOUND_KINDS_PRE = ("constant", "periodic", "table", "function")
BOUND_KINDS_POST = ("constant", "periodic", "change_aligned", "function")


@dataclass(frozen=True)
class Bound:
    """A per-time parameter bound.

    ``values`` holds one number (constant), one period (periodic), a finite
    table, or a change-aligned list; ``fn`` backs the ``function`` kind.
    """

    kind: str
    values: tuple = ()
    fn: Callable | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind == "function":
            if self.fn is None:
                raise ValueError("function bound needs fn")
        else:
            vals = tuple(float(v) for v in np.atleast_1d(self.values))
            if not vals:
                raise ValueError(f"{self.kind} bound needs values")
            if self.kind == "constant" and len(vals) != 1:
                raise ValueError("constant bound takes one value")
            object.__setattr__(self, "values", vals)

    @classmethod
    def of(cls, spec) -> "Bound":
        """Coerce a number, list, callable or Bound into a Bound."""
        if isinstance(spec, Bound):
            return spec
        if callable(spec):
            return cls("function", fn=spec)
        if np.ndim(spec) == 0:
            return cls("constant", (float(spec),))
        raise TypeError("ambiguous bound; use Bound(kind, values)")

    def pre(self, n: int) -> float:
        if self.kind == "constant":
            return self.values[0]
        if self.kind == "periodic":
            return self.values[(n - 1) % len(self.values)]
        if self.kind == "table":
            if n > len(self.values):
                raise HorizonError(f"n={n} beyond bound table of length {len(self.values)}")
            return self.values[n - 1]
        if self.kind == "function":
            return float(self.fn(n))
        raise ValueError(f"{self.kind} is not a pre-change bound kind")

    def post(self, n: int, nu: int) -> float:
        if self.kind == "constant":
            return self.values[0]
        if self.kind == "periodic":
            return self.values[(n - 1) % len(self.values)]
        if self.kind == "change_aligned":
            return self.values[min(n - nu, len(self.values) - 1)]
        if self.kind == "function":
            return float(self.fn(n, nu))
        raise ValueError(f"{self.kind} is not a post-change bound kind")

    @property
    def span(self) -> int:
        return 1 if self.kind in ("constant", "function") else len(self.values)

    def to_dict(self) -> dict:
        if self.kind == "function":
            raise ValueError("function bounds cannot be serialized")
        vals = list(self.values)
        return {"kind": self.kind, "values": vals[0] if self.kind == "constant" else vals}

    @classmethod
    def from_dict(cls, d) -> "Bound":
        if not isinstance(d, dict):
            return cls.of(d)
        return cls(d["kind"], tuple(np.atleast_1d(d["values"])))


@dataclass(frozen=True)
class UncertaintyClass:
    """Interval-parameterized class of non-stationary pre/post laws.

    Members have pre-change parameter in [pre_lower, pre_bound(n)] and
    post-change parameter in [post_bound(n, nu), post_upper].  Only the
    upper pre bound and lower post bound enter the LFL; the outer limits
    are used for membership checks.
    """

    family: Family
    pre_bound: Bound
    post_bound: Bound
    pre_lower: float | None = None
    post_upper: float = math.inf
    grid_horizon: int = 50

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        object.__setattr__(self, "pre_bound", Bound.of(self.pre_bound))
        object.__setattr__(self, "post_bound", Bound.of(self.post_bound))
        if self.pre_bound.kind not in BOUND_KINDS_PRE:
            raise ValueError(f"pre bound kind {self.pre_bound.kind!r} not allowed")
        if self.post_bound.kind not in BOUND_KINDS_POST:
            raise ValueError(f"post bound kind {self.post_bound.kind!r} not allowed")
        if self.pre_lower is None:
            object.__setattr__(self, "pre_lower", 0.0 if self.family == "poisson" else -math.inf)
        for n, nu in self.validation_points():
            pre = self.pre_bound.pre(n)
            post = self.post_bound.post(n, nu)
            if self.family == "poisson" and pre <= 0:
                raise ValueError(f"Poisson rate bound must be > 0 at n={n}")
            if not pre < post:
                raise SeparationError(n, nu, pre, post)
            if pre < self.pre_lower or post > self.post_upper:
                raise ValueError(f"empty parameter interval at (n={n}, nu={nu})")

    def validation_points(self):
        """(n, nu) pairs covering every combination of bound entries."""
        pb, qb = self.pre_bound, self.post_bound
        if pb.kind == "table":
            top = len(pb.values)
        else:
            top = pb.span + qb.span
            if "function" in (pb.kind, qb.kind):
                top = max(top, self.grid_horizon)
        for n in range(1, top + 1):
            nus = range(1, n + 1) if qb.kind in ("change_aligned", "function") else (n,)
            for nu in nus:
                yield n, nu

    def contains_pre(self, law: PreChangeLaw, horizon: int = 100) -> bool:
        if law.family != self.family:
            return False
        top = horizon if law.horizon is None else min(horizon, law.horizon)
        if self.pre_bound.kind == "table":
            top = min(top, len(self.pre_bound.values))
        for n in range(1, top + 1):
            p = law.density(n).param
            if not (self.pre_lower - ORDER_TOL <= p <= self.pre_bound.pre(n) + ORDER_TOL):
                return False
        return True

    def contains_post(self, law: PostChangeLaw, horizon: int = 100) -> bool:
        if law.family != self.family:
            return False
        for n in range(1, horizon + 1):
            nus = range(1, n + 1) if law.depends_on_nu or self.post_bound.kind != "constant" else (n,)
            for nu in nus:
                p = law.density(n, nu).param
                if not (self.post_bound.post(n, nu) - ORDER_TOL <= p <= self.post_upper + ORDER_TOL):
                    return False
        return True

    def to_dict(self) -> dict:
        d = {
            "family": self.family,
            "pre": self.pre_bound.to_dict(),
            "post": self.post_bound.to_dict(),
        }
        if math.isfinite(self.pre_lower) and not (self.family == "poisson" and self.pre_lower == 0):
            d["pre_lower"] = self.pre_lower
        if math.isfinite(self.post_upper):
            d["post_upper"] = self.post_upper
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "UncertaintyClass":
        """Build a class from a config mapping.

        ``pre``/``post`` are bound specs; an interval ``[lo, hi]`` given with
        kind ``interval`` sets both the LFL bound and the outer limit.
        """
        family = d["family"]
        pre, post = d["pre"], d["post"]
        pre_lower, post_upper = d.get("pre_lower"), d.get("post_upper", math.inf)
        if isinstance(pre, dict) and pre.get("kind") == "interval":
            lo, hi = pre["values"]
            pre_lower, pre = lo, {"kind": "constant", "values": hi}
        if isinstance(post, dict) and post.get("kind") == "interval":
            lo, hi = post["values"]
            post_upper, post = hi, {"kind": "constant", "values": lo}
        return cls(
            family,
            Bound.from_dict(pre),
            Bound.from_dict(post),
            pre_lower=pre_lower,
            post_upper=float(post_upper),
        )


def interval_class(family: Family, pre: tuple[float, float], post: tuple[float, float]) -> UncertaintyClass:
    """Class with constant intervals, e.g. theta in [0, 1], mu in [2, 3]."""
    return UncertaintyClass(
        family,
        Bound("constant", (pre[1],)),
        Bound("constant", (post[0],)),
        pre_lower=pre[0],
        post_upper=post[1],
    )


def derive_lfl(cls: UncertaintyClass) -> LflPair:
    """Least favorable laws of an interval class.

    The pre-change LFL sits at the upper pre-change bound and the
    post-change LFL at the lower post-change bound, for both families.
    """
    fam = cls.family
    pb, qb = cls.pre_bound, cls.post_bound

    def dens(p):
        return Density(fam, p)

    if pb.kind == "constant":
        pre = PreChangeLaw.constant(dens(pb.values[0]))
    elif pb.kind == "periodic":
        pre = PreChangeLaw.periodic([dens(v) for v in pb.values])
    elif pb.kind == "table":
        pre = PreChangeLaw.tabulated([dens(v) for v in pb.values])
    else:
        pre = PreChangeLaw.explicit(lambda n: dens(pb.pre(n)), fam)

    if qb.kind == "constant":
        post = PostChangeLaw.constant(dens(qb.values[0]))
    elif qb.kind == "periodic":
        post = PostChangeLaw.periodic([dens(v) for v in qb.values])
    elif qb.kind == "change_aligned":
        post = PostChangeLaw.change_aligned([dens(v) for v in qb.values])
    else:
        post = PostChangeLaw.nu_indexed(lambda n, nu: dens(qb.post(n, nu)), fam)

    lfl = LflPair(pre, post)
    for n, nu in cls.validation_points():
        g, f = post.density(n, nu), pre.density(n)
        if not check_mlr_order(g, f, standard_grid(g, f)):
            raise AssertionError(f"derived LFL not MLR-ordered at (n={n}, nu={nu})")
    return lfl


# ---------------------------------------------------------------------------
# information numbers


@dataclass(frozen=True)
class InformationNumber:
    value: float
    regime: Literal["iid", "ipid", "mlr_exploding"]
    period: int | None = None
    depth: int | None = None
    partial_averages: tuple = ()
    converged: bool = True


def information_number(lfl: LflPair, regime: str, depth: int = 10_000) -> InformationNumber:
    """KL rate I governing the asymptotic delay |log alpha| / I."""
    if regime == "iid":
        if not lfl.is_constant:
            raise ValueError("iid regime needs constant pre and post LFLs")
        return InformationNumber(kl_divergence(lfl.post.densities[0], lfl.pre.densities[0]), "iid")

    if regime == "ipid":
        pre, post = lfl.pre, lfl.post
        if pre.kind not in ("constant", "periodic") or post.kind not in ("constant", "periodic"):
            raise ValueError("ipid regime needs constant or periodic LFLs")
        periods = {p for p in (pre.period, post.period) if p is not None}
        if len(periods) > 1:
            raise ValueError(f"pre and post periods differ: {sorted(periods)}")
        T = periods.pop() if periods else 1
        kls = [kl_divergence(post.density(n, n), pre.density(n)) for n in range(1, T + 1)]
        return InformationNumber(math.fsum(kls) / T, "ipid", period=T)

    if regime == "mlr_exploding":
        if lfl.pre.kind != "constant" or lfl.post.kind != "change_aligned":
            raise ValueError("mlr_exploding regime needs constant pre and change-aligned post LFLs")
        f = lfl.pre.densities[0]
        hs = lfl.post.densities
        for a, b in zip(hs, hs[1:]):
            if not check_mlr_order(b, a, standard_grid(a, b)):
                raise ValueError("change-aligned post LFL is not increasing in MLR order")
        kls = np.array([kl_divergence(h, f) for h in hs])
        lags = np.minimum(np.arange(depth), len(hs) - 1)
        partial = np.cumsum(kls[lags]) / np.arange(1, depth + 1)
        tail = max(depth // 10, 1)
        ref = partial[-tail - 1] if depth > tail else partial[0]
        rel = abs(partial[-1] - ref) / abs(partial[-1])
        converged = bool(rel <= 1e-3)
        if not converged:
            warnings.warn(
                f"information number partial averages still moving (relative change {rel:.2e})",
                RuntimeWarning,
                stacklevel=2,
            )
        return InformationNumber(
            float(partial[-1]),
            "mlr_exploding",
            depth=depth,
            partial_averages=tuple(partial.tolist()),
            converged=converged,
        )

    raise ValueError(f"unknown regime {regime!r}")

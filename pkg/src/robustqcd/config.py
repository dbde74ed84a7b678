"""YAML run configuration.

One file drives a run.  The first key is ``schema: robustqcd/v1``; the
other top-level sections are all optional::

    schema: robustqcd/v1
    seed: 20240601
    out: results/gauss
    class:                       # uncertainty class -> derived LFL pair
      family: gaussian
      pre:  {kind: interval, values: [0, 1]}
      post: {kind: interval, values: [2, 3]}
    lfl:                         # explicit LFL pair (overrides the class)
      pre:  {kind: constant, family: gaussian, params: 1.0}
      post: {kind: constant, family: gaussian, params: 2.0}
    scenario:                    # datagen.ScenarioSpec fields, or a bundle
      kind: lfl
      family: gaussian
      pre: 1.0
      post: 2.0
      nu: 23
      horizon: 100
    multistream: {M: 3, K: 2, affected: [0, 1]}
    detector: {threshold: 5.0}   # or {alpha: 0.01}; also window, delta, extra_obs
    montecarlo: {trials: 2000, horizon: 100000, target_arl: 150}
    data: {bundled: covid_county, column: allegheny}

Command-line flags override single keys through :func:`apply_overrides`.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from .datagen import MultiScenarioSpec, ScenarioSpec
from .detector import DEFAULT_WINDOW, PRUNE_DELTA, ThresholdSchedule
from .laws import Density, LflPair, UncertaintyClass, derive_lfl
from .montecarlo import DetectorSpec, McConfig
from .multistream import StreamSet, enumerate_subsets

SCHEMA = "robustqcd/v1"
DEFAULT_SEED = 20240601
SECTIONS = ("schema", "seed", "out", "class", "lfl", "scenario", "multistream", "detector", "montecarlo", "data", "verify", "preview")


class ConfigError(ValueError):
    pass


def _check_schema(d: dict, source) -> dict:
    if not isinstance(d, dict):
        raise ConfigError(f"{source}: top level must be a mapping")
    if d.get("schema") != SCHEMA:
        raise ConfigError(f"{source}: expected 'schema: {SCHEMA}', got {d.get('schema')!r}")
    unknown = sorted(set(d) - set(SECTIONS))
    if unknown:
        raise ConfigError(f"{source}: unknown section(s) {', '.join(unknown)}")
    return d


def load_config(path) -> dict:
    path = Path(path)
    try:
        d = yaml.safe_load(path.read_text())
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    except yaml.YAMLError as e:
        raise ConfigError(f"{path}: invalid YAML: {e}") from e
    d = _check_schema(d, path)
    d.setdefault("seed", DEFAULT_SEED)
    # relative data paths resolve against the config file
    data = d.get("data")
    if isinstance(data, dict) and "path" in data and not Path(data["path"]).is_absolute():
        data["path"] = str((path.parent / data["path"]).resolve())
    return d


def parse_config(text: str) -> dict:
    d = _check_schema(yaml.safe_load(text), "<string>")
    d.setdefault("seed", DEFAULT_SEED)
    return d


def dump_config(d: dict) -> str:
    return yaml.safe_dump(_plain(d), sort_keys=False)


def _plain(v):
    if isinstance(v, dict):
        return {k: _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if isinstance(v, np.generic):
        return v.item()
    return v


@dataclass(frozen=True)
class Overrides:
    seed: int | None = None
    alpha: float | None = None
    threshold: float | None = None
    horizon: int | None = None
    extra_obs: int | None = None
    out: str | None = None

    def __post_init__(self):
        if self.alpha is not None and not 0 < self.alpha < 1:
            raise ConfigError(f"alpha must be in (0, 1), got {self.alpha}")
        if self.alpha is not None and self.threshold is not None:
            raise ConfigError("give either --alpha or --threshold, not both")
        if self.threshold is not None and not self.threshold > 0:
            raise ConfigError("threshold must be > 0")
        if self.horizon is not None and self.horizon < 1:
            raise ConfigError("horizon must be >= 1")
        if self.extra_obs is not None and self.extra_obs < 0:
            raise ConfigError("extra observations must be >= 0")


def apply_overrides(cfg: dict, ov: Overrides) -> dict:
    """Copy of ``cfg`` with command-line overrides written into their sections."""
    d = copy.deepcopy(cfg)
    if ov.seed is not None:
        d["seed"] = ov.seed
        for sec in ("scenario", "montecarlo", "multistream"):
            if isinstance(d.get(sec), dict):
                d[sec].pop("seed", None)
    if ov.threshold is not None or ov.alpha is not None:
        det = d.setdefault("detector", {})
        det.pop("threshold", None)
        det.pop("alpha", None)
        if ov.threshold is not None:
            det["threshold"] = ov.threshold
        else:
            det["alpha"] = ov.alpha
    if ov.horizon is not None:
        for sec in ("scenario", "montecarlo"):
            if isinstance(d.get(sec), dict):
                d[sec]["horizon"] = ov.horizon
        d.setdefault("detector", {})["horizon"] = ov.horizon
    if ov.extra_obs is not None:
        d.setdefault("detector", {})["extra_obs"] = ov.extra_obs
    if ov.out is not None:
        d["out"] = ov.out
    return d


def _section(cfg: dict, name: str, required: bool = True) -> dict | None:
    sec = cfg.get(name)
    if sec is None:
        if required:
            raise ConfigError(f"config has no '{name}' section")
        return None
    if not isinstance(sec, dict):
        raise ConfigError(f"section '{name}' must be a mapping")
    return sec


def _wrap(name: str, fn, *args):
    try:
        return fn(*args)
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as e:
        msg = f"missing key {e}" if isinstance(e, KeyError) else str(e)
        raise ConfigError(f"section '{name}': {msg}") from e


def get_class(cfg: dict) -> UncertaintyClass:
    return _wrap("class", UncertaintyClass.from_dict, _section(cfg, "class"))


def get_lfl(cfg: dict) -> LflPair:
    """Explicit ``lfl`` section if present, else the LFL derived from ``class``."""
    if cfg.get("lfl") is not None:
        return _wrap("lfl", LflPair.from_dict, _section(cfg, "lfl"))
    if cfg.get("class") is None:
        raise ConfigError("config needs a 'class' or an 'lfl' section")
    return _wrap("class", derive_lfl, get_class(cfg))


def get_streamset(cfg: dict) -> StreamSet | None:
    ms = _section(cfg, "multistream", required=False)
    if ms is None:
        return None

    def build():
        M = int(ms["M"])
        if "subsets" in ms:
            return StreamSet.explicit(M, [tuple(s) for s in ms["subsets"]])
        return enumerate_subsets(M, int(ms.get("K", M)))

    return _wrap("multistream", build)


def get_threshold(cfg: dict, n_hypotheses: int = 1) -> ThresholdSchedule:
    """Constant threshold, tabulated list, or log(n_hypotheses / alpha)."""
    det = cfg.get("detector") or {}
    if "threshold" in det and "alpha" in det:
        raise ConfigError("section 'detector': give threshold or alpha, not both")
    if "threshold" in det:
        a = det["threshold"]
        if isinstance(a, (list, tuple)):
            return _wrap("detector", ThresholdSchedule.tabulated, a)
        return _wrap("detector", ThresholdSchedule.constant, float(a))
    if "alpha" in det:
        return _wrap("detector", ThresholdSchedule.from_alpha, float(det["alpha"]), n_hypotheses)
    raise ConfigError("section 'detector' needs 'threshold' or 'alpha'")


def get_detector(cfg: dict, lfl: LflPair | None = None) -> DetectorSpec:
    lfl = lfl or get_lfl(cfg)
    ss = get_streamset(cfg)
    det = cfg.get("detector") or {}
    thr = get_threshold(cfg, 1 if ss is None else len(ss))
    window = det.get("window", DEFAULT_WINDOW)
    delta = float(det.get("delta", PRUNE_DELTA))
    return _wrap("detector", DetectorSpec, lfl, thr, ss, window, delta)


def detector_horizon(cfg: dict) -> int | None:
    h = (cfg.get("detector") or {}).get("horizon")
    return None if h is None else int(h)


def extra_obs(cfg: dict) -> int:
    return int((cfg.get("detector") or {}).get("extra_obs", 10))


MC_FIELDS = ("trials", "horizon", "seed", "confidence", "workers", "chunk")


def get_mc(cfg: dict) -> McConfig:
    mc = cfg.get("montecarlo") or {}
    kw = {k: mc[k] for k in MC_FIELDS if k in mc}
    kw.setdefault("seed", cfg.get("seed", DEFAULT_SEED))
    return _wrap("montecarlo", lambda: McConfig(**kw))


def get_scenario(cfg: dict) -> ScenarioSpec:
    sc = dict(_section(cfg, "scenario"))
    sc.setdefault("seed", cfg.get("seed", DEFAULT_SEED))
    sc.pop("bundle", None)
    return _wrap("scenario", ScenarioSpec.from_dict, sc)


def get_multi_scenario(cfg: dict) -> MultiScenarioSpec:
    ms = _section(cfg, "multistream")
    base = get_scenario(cfg)

    def build():
        un = ms.get("unaffected", {"family": base.family, "param": base.pre if base.kind == "lfl" else None})
        if un.get("param") is None:
            raise ConfigError("section 'multistream': 'unaffected' density needed for this scenario kind")
        return MultiScenarioSpec(
            int(ms["M"]),
            tuple(ms.get("affected", ())),
            base,
            Density(un["family"], float(un["param"])),
            base.nu,
            base.horizon,
            int(ms.get("seed", base.seed)),
        )

    return _wrap("multistream", build)


def nu_value(v) -> int | None:
    if v is None or (isinstance(v, str) and v.lower() in ("inf", "none", "never")):
        return None
    if isinstance(v, float) and math.isinf(v):
        return None
    return int(v)

"""Command-line front end.

    robustqcd <subcommand> --config run.yaml [--seed S] [--alpha a | --threshold A]
                           [--horizon T] [--extra-obs m] [--out DIR]

Exit codes: 0 clean run (with or without a detection), 1 input or config
error, 2 internal invariant violation or failed verification.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from . import config as C
from .datagen import add_noise, gen_multi, gen_single, nu_label, single_stream_bundle
from .detector import run_detector
from .ingest import SeriesTable, TableError, read_table, write_report, write_table
from .laws import (
    Density,
    LflPair,
    PostChangeLaw,
    PreChangeLaw,
    SeparationError,
    SupportError,
    UncertaintyClass,
    law_from_dict,
    standard_grid,
)
from .montecarlo import (
    DetectorSpec,
    calibrate_threshold,
    dominance_test_delay,
    dominance_test_false_alarm,
)
from .multistream import identify, run_multistream_detector
from .standins import BUNDLED, load_bundled

log = logging.getLogger("robustqcd")

COMMANDS = ("derive-lfl", "simulate", "detect", "detect-multi", "calibrate", "identify", "verify")
DEFAULT_OUT = "robustqcd_out"
EXIT_OK, EXIT_INPUT, EXIT_INVARIANT = 0, 1, 2


class VerificationFailed(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    subcommand: str
    config_path: Path
    overrides: C.Overrides

    def __post_init__(self):
        if self.subcommand not in COMMANDS:
            raise C.ConfigError(f"unknown subcommand {self.subcommand!r}")

    def load(self) -> dict:
        return C.apply_overrides(C.load_config(self.config_path), self.overrides)


def out_dir(cfg: dict) -> Path:
    p = Path(cfg.get("out") or DEFAULT_OUT)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _echo(cfg: dict) -> dict:
    return {k: v for k, v in cfg.items() if k not in ("schema", "seed", "out")}


# ---------------------------------------------------------------------------
# data


def load_data(cfg: dict) -> SeriesTable:
    """Observation table from ``data`` (file or bundled stand-in) or ``scenario``.

    ``data`` keys: ``path`` or ``bundled``; optional ``columns`` (names),
    ``missing`` (reject|zero), ``transform: flight``, ``affected`` (column
    indices that keep their signal; the rest are zeroed) and ``noise``
    ({family, param, seed}) added to every cell.
    """
    data = cfg.get("data")
    if data is None:
        if cfg.get("scenario") is None:
            raise C.ConfigError("config needs a 'data' or a 'scenario' section")
        if cfg.get("multistream") is not None:
            X = gen_multi(C.get_multi_scenario(cfg))
            return SeriesTable([f"s{t}" for t in range(X.shape[1])], X, "scenario")
        x = gen_single(C.get_scenario(cfg))
        return SeriesTable(["x"], x[:, None], "scenario")
    if "path" in data:
        table = read_table(data["path"], missing=data.get("missing", "reject"))
    elif "bundled" in data:
        if data["bundled"] not in BUNDLED:
            raise C.ConfigError(f"unknown bundled data {data['bundled']!r}; choose from {sorted(BUNDLED)}")
        table = load_bundled(data["bundled"])
    else:
        raise C.ConfigError("section 'data' needs 'path' or 'bundled'")
    cols = data.get("columns", data.get("column"))
    if cols is not None:
        cols = [cols] if isinstance(cols, (str, int)) else list(cols)
        idx = []
        for c in cols:
            if isinstance(c, int):
                idx.append(c)
            elif c in table.names:
                idx.append(table.names.index(c))
            else:
                raise C.ConfigError(f"column {c!r} not in table ({', '.join(table.names)})")
        table = SeriesTable([table.names[j] for j in idx], table.rows[:, idx], table.source, table.transforms)
    if data.get("transform") == "flight":
        table = table.apply_flight_transform(int(data.get("pad", 10)))
    elif data.get("transform") not in (None, "none"):
        raise C.ConfigError(f"unknown transform {data['transform']!r}")
    rows = table.rows.copy()
    if "affected" in data:
        keep = np.zeros(rows.shape[1], dtype=bool)
        keep[list(data["affected"])] = True
        rows[:, ~keep] = 0.0
    if "noise" in data:
        nz = data["noise"]
        rows = add_noise(rows, Density(nz["family"], float(nz["param"])), int(nz.get("seed", cfg["seed"])))
    return SeriesTable(table.names, rows, table.source, table.transforms)


# ---------------------------------------------------------------------------
# subcommands


def cmd_derive_lfl(cfg: dict) -> int:
    cls = C.get_class(cfg)
    lfl = C.get_lfl({k: v for k, v in cfg.items() if k != "lfl"})
    print(f"family: {cls.family}")
    print(f"lfl: {lfl}")
    top = int(cfg.get("preview", 5))
    print("n nu pre_param post_param")
    for n in range(1, top + 1):
        nus = range(1, n + 1) if lfl.post.depends_on_nu else (1,)
        for nu in nus:
            print(f"{n} {nu} {lfl.pre.density(n).param:.17g} {lfl.post.density(n, nu).param:.17g}")
    path = out_dir(cfg) / "lfl.yaml"
    path.write_text(C.dump_config({"schema": C.SCHEMA, "class": cls.to_dict(), "lfl": lfl.to_dict()}))
    print(f"written: {path}")
    return EXIT_OK


def _sim_header(spec: dict, seed) -> list[str]:
    return [f"robustqcd simulate, seed {seed}"] + [ln for ln in yaml.safe_dump(spec, sort_keys=True).splitlines()]


def cmd_simulate(cfg: dict) -> int:
    sc = C._section(cfg, "scenario")
    out = out_dir(cfg)
    if "bundle" in sc:
        horizon = int(sc.get("horizon", 100))
        seed = int(sc.get("seed", cfg["seed"]))
        nu = C.nu_value(sc.get("nu"))
        specs = single_stream_bundle(sc["bundle"], nu or 1, horizon, seed)
        for name, spec in specs.items():
            if nu is None:
                spec = type(spec).from_dict({**spec.to_dict(), "nu": None})
            path = out / f"sim_{name}_nu{nu_label(nu)}.csv"
            write_table(gen_single(spec), path, ["x"], _sim_header(spec.to_dict(), spec.seed))
            print(f"written: {path}")
        return EXIT_OK
    if cfg.get("multistream") is not None:
        ms = C.get_multi_scenario(cfg)
        X = gen_multi(ms)
        head = {"scenario": ms.scenario.to_dict(), "M": ms.M, "affected": list(ms.affected), "nu": ms.nu}
        path = out / f"sim_multi_nu{nu_label(ms.nu)}.csv"
        write_table(X, path, [f"s{t}" for t in range(ms.M)], _sim_header(head, ms.seed))
    else:
        spec = C.get_scenario(cfg)
        path = out / f"sim_{spec.kind}_nu{nu_label(spec.nu)}.csv"
        write_table(gen_single(spec), path, ["x"], _sim_header(spec.to_dict(), spec.seed))
    print(f"written: {path}")
    return EXIT_OK


def _print_event(ev, prefix=""):
    if ev.stopped:
        print(f"{prefix}detected at n={ev.stop_time} statistic={ev.statistic_at_stop:.6g} threshold={ev.thresholds[-1]:.6g}")
    else:
        print(f"{prefix}no detection within {len(ev.trace)} steps")


def cmd_detect(cfg: dict) -> int:
    table = load_data(cfg)
    if table.shape[1] != 1:
        raise C.ConfigError(f"detect takes one stream, data has {table.shape[1]} (select with data.column)")
    spec = C.get_detector({k: v for k, v in cfg.items() if k != "multistream"})
    ev = run_detector(list(table.rows[:, 0]), spec.make_state(), C.detector_horizon(cfg))
    path = write_report(ev, out_dir(cfg) / "detect.report", config=_echo(cfg), seed=cfg["seed"])
    _print_event(ev)
    print(f"written: {path}")
    return EXIT_OK


def _multi(cfg: dict, tau: int | None = None):
    table = load_data(cfg)
    spec = C.get_detector(cfg)
    if spec.streamset is None:
        raise C.ConfigError("multi-stream commands need a 'multistream' section")
    if spec.streamset.M != table.shape[1]:
        raise C.ConfigError(f"multistream.M={spec.streamset.M} but data has {table.shape[1]} streams")
    ev = None
    if tau is None:
        ev = run_multistream_detector(table.rows, spec.make_state(), C.detector_horizon(cfg))
        tau = ev.stop_time
    ident = None if tau is None else identify(table.rows, tau, spec.streamset, list(spec.lfls), C.extra_obs(cfg))
    return table, spec, ev, ident


def cmd_detect_multi(cfg: dict) -> int:
    table, spec, ev, ident = _multi(cfg)
    path = write_report(ev, out_dir(cfg) / "detect_multi.report", ident, _echo(cfg), cfg["seed"], table.names)
    _print_event(ev)
    if ident is not None:
        print(f"identified: {[table.names[t] for t in ident.subset]} change_point={ident.change_point}")
    print(f"written: {path}")
    return EXIT_OK


def cmd_identify(cfg: dict) -> int:
    """Identify the affected subset at ``detector.tau``, or at the detector's own stop time."""
    tau = (cfg.get("detector") or {}).get("tau")
    table, spec, ev, ident = _multi(cfg, None if tau is None else int(tau))
    out = out_dir(cfg) / "identify.report"
    if ev is not None:
        write_report(ev, out, ident, _echo(cfg), cfg["seed"], table.names)
        _print_event(ev)
    else:
        lines = [f"stop_time: {tau}", "source: detector.tau"]
        r = ident
        lines += [
            f"identified_subset: [{', '.join(table.names[t] for t in r.subset)}]",
            f"identified_subset_index: {r.subset_index}",
            f"identified_change_point: {r.change_point}",
            f"identification_value: {r.value:.17g}",
            f"identification_rows_used: {r.n_used}",
            f"identification_extra_obs: {r.extra_used}",
            f"seed: {cfg['seed']}",
        ]
        out.write_text("\n".join(lines) + "\n")
    if ident is None:
        print("no detection, nothing to identify")
    else:
        print(f"identified: {[table.names[t] for t in ident.subset]} change_point={ident.change_point}")
    print(f"written: {out}")
    return EXIT_OK


def _target_arl(cfg: dict) -> float:
    mc = cfg.get("montecarlo") or {}
    det = cfg.get("detector") or {}
    if "target_arl" in mc:
        return float(mc["target_arl"])
    if "alpha" in det:
        return 1.0 / float(det["alpha"])
    raise C.ConfigError("calibrate needs montecarlo.target_arl or detector.alpha")


def cmd_calibrate(cfg: dict) -> int:
    target = _target_arl(cfg)
    lfl = C.get_lfl(cfg)
    d = dict(cfg)
    d["detector"] = {k: v for k, v in (cfg.get("detector") or {}).items() if k not in ("threshold", "alpha")}
    d["detector"]["threshold"] = 1.0  # placeholder, replaced during the search
    spec = C.get_detector(d, lfl)
    mc = C.get_mc(cfg)
    cal = calibrate_threshold(spec, lfl.pre, target, mc, rel_tol=float((cfg.get("montecarlo") or {}).get("rel_tol", 0.1)))
    lines = [
        f"target_arl: {target:.17g}",
        f"threshold: {cal.threshold:.17g}",
        f"iterations: {cal.iterations}",
        f"estimate: {cal.estimate.to_record()}",
    ]
    lines += [f"search.{i}: threshold={a:.17g} arl={m:.17g}" for i, (a, m) in enumerate(cal.history)]
    lines += [f"config.{k}: {v}" for k, v in C._plain(_echo(cfg)).items()]
    path = out_dir(cfg) / "calibrate.report"
    path.write_text("\n".join(lines) + "\n")
    print(f"threshold A = {cal.threshold:.6g} (log target = {math.log(target):.6g})")
    print(cal.estimate.to_record())
    print(f"written: {path}")
    return EXIT_OK


# --- verify


def _order_margins(g: Density, f: Density) -> tuple[float, float]:
    """(min step of log g/f, min of P_g(X>=t) - P_f(X>=t)) over the standard grid."""
    grid = standard_grid(g, f)
    lr = np.asarray(g.logpdf(grid)) - np.asarray(f.logpdf(grid))
    sd = np.asarray(g.survival(grid)) - np.asarray(f.survival(grid))
    return float(np.min(np.diff(lr))), float(np.min(sd))


def _shift_law(law, fn, post: bool):
    ds = tuple(Density(d.family, fn(d.param)) for d in law.densities)
    return (PostChangeLaw if post else PreChangeLaw)(law.kind, ds)


def _default_members(cls: UncertaintyClass, lfl: LflPair):
    """Pre member halfway to the lower limit; post member at the upper limit (or beyond the bound)."""
    if cls.family == "gaussian":
        lo = cls.pre_lower if math.isfinite(cls.pre_lower) else None
        pre_fn = (lambda p: 0.5 * (lo + p)) if lo is not None else (lambda p: p - 0.5)
        hi = cls.post_upper if math.isfinite(cls.post_upper) else None
        post_fn = (lambda p: hi) if hi is not None else (lambda p: p + 1.0)
    else:
        lo = cls.pre_lower if cls.pre_lower > 0 else None
        pre_fn = (lambda p: 0.5 * (lo + p)) if lo is not None else (lambda p: 0.5 * p)
        hi = cls.post_upper if math.isfinite(cls.post_upper) else None
        post_fn = (lambda p: hi) if hi is not None else (lambda p: 2.0 * p)
    return _shift_law(lfl.pre, pre_fn, False), _shift_law(lfl.post, post_fn, True)


def _member(spec, family, post: bool):
    if isinstance(spec, (int, float)):
        spec = {"kind": "constant", "params": spec}
    return law_from_dict({"family": family, **spec}, post)


def cmd_verify(cfg: dict) -> int:
    cls = C.get_class(cfg)
    lfl = C.get_lfl({k: v for k, v in cfg.items() if k != "lfl"})
    ver = cfg.get("verify") or {}
    rows = []

    def record(name, ok, margin):
        rows.append((name, ok, margin))
        print(f"{'PASS' if ok else 'FAIL'} {name} worst_margin={margin:.6g}")

    pre_m, post_m = _default_members(cls, lfl)
    if "pre_member" in ver:
        pre_m = _member(ver["pre_member"], cls.family, False)
    if "post_member" in ver:
        post_m = _member(ver["post_member"], cls.family, True)
    if not cls.contains_pre(pre_m):
        raise C.ConfigError("verify.pre_member is outside the uncertainty class")
    if not cls.contains_post(post_m):
        raise C.ConfigError("verify.post_member is outside the uncertainty class")

    worst_mlr, worst_sd = math.inf, math.inf
    worst_pre, worst_post = math.inf, math.inf
    for n, nu in cls.validation_points():
        g, f = lfl.post.density(n, nu), lfl.pre.density(n)
        a, b = _order_margins(g, f)
        worst_mlr, worst_sd = min(worst_mlr, a), min(worst_sd, b)
        worst_pre = min(worst_pre, _order_margins(f, pre_m.density(n))[1])
        worst_post = min(worst_post, _order_margins(post_m.density(n, nu), g)[1])
    tol = -1e-12
    record("mlr_order post_lfl/pre_lfl", worst_mlr >= tol, worst_mlr)
    record("stochastic_dominance post_lfl over pre_lfl", worst_sd >= tol, worst_sd)
    record("stochastic_dominance pre_lfl over pre_member", worst_pre >= tol, worst_pre)
    record("stochastic_dominance post_member over post_lfl", worst_post >= tol, worst_post)

    if ver.get("montecarlo", True):
        mc = C.get_mc(cfg)
        det = dict(cfg.get("detector") or {"threshold": math.log(150)})
        spec = C.get_detector({**cfg, "detector": det, "multistream": None}, lfl)
        ns = [int(n) for n in ver.get("n_grid", [10, 25, 50, 100, 200, 300, 400, 500])]
        nu = int(ver.get("nu", 10))
        fa = dominance_test_false_alarm(spec, lfl.pre, pre_m, ns, mc, cls)
        dl = dominance_test_delay(spec, lfl.pre, lfl.post, post_m, nu, ns, mc, uclass=cls)
        for rep, name in ((fa, "false_alarm_dominance"), (dl, "delay_dominance")):
            record(f"{name} trials={rep.trials}", rep.passed, rep.max_violation)
            path = out_dir(cfg) / f"verify_{name}.txt"
            path.write_text("\n".join(rep.lines()) + "\n")
    failed = [r for r in rows if not r[1]]
    print(f"verify: {len(rows) - len(failed)}/{len(rows)} passed")
    if failed:
        raise VerificationFailed(", ".join(r[0] for r in failed))
    return EXIT_OK


HANDLERS = {
    "derive-lfl": cmd_derive_lfl,
    "simulate": cmd_simulate,
    "detect": cmd_detect,
    "detect-multi": cmd_detect_multi,
    "calibrate": cmd_calibrate,
    "identify": cmd_identify,
    "verify": cmd_verify,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="robustqcd", description="Robust quickest change detection runs.")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", required=True, type=Path)
        s.add_argument("--seed", type=int)
        s.add_argument("--alpha", type=float)
        s.add_argument("--threshold", type=float)
        s.add_argument("--horizon", type=int)
        s.add_argument("--extra-obs", type=int, dest="extra_obs")
        s.add_argument("--out")
        s.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        ov = C.Overrides(args.seed, args.alpha, args.threshold, args.horizon, args.extra_obs, args.out)
        run = RunConfig(args.command, args.config, ov)
        cfg = run.load()
        return HANDLERS[run.subcommand](cfg)
    except (C.ConfigError, TableError, SeparationError, SupportError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except VerificationFailed as e:
        print(f"verification failed: {e}", file=sys.stderr)
        return EXIT_INVARIANT
    except AssertionError as e:
        print(f"invariant violation: {e}", file=sys.stderr)
        return EXIT_INVARIANT
    except (ValueError, RuntimeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())

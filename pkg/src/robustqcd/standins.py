"""Synthetic stand-ins shaped like the COVID case-count and flight-distance data.

The real datasets are third-party; these generators produce series with
the same layout and qualitative features (onsets, plateaus, approach
trajectories) from fixed seeds.  ``scripts/make_standins.py`` writes them
to ``robustqcd/data``.
"""

from __future__ import annotations

from importlib import resources

import numpy as np

from .ingest import SeriesTable, read_table

COVID_COUNTY_SEED = 2020_0122
COVID_STATE_SEED = 2020_0314
FLIGHT_SEED = 2021_0035

# embedded first-wave onsets (1-based day index) of the county stand-in
COUNTY_ONSETS = {"allegheny": 50, "st_louis": 48}
COUNTY_SECOND_WAVE = {"allegheny": 150, "st_louis": 140}
STATE_EARLIEST = 7


def _wave(days: np.ndarray, onset: int, growth: float, plateau: float) -> np.ndarray:
    """Rate 0 before onset, then 2 * growth^(t - onset) capped at ``plateau``."""
    r = np.where(days >= onset, 2.0 * growth ** np.clip(days - onset, 0, None), 0.0)
    return np.minimum(r, plateau)


def covid_county_rates(days: int = 200) -> dict[str, np.ndarray]:
    t = np.arange(1, days + 1)
    out = {}
    shapes = {
        "allegheny": dict(g1=1.22, p1=45.0, g2=1.3, p2=220.0, decay=0.997),
        "st_louis": dict(g1=1.25, p1=95.0, g2=1.35, p2=330.0, decay=0.998),
    }
    for name, s in shapes.items():
        first = _wave(t, COUNTY_ONSETS[name], s["g1"], s["p1"])
        # first wave eases slowly after day 80
        first = first * np.where(t > 80, s["decay"] ** (t - 80), 1.0)
        second = _wave(t, COUNTY_SECOND_WAVE[name], s["g2"], s["p2"])
        out[name] = first + second
    return out


def covid_county_table(days: int = 200, seed: int = COVID_COUNTY_SEED) -> SeriesTable:
    rng = np.random.default_rng(seed)
    rates = covid_county_rates(days)
    cols = {k: rng.poisson(v).astype(float) for k, v in rates.items()}
    return SeriesTable(list(cols), np.column_stack(list(cols.values())), "standin:covid_county")


def covid_state_onsets(counties: int = 67, seed: int = COVID_STATE_SEED) -> np.ndarray:
    """Onset day per county; county STATE_EARLIEST starts first (day 40)."""
    rng = np.random.default_rng(seed + 1)
    onsets = rng.integers(52, 110, counties)
    onsets[STATE_EARLIEST] = 40
    return onsets


def covid_state_table(counties: int = 67, days: int = 150, seed: int = COVID_STATE_SEED) -> SeriesTable:
    rng = np.random.default_rng(seed)
    onsets = covid_state_onsets(counties, seed)
    t = np.arange(1, days + 1)
    plateaus = rng.uniform(5, 60, counties)
    # the largest county is not the earliest one
    plateaus[(STATE_EARLIEST + 3) % counties] = 400.0
    growth = rng.uniform(1.05, 1.15, counties)
    cols = [rng.poisson(_wave(t, o, g, p)).astype(float) for o, g, p in zip(onsets, growth, plateaus)]
    names = [f"county_{j:02d}" for j in range(counties)]
    return SeriesTable(names, np.column_stack(cols), "standin:covid_state")


def flight_distance_table(flights: int = 35, seconds: int = 100, seed: int = FLIGHT_SEED) -> SeriesTable:
    """Distances (km) over the last ``seconds`` of straight-in approaches."""
    rng = np.random.default_rng(seed)
    t = np.arange(seconds)
    start = rng.uniform(6.0, 11.0, flights)
    end = rng.uniform(0.4, 1.2, flights)
    cols = []
    for d0, d1 in zip(start, end):
        frac = t / (seconds - 1)
        # slight deceleration on final approach
        path = d0 + (d1 - d0) * (1 - (1 - frac) ** 1.3)
        jitter = rng.normal(0, 0.02, seconds)
        cols.append(np.maximum(path + jitter, 0.2))
    names = [f"flight_{j:02d}" for j in range(flights)]
    return SeriesTable(names, np.column_stack(cols), "standin:flight")


BUNDLED = {
    "covid_county": "covid_county_standin.csv",
    "covid_state": "covid_state_standin.csv",
    "flight": "flight_distances_standin.csv",
}


def load_bundled(name: str) -> SeriesTable:
    """Read one of the committed stand-in files shipped with the package."""
    fname = BUNDLED[name]
    with resources.as_file(resources.files("robustqcd.data") / fname) as p:
        return read_table(p)

"""Fetch the public datasets behind the bundled stand-ins and convert them to tables.

COVID-19 daily confirmed cases per US county come from the JHU CSSE
repository (time_series_covid19_confirmed_US.csv).  The output tables hold
daily new cases, one column per county, and can be passed to
``scripts/run_covid.py``.

Flight trajectories come from the TrajAir dataset, which has to be
downloaded by hand (see its project page); ``--trajair`` converts a
directory of its per-flight CSV files into a distance-to-airport table
for ``scripts/run_flight.py``.
"""

import argparse
import csv
import io
import urllib.request
from pathlib import Path

import numpy as np

from robustqcd.ingest import write_table

JHU_URL = (
    "https://raw.githubusercontent.com/CSSEGISandData/COVID-19/master/"
    "csse_covid_19_data/csse_covid_19_time_series/time_series_covid19_confirmed_US.csv"
)


def jhu_rows(url: str = JHU_URL) -> list[dict]:
    with urllib.request.urlopen(url, timeout=60) as resp:
        return list(csv.DictReader(io.TextIOWrapper(resp, encoding="utf-8")))


def daily_new(row: dict, start: str, days: int) -> np.ndarray:
    keys = list(row)
    i0 = keys.index(start)
    cum = np.array([float(row[k]) for k in keys[i0 - 1 : i0 + days]])
    return np.clip(np.diff(cum), 0, None)


def covid_tables(out: Path, start: str, days: int, counties: list[str], state: str):
    rows = jhu_rows()
    by_name = {(r["Admin2"], r["Province_State"]): r for r in rows}
    cols = {}
    for c in counties:
        name, st = c.split(",")
        cols[name.strip().lower().replace(" ", "_")] = daily_new(by_name[(name.strip(), st.strip())], start, days)
    write_table(np.column_stack(list(cols.values())), out / "covid_county.csv", list(cols), comments=[f"source: {JHU_URL}"])
    st_rows = [r for r in rows if r["Province_State"] == state and r["Admin2"] and not r["Admin2"].startswith(("Out of", "Unassigned"))]
    names = [r["Admin2"].lower().replace(" ", "_") for r in st_rows]
    table = np.column_stack([daily_new(r, start, days) for r in st_rows])
    write_table(table, out / "covid_state.csv", names, comments=[f"source: {JHU_URL}", f"state: {state}"])


def trajair_table(src: Path, out: Path, length: int = 100):
    """Distance to the origin (the airport) per flight, truncated or edge-padded to ``length`` rows."""
    cols, names = [], []
    for f in sorted(src.glob("*.csv")):
        xyz = np.loadtxt(f, delimiter=",", skiprows=1, usecols=(2, 3, 4))
        d = np.linalg.norm(xyz, axis=1)[:length]
        cols.append(np.pad(d, (0, length - d.size), mode="edge"))
        names.append(f.stem)
    write_table(np.column_stack(cols), out / "flight.csv", names, comments=[f"source: TrajAir {src}"])


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=Path("data"))
    ap.add_argument("--start", default="1/22/20", help="first date column used")
    ap.add_argument("--days", type=int, default=200)
    ap.add_argument("--county", action="append", default=None, help='"County, State"; repeatable')
    ap.add_argument("--state", default="Pennsylvania")
    ap.add_argument("--trajair", type=Path, help="directory of TrajAir flight CSVs")
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    counties = args.county or ["Allegheny, Pennsylvania", "St. Louis, Missouri"]
    covid_tables(args.out, args.start, args.days, counties, args.state)
    if args.trajair:
        trajair_table(args.trajair, args.out)
    print(f"tables written to {args.out}")


if __name__ == "__main__":
    main()

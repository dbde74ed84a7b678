"""COVID-style pipeline on the bundled stand-ins (or a user table with the same layout).

County: first-wave onset with Pois(1)->Pois(2), then a second-wave detector
whose LFL is estimated from the inter-wave history.  State: earliest-onset
county via the K=1 GLR detector.
"""

import argparse

from robustqcd.experiments import covid_state_onset, covid_waves
from robustqcd.ingest import read_table
from robustqcd.standins import load_bundled


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--county-table", help="CSV with one column per county (default: bundled stand-in)")
    ap.add_argument("--state-table", help="CSV with one column per county of a state (default: bundled stand-in)")
    ap.add_argument("--seed", type=int, default=0, help="seed of the Pois(1) noise")
    args = ap.parse_args()

    county = read_table(args.county_table) if args.county_table else load_bundled("covid_county")
    for name in county.names:
        r = covid_waves(county.column(name), noise_seed=args.seed)
        print(f"{name}: first wave day {r.first_day}; second-wave LFL {r.lfl_second}; second wave day {r.second_day}")

    state = read_table(args.state_table) if args.state_table else load_bundled("covid_state")
    res = covid_state_onset(state, noise_seed=args.seed)
    ident = res.identification
    who = state.names[ident.stream] if ident is not None else None
    print(f"state: {state.shape[1]} counties, A = {res.threshold:.3f}, stop day {res.event.stop_time}, earliest county {who}")


if __name__ == "__main__":
    main()

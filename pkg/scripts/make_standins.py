"""Regenerate the bundled stand-in datasets in src/robustqcd/data/."""

from pathlib import Path

from robustqcd import standins
from robustqcd.ingest import write_table

OUT = Path(__file__).resolve().parents[1] / "src" / "robustqcd" / "data"


def main():
    tables = {
        "covid_county": (standins.covid_county_table(), standins.COVID_COUNTY_SEED),
        "covid_state": (standins.covid_state_table(), standins.COVID_STATE_SEED),
        "flight": (standins.flight_distance_table(), standins.FLIGHT_SEED),
    }
    for name, (table, seed) in tables.items():
        path = write_table(
            table,
            OUT / standins.BUNDLED[name],
            comments=[f"synthetic stand-in: {name}", f"generator: robustqcd.standins seed={seed}"],
        )
        print(f"wrote {path} ({table.shape[0]} rows x {table.shape[1]} columns)")


if __name__ == "__main__":
    main()

#!/usr/bin/env python3
"""Regenerate the synthetic demo respondent table and demo map loadings.

The demo data is NOT World Values Survey microdata. It is a seeded synthetic
sample whose country-level means follow two planted cultural axes
(traditional<->secular t, survival<->self-expression s), so that country
differences, the missingness filter, and the map projection all have something
real to show. Missing answers are encoded both ways the loader accepts:
empty cells and negative codes.

Run from the repository root:  python3 data/demo/generate.py
"""

import csv
import json
import pathlib
import random

HERE = pathlib.Path(__file__).resolve().parent
DATA = HERE.parent

SEED = 20240817
N_PER_COUNTRY = 120

# (t, s) positions per country; loosely inspired by published cultural-map
# placements, values invented for the demo.
COUNTRIES = {
    "Moldova": (0.35, 0.25),
    "Japan": (0.85, 0.55),
    "Iceland": (0.75, 0.90),
    "Sweden": (0.90, 0.95),
    "Ghana": (0.05, 0.20),
    "Jordan": (0.10, 0.15),
}

# Questions with elevated missingness in one country; the first one crosses
# the default 20% filter threshold, the second sits just above it.
MISSING_SPIKES = {
    ("Jordan", "Q187"): 0.30,
    ("Ghana", "Q28"): 0.22,
}

NEGATIVE_CODES = [-1, -2, -4, -5]


def clamp(v, lo, hi):
    return max(lo, min(hi, v))


def main():
    questions = json.loads((DATA / "questions_wvs.json").read_text())["questions"]
    rng = random.Random(SEED)

    # Per-question orientation: how the mean tracks the two axes, plus a base.
    orient = {}
    for q in questions:
        orient[q["id"]] = (
            rng.uniform(0.25, 0.55),   # base position u0 in [0,1]
            rng.uniform(-0.8, 0.8),    # loading on t
            rng.uniform(-0.8, 0.8),    # loading on s
        )

    header = ["respondent_id", "country"] + [q["id"] for q in questions]
    header += ["age", "gender", "education"]

    rows = []
    rid = 0
    for country, (t, s) in COUNTRIES.items():
        for _ in range(N_PER_COUNTRY):
            rid += 1
            row = ["R%05d" % rid, country]
            for q in questions:
                lo, hi = q["scale_min"], q["scale_max"]
                u0, at, as_ = orient[q["id"]]
                miss = MISSING_SPIKES.get((country, q["id"]))
                if miss is None:
                    miss = 0.02 + 0.04 * rng.random()
                if rng.random() < miss:
                    row.append("" if rng.random() < 0.5 else str(rng.choice(NEGATIVE_CODES)))
                    continue
                u = clamp(u0 + at * (t - 0.5) + as_ * (s - 0.5), 0.0, 1.0)
                mu = lo + u * (hi - lo)
                sigma = 0.18 * (hi - lo) + 0.4
                row.append(str(clamp(round(rng.gauss(mu, sigma)), lo, hi)))
            row.append(str(rng.randint(18, 85)))
            row.append(rng.choices(["female", "male", "nonbinary"], [48, 48, 4])[0])
            row.append(rng.choices(["primary", "secondary", "tertiary"],
                                   [30 * (1 - s) + 5, 40, 30 * s + 5])[0])
            rows.append(row)

    with open(HERE / "respondents.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(header)
        w.writerows(rows)

    # Demo projection: per-question loadings scaled from the same orientation,
    # so projected country points roughly recover the planted (t, s) axes.
    loadings = {}
    for q in questions:
        u0, at, as_ = orient[q["id"]]
        span = q["scale_max"] - q["scale_min"]
        loadings[q["id"]] = [round(as_ / (span * 20), 4), round(at / (span * 20), 4)]
    proj = {"offsets": [0.0, 0.0], "loadings": loadings}
    (DATA / "map_loadings_demo.json").write_text(json.dumps(proj, indent=2) + "\n")

    print("wrote", HERE / "respondents.csv", "(%d rows)" % len(rows))
    print("wrote", DATA / "map_loadings_demo.json")


if __name__ == "__main__":
    main()

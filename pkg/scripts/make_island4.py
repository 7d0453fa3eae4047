"""Generate data/island4.json, the bundled 4-unit test island.

All numbers are authored for this repository: a ~24.5 MW-peak island on a
50 MW base with four similar-sized thermal units and up to ~5 MW of wind.
Sizing targets, back-of-envelope (see tests for the numeric checks):

  - initial RoCoF after losing p MW with remaining stored energy E [MW*s]
    is -50*p/(2E) Hz/s; survivor E ranges from ~81 (one unit left) to ~247
    (three of four left), so the -0.8 Hz/s line falls at p = 0.032*E,
    between ~2.6 and ~7.9 MW. That straddles every unit's dispatch range:
    a thinly spread four-unit commitment rides through any single loss,
    a two- or three-unit commitment does not;
  - quasi-steady-state drop is p / (D + sum k*M/50) Hz, putting the
    49.0 Hz line near p ~ 6 MW when one survivor remains and out of reach
    (~14 MW) with three survivors;
  - at peak demand 24.5 MW the reserve-requirement sweep turns infeasible
    between multipliers 1.3 and 1.5 (grid step 0.1), inside the 0..1.5
    grid: headroom caps sum to 4+6+6+8 = 24 MW < 24.5 at 1.5.

Wind scenarios are smooth seeded profiles; scenario s00 is forced to zero
around the evening peak so the uncertainty box reaches w=0 there.

Usage: python scripts/make_island4.py [--seed 7] [--out data/island4.json]
"""

import argparse
import json
import math
import os

import numpy as np

DEMAND = [16.2, 15.6, 15.0, 14.4, 14.0, 14.3, 15.2, 16.8, 18.4, 19.6, 20.5, 21.0,
          21.3, 21.0, 20.6, 20.2, 20.5, 21.4, 22.8, 24.5, 24.0, 22.2, 19.8, 17.6]

GENERATORS = [
    dict(id="u1", p_min=2.2, p_max=10.0, ramp_up=10.0, ramp_down=10.0,
         min_up=4, min_down=4, startup_cost=160.0, cost_quadratic=[40.0, 82.0, 1.2],
         inertia_h=6.4, m_base=15.0, gov_gain=21.0, gov_a1=1.1, gov_a2=0.22,
         gov_b1=0.35, gov_b2=0.0, dp_min=-0.12, dp_max=0.30),
    dict(id="u2", p_min=2.0, p_max=9.0, ramp_up=9.0, ramp_down=9.0,
         min_up=3, min_down=3, startup_cost=120.0, cost_quadratic=[36.0, 88.0, 1.4],
         inertia_h=6.2, m_base=13.0, gov_gain=20.0, gov_a1=1.0, gov_a2=0.20,
         gov_b1=0.30, gov_b2=0.0, dp_min=-0.12, dp_max=0.32),
    dict(id="u3", p_min=1.8, p_max=9.0, ramp_up=8.0, ramp_down=8.0,
         min_up=2, min_down=2, startup_cost=80.0, cost_quadratic=[32.0, 94.0, 1.8],
         inertia_h=5.9, m_base=12.0, gov_gain=19.0, gov_a1=0.9, gov_a2=0.16,
         gov_b1=0.28, gov_b2=0.0, dp_min=-0.15, dp_max=0.35),
    dict(id="u4", p_min=1.4, p_max=8.0, ramp_up=7.0, ramp_down=7.0,
         min_up=1, min_down=1, startup_cost=50.0, cost_quadratic=[28.0, 100.0, 2.0],
         inertia_h=5.6, m_base=10.0, gov_gain=18.0, gov_a1=0.7, gov_a2=0.15,
         gov_b1=0.25, gov_b2=0.02, dp_min=-0.15, dp_max=0.38),
]

WIND_CAP = 5.0


def wind_scenarios(seed: int) -> list[dict]:
    rng = np.random.default_rng(seed)
    hours = np.arange(24)
    out = []
    for s in range(10):
        level = 0.12 + 0.78 * s / 9.0  # spread of scenario means
        phase = rng.uniform(0, 2 * math.pi)
        shape = 0.55 + 0.45 * np.sin(2 * math.pi * hours / 24.0 + phase)
        noise = rng.normal(0.0, 0.08, size=24)
        w = WIND_CAP * level * shape + WIND_CAP * noise
        w = np.clip(w, 0.0, WIND_CAP)
        if s == 0:
            w[18:21] = 0.0  # calm evening: the box touches zero at peak hours
        out.append({"label": f"s{s:02d}", "mw": [round(float(v), 2) for v in w]})
    return out


def document(seed: int) -> dict:
    return {
        "system": {
            "s_base": 50.0,
            "f_nominal": 50.0,
            "load_damping": 1.0,
            "demand": DEMAND,
            "horizon": 24,
        },
        "generators": GENERATORS,
        "wind_scenarios": wind_scenarios(seed),
        "ufls_stages": [
            {"f_threshold": 49.0, "rocof_threshold": -0.8, "shed_fraction": 0.10, "delay": 0.15},
            {"f_threshold": 48.7, "rocof_threshold": -1.2, "shed_fraction": 0.10, "delay": 0.15},
            {"f_threshold": 48.4, "rocof_threshold": -1.6, "shed_fraction": 0.15, "delay": 0.15},
        ],
        # acceptable = stays clear of the first UFLS stage (49.0 Hz / -0.8
        # Hz/s) and well above the collapse floor
        "thresholds": {"nadir_min": 47.5, "rocof_min": -0.8, "qss_min": 49.0},
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--out", default="data/island4.json")
    args = ap.parse_args()
    os.makedirs(os.path.dirname(args.out) or ".", exist_ok=True)
    with open(args.out, "w") as fh:
        json.dump(document(args.seed), fh, indent=2)
        fh.write("\n")
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()

"""Panel ingestion walkthrough: long CSV -> rescaled beliefs -> residuals.

Builds a tiny survey file on the fly, loads it with a schema, maps the raw
responses onto the [-1, 1] agreement scale, removes person and time means,
and computes the felt-dissonance index with its Cronbach alpha.

Run:  python demos/01_panel_pipeline.py
"""

import csv
import json
import os
import tempfile

import numpy as np

import beliefnet as bn

rng = np.random.default_rng(11)

SCHEMA = {
    "tradition": {"role": "moral", "scale": "likert7"},
    "benefit_children": {"role": "moral", "scale": "likert7"},
    "pct_doctors": {"role": "social", "scale": "percent"},
    "pct_family": {"role": "social", "scale": "percent"},
    "at_ease": {"role": "dissonance", "scale": "likert7", "reverse": True},
    "unbothered": {"role": "dissonance", "scale": "likert7", "reverse": True},
    "comfortable": {"role": "dissonance", "scale": "likert7", "reverse": True},
    "group": {"role": "group"},
}
WAVES = ["w1", "w2a", "w2b", "w3"]

workdir = tempfile.mkdtemp(prefix="beliefnet_demo_")
panel_path = os.path.join(workdir, "panel.csv")
schema_path = os.path.join(workdir, "schema.json")

# --- fabricate a little long-format survey --------------------------------
rows = []
for i in range(8):
    person = f"p{i:02d}"
    rows.append([person, "w1", "group", "simple" if i % 2 else "control"])
    lean = rng.integers(2, 6)  # a persistent response level per person
    for wave in WAVES:
        for var, spec in SCHEMA.items():
            if spec["role"] == "moral":
                rows.append([person, wave, var, int(np.clip(lean + rng.integers(-1, 2), 1, 7))])
            elif spec["role"] == "social":
                rows.append([person, wave, var, int(np.clip(lean * 14 + rng.integers(-10, 11), 0, 100))])
    for wave in ("w1", "w2b", "w3"):
        # three parallel items around one latent discomfort level
        latent = rng.integers(2, 7)
        for var in ("at_ease", "unbothered", "comfortable"):
            rows.append([person, wave, var, int(np.clip(latent + rng.integers(-1, 2), 1, 7))])
# person p07 skips wave 3 entirely -> the listwise rule must drop them
rows = [r for r in rows if not (r[0] == "p07" and r[1] == "w3")]

with open(panel_path, "w", newline="") as fh:
    writer = csv.writer(fh)
    writer.writerow(["person_id", "time", "variable", "value"])
    writer.writerows(rows)
with open(schema_path, "w") as fh:
    json.dump(SCHEMA, fh, indent=2)

# --- load, rescale, residualize --------------------------------------------
panel = bn.load_panel(panel_path, schema_path, topic="gm_food")
print(f"loaded {panel.n_persons} persons x {panel.n_times} waves x {panel.n_beliefs} beliefs")
print(f"dropped for missing data: {list(panel.dropped_persons)}")

rescaled = bn.rescale_beliefs(panel)
print("\nrescaled scores live in [-1, 1]:")
print("  min", rescaled.values.min().round(3), " max", rescaled.values.max().round(3))

resid = bn.residualize(rescaled)
print("\nafter removing person and time means the residuals are centred:")
print("  |mean over persons| <=", np.abs(resid.residuals.mean(axis=0)).max().round(12))
print("  |mean over waves|   <=", np.abs(resid.residuals.mean(axis=1)).max().round(12))

# --- felt dissonance ---------------------------------------------------------
print("\nfelt-dissonance index per wave (mean of 3 recoded items):")
for wave, index in bn.panel_dissonance(rescaled).items():
    print(f"  {wave}: mean score {index.score.mean():.2f}, alpha {index.alpha:.3f}")

negative, non_negative = bn.split_by_valence(rescaled, wave="w1")
print(f"\nvalence split at w1: {len(negative)} negative / {len(non_negative)} non-negative")
print(f"\nscratch files in {workdir}")

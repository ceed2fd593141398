#!/usr/bin/env python3
# Copyright 2026 The mlcas Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Writes the small synthetic corpus under data/toy.

Twelve multi-label datasets in three domains, a long-format performance
table for four algorithms over the six registered metrics, a run config
and a run manifest. Output is a pure function of the seed below.
"""

import argparse
import csv
import json
import math
import pathlib
import random

SEED = 20260101
DOMAINS = ["biology", "text", "multimedia"]
ALGORITHMS = ["BR", "CC", "RAkEL", "RFPCT"]
METRICS = {
    "average_precision": True,
    "macro_f1": True,
    "one_error": False,
    "auroc": True,
    "hamming_loss": False,
    "micro_precision": True,
}
GRID = [
    "n_estimators=20 max_features=auto max_depth=4 min_samples_split=2 min_samples_leaf=1",
    "n_estimators=20 max_features=auto max_depth=none min_samples_split=2 min_samples_leaf=1",
    "n_estimators=20 max_features=sqrt max_depth=4 min_samples_split=2 min_samples_leaf=1",
    "n_estimators=20 max_features=sqrt max_depth=none min_samples_split=2 min_samples_leaf=1",
]


def make_dataset(rng, index, domain):
    n = rng.randint(24, 48)
    n_numeric = rng.randint(2, 4)
    n_binary = rng.randint(0, 2)
    n_nominal = rng.randint(0, 1)
    q = rng.randint(3, 5)
    density = rng.uniform(0.2, 0.6)
    header, rows = [], []
    header += [f"num{j}" for j in range(n_numeric)]
    header += [f"bin{j}" for j in range(n_binary)]
    header += [f"cat{j}" for j in range(n_nominal)]
    labels = [f"label{j}" for j in range(q)]
    header += labels
    for i in range(n):
        latent = rng.gauss(0.0, 1.0)
        row = [f"{latent * rng.uniform(0.5, 2.0) + rng.gauss(0, 0.3):.6f}" for _ in range(n_numeric)]
        row += [str(int(rng.random() < 0.5)) for _ in range(n_binary)]
        row += [rng.choice(["red", "green", "blue"]) for _ in range(n_nominal)]
        label_values = []
        for j in range(q):
            p = density * (1.0 + 0.5 * math.tanh(latent)) if j % 2 == 0 else density
            label_values.append(int(rng.random() < min(0.95, p)))
        # Every label gets at least one positive instance.
        if i < q:
            label_values[i] = 1
        row += [str(v) for v in label_values]
        rows.append(row)
    dataset_id = f"{domain[:3]}{index:02d}"
    return dataset_id, header, rows, labels, n, q, density


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default=str(pathlib.Path(__file__).resolve().parent.parent / "data" / "toy"))
    args = parser.parse_args()
    out = pathlib.Path(args.out)
    (out / "datasets").mkdir(parents=True, exist_ok=True)
    rng = random.Random(SEED)

    manifests, perf = [], []
    for index in range(12):
        domain = DOMAINS[index % 3]
        dataset_id, header, rows, labels, n, q, density = make_dataset(rng, index, domain)
        with open(out / "datasets" / f"{dataset_id}.csv", "w", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(header)
            w.writerows(rows)
        manifest = {"id": dataset_id, "domain": domain, "data": f"{dataset_id}.csv", "labels": labels}
        with open(out / "datasets" / f"{dataset_id}.json", "w") as f:
            json.dump(manifest, f, indent=2)
            f.write("\n")
        manifests.append(f"datasets/{dataset_id}.json")

        # Algorithm quality depends on label count and density so the
        # selector has something to learn.
        for a, alg in enumerate(ALGORITHMS):
            skill = 0.6 + 0.08 * math.sin(a * 1.7 + q * 0.9) + 0.15 * (density - 0.4) * (a - 1.5)
            for metric, higher in METRICS.items():
                base = skill + rng.gauss(0.0, 0.02)
                value = base if higher else 1.0 - base
                perf.append([dataset_id, alg, metric, f"{min(max(value, 0.0), 1.0):.6f}"])

    with open(out / "performance.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["dataset", "algorithm", "metric", "value"])
        w.writerows(perf)
    with open(out / "toy.cfg", "w") as f:
        f.write("# Toy corpus settings: few datasets, so fewer wins and folds.\n")
        f.write("base_seed = 7\nmin_wins = 2\ninner_cv_folds = 3\n")
    run = {
        "config": "toy.cfg",
        "datasets": manifests,
        "performance": "performance.csv",
        "mode": "str",
        "output": "out",
        "grid": GRID,
    }
    with open(out / "run.json", "w") as f:
        json.dump(run, f, indent=2)
        f.write("\n")


if __name__ == "__main__":
    main()

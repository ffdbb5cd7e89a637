"""Rebuild the vendored CSV datasets.

Balance and Waveform are regenerated from their generating processes.
Cancer and Pima are converted from copies bundled with public Python
packages (pydataset's MASS::biopsy and keel-ds' pima.dat); pass their
paths on the command line.

    python3 prepare_datasets.py BIOPSY_CSV PIMA_DAT
"""
import csv
import itertools
import sys

import numpy as np


def balance():
    rows = []
    for lw, ld, rw, rd in itertools.product(range(1, 6), repeat=4):
        left, right = lw * ld, rw * rd
        cls = "L" if left > right else ("R" if right > left else "B")
        rows.append([cls, lw, ld, rw, rd])
    with open("balance.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["class", "left_weight", "left_distance", "right_weight", "right_distance"])
        w.writerows(rows)


def cancer(biopsy_csv):
    names = ["clump_thickness", "cell_size", "cell_shape", "marginal_adhesion",
             "epithelial_size", "bare_nuclei", "bland_chromatin", "normal_nucleoli", "mitoses"]
    with open(biopsy_csv) as fh:
        data = list(csv.reader(fh))[1:]
    # 16 rows carry NA in bare_nuclei; fill with the column median (1).
    col = [int(r[7]) for r in data if r[7] != "NA"]
    median = int(np.median(col))
    with open("cancer.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(names + ["class"])
        for r in data:
            vals = [median if v == "NA" else int(v) for v in r[2:11]]
            w.writerow(vals + [r[11]])


def pima(pima_dat):
    names = ["pregnancies", "glucose", "blood_pressure", "skin_thickness",
             "insulin", "bmi", "pedigree", "age", "class"]
    with open(pima_dat) as fh:
        data = [l.strip() for l in fh if l.strip() and not l.startswith("@")]
    with open("pima.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(names)
        for line in data:
            w.writerow([v.strip() for v in line.split(",")])


def waveform(n=5000, seed=20070101):
    # Breiman's waveform generator with 19 additional pure-noise attributes.
    rng = np.random.default_rng(seed)
    t = np.arange(1, 22)
    h1 = np.maximum(6 - np.abs(t - 11), 0)
    h2 = np.maximum(6 - np.abs(t - 15), 0)
    h3 = np.maximum(6 - np.abs(t - 7), 0)
    pairs = [(h1, h2), (h1, h3), (h2, h3)]
    with open("waveform.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{i}" for i in range(1, 41)] + ["class"])
        for _ in range(n):
            c = int(rng.integers(0, 3))
            u = rng.uniform()
            a, b = pairs[c]
            x = u * a + (1 - u) * b + rng.normal(size=21)
            noise = rng.normal(size=19)
            w.writerow([f"{v:.2f}" for v in np.concatenate([x, noise])] + [c])


if __name__ == "__main__":
    balance()
    waveform()
    if len(sys.argv) == 3:
        cancer(sys.argv[1])
        pima(sys.argv[2])

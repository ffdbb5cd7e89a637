"""Regenerate stats_golden.json with SciPy as the reference oracle.

    python3 make_stats_golden.py > stats_golden.json
"""
import json

import numpy as np
from scipy import stats


def ks(x):
    x = np.asarray(x)
    n = len(x)
    m, s = x.mean(), x.std(ddof=1)
    d = stats.kstest(x, "norm", args=(m, s)).statistic
    return {"statistic": float(d), "p_value": float(stats.kstwobign.sf(np.sqrt(n) * d))}


def main():
    rng = np.random.default_rng(20240607)
    pairs = []
    for i in range(20):
        na = int(rng.integers(8, 41))
        nb = int(rng.integers(8, 41))
        shift = float(rng.choice([0.0, 0.3, 1.0, 3.0]))
        spread = float(rng.choice([1.0, 1.5, 4.0]))
        a = np.round(rng.normal(95.0, 1.0, na), 4)
        b = np.round(rng.normal(95.0 + shift, spread, nb), 4)
        if i % 5 == 4:
            b = np.round(rng.integers(20, 40, nb).astype(float), 4)
            a = np.round(rng.integers(18, 38, na).astype(float), 4)
        lev = stats.levene(a, b, center="mean")
        st = stats.ttest_ind(a, b, equal_var=True)
        we = stats.ttest_ind(a, b, equal_var=False)
        qa, qb = a.var(ddof=1) / na, b.var(ddof=1) / nb
        welch_df = (qa + qb) ** 2 / (qa**2 / (na - 1) + qb**2 / (nb - 1))
        pairs.append({
            "a": a.tolist(),
            "b": b.tolist(),
            "ks_a": ks(a),
            "ks_b": ks(b),
            "levene": {"statistic": float(lev.statistic), "p_value": float(lev.pvalue)},
            "student": {"statistic": float(st.statistic), "p_value": float(st.pvalue), "df": float(na + nb - 2)},
            "welch": {"statistic": float(we.statistic), "p_value": float(we.pvalue), "df": float(welch_df)},
        })
    grid = (np.arange(100) / 99.0)
    out = {"pairs": pairs, "uniform_grid_100": {"sample": grid.tolist(), "ks": ks(grid)}}
    print(json.dumps(out, indent=1))


if __name__ == "__main__":
    main()

"""
Plotting a CLI trace
====================

``autobid run`` writes one CSV per seed.  This script plots the bids,
the multipliers and the remaining budget from one of them::

    autobid run --config configs/poly_sweep.yaml --out results
    python3 demos/plot_trace_csv.py results/trace_T1000_seed0.csv
"""

# %%
import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

path = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("results/trace_T1000_seed0.csv")
data = np.genfromtxt(path, delimiter=",", names=True, dtype=None, encoding="utf-8")

# %%
# Bids against values, the budget multiplier and the budget left.
fig, axes = plt.subplots(1, 3, figsize=(13, 4))
axes[0].scatter(data["v"], data["bid"], s=4, alpha=0.3)
axes[0].set_xlabel("value")
axes[0].set_ylabel("bid")
axes[1].plot(data["t"], data["lambda"], label="lambda")
axes[1].plot(data["t"], data["mu"], label="mu")
axes[1].set_xlabel("round")
axes[1].legend()
axes[2].plot(data["t"], data["budget_remaining"])
axes[2].set_xlabel("round")
axes[2].set_ylabel("budget left")
fig.tight_layout()
out = path.with_suffix(".png")
fig.savefig(out)
print(f"wrote {out}")

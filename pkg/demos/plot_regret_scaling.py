"""
Regret against the horizon
==========================

A small sweep of the polynomial-time policy on a product environment.
The log-log slope of mean regret against ``T`` estimates the growth rate.
"""

# %%
# Four value atoms and five bid atoms, first price, budget a half per round.
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from autobid import harness
from autobid.config import parse

cfg = parse("""
env:
  kind: product
  values: [0.25, 0.5, 0.75, 1.0]
  value_probs: [0.25, 0.25, 0.25, 0.25]
  bids: [0.0, 0.25, 0.5, 0.75, 1.0]
  bid_probs: [0.2, 0.2, 0.2, 0.2, 0.2]
policy: {kind: poly, lipschitz: 1.0, restart: sparse}
payment: {rule: first}
constraints: {rho: 0.5}
""")

# %%
# Few seeds and short horizons keep this under a minute; the acceptance
# tests run the same sweep at full size.
horizons = [250, 500, 1000, 2000]
res = harness.sweep(cfg, horizons, seeds=[0, 1, 2, 3])
for row in res["rows"]:
    print(f"T={row['T']:>5}  mean regret {row['mean_regret']:7.2f} +- {row['std_regret']:.2f}")
print(f"fitted slope {res['slope']:.3f}")

# %%
# Short horizons sit above the ``sqrt(T)`` line: early on the fixed
# discretization and exploration costs dominate.  The full-size sweep from
# ``T = 1000`` to ``16000`` is where the slope is measured.
means = np.array([row["mean_regret"] for row in res["rows"]])
fig, ax = plt.subplots(figsize=(5, 4))
ax.loglog(horizons, means, "o-", label="mean regret")
ax.loglog(horizons, means[0] * np.sqrt(np.array(horizons) / horizons[0]), "--",
          label="sqrt(T) reference")
ax.set_xlabel("T")
ax.set_ylabel("regret")
ax.legend()
fig.tight_layout()
fig.savefig(Path(__file__).with_suffix(".png"))

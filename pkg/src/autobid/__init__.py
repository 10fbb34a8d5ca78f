"""Online bidding in repeated auctions under budget and ROI constraints.

The package pairs a primal bidding learner with a dual that prices the
constraints:

* :mod:`autobid.core` -- payments, rewards, safe bids and the Lagrangian.
* :mod:`autobid.covers` -- finite covers of Lipschitz bidding functions.
* :mod:`autobid.learners` -- Hedge, restart mixtures and the bandit learner.
* :mod:`autobid.policies` -- tree, bucket-bandit, polynomial and fixed policies.
* :mod:`autobid.dual` -- projected gradient descent on the multipliers.
* :mod:`autobid.orchestrator` -- run loops and CSV traces.
* :mod:`autobid.environments` -- finite environments and lower-bound laws.
* :mod:`autobid.oracle` -- the benchmark LP and regret metrics.
* :mod:`autobid.config`, :mod:`autobid.harness`, :mod:`autobid.cli` --
  experiment plumbing.
"""

from .core import (ConstraintSpec, Multipliers, Objective, PaymentRule, ScaleParams, chi_psi,
                   guarded_bid, is_risky, lagrangian, payment, safe_bid, scaled_reward, won)
from .dual import DualState
from .environments import (FiniteEnv, bandit_lb, bandit_lb_masses, discrete_joint, point_mass,
                           product, tight_beta)
from .errors import CapacityError, ConfigError, InvariantError
from .learners import ExpSix, Hedge, HedgeBank, IntervalMeta
from .oracle import OptSolution, lipschitz_candidates, metrics, solve_opt
from .orchestrator import RunTrace, run_exact_roi, run_primal_dual
from .policies import BucketBanditPolicy, FixedPolicy, PolyPolicy, TreePolicy

__version__ = "0.1.0"

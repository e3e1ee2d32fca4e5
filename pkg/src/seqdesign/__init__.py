"""Desk-scale laboratory for designing time-series A/B experiments.

Subpackages and modules:

* ``core``          shared domain types, panel/trajectory plumbing, seeded RNG contract
* ``estimators``    ATE estimators and the variance functional
* ``sim_linear``    synthetic linear-Gaussian environment (settings i-iv)
* ``sim_bootstrap`` wild-bootstrap simulator built from A/A panel data
* ``sim_dispatch``  grid-world ride dispatch simulator and its fitted surrogate
* ``designs``       baseline allocation designs and the variance-oracle policy
* ``trl``           transformer double-DQN design agent
* ``bench``         replicated benchmark harness
* ``cli``           command-line entry point
"""

__version__ = "0.1.0"

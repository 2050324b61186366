"""
linucb-lab: variance-aware optimistic value iteration for episodic linear MDPs
Library and CLI harness for LSVI-UCB+, its baselines, exact-regret benchmarking
and a Monte Carlo concentration lab
"""

__version__ = "0.1.0"

"""Scenario-tree stochastic MPC laboratory for human-lead CACC platoons."""

__version__ = "0.1.0"

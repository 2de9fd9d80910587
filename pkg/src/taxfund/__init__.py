"""Property-tax-subsidy program analytics.

Pipeline stages: ingest or synthesize parcel data, cluster historical
assessment trajectories, forecast parcel values, estimate household
incomes, evaluate eligibility rules, and simulate multi-year program
cost with Monte Carlo. Every stage is deterministic given its seed.
"""

__version__ = "0.1.0"

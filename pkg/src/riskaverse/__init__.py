"""Risk-averse two-stage covering and facility location with probabilistic budgets."""

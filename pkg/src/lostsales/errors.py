"""Exception types shared across the package."""


class ConfigError(ValueError):
    """A model, parameter set or config file failed validation."""


class PolicyFault(RuntimeError):
    """A policy emitted an infeasible order during a run."""


class UnstableOrderError(ValueError):
    """A constant order violates E[s(q, Z)] < E[D]."""


class BudgetExceeded(RuntimeError):
    """A dynamic program is larger than the configured state-action budget."""

    def __init__(self, size: int, budget: int):
        super().__init__(f"state-action space has {size} entries, budget is {budget}")
        self.size = size
        self.budget = budget

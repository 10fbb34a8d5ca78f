"""Exception types shared across the package."""


class CapacityError(RuntimeError):
    """A requested cover or probe is larger than the configured cap."""


class InvariantError(RuntimeError):
    """A structural guarantee failed; this signals a bug, not bad input."""


class ConfigError(ValueError):
    """An experiment configuration failed validation."""

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))

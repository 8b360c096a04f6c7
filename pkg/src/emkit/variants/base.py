"""Driver base class and option validation."""

from __future__ import annotations

from ..errors import ConfigurationError


class Driver:
    """A sequential state machine producing one parameter update per step.

    Subclasses declare their recognized options in ``OPTIONS`` (name ->
    default); passing an option a variant does not use is a configuration
    error.
    """

    tag = ""
    stochastic = False
    OPTIONS: dict = {}

    def __init__(self, model, options: dict, rng):
        unknown = set(options) - set(self.OPTIONS)
        if unknown:
            raise ConfigurationError(f"options {sorted(unknown)} are not valid for variant {self.tag!r}")
        self.model = model
        self.options = {**self.OPTIONS, **options}
        self.rng = rng

    def step(self, theta, n):
        raise NotImplementedError

    def burn_in(self, n_records: int) -> int:
        frac = self.options.get("burn_in_frac", 0.25)
        return min(max(int(frac * n_records), 0), n_records - 1)

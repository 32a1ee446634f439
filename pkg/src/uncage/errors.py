class ContractViolation(ValueError):
    """A caller broke a precondition (shape, range, or ordering contract)."""


class PromptError(ValueError):
    """A structured prompt could not be turned into a valid PromptSpec."""


class PlacementError(RuntimeError):
    """Scene entities could not be placed under the spacing constraint."""


class ConfigError(ValueError):
    """A benchmark config field is invalid; the message names the field."""

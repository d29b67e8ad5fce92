"""Exception types shared across the package.

The CLI maps these onto process exit codes: InputError -> 2,
ComputationError -> 3. Violation reports (checks that ran fine but
found the property false) are ordinary return values, not exceptions;
the CLI maps those onto exit code 4.
"""


class InputError(ValueError):
    """Caller handed us parameters outside an operation's domain."""


class ComputationError(RuntimeError):
    """A computation could not be completed to its stated guarantees."""

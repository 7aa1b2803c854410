"""Exception hierarchy shared by every stage of the toolkit.

Each error carries the process exit code the command-line front end maps it to.
"""


class HarnessError(Exception):
    exit_code = 3


class InvalidParams(HarnessError, ValueError):
    """Inadmissible parameters, bad time ordering or a malformed grid."""

    exit_code = 2


class NumericFailure(HarnessError):
    exit_code = 3


class NegativeBeta(NumericFailure):
    def __init__(self, n, value):
        self.n = n
        self.value = value
        super().__init__(f"recurrence coefficient B_{n} = {value!r} is negative")


class EigenFailure(NumericFailure):
    pass


class DegenerateAC(NumericFailure):
    pass


class UnidentifiableRegime(NumericFailure):
    pass


class DegenerateConditioning(NumericFailure):
    pass


class OutsideSupport(HarnessError):
    exit_code = 4

    def __init__(self, x, s):
        self.x = x
        self.s = s
        super().__init__(f"state x={x!r} is outside the admissible set U_s at s={s!r}")

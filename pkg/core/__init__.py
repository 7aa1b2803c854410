from core.errors import (
    DegenerateAC,
    DegenerateConditioning,
    EigenFailure,
    HarnessError,
    InvalidParams,
    NegativeBeta,
    NumericFailure,
    OutsideSupport,
    UnidentifiableRegime,
)
from core.params import HarnessParams
from core.qcore import q_binomial, q_factorial, q_int, qpow

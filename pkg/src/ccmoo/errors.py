class NumericalError(ArithmeticError):
    """Numeric breakdown during a solve or a training run.

    Raised when a computation produces values that violate a numeric
    contract (non-finite objectives, a min-norm value below -tol, ...)
    rather than a misuse of the API, which raises ValueError.
    """

    def __init__(self, message, partial_trace=None):
        super().__init__(message)
        self.partial_trace = partial_trace

class DegenerateProjectionError(Exception):
    pass


class ConjugateOrderingError(Exception):
    pass


class NonHermitianError(Exception):
    pass


class ConfigError(ValueError):
    pass


class NoResultError(Exception):
    pass

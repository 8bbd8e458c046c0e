class ConfigError(ValueError):
    pass


class DataError(ValueError):
    pass


class UsageError(RuntimeError):
    pass


class EmptyStreamError(RuntimeError):
    pass

"""Configuration errors shared by every layer."""

from typing import Optional


class ConfigError(ValueError):
    """Invalid scenario configuration; ``key`` is the offending dotted key."""

    def __init__(self, key: Optional[str], message: str):
        self.key = key
        self.message = message
        super().__init__(f"{key}: {message}" if key else message)

    def __reduce__(self):
        # Worker processes send errors back pickled.
        return (type(self), (self.key, self.message))

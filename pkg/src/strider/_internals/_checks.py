"""Small argument checks shared by parameter setters."""


def positive_int(name: str, val, minimum: int = 1) -> int:
    """Return ``val`` as an int, raising ValueError if it is not integral or below ``minimum``."""
    if isinstance(val, bool) or int(val) != val:
        raise ValueError(f"{name} must be an integer, got {val!r}")
    val = int(val)
    if val < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {val}")
    return val

"""Field-checked decoding helpers for JSON model documents."""
import math

from .errors import ModelLoadError


def field(d, key, path, kind=None):
    where = f"{path}.{key}" if path else key
    if not isinstance(d, dict):
        raise ModelLoadError(path or "<root>", "expected an object")
    if key not in d:
        raise ModelLoadError(where, "missing")
    value = d[key]
    if kind is not None and not _is(value, kind):
        raise ModelLoadError(where, f"expected {kind.__name__ if isinstance(kind, type) else kind}, "
                                    f"got {type(value).__name__}")
    return value


def _is(value, kind):
    if kind is int:
        return isinstance(value, int) and not isinstance(value, bool)
    if kind is float:
        return (isinstance(value, (int, float)) and not isinstance(value, bool)
                and math.isfinite(value))
    return isinstance(value, kind)


def number_list(value, path, length=None, integer=False):
    kind = int if integer else float
    if not isinstance(value, list):
        raise ModelLoadError(path, "expected a list")
    if length is not None and len(value) != length:
        raise ModelLoadError(path, f"expected {length} entries, got {len(value)}")
    for i, v in enumerate(value):
        if not _is(v, kind):
            raise ModelLoadError(f"{path}[{i}]", f"expected {kind.__name__}")
    return value

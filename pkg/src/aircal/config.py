"""Plain key=value run configuration.

Grammar, line by line:
  - blank lines and full-line comments (first non-space char `#`) are skipped;
    there are no trailing comments, a `#` after `=` belongs to the value
  - everything else must be `key = value`; keys may be dotted
    (e.g. `synth.n_sensors`) and appear at most once
  - values containing commas parse as lists of scalars
  - scalars auto-type in order: integer, float, true/false booleans,
    otherwise the verbatim string (surrounding whitespace stripped)

Command-line flags override file values; merge_options implements that
precedence.
"""

from __future__ import annotations

from typing import Union

from aircal.errors import ConfigError

Scalar = Union[int, float, bool, str]
Value = Union[Scalar, list]


def _parse_scalar(text: str) -> Scalar:
    body = text.strip()
    try:
        return int(body, 10)
    except ValueError:
        pass
    try:
        return float(body)
    except ValueError:
        pass
    if body == "true":
        return True
    if body == "false":
        return False
    return body


def parse_config(text: str) -> dict[str, Value]:
    """Parse config text into a flat {dotted key: value} mapping."""
    out: dict[str, Value] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, _, value_text = line.partition("=")
        key = key.strip()
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if any(ch.isspace() for ch in key):
            raise ConfigError(f"line {lineno}: key {key!r} contains whitespace")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        value_text = value_text.strip()
        if "," in value_text:
            parts = value_text.split(",")
            if any(not p.strip() for p in parts):
                raise ConfigError(f"line {lineno}: empty list element")
            out[key] = [_parse_scalar(p) for p in parts]
        else:
            out[key] = _parse_scalar(value_text)
    return out


def merge_options(
    file_values: dict[str, Value], flag_values: dict[str, Value]
) -> dict[str, Value]:
    """Overlay flag values on file values; flags win on conflict.
    Flag entries holding None mean "flag not given" and are dropped."""
    merged = dict(file_values)
    for key, value in flag_values.items():
        if value is not None:
            merged[key] = value
    return merged


def take(
    values: dict[str, Value], key: str, kinds, default=None, required: bool = False
):
    """Pop a typed scalar out of a parsed config, with clear errors."""
    if key not in values:
        if required:
            raise ConfigError(f"missing required config key {key!r}")
        return default
    value = values.pop(key)
    if kinds is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if isinstance(value, bool) and kinds is not bool:
        raise ConfigError(f"config key {key!r} has wrong type")
    if not isinstance(value, kinds):
        raise ConfigError(f"config key {key!r} has wrong type")
    return value

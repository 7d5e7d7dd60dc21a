"""Config-file handling for the command line.

One JSON object per file.  Precedence is fixed: built-in defaults, then the
config file, then explicitly passed flags.
"""

import json


def load_config(path) -> dict:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"config file {path} is not valid JSON: {exc}")
    if not isinstance(data, dict):
        raise ValueError(f"config file {path} must hold a JSON object")
    return data


def merge_options(defaults: dict, config: dict, flags: dict) -> dict:
    """Layer the three sources; flags that were not passed must be None."""
    unknown = sorted(set(config) - set(defaults))
    if unknown:
        raise ValueError(f"unknown config keys: {unknown}")
    out = dict(defaults)
    out.update(config)
    out.update({k: v for k, v in flags.items() if v is not None})
    return out

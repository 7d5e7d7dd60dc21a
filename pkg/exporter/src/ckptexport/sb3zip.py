"""Reading the zip checkpoint layout of the common policy-optimization stack.

A checkpoint is a zip archive holding `policy.pth` (a torch state dict of the
policy module) and a `data` member (JSON with training metadata, including a
serialized action space and policy keyword arguments). Only those two members
are consumed here; everything else in the archive is ignored.
"""

import base64
import io
import json
import pickle
import zipfile


class CheckpointFormatError(ValueError):
    """Archive is not a readable checkpoint."""


def read_checkpoint(path):
    """Return (state_dict, data) from a checkpoint archive.

    data is the parsed metadata JSON, or None when the member is missing or
    unreadable; the state dict is required.
    """
    import torch

    try:
        zf = zipfile.ZipFile(path)
    except (OSError, zipfile.BadZipFile) as exc:
        raise CheckpointFormatError(f"{path}: not a checkpoint archive: {exc}") from exc
    with zf:
        names = zf.namelist()
        if "policy.pth" not in names:
            raise CheckpointFormatError(
                f"{path}: archive has no policy.pth (members: {sorted(names)})")
        buf = io.BytesIO(zf.read("policy.pth"))
        try:
            state = torch.load(buf, map_location="cpu", weights_only=True)
        except Exception as exc:
            raise CheckpointFormatError(
                f"{path}: policy.pth is not a loadable state dict: {exc}") from exc
        data = None
        if "data" in names:
            try:
                data = json.loads(zf.read("data").decode("utf-8"))
            except (ValueError, UnicodeDecodeError):
                data = None
    if not isinstance(state, dict) or not state:
        raise CheckpointFormatError(f"{path}: policy.pth holds no parameters")
    return state, data


def decode_action_space(data):
    """Best-effort (low, high) bounds from the metadata's action space.

    The space is stored as a pickled object; unpickling needs whatever
    modules produced it, so failure is expected on a bare install and the
    caller falls back to explicit bounds. Returns None when unavailable.
    """
    if not isinstance(data, dict):
        return None
    space = data.get("action_space")
    if not isinstance(space, dict):
        return None
    blob = space.get(":serialized:")
    if not isinstance(blob, str):
        return None
    try:
        obj = pickle.loads(base64.b64decode(blob))
    except Exception:
        return None
    low = getattr(obj, "low", None)
    high = getattr(obj, "high", None)
    if low is None and isinstance(obj, dict):
        low, high = obj.get("low"), obj.get("high")
    if low is None or high is None:
        return None
    return low, high


def declared_activation(data):
    """Activation tag from the metadata, or None when unstated.

    The policy kwargs serialize the activation class by name only; matching
    on that name keeps this independent of the producing framework's import
    layout.
    """
    if not isinstance(data, dict):
        return None
    kwargs = data.get("policy_kwargs")
    if not kwargs:
        return None
    text = json.dumps(kwargs) if isinstance(kwargs, (dict, list)) else str(kwargs)
    if "activation_fn" not in text:
        return None
    # longer names first: LeakyReLU must not match as ReLU
    for marker, tag in (("LeakyReLU", "LeakyReLU"), ("Tanh", "tanh"),
                        ("ReLU", "relu"), ("Identity", "linear")):
        if marker in text:
            return tag
    return text

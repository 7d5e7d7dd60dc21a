"""Checkpoint extraction into the portable weights format.

The output file follows the criticgate-weights version 1 schema documented in
the primary package (docs/weights_format.md there): a self-describing JSON
object with a dense layer chain, action bounds for policies, and probe
input/output pairs recorded from the source model so the consuming loader can
verify the conversion end to end.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .sb3zip import (CheckpointFormatError, decode_action_space,
                     declared_activation, read_checkpoint)

FORMAT_NAME = "criticgate-weights"
FORMAT_VERSION = 1

N_PROBES = 100
PROBE_SEED = 20260822
PROBE_SCALE = 2.0

ROLES = ("policy-mean", "value")
SUPPORTED_ACTIVATIONS = ("tanh", "relu", "linear")

# state-dict geography of the source policy module
TRUNKS = {"policy-mean": "mlp_extractor.policy_net",
          "value": "mlp_extractor.value_net"}
HEADS = {"policy-mean": "action_net", "value": "value_net"}
# parameter-free or other-role keys that may appear alongside the exported role
BENIGN = ("log_std", "features_extractor.", "pi_features_extractor.",
          "vf_features_extractor.")


class UnsupportedLayerError(CheckpointFormatError):
    """A state-dict entry outside the dense feed-forward layout."""


class UnsupportedActivationError(CheckpointFormatError):
    """Declared activation outside tanh/relu/linear."""


class MissingActionBoundsError(CheckpointFormatError):
    """Policy export without recoverable action bounds."""


@dataclass
class ExportManifest:
    source: str
    role: str
    layer_shapes: list          # (in_dim, out_dim) per dense layer
    activations: list
    action_low: list | None
    action_high: list | None
    probe_inputs: np.ndarray
    probe_outputs: np.ndarray
    format_version: int = FORMAT_VERSION

    def to_dict(self):
        return {
            "source": self.source,
            "role": self.role,
            "format_version": self.format_version,
            "layer_shapes": [list(s) for s in self.layer_shapes],
            "activations": list(self.activations),
            "action_low": self.action_low,
            "action_high": self.action_high,
            "n_probes": int(self.probe_inputs.shape[0]),
        }


def _other_role(role):
    return "value" if role == "policy-mean" else "policy-mean"


def _trunk_layers(state, trunk, role):
    """Ordered (weight, bias) pairs of the trunk Sequential."""
    indices = set()
    prefix = trunk + "."
    for key in state:
        if not key.startswith(prefix):
            continue
        rest = key[len(prefix):]
        idx, _, leaf = rest.partition(".")
        if not idx.isdigit() or leaf not in ("weight", "bias"):
            raise UnsupportedLayerError(f"unsupported layer entry {key!r}")
        indices.add(int(idx))
    layers = []
    for idx in sorted(indices):
        w = state.get(f"{prefix}{idx}.weight")
        b = state.get(f"{prefix}{idx}.bias")
        if w is None or b is None:
            raise CheckpointFormatError(
                f"{trunk}[{idx}]: weight and bias must both be present")
        layers.append((w, b))
    if not layers:
        raise CheckpointFormatError(f"no {role} trunk found under {trunk!r}")
    return layers


def _check_dense(name, w, b):
    if w.ndim != 2:
        raise UnsupportedLayerError(
            f"unsupported layer {name!r}: parameter is {w.ndim}-dimensional, "
            "only dense (2-D) layers convert")
    if b.ndim != 1 or b.shape[0] != w.shape[0]:
        raise CheckpointFormatError(
            f"layer {name!r}: bias shape {tuple(b.shape)} does not match "
            f"weight {tuple(w.shape)}")


def _audit_keys(state, role):
    """Reject any key that is neither this role's chain nor a benign extra."""
    allowed_prefixes = (TRUNKS[role] + ".", HEADS[role] + ".",
                        TRUNKS[_other_role(role)] + ".",
                        HEADS[_other_role(role)] + ".")
    for key in state:
        if key.startswith(allowed_prefixes):
            continue
        if key in BENIGN or key.startswith(BENIGN):
            continue
        raise UnsupportedLayerError(f"unsupported layer {key!r}")


def _resolve_activation(data):
    tag = declared_activation(data)
    if tag is None:
        return "tanh"                     # the source framework's default
    if tag not in SUPPORTED_ACTIVATIONS:
        raise UnsupportedActivationError(
            f"unsupported activation {tag!r}; supported: "
            f"{', '.join(SUPPORTED_ACTIVATIONS)}")
    return tag


def _source_forward(layers, activations, inputs):
    """Probe outputs from the source tensors in their native precision."""
    import torch

    mods = []
    for (w, b), act in zip(layers, activations):
        lin = torch.nn.Linear(w.shape[1], w.shape[0])
        with torch.no_grad():
            lin.weight.copy_(w)
            lin.bias.copy_(b)
        mods.append(lin)
        if act == "tanh":
            mods.append(torch.nn.Tanh())
        elif act == "relu":
            mods.append(torch.nn.ReLU())
    seq = torch.nn.Sequential(*mods).eval()
    with torch.no_grad():
        out = seq(torch.as_tensor(inputs, dtype=torch.float32))
    return out.numpy().astype(np.float64)


def export_checkpoint(path, role, out, action_low=None, action_high=None,
                      n_probes=N_PROBES, probe_seed=PROBE_SEED):
    """Extract one role from a checkpoint archive into a weights file.

    Returns the ExportManifest describing what was written. action_low/high
    override (or stand in for) bounds recovered from the checkpoint metadata;
    policy exports fail without either source.
    """
    if role not in ROLES:
        raise ValueError(f"role must be one of {ROLES}, got {role!r}")
    state, data = read_checkpoint(path)
    _audit_keys(state, role)

    trunk = _trunk_layers(state, TRUNKS[role], role)
    head_name = HEADS[role]
    head_w = state.get(f"{head_name}.weight")
    head_b = state.get(f"{head_name}.bias")
    if head_w is None or head_b is None:
        raise CheckpointFormatError(f"checkpoint has no {head_name!r} head")

    act = _resolve_activation(data)
    tensors = trunk + [(head_w, head_b)]
    activations = [act] * len(trunk) + ["linear"]
    names = [f"{TRUNKS[role]}[{i}]" for i in range(len(trunk))] + [head_name]
    for (w, b), name in zip(tensors, names):
        _check_dense(name, w, b)
    dims = [tensors[0][0].shape[1]] + [w.shape[0] for w, _ in tensors]
    for i in range(1, len(tensors)):
        if tensors[i][0].shape[1] != dims[i]:
            raise CheckpointFormatError(
                f"layer chain broken at {i}: expects input "
                f"{tensors[i][0].shape[1]}, previous layer emits {dims[i]}")

    input_dim, output_dim = dims[0], dims[-1]
    if role == "value" and output_dim != 1:
        raise CheckpointFormatError(
            f"value head emits {output_dim} outputs, expected 1")

    low = high = None
    if role == "policy-mean":
        if action_low is not None and action_high is not None:
            low, high = action_low, action_high
        else:
            bounds = decode_action_space(data)
            if bounds is None:
                raise MissingActionBoundsError(
                    "action bounds are not recoverable from this checkpoint; "
                    "pass --action-low/--action-high")
            low, high = bounds
        low = np.asarray(low, dtype=np.float64).reshape(-1)
        high = np.asarray(high, dtype=np.float64).reshape(-1)
        if low.shape != (output_dim,) or high.shape != (output_dim,):
            raise CheckpointFormatError(
                f"action bounds have dim {low.shape[0]}, head emits {output_dim}")

    rng = np.random.default_rng(probe_seed)
    probe_inputs = rng.normal(0.0, PROBE_SCALE, size=(n_probes, input_dim))
    probe_outputs = _source_forward(tensors, activations, probe_inputs)

    payload = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "role": role,
        "input_dim": int(input_dim),
        "output_dim": int(output_dim),
        "squash": "none",          # deterministic head = distribution mean
        "layers": [
            {
                "in_dim": int(w.shape[1]),
                "out_dim": int(w.shape[0]),
                "activation": a,
                "weight": np.asarray(w, dtype=np.float64).tolist(),
                "bias": np.asarray(b, dtype=np.float64).tolist(),
            }
            for (w, b), a in zip(tensors, activations)
        ],
    }
    if role == "policy-mean":
        payload["action_low"] = low.tolist()
        payload["action_high"] = high.tolist()
    payload["probes"] = [
        {"input": i.tolist(), "output": o.tolist()}
        for i, o in zip(probe_inputs, probe_outputs)
    ]
    with open(out, "w") as fh:
        json.dump(payload, fh, allow_nan=False)
        fh.write("\n")

    return ExportManifest(
        source=str(path), role=role,
        layer_shapes=[(int(w.shape[1]), int(w.shape[0])) for w, _ in tensors],
        activations=activations,
        action_low=low.tolist() if low is not None else None,
        action_high=high.tolist() if high is not None else None,
        probe_inputs=probe_inputs, probe_outputs=probe_outputs)

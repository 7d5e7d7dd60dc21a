"""Self-describing feed-forward networks in a portable JSON weights format.

A weights file fully determines the forward pass: layer shapes, row-major
weight matrices, biases, activations, output role and squashing.  Files may
carry probe input/output pairs so a reimplementation can be checked against
the exporter that produced them.  See docs/weights_format.md for the schema.
"""

import json
from dataclasses import dataclass, field

import numpy as np

FORMAT_NAME = "criticgate-weights"
FORMAT_VERSION = 1

ACTIVATIONS = ("tanh", "relu", "linear")
ROLES = ("policy-mean", "value")
SQUASHES = ("none", "tanh")


class WeightsFormatError(ValueError):
    """Structurally invalid weights payload."""


class DimensionMismatchError(WeightsFormatError):
    """Layer dimensions do not chain."""


class UnsupportedActivationError(WeightsFormatError):
    """Activation outside the portable set."""


def _apply_activation(name, x):
    if name == "tanh":
        return np.tanh(x)
    if name == "relu":
        return np.maximum(x, 0.0)
    if name == "linear":
        return x
    raise UnsupportedActivationError(f"unknown activation {name!r}")


@dataclass
class Layer:
    weight: np.ndarray  # (out_dim, in_dim)
    bias: np.ndarray    # (out_dim,)
    activation: str

    @property
    def in_dim(self):
        return self.weight.shape[1]

    @property
    def out_dim(self):
        return self.weight.shape[0]


@dataclass
class PortableNetwork:
    role: str                    # "policy-mean" or "value"
    input_dim: int
    output_dim: int
    layers: list
    squash: str = "none"         # policy-mean only
    action_low: np.ndarray | None = None
    action_high: np.ndarray | None = None
    probes: list = field(default_factory=list)

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.role not in ROLES:
            raise WeightsFormatError(f"role must be one of {ROLES}, got {self.role!r}")
        if self.squash not in SQUASHES:
            raise WeightsFormatError(f"squash must be one of {SQUASHES}")
        if not self.layers:
            raise WeightsFormatError("network has no layers")
        dim = self.input_dim
        for i, layer in enumerate(self.layers):
            if layer.activation not in ACTIVATIONS:
                raise UnsupportedActivationError(
                    f"layer {i}: activation {layer.activation!r} not in {ACTIVATIONS}")
            if layer.weight.ndim != 2 or layer.bias.shape != (layer.out_dim,):
                raise WeightsFormatError(f"layer {i}: malformed weight or bias shape")
            if layer.in_dim != dim:
                raise DimensionMismatchError(
                    f"layer {i}: expects input dim {layer.in_dim}, chain gives {dim}")
            if not (np.all(np.isfinite(layer.weight)) and np.all(np.isfinite(layer.bias))):
                raise WeightsFormatError(f"layer {i}: non-finite parameters")
            dim = layer.out_dim
        if dim != self.output_dim:
            raise DimensionMismatchError(
                f"declared output dim {self.output_dim}, layers produce {dim}")
        if self.role == "value" and self.output_dim != 1:
            raise WeightsFormatError("value networks must have output dim 1")
        if self.role == "policy-mean":
            if self.action_low is None or self.action_high is None:
                raise WeightsFormatError("policy-mean networks need action bounds")
            if len(self.action_low) != self.output_dim or \
                    len(self.action_high) != self.output_dim:
                raise DimensionMismatchError("action bounds must match output dim")

    def forward(self, x):
        """Raw network output before any squash or clip; x is (in,) or (n, in)."""
        h = np.asarray(x, dtype=np.float64)
        if h.shape[-1] != self.input_dim:
            raise DimensionMismatchError(
                f"input has dim {h.shape[-1]}, network expects {self.input_dim}")
        for layer in self.layers:
            h = _apply_activation(layer.activation, h @ layer.weight.T + layer.bias)
        return h

    def act(self, obs):
        """Policy mean mapped into the action box."""
        if self.role != "policy-mean":
            raise WeightsFormatError(f"act() on a {self.role} network")
        raw = self.forward(obs)
        low, high = self.action_low, self.action_high
        if self.squash == "tanh":
            return low + (np.tanh(raw) + 1.0) * 0.5 * (high - low)
        return np.clip(raw, low, high)

    def value(self, obs):
        if self.role != "value":
            raise WeightsFormatError(f"value() on a {self.role} network")
        out = self.forward(obs)
        return float(out[..., 0]) if out.ndim == 1 else out[..., 0]


def num_parameters(net: PortableNetwork) -> int:
    return sum(l.weight.size + l.bias.size for l in net.layers)


def to_payload(net: PortableNetwork) -> dict:
    payload = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "role": net.role,
        "input_dim": net.input_dim,
        "output_dim": net.output_dim,
        "squash": net.squash,
        "layers": [
            {
                "in_dim": l.in_dim,
                "out_dim": l.out_dim,
                "activation": l.activation,
                "weight": l.weight.tolist(),
                "bias": l.bias.tolist(),
            }
            for l in net.layers
        ],
    }
    if net.role == "policy-mean":
        payload["action_low"] = np.asarray(net.action_low).tolist()
        payload["action_high"] = np.asarray(net.action_high).tolist()
    if net.probes:
        payload["probes"] = [
            {"input": np.asarray(i).tolist(), "output": np.asarray(o).tolist()}
            for i, o in net.probes
        ]
    return payload


def from_payload(payload: dict) -> PortableNetwork:
    if not isinstance(payload, dict) or payload.get("format") != FORMAT_NAME:
        raise WeightsFormatError("not a portable weights payload")
    if payload.get("version") != FORMAT_VERSION:
        raise WeightsFormatError(
            f"unsupported weights version {payload.get('version')!r}")
    try:
        layers = [
            Layer(
                weight=np.asarray(spec["weight"], dtype=np.float64),
                bias=np.asarray(spec["bias"], dtype=np.float64),
                activation=spec["activation"],
            )
            for spec in payload["layers"]
        ]
        for spec, layer in zip(payload["layers"], layers):
            if (spec["in_dim"], spec["out_dim"]) != (layer.in_dim, layer.out_dim):
                raise DimensionMismatchError(
                    "declared layer dims disagree with the weight matrix")
        net = PortableNetwork(
            role=payload["role"],
            input_dim=int(payload["input_dim"]),
            output_dim=int(payload["output_dim"]),
            layers=layers,
            squash=payload.get("squash", "none"),
            action_low=np.asarray(payload["action_low"], dtype=np.float64)
            if "action_low" in payload else None,
            action_high=np.asarray(payload["action_high"], dtype=np.float64)
            if "action_high" in payload else None,
            probes=[(np.asarray(p["input"], dtype=np.float64),
                     np.asarray(p["output"], dtype=np.float64))
                    for p in payload.get("probes", [])],
        )
    except (KeyError, TypeError) as exc:
        raise WeightsFormatError(f"malformed weights payload: {exc}") from exc
    return net


def save_network(net: PortableNetwork, path) -> None:
    with open(path, "w") as fh:
        json.dump(to_payload(net), fh, allow_nan=False)
        fh.write("\n")


def load_network(path) -> PortableNetwork:
    with open(path) as fh:
        try:
            payload = json.load(fh)
        except json.JSONDecodeError as exc:
            raise WeightsFormatError(f"{path}: not valid JSON: {exc}") from exc
    return from_payload(payload)


def check_probes(net: PortableNetwork, atol: float = 1e-5):
    """Replay embedded probes; returns (ok, max_abs_err, n_probes)."""
    if not net.probes:
        return True, 0.0, 0
    worst = 0.0
    for inp, out in net.probes:
        got = np.asarray(net.forward(inp), dtype=np.float64)
        if got.shape != out.shape:
            raise DimensionMismatchError(
                f"probe output shape {out.shape} vs forward {got.shape}")
        worst = max(worst, float(np.max(np.abs(got - out))))
    return worst <= atol, worst, len(net.probes)

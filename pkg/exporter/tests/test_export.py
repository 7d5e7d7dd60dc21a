"""Exporter round-trip and rejection behavior.

Fixtures synthesize checkpoint archives with torch alone, matching the zip
layout the real framework writes (policy.pth state dict + data JSON with a
pickled action space).
"""

import base64
import json
import pickle
import shutil
import subprocess
import zipfile
from types import SimpleNamespace

import numpy as np
import pytest
import torch

from ckptexport import (MissingActionBoundsError, UnsupportedActivationError,
                        UnsupportedLayerError, export_checkpoint)
from ckptexport.cli import main
from ckptexport.sb3zip import CheckpointFormatError, read_checkpoint


def make_state(obs_dim=3, hidden=(64, 64), act_dim=1, seed=0):
    g = torch.Generator().manual_seed(seed)
    state = {}
    for side in ("policy_net", "value_net"):
        dims = [obs_dim, *hidden]
        for i, (din, dout) in enumerate(zip(dims[:-1], dims[1:])):
            state[f"mlp_extractor.{side}.{2 * i}.weight"] = \
                torch.randn(dout, din, generator=g) * 0.3
            state[f"mlp_extractor.{side}.{2 * i}.bias"] = \
                torch.randn(dout, generator=g) * 0.05
    state["action_net.weight"] = torch.randn(act_dim, hidden[-1], generator=g) * 0.3
    state["action_net.bias"] = torch.zeros(act_dim)
    state["value_net.weight"] = torch.randn(1, hidden[-1], generator=g) * 0.3
    state["value_net.bias"] = torch.zeros(1)
    state["log_std"] = torch.zeros(act_dim)
    return state


def write_checkpoint(path, state, data=None, with_space=True):
    if data is None:
        data = {"policy_class": {":type:": "<class 'policies.ActorCriticPolicy'>"}}
        if with_space:
            space = SimpleNamespace(low=np.array([-2.0]), high=np.array([2.0]))
            data["action_space"] = {
                ":type:": "<class 'spaces.box.Box'>",
                ":serialized:": base64.b64encode(pickle.dumps(space)).decode(),
            }
    with zipfile.ZipFile(path, "w") as zf:
        zf.writestr("data", json.dumps(data))
        import io

        buf = io.BytesIO()
        torch.save(state, buf)
        zf.writestr("policy.pth", buf.getvalue())
        zf.writestr("_framework_version", "2.3.0")
        zf.writestr("system_info.txt", "synthetic fixture")
    return path


@pytest.fixture
def checkpoint(tmp_path):
    return write_checkpoint(tmp_path / "model.zip", make_state())


def load_weights(path):
    with open(path) as fh:
        return json.load(fh)


def numpy_forward(payload, x):
    h = np.asarray(x, dtype=np.float64)
    for layer in payload["layers"]:
        h = h @ np.asarray(layer["weight"]).T + np.asarray(layer["bias"])
        if layer["activation"] == "tanh":
            h = np.tanh(h)
        elif layer["activation"] == "relu":
            h = np.maximum(h, 0.0)
    return h


class TestExport:
    def test_policy_probe_roundtrip(self, checkpoint, tmp_path):
        out = tmp_path / "policy.json"
        manifest = export_checkpoint(checkpoint, "policy-mean", out)
        payload = load_weights(out)
        assert payload["format"] == "criticgate-weights"
        assert payload["version"] == 1
        assert payload["role"] == "policy-mean"
        assert payload["action_low"] == [-2.0]
        assert len(payload["probes"]) == 100
        worst = 0.0
        for probe in payload["probes"]:
            got = numpy_forward(payload, probe["input"])
            worst = max(worst, float(np.max(np.abs(got - probe["output"]))))
        assert worst <= 1e-5, f"probe replay off by {worst:.2e}"
        assert manifest.layer_shapes == [(3, 64), (64, 64), (64, 1)]
        assert manifest.activations == ["tanh", "tanh", "linear"]

    def test_value_probe_roundtrip(self, checkpoint, tmp_path):
        out = tmp_path / "value.json"
        manifest = export_checkpoint(checkpoint, "value", out)
        payload = load_weights(out)
        assert payload["role"] == "value"
        assert payload["output_dim"] == 1
        assert "action_low" not in payload
        for probe in payload["probes"]:
            got = numpy_forward(payload, probe["input"])
            assert np.max(np.abs(got - probe["output"])) <= 1e-5
        assert manifest.action_low is None

    def test_probe_outputs_recorded_from_source(self, checkpoint, tmp_path):
        # the recorded outputs must be the torch model's own, not a numpy
        # recomputation: replaying through torch reproduces them exactly
        out = tmp_path / "policy.json"
        manifest = export_checkpoint(checkpoint, "policy-mean", out)
        state, _ = read_checkpoint(checkpoint)
        mods = []
        for i in (0, 2):
            lin = torch.nn.Linear(*reversed(state[f"mlp_extractor.policy_net.{i}.weight"].shape))
            with torch.no_grad():
                lin.weight.copy_(state[f"mlp_extractor.policy_net.{i}.weight"])
                lin.bias.copy_(state[f"mlp_extractor.policy_net.{i}.bias"])
            mods += [lin, torch.nn.Tanh()]
        head = torch.nn.Linear(64, 1)
        with torch.no_grad():
            head.weight.copy_(state["action_net.weight"])
            head.bias.copy_(state["action_net.bias"])
        mods.append(head)
        with torch.no_grad():
            expect = torch.nn.Sequential(*mods)(
                torch.as_tensor(manifest.probe_inputs, dtype=torch.float32))
        assert np.array_equal(manifest.probe_outputs,
                              expect.numpy().astype(np.float64))

    def test_deterministic_bytes(self, checkpoint, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        export_checkpoint(checkpoint, "policy-mean", a)
        export_checkpoint(checkpoint, "policy-mean", b)
        assert a.read_bytes() == b.read_bytes()

    def test_relu_declared_in_metadata(self, tmp_path):
        data = {"policy_kwargs": {"activation_fn": {
            ":type:": "<class 'torch.nn.modules.activation.ReLU'>"}}}
        space = SimpleNamespace(low=np.array([-1.0]), high=np.array([1.0]))
        data["action_space"] = {
            ":serialized:": base64.b64encode(pickle.dumps(space)).decode()}
        ckpt = write_checkpoint(tmp_path / "m.zip", make_state(), data=data)
        out = tmp_path / "w.json"
        manifest = export_checkpoint(ckpt, "policy-mean", out)
        assert manifest.activations == ["relu", "relu", "linear"]
        payload = load_weights(out)
        for probe in payload["probes"]:
            got = numpy_forward(payload, probe["input"])
            assert np.max(np.abs(got - probe["output"])) <= 1e-5


class TestRejection:
    def test_recurrent_layer_rejected(self, tmp_path):
        state = make_state()
        state["lstm.weight_ih_l0"] = torch.zeros(8, 3)
        ckpt = write_checkpoint(tmp_path / "m.zip", state)
        with pytest.raises(UnsupportedLayerError, match="lstm.weight_ih_l0"):
            export_checkpoint(ckpt, "policy-mean", tmp_path / "w.json")

    def test_conv_parameter_rejected(self, tmp_path):
        state = make_state()
        state["mlp_extractor.policy_net.0.weight"] = torch.zeros(8, 3, 3, 3)
        ckpt = write_checkpoint(tmp_path / "m.zip", state)
        with pytest.raises(UnsupportedLayerError, match="4-dimensional"):
            export_checkpoint(ckpt, "policy-mean", tmp_path / "w.json")

    def test_unsupported_activation_rejected(self, tmp_path):
        data = {"policy_kwargs": {"activation_fn": {
            ":type:": "<class 'torch.nn.modules.activation.ELU'>"}}}
        ckpt = write_checkpoint(tmp_path / "m.zip", make_state(), data=data)
        with pytest.raises(UnsupportedActivationError):
            export_checkpoint(ckpt, "value", tmp_path / "w.json")

    def test_missing_bounds_rejected(self, tmp_path):
        ckpt = write_checkpoint(tmp_path / "m.zip", make_state(),
                                with_space=False,
                                data={"policy_class": "x"})
        with pytest.raises(MissingActionBoundsError):
            export_checkpoint(ckpt, "policy-mean", tmp_path / "w.json")
        # explicit bounds unblock the export
        export_checkpoint(ckpt, "policy-mean", tmp_path / "w.json",
                          action_low=[-2.0], action_high=[2.0])

    def test_broken_chain_rejected(self, tmp_path):
        state = make_state()
        state["mlp_extractor.policy_net.2.weight"] = torch.zeros(64, 32)
        ckpt = write_checkpoint(tmp_path / "m.zip", state)
        with pytest.raises(CheckpointFormatError, match="chain"):
            export_checkpoint(ckpt, "policy-mean", tmp_path / "w.json")

    def test_not_an_archive(self, tmp_path):
        bad = tmp_path / "m.zip"
        bad.write_text("nope")
        with pytest.raises(CheckpointFormatError):
            export_checkpoint(bad, "value", tmp_path / "w.json")

    def test_missing_state_dict_member(self, tmp_path):
        path = tmp_path / "m.zip"
        with zipfile.ZipFile(path, "w") as zf:
            zf.writestr("data", "{}")
        with pytest.raises(CheckpointFormatError, match="policy.pth"):
            export_checkpoint(path, "value", tmp_path / "w.json")


class TestCli:
    def test_export_both_roles(self, checkpoint, tmp_path, capsys):
        out = tmp_path / "p.json"
        rc = main(["export", "--checkpoint", str(checkpoint),
                   "--role", "policy", "--out", str(out),
                   "--manifest", str(tmp_path / "manifest.json")])
        assert rc == 0
        assert "chain=3-64-64-1" in capsys.readouterr().out
        with open(tmp_path / "manifest.json") as fh:
            manifest = json.load(fh)
        assert manifest["n_probes"] == 100
        assert main(["export", "--checkpoint", str(checkpoint),
                     "--role", "value", "--out", str(tmp_path / "v.json")]) == 0

    def test_failure_exit_code(self, tmp_path, capsys):
        bad = tmp_path / "m.zip"
        bad.write_text("nope")
        rc = main(["export", "--checkpoint", str(bad), "--role", "value",
                   "--out", str(tmp_path / "w.json")])
        assert rc == 1
        assert "error:" in capsys.readouterr().err


@pytest.mark.skipif(shutil.which("criticgate") is None,
                    reason="primary package CLI not installed")
class TestPrimaryRoundTrip:
    def test_export_check_accepts_both_roles(self, checkpoint, tmp_path):
        for role in ("policy", "value"):
            out = tmp_path / f"{role}.json"
            assert main(["export", "--checkpoint", str(checkpoint),
                         "--role", role, "--out", str(out)]) == 0
            proc = subprocess.run(["criticgate", "export-check", str(out)],
                                  capture_output=True, text=True)
            assert proc.returncode == 0, proc.stderr
            assert proc.stdout.startswith("ok:")

    def test_export_check_rejects_tampered_weights(self, checkpoint, tmp_path):
        out = tmp_path / "p.json"
        main(["export", "--checkpoint", str(checkpoint), "--role", "policy",
              "--out", str(out)])
        payload = load_weights(out)
        payload["layers"][0]["weight"][0][0] += 0.25
        with open(out, "w") as fh:
            json.dump(payload, fh)
        proc = subprocess.run(["criticgate", "export-check", str(out)],
                              capture_output=True, text=True)
        assert proc.returncode == 1
        assert "FAIL" in proc.stdout

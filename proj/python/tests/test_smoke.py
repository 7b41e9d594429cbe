"""Smoke tests for the Python module and the cross-language interfaces.

The wire formats are checked against independent pure-Python readers, so a
drift between the C++ writers and the documented layout fails here.
"""

import json
import math
import os
import shutil
import struct
import subprocess

import numpy as np
import pytest

import archfuzz


def parse_trace_bytes(data):
    """Minimal reader for the trace container, written from the format doc."""
    assert data[:4] == b"AFTR"
    version, manifest_len = struct.unpack_from("<IQ", data, 4)
    manifest = json.loads(data[16 : 16 + manifest_len].decode("utf-8"))
    blobs = data[16 + manifest_len :]
    assert manifest["version"] == version
    assert manifest["blob_bytes"] == len(blobs)

    def blob(ref):
        if ref is None:
            return None
        raw = blobs[ref["offset"] : ref["offset"] + ref["length"]]
        return np.frombuffer(raw, dtype="<f4").reshape(ref["shape"])

    return manifest, blob


@pytest.fixture()
def models(tmp_path):
    ids = archfuzz.generate(tmp_path / "models", n_models=4, seed=3)
    return tmp_path, ids


def test_module_surface():
    names = archfuzz.backends()
    assert names[:2] == ["naive", "reordered"]
    assert len(archfuzz.fault_classes()) == 6
    assert all("naive+" + f in names for f in archfuzz.fault_classes())


def test_model_spec_directory_format(models):
    root, ids = models
    assert ids == ["m00000", "m00001", "m00002", "m00003"]
    model_dir = root / "models" / ids[0]
    manifest = json.loads((model_dir / "model.json").read_text())
    assert manifest["format"] == "archfuzz-model"
    for key in ("model_id", "seed", "batch_size", "loss", "input_shape", "output_shape",
                "nodes", "edges", "input", "labels"):
        assert key in manifest
    refs = [manifest["input"], manifest["labels"]]
    for node in manifest["nodes"]:
        refs.extend(node["weights"])
    for ref in refs:
        assert ref["dtype"] == "f32"
        raw = (model_dir / ref["file"]).read_bytes()
        assert len(raw) == 4 * math.prod(ref["shape"])
    inputs = np.frombuffer((model_dir / "input.bin").read_bytes(), dtype="<f4")
    assert inputs.shape[0] == manifest["batch_size"] * math.prod(manifest["input_shape"])
    assert np.all(np.abs(inputs) <= 1.0)
    for node in manifest["nodes"]:
        for ref in node["weights"]:
            w = np.frombuffer((model_dir / ref["file"]).read_bytes(), dtype="<f4")
            assert np.all(np.abs(w) <= 0.5)


def test_trace_format_matches_independent_reader(models):
    root, ids = models
    path = root / "naive.trace"
    assert archfuzz.run(root / "models" / ids[0], "naive", path) == "ok"
    manifest, blob = parse_trace_bytes(path.read_bytes())
    bundle = archfuzz.read_trace(path)
    assert manifest["backend_id"] == bundle["backend_id"] == "naive"
    assert manifest["outcome"] == bundle["outcome"] == "ok"
    assert len(manifest["nodes"]) == len(bundle["nodes"])
    for node, fc, bc in zip(manifest["nodes"], bundle["fc"], bundle["bc"]):
        np.testing.assert_array_equal(blob(node["fc"]), fc)
        for ref, grad in zip(node["bc"] or [], bc):
            np.testing.assert_array_equal(blob(ref), grad)
    np.testing.assert_array_equal(blob(manifest["lo"]), bundle["lo"])
    np.testing.assert_array_equal(blob(manifest["lg"]), bundle["lg"])


def test_write_trace_round_trip_with_special_values(tmp_path):
    payload = np.array([[np.nan, -np.inf], [np.inf, -0.0]], dtype=np.float32)
    bundle = {
        "backend_id": "adapter-x",
        "model_id": "m00042",
        "loss": "mean_squared_error",
        "outcome": "nan",
        "message": "non-finite values in trace",
        "nodes": [{"id": 0, "kind": "Input", "preds": []},
                  {"id": 1, "kind": "Dense", "preds": [0]}],
        "fc": [payload, None],
        "bc": [[], [payload]],
        "lo": np.array([np.nan], dtype=np.float32),
        "lg": None,
    }
    path = tmp_path / "x.trace"
    archfuzz.write_trace(bundle, path)
    back = archfuzz.read_trace(path)
    assert back["fc"][1] is None and back["lg"] is None
    assert back["fc"][0].tobytes() == payload.tobytes()
    assert back["bc"][1][0].tobytes() == payload.tobytes()
    again = tmp_path / "y.trace"
    archfuzz.write_trace(back, again)
    assert path.read_bytes() == again.read_bytes()


def test_corrupt_trace_raises(tmp_path):
    path = tmp_path / "bad.trace"
    path.write_bytes(b"AFTR" + b"\x09\x00\x00\x00" + b"\x00" * 8)
    with pytest.raises(archfuzz.TraceError):
        archfuzz.read_trace(path)


def test_chebyshev():
    assert archfuzz.chebyshev(np.array([1, 2, 3]), np.array([1, 2.5, 1])) == (2.0, False)
    _, tainted = archfuzz.chebyshev(np.array([np.nan, 0.0]), np.array([0.0, 0.0]))
    assert tainted


def test_compare_flags_mutant(tmp_path):
    ids = archfuzz.generate(tmp_path / "models", n_models=30, trigger_bias=True)
    paths = []
    for mid in ids:
        for backend in ("naive", "reordered", "naive+hinge-no-divide"):
            out = tmp_path / "traces" / mid / (backend + ".trace")
            out.parent.mkdir(parents=True, exist_ok=True)
            archfuzz.run(tmp_path / "models" / mid, backend, out)
            paths.append(out)
    report = archfuzz.compare(paths)
    lc = [f for f in report["findings"] if f["stage"] == "LC"]
    assert lc and all("naive+hinge-no-divide" in (f["backend_a"], f["backend_b"]) for f in lc)
    votes = {(v["stage"], v["kind"]): v["implicated"] for v in report["votes"]}
    assert votes[("LC", "categorical_hinge")] == "naive+hinge-no-divide"


def test_campaign_and_coverage(tmp_path):
    config = "n_models = 6\nbackends = naive, reordered\nparallelism = 2\n"
    summary = archfuzz.run_campaign(config, workdir=tmp_path / "wd")
    assert summary["jobs"] == 12
    assert summary["report"]["findings"] == []
    assert not summary["has_issues"]
    assert archfuzz.coverage(tmp_path / "wd") == summary["coverage"]
    with pytest.raises(archfuzz.ConfigError):
        archfuzz.run_campaign("backends = naive\n")


def test_gradient_check(models):
    root, ids = models
    result = archfuzz.check_gradients(root / "models" / ids[1])
    assert result["evaluable"]
    assert result["max_rel_error"] < 1e-3


def cli():
    path = os.environ.get("ARCHFUZZ_CLI") or shutil.which("archfuzz")
    if not path:
        pytest.skip("archfuzz CLI not available")
    return path


def test_cli_run_exit_codes(models):
    root, ids = models
    model = str(root / "models" / ids[0])
    ok = subprocess.run([cli(), "run", "--model", model, "--backend", "naive",
                         "--trace-out", str(root / "a.trace")])
    assert ok.returncode == 0
    crash = subprocess.run([cli(), "run", "--model", model, "--backend", "naive+debug-throw",
                            "--trace-out", str(root / "b.trace")], capture_output=True, text=True)
    assert crash.returncode == 2
    assert "simulated kernel failure" in crash.stderr
    assert archfuzz.read_trace(root / "b.trace")["outcome"] == "crash"
    bad = subprocess.run([cli(), "run", "--model", str(root / "missing"), "--backend", "naive",
                          "--trace-out", str(root / "c.trace")], capture_output=True)
    assert bad.returncode == 3


def test_cli_compare_manifest(models):
    root, ids = models
    traces = root / "traces"
    for backend in ("naive", "naive+debug-throw"):
        subprocess.run([cli(), "run", "--model", str(root / "models" / ids[0]), "--backend",
                        backend, "--trace-out", str(traces / (backend + ".trace"))])
    out = subprocess.run([cli(), "compare", "--traces", str(traces), "--report",
                          str(root / "report.json"), "--format", "manifest"],
                         capture_output=True, text=True)
    assert out.returncode == 1  # a crash event survives
    report = json.loads((root / "report.json").read_text())
    assert report == json.loads(out.stdout)
    assert report["crash_events"][0]["crashed"] == ["naive+debug-throw"]

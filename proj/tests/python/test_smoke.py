"""Smoke checks for the Python bindings; deeper behavior lives in the C++ suite."""

import json
import math
import os
import tempfile

import numpy as np

import _catenc as catenc


def test_contrast_table():
    t = catenc.contrast_table("helmert", 5)
    assert t.shape == (5, 4)
    assert np.allclose(t.sum(axis=0), 0.0, atol=1e-12)
    one = catenc.contrast_table("onehot", 4)
    assert np.allclose(one, np.eye(4)[:, 1:])


def test_simulate_and_encode():
    sim = catenc.simulate(n=600, num_latent=2, num_groups=10, p=4,
                          setup="latent_linear", seed=7)
    x, g, y = sim["x"], sim["g"], sim["y"]
    assert x.shape == (600, 4)
    labels = [sim["categories"][i] for i in g]
    assert len(set(labels)) == 10

    enc = catenc.fit_encoder("means", x, labels, y=y)
    assert enc.output_dim == 4
    s, cols = enc.transform(labels)
    assert s.shape == (600, 4)
    assert cols == ["means_1", "means_2", "means_3", "means_4"]
    omega = catenc.group_averages(x, g, 10)
    assert np.allclose(s[0], omega[:, g[0]])

    lr = catenc.fit_encoder("lowrank", x, labels, y=y, k=2)
    s2, _ = lr.transform(labels)
    assert s2.shape == (600, 2)

    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "enc.json")
        lr.save(path)
        back = catenc.load_encoder(path)
        s3, _ = back.transform(labels)
        assert np.array_equal(s2, s3)


def test_unseen_category():
    x = np.random.default_rng(0).normal(size=(30, 3))
    labels = ["a", "b", "c"] * 10
    enc = catenc.fit_encoder("permutation", x, labels, seed=3)
    s, _ = enc.transform(["a", "zzz"])
    assert s[1, 0] == 4.0  # M + 1 fallback


def test_numerics():
    a = np.random.default_rng(1).normal(size=(8, 5))
    u, d, v = catenc.svd(a)
    assert np.allclose(u @ np.diag(d) @ v.T, a, atol=1e-10)
    t, p = catenc.paired_t_test([2.0, 3.0, 4.0], [1.0, 1.0, 1.0])
    assert math.isclose(t, 3.4641016151377539, rel_tol=0, abs_tol=1e-9)
    assert math.isclose(p, 0.074179900227448553, rel_tol=0, abs_tol=1e-9)


def test_benchmark_roundtrip():
    cfg = {
        "source": {"type": "simulate", "n": 240, "latent": 2, "groups": 8,
                   "p": 3, "setup": "latent_linear"},
        "methods": ["onehot", "means"],
        "folds": 3,
        "seeds": 2,
        "master_seed": 11,
    }
    text = json.dumps(cfg)
    out1 = catenc.run_benchmark(text, format="json")
    out2 = catenc.run_benchmark(text, format="json")
    assert out1 == out2
    parsed = json.loads(out1)
    assert [m["name"] for m in parsed["methods"]] == ["onehot", "means"]


def main():
    tests = [v for k, v in sorted(globals().items()) if k.startswith("test_")]
    for fn in tests:
        fn()
        print(f"{fn.__name__}: ok")
    print(f"{len(tests)} python smoke tests passed")


if __name__ == "__main__":
    main()

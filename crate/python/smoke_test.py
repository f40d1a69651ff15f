"""Smoke test for the lcquant extension module.

Build and install it first, e.g. `pip install maturin && maturin develop -m crates/python/Cargo.toml`
or `pip install crates/python`, then run `python python/smoke_test.py`.
"""

import os
import tempfile

import lcquant as lq


def check_quantizers():
    w = [-1.3, -0.4, 0.02, 0.6, 2.1]
    assert lq.binarize(w).decompress() == [-1.0, -1.0, 1.0, 1.0, 1.0]
    q, distortion, _ = lq.kmeans(w, 2, seed=1)
    assert len(set(q.decompress())) <= 2
    assert abs(distortion - q.distortion(w)) < 1e-12
    q = lq.quantize(w, "pow2:3")
    assert all(v in q.values for v in q.decompress())
    print("quantizers ok:", q)


def check_regression():
    x, y = lq.superres_pairs(80, side=8, seed=3)
    model = lq.Model.regression(x, y)
    ref = model.fit_reference()
    dc = lq.dc(model, ref, k=2)
    lc = lq.lc(model, ref, k=2)
    assert lc.compressed.evaluation["loss_train"] <= dc.evaluation["loss_train"] + 1e-12
    print(
        "regression: reference %.5f, DC %.5f, LC %.5f (%d iterations, converged=%s)"
        % (
            model.loss(ref),
            dc.evaluation["loss_train"],
            lc.compressed.evaluation["loss_train"],
            len(lc.trace) - 1,
            lc.converged,
        )
    )
    return model, lc.compressed


def check_classifier():
    x, labels = lq.synthetic_classes(600, n_classes=4, dim=8, seed=5)
    model = lq.Model.mlp(x[:500], labels[:500], [12], test_x=x[500:], test_labels=labels[500:], reference_epochs=10, seed=2)
    ref = model.fit_reference()
    result = lq.lc(model, ref, k=2, mu0=1e-3, growth=1.25, iters=10, seed=1)
    stats = result.compressed.stats()
    print("classifier: reference", model.evaluate(ref))
    print("classifier: LC", result.compressed.evaluation, "ratio x%.1f" % stats.rho)


def check_checkpoint(compressed):
    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "model.lcqk")
        lq.Checkpoint.from_compressed(compressed).save(path)
        back = lq.Checkpoint.load(path)
        assert back.params == compressed.params
    print("checkpoint ok:", back)


if __name__ == "__main__":
    print("lcquant", lq.__version__)
    check_quantizers()
    _, compressed = check_regression()
    check_classifier()
    check_checkpoint(compressed)
    print("smoke test passed")

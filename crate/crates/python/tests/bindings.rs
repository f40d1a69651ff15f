use std::ffi::CString;

use pyo3::prelude::*;
use pyo3::types::{PyDict, PyModule};

fn run(code: &str) {
    Python::attach(|py| {
        let m = PyModule::new(py, "lcquant").unwrap();
        lcquant::register(&m).unwrap();
        py.import("sys").unwrap().getattr("modules").unwrap().set_item("lcquant", &m).unwrap();
        let globals = PyDict::new(py);
        let code = CString::new(code).unwrap();
        if let Err(e) = py.run(&code, Some(&globals), None) {
            e.print(py);
            panic!("python snippet failed: {e}");
        }
    });
}

#[test]
fn quantizers() {
    run(r#"
import lcquant as lq
w = [-1.2, -0.9, -0.1, 0.05, 0.8, 1.3]
q = lq.binarize(w)
assert q.decompress() == [-1.0, -1.0, -1.0, 1.0, 1.0, 1.0]
q = lq.binarize_scale(w)
a = sum(abs(x) for x in w) / len(w)
assert abs(q.scale - a) < 1e-12
q = lq.ternarize([-0.7, -0.2, 0.3, 0.9])
assert q.decompress() == [-1.0, 0.0, 0.0, 1.0]
q = lq.pow2_quantize([0.3, -0.7, 3.0], 5)
assert q.decompress() == [0.25, -0.5, 1.0]
q, d, it = lq.kmeans([0.0, 0.1, 5.0, 5.2], 2, seed=3)
assert max(abs(a - b) for a, b in zip(sorted(q.values), [0.05, 5.1])) < 1e-12
assert abs(d - q.distortion([0.0, 0.1, 5.0, 5.2])) < 1e-12
assert len(q) == 4 and q.kind == "adaptive"
q = lq.quantize(w, "fixed:-1,0,1")
assert q.decompress() == [-1.0, -1.0, 0.0, 0.0, 1.0, 1.0]
try:
    lq.quantize(w, "octal")
    raise SystemExit("unknown scheme accepted")
except ValueError:
    pass
"#);
}

#[test]
fn storage_counts() {
    run(r#"
import lcquant as lq
s = lq.compression_stats(266200, 410, 2)
assert s.bits_quantized == 266200 + 412 * 32
assert round(s.rho, 1) == 30.5
"#);
}

#[test]
fn regression_lc_round_trip() {
    run(r#"
import lcquant as lq
x, y = lq.superres_pairs(60, side=8, noise_sigma=0.05, seed=2)
assert len(x) == 60 and len(x[0]) == 16 and len(y[0]) == 64
m = lq.Model.regression(x, y)
ref = m.fit_reference()
assert m.n_quantizable == 16 * 64 and m.n_unquantized == 64
d = lq.dc(m, ref, k=2)
r = lq.lc(m, ref, k=2, iters=10)
assert r.trace[0]["outer_iter"] == 0
assert abs(r.trace[0]["loss_train"] - d.evaluation["loss_train"]) < 1e-12
best = min(t["loss_train"] for t in r.trace)
assert r.compressed.evaluation["loss_train"] <= d.evaluation["loss_train"] + 1e-12
assert r.converged or abs(r.compressed.evaluation["loss_train"] - best) < 1e-12
c, trace = lq.idc(m, ref, iters=3)
assert len(trace) == 4
ck = lq.Checkpoint.from_compressed(r.compressed)
back = lq.Checkpoint.from_bytes(ck.to_bytes())
assert back.params == r.compressed.params
assert back.quant[0].assignments == r.compressed.quant[0].assignments
assert back.kind == "linear_regression"
"#);
}

#[test]
fn mlp_training_and_errors() {
    run(r#"
import lcquant as lq
x, labels = lq.synthetic_classes(200, n_classes=3, dim=5, separation=6.0, seed=4)
m = lq.Model.mlp(x, labels, [6], epochs=1, reference_epochs=5, seed=1)
assert m.kind == "mlp" and m.layer_shapes == [(6, 5), (3, 6)]
ref = m.fit_reference()
e = m.evaluate(ref)
assert e["err_train"] < 20.0, e
r = lq.lc(m, ref, scheme="ternary_scale", mu0=1e-3, growth=1.5, iters=4, seed=2)
assert len(r.trace) == 5
for q in r.compressed.quant:
    assert len(set(q.decompress())) <= 3
s = r.compressed.stats()
assert s.p1 == m.n_quantizable and s.n_codebooks == 2
shared = lq.dc(m, ref, k=4, shared=True)
assert shared.stats().n_codebooks == 1
try:
    lq.Checkpoint.from_compressed(shared)
    raise SystemExit("shared codebook stored per layer")
except ValueError:
    pass
try:
    lq.lc(m, lq.Params([([0.0], [0.0])]))
    raise SystemExit("bad params accepted")
except ValueError:
    pass
try:
    lq.lc(m, ref, penalty="xx")
    raise SystemExit("bad penalty accepted")
except ValueError:
    pass
"#);
}
